#pragma once

#include <string>

#include "wardwatch/core.hpp"
#include "wardwatch/featgen.hpp"
#include "wardwatch/gbdt.hpp"

namespace ww {
namespace serve {

// Model and schema loaded once at startup; every request scores against the
// same immutable pair, so concurrent handling needs no locks.
struct ScoringService {
    gbdt::GbdtModel model;
    featgen::FeatureSchema schema;
    double threshold = 0.5;  // alert_threshold from the model file when present
    std::string model_version;

    static ScoringService from_files(const std::string& model_path,
                                     const std::string& schema_path);
};

// Request body -> Admission. Throws std::runtime_error naming the offending
// field ("events[3].ts: not a valid timestamp ..."). Optional fields:
// patient_id (defaults to the admission id), facility_cd, discharge_ts
// (defaults past the last event for a mid-stay snapshot), transfers (a
// single covering segment is assumed when absent), meds_on_admission,
// diagnoses.
Admission admission_from_json(const std::string& body);

struct ScoreResult {
    double score = 0.0;  // probability
    bool alert = false;
    double threshold = 0.0;
    std::string model_version;
    Timestamp scored_at{0};  // max event ts, or admit_ts when events are empty
};

// The scoring kernel both the HTTP handler and the parity tests call:
// validate, take t = max event ts, build the feature row at t, predict.
ScoreResult score_admission(const ScoringService& svc, Admission adm);

// HTTP-free entry points so tests drive the exact server code paths.
// svc == nullptr answers as an unloaded model (503).
std::string handle_score(const ScoringService* svc, const std::string& body, int& status);
std::string handle_health(const ScoringService* svc, int& status);

// Blocking listener; serves POST /score and GET /health.
void run_server(const ScoringService* svc, const std::string& host, int port);

}  // namespace serve
}  // namespace ww
