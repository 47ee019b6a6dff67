#include "wardwatch/serve.hpp"

#include <algorithm>
#include <stdexcept>
#include <utility>

#include "httplib.h"
#include "json.hpp"
#include "wardwatch/load.hpp"
#include "wardwatch/util/timeutil.hpp"

namespace ww {
namespace serve {

namespace {

using nlohmann::ordered_json;

[[noreturn]] void fail(const std::string& path, const std::string& what) {
    throw std::runtime_error(path + ": " + what);
}

const ordered_json& require(const ordered_json& j, const std::string& field,
                            const std::string& path) {
    auto it = j.find(field);
    if (it == j.end()) fail(path.empty() ? field : path + "." + field, "required field missing");
    return *it;
}

std::string str_of(const ordered_json& v, const std::string& path) {
    if (!v.is_string()) fail(path, "expected a string");
    return v.get<std::string>();
}

double num_of(const ordered_json& v, const std::string& path) {
    if (!v.is_number()) fail(path, "expected a number");
    return v.get<double>();
}

Timestamp ts_of(const ordered_json& v, const std::string& path) {
    std::string s = str_of(v, path);
    auto t = parse_iso8601(s);
    if (!t) fail(path, "not a valid timestamp '" + s + "'");
    return *t;
}

}  // namespace

Admission admission_from_json(const std::string& body) {
    ordered_json j;
    try {
        j = ordered_json::parse(body);
    } catch (const ordered_json::parse_error& e) {
        throw std::runtime_error(std::string("invalid JSON: ") + e.what());
    }
    if (!j.is_object()) throw std::runtime_error("request body: expected a JSON object");

    Admission adm;
    adm.admission_id = str_of(require(j, "admission_id", ""), "admission_id");
    if (adm.admission_id.empty()) fail("admission_id", "must not be empty");
    adm.patient_id =
        j.contains("patient_id") ? str_of(j["patient_id"], "patient_id") : adm.admission_id;
    if (j.contains("facility_cd")) adm.facility_cd = str_of(j["facility_cd"], "facility_cd");
    adm.admit_ts = ts_of(require(j, "admit_ts", ""), "admit_ts");
    adm.discharge_ts = adm.admit_ts;  // placeholder; score_admission extends it past the events
    if (j.contains("discharge_ts")) adm.discharge_ts = ts_of(j["discharge_ts"], "discharge_ts");
    adm.age = num_of(require(j, "age", ""), "age");
    std::string gender = str_of(require(j, "gender", ""), "gender");
    if (auto g = parse_gender(gender)) adm.gender = *g;
    else fail("gender", "unknown value '" + gender + "'");
    if (j.contains("disposition")) {
        std::string d = str_of(j["disposition"], "disposition");
        if (auto v = parse_disposition(d)) adm.disposition = *v;
        else fail("disposition", "unknown value '" + d + "'");
    }

    if (j.contains("events")) {
        const auto& events = j["events"];
        if (!events.is_array()) fail("events", "expected an array");
        for (std::size_t i = 0; i < events.size(); ++i) {
            std::string path = "events[" + std::to_string(i) + "]";
            const auto& e = events[i];
            if (!e.is_object()) fail(path, "expected an object");
            ClinicalEvent ev;
            ev.admission_id = adm.admission_id;
            std::string kind = str_of(require(e, "kind", path), path + ".kind");
            if (auto k = parse_event_kind(kind)) ev.kind = *k;
            else fail(path + ".kind", "unknown value '" + kind + "'");
            ev.code = str_of(require(e, "code", path), path + ".code");
            if (e.contains("value") && !e["value"].is_null())
                ev.value = num_of(e["value"], path + ".value");
            if (e.contains("unit")) ev.unit = str_of(e["unit"], path + ".unit");
            ev.ts = ts_of(require(e, "ts", path), path + ".ts");
            adm.events.push_back(std::move(ev));
        }
    }

    if (j.contains("transfers")) {
        const auto& transfers = j["transfers"];
        if (!transfers.is_array()) fail("transfers", "expected an array");
        for (std::size_t i = 0; i < transfers.size(); ++i) {
            std::string path = "transfers[" + std::to_string(i) + "]";
            const auto& t = transfers[i];
            if (!t.is_object()) fail(path, "expected an object");
            TransferRecord tr;
            tr.admission_id = adm.admission_id;
            if (t.contains("ward_name")) tr.ward_name = str_of(t["ward_name"], path + ".ward_name");
            std::string type = str_of(require(t, "ward_type", path), path + ".ward_type");
            if (auto w = parse_ward_type(type)) tr.ward_type = *w;
            else fail(path + ".ward_type", "unknown value '" + type + "'");
            tr.in_ts = ts_of(require(t, "in_ts", path), path + ".in_ts");
            tr.out_ts = ts_of(require(t, "out_ts", path), path + ".out_ts");
            adm.transfers.push_back(std::move(tr));
        }
    }

    if (j.contains("meds_on_admission")) {
        const auto& meds = j["meds_on_admission"];
        if (!meds.is_array()) fail("meds_on_admission", "expected an array");
        for (std::size_t i = 0; i < meds.size(); ++i)
            adm.meds_on_admission.push_back(
                str_of(meds[i], "meds_on_admission[" + std::to_string(i) + "]"));
    }

    if (j.contains("diagnoses")) {
        const auto& diags = j["diagnoses"];
        if (!diags.is_array()) fail("diagnoses", "expected an array");
        for (std::size_t i = 0; i < diags.size(); ++i) {
            std::string path = "diagnoses[" + std::to_string(i) + "]";
            const auto& d = diags[i];
            if (!d.is_object()) fail(path, "expected an object");
            Diagnosis dg;
            dg.icd10_code = str_of(require(d, "icd10_code", path), path + ".icd10_code");
            if (d.contains("rank")) dg.rank = static_cast<int>(num_of(d["rank"], path + ".rank"));
            adm.diagnoses.push_back(std::move(dg));
        }
    }
    return adm;
}

ScoringService ScoringService::from_files(const std::string& model_path,
                                          const std::string& schema_path) {
    ScoringService svc;
    svc.model = gbdt::load_model(model_path);
    svc.schema = featgen::read_schema_csv(schema_path);
    if (svc.schema.n_features() != svc.model.feature_names.size())
        throw std::runtime_error("schema '" + schema_path + "' has " +
                                 std::to_string(svc.schema.n_features()) +
                                 " features but model '" + model_path + "' expects " +
                                 std::to_string(svc.model.feature_names.size()));
    svc.threshold = svc.model.alert_threshold.value_or(0.5);
    svc.model_version = "wardwatch-gbdt-1 r" + std::to_string(svc.model.rounds) + " s" +
                        std::to_string(svc.model.params.seed);
    return svc;
}

ScoreResult score_admission(const ScoringService& svc, Admission adm) {
    // Mid-stay snapshots have no discharge yet; stretch the stay to cover
    // every event so validation keeps them all.
    Timestamp last = adm.admit_ts;
    for (const auto& e : adm.events)
        if (last < e.ts) last = e.ts;
    for (const auto& t : adm.transfers)
        if (last < t.out_ts) last = t.out_ts;
    if (adm.discharge_ts < last) adm.discharge_ts = last;
    if (!(adm.admit_ts < adm.discharge_ts)) adm.discharge_ts = adm.admit_ts + 1;
    if (adm.transfers.empty())
        adm.transfers.push_back({adm.admission_id, "", WardType::general, adm.admit_ts,
                                 adm.discharge_ts});

    std::string id = adm.admission_id;
    Dataset ds = validate_dataset({std::move(adm)});
    if (ds.admissions.empty()) {
        std::string why = ds.violations.empty() ? "rejected" : ds.violations.front().what;
        throw std::runtime_error("admission '" + id + "' failed validation: " + why);
    }

    const Admission& a = ds.admissions.front();
    Timestamp t = a.admit_ts;
    for (const auto& e : a.events)
        if (t < e.ts) t = e.ts;

    auto features = featgen::features_at(ds, a.admission_id, t, svc.schema);
    ScoreResult r;
    r.score = svc.model.predict(features);
    r.threshold = svc.threshold;
    r.alert = r.score >= svc.threshold;
    r.model_version = svc.model_version;
    r.scored_at = t;
    return r;
}

std::string handle_score(const ScoringService* svc, const std::string& body, int& status) {
    ordered_json resp;
    if (!svc) {
        status = 503;
        resp["error"] = "model not loaded";
        return resp.dump();
    }
    try {
        ScoreResult r = score_admission(*svc, admission_from_json(body));
        status = 200;
        resp["score"] = r.score;
        resp["alert"] = r.alert;
        resp["threshold"] = r.threshold;
        resp["model_version"] = r.model_version;
        resp["scored_at"] = format_iso8601(r.scored_at);
        return resp.dump();
    } catch (const std::exception& e) {
        status = 400;
        resp["error"] = e.what();
        return resp.dump();
    }
}

std::string handle_health(const ScoringService* svc, int& status) {
    ordered_json resp;
    status = svc ? 200 : 503;
    resp["status"] = svc ? "ok" : "no model";
    if (svc) resp["model_version"] = svc->model_version;
    return resp.dump();
}

void run_server(const ScoringService* svc, const std::string& host, int port) {
    httplib::Server server;
    server.Post("/score", [svc](const httplib::Request& req, httplib::Response& res) {
        int status = 200;
        std::string body = handle_score(svc, req.body, status);
        res.status = status;
        res.set_content(body, "application/json");
    });
    server.Get("/health", [svc](const httplib::Request&, httplib::Response& res) {
        int status = 200;
        std::string body = handle_health(svc, status);
        res.status = status;
        res.set_content(body, "application/json");
    });
    if (!server.listen(host, port))
        throw std::runtime_error("cannot listen on " + host + ":" + std::to_string(port));
}

}  // namespace serve
}  // namespace ww
