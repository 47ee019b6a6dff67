#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "wardwatch/util/timeutil.hpp"

namespace ww {

enum class EventKind { vital, lab, fluid, med_admin };

enum class WardType { general, icu, operating_room, recovery, neonatal_icu, emergency };

enum class Disposition { home, transfer, deceased, other };

enum class Gender { female, male, other };

const char* to_string(EventKind k);
const char* to_string(WardType w);
const char* to_string(Disposition d);
const char* to_string(Gender g);
std::optional<EventKind> parse_event_kind(const std::string& s);
std::optional<WardType> parse_ward_type(const std::string& s);
std::optional<Disposition> parse_disposition(const std::string& s);
std::optional<Gender> parse_gender(const std::string& s);

// One timestamped observation: a vital sign, lab result, fluid in/out
// measurement, or medication administration. Codes are LOINC for labs and
// fluids, short names (hr, spo2, ...) for vitals, ATC for medications.
struct ClinicalEvent {
    std::string admission_id;
    EventKind kind = EventKind::vital;
    std::string code;
    std::optional<double> value;  // absent for med_admin and unusable rows
    std::string unit;
    Timestamp ts;

    friend bool operator==(const ClinicalEvent&, const ClinicalEvent&) = default;
};

struct TransferRecord {
    std::string admission_id;
    std::string ward_name;
    WardType ward_type = WardType::general;
    Timestamp in_ts;
    Timestamp out_ts;

    friend bool operator==(const TransferRecord&, const TransferRecord&) = default;
};

struct Diagnosis {
    std::string icd10_code;
    int rank = 1;

    friend bool operator==(const Diagnosis&, const Diagnosis&) = default;
};

struct Admission {
    std::string admission_id;
    std::string patient_id;
    std::string facility_cd;
    Timestamp admit_ts;
    Timestamp discharge_ts;
    Disposition disposition = Disposition::home;
    double age = 0;  // years at admission
    Gender gender = Gender::female;
    std::vector<TransferRecord> transfers;  // contiguous, cover the stay
    std::vector<ClinicalEvent> events;      // within [admit_ts, discharge_ts]
    std::vector<Diagnosis> diagnoses;       // coded at discharge; consumed only from prior stays
    std::vector<std::string> meds_on_admission;  // ATC codes

    friend bool operator==(const Admission&, const Admission&) = default;
};

// A record that failed validation. Loading never aborts on bad rows; it
// reports them here and keeps going.
struct Violation {
    std::string admission_id;
    std::string what;
    std::string detail;
};

struct Dataset {
    std::vector<Admission> admissions;  // sorted by admission_id
    std::vector<Violation> violations;

    const Admission* find(const std::string& admission_id) const;
};

}  // namespace ww
