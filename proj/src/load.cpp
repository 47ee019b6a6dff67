#include "wardwatch/load.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "wardwatch/clean.hpp"
#include "wardwatch/util/csv.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace ww {

namespace {

struct RawRows {
    std::vector<Admission> admissions;  // in file order, transfers/events attached later
    std::vector<TransferRecord> transfers;
    struct RawEvent {
        std::string admission_id;
        EventKind kind;
        std::string code;
        std::string value_text;
        std::string unit;
        Timestamp ts;
    };
    std::vector<RawEvent> events;
    std::vector<std::pair<std::string, Diagnosis>> diagnoses;
    std::vector<std::pair<std::string, std::string>> meds;
    std::vector<Violation> violations;
};

void load_admissions_csv(const std::string& path, RawRows& raw) {
    CsvReader r(path);
    const auto c_id = r.col("admission_id"), c_pat = r.col("patient_id"),
               c_fac = r.col("facility_cd"), c_adm = r.col("admit_ts"),
               c_dis = r.col("discharge_ts"), c_disp = r.col("disposition"),
               c_age = r.col("age"), c_gen = r.col("gender");
    std::vector<std::string> f;
    while (r.next(f)) {
        Admission a;
        a.admission_id = f[c_id];
        a.patient_id = f[c_pat];
        a.facility_cd = f[c_fac];
        auto admit = parse_iso8601(f[c_adm]);
        auto dis = parse_iso8601(f[c_dis]);
        auto disp = parse_disposition(f[c_disp]);
        auto age = parse_double(f[c_age]);
        auto gen = parse_gender(f[c_gen]);
        if (!admit || !dis) {
            raw.violations.push_back({a.admission_id, "unparsable timestamp", path});
            continue;
        }
        if (!disp || !gen || !age) {
            raw.violations.push_back({a.admission_id, "unparsable field", path});
            continue;
        }
        a.admit_ts = *admit;
        a.discharge_ts = *dis;
        a.disposition = *disp;
        a.age = *age;
        a.gender = *gen;
        raw.admissions.push_back(std::move(a));
    }
}

void load_transfers_csv(const std::string& path, RawRows& raw) {
    CsvReader r(path);
    const auto c_id = r.col("admission_id"), c_name = r.col("ward_name"),
               c_type = r.col("ward_type"), c_in = r.col("in_ts"), c_out = r.col("out_ts");
    std::vector<std::string> f;
    while (r.next(f)) {
        auto type = parse_ward_type(f[c_type]);
        auto in_ts = parse_iso8601(f[c_in]);
        auto out_ts = parse_iso8601(f[c_out]);
        if (!type || !in_ts || !out_ts) {
            raw.violations.push_back({f[c_id], "unparsable transfer", path});
            continue;
        }
        raw.transfers.push_back({f[c_id], f[c_name], *type, *in_ts, *out_ts});
    }
}

void load_events_csv(const std::string& path, RawRows& raw) {
    CsvReader r(path);
    const auto c_id = r.col("admission_id"), c_kind = r.col("kind"), c_code = r.col("code"),
               c_val = r.col("value_text"), c_unit = r.col("unit"), c_ts = r.col("ts");
    std::vector<std::string> f;
    while (r.next(f)) {
        auto kind = parse_event_kind(f[c_kind]);
        auto ts = parse_iso8601(f[c_ts]);
        if (!kind) {
            raw.violations.push_back({f[c_id], "unknown event kind", f[c_kind]});
            continue;
        }
        if (!ts) {
            raw.violations.push_back({f[c_id], "unparsable timestamp", f[c_ts]});
            continue;
        }
        raw.events.push_back({f[c_id], *kind, f[c_code], f[c_val], f[c_unit], *ts});
    }
}

void load_diagnoses_csv(const std::string& path, RawRows& raw) {
    CsvReader r(path);
    const auto c_id = r.col("admission_id"), c_code = r.col("icd10_code"), c_rank = r.col("rank");
    std::vector<std::string> f;
    while (r.next(f)) {
        auto rank = parse_int(f[c_rank]);
        raw.diagnoses.push_back({f[c_id], {f[c_code], rank ? static_cast<int>(*rank) : 1}});
    }
}

void load_meds_csv(const std::string& path, RawRows& raw) {
    CsvReader r(path);
    const auto c_id = r.col("admission_id"), c_code = r.col("atc_code");
    std::vector<std::string> f;
    while (r.next(f)) raw.meds.push_back({f[c_id], f[c_code]});
}

void load_jsonl(const std::string& path, RawRows& raw) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object()) {
            raw.violations.push_back({"", "unparsable jsonl record", path});
            continue;
        }
        Admission a;
        try {
            a.admission_id = j.at("admission_id").get<std::string>();
            a.patient_id = j.at("patient_id").get<std::string>();
            a.facility_cd = j.at("facility_cd").get<std::string>();
            auto admit = parse_iso8601(j.at("admit_ts").get<std::string>());
            auto dis = parse_iso8601(j.at("discharge_ts").get<std::string>());
            auto disp = parse_disposition(j.at("disposition").get<std::string>());
            auto gen = parse_gender(j.at("gender").get<std::string>());
            if (!admit || !dis || !disp || !gen) throw std::runtime_error("bad field");
            a.admit_ts = *admit;
            a.discharge_ts = *dis;
            a.disposition = *disp;
            a.gender = *gen;
            a.age = j.at("age").get<double>();
            for (const auto& t : j.value("transfers", json::array())) {
                auto type = parse_ward_type(t.at("ward_type").get<std::string>());
                auto in_ts = parse_iso8601(t.at("in_ts").get<std::string>());
                auto out_ts = parse_iso8601(t.at("out_ts").get<std::string>());
                if (!type || !in_ts || !out_ts) throw std::runtime_error("bad transfer");
                raw.transfers.push_back({a.admission_id, t.at("ward_name").get<std::string>(),
                                         *type, *in_ts, *out_ts});
            }
            for (const auto& e : j.value("events", json::array())) {
                auto kind = parse_event_kind(e.at("kind").get<std::string>());
                auto ts = parse_iso8601(e.at("ts").get<std::string>());
                if (!kind || !ts) throw std::runtime_error("bad event");
                raw.events.push_back({a.admission_id, *kind, e.at("code").get<std::string>(),
                                      e.at("value_text").get<std::string>(),
                                      e.value("unit", ""), *ts});
            }
            for (const auto& d : j.value("diagnoses", json::array()))
                raw.diagnoses.push_back(
                    {a.admission_id,
                     {d.at("icd10_code").get<std::string>(), d.value("rank", 1)}});
            for (const auto& m : j.value("meds_on_admission", json::array()))
                raw.meds.push_back({a.admission_id, m.get<std::string>()});
        } catch (const std::exception& e) {
            raw.violations.push_back({a.admission_id, "unparsable jsonl record", e.what()});
            continue;
        }
        raw.admissions.push_back(std::move(a));
    }
}

}  // namespace

Dataset validate_dataset(std::vector<Admission> admissions) {
    Dataset ds;

    // Keep-first on duplicate ids; order then canonicalized by id.
    std::unordered_set<std::string> seen;
    for (auto& a : admissions) {
        if (!seen.insert(a.admission_id).second) {
            ds.violations.push_back({a.admission_id, "duplicate admission", ""});
            continue;
        }
        ds.admissions.push_back(std::move(a));
    }

    std::vector<Admission> kept;
    kept.reserve(ds.admissions.size());
    for (auto& a : ds.admissions) {
        if (a.age < 0) {
            ds.violations.push_back({a.admission_id, "negative age", ""});
            continue;
        }
        if (!(a.admit_ts < a.discharge_ts)) {
            ds.violations.push_back({a.admission_id, "discharge before admit", ""});
            continue;
        }
        kept.push_back(std::move(a));
    }
    ds.admissions = std::move(kept);

    for (auto& a : ds.admissions) {
        // Transfers: ordered, positive length, contiguous cover of the stay.
        std::stable_sort(a.transfers.begin(), a.transfers.end(),
                         [](const TransferRecord& x, const TransferRecord& y) {
                             return x.in_ts < y.in_ts;
                         });
        std::vector<TransferRecord> tr;
        for (auto& t : a.transfers) {
            if (!(t.in_ts < t.out_ts)) {
                ds.violations.push_back({a.admission_id, "empty transfer segment", t.ward_name});
                continue;
            }
            tr.push_back(std::move(t));
        }
        a.transfers = std::move(tr);
        bool covered = !a.transfers.empty() && a.transfers.front().in_ts == a.admit_ts &&
                       a.transfers.back().out_ts == a.discharge_ts;
        for (std::size_t i = 0; covered && i + 1 < a.transfers.size(); ++i)
            covered = a.transfers[i].out_ts == a.transfers[i + 1].in_ts;
        if (!covered)
            ds.violations.push_back({a.admission_id, "transfers do not cover stay", ""});

        // Events: clean values, enforce code shape and stay bounds, dedup.
        // Key (kind, code, ts) is unique afterwards; value conflicts keep the
        // last occurrence in file order.
        std::vector<ClinicalEvent> ev;
        ev.reserve(a.events.size());
        std::map<std::tuple<EventKind, std::string, std::int64_t>, std::size_t> index;
        for (auto& e : a.events) {
            if (e.ts < a.admit_ts || e.ts > a.discharge_ts) {
                ds.violations.push_back({a.admission_id, "event outside stay", e.code});
                continue;
            }
            if ((e.kind == EventKind::lab || e.kind == EventKind::fluid) &&
                !loinc_shape_valid(e.code)) {
                ds.violations.push_back({a.admission_id, "invalid loinc code", e.code});
                continue;
            }
            if (e.kind != EventKind::med_admin && !e.value.has_value()) {
                ds.violations.push_back({a.admission_id, "unusable value", e.code});
                continue;
            }
            if (e.kind == EventKind::lab && e.value.has_value()) {
                auto [v, u] = canonicalize_unit(e.code, *e.value, e.unit);
                e.value = v;
                e.unit = u;
            }
            auto key = std::make_tuple(e.kind, e.code, e.ts.s);
            auto it = index.find(key);
            if (it != index.end()) {
                if (ev[it->second].value == e.value) {
                    ds.violations.push_back({a.admission_id, "duplicate event", e.code});
                } else {
                    ds.violations.push_back({a.admission_id, "conflicting event value", e.code});
                    ev[it->second] = std::move(e);
                }
                continue;
            }
            index[key] = ev.size();
            ev.push_back(std::move(e));
        }
        std::stable_sort(ev.begin(), ev.end(),
                         [](const ClinicalEvent& x, const ClinicalEvent& y) {
                             if (x.ts != y.ts) return x.ts < y.ts;
                             if (x.kind != y.kind) return x.kind < y.kind;
                             return x.code < y.code;
                         });
        a.events = std::move(ev);

        std::stable_sort(a.diagnoses.begin(), a.diagnoses.end(),
                         [](const Diagnosis& x, const Diagnosis& y) { return x.rank < y.rank; });
    }

    std::sort(ds.admissions.begin(), ds.admissions.end(),
              [](const Admission& x, const Admission& y) {
                  return x.admission_id < y.admission_id;
              });
    return ds;
}

Dataset load_dataset(const std::vector<std::string>& paths, FileFormat format) {
    RawRows raw;
    for (const auto& p : paths) {
        if (!fs::exists(p)) throw std::runtime_error("unreadable file: " + p);
        if (format == FileFormat::jsonl) {
            load_jsonl(p, raw);
            continue;
        }
        std::string name = fs::path(p).filename().string();
        if (name.find("admissions") != std::string::npos) load_admissions_csv(p, raw);
        else if (name.find("transfers") != std::string::npos) load_transfers_csv(p, raw);
        else if (name.find("events") != std::string::npos) load_events_csv(p, raw);
        else if (name.find("diagnoses") != std::string::npos) load_diagnoses_csv(p, raw);
        else if (name.find("meds") != std::string::npos) load_meds_csv(p, raw);
        else throw std::runtime_error("unrecognized dataset file: " + p);
    }

    // Attach child rows to their admissions.
    std::unordered_map<std::string, std::size_t> by_id;
    for (std::size_t i = 0; i < raw.admissions.size(); ++i) {
        // Duplicates resolved in validate_dataset; attach to the first.
        by_id.emplace(raw.admissions[i].admission_id, i);
    }
    auto owner = [&](const std::string& id) -> Admission* {
        auto it = by_id.find(id);
        return it == by_id.end() ? nullptr : &raw.admissions[it->second];
    };
    for (auto& t : raw.transfers) {
        if (Admission* a = owner(t.admission_id)) a->transfers.push_back(std::move(t));
        else raw.violations.push_back({t.admission_id, "transfer for unknown admission", ""});
    }
    for (auto& e : raw.events) {
        if (Admission* a = owner(e.admission_id)) {
            ClinicalEvent ce;
            ce.admission_id = e.admission_id;
            ce.kind = e.kind;
            ce.code = std::move(e.code);
            ce.value = clean_lab_value(e.value_text);
            ce.unit = std::move(e.unit);
            ce.ts = e.ts;
            a->events.push_back(std::move(ce));
        } else {
            raw.violations.push_back({e.admission_id, "event for unknown admission", e.code});
        }
    }
    for (auto& [id, d] : raw.diagnoses) {
        if (Admission* a = owner(id)) a->diagnoses.push_back(std::move(d));
        else raw.violations.push_back({id, "diagnosis for unknown admission", d.icd10_code});
    }
    for (auto& [id, m] : raw.meds) {
        if (Admission* a = owner(id)) a->meds_on_admission.push_back(std::move(m));
        else raw.violations.push_back({id, "med for unknown admission", m});
    }

    Dataset ds = validate_dataset(std::move(raw.admissions));
    ds.violations.insert(ds.violations.begin(), raw.violations.begin(), raw.violations.end());
    return ds;
}

Dataset load_dataset_dir(const std::string& dir, FileFormat format) {
    std::vector<std::string> paths;
    if (format == FileFormat::jsonl) {
        paths.push_back((fs::path(dir) / "dataset.jsonl").string());
    } else {
        for (const char* name :
             {"admissions.csv", "transfers.csv", "events.csv", "diagnoses.csv", "meds.csv"}) {
            auto p = fs::path(dir) / name;
            if (fs::exists(p)) paths.push_back(p.string());
        }
    }
    if (paths.empty()) throw std::runtime_error("no dataset files found in " + dir);
    return load_dataset(paths, format);
}

void save_dataset(const Dataset& ds, const std::string& dir, FileFormat format) {
    fs::create_directories(dir);
    if (format == FileFormat::jsonl) {
        std::ofstream out(fs::path(dir) / "dataset.jsonl");
        if (!out) throw std::runtime_error("cannot write dataset.jsonl in " + dir);
        for (const auto& a : ds.admissions) {
            json j;
            j["admission_id"] = a.admission_id;
            j["patient_id"] = a.patient_id;
            j["facility_cd"] = a.facility_cd;
            j["admit_ts"] = format_iso8601(a.admit_ts);
            j["discharge_ts"] = format_iso8601(a.discharge_ts);
            j["disposition"] = to_string(a.disposition);
            j["age"] = a.age;
            j["gender"] = to_string(a.gender);
            json tr = json::array();
            for (const auto& t : a.transfers)
                tr.push_back({{"ward_name", t.ward_name},
                              {"ward_type", to_string(t.ward_type)},
                              {"in_ts", format_iso8601(t.in_ts)},
                              {"out_ts", format_iso8601(t.out_ts)}});
            j["transfers"] = std::move(tr);
            json ev = json::array();
            for (const auto& e : a.events)
                ev.push_back({{"kind", to_string(e.kind)},
                              {"code", e.code},
                              {"value_text", e.value ? format_double(*e.value) : ""},
                              {"unit", e.unit},
                              {"ts", format_iso8601(e.ts)}});
            j["events"] = std::move(ev);
            json dg = json::array();
            for (const auto& d : a.diagnoses)
                dg.push_back({{"icd10_code", d.icd10_code}, {"rank", d.rank}});
            j["diagnoses"] = std::move(dg);
            j["meds_on_admission"] = a.meds_on_admission;
            out << j.dump() << '\n';
        }
        return;
    }

    CsvWriter adm((fs::path(dir) / "admissions.csv").string(),
                  {"admission_id", "patient_id", "facility_cd", "admit_ts", "discharge_ts",
                   "disposition", "age", "gender"});
    CsvWriter tra((fs::path(dir) / "transfers.csv").string(),
                  {"admission_id", "ward_name", "ward_type", "in_ts", "out_ts"});
    CsvWriter eve((fs::path(dir) / "events.csv").string(),
                  {"admission_id", "kind", "code", "value_text", "unit", "ts"});
    CsvWriter dia((fs::path(dir) / "diagnoses.csv").string(),
                  {"admission_id", "icd10_code", "rank"});
    CsvWriter med((fs::path(dir) / "meds.csv").string(), {"admission_id", "atc_code"});
    for (const auto& a : ds.admissions) {
        adm.write_row({a.admission_id, a.patient_id, a.facility_cd, format_iso8601(a.admit_ts),
                       format_iso8601(a.discharge_ts), to_string(a.disposition),
                       format_double(a.age), to_string(a.gender)});
        for (const auto& t : a.transfers)
            tra.write_row({a.admission_id, t.ward_name, to_string(t.ward_type),
                           format_iso8601(t.in_ts), format_iso8601(t.out_ts)});
        for (const auto& e : a.events)
            eve.write_row({a.admission_id, to_string(e.kind), e.code,
                           e.value ? format_double(*e.value) : "", e.unit,
                           format_iso8601(e.ts)});
        for (const auto& d : a.diagnoses)
            dia.write_row({a.admission_id, d.icd10_code, std::to_string(d.rank)});
        for (const auto& m : a.meds_on_admission) med.write_row({a.admission_id, m});
    }
}

}  // namespace ww
