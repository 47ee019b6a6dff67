#include "wardwatch/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <tuple>

#include "wardwatch/cohort.hpp"
#include "wardwatch/load.hpp"
#include "wardwatch/util/csv.hpp"
#include "wardwatch/util/rng.hpp"

namespace ww {
namespace synth {

namespace {

// ---- code universe -------------------------------------------------------

struct LabDef {
    const char* code;
    const char* unit;
    int panel;
    double mean, sd, lo, hi;  // normal draw, clamped so controls stay unalarming
    int decimals;
};

constexpr const char* kPanelNames[] = {"cbc", "bmp", "abg", "cardiac", "lft"};
constexpr double kPanelProbDefault[] = {0.8, 0.9, 0.1, 0.05, 0.25};
constexpr int kNumPanels = 5;

// The clamp ranges keep spontaneous draws clear of the threshold-rule values
// (platelets >= 120e3, pH >= 7.31, pCO2 <= 59, troponin <= 0.29, lactate <= 2.9).
const LabDef kLabs[] = {
    {"777-3", "/uL", 0, 250000, 60000, 120000, 600000, 0},
    {"718-7", "g/dL", 0, 13, 1.5, 7, 18, 1},
    {"6690-2", "10*3/uL", 0, 8, 2.5, 2, 25, 1},
    {"789-8", "10*6/uL", 0, 4.6, 0.5, 2.5, 6.5, 2},
    {"4544-3", "%", 0, 40, 4, 20, 55, 1},
    {"2951-2", "mmol/L", 1, 139, 3, 125, 155, 0},
    {"2823-3", "mmol/L", 1, 4.1, 0.4, 2.5, 6.5, 1},
    {"2160-0", "mg/dL", 1, 1.0, 0.35, 0.4, 6, 2},
    {"3094-0", "mg/dL", 1, 16, 5, 4, 60, 0},
    {"2345-7", "mg/dL", 1, 110, 25, 50, 300, 0},
    {"2744-1", "pH", 2, 7.40, 0.03, 7.31, 7.55, 2},
    {"2019-8", "mmHg", 2, 40, 5, 25, 59, 0},
    {"2703-7", "mmHg", 2, 90, 10, 60, 130, 0},
    {"2524-7", "mmol/L", 2, 1.2, 0.4, 0.3, 2.9, 1},
    {"10839-9", "ug/L", 3, 0.02, 0.015, 0.005, 0.29, 3},
    {"1975-2", "mg/dL", 4, 0.8, 0.3, 0.2, 3, 1},
    {"1751-7", "g/dL", 4, 4.0, 0.4, 2, 5.5, 1},
    {"1920-8", "U/L", 4, 28, 10, 8, 200, 0},
    {"6768-6", "U/L", 4, 85, 25, 30, 300, 0},
    {"2885-2", "g/dL", 4, 7.0, 0.5, 5, 9, 1},
};
constexpr int kNumLabs = sizeof(kLabs) / sizeof(kLabs[0]);

// Indices into kLabs of the five threshold-rule analytes, and their
// alarming draw ranges (strictly beyond the rule thresholds).
struct AlarmDef {
    int lab;
    double lo, hi;
};
const AlarmDef kAlarms[] = {
    {14, 0.4, 4.0},        // troponin I > 0.3
    {10, 7.02, 7.27},      // pH < 7.30
    {11, 62, 95},          // pCO2 > 60
    {0, 20000, 95000},     // platelets < 100000
    {13, 3.2, 11},         // lactate > 3
};
// Stressed-but-normal ranges used for deteriorating cases that must not
// trip the threshold rules.
const AlarmDef kStressed[] = {
    {14, 0.08, 0.28},
    {10, 7.31, 7.36},
    {11, 48, 58},
    {0, 105000, 180000},
    {13, 1.8, 2.9},
};

struct VitalDef {
    const char* code;
    const char* unit;
    double mean, base_sd, obs_sd, lo, hi;
    double drift;  // added at full deterioration
};
const VitalDef kVitals[] = {
    {"hr", "bpm", 75, 6, 3, 30, 190, 35},
    {"rr", "breaths/min", 15, 2, 1.2, 6, 45, 11},
    {"spo2", "%", 97, 1, 0.8, 70, 100, -9},
    {"sbp", "mmHg", 122, 10, 6, 60, 220, -25},
    {"dbp", "mmHg", 72, 8, 4, 30, 130, -12},
    {"glucose", "mg/dL", 115, 20, 12, 40, 400, 0},
};
constexpr int kNumVitals = sizeof(kVitals) / sizeof(kVitals[0]);

constexpr const char* kFluidOral = "9102-5";
constexpr const char* kFluidIv = "9108-2";
constexpr const char* kFluidUrine = "9187-6";
constexpr const char* kFluidBalance = "9239-5";

const char* kMeds[] = {"B01AC06", "B01AB01", "C07AB02", "C09AA02", "N02BE01", "N02AA01",
                       "J01CR02", "J01DD04", "A02BC01", "C03CA01", "R03AC02", "H02AB09"};
constexpr int kNumMeds = sizeof(kMeds) / sizeof(kMeds[0]);

// Discharge diagnoses: a comorbidity-scoring pool plus neutral filler.
const char* kComorbidDx[] = {"I50.9", "I21.0", "I48", "E11.9", "E11.2", "J44.9", "N18.3",
                             "C34.1", "C78.0", "K70.3", "F32.9", "E66.9", "D50.9", "I10",
                             "M05.9", "G81.9", "B20", "I63.9", "F03", "D68.9"};
const char* kNeutralDx[] = {"M54.5", "R07.4", "K21.0", "S72.0", "J06.9", "A09", "R51", "N39.0"};

const char* kGeneralWards[] = {"3A", "3B", "4A", "4B", "5A"};

double round_to(double v, int decimals) {
    double scale = std::pow(10.0, decimals);
    return std::round(v * scale) / scale;
}

double clamp(double v, double lo, double hi) { return std::min(hi, std::max(lo, v)); }

std::string pad_id(char prefix, std::uint64_t n) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%c%06llu", prefix, static_cast<unsigned long long>(n));
    return buf;
}

constexpr std::int64_t kEpoch2021 = 1609459200;  // 2021-01-01T00:00:00Z

// Everything decided up front about one admission.
struct Plan {
    bool is_case = false;
    bool excluded = false;
    bool direct_icu = false;
    bool neonatal = false;
    bool planned_icu = false;
    bool signal = false;          // case shows pre-transfer deterioration
    bool icuww_hit = false;       // deterioration includes rule-tripping labs
    bool control_abnormal = false;
    Timestamp target{};           // ICU in-time for cases
    Timestamp lead_start{};       // deterioration onset
    Timestamp icu_end{};
    std::set<int> alarm_labs;     // indices into kAlarms
};

class AdmissionBuilder {
  public:
    AdmissionBuilder(const SynthConfig& cfg, Rng& rng) : cfg_(cfg), rng_(rng) {}

    // Index admission for slot i; optionally also emits the patient's
    // earlier admission.
    void build(std::uint64_t i, std::vector<Admission>& out, std::vector<IntendedLabel>& intents) {
        Admission a;
        a.admission_id = pad_id('A', i);
        a.patient_id = pad_id('P', i);
        a.facility_cd = "H" + std::to_string(1 + rng_.uniform_index(
                                  static_cast<std::uint64_t>(cfg_.n_facilities)));
        a.gender = rng_.bernoulli(0.5) ? Gender::female : Gender::male;
        a.age = round_to(rng_.uniform(18, 95), 1);
        a.admit_ts = {kEpoch2021 + rng_.uniform_int(0, 364) * kSecondsPerDay +
                      rng_.uniform_int(0, kSecondsPerDay - 1)};

        Plan plan = draw_plan(a);
        build_transfers(a, plan);
        fill_events(a, plan, /*light=*/false);
        fill_diagnoses(a, 1, 5, 0.4);
        fill_meds_on_admission(a);
        a.disposition = draw_disposition(plan);

        IntendedLabel intent{a.admission_id, plan.is_case, plan.excluded};

        if (!plan.neonatal && rng_.bernoulli(cfg_.prior_frac)) {
            Admission prior = build_prior(a, i);
            intents.push_back({prior.admission_id, false, false});
            out.push_back(std::move(prior));
        }
        intents.push_back(intent);
        out.push_back(std::move(a));
    }

  private:
    Plan draw_plan(Admission& a) {
        Plan p;
        double u = rng_.uniform();
        if (u < cfg_.prevalence) {
            p.is_case = true;
        } else if (u < cfg_.prevalence + cfg_.direct_icu_frac) {
            p.excluded = true;
            p.direct_icu = true;
        } else if (u < cfg_.prevalence + cfg_.direct_icu_frac + cfg_.neonatal_frac) {
            p.excluded = true;
            p.neonatal = true;
            a.age = round_to(rng_.uniform(0.05, 0.9), 2);
        } else {
            p.planned_icu = rng_.bernoulli(cfg_.planned_icu_frac);
            p.control_abnormal = rng_.bernoulli(cfg_.control_abnormal_frac);
        }
        if (p.is_case) {
            p.signal = !rng_.bernoulli(cfg_.no_signal_frac);
            if (p.signal) {
                // Conditional probability so the overall rule-tripping share
                // of cases comes out at icuww_frac.
                double p_hit = cfg_.icuww_frac / (1.0 - cfg_.no_signal_frac);
                p.icuww_hit = rng_.bernoulli(std::min(1.0, p_hit));
            }
            if (p.icuww_hit) {
                int n = static_cast<int>(rng_.uniform_int(1, 3));
                while (static_cast<int>(p.alarm_labs.size()) < n)
                    p.alarm_labs.insert(static_cast<int>(rng_.uniform_index(5)));
            }
        }
        return p;
    }

    const char* general_ward() {
        return kGeneralWards[rng_.uniform_index(sizeof(kGeneralWards) / sizeof(char*))];
    }

    std::int64_t hours_s(double h) { return static_cast<std::int64_t>(std::llround(h * 3600)); }

    void build_transfers(Admission& a, Plan& plan) {
        const std::string& id = a.admission_id;
        Timestamp t = a.admit_ts;
        auto seg = [&](const char* name, WardType w, double len_h) {
            Timestamp out = t + hours_s(len_h);
            a.transfers.push_back({id, name, w, t, out});
            t = out;
        };
        if (plan.is_case) {
            double pre_h = rng_.uniform(36, 192);
            double icu_h = rng_.uniform(24, 96);
            double post_h = rng_.uniform(12, 72);
            seg(general_ward(), WardType::general, pre_h);
            plan.target = t;
            seg("ICU", WardType::icu, icu_h);
            plan.icu_end = t;
            seg(general_ward(), WardType::general, post_h);
            double lead_h = rng_.uniform(cfg_.deterioration_lead_min_h,
                                         cfg_.deterioration_lead_max_h);
            lead_h = std::min(lead_h, pre_h - 2.0);
            plan.lead_start = plan.target - hours_s(lead_h);
        } else if (plan.direct_icu) {
            seg("ICU", WardType::icu, rng_.uniform(24, 96));
            seg(general_ward(), WardType::general, rng_.uniform(24, 120));
        } else if (plan.planned_icu) {
            seg(general_ward(), WardType::general, rng_.uniform(12, 48));
            seg("OR-1", WardType::operating_room, rng_.uniform(2, 6));
            seg("ICU", WardType::icu, rng_.uniform(12, 48));
            seg(general_ward(), WardType::general, rng_.uniform(24, 96));
        } else {
            double los_h = rng_.uniform(36, 156);
            if (rng_.bernoulli(0.3)) {
                double first = rng_.uniform(0.2, 0.8) * los_h;
                seg(general_ward(), WardType::general, first);
                seg(general_ward(), WardType::general, los_h - first);
            } else {
                seg(general_ward(), WardType::general, los_h);
            }
        }
        a.discharge_ts = t;
    }

    // Deterioration progress in [0, 1] at time t; 0 off the signal window.
    double drift_frac(const Plan& plan, Timestamp t) const {
        if (!plan.signal) return 0.0;
        if (t >= plan.lead_start && t < plan.target) {
            double span = static_cast<double>(plan.target - plan.lead_start);
            return span > 0 ? static_cast<double>(t - plan.lead_start) / span : 1.0;
        }
        if (t >= plan.target && t < plan.icu_end) return 1.0;  // still sick in the ICU
        return 0.0;
    }

    bool emit(Admission& a, EventKind kind, const std::string& code,
              std::optional<double> value, const std::string& unit, Timestamp ts) {
        if (!used_.insert({static_cast<int>(kind), code, ts.s}).second) return false;
        a.events.push_back({a.admission_id, kind, code, value, unit, ts});
        return true;
    }

    double lab_value(const LabDef& lab, int lab_idx, const Plan& plan, Timestamp t,
                     bool force_alarm) {
        bool in_lead = plan.signal && t >= plan.lead_start && t < plan.target;
        if (in_lead) {
            for (int k = 0; k < 5; ++k) {
                if (kAlarms[k].lab != lab_idx) continue;
                bool alarming =
                    plan.alarm_labs.count(k) && (force_alarm || rng_.bernoulli(0.8));
                const AlarmDef& r = alarming ? kAlarms[k] : kStressed[k];
                return round_to(rng_.uniform(r.lo, r.hi), lab.decimals);
            }
        }
        return round_to(clamp(rng_.normal(lab.mean, lab.sd), lab.lo, lab.hi), lab.decimals);
    }

    void fill_events(Admission& a, const Plan& plan, bool light) {
        used_.clear();

        // Observation rounds: all vitals of a round share one timestamp, and
        // fluids/meds are charted on round times, which keeps the number of
        // distinct instants (and so feature rows) proportional to rounds.
        std::vector<Timestamp> rounds;
        Timestamp t = a.admit_ts + hours_s(rng_.uniform(0.3, 1.2));
        double cmin = light ? 6.0 : cfg_.vitals_cadence_min_h;
        double cmax = light ? 10.0 : cfg_.vitals_cadence_max_h;
        while (t < a.discharge_ts) {
            rounds.push_back(t);
            t = t + hours_s(rng_.uniform(cmin, cmax));
        }
        if (rounds.empty()) rounds.push_back(a.admit_ts + 1800);

        double base[kNumVitals];
        for (int v = 0; v < kNumVitals; ++v) base[v] = rng_.normal(kVitals[v].mean, kVitals[v].base_sd);

        for (Timestamp rt : rounds) {
            double f = drift_frac(plan, rt);
            for (int v = 0; v < kNumVitals; ++v) {
                if (rng_.bernoulli(0.05)) continue;  // not every vital is charted every round
                const VitalDef& vd = kVitals[v];
                double val = base[v] + f * vd.drift + rng_.normal(0, vd.obs_sd);
                emit(a, EventKind::vital, vd.code, round_to(clamp(val, vd.lo, vd.hi), 0),
                     vd.unit, rt);
            }
        }
        if (light) {
            return;  // prior admissions carry vitals only
        }

        // Labs: one phlebotomy visit per day draws whichever panels come up.
        std::int64_t stay_s = a.discharge_ts - a.admit_ts;
        int n_days = static_cast<int>((stay_s + kSecondsPerDay - 1) / kSecondsPerDay);
        std::vector<Timestamp> draw_times;
        for (int d = 0; d < n_days; ++d) {
            Timestamp dt = a.admit_ts + d * kSecondsPerDay + hours_s(rng_.uniform(4, 20));
            if (dt >= a.discharge_ts || dt <= a.admit_ts) continue;
            draw_times.push_back(dt);
        }
        // Deteriorating cases get extra ABG/CBC/troponin draws in the window.
        struct Draw {
            Timestamp ts;
            bool lead_only;
            bool force_alarm;  // first window draw always shows the chosen analytes
        };
        std::vector<Draw> draws;
        for (Timestamp dt : draw_times) draws.push_back({dt, false, false});
        if (plan.signal) {
            Timestamp lt = plan.lead_start + hours_s(rng_.uniform(1, 6));
            bool first = true;
            while (lt < plan.target) {
                draws.push_back({lt, true, first && plan.icuww_hit});
                first = false;
                lt = lt + hours_s(rng_.uniform(8, 14));
            }
        }
        std::sort(draws.begin(), draws.end(),
                  [](const Draw& x, const Draw& y) { return x.ts < y.ts; });
        for (const Draw& dr : draws) {
            for (int p = 0; p < kNumPanels; ++p) {
                bool wanted;
                if (dr.lead_only) {
                    wanted = p == 2 || p == 0 || p == 3;  // abg, cbc, cardiac
                } else {
                    auto it = cfg_.lab_panel_prob.find(kPanelNames[p]);
                    double prob = it == cfg_.lab_panel_prob.end() ? 0.0 : it->second;
                    wanted = rng_.bernoulli(prob);
                }
                if (!wanted) continue;
                for (int li = 0; li < kNumLabs; ++li) {
                    if (kLabs[li].panel != p) continue;
                    emit(a, EventKind::lab, kLabs[li].code,
                         lab_value(kLabs[li], li, plan, dr.ts, dr.force_alarm), kLabs[li].unit,
                         dr.ts);
                }
            }
        }
        // A few controls throw one stray alarming value, which is what keeps
        // the threshold benchmark's specificity below 1.
        if (plan.control_abnormal) {
            const AlarmDef& r = kAlarms[rng_.uniform_index(5)];
            const LabDef& lab = kLabs[r.lab];
            Timestamp at = a.admit_ts + static_cast<std::int64_t>(
                               rng_.uniform(0.2, 0.8) * static_cast<double>(stay_s));
            emit(a, EventKind::lab, lab.code, round_to(rng_.uniform(r.lo, r.hi), lab.decimals),
                 lab.unit, at);
        }

        // Fluids and meds are charted on round times (no new instants), a
        // few times per admit-relative day.
        std::vector<std::vector<Timestamp>> by_day(static_cast<std::size_t>(n_days));
        for (Timestamp rt : rounds) {
            auto d = static_cast<std::size_t>((rt - a.admit_ts) / kSecondsPerDay);
            if (d < by_day.size()) by_day[d].push_back(rt);
        }
        for (auto& day_rounds : by_day) {
            if (day_rounds.empty()) continue;
            std::vector<Timestamp> picks = day_rounds;
            rng_.shuffle(picks);
            std::size_t k = std::min<std::size_t>(
                picks.size(), static_cast<std::size_t>(rng_.uniform_int(
                                  cfg_.fluids_per_day_min, cfg_.fluids_per_day_max)));
            for (std::size_t j = 0; j < k; ++j) {
                Timestamp ft = picks[j];
                double f = drift_frac(plan, ft);
                emit(a, EventKind::fluid, kFluidOral, round_to(rng_.uniform(0, 400), 0), "mL", ft);
                emit(a, EventKind::fluid, kFluidIv, round_to(rng_.uniform(50, 1500), 0), "mL", ft);
                double urine = clamp(rng_.normal(300, 120), 0, 900) * (1.0 - 0.7 * f);
                emit(a, EventKind::fluid, kFluidUrine, round_to(urine, 0), "mL", ft);
                double bal = clamp(rng_.normal(100, 350), -2000, 3000) + 900 * f;
                emit(a, EventKind::fluid, kFluidBalance, round_to(bal, 0), "mL", ft);
            }
        }

        std::vector<int> meds(kNumMeds);
        for (int m = 0; m < kNumMeds; ++m) meds[m] = m;
        rng_.shuffle(meds);
        meds.resize(static_cast<std::size_t>(rng_.uniform_int(2, 6)));
        active_meds_ = meds;
        for (int m : meds) {
            for (const auto& day_rounds : by_day) {
                if (day_rounds.empty()) continue;
                int k = static_cast<int>(rng_.uniform_int(1, 3));
                for (int j = 0; j < k; ++j) {
                    Timestamp mt = day_rounds[rng_.uniform_index(day_rounds.size())];
                    emit(a, EventKind::med_admin, kMeds[m], std::nullopt, "", mt);
                }
            }
        }
        if (plan.signal) {
            // Escalation meds during the window: diuretic and steroid.
            for (const char* code : {"C03CA01", "H02AB09"}) {
                for (int j = 0; j < 2; ++j) {
                    double u = rng_.uniform();
                    Timestamp mt = plan.lead_start +
                                   static_cast<std::int64_t>(
                                       u * static_cast<double>(plan.target - plan.lead_start));
                    // Snap to the nearest round at or before mt so no new
                    // scoring instant appears.
                    auto it = std::upper_bound(rounds.begin(), rounds.end(), mt);
                    if (it != rounds.begin()) --it;
                    emit(a, EventKind::med_admin, code, std::nullopt, "", *it);
                }
            }
        }
    }

    void fill_diagnoses(Admission& a, int lo, int hi, double comorbid_p) {
        int n = static_cast<int>(rng_.uniform_int(lo, hi));
        std::set<std::string> seen;
        int rank = 1;
        for (int i = 0; i < n; ++i) {
            const char* code;
            if (rng_.bernoulli(comorbid_p)) {
                code = kComorbidDx[rng_.uniform_index(sizeof(kComorbidDx) / sizeof(char*))];
            } else {
                code = kNeutralDx[rng_.uniform_index(sizeof(kNeutralDx) / sizeof(char*))];
            }
            if (!seen.insert(code).second) continue;
            a.diagnoses.push_back({code, rank++});
        }
    }

    void fill_meds_on_admission(Admission& a) {
        for (int m : active_meds_)
            if (rng_.bernoulli(0.5)) a.meds_on_admission.push_back(kMeds[m]);
    }

    Disposition draw_disposition(const Plan& plan) {
        double u = rng_.uniform();
        if (plan.is_case) {
            if (u < 0.12) return Disposition::deceased;
            if (u < 0.30) return Disposition::transfer;
            return Disposition::home;
        }
        if (u < 0.01) return Disposition::deceased;
        if (u < 0.11) return Disposition::transfer;
        if (u < 0.13) return Disposition::other;
        return Disposition::home;
    }

    Admission build_prior(const Admission& index, std::uint64_t i) {
        Admission p;
        p.admission_id = pad_id('A', i) + "P";
        p.patient_id = index.patient_id;
        p.facility_cd = index.facility_cd;
        p.gender = index.gender;

        std::int64_t gap_days = rng_.uniform_int(10, 330);
        double los_h = rng_.uniform(24, 96);
        p.discharge_ts = index.admit_ts - gap_days * kSecondsPerDay -
                         rng_.uniform_int(0, kSecondsPerDay - 1);
        p.admit_ts = p.discharge_ts - hours_s(los_h);
        p.age = round_to(std::max(17.0, index.age - static_cast<double>(gap_days) / 365.0), 1);
        p.transfers.push_back({p.admission_id, general_ward(), WardType::general, p.admit_ts,
                               p.discharge_ts});
        double u = rng_.uniform();
        p.disposition = u < 0.8 ? Disposition::home
                                : (u < 0.95 ? Disposition::transfer : Disposition::other);

        Plan quiet;  // no signal, nothing special
        fill_events(p, quiet, /*light=*/true);
        fill_diagnoses(p, 2, 6, 0.7);
        for (int m = 0; m < kNumMeds; ++m)
            if (rng_.bernoulli(0.15)) p.meds_on_admission.push_back(kMeds[m]);
        return p;
    }

    const SynthConfig& cfg_;
    Rng& rng_;
    std::set<std::tuple<int, std::string, std::int64_t>> used_;
    std::vector<int> active_meds_;
};

void check_config(const SynthConfig& c) {
    auto fail = [](const std::string& m) { throw std::invalid_argument("synth config: " + m); };
    if (!(c.prevalence > 0.0 && c.prevalence < 1.0)) fail("prevalence must be in (0, 1)");
    if (c.n_admissions == 0) fail("n_admissions must be positive");
    if (c.prevalence * static_cast<double>(c.n_admissions) < 1.0) fail("no cases generated");
    if (c.n_facilities < 1) fail("n_facilities must be positive");
    if (!(c.vitals_cadence_min_h > 0 && c.vitals_cadence_min_h <= c.vitals_cadence_max_h))
        fail("vitals cadence range invalid");
    if (!(c.fluids_per_day_min >= 1 && c.fluids_per_day_min <= c.fluids_per_day_max))
        fail("fluids per day range invalid");
    if (!(c.deterioration_lead_min_h > 0 &&
          c.deterioration_lead_min_h <= c.deterioration_lead_max_h))
        fail("deterioration lead range invalid");
    for (double f : {c.no_signal_frac, c.icuww_frac, c.prior_frac, c.direct_icu_frac,
                     c.neonatal_frac, c.planned_icu_frac, c.control_abnormal_frac})
        if (!(f >= 0.0 && f <= 1.0)) fail("fractions must be in [0, 1]");
    for (const auto& [name, prob] : c.lab_panel_prob) {
        bool known = false;
        for (const char* p : kPanelNames) known = known || name == p;
        if (!known) fail("unknown lab panel '" + name + "'");
        if (!(prob >= 0.0 && prob <= 1.0)) fail("panel probability out of range");
    }
}

}  // namespace

SynthConfig::SynthConfig() {
    for (int p = 0; p < kNumPanels; ++p) lab_panel_prob[kPanelNames[p]] = kPanelProbDefault[p];
}

SynthResult generate_with_intents(const SynthConfig& config) {
    check_config(config);
    std::vector<Admission> admissions;
    std::vector<IntendedLabel> intents;
    admissions.reserve(config.n_admissions);
    Rng master(config.seed);
    for (std::uint64_t i = 0; i < config.n_admissions; ++i) {
        Rng rng = master.split(i + 1);
        AdmissionBuilder(config, rng).build(i, admissions, intents);
    }
    SynthResult result;
    result.dataset = validate_dataset(std::move(admissions));
    if (!result.dataset.violations.empty()) {
        const auto& v = result.dataset.violations.front();
        throw std::logic_error("generator produced invalid data: " + v.admission_id + ": " +
                               v.what);
    }
    std::sort(intents.begin(), intents.end(),
              [](const IntendedLabel& x, const IntendedLabel& y) {
                  return x.admission_id < y.admission_id;
              });
    result.intents = std::move(intents);
    return result;
}

Dataset generate(const SynthConfig& config) { return generate_with_intents(config).dataset; }

bool apply_synth_key(SynthConfig& cfg, const std::string& key, const std::string& value) {
    auto num = [&]() {
        auto v = parse_double(value);
        if (!v) throw std::runtime_error("bad number '" + value + "'");
        return *v;
    };
    if (key == "n_admissions") cfg.n_admissions = static_cast<std::size_t>(num());
    else if (key == "prevalence") cfg.prevalence = num();
    else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(num());
    else if (key == "n_facilities") cfg.n_facilities = static_cast<int>(num());
    else if (key == "vitals_cadence_min_h") cfg.vitals_cadence_min_h = num();
    else if (key == "vitals_cadence_max_h") cfg.vitals_cadence_max_h = num();
    else if (key == "fluids_per_day_min") cfg.fluids_per_day_min = static_cast<int>(num());
    else if (key == "fluids_per_day_max") cfg.fluids_per_day_max = static_cast<int>(num());
    else if (key == "deterioration_lead_min_h") cfg.deterioration_lead_min_h = num();
    else if (key == "deterioration_lead_max_h") cfg.deterioration_lead_max_h = num();
    else if (key == "no_signal_frac") cfg.no_signal_frac = num();
    else if (key == "icuww_frac") cfg.icuww_frac = num();
    else if (key == "prior_frac") cfg.prior_frac = num();
    else if (key == "direct_icu_frac") cfg.direct_icu_frac = num();
    else if (key == "neonatal_frac") cfg.neonatal_frac = num();
    else if (key == "planned_icu_frac") cfg.planned_icu_frac = num();
    else if (key == "control_abnormal_frac") cfg.control_abnormal_frac = num();
    else if (key.rfind("lab_panel_prob.", 0) == 0)
        cfg.lab_panel_prob[key.substr(15)] = num();
    else return false;
    return true;
}

SynthConfig parse_synth_config(const std::string& text) {
    SynthConfig cfg;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    auto fail = [&](const std::string& m) {
        throw std::runtime_error("synth config line " + std::to_string(line_no) + ": " + m);
    };
    while (std::getline(in, line)) {
        ++line_no;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos) fail("expected key = value");
        auto trim = [](std::string s) {
            auto b = s.find_first_not_of(" \t\r");
            auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
        if (key.empty() || value.empty()) fail("expected key = value");
        bool known = false;
        try {
            known = apply_synth_key(cfg, key, value);
        } catch (const std::runtime_error& e) {
            fail(e.what());
        }
        if (!known) fail("unknown key '" + key + "'");
    }
    return cfg;
}

SynthConfig load_synth_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_synth_config(buf.str());
}

SummaryStats describe(const Dataset& ds) {
    if (ds.admissions.empty()) throw std::invalid_argument("describe: empty dataset");
    SummaryStats st;
    st.n_admissions = ds.admissions.size();
    auto labels = cohort::label_admissions(ds);
    std::size_t controls = 0;
    for (const auto& l : labels) {
        if (l.excluded) ++st.n_excluded;
        else if (l.is_case) ++st.n_cases;
        else ++controls;
    }
    std::size_t counted = st.n_cases + controls;
    st.prevalence = counted ? static_cast<double>(st.n_cases) / static_cast<double>(counted) : 0.0;

    std::vector<double> gaps;
    std::vector<double> fluids_per_day;
    for (const auto& a : ds.admissions) {
        for (const auto& e : a.events) ++st.event_counts[to_string(e.kind)];
        std::vector<std::int64_t> vts, fts;
        for (const auto& e : a.events) {
            if (e.kind == EventKind::vital) vts.push_back(e.ts.s);
            if (e.kind == EventKind::fluid) fts.push_back(e.ts.s);
        }
        auto dedup = [](std::vector<std::int64_t>& v) {
            std::sort(v.begin(), v.end());
            v.erase(std::unique(v.begin(), v.end()), v.end());
        };
        dedup(vts);
        dedup(fts);
        for (std::size_t i = 1; i < vts.size(); ++i)
            gaps.push_back(seconds_to_hours(vts[i] - vts[i - 1]));
        double los_days = seconds_to_days(a.discharge_ts - a.admit_ts);
        if (!fts.empty() && los_days > 0)
            fluids_per_day.push_back(static_cast<double>(fts.size()) / los_days);
    }
    auto median = [](std::vector<double>& v) {
        if (v.empty()) return 0.0;
        std::sort(v.begin(), v.end());
        std::size_t n = v.size();
        return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
    };
    for (double g : gaps) ++st.vitals_gap_hist[static_cast<int>(g)];
    st.vitals_gap_median_h = median(gaps);
    st.fluids_per_day_median = median(fluids_per_day);
    return st;
}

std::string SummaryStats::to_text() const {
    std::ostringstream out;
    out << "admissions: " << n_admissions << "\n"
        << "cases: " << n_cases << "\n"
        << "excluded: " << n_excluded << "\n"
        << "prevalence: " << format_double(prevalence) << "\n";
    for (const auto& [kind, n] : event_counts) out << "events." << kind << ": " << n << "\n";
    out << "vitals_gap_median_h: " << format_double(vitals_gap_median_h) << "\n";
    for (const auto& [bucket, n] : vitals_gap_hist)
        out << "vitals_gap_hist[" << bucket << "h): " << n << "\n";
    out << "fluids_per_day_median: " << format_double(fluids_per_day_median) << "\n";
    return out.str();
}

}  // namespace synth
}  // namespace ww
