#include "wardwatch/core.hpp"

#include <algorithm>

namespace ww {

const char* to_string(EventKind k) {
    switch (k) {
        case EventKind::vital: return "vital";
        case EventKind::lab: return "lab";
        case EventKind::fluid: return "fluid";
        case EventKind::med_admin: return "med_admin";
    }
    return "?";
}

const char* to_string(WardType w) {
    switch (w) {
        case WardType::general: return "general";
        case WardType::icu: return "icu";
        case WardType::operating_room: return "operating_room";
        case WardType::recovery: return "recovery";
        case WardType::neonatal_icu: return "neonatal_icu";
        case WardType::emergency: return "emergency";
    }
    return "?";
}

const char* to_string(Disposition d) {
    switch (d) {
        case Disposition::home: return "home";
        case Disposition::transfer: return "transfer";
        case Disposition::deceased: return "deceased";
        case Disposition::other: return "other";
    }
    return "?";
}

const char* to_string(Gender g) {
    switch (g) {
        case Gender::female: return "female";
        case Gender::male: return "male";
        case Gender::other: return "other";
    }
    return "?";
}

std::optional<EventKind> parse_event_kind(const std::string& s) {
    if (s == "vital") return EventKind::vital;
    if (s == "lab") return EventKind::lab;
    if (s == "fluid") return EventKind::fluid;
    if (s == "med_admin") return EventKind::med_admin;
    return std::nullopt;
}

std::optional<WardType> parse_ward_type(const std::string& s) {
    if (s == "general") return WardType::general;
    if (s == "icu") return WardType::icu;
    if (s == "operating_room") return WardType::operating_room;
    if (s == "recovery") return WardType::recovery;
    if (s == "neonatal_icu") return WardType::neonatal_icu;
    if (s == "emergency") return WardType::emergency;
    return std::nullopt;
}

std::optional<Disposition> parse_disposition(const std::string& s) {
    if (s == "home") return Disposition::home;
    if (s == "transfer") return Disposition::transfer;
    if (s == "deceased") return Disposition::deceased;
    if (s == "other") return Disposition::other;
    return std::nullopt;
}

std::optional<Gender> parse_gender(const std::string& s) {
    if (s == "female" || s == "F") return Gender::female;
    if (s == "male" || s == "M") return Gender::male;
    if (s == "other") return Gender::other;
    return std::nullopt;
}

const Admission* Dataset::find(const std::string& admission_id) const {
    auto it = std::lower_bound(admissions.begin(), admissions.end(), admission_id,
                               [](const Admission& a, const std::string& id) {
                                   return a.admission_id < id;
                               });
    if (it == admissions.end() || it->admission_id != admission_id) return nullptr;
    return &*it;
}

}  // namespace ww
