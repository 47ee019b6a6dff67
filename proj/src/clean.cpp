#include "wardwatch/clean.hpp"

#include <cctype>
#include <charconv>
#include <stdexcept>
#include <utility>

namespace ww {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

std::optional<double> parse_full(const std::string& s) {
    if (s.empty()) return std::nullopt;
    double v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

}  // namespace

std::optional<double> clean_lab_value(const std::string& raw_text) {
    std::string s = trim(raw_text);
    if (s.empty()) return std::nullopt;
    if (s[0] == '<' || s[0] == '>') {
        std::string rest = trim(s.substr(1));
        if (!rest.empty() && rest[0] == '=') rest = trim(rest.substr(1));
        return parse_full(rest);
    }
    // Results are sometimes keyed with thousands separators ("100,000").
    std::string compact;
    compact.reserve(s.size());
    for (char c : s)
        if (c != ',') compact.push_back(c);
    return parse_full(compact);
}

std::string atc_truncate(const std::string& code) {
    std::size_t n = code.size();
    if (n != 1 && n != 3 && n != 4 && n != 5 && n != 7)
        throw std::invalid_argument("not an ATC code: " + code);
    return n <= 5 ? code : code.substr(0, 5);
}

bool loinc_shape_valid(const std::string& code) {
    std::size_t dash = code.find('-');
    if (dash == std::string::npos || dash == 0 || dash + 2 != code.size()) return false;
    for (std::size_t i = 0; i < dash; ++i)
        if (!std::isdigit(static_cast<unsigned char>(code[i]))) return false;
    return std::isdigit(static_cast<unsigned char>(code[dash + 1]));
}

std::pair<double, std::string> canonicalize_unit(const std::string& loinc, double value,
                                                 const std::string& unit) {
    // Platelets: thresholds are stated per uL; counts often arrive in 10^3/uL.
    if (loinc == "777-3") {
        if (unit == "10*3/uL" || unit == "10^3/uL" || unit == "K/uL")
            return {value * 1000.0, "/uL"};
        return {value, "/uL"};
    }
    // Troponin I: ng/mL is numerically identical to ug/L.
    if (loinc == "10839-9") {
        if (unit == "ng/mL" || unit == "ug/L") return {value, "ug/L"};
        return {value, unit.empty() ? "ug/L" : unit};
    }
    // Arterial pCO2 in kPa -> mmHg.
    if (loinc == "2019-8") {
        if (unit == "kPa") return {value * 7.50062, "mmHg"};
        return {value, "mmHg"};
    }
    // Lactate in mg/dL -> mmol/L (molar mass 90.08 g/mol).
    if (loinc == "2524-7") {
        if (unit == "mg/dL") return {value / 9.008, "mmol/L"};
        return {value, "mmol/L"};
    }
    if (loinc == "2744-1") return {value, "pH"};
    return {value, unit};
}

}  // namespace ww
