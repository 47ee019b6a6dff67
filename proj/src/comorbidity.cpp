#include "wardwatch/comorbidity.hpp"

#include "wardwatch/util/csv.hpp"

#include <cctype>
#include <stdexcept>

namespace ww {

std::string normalize_icd10(const std::string& code) {
    std::string out;
    out.reserve(code.size());
    for (char c : code) {
        if (c == '.' || c == ' ') continue;
        out.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
    }
    return out;
}

ComorbidityTable load_comorbidity_table(const std::string& path) {
    CsvReader in(path);
    const std::size_t c_cat = in.col("category");
    const std::size_t c_w = in.col("weight");
    const std::size_t c_pfx = in.col("prefixes");
    ComorbidityTable table;
    std::vector<std::string> row;
    while (in.next(row)) {
        ComorbidityCategory cat;
        cat.name = row.at(c_cat);
        auto w = parse_int(row.at(c_w));
        if (!w) throw std::runtime_error(path + ": bad weight for '" + cat.name + "'");
        cat.weight = static_cast<int>(*w);
        const std::string& pfx = row.at(c_pfx);
        std::size_t start = 0;
        while (start <= pfx.size()) {
            std::size_t end = pfx.find(';', start);
            if (end == std::string::npos) end = pfx.size();
            std::string p = normalize_icd10(pfx.substr(start, end - start));
            if (!p.empty()) cat.prefixes.push_back(std::move(p));
            start = end + 1;
        }
        if (cat.prefixes.empty())
            throw std::runtime_error(path + ": category '" + cat.name + "' has no prefixes");
        table.categories.push_back(std::move(cat));
    }
    if (table.categories.empty()) throw std::runtime_error(path + ": empty comorbidity table");
    return table;
}

int comorbidity_score(const std::vector<std::string>& codes, const ComorbidityTable& table) {
    std::vector<std::string> norm;
    norm.reserve(codes.size());
    for (const auto& c : codes) norm.push_back(normalize_icd10(c));
    int score = 0;
    for (const auto& cat : table.categories) {
        bool hit = false;
        for (const auto& code : norm) {
            for (const auto& p : cat.prefixes) {
                if (code.size() >= p.size() && code.compare(0, p.size(), p) == 0) {
                    hit = true;
                    break;
                }
            }
            if (hit) break;
        }
        if (hit) score += cat.weight;
    }
    return score;
}

const ComorbidityTable& charlson_table() {
    static const ComorbidityTable t =
        load_comorbidity_table(std::string(WARDWATCH_DATA_DIR) + "/charlson_deyo_icd10.csv");
    return t;
}

const ComorbidityTable& elixhauser_table() {
    static const ComorbidityTable t =
        load_comorbidity_table(std::string(WARDWATCH_DATA_DIR) + "/elixhauser_vw_icd10.csv");
    return t;
}

}  // namespace ww
