#pragma once

#include <string>
#include <vector>

namespace ww {

// One comorbidity category: matched when any diagnosis code starts with any
// of its ICD-10 prefixes (codes compared uppercase, dots stripped).
struct ComorbidityCategory {
    std::string name;
    int weight = 0;
    std::vector<std::string> prefixes;
};

struct ComorbidityTable {
    std::vector<ComorbidityCategory> categories;
};

// Uppercases and strips '.' so "i50.9" matches prefix "I50".
std::string normalize_icd10(const std::string& code);

ComorbidityTable load_comorbidity_table(const std::string& path);

// Each category counts at most once regardless of how many codes hit it.
int comorbidity_score(const std::vector<std::string>& codes, const ComorbidityTable& table);

// Bundled tables (Charlson weights per Deyo, Elixhauser weights per van
// Walraven), loaded once from the data directory shipped with the build.
const ComorbidityTable& charlson_table();
const ComorbidityTable& elixhauser_table();

}  // namespace ww
