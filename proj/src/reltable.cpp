#include <set>
#include <stdexcept>

#include "wardwatch/featspec.hpp"
#include "wardwatch/util/csv.hpp"

namespace ww::featspec {

std::size_t RelTable::col(const std::string& column) const {
    for (std::size_t i = 0; i < columns.size(); ++i)
        if (columns[i] == column) return i;
    throw std::runtime_error("table '" + name + "' has no column '" + column + "'");
}

void RelTable::validate_keys() const {
    std::vector<std::size_t> key_idx;
    for (const auto& k : keys) key_idx.push_back(col(k));
    std::set<std::vector<std::string>> seen;
    std::vector<std::string> tuple;
    for (const auto& r : rows) {
        tuple.clear();
        for (std::size_t i : key_idx) {
            if (r[i].empty())
                throw std::runtime_error("table '" + name + "': null key value");
            tuple.push_back(r[i]);
        }
        if (!seen.insert(tuple).second)
            throw std::runtime_error("table '" + name + "': duplicate key tuple starting with '" +
                                     tuple.front() + "'");
    }
}

RelTable read_rel_table_csv(const std::string& path, const std::string& name,
                            std::vector<std::string> keys) {
    CsvReader r(path);
    RelTable t;
    t.name = name;
    t.columns = r.columns();
    t.keys = std::move(keys);
    std::vector<std::string> f;
    while (r.next(f)) {
        if (f.size() != t.columns.size())
            throw std::runtime_error(path + ": row width mismatch at data line " +
                                     std::to_string(r.line_no()));
        t.rows.push_back(f);
    }
    return t;
}

void write_rel_table_csv(const RelTable& t, const std::string& path) {
    CsvWriter w(path, t.columns);
    for (const auto& r : t.rows) w.write_row(r);
}

Catalog catalog_of(const std::vector<RelTable>& tables) {
    Catalog c;
    for (const auto& t : tables) c[t.name] = t.columns;
    return c;
}

}  // namespace ww::featspec
