#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace ww {
namespace featspec {

// Merge-spec language. Line-oriented, one construct per declaration:
//
//   # comment
//   base patient_master alias t1 keys (admission_id, ts) {
//     facility_cd, patient_id, admission_id, ts
//   }
//   table adm alias t3 join (t1.admission_id = admission_id) {
//     admit_ts, target_ts, is_direct_icu_admission
//   }
//   table adm alias t4 join (t3.prev_admission_id = admission_id) {
//     discharge_disposition as prev_discharge_disposition
//   }
//   expr days_since_adm = round(hours_between(t1.ts, t3.admit_ts) / 24, 1)
//   table vital_signs_mrv alias t6 join (t1.admission_id = admission_id, t1.ts = ts) {
//     * _mrv
//   }
//
// Selectors: `col`, `col as out`, or a wildcard `*` / `prefix*` with an
// optional output suffix. Wildcards expand against the table's column list
// minus that block's join columns. Join left sides reference aliases
// declared earlier, which is what permits self-joins; expressions may use
// +, -, *, /, numeric literals, qualified refs, round(x, n) and
// hours_between(a, b). An expression ends at the end of its line.

struct SpecError : std::runtime_error {
    int line, col;
    SpecError(const std::string& msg, int line_, int col_)
        : std::runtime_error("merge spec:" + std::to_string(line_) + ":" + std::to_string(col_) +
                             ": " + msg),
          line(line_),
          col(col_) {}
};

struct ColumnRef {
    std::string alias, column;
    friend bool operator==(const ColumnRef&, const ColumnRef&) = default;
};

struct Expr {
    enum class Kind { number, column, binary, call };
    Kind kind = Kind::number;
    double number = 0;       // Kind::number
    ColumnRef ref;           // Kind::column
    char op = 0;             // Kind::binary, one of + - * /
    std::string func;        // Kind::call, round or hours_between
    std::vector<Expr> args;  // binary operands (2) or call arguments

    friend bool operator==(const Expr&, const Expr&) = default;
};

struct Selector {
    enum class Kind { column, renamed, wildcard };
    Kind kind = Kind::column;
    std::string name;  // column name, or wildcard pattern ("*" or "prefix*")
    std::string out;   // renamed target, or wildcard output suffix ("" = keep name)

    friend bool operator==(const Selector&, const Selector&) = default;
};

struct TableBlock {
    std::string table, alias;
    std::vector<std::pair<ColumnRef, std::string>> join;  // left ref = own column
    std::vector<Selector> selectors;

    friend bool operator==(const TableBlock&, const TableBlock&) = default;
};

struct ExprDef {
    std::string out;
    Expr expr;

    friend bool operator==(const ExprDef&, const ExprDef&) = default;
};

using SpecItem = std::variant<TableBlock, ExprDef>;

struct SpecAst {
    std::string base_table, base_alias;
    std::vector<std::string> base_keys;
    std::vector<Selector> base_selectors;
    std::vector<SpecItem> items;  // blocks and exprs in declaration order

    friend bool operator==(const SpecAst&, const SpecAst&) = default;
};

// Throws SpecError with the offending line and column.
SpecAst parse_spec(const std::string& text);

// Canonical form; parse_spec(print_spec(ast)) == ast.
std::string print_spec(const SpecAst& ast);

// table name -> column list, in table order.
using Catalog = std::map<std::string, std::vector<std::string>>;

// One SELECT with a LEFT OUTER JOIN per block in declaration order;
// renames via AS, expressions inlined with hours_between emitted as
// extract(epoch FROM a - b)/3600.0 and round(x, n) as
// round(cast(x AS numeric), n). Byte-deterministic.
std::string generate_sql(const SpecAst& ast, const Catalog& catalog);

// In-memory table for the evaluator. Cells are text; the empty string is
// null (matching the CSV encoding, where missing is an empty field).
struct RelTable {
    std::string name;
    std::vector<std::string> columns;
    std::vector<std::string> keys;
    std::vector<std::vector<std::string>> rows;

    std::size_t col(const std::string& column) const;  // throws when absent
    void validate_keys() const;                        // key tuples unique, non-null
};

RelTable read_rel_table_csv(const std::string& path, const std::string& name,
                            std::vector<std::string> keys);
void write_rel_table_csv(const RelTable& t, const std::string& path);

Catalog catalog_of(const std::vector<RelTable>& tables);

// Left-outer-join evaluation of the spec: base rows preserved in order,
// unmatched blocks contribute nulls, nulls never join, expressions
// propagate null. The testing oracle for the generated SQL.
RelTable execute_query(const SpecAst& ast, const std::vector<RelTable>& tables);

}  // namespace featspec
}  // namespace ww
