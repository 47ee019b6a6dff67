#include "wardwatch/featspec.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <functional>
#include <set>
#include <unordered_map>

#include "wardwatch/util/csv.hpp"
#include "wardwatch/util/stats.hpp"
#include "wardwatch/util/timeutil.hpp"

namespace ww {
namespace featspec {

namespace {

struct Token {
    enum class Kind { ident, number, punct, star, end };
    Kind kind = Kind::end;
    std::string text;
    int line = 0, col = 0;
};

class Lexer {
  public:
    explicit Lexer(const std::string& text) : text_(text) {}

    std::vector<Token> run() {
        std::vector<Token> out;
        while (pos_ < text_.size()) {
            char c = text_[pos_];
            if (c == '\n') {
                ++line_;
                col_ = 1;
                ++pos_;
                continue;
            }
            if (c == ' ' || c == '\t' || c == '\r') {
                advance();
                continue;
            }
            if (c == '#') {
                while (pos_ < text_.size() && text_[pos_] != '\n') advance();
                continue;
            }
            if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
                out.push_back(ident());
                continue;
            }
            if (std::isdigit(static_cast<unsigned char>(c))) {
                out.push_back(number());
                continue;
            }
            if (c == '*') {
                out.push_back({Token::Kind::star, "*", line_, col_});
                advance();
                continue;
            }
            if (std::string("(){},=.+-/").find(c) != std::string::npos) {
                out.push_back({Token::Kind::punct, std::string(1, c), line_, col_});
                advance();
                continue;
            }
            throw SpecError(std::string("unexpected character '") + c + "'", line_, col_);
        }
        out.push_back({Token::Kind::end, "", line_, col_});
        return out;
    }

  private:
    void advance() {
        ++pos_;
        ++col_;
    }
    Token ident() {
        Token t{Token::Kind::ident, "", line_, col_};
        while (pos_ < text_.size() &&
               (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) {
            t.text.push_back(text_[pos_]);
            advance();
        }
        return t;
    }
    Token number() {
        Token t{Token::Kind::number, "", line_, col_};
        while (pos_ < text_.size() &&
               (std::isdigit(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '.')) {
            t.text.push_back(text_[pos_]);
            advance();
        }
        return t;
    }

    const std::string& text_;
    std::size_t pos_ = 0;
    int line_ = 1, col_ = 1;
};

class Parser {
  public:
    explicit Parser(const std::string& text) : toks_(Lexer(text).run()) {}

    SpecAst run() {
        SpecAst ast;
        bool have_base = false;
        while (!at_end()) {
            const Token& t = peek();
            if (t.kind != Token::Kind::ident)
                throw SpecError("expected 'base', 'table', or 'expr'", t.line, t.col);
            if (t.text == "base") {
                if (have_base) throw SpecError("duplicate base declaration", t.line, t.col);
                parse_base(ast);
                have_base = true;
            } else if (t.text == "table") {
                if (!have_base)
                    throw SpecError("base must be declared before any table", t.line, t.col);
                ast.items.push_back(parse_block());
            } else if (t.text == "expr") {
                if (!have_base)
                    throw SpecError("base must be declared before any expr", t.line, t.col);
                ast.items.push_back(parse_expr_def());
            } else {
                throw SpecError("expected 'base', 'table', or 'expr', got '" + t.text + "'", t.line,
                                t.col);
            }
        }
        if (!have_base) throw SpecError("missing base declaration", 1, 1);
        check_outputs(ast);
        return ast;
    }

  private:
    const Token& peek(std::size_t k = 0) const {
        std::size_t i = std::min(pos_ + k, toks_.size() - 1);
        return toks_[i];
    }
    const Token& take() { return toks_[std::min(pos_++, toks_.size() - 1)]; }
    bool at_end() const { return peek().kind == Token::Kind::end; }

    [[noreturn]] void fail(const std::string& msg, const Token& t) const {
        throw SpecError(msg, t.line, t.col);
    }
    const Token& expect_ident(const std::string& what) {
        const Token& t = take();
        if (t.kind != Token::Kind::ident) fail("expected " + what, t);
        return t;
    }
    void expect_punct(char c) {
        const Token& t = take();
        if (t.kind != Token::Kind::punct || t.text[0] != c)
            fail(std::string("expected '") + c + "'", t);
    }
    void expect_keyword(const std::string& kw) {
        const Token& t = take();
        if (t.kind != Token::Kind::ident || t.text != kw) fail("expected '" + kw + "'", t);
    }
    bool peek_punct(char c, std::size_t k = 0) const {
        const Token& t = peek(k);
        return t.kind == Token::Kind::punct && t.text[0] == c;
    }

    void declare_alias(const std::string& alias, const Token& at) {
        if (!aliases_.insert(alias).second) fail("duplicate alias '" + alias + "'", at);
    }
    void check_alias(const std::string& alias, const Token& at) const {
        if (!aliases_.count(alias)) fail("unknown alias '" + alias + "'", at);
    }

    void parse_base(SpecAst& ast) {
        take();  // base
        ast.base_table = expect_ident("base table name").text;
        expect_keyword("alias");
        const Token& alias_tok = expect_ident("alias name");
        ast.base_alias = alias_tok.text;
        declare_alias(ast.base_alias, alias_tok);
        expect_keyword("keys");
        expect_punct('(');
        while (true) {
            ast.base_keys.push_back(expect_ident("key column").text);
            if (peek_punct(')')) break;
            expect_punct(',');
        }
        expect_punct(')');
        ast.base_selectors = parse_selectors();
    }

    TableBlock parse_block() {
        take();  // table
        TableBlock b;
        b.table = expect_ident("table name").text;
        expect_keyword("alias");
        const Token& alias_tok = expect_ident("alias name");
        b.alias = alias_tok.text;
        expect_keyword("join");
        expect_punct('(');
        while (true) {
            ColumnRef left = parse_ref();
            expect_punct('=');
            std::string right = expect_ident("join column").text;
            b.join.push_back({std::move(left), std::move(right)});
            if (peek_punct(')')) break;
            expect_punct(',');
        }
        expect_punct(')');
        declare_alias(b.alias, alias_tok);  // own join columns cannot use the new alias
        b.selectors = parse_selectors();
        return b;
    }

    ColumnRef parse_ref() {
        const Token& a = expect_ident("alias");
        check_alias(a.text, a);
        expect_punct('.');
        const Token& c = expect_ident("column");
        return {a.text, c.text};
    }

    std::vector<Selector> parse_selectors() {
        expect_punct('{');
        std::vector<Selector> out;
        while (!peek_punct('}')) {
            out.push_back(parse_selector());
            if (!peek_punct('}')) expect_punct(',');
        }
        expect_punct('}');
        if (out.empty()) fail("empty selector list", peek());
        return out;
    }

    Selector parse_selector() {
        Selector s;
        const Token& t = take();
        if (t.kind == Token::Kind::star) {
            s.kind = Selector::Kind::wildcard;
            s.name = "*";
        } else if (t.kind == Token::Kind::ident) {
            // `prefix*` only counts as a wildcard when the star is glued on
            if (peek().kind == Token::Kind::star && peek().line == t.line &&
                peek().col == t.col + static_cast<int>(t.text.size())) {
                take();
                s.kind = Selector::Kind::wildcard;
                s.name = t.text + "*";
            } else {
                s.name = t.text;
            }
        } else {
            fail("expected column name or wildcard", t);
        }
        if (s.kind == Selector::Kind::wildcard) {
            if (peek().kind == Token::Kind::ident) s.out = take().text;
        } else if (peek().kind == Token::Kind::ident && peek().text == "as") {
            take();
            s.kind = Selector::Kind::renamed;
            s.out = expect_ident("output name").text;
        }
        return s;
    }

    ExprDef parse_expr_def() {
        int line = take().line;  // expr
        ExprDef d;
        d.out = expect_ident("expression name").text;
        expect_punct('=');
        d.expr = parse_sum(line);
        const Token& t = peek();
        if (t.kind != Token::Kind::end && t.line == line)
            fail("unexpected trailing tokens after expression", t);
        return d;
    }

    bool expr_token_ahead(int line) const {
        const Token& t = peek();
        return t.kind != Token::Kind::end && t.line == line;
    }

    Expr parse_sum(int line) {
        Expr e = parse_product(line);
        while (expr_token_ahead(line) && (peek_punct('+') || peek_punct('-'))) {
            char op = take().text[0];
            Expr rhs = parse_product(line);
            Expr parent;
            parent.kind = Expr::Kind::binary;
            parent.op = op;
            parent.args.push_back(std::move(e));
            parent.args.push_back(std::move(rhs));
            e = std::move(parent);
        }
        return e;
    }

    Expr parse_product(int line) {
        Expr e = parse_factor(line);
        while (expr_token_ahead(line) && (peek().kind == Token::Kind::star || peek_punct('/'))) {
            char op = peek().kind == Token::Kind::star ? '*' : '/';
            take();
            Expr rhs = parse_factor(line);
            Expr parent;
            parent.kind = Expr::Kind::binary;
            parent.op = op;
            parent.args.push_back(std::move(e));
            parent.args.push_back(std::move(rhs));
            e = std::move(parent);
        }
        return e;
    }

    Expr parse_factor(int line) {
        const Token& t = peek();
        if (t.kind == Token::Kind::end || t.line != line)
            fail("unexpected end of expression", t);
        if (peek_punct('(')) {
            take();
            Expr e = parse_sum(line);
            expect_punct(')');
            return e;
        }
        if (peek_punct('-')) {  // unary minus desugars to 0 - x
            take();
            Expr zero;
            zero.kind = Expr::Kind::number;
            Expr parent;
            parent.kind = Expr::Kind::binary;
            parent.op = '-';
            parent.args.push_back(std::move(zero));
            parent.args.push_back(parse_factor(line));
            return parent;
        }
        if (t.kind == Token::Kind::number) {
            take();
            auto v = parse_double(t.text);
            if (!v) fail("bad numeric literal '" + t.text + "'", t);
            Expr e;
            e.kind = Expr::Kind::number;
            e.number = *v;
            return e;
        }
        if (t.kind == Token::Kind::ident) {
            if (t.text == "round" || t.text == "hours_between") {
                take();
                Expr e;
                e.kind = Expr::Kind::call;
                e.func = t.text;
                expect_punct('(');
                e.args.push_back(parse_sum(line));
                expect_punct(',');
                e.args.push_back(parse_sum(line));
                expect_punct(')');
                if (e.func == "round" &&
                    (e.args[1].kind != Expr::Kind::number ||
                     e.args[1].number != std::floor(e.args[1].number) || e.args[1].number < 0 ||
                     e.args[1].number > 12))
                    fail("round() needs a whole-number decimal count", t);
                return e;
            }
            if (peek_punct('.', 1)) {
                Expr e;
                e.kind = Expr::Kind::column;
                e.ref = parse_ref();
                return e;
            }
            fail("unknown function or unqualified column '" + t.text + "'", t);
        }
        fail("expected expression", t);
    }

    // Non-wildcard output names must be unique; wildcard expansions are
    // checked against the catalog at generation/execution time.
    void check_outputs(const SpecAst& ast) const {
        std::set<std::string> seen;
        auto add = [&](const std::string& name) {
            if (!seen.insert(name).second)
                throw SpecError("duplicate output column '" + name + "'", 1, 1);
        };
        auto add_selectors = [&](const std::vector<Selector>& sels) {
            for (const auto& s : sels) {
                if (s.kind == Selector::Kind::column) add(s.name);
                if (s.kind == Selector::Kind::renamed) add(s.out);
            }
        };
        add_selectors(ast.base_selectors);
        for (const auto& item : ast.items) {
            if (const auto* b = std::get_if<TableBlock>(&item)) add_selectors(b->selectors);
            else add(std::get<ExprDef>(item).out);
        }
    }

    std::vector<Token> toks_;
    std::size_t pos_ = 0;
    std::set<std::string> aliases_;
};

// ---- printers ----

int canonical_prec(const Expr& e) {
    if (e.kind == Expr::Kind::binary) return (e.op == '+' || e.op == '-') ? 1 : 2;
    return 3;
}

void print_expr(const Expr& e, std::string& out) {
    switch (e.kind) {
        case Expr::Kind::number: out += format_double(e.number); return;
        case Expr::Kind::column:
            out += e.ref.alias;
            out += '.';
            out += e.ref.column;
            return;
        case Expr::Kind::call: {
            out += e.func;
            out += '(';
            print_expr(e.args[0], out);
            out += ", ";
            print_expr(e.args[1], out);
            out += ')';
            return;
        }
        case Expr::Kind::binary: {
            int p = canonical_prec(e);
            bool lp = canonical_prec(e.args[0]) < p;
            bool rp = canonical_prec(e.args[1]) < p ||
                      (canonical_prec(e.args[1]) == p && (e.op == '-' || e.op == '/'));
            if (lp) out += '(';
            print_expr(e.args[0], out);
            if (lp) out += ')';
            out += ' ';
            out += e.op;
            out += ' ';
            if (rp) out += '(';
            print_expr(e.args[1], out);
            if (rp) out += ')';
            return;
        }
    }
}

std::string print_selector(const Selector& s) {
    switch (s.kind) {
        case Selector::Kind::column: return s.name;
        case Selector::Kind::renamed: return s.name + " as " + s.out;
        case Selector::Kind::wildcard: return s.out.empty() ? s.name : s.name + " " + s.out;
    }
    return "";
}

std::string join_names(const std::vector<std::string>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ", ";
        out += v[i];
    }
    return out;
}

// ---- SQL generation ----

// In SQL text hours_between prints as an epoch-seconds division, so its
// effective precedence is that of '/'.
int sql_prec(const Expr& e) {
    if (e.kind == Expr::Kind::binary) return (e.op == '+' || e.op == '-') ? 1 : 2;
    if (e.kind == Expr::Kind::call && e.func == "hours_between") return 2;
    return 3;
}

void sql_expr(const Expr& e, std::string& out) {
    switch (e.kind) {
        case Expr::Kind::number: out += format_double(e.number); return;
        case Expr::Kind::column:
            out += e.ref.alias;
            out += '.';
            out += e.ref.column;
            return;
        case Expr::Kind::call:
            if (e.func == "round") {
                out += "round(cast(";
                sql_expr(e.args[0], out);
                out += " AS numeric), ";
                sql_expr(e.args[1], out);
                out += ')';
            } else {
                out += "extract(epoch FROM ";
                sql_expr(e.args[0], out);
                out += " - ";
                sql_expr(e.args[1], out);
                out += ")/3600.0";
            }
            return;
        case Expr::Kind::binary: {
            int p = sql_prec(e);
            bool lp = sql_prec(e.args[0]) < p;
            bool rp = sql_prec(e.args[1]) < p ||
                      (sql_prec(e.args[1]) == p && (e.op == '-' || e.op == '/'));
            bool spaced = e.op == '+' || e.op == '-';
            if (lp) out += '(';
            sql_expr(e.args[0], out);
            if (lp) out += ')';
            if (spaced) out += ' ';
            out += e.op;
            if (spaced) out += ' ';
            if (rp) out += '(';
            sql_expr(e.args[1], out);
            if (rp) out += ')';
            return;
        }
    }
}

const std::vector<std::string>& catalog_columns(const Catalog& catalog, const std::string& table) {
    auto it = catalog.find(table);
    if (it == catalog.end()) throw std::runtime_error("catalog has no table '" + table + "'");
    return it->second;
}

// (source column, output name) pairs for one block, wildcards expanded in
// catalog column order, join columns skipped.
std::vector<std::pair<std::string, std::string>> expand_selectors(
    const std::vector<Selector>& selectors, const std::vector<std::string>& columns,
    const std::vector<std::string>& join_cols, const std::string& table) {
    std::set<std::string> have(columns.begin(), columns.end());
    std::set<std::string> skip(join_cols.begin(), join_cols.end());
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& s : selectors) {
        if (s.kind == Selector::Kind::wildcard) {
            std::string prefix = s.name.substr(0, s.name.size() - 1);
            bool any = false;
            for (const auto& c : columns) {
                if (skip.count(c)) continue;
                if (c.compare(0, prefix.size(), prefix) != 0) continue;
                out.push_back({c, c + s.out});
                any = true;
            }
            if (!any)
                throw std::runtime_error("wildcard '" + s.name + "' matches nothing in table '" +
                                         table + "'");
        } else {
            if (!have.count(s.name))
                throw std::runtime_error("table '" + table + "' has no column '" + s.name + "'");
            out.push_back({s.name, s.kind == Selector::Kind::renamed ? s.out : s.name});
        }
    }
    return out;
}

std::vector<std::string> block_join_columns(const TableBlock& b) {
    std::vector<std::string> cols;
    for (const auto& [l, r] : b.join) cols.push_back(r);
    return cols;
}

}  // namespace

std::string print_spec(const SpecAst& ast) {
    std::string out = "base " + ast.base_table + " alias " + ast.base_alias + " keys (" +
                      join_names(ast.base_keys) + ") {\n  ";
    std::vector<std::string> sels;
    for (const auto& s : ast.base_selectors) sels.push_back(print_selector(s));
    out += join_names(sels) + "\n}\n";
    for (const auto& item : ast.items) {
        if (const auto* b = std::get_if<TableBlock>(&item)) {
            out += "table " + b->table + " alias " + b->alias + " join (";
            for (std::size_t i = 0; i < b->join.size(); ++i) {
                if (i) out += ", ";
                out += b->join[i].first.alias + "." + b->join[i].first.column + " = " +
                       b->join[i].second;
            }
            out += ") {\n  ";
            sels.clear();
            for (const auto& s : b->selectors) sels.push_back(print_selector(s));
            out += join_names(sels) + "\n}\n";
        } else {
            const auto& d = std::get<ExprDef>(item);
            out += "expr " + d.out + " = ";
            print_expr(d.expr, out);
            out += '\n';
        }
    }
    return out;
}

SpecAst parse_spec(const std::string& text) { return Parser(text).run(); }

std::string generate_sql(const SpecAst& ast, const Catalog& catalog) {
    std::set<std::string> outputs;
    auto claim = [&](const std::string& name) {
        if (!outputs.insert(name).second)
            throw std::runtime_error("duplicate output column '" + name + "'");
    };

    std::vector<std::string> select_lines;
    auto entry = [](const std::string& alias, const std::pair<std::string, std::string>& col) {
        std::string e = alias + "." + col.first;
        if (col.second != col.first) e += " AS " + col.second;
        return e;
    };

    {
        std::vector<std::string> parts;
        for (const auto& col : expand_selectors(ast.base_selectors,
                                                catalog_columns(catalog, ast.base_table), {},
                                                ast.base_table)) {
            claim(col.second);
            parts.push_back(entry(ast.base_alias, col));
        }
        select_lines.push_back(join_names(parts));
    }
    for (const auto& item : ast.items) {
        if (const auto* b = std::get_if<TableBlock>(&item)) {
            std::vector<std::string> parts;
            for (const auto& col :
                 expand_selectors(b->selectors, catalog_columns(catalog, b->table),
                                  block_join_columns(*b), b->table)) {
                claim(col.second);
                parts.push_back(entry(b->alias, col));
            }
            select_lines.push_back(join_names(parts));
        } else {
            const auto& d = std::get<ExprDef>(item);
            claim(d.out);
            std::string e;
            sql_expr(d.expr, e);
            select_lines.push_back(e + " AS " + d.out);
        }
    }

    std::string sql = "SELECT ";
    for (std::size_t i = 0; i < select_lines.size(); ++i) {
        if (i) sql += "       ";
        sql += select_lines[i];
        sql += i + 1 < select_lines.size() ? ",\n" : "\n";
    }
    sql += "FROM " + ast.base_table + " " + ast.base_alias + "\n";
    for (const auto& item : ast.items) {
        const auto* b = std::get_if<TableBlock>(&item);
        if (!b) continue;
        sql += "    LEFT OUTER JOIN " + b->table + " " + b->alias + " ON ";
        for (std::size_t i = 0; i < b->join.size(); ++i) {
            if (i) sql += " AND ";
            sql += b->join[i].first.alias + "." + b->join[i].first.column + " = " + b->alias +
                   "." + b->join[i].second;
        }
        sql += '\n';
    }
    return sql;
}

// ---- relational evaluation ----

namespace {

// Join-key index for one block: key tuple (0x1f-joined) -> row.
struct BlockIndex {
    const RelTable* table = nullptr;
    std::vector<std::size_t> select_src;   // source column index per output
    std::vector<std::string> select_out;
    std::vector<std::pair<ColumnRef, std::size_t>> join;  // left ref, own column index
    std::unordered_map<std::string, std::size_t> by_key;
    const TableBlock* block = nullptr;
};

std::optional<double> eval_expr(
    const Expr& e, const std::function<const std::string*(const ColumnRef&)>& cell) {
    switch (e.kind) {
        case Expr::Kind::number: return e.number;
        case Expr::Kind::column: {
            const std::string* s = cell(e.ref);
            if (!s || s->empty()) return std::nullopt;
            auto v = parse_double(*s);
            if (!v)
                throw std::runtime_error("non-numeric value '" + *s + "' in column " +
                                         e.ref.alias + "." + e.ref.column);
            return v;
        }
        case Expr::Kind::call: {
            if (e.func == "hours_between") {
                auto ts_of = [&](const Expr& arg) -> std::optional<Timestamp> {
                    if (arg.kind != Expr::Kind::column)
                        throw std::runtime_error("hours_between expects timestamp columns");
                    const std::string* s = cell(arg.ref);
                    if (!s || s->empty()) return std::nullopt;
                    auto ts = parse_iso8601(*s);
                    if (!ts)
                        throw std::runtime_error("non-timestamp value '" + *s + "' in column " +
                                                 arg.ref.alias + "." + arg.ref.column);
                    return ts;
                };
                auto a = ts_of(e.args[0]), b = ts_of(e.args[1]);
                if (!a || !b) return std::nullopt;
                return static_cast<double>(*a - *b) / 3600.0;
            }
            auto x = eval_expr(e.args[0], cell);
            if (!x) return std::nullopt;
            return round_decimals(*x, static_cast<int>(e.args[1].number));
        }
        case Expr::Kind::binary: {
            auto a = eval_expr(e.args[0], cell);
            auto b = eval_expr(e.args[1], cell);
            if (!a || !b) return std::nullopt;
            switch (e.op) {
                case '+': return *a + *b;
                case '-': return *a - *b;
                case '*': return *a * *b;
                default: return *a / *b;
            }
        }
    }
    return std::nullopt;
}

}  // namespace

RelTable execute_query(const SpecAst& ast, const std::vector<RelTable>& tables) {
    auto find_table = [&](const std::string& name) -> const RelTable& {
        for (const auto& t : tables)
            if (t.name == name) return t;
        throw std::runtime_error("no table named '" + name + "'");
    };
    const RelTable& base = find_table(ast.base_table);

    RelTable result;
    result.name = "merged";
    result.keys = ast.base_keys;

    // base selector plan
    std::vector<std::size_t> base_src;
    for (const auto& col :
         expand_selectors(ast.base_selectors, base.columns, {}, ast.base_table)) {
        base_src.push_back(base.col(col.first));
        result.columns.push_back(col.second);
    }

    // block plans, keyed by alias for cross-block references
    std::vector<BlockIndex> blocks;
    std::unordered_map<std::string, std::size_t> alias_block;  // alias -> blocks index
    std::vector<const ExprDef*> expr_at;                       // per select segment
    struct Segment {
        enum class Kind { block, expr } kind;
        std::size_t index;
    };
    std::vector<Segment> segments;

    for (const auto& item : ast.items) {
        if (const auto* b = std::get_if<TableBlock>(&item)) {
            BlockIndex bi;
            bi.block = b;
            bi.table = &find_table(b->table);
            for (const auto& col : expand_selectors(b->selectors, bi.table->columns,
                                                    block_join_columns(*b), b->table)) {
                bi.select_src.push_back(bi.table->col(col.first));
                bi.select_out.push_back(col.second);
                result.columns.push_back(col.second);
            }
            std::vector<std::size_t> own_key_idx;
            for (const auto& [l, r] : b->join) {
                own_key_idx.push_back(bi.table->col(r));
                bi.join.push_back({l, own_key_idx.back()});
            }
            for (std::size_t ri = 0; ri < bi.table->rows.size(); ++ri) {
                std::string key;
                bool null_key = false;
                for (std::size_t ki : own_key_idx) {
                    const std::string& v = bi.table->rows[ri][ki];
                    if (v.empty()) {
                        null_key = true;  // null keys never join
                        break;
                    }
                    key += v;
                    key += '\x1f';
                }
                if (null_key) continue;
                if (!bi.by_key.emplace(std::move(key), ri).second)
                    throw std::runtime_error("table '" + b->table +
                                             "': join key not unique for alias " + b->alias);
            }
            segments.push_back({Segment::Kind::block, blocks.size()});
            alias_block[b->alias] = blocks.size();
            blocks.push_back(std::move(bi));
        } else {
            const auto& d = std::get<ExprDef>(item);
            result.columns.push_back(d.out);
            segments.push_back({Segment::Kind::expr, expr_at.size()});
            expr_at.push_back(&d);
        }
    }
    {
        std::set<std::string> uniq(result.columns.begin(), result.columns.end());
        if (uniq.size() != result.columns.size())
            throw std::runtime_error("duplicate output column after wildcard expansion");
    }

    // matched row per block while one base row is evaluated
    std::vector<long> match(blocks.size(), -1);
    const std::vector<std::string>* base_row = nullptr;
    auto cell = [&](const ColumnRef& ref) -> const std::string* {
        if (ref.alias == ast.base_alias) return &(*base_row)[base.col(ref.column)];
        auto it = alias_block.find(ref.alias);
        if (it == alias_block.end())
            throw std::runtime_error("unknown alias '" + ref.alias + "'");
        const BlockIndex& bi = blocks[it->second];
        long row = match[it->second];
        if (row < 0) return nullptr;
        return &bi.table->rows[static_cast<std::size_t>(row)][bi.table->col(ref.column)];
    };

    result.rows.reserve(base.rows.size());
    std::vector<std::string> out_row;
    for (const auto& row : base.rows) {
        base_row = &row;
        out_row.clear();
        out_row.reserve(result.columns.size());
        for (std::size_t i : base_src) out_row.push_back(row[i]);
        std::fill(match.begin(), match.end(), -1);
        for (const auto& seg : segments) {
            if (seg.kind == Segment::Kind::block) {
                BlockIndex& bi = blocks[seg.index];
                std::string key;
                bool null_key = false;
                for (const auto& [l, own_idx] : bi.join) {
                    const std::string* v = cell(l);
                    if (!v || v->empty()) {
                        null_key = true;
                        break;
                    }
                    key += *v;
                    key += '\x1f';
                }
                if (!null_key) {
                    auto it = bi.by_key.find(key);
                    if (it != bi.by_key.end()) match[seg.index] = static_cast<long>(it->second);
                }
                const auto& trows = bi.table->rows;
                for (std::size_t k = 0; k < bi.select_src.size(); ++k) {
                    if (match[seg.index] < 0) out_row.push_back("");
                    else
                        out_row.push_back(
                            trows[static_cast<std::size_t>(match[seg.index])][bi.select_src[k]]);
                }
            } else {
                auto v = eval_expr(expr_at[seg.index]->expr, cell);
                out_row.push_back(v ? format_double(*v) : "");
            }
        }
        result.rows.push_back(out_row);
    }
    return result;
}

}  // namespace featspec
}  // namespace ww
