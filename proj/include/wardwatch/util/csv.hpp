#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace ww {

// Shortest round-trip decimal rendering. Used for every double written to
// an artifact so that identical values always produce identical bytes.
inline std::string format_double(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    (void)ec;
    return std::string(buf, ptr);
}

inline std::optional<double> parse_double(std::string_view s) {
    double v = 0;
    const char* begin = s.data();
    const char* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(begin, end, v);
    if (ec != std::errc() || ptr != end) return std::nullopt;
    return v;
}

inline std::optional<std::int64_t> parse_int(std::string_view s) {
    std::int64_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

// Splits one CSV line. Fields containing ',' '"' or newline are expected to
// be double-quoted with "" escaping (RFC 4180 subset; no embedded newlines).
inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field.push_back(c);
            }
        } else if (c == '"' && field.empty()) {
            quoted = true;
        } else if (c == ',') {
            out.push_back(std::move(field));
            field.clear();
        } else {
            field.push_back(c);
        }
    }
    out.push_back(std::move(field));
    return out;
}

inline std::string csv_escape(std::string_view s) {
    bool needs = s.find_first_of(",\"\n\r") != std::string_view::npos;
    if (!needs) return std::string(s);
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += "\"\"";
        else out.push_back(c);
    }
    out += "\"";
    return out;
}

class CsvReader {
  public:
    explicit CsvReader(const std::string& path) : in_(path), path_(path) {
        if (!in_) throw std::runtime_error("cannot open file: " + path);
        std::string header;
        if (!std::getline(in_, header)) throw std::runtime_error("empty file: " + path);
        strip_cr(header);
        columns_ = split_csv_line(header);
        for (std::size_t i = 0; i < columns_.size(); ++i) index_[columns_[i]] = i;
    }

    const std::vector<std::string>& columns() const { return columns_; }

    // Index of a required column; throws naming the file and column.
    std::size_t col(const std::string& name) const {
        auto it = index_.find(name);
        if (it == index_.end())
            throw std::runtime_error(path_ + ": missing column '" + name + "'");
        return it->second;
    }

    bool has_col(const std::string& name) const { return index_.count(name) > 0; }

    bool next(std::vector<std::string>& fields) {
        std::string line;
        while (std::getline(in_, line)) {
            strip_cr(line);
            if (line.empty()) continue;
            fields = split_csv_line(line);
            ++line_no_;
            return true;
        }
        return false;
    }

    std::size_t line_no() const { return line_no_; }
    const std::string& path() const { return path_; }

  private:
    static void strip_cr(std::string& s) {
        if (!s.empty() && s.back() == '\r') s.pop_back();
    }
    std::ifstream in_;
    std::string path_;
    std::vector<std::string> columns_;
    std::unordered_map<std::string, std::size_t> index_;
    std::size_t line_no_ = 0;
};

class CsvWriter {
  public:
    CsvWriter(const std::string& path, const std::vector<std::string>& columns) : out_(path) {
        if (!out_) throw std::runtime_error("cannot open file for writing: " + path);
        write_row(columns);
    }

    void write_row(const std::vector<std::string>& fields) {
        for (std::size_t i = 0; i < fields.size(); ++i) {
            if (i) out_.put(',');
            out_ << csv_escape(fields[i]);
        }
        out_.put('\n');
    }

    // Raw line append for hot paths; caller guarantees escaping is not needed.
    void write_line(const std::string& line) {
        out_ << line;
        out_.put('\n');
    }

  private:
    std::ofstream out_;
};

}  // namespace ww
