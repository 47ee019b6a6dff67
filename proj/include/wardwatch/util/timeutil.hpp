#pragma once

#include <cstdint>
#include <optional>
#include <string>

namespace ww {

// UTC wall-clock instant, seconds since the Unix epoch.
struct Timestamp {
    std::int64_t s = 0;

    friend bool operator==(Timestamp a, Timestamp b) { return a.s == b.s; }
    friend bool operator!=(Timestamp a, Timestamp b) { return a.s != b.s; }
    friend bool operator<(Timestamp a, Timestamp b) { return a.s < b.s; }
    friend bool operator<=(Timestamp a, Timestamp b) { return a.s <= b.s; }
    friend bool operator>(Timestamp a, Timestamp b) { return a.s > b.s; }
    friend bool operator>=(Timestamp a, Timestamp b) { return a.s >= b.s; }
};

constexpr std::int64_t kSecondsPerHour = 3600;
constexpr std::int64_t kSecondsPerDay = 86400;

inline Timestamp operator+(Timestamp t, std::int64_t seconds) { return {t.s + seconds}; }
inline Timestamp operator-(Timestamp t, std::int64_t seconds) { return {t.s - seconds}; }
inline std::int64_t operator-(Timestamp a, Timestamp b) { return a.s - b.s; }

inline std::int64_t hours(std::int64_t h) { return h * kSecondsPerHour; }
inline std::int64_t days(std::int64_t d) { return d * kSecondsPerDay; }
inline double seconds_to_days(std::int64_t s) { return static_cast<double>(s) / kSecondsPerDay; }
inline double seconds_to_hours(std::int64_t s) { return static_cast<double>(s) / kSecondsPerHour; }

// UTC calendar day index (days since epoch, floored).
inline std::int64_t utc_day(Timestamp t) {
    std::int64_t d = t.s / kSecondsPerDay;
    if (t.s < 0 && t.s % kSecondsPerDay != 0) --d;
    return d;
}

// "2021-03-05T14:30:00Z" <-> epoch seconds. Only the UTC ("Z") form is accepted.
std::optional<Timestamp> parse_iso8601(const std::string& text);
std::string format_iso8601(Timestamp t);

}  // namespace ww
