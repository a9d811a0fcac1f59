#pragma once

#include <cstdint>
#include <string>

namespace portalchoice::cal {

// Days since 1970-01-01 for a proleptic Gregorian civil date.
// Howard Hinnant's civil-from-days algorithm and its inverse.
constexpr std::int64_t days_from_civil(int y, unsigned m, unsigned d) noexcept {
    y -= m <= 2;
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

struct CivilDate {
    int year;
    unsigned month;
    unsigned day;
};

constexpr CivilDate civil_from_days(std::int64_t z) noexcept {
    z += 719468;
    const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const std::int64_t y = static_cast<std::int64_t>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    const unsigned d = doy - (153 * mp + 2) / 5 + 1;
    const unsigned m = mp + (mp < 10 ? 3 : -9);
    return {static_cast<int>(y + (m <= 2)), m, d};
}

constexpr std::int64_t day_of_timestamp(std::int64_t ts) noexcept {
    // Floor division; timestamps are UTC seconds since epoch.
    std::int64_t d = ts / 86400;
    if (ts % 86400 < 0) --d;
    return d;
}

// "YYYY-MM" key used by the monthly advertising join.
std::string year_month_of_timestamp(std::int64_t ts);

// "YYYY-MM-DD".
std::string date_string(std::int64_t day);

// Parses "YYYY-MM-DD" to days since epoch; throws data_error on bad input.
std::int64_t parse_date(const std::string& s);

} // namespace portalchoice::cal
