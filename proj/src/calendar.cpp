#include "portalchoice/calendar.hpp"

#include "portalchoice/errors.hpp"

#include <cstdio>
#include <cstdlib>

namespace portalchoice::cal {

std::string year_month_of_timestamp(std::int64_t ts) {
    const CivilDate d = civil_from_days(day_of_timestamp(ts));
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d-%02u", d.year, d.month);
    return buf;
}

std::string date_string(std::int64_t day) {
    const CivilDate d = civil_from_days(day);
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", d.year, d.month, d.day);
    return buf;
}

std::int64_t parse_date(const std::string& s) {
    int y = 0;
    unsigned m = 0, d = 0;
    if (std::sscanf(s.c_str(), "%d-%u-%u", &y, &m, &d) != 3 || m < 1 || m > 12 ||
        d < 1 || d > 31) {
        throw data_error("bad date '" + s + "' (expected YYYY-MM-DD)");
    }
    const std::int64_t z = days_from_civil(y, m, d);
    const CivilDate back = civil_from_days(z);
    if (back.year != y || back.month != m || back.day != d)
        throw data_error("bad date '" + s + "' (no such calendar day)");
    return z;
}

} // namespace portalchoice::cal
