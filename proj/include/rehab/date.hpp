#pragma once

#include <compare>
#include <cstdio>
#include <string>

#include "rehab/errors.hpp"

namespace rehab {

// Calendar date with day arithmetic (proleptic Gregorian).
struct Date {
    int year = 1970;
    int month = 1;
    int day = 1;

    auto operator<=>(const Date&) const = default;

    // Days since 1970-01-01 (Howard Hinnant's civil-days algorithm).
    long to_days() const {
        const int y = year - (month <= 2 ? 1 : 0);
        const long era = (y >= 0 ? y : y - 399) / 400;
        const unsigned yoe = static_cast<unsigned>(y - era * 400);
        const unsigned doy =
            (153u * static_cast<unsigned>(month + (month > 2 ? -3 : 9)) + 2u) / 5u +
            static_cast<unsigned>(day) - 1u;
        const unsigned doe = yoe * 365u + yoe / 4u - yoe / 100u + doy;
        return era * 146097 + static_cast<long>(doe) - 719468;
    }

    static Date from_days(long z) {
        z += 719468;
        const long era = (z >= 0 ? z : z - 146096) / 146097;
        const unsigned doe = static_cast<unsigned>(z - era * 146097);
        const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
        const long y = static_cast<long>(yoe) + era * 400;
        const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
        const unsigned mp = (5 * doy + 2) / 153;
        const unsigned d = doy - (153 * mp + 2) / 5 + 1;
        const unsigned m = mp < 10 ? mp + 3 : mp - 9;
        return Date{static_cast<int>(y + (m <= 2 ? 1 : 0)), static_cast<int>(m),
                    static_cast<int>(d)};
    }

    Date plus_days(long n) const { return from_days(to_days() + n); }

    long days_until(const Date& other) const { return other.to_days() - to_days(); }

    std::string to_string() const {
        char buf[16];
        std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", year, month, day);
        return buf;
    }

    // Parses "YYYY-MM-DD"; rejects out-of-range components.
    static Date parse(const std::string& s) {
        int y = 0, m = 0, d = 0;
        char extra = 0;
        if (std::sscanf(s.c_str(), "%d-%d-%d%c", &y, &m, &d, &extra) != 3 ||
            m < 1 || m > 12 || d < 1 || d > 31) {
            throw FormatError("invalid date '" + s + "'");
        }
        Date date{y, m, d};
        if (Date::from_days(date.to_days()) != date) {
            throw FormatError("invalid date '" + s + "'");
        }
        return date;
    }
};

}  // namespace rehab
