#include "clv/dates.hpp"

#include <array>
#include <cctype>
#include <cstdlib>

#include "clv/errors.hpp"

namespace clv {

std::int64_t days_from_civil(int y, int m, int d) {
    y -= m <= 2;
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153u * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

void civil_from_days(std::int64_t z, int* y, int* m, int* d) {
    z += 719468;
    const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const std::int64_t yy = static_cast<std::int64_t>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    *d = static_cast<int>(doy - (153 * mp + 2) / 5 + 1);
    *m = static_cast<int>(mp + (mp < 10 ? 3 : -9));
    *y = static_cast<int>(yy + (*m <= 2));
}

namespace {

bool is_valid_date(int y, int m, int d) {
    if (m < 1 || m > 12 || d < 1) return false;
    static constexpr std::array<int, 12> days{31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    int dm = days[m - 1];
    if (m == 2 && ((y % 4 == 0 && y % 100 != 0) || y % 400 == 0)) dm = 29;
    return d <= dm;
}

}  // namespace

Timestamp parse_date(const std::string& text, const std::string& format) {
    if (format != "ymd" && format != "dmy" && format != "mdy")
        throw InputError("unsupported date format '" + format + "' (use ymd, dmy or mdy)");

    // split off an optional time part
    std::string date_part = text;
    std::string time_part;
    const auto space = text.find_first_of(" T");
    if (space != std::string::npos) {
        date_part = text.substr(0, space);
        time_part = text.substr(space + 1);
    }

    std::array<int, 3> fields{};
    int nfield = 0;
    std::string cur;
    for (char ch : date_part) {
        if (std::isdigit(static_cast<unsigned char>(ch))) {
            cur += ch;
        } else if (ch == '-' || ch == '/' || ch == '.') {
            if (cur.empty() || nfield >= 3) throw InputError("cannot parse date '" + text + "'");
            fields[nfield++] = std::atoi(cur.c_str());
            cur.clear();
        } else {
            throw InputError("cannot parse date '" + text + "'");
        }
    }
    if (!cur.empty()) {
        if (nfield == 0 && cur.size() == 8) {
            // compact form, split by format token widths (year 4, month/day 2)
            if (format == "ymd") {
                fields = {std::atoi(cur.substr(0, 4).c_str()), std::atoi(cur.substr(4, 2).c_str()),
                          std::atoi(cur.substr(6, 2).c_str())};
                nfield = 3;
            } else {
                fields = {std::atoi(cur.substr(0, 2).c_str()), std::atoi(cur.substr(2, 2).c_str()),
                          std::atoi(cur.substr(4, 4).c_str())};
                nfield = 3;
            }
        } else if (nfield == 2) {
            fields[nfield++] = std::atoi(cur.c_str());
        } else {
            throw InputError("cannot parse date '" + text + "'");
        }
    }
    if (nfield != 3) throw InputError("cannot parse date '" + text + "'");

    int y, m, d;
    if (format == "ymd") {
        y = fields[0]; m = fields[1]; d = fields[2];
    } else if (format == "dmy") {
        d = fields[0]; m = fields[1]; y = fields[2];
    } else {
        m = fields[0]; d = fields[1]; y = fields[2];
    }
    if (!is_valid_date(y, m, d)) throw InputError("invalid calendar date '" + text + "'");

    std::int64_t seconds = days_from_civil(y, m, d) * kSecondsPerDay;
    if (!time_part.empty()) {
        int hh = 0, mm = 0, ss = 0;
        if (std::sscanf(time_part.c_str(), "%d:%d:%d", &hh, &mm, &ss) < 2 || hh < 0 || hh > 23 ||
            mm < 0 || mm > 59 || ss < 0 || ss > 60)
            throw InputError("cannot parse time '" + text + "'");
        seconds += hh * 3600 + mm * 60 + ss;
    }
    return seconds;
}

std::string format_date(Timestamp ts) {
    const Timestamp day = truncate_to_day(ts);
    int y, m, d;
    civil_from_days(day / kSecondsPerDay, &y, &m, &d);
    char buf[32];
    const std::int64_t rem = ts - day;
    if (rem == 0) {
        std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", y, m, d);
    } else {
        std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d %02d:%02d:%02d", y, m, d,
                      static_cast<int>(rem / 3600), static_cast<int>((rem / 60) % 60),
                      static_cast<int>(rem % 60));
    }
    return buf;
}

}  // namespace clv
