#include "medrec/timeutil.hpp"

#include <cstdio>
#include <ctime>

namespace medrec {

namespace {

std::tm to_utc_tm(std::chrono::system_clock::time_point tp) {
    std::time_t t = std::chrono::system_clock::to_time_t(tp);
    std::tm out{};
    gmtime_r(&t, &out);
    return out;
}

} // namespace

std::string iso8601_utc(std::chrono::system_clock::time_point tp) {
    std::tm tm = to_utc_tm(tp);
    char buffer[32];
    std::snprintf(buffer, sizeof(buffer), "%04d-%02d-%02dT%02d:%02d:%02dZ",
                  tm.tm_year + 1900, tm.tm_mon + 1, tm.tm_mday, tm.tm_hour, tm.tm_min,
                  tm.tm_sec);
    return buffer;
}

std::string iso8601_utc_now() {
    return iso8601_utc(std::chrono::system_clock::now());
}

std::string compact_utc_now() {
    std::tm tm = to_utc_tm(std::chrono::system_clock::now());
    char buffer[32];
    std::snprintf(buffer, sizeof(buffer), "%04d%02d%02dT%02d%02d%02dZ",
                  tm.tm_year + 1900, tm.tm_mon + 1, tm.tm_mday, tm.tm_hour, tm.tm_min,
                  tm.tm_sec);
    return buffer;
}

} // namespace medrec
