#pragma once

#include <chrono>
#include <string>

namespace medrec {

/// "2026-08-10T12:34:56Z" for the given time point.
std::string iso8601_utc(std::chrono::system_clock::time_point tp);
std::string iso8601_utc_now();

/// Filesystem-friendly "20260810T123456Z" stamp.
std::string compact_utc_now();

} // namespace medrec
