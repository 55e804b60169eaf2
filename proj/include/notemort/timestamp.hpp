#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace notemort {

inline constexpr std::int64_t kSecondsPerDay = 86400;

/// Seconds since 1970-01-01 00:00:00 on the proleptic Gregorian calendar.
/// MIMIC dates are shifted into the 2100-2200 range, so the representation
/// has to cover years far outside what time_t conventions assume.
struct Timestamp {
  std::int64_t seconds = 0;

  auto operator<=>(const Timestamp&) const = default;

  Timestamp plus_days(std::int64_t days) const { return {seconds + days * kSecondsPerDay}; }
  double days_since(Timestamp earlier) const {
    return static_cast<double>(seconds - earlier.seconds) / static_cast<double>(kSecondsPerDay);
  }
};

std::int64_t days_from_civil(std::int64_t year, unsigned month, unsigned day);

Timestamp make_timestamp(int year, unsigned month, unsigned day, unsigned hour = 0,
                         unsigned minute = 0, unsigned second = 0);

/// Parses "YYYY-MM-DD HH:MM:SS" or "YYYY-MM-DD". An empty (or all-blank)
/// string is an absent value and yields nullopt. Anything else malformed
/// throws DataError.
std::optional<Timestamp> parse_timestamp(std::string_view text);

/// Formats as "YYYY-MM-DD HH:MM:SS".
std::string format_timestamp(Timestamp ts);

}  // namespace notemort
