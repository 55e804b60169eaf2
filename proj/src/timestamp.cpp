#include "notemort/timestamp.hpp"

#include <charconv>

#include <fmt/format.h>

#include "notemort/csv.hpp"
#include "notemort/error.hpp"

namespace notemort {

namespace {

// Inverse of days_from_civil (H. Hinnant's algorithm).
void civil_from_days(std::int64_t z, std::int64_t& y, unsigned& m, unsigned& d) {
  z += 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const auto doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  y = static_cast<std::int64_t>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  d = doy - (153 * mp + 2) / 5 + 1;
  m = mp < 10 ? mp + 3 : mp - 9;
  if (m <= 2) ++y;
}

bool is_leap(std::int64_t y) { return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0; }

unsigned days_in_month(std::int64_t y, unsigned m) {
  static constexpr unsigned kDays[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  return m == 2 && is_leap(y) ? 29 : kDays[m - 1];
}

bool parse_uint(std::string_view s, unsigned& out) {
  if (s.empty()) return false;
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc{} && ptr == end;
}

[[noreturn]] void bad(std::string_view text) {
  throw DataError(fmt::format("malformed timestamp '{}'", text));
}

}  // namespace

std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const auto yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m > 2 ? m - 3 : m + 9) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

Timestamp make_timestamp(int year, unsigned month, unsigned day, unsigned hour, unsigned minute,
                         unsigned second) {
  return {days_from_civil(year, month, day) * kSecondsPerDay + hour * 3600 + minute * 60 + second};
}

std::optional<Timestamp> parse_timestamp(std::string_view raw) {
  const std::string text = trim(raw);
  if (text.empty()) return std::nullopt;
  const std::string_view s = text;
  // YYYY-MM-DD[ HH:MM:SS]
  if (s.size() != 10 && s.size() != 19) bad(raw);
  if (s[4] != '-' || s[7] != '-') bad(raw);
  unsigned year = 0, month = 0, day = 0, hour = 0, minute = 0, second = 0;
  if (!parse_uint(s.substr(0, 4), year) || !parse_uint(s.substr(5, 2), month) ||
      !parse_uint(s.substr(8, 2), day)) {
    bad(raw);
  }
  if (s.size() == 19) {
    if ((s[10] != ' ' && s[10] != 'T') || s[13] != ':' || s[16] != ':') bad(raw);
    if (!parse_uint(s.substr(11, 2), hour) || !parse_uint(s.substr(14, 2), minute) ||
        !parse_uint(s.substr(17, 2), second)) {
      bad(raw);
    }
  }
  if (month < 1 || month > 12 || day < 1 || day > days_in_month(year, month) || hour > 23 ||
      minute > 59 || second > 59) {
    bad(raw);
  }
  return make_timestamp(static_cast<int>(year), month, day, hour, minute, second);
}

std::string format_timestamp(Timestamp ts) {
  std::int64_t days = ts.seconds / kSecondsPerDay;
  std::int64_t rem = ts.seconds % kSecondsPerDay;
  if (rem < 0) {
    rem += kSecondsPerDay;
    --days;
  }
  std::int64_t y = 0;
  unsigned m = 0, d = 0;
  civil_from_days(days, y, m, d);
  return fmt::format("{:04d}-{:02d}-{:02d} {:02d}:{:02d}:{:02d}", y, m, d, rem / 3600,
                     (rem / 60) % 60, rem % 60);
}

}  // namespace notemort
