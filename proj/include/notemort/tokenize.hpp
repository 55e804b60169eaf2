#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace notemort {

/// Lower-cased ASCII alphanumeric runs. De-identification placeholders of
/// the form "[** ... **]" are removed first, so dates and names hidden in
/// them never become tokens. Digits are kept.
std::vector<std::string> tokenize(std::string_view text);

/// Calls `sink(token)` for each token without materializing the list.
template <typename Sink>
void for_each_token(std::string_view text, Sink&& sink);

/// Number of tokens `tokenize(text)` would return.
std::size_t count_tokens(std::string_view text);

// ---------------------------------------------------------------------------

namespace detail {
inline bool is_token_char(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9');
}
inline char lower_ascii(char c) { return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c; }
}  // namespace detail

template <typename Sink>
void for_each_token(std::string_view text, Sink&& sink) {
  std::string token;
  std::size_t i = 0;
  const std::size_t n = text.size();
  auto flush = [&] {
    if (!token.empty()) {
      sink(std::as_const(token));
      token.clear();
    }
  };
  while (i < n) {
    if (text[i] == '[' && text.compare(i, 3, "[**") == 0) {
      const std::size_t close = text.find("**]", i + 3);
      if (close != std::string_view::npos) {
        flush();
        i = close + 3;
        continue;
      }
    }
    const char c = text[i];
    if (detail::is_token_char(c)) {
      token.push_back(detail::lower_ascii(c));
    } else {
      flush();
    }
    ++i;
  }
  flush();
}

}  // namespace notemort
