#include "notemort/tokenize.hpp"

namespace notemort {

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  for_each_token(text, [&](const std::string& t) { out.push_back(t); });
  return out;
}

std::size_t count_tokens(std::string_view text) {
  std::size_t n = 0;
  for_each_token(text, [&](const std::string&) { ++n; });
  return n;
}

}  // namespace notemort
