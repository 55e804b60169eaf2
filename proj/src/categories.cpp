#include "notemort/categories.hpp"

#include <fmt/format.h>

#include "notemort/csv.hpp"
#include "notemort/error.hpp"

namespace notemort {

std::optional<std::size_t> match_category(std::string_view raw) {
  const std::string key = to_lower(trim(raw));
  for (std::size_t i = 0; i < kNumCategories; ++i) {
    if (to_lower(kCategoryNames[i]) == key) return i;
  }
  return std::nullopt;
}

std::size_t category_index(std::string_view name) {
  if (auto idx = match_category(name)) return *idx;
  throw ConfigError(fmt::format("unknown note category '{}'", name));
}

}  // namespace notemort
