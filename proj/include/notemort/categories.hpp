#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string_view>

namespace notemort {

/// Number of canonical note categories.
inline constexpr std::size_t kNumCategories = 15;

/// Canonical category names, in the fixed row order used for every
/// per-category structure (descending corpus frequency in MIMIC-III).
inline constexpr std::array<std::string_view, kNumCategories> kCategoryNames = {
    "Nursing/other", "Radiology",      "Nursing",     "Physician",       "ECG",
    "Discharge summary", "Respiratory", "Echo",       "Nutrition",       "General",
    "Rehab Services", "Social Work",    "Case Management", "Pharmacy",   "Consult",
};

/// Matches a raw CATEGORY value after trimming, case-insensitively.
std::optional<std::size_t> match_category(std::string_view raw);

/// Like match_category but throws ConfigError for unknown names.
std::size_t category_index(std::string_view name);

}  // namespace notemort
