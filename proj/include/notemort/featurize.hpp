#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "notemort/categories.hpp"
#include "notemort/ingest.hpp"

namespace notemort {

inline constexpr std::size_t kDefaultVocabularySize = 400;

/// Corpus-wide token frequencies. Merging shards is order-independent.
class TokenCounter {
 public:
  void add(std::span<const std::string> tokens);
  void add_text(std::string_view text);
  void merge(const TokenCounter& other);

  const std::unordered_map<std::string, std::uint64_t>& counts() const { return counts_; }
  std::size_t distinct() const { return counts_.size(); }

 private:
  std::unordered_map<std::string, std::uint64_t> counts_;
};

/// The K most frequent training tokens, ordered by descending frequency with
/// ascending lexicographic tie-break.
class Vocabulary {
 public:
  Vocabulary() = default;
  /// Takes tokens in rank order; throws DataError on duplicates.
  Vocabulary(std::vector<std::string> tokens, std::vector<std::uint64_t> frequencies);

  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  const std::vector<std::uint64_t>& frequencies() const { return frequencies_; }
  std::optional<std::size_t> index_of(std::string_view token) const;
  /// FNV-1a over the rank-ordered tokens; models record it to detect a
  /// vocabulary mismatch at load time.
  std::string hash() const;

 private:
  std::vector<std::string> tokens_;
  std::vector<std::uint64_t> frequencies_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Throws DataError when fewer than K distinct tokens exist.
Vocabulary build_vocabulary(const TokenCounter& counter, std::size_t k = kDefaultVocabularySize);
Vocabulary build_vocabulary(std::span<const std::string> texts,
                            std::size_t k = kDefaultVocabularySize);

struct CountVector {
  std::vector<std::uint32_t> counts;
  /// Tokens in the input, including out-of-vocabulary ones.
  std::size_t token_length = 0;
};

CountVector vectorize(std::span<const std::string> tokens, const Vocabulary& vocab);

/// N x K token counts, one row per canonical category.
class CategoryMatrix {
 public:
  CategoryMatrix() = default;
  explicit CategoryMatrix(std::size_t vocab_size, std::size_t num_categories = kNumCategories)
      : rows_(num_categories),
        cols_(vocab_size),
        counts_(num_categories * vocab_size, 0),
        token_lengths_(num_categories, 0) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  std::uint32_t& at(std::size_t category, std::size_t token) { return counts_[category * cols_ + token]; }
  std::uint32_t at(std::size_t category, std::size_t token) const {
    return counts_[category * cols_ + token];
  }
  std::span<const std::uint32_t> row(std::size_t category) const {
    return {counts_.data() + category * cols_, cols_};
  }
  std::span<std::uint32_t> row(std::size_t category) { return {counts_.data() + category * cols_, cols_}; }
  std::span<const std::uint32_t> data() const { return counts_; }
  std::span<std::uint32_t> data() { return counts_; }

  std::size_t& token_length(std::size_t category) { return token_lengths_[category]; }
  std::size_t token_length(std::size_t category) const { return token_lengths_[category]; }

  /// Column-wise sum over categories.
  std::vector<std::uint32_t> column_sums() const;

  bool operator==(const CategoryMatrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::uint32_t> counts_;
  std::vector<std::size_t> token_lengths_;
};

/// One-hot encoder for the seven categorical admission fields plus admit age.
/// Levels come from the training split; every block carries an UNKNOWN
/// column that absorbs unseen levels.
class BasicEncoder {
 public:
  BasicEncoder() = default;
  explicit BasicEncoder(std::array<std::vector<std::string>, kNumCategoricalFields> levels);

  static BasicEncoder fit(std::span<const CohortInstance* const> training);

  std::size_t dimension() const { return names_.size(); }
  /// "ADMIT_AGE" followed by "FIELD=level" columns, block by block.
  const std::vector<std::string>& feature_names() const { return names_; }
  const std::array<std::vector<std::string>, kNumCategoricalFields>& levels() const { return levels_; }

  std::vector<double> encode(const AdmissionAttributes& attrs) const;

 private:
  std::array<std::vector<std::string>, kNumCategoricalFields> levels_;
  std::array<std::size_t, kNumCategoricalFields> offsets_{};
  std::vector<std::string> names_;
};

struct AdmissionFeatures {
  CategoryMatrix matrix;
  /// Column-wise sum of `matrix`.
  std::vector<std::uint32_t> all_notes;
  std::vector<double> basic;
};

AdmissionFeatures featurize_admission(const CohortInstance& instance, const Vocabulary& vocab,
                                      const BasicEncoder& encoder);

struct CategoryStats {
  std::size_t note_count = 0;
  double fraction = 0.0;
  std::size_t total_tokens = 0;
  /// nullopt when the category has no notes.
  std::optional<double> mean_token_length;
};

struct NoteCorpusStats {
  std::array<CategoryStats, kNumCategories> categories;
  std::size_t total_notes = 0;
};

/// Per-category note counts, fractions and mean token lengths over notes
/// with a recognized category.
NoteCorpusStats note_corpus_stats(std::span<const NoteRow> notes);
/// Same statistics from an already-joined cohort.
NoteCorpusStats note_corpus_stats(std::span<const CohortInstance> cohort);

}  // namespace notemort
