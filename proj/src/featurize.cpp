#include "notemort/featurize.hpp"

#include <algorithm>
#include <set>

#include <fmt/format.h>

#include "notemort/error.hpp"
#include "notemort/rng.hpp"
#include "notemort/tokenize.hpp"

namespace notemort {

void TokenCounter::add(std::span<const std::string> tokens) {
  for (const auto& t : tokens) ++counts_[t];
}

void TokenCounter::add_text(std::string_view text) {
  for_each_token(text, [&](const std::string& t) { ++counts_[t]; });
}

void TokenCounter::merge(const TokenCounter& other) {
  for (const auto& [t, n] : other.counts_) counts_[t] += n;
}

Vocabulary::Vocabulary(std::vector<std::string> tokens, std::vector<std::uint64_t> frequencies)
    : tokens_(std::move(tokens)), frequencies_(std::move(frequencies)) {
  if (frequencies_.size() != tokens_.size()) {
    throw DataError("vocabulary tokens and frequencies differ in length");
  }
  index_.reserve(tokens_.size());
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (!index_.emplace(tokens_[i], i).second) {
      throw DataError(fmt::format("duplicate vocabulary token '{}'", tokens_[i]));
    }
  }
}

std::optional<std::size_t> Vocabulary::index_of(std::string_view token) const {
  auto it = index_.find(std::string(token));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::string Vocabulary::hash() const {
  std::uint64_t h = fnv1a("");
  for (const auto& t : tokens_) {
    h = fnv1a(t, h);
    h = fnv1a("\n", h);
  }
  return fmt::format("{:016x}", h);
}

Vocabulary build_vocabulary(const TokenCounter& counter, std::size_t k) {
  if (k < 1) throw ConfigError("vocabulary size must be at least 1");
  if (counter.distinct() < k) {
    throw DataError(fmt::format("corpus has only {} distinct tokens, {} requested",
                                counter.distinct(), k));
  }
  using Entry = std::pair<const std::string*, std::uint64_t>;
  std::vector<Entry> entries;
  entries.reserve(counter.distinct());
  for (const auto& [t, n] : counter.counts()) entries.emplace_back(&t, n);
  auto by_rank = [](const Entry& a, const Entry& b) {
    if (a.second != b.second) return a.second > b.second;
    return *a.first < *b.first;
  };
  std::partial_sort(entries.begin(), entries.begin() + static_cast<std::ptrdiff_t>(k),
                    entries.end(), by_rank);
  std::vector<std::string> tokens;
  std::vector<std::uint64_t> freqs;
  tokens.reserve(k);
  freqs.reserve(k);
  for (std::size_t i = 0; i < k; ++i) {
    tokens.push_back(*entries[i].first);
    freqs.push_back(entries[i].second);
  }
  return Vocabulary(std::move(tokens), std::move(freqs));
}

Vocabulary build_vocabulary(std::span<const std::string> texts, std::size_t k) {
  TokenCounter counter;
  for (const auto& text : texts) counter.add_text(text);
  return build_vocabulary(counter, k);
}

CountVector vectorize(std::span<const std::string> tokens, const Vocabulary& vocab) {
  CountVector out;
  out.counts.assign(vocab.size(), 0);
  out.token_length = tokens.size();
  for (const auto& t : tokens) {
    if (auto idx = vocab.index_of(t)) ++out.counts[*idx];
  }
  return out;
}

std::vector<std::uint32_t> CategoryMatrix::column_sums() const {
  std::vector<std::uint32_t> sums(cols_, 0);
  for (std::size_t i = 0; i < rows_; ++i) {
    const auto r = row(i);
    for (std::size_t j = 0; j < cols_; ++j) sums[j] += r[j];
  }
  return sums;
}

BasicEncoder::BasicEncoder(std::array<std::vector<std::string>, kNumCategoricalFields> levels)
    : levels_(std::move(levels)) {
  names_.emplace_back("ADMIT_AGE");
  for (std::size_t f = 0; f < kNumCategoricalFields; ++f) {
    auto& lv = levels_[f];
    std::sort(lv.begin(), lv.end());
    lv.erase(std::unique(lv.begin(), lv.end()), lv.end());
    if (!std::binary_search(lv.begin(), lv.end(), std::string(kUnknownLevel))) {
      lv.insert(std::lower_bound(lv.begin(), lv.end(), std::string(kUnknownLevel)),
                std::string(kUnknownLevel));
    }
    offsets_[f] = names_.size();
    for (const auto& level : lv) names_.push_back(fmt::format("{}={}", kCategoricalFieldNames[f], level));
  }
}

BasicEncoder BasicEncoder::fit(std::span<const CohortInstance* const> training) {
  std::array<std::set<std::string>, kNumCategoricalFields> seen;
  for (const CohortInstance* inst : training) {
    for (std::size_t f = 0; f < kNumCategoricalFields; ++f) {
      seen[f].insert(categorical_field(inst->attributes, f));
    }
  }
  std::array<std::vector<std::string>, kNumCategoricalFields> levels;
  for (std::size_t f = 0; f < kNumCategoricalFields; ++f) {
    levels[f].assign(seen[f].begin(), seen[f].end());
  }
  return BasicEncoder(std::move(levels));
}

std::vector<double> BasicEncoder::encode(const AdmissionAttributes& attrs) const {
  if (names_.empty()) throw Error("basic feature encoder used before fitting");
  std::vector<double> out(names_.size(), 0.0);
  out[0] = attrs.admit_age_years;
  for (std::size_t f = 0; f < kNumCategoricalFields; ++f) {
    const auto& lv = levels_[f];
    auto it = std::lower_bound(lv.begin(), lv.end(), categorical_field(attrs, f));
    if (it == lv.end() || *it != categorical_field(attrs, f)) {
      it = std::lower_bound(lv.begin(), lv.end(), std::string(kUnknownLevel));
    }
    out[offsets_[f] + static_cast<std::size_t>(it - lv.begin())] = 1.0;
  }
  return out;
}

AdmissionFeatures featurize_admission(const CohortInstance& instance, const Vocabulary& vocab,
                                      const BasicEncoder& encoder) {
  AdmissionFeatures out;
  out.matrix = CategoryMatrix(vocab.size());
  for (std::size_t c = 0; c < kNumCategories; ++c) {
    const auto& tokens = instance.notes[c].tokens;
    auto row = out.matrix.row(c);
    for (const auto& t : tokens) {
      if (auto idx = vocab.index_of(t)) ++row[*idx];
    }
    out.matrix.token_length(c) = tokens.size();
  }
  out.all_notes = out.matrix.column_sums();
  out.basic = encoder.encode(instance.attributes);
  return out;
}

namespace {

NoteCorpusStats finish_stats(NoteCorpusStats stats) {
  for (auto& c : stats.categories) {
    if (stats.total_notes > 0) {
      c.fraction = static_cast<double>(c.note_count) / static_cast<double>(stats.total_notes);
    }
    if (c.note_count > 0) {
      c.mean_token_length =
          static_cast<double>(c.total_tokens) / static_cast<double>(c.note_count);
    }
  }
  return stats;
}

}  // namespace

NoteCorpusStats note_corpus_stats(std::span<const NoteRow> notes) {
  NoteCorpusStats stats;
  for (const auto& note : notes) {
    if (!note.category) continue;
    auto& c = stats.categories[*note.category];
    ++c.note_count;
    c.total_tokens += count_tokens(note.text);
    ++stats.total_notes;
  }
  return finish_stats(stats);
}

NoteCorpusStats note_corpus_stats(std::span<const CohortInstance> cohort) {
  NoteCorpusStats stats;
  for (const auto& inst : cohort) {
    for (std::size_t i = 0; i < kNumCategories; ++i) {
      auto& c = stats.categories[i];
      c.note_count += inst.notes[i].note_count;
      c.total_tokens += inst.notes[i].tokens.size();
      stats.total_notes += inst.notes[i].note_count;
    }
  }
  return finish_stats(stats);
}

}  // namespace notemort
