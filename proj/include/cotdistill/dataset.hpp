#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "cotdistill/types.hpp"

namespace cotdistill {

/// Train/val/test fractions and the shuffle seed.
struct SplitSpec {
  std::array<double, 3> ratios{0.6, 0.2, 0.2};
  std::uint64_t seed = 0;

  // Throws UsageError unless ratios are non-negative and sum to 1 within 1e-9.
  void validate() const;
};

struct SplitResult {
  std::vector<PostRecord> train;
  std::vector<PostRecord> val;
  std::vector<PostRecord> test;

  std::vector<PostRecord>& operator[](Split split);
  const std::vector<PostRecord>& operator[](Split split) const;
  std::size_t size() const { return train.size() + val.size() + test.size(); }
};

/// Counters for rows a loader consumed without turning them into records.
struct LoadStats {
  std::size_t rows = 0;
  std::size_t records = 0;
  std::size_t rejected_empty_post = 0;
  std::size_t rejected_rows = 0;
  std::size_t merged_duplicates = 0;
  std::size_t unmatched_companion_rows = 0;
  std::size_t no_majority = 0;
};

struct SbicOptions {
  // Mean annotator offensiveness at or above this is hate.
  double threshold = 0.5;
};

struct HateXplainMapping {
  bool offensive_is_hate = true;
};

/// Reads one official SBIC split file. Annotator rows for the same post are
/// folded into a single record.
std::vector<PostRecord> load_sbic(const std::filesystem::path& path, Split split,
                                  const SbicOptions& options = {}, LoadStats* stats = nullptr);

/// Reads the Implicit Hate class file, joins the optional target/implied
/// statement file by post text, and splits with `spec`.
SplitResult load_implicit_hate(const std::filesystem::path& path, const SplitSpec& spec,
                               const std::optional<std::filesystem::path>& companion = std::nullopt,
                               LoadStats* stats = nullptr);

/// HateXplain (dataset.json) or DynaHate (csv) records, all assigned to test.
std::vector<PostRecord> load_cross_eval(const std::filesystem::path& path, SourceDataset dataset,
                                        const HateXplainMapping& mapping = {},
                                        LoadStats* stats = nullptr);

/// Seeded shuffle followed by contiguous slicing, laid out in descending ratio
/// order (ties by train, val, test). The first slice takes the remainder and
/// the others floor(n * ratio); with train largest, as in 6:2:2, the
/// remainder goes to train.
SplitResult split_random(std::vector<PostRecord> records, const SplitSpec& spec);

/// Fisher-Yates permutation of [0, n) driven by mt19937_64. Identical on every
/// platform for a given seed.
std::vector<std::size_t> seeded_permutation(std::size_t n, std::uint64_t seed);

std::vector<PostRecord> read_records(const std::filesystem::path& path);
void write_records(const std::filesystem::path& path, const std::vector<PostRecord>& records);

// Case-insensitive, first occurrence kept, empty strings dropped.
void append_unique(std::vector<std::string>& values, std::string_view candidate);

}  // namespace cotdistill
