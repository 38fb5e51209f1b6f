#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "evdiff/data/events.hpp"

namespace evdiff {

/// Dataset-level metadata persisted next to the JSONL file.
struct DatasetManifest {
  std::string name;
  int num_marks = 0;
  double scale = 1.0;  // multiplier applied to raw times (100 / T_max)
  std::string source_path;
  std::string content_hash;
  SplitIndices splits;

  std::string to_json() const;
  static DatasetManifest from_json_file(const std::string& path);
  void save(const std::string& path) const;
};

/// A loaded, validated dataset with normalized times and sequence-level
/// splits. All consumers work on this form.
struct Dataset {
  DatasetManifest manifest;
  std::vector<EventSequence> sequences;  // times normalized to (0, 100]

  /// Loads the JSONL file; if `manifest_path` exists it is honored (and the
  /// content hash checked), otherwise a manifest is built: K inferred, times
  /// normalized, 60/20/20 split from the seed.
  static Dataset load(const std::string& jsonl_path, const std::string& manifest_path,
                      std::uint64_t seed);

  const std::vector<int>& train_indices() const { return manifest.splits.train; }
  const std::vector<int>& val_indices() const { return manifest.splits.val; }
  const std::vector<int>& test_indices() const { return manifest.splits.test; }
};

/// All windows of the given split, window construction per make_windows.
std::vector<PredictionWindow> windows_of_split(const Dataset& data,
                                               const std::vector<int>& indices,
                                               int history_len, int target_len,
                                               int stride);

}  // namespace evdiff
