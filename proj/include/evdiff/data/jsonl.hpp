#pragma once

#include <string>
#include <vector>

#include "evdiff/data/events.hpp"

namespace evdiff {

struct LoadedCorpus {
  std::vector<EventSequence> sequences;
  int num_marks = 0;  // declared in the header line or inferred as max mark + 1
};

/// Reads one event sequence per line: {"marks":[...], "times":[...]}.
/// An optional header line {"K": n} declares the mark count; otherwise it is
/// inferred. Extra fields are ignored. Validation errors name the line.
LoadedCorpus load_jsonl(const std::string& path, int declared_marks = 0);

/// Writes the header line and one object per sequence.
void save_jsonl(const std::string& path, const std::vector<EventSequence>& sequences,
                int num_marks);

/// FNV-1a 64 over the raw bytes of the file, as a hex string. Used to tie
/// checkpoints and metrics to the dataset they were produced from.
std::string file_hash(const std::string& path);

}  // namespace evdiff
