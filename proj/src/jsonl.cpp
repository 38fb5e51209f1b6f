#include "evdiff/data/jsonl.hpp"

#include <json.hpp>

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace evdiff {

using nlohmann::json;

LoadedCorpus load_jsonl(const std::string& path, int declared_marks) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open dataset file '" + path + "'");
  LoadedCorpus corpus;
  corpus.num_marks = declared_marks;
  int max_mark = -1;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ValidationError("line " + std::to_string(line_no) + ": " + e.what());
    }
    if (!obj.contains("marks") && obj.contains("K")) {
      const int k = obj.at("K").get<int>();
      if (k < 1) throw ValidationError("line " + std::to_string(line_no) + ": K must be >= 1");
      corpus.num_marks = k;
      continue;
    }
    if (!obj.contains("marks") || !obj.contains("times"))
      throw ValidationError("line " + std::to_string(line_no) +
                            ": object needs \"marks\" and \"times\"");
    EventSequence seq;
    seq.marks = obj.at("marks").get<std::vector<int>>();
    seq.times = obj.at("times").get<std::vector<double>>();
    try {
      seq.validate(corpus.num_marks, "line " + std::to_string(line_no));
    } catch (const ValidationError&) {
      throw;
    }
    for (const int m : seq.marks) max_mark = std::max(max_mark, m);
    corpus.sequences.push_back(std::move(seq));
  }
  if (corpus.num_marks == 0) corpus.num_marks = max_mark + 1;
  return corpus;
}

void save_jsonl(const std::string& path, const std::vector<EventSequence>& sequences,
                int num_marks) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write dataset file '" + path + "'");
  out << json{{"K", num_marks}}.dump() << "\n";
  for (const auto& seq : sequences) {
    json obj;
    obj["marks"] = seq.marks;
    obj["times"] = seq.times;
    out << obj.dump() << "\n";
  }
}

std::string file_hash(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for hashing");
  std::uint64_t h = 0xCBF29CE484222325ull;
  char buf[1 << 14];
  while (in) {
    in.read(buf, sizeof(buf));
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001B3ull;
    }
  }
  char hex[17];
  std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(h));
  return std::string(hex);
}

}  // namespace evdiff
