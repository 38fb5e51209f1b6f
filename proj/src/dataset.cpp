#include "evdiff/data/dataset.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>

#include "evdiff/data/jsonl.hpp"

namespace evdiff {

using nlohmann::json;

std::string DatasetManifest::to_json() const {
  json j;
  j["name"] = name;
  j["K"] = num_marks;
  j["scale"] = scale;
  j["source_path"] = source_path;
  j["content_hash"] = content_hash;
  j["splits"] = {{"train", splits.train}, {"val", splits.val}, {"test", splits.test}};
  return j.dump(2);
}

DatasetManifest DatasetManifest::from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest '" + path + "'");
  json j;
  in >> j;
  DatasetManifest m;
  m.name = j.at("name").get<std::string>();
  m.num_marks = j.at("K").get<int>();
  m.scale = j.at("scale").get<double>();
  m.source_path = j.value("source_path", "");
  m.content_hash = j.value("content_hash", "");
  m.splits.train = j.at("splits").at("train").get<std::vector<int>>();
  m.splits.val = j.at("splits").at("val").get<std::vector<int>>();
  m.splits.test = j.at("splits").at("test").get<std::vector<int>>();
  if (m.scale <= 0.0) throw ValidationError("manifest: scale must be > 0");
  return m;
}

void DatasetManifest::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write manifest '" + path + "'");
  out << to_json() << "\n";
}

Dataset Dataset::load(const std::string& jsonl_path, const std::string& manifest_path,
                      std::uint64_t seed) {
  Dataset d;
  LoadedCorpus corpus = load_jsonl(jsonl_path);
  const bool have_manifest =
      !manifest_path.empty() && std::filesystem::exists(manifest_path);
  if (have_manifest) {
    d.manifest = DatasetManifest::from_json_file(manifest_path);
    if (d.manifest.num_marks < corpus.num_marks)
      throw ValidationError("manifest K=" + std::to_string(d.manifest.num_marks) +
                            " smaller than observed mark count " +
                            std::to_string(corpus.num_marks));
  } else {
    d.manifest.name = std::filesystem::path(jsonl_path).stem().string();
    d.manifest.num_marks = corpus.num_marks;
    d.manifest.splits =
        split_sequences(static_cast<int>(corpus.sequences.size()), seed);
  }
  d.manifest.source_path = jsonl_path;
  d.manifest.content_hash = file_hash(jsonl_path);
  d.sequences = std::move(corpus.sequences);
  const double scale = normalize_times(d.sequences);
  if (have_manifest && std::abs(scale - d.manifest.scale) > 1e-9 * d.manifest.scale)
    throw ValidationError("manifest scale does not match the data");
  d.manifest.scale = scale;
  const int n = static_cast<int>(d.sequences.size());
  for (const auto* split : {&d.manifest.splits.train, &d.manifest.splits.val,
                            &d.manifest.splits.test})
    for (const int i : *split)
      if (i < 0 || i >= n) throw ValidationError("manifest split index out of range");
  return d;
}

std::vector<PredictionWindow> windows_of_split(const Dataset& data,
                                               const std::vector<int>& indices,
                                               int history_len, int target_len,
                                               int stride) {
  std::vector<PredictionWindow> out;
  for (const int i : indices) {
    auto w = make_windows(data.sequences[i], history_len, target_len, stride);
    out.insert(out.end(), std::make_move_iterator(w.begin()),
               std::make_move_iterator(w.end()));
  }
  return out;
}

}  // namespace evdiff
