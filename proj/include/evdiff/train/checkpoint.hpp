#pragma once

#include <json.hpp>

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "evdiff/core/params.hpp"
#include "evdiff/train/optimizer.hpp"

namespace evdiff {

// Checkpoint = JSON manifest (<prefix>.json) + raw tensor blob
// (<prefix>.bin). The blob holds little-endian IEEE scalars keyed by
// parameter name and shape; optimizer moments ride along under "opt.m." /
// "opt.v." prefixes so training can resume exactly.

namespace ckpt_detail {

template <typename Scalar>
constexpr std::uint8_t dtype_code() {
  return sizeof(Scalar) == 4 ? 4 : 8;
}

inline void write_u32(std::ostream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), 4);
}

inline std::uint32_t read_u32(std::istream& in) {
  std::uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), 4);
  return v;
}

template <typename Scalar>
void write_tensor(std::ostream& out, const std::string& name,
                  const std::vector<int>& shape, const VecX<Scalar>& data) {
  write_u32(out, static_cast<std::uint32_t>(name.size()));
  out.write(name.data(), static_cast<std::streamsize>(name.size()));
  const std::uint8_t dt = dtype_code<Scalar>();
  out.write(reinterpret_cast<const char*>(&dt), 1);
  write_u32(out, static_cast<std::uint32_t>(shape.size()));
  for (const int d : shape) write_u32(out, static_cast<std::uint32_t>(d));
  out.write(reinterpret_cast<const char*>(data.data()),
            static_cast<std::streamsize>(sizeof(Scalar) * data.size()));
}

}  // namespace ckpt_detail

template <typename Scalar>
void save_checkpoint(const std::string& prefix, const ParameterStore<Scalar>& store,
                     AdamW<Scalar>* opt, nlohmann::json manifest) {
  std::ofstream bin(prefix + ".bin", std::ios::binary);
  if (!bin) throw IoError("cannot write checkpoint blob '" + prefix + ".bin'");
  bin.write("EVDF", 4);
  ckpt_detail::write_u32(bin, 1);  // format version
  std::uint32_t count = static_cast<std::uint32_t>(store.size());
  if (opt) count += 2 * static_cast<std::uint32_t>(opt->first_moments().size());
  ckpt_detail::write_u32(bin, count);
  for (const auto& [name, p] : store)
    ckpt_detail::write_tensor(bin, name, p.value.shape, p.value.data);
  if (opt) {
    for (const auto& [name, m] : opt->first_moments())
      ckpt_detail::write_tensor(bin, "opt.m." + name,
                                {static_cast<int>(m.size())}, m);
    for (const auto& [name, v] : opt->second_moments())
      ckpt_detail::write_tensor(bin, "opt.v." + name,
                                {static_cast<int>(v.size())}, v);
  }
  manifest["format"] = "evdiff-checkpoint";
  manifest["version"] = 1;
  manifest["precision"] = sizeof(Scalar) == 4 ? "single" : "double";
  manifest["opt_step"] = opt ? opt->step_count() : 0;
  std::ofstream js(prefix + ".json");
  if (!js) throw IoError("cannot write checkpoint manifest '" + prefix + ".json'");
  js << manifest.dump(2) << "\n";
}

/// Loads tensors into an already-shaped store (shapes must match exactly;
/// mismatches raise an error naming the tensor). Returns the manifest.
template <typename Scalar>
nlohmann::json load_checkpoint(const std::string& prefix, ParameterStore<Scalar>& store,
                               AdamW<Scalar>* opt) {
  std::ifstream js(prefix + ".json");
  if (!js) throw IoError("cannot open checkpoint manifest '" + prefix + ".json'");
  nlohmann::json manifest;
  js >> manifest;

  std::ifstream bin(prefix + ".bin", std::ios::binary);
  if (!bin) throw IoError("cannot open checkpoint blob '" + prefix + ".bin'");
  char magic[4];
  bin.read(magic, 4);
  if (std::memcmp(magic, "EVDF", 4) != 0)
    throw ValidationError("checkpoint blob has wrong magic");
  if (ckpt_detail::read_u32(bin) != 1)
    throw ValidationError("unsupported checkpoint version");
  const std::uint32_t count = ckpt_detail::read_u32(bin);
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t name_len = ckpt_detail::read_u32(bin);
    std::string name(name_len, '\0');
    bin.read(name.data(), name_len);
    std::uint8_t dt = 0;
    bin.read(reinterpret_cast<char*>(&dt), 1);
    if (dt != ckpt_detail::dtype_code<Scalar>())
      throw ValidationError("checkpoint tensor '" + name +
                            "' has a different precision than the run config");
    const std::uint32_t ndim = ckpt_detail::read_u32(bin);
    std::vector<int> shape(ndim);
    std::int64_t numel = 1;
    for (auto& d : shape) {
      d = static_cast<int>(ckpt_detail::read_u32(bin));
      numel *= d;
    }
    VecX<Scalar> data(numel);
    bin.read(reinterpret_cast<char*>(data.data()),
             static_cast<std::streamsize>(sizeof(Scalar) * numel));
    if (!bin) throw ValidationError("checkpoint blob truncated at tensor '" + name + "'");

    if (name.starts_with("opt.m.") || name.starts_with("opt.v.")) {
      if (!opt) continue;
      const std::string pname = name.substr(6);
      auto& slot = name[4] == 'm' ? opt->first_moments() : opt->second_moments();
      auto it = slot.find(pname);
      if (it == slot.end())
        throw ValidationError("checkpoint optimizer state for unknown parameter '" +
                              pname + "'");
      if (it->second.size() != data.size())
        throw ValidationError("checkpoint optimizer state shape mismatch for '" +
                              pname + "'");
      it->second = data;
      continue;
    }
    if (!store.has(name))
      throw ValidationError("checkpoint tensor '" + name +
                            "' does not exist in the configured model");
    auto& p = store.at(name);
    if (p.shape != shape)
      throw ValidationError("checkpoint tensor '" + name + "' shape mismatch");
    p.data = data;
  }
  if (opt) opt->set_step_count(manifest.value("opt_step", 0));
  return manifest;
}

}  // namespace evdiff
