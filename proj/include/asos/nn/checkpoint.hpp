#pragma once

#include <cstring>
#include <map>
#include <string>
#include <vector>

#include "asos/io/binary.hpp"
#include "asos/nn/model.hpp"

namespace asos::nn {

// Checkpoint layout: magic, format version, config as JSON, then named f32
// tensors (trainable params followed by running stats), all little endian.

inline constexpr char kCkptMagic[8] = {'A', 'S', 'O', 'S',
                                       'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCkptVersion = 1;

namespace detail {

inline void append_tensor(std::string& out, const std::string& name,
                          const Tensorf& t) {
  io::write_le<std::uint64_t>(out, name.size());
  out.append(name);
  io::write_le<std::uint64_t>(out, t.rank());
  for (std::size_t i = 0; i < t.rank(); ++i)
    io::write_le<std::uint64_t>(out, t.dim(i));
  const std::size_t bytes = t.size() * sizeof(float);
  const std::size_t at = out.size();
  out.resize(at + bytes);
  std::memcpy(out.data() + at, t.data(), bytes);
}

}  // namespace detail

inline void save_checkpoint(const std::string& path, Model& model) {
  std::string out;
  out.append(kCkptMagic, sizeof(kCkptMagic));
  io::write_le<std::uint32_t>(out, kCkptVersion);
  const std::string cfg = model.config.to_json().dump();
  io::write_le<std::uint64_t>(out, cfg.size());
  out.append(cfg);

  std::vector<std::pair<std::string, const Tensorf*>> tensors;
  model.visit_params([&](const std::string& n, Param<float>& p) {
    tensors.emplace_back(n, &p.value);
  });
  model.visit_buffers([&](const std::string& n, Tensorf& t) {
    tensors.emplace_back(n, &t);
  });
  io::write_le<std::uint64_t>(out, tensors.size());
  for (const auto& [name, t] : tensors) detail::append_tensor(out, name, *t);
  io::write_file_atomic(path, out);
}

inline Model load_checkpoint(const std::string& path) {
  const std::string buf = io::read_file_string(path);
  std::size_t pos = 0;
  auto need = [&](std::size_t n) {
    if (pos + n > buf.size())
      throw DataError("checkpoint truncated: " + path);
  };
  need(sizeof(kCkptMagic));
  if (std::memcmp(buf.data(), kCkptMagic, sizeof(kCkptMagic)) != 0)
    throw DataError("not a model checkpoint: " + path);
  pos += sizeof(kCkptMagic);
  const auto version = io::read_le<std::uint32_t>(buf, pos);
  if (version != kCkptVersion)
    throw DataError("unsupported checkpoint version " +
                    std::to_string(version));
  const auto cfg_len = io::read_le<std::uint64_t>(buf, pos);
  need(cfg_len);
  ModelConfig cfg;
  try {
    cfg = ModelConfig::from_json(
        nlohmann::json::parse(buf.substr(pos, cfg_len)));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("bad checkpoint config: ") + e.what());
  }
  pos += cfg_len;

  std::map<std::string, Tensorf> tensors;
  const auto n_tensors = io::read_le<std::uint64_t>(buf, pos);
  for (std::uint64_t i = 0; i < n_tensors; ++i) {
    const auto name_len = io::read_le<std::uint64_t>(buf, pos);
    need(name_len);
    const std::string name = buf.substr(pos, name_len);
    pos += name_len;
    const auto rank = io::read_le<std::uint64_t>(buf, pos);
    std::vector<std::size_t> shape(rank);
    for (auto& d : shape) d = io::read_le<std::uint64_t>(buf, pos);
    Tensorf t(shape);
    need(t.size() * sizeof(float));
    std::memcpy(t.data(), buf.data() + pos, t.size() * sizeof(float));
    pos += t.size() * sizeof(float);
    tensors.emplace(name, std::move(t));
  }

  Model model(cfg);
  auto take = [&](const std::string& n, Tensorf& dst) {
    auto it = tensors.find(n);
    if (it == tensors.end())
      throw DataError("checkpoint missing tensor " + n);
    if (it->second.size() != dst.size())
      throw DataError("checkpoint tensor " + n + " has wrong size");
    dst = std::move(it->second);
    tensors.erase(it);
  };
  model.visit_params([&](const std::string& n, Param<float>& p) {
    auto shape = p.value.shape();
    take(n, p.value);
    p.value.reshape(shape);
  });
  model.visit_buffers([&](const std::string& n, Tensorf& t) { take(n, t); });
  if (!tensors.empty())
    throw DataError("checkpoint has unknown tensor " + tensors.begin()->first);
  return model;
}

}  // namespace asos::nn
