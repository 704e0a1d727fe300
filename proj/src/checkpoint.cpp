// SPDX-License-Identifier: Apache-2.0
#include "vidistill/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace vidistill {

namespace {

constexpr char kCkptMagic[8] = {'V', 'D', 'S', 'T', 'C', 'K', 'P', 'T'};
constexpr uint8_t kCkptVersion = 1;

void write_string(std::ofstream& out, const std::string& s) {
  uint64_t len = s.size();
  out.write(reinterpret_cast<const char*>(&len), sizeof(len));
  out.write(s.data(), static_cast<std::streamsize>(len));
}

std::string read_string(std::ifstream& in) {
  uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof(len));
  std::string s(len, '\0');
  in.read(s.data(), static_cast<std::streamsize>(len));
  return s;
}

void write_tensor_map(std::ofstream& out, const std::map<std::string, Tensor>& m) {
  uint64_t count = m.size();
  out.write(reinterpret_cast<const char*>(&count), sizeof(count));
  for (const auto& [name, t] : m) {
    write_string(out, name);
    uint32_t ndim = static_cast<uint32_t>(t.ndim());
    out.write(reinterpret_cast<const char*>(&ndim), sizeof(ndim));
    for (int64_t d : t.shape()) out.write(reinterpret_cast<const char*>(&d), sizeof(d));
    out.write(reinterpret_cast<const char*>(t.data()),
              static_cast<std::streamsize>(t.numel() * sizeof(double)));
  }
}

std::map<std::string, Tensor> read_tensor_map(std::ifstream& in) {
  uint64_t count = 0;
  in.read(reinterpret_cast<char*>(&count), sizeof(count));
  std::map<std::string, Tensor> m;
  for (uint64_t i = 0; i < count; ++i) {
    std::string name = read_string(in);
    uint32_t ndim = 0;
    in.read(reinterpret_cast<char*>(&ndim), sizeof(ndim));
    std::vector<int64_t> shape(ndim);
    for (auto& d : shape) in.read(reinterpret_cast<char*>(&d), sizeof(d));
    Tensor t(shape);
    in.read(reinterpret_cast<char*>(t.data()),
            static_cast<std::streamsize>(t.numel() * sizeof(double)));
    m.emplace(std::move(name), std::move(t));
  }
  return m;
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_checkpoint: cannot open " + path);
  out.write(kCkptMagic, 8);
  out.put(static_cast<char>(kCkptVersion));
  write_string(out, ckpt.config.dump());
  out.write(reinterpret_cast<const char*>(&ckpt.step), sizeof(ckpt.step));
  write_tensor_map(out, ckpt.online);
  write_tensor_map(out, ckpt.momentum);
  write_tensor_map(out, ckpt.optimizer);
  if (!out) throw std::runtime_error("save_checkpoint: write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kCkptMagic, 8) != 0)
    throw std::runtime_error("load_checkpoint: bad magic in " + path);
  int version = in.get();
  if (version != kCkptVersion)
    throw std::runtime_error("load_checkpoint: unsupported version " + std::to_string(version));
  Checkpoint ckpt;
  ckpt.config = nlohmann::json::parse(read_string(in));
  in.read(reinterpret_cast<char*>(&ckpt.step), sizeof(ckpt.step));
  ckpt.online = read_tensor_map(in);
  ckpt.momentum = read_tensor_map(in);
  ckpt.optimizer = read_tensor_map(in);
  if (!in) throw std::runtime_error("load_checkpoint: truncated file " + path);
  return ckpt;
}

}  // namespace vidistill
