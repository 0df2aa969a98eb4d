// Copyright 2026 The ANP Authors
// SPDX-License-Identifier: Apache-2.0

#include "anp/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace anp {

namespace {

constexpr char kMagic[4] = {'A', 'N', 'P', 'C'};

class Writer {
 public:
  void u32(std::uint32_t v) { le(v, 4); }
  void u64(std::uint64_t v) { le(v, 8); }
  void f64(double v) { le(std::bit_cast<std::uint64_t>(v), 8); }
  void text(const std::string& s) {
    u64(s.size());
    out.insert(out.end(), s.begin(), s.end());
  }
  void tensors(const ParamStore& store) {
    u64(store.size());
    for (const auto& [name, t] : store) {
      text(name);
      u32(static_cast<std::uint32_t>(t.rank()));
      for (std::size_t d : t.shape()) u64(d);
      for (double v : t.values()) f64(v);
    }
  }

  std::vector<std::uint8_t> out;

 private:
  void le(std::uint64_t v, int bytes) {
    for (int i = 0; i < bytes; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
};

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& bytes) : in_(bytes) {}

  std::uint32_t u32() { return static_cast<std::uint32_t>(le(4, "u32")); }
  std::uint64_t u64() { return le(8, "u64"); }
  double f64() { return std::bit_cast<double>(le(8, "f64")); }
  std::string text(const char* what) {
    const std::uint64_t n = u64();
    need(n, what);
    std::string s(in_.begin() + static_cast<std::ptrdiff_t>(pos_),
                  in_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
    pos_ += n;
    return s;
  }
  ParamStore tensors() {
    ParamStore store;
    const std::uint64_t count = u64();
    for (std::uint64_t i = 0; i < count; ++i) {
      std::string name = text("tensor name");
      const std::uint32_t rank = u32();
      if (rank > 2) throw CheckpointError("checkpoint: tensor '" + name + "' has unsupported rank " + std::to_string(rank));
      Shape shape(rank);
      for (auto& d : shape) d = u64();
      const std::size_t numel = shape_numel(shape);
      need(numel * 8, "tensor values");
      Tensor t(shape);
      for (double& v : t.values()) v = f64();
      store.emplace(std::move(name), std::move(t));
    }
    return store;
  }
  void magic() {
    need(4, "magic");
    if (std::memcmp(in_.data(), kMagic, 4) != 0) throw CheckpointError("checkpoint: bad magic (expected \"ANPC\")");
    pos_ = 4;
  }
  bool at_end() const { return pos_ == in_.size(); }

 private:
  void need(std::uint64_t n, const char* what) {
    if (n > in_.size() - pos_) {
      throw CheckpointError(std::string("checkpoint: truncated while reading ") + what + " at byte offset " +
                            std::to_string(pos_));
    }
  }
  std::uint64_t le(int bytes, const char* what) {
    need(static_cast<std::uint64_t>(bytes), what);
    std::uint64_t v = 0;
    for (int i = 0; i < bytes; ++i) v |= std::uint64_t{in_[pos_ + i]} << (8 * i);
    pos_ += static_cast<std::size_t>(bytes);
    return v;
  }

  const std::vector<std::uint8_t>& in_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& c) {
  Writer w;
  w.out.insert(w.out.end(), kMagic, kMagic + 4);
  w.u32(kCheckpointVersion);
  w.text(c.config_text);
  w.tensors(c.params);
  w.u64(c.adam_step);
  w.f64(c.adam_beta1);
  w.f64(c.adam_beta2);
  w.f64(c.adam_epsilon);
  w.tensors(c.adam_m);
  w.tensors(c.adam_v);
  w.u64(c.iteration);
  w.text(c.rng_state);
  return std::move(w.out);
}

Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
  Reader r(bytes);
  r.magic();
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw CheckpointError("checkpoint: unsupported version " + std::to_string(version) + " (expected " +
                          std::to_string(kCheckpointVersion) + ")");
  }
  Checkpoint c;
  c.config_text = r.text("config");
  c.params = r.tensors();
  c.adam_step = r.u64();
  c.adam_beta1 = r.f64();
  c.adam_beta2 = r.f64();
  c.adam_epsilon = r.f64();
  c.adam_m = r.tensors();
  c.adam_v = r.tensors();
  c.iteration = r.u64();
  c.rng_state = r.text("rng state");
  if (!r.at_end()) throw CheckpointError("checkpoint: trailing bytes after rng state");
  return c;
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  const auto bytes = encode_checkpoint(ckpt);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("checkpoint: cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw CheckpointError("checkpoint: write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("checkpoint: cannot open " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

}  // namespace anp
