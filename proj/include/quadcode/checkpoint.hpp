#pragma once

// Binary checkpoint layout (all integers little-endian):
//
//   "QCNN"  u32 version
//   u64 n   n bytes of canonical JSON {model, encoding, quad_map_digest, training}
//   u64 p   then for each of p parameters: u64 count, count x f64
//   u64 b   u64 len   b x len x i32 probe inputs   b x 4 x f64 expected logits
//   32 bytes SHA-256 of everything above
//
// Loading rebuilds the model, checks the digest, and replays the probe batch;
// the logits must match bit for bit.

#include <bit>
#include <cstdint>
#include <cstring>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "quadcode/digest.hpp"
#include "quadcode/error.hpp"
#include "quadcode/models.hpp"
#include "quadcode/text_encoding.hpp"

namespace quadcode {

inline constexpr std::string_view kCheckpointMagic = "QCNN";
inline constexpr std::uint32_t kCheckpointVersion = 1;
inline constexpr std::size_t kProbeBatch = 4;

enum class CheckpointErrorKind { kFormatVersionMismatch, kDigestMismatch, kConfigInvalid };
using CheckpointError = KindedError<CheckpointErrorKind>;

struct Checkpoint {
  TextEncoder encoder;
  std::unique_ptr<Classifier> model;
  std::string quad_map_digest;
  nlohmann::ordered_json training = nlohmann::ordered_json::object();
};

namespace detail {

class ByteWriter {
 public:
  void u32(std::uint32_t v) { put(v, 4); }
  void u64(std::uint64_t v) { put(v, 8); }
  void i32(std::int32_t v) { put(static_cast<std::uint32_t>(v), 4); }
  void f64(double v) { put(std::bit_cast<std::uint64_t>(v), 8); }
  void bytes(std::string_view s) { out_.append(s); }
  const std::string& str() const noexcept { return out_; }

 private:
  void put(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  std::string out_;
};

class ByteReader {
 public:
  ByteReader(std::string_view data, std::string path) : data_(data), path_(std::move(path)) {}

  std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
  std::uint64_t u64() { return get(8); }
  std::int32_t i32() { return static_cast<std::int32_t>(static_cast<std::uint32_t>(get(4))); }
  double f64() { return std::bit_cast<double>(get(8)); }

  std::string_view bytes(std::uint64_t n) {
    need(n);
    auto s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  // Element count for an array of `width`-byte items; rejects counts that
  // cannot fit in the remaining bytes.
  std::uint64_t count(std::uint64_t width) {
    const std::uint64_t n = u64();
    if (width != 0 && n > (data_.size() - pos_) / width) truncated();
    return n;
  }

  std::size_t position() const noexcept { return pos_; }

 private:
  std::uint64_t get(int n) {
    need(static_cast<std::uint64_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
    }
    pos_ += static_cast<std::size_t>(n);
    return v;
  }
  void need(std::uint64_t n) {
    if (n > data_.size() - pos_) truncated();
  }
  [[noreturn]] void truncated() const { throw IoError(path_ + ": checkpoint is truncated"); }

  std::string_view data_;
  std::string path_;
  std::size_t pos_ = 0;
};

// Deterministic probe inputs drawn from the model's index range.
inline std::vector<std::vector<std::int32_t>> probe_inputs(const Classifier& model,
                                                           std::size_t symbols) {
  const Rng rng(0x51434e4e);  // fixed
  std::vector<std::vector<std::int32_t>> inputs(kProbeBatch);
  for (std::size_t b = 0; b < kProbeBatch; ++b) {
    Rng r = rng.split(b);
    inputs[b].resize(model.input_length());
    for (auto& v : inputs[b]) v = static_cast<std::int32_t>(r.below(symbols));
  }
  return inputs;
}

inline std::size_t symbol_count(const nlohmann::json& config) {
  return config.at(config.at("kind") == "word" ? "vocab_size" : "alphabet_size").get<std::size_t>();
}

}  // namespace detail

inline std::string serialize_checkpoint(const Checkpoint& ckpt) {
  const Classifier& model = *ckpt.model;
  nlohmann::ordered_json header;
  header["model"] = model.config_json();
  header["encoding"] = ckpt.encoder.to_json();
  header["quad_map_digest"] = ckpt.quad_map_digest;
  header["training"] = ckpt.training;
  const std::string json = header.dump(-1, ' ', false, nlohmann::json::error_handler_t::strict);

  detail::ByteWriter w;
  w.bytes(kCheckpointMagic);
  w.u32(kCheckpointVersion);
  w.u64(json.size());
  w.bytes(json);
  w.u64(model.parameters().size());
  for (const auto& p : model.parameters()) {
    w.u64(p.value.size());
    for (double v : p.value.values()) w.f64(v);
  }
  const auto probes = detail::probe_inputs(model, detail::symbol_count(header["model"]));
  w.u64(probes.size());
  w.u64(model.input_length());
  for (const auto& in : probes) {
    for (auto v : in) w.i32(v);
  }
  for (const auto& in : probes) {
    const nn::Tensor logits = model.logits(in);
    for (double v : logits.values()) w.f64(v);
  }
  std::string out = w.str();
  const Sha256 digest = sha256(out);
  out.append(reinterpret_cast<const char*>(digest.data()), digest.size());
  return out;
}

inline void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  write_file(path, serialize_checkpoint(ckpt));
}

// `expected_kind`, when given, must match the stored model kind.
inline Checkpoint parse_checkpoint(std::string_view data, const std::string& path,
                                   std::optional<InputKind> expected_kind = std::nullopt) {
  if (data.size() < kCheckpointMagic.size() + 4 ||
      data.substr(0, kCheckpointMagic.size()) != kCheckpointMagic) {
    throw CheckpointError(CheckpointErrorKind::kFormatVersionMismatch,
                          path + ": not a checkpoint (bad magic)");
  }
  detail::ByteReader r(data, path);
  r.bytes(kCheckpointMagic.size());
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw CheckpointError(CheckpointErrorKind::kFormatVersionMismatch,
                          path + ": checkpoint format version " + std::to_string(version) +
                              ", expected " + std::to_string(kCheckpointVersion));
  }
  const std::string_view json = r.bytes(r.count(1));
  std::vector<std::vector<double>> blobs(r.count(8));
  for (auto& blob : blobs) {
    blob.resize(r.count(8));
    for (double& v : blob) v = r.f64();
  }
  const std::uint64_t probe_count = r.count(4);
  const std::uint64_t probe_len = r.u64();
  if (probe_len == 0 || probe_count > (data.size() - r.position()) / (4 * probe_len)) {
    throw IoError(path + ": checkpoint is truncated");
  }
  std::vector<std::vector<std::int32_t>> probes(probe_count, std::vector<std::int32_t>(probe_len));
  for (auto& in : probes) {
    for (auto& v : in) v = r.i32();
  }
  std::vector<double> expected(probe_count * kNumClasses);
  for (double& v : expected) v = r.f64();
  const std::size_t body = r.position();
  const std::string_view stored = r.bytes(32);
  if (r.position() != data.size()) {
    throw CheckpointError(CheckpointErrorKind::kDigestMismatch, path + ": trailing bytes after digest");
  }
  const Sha256 digest = sha256(data.substr(0, body));
  if (std::memcmp(digest.data(), stored.data(), digest.size()) != 0) {
    throw CheckpointError(CheckpointErrorKind::kDigestMismatch, path + ": integrity digest mismatch");
  }

  Checkpoint ckpt;
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(json);
    const InputKind kind = parse_input_kind(header.at("model").at("kind").get<std::string>());
    if (expected_kind && *expected_kind != kind) {
      throw CheckpointError(CheckpointErrorKind::kConfigInvalid,
                            path + ": checkpoint holds a " + std::string(to_string(kind)) +
                                " model, expected " + std::string(to_string(*expected_kind)));
    }
    ckpt.encoder = TextEncoder::from_json(header.at("encoding"));
    ckpt.model = build_model(header.at("model"), 0);
    ckpt.quad_map_digest = header.at("quad_map_digest").get<std::string>();
    ckpt.training = header.at("training");
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(CheckpointErrorKind::kConfigInvalid, path + ": bad config block: " + e.what());
  } catch (const ModelError& e) {
    throw CheckpointError(CheckpointErrorKind::kConfigInvalid, path + ": " + e.what());
  }
  if (ckpt.encoder.kind != ckpt.model->kind() ||
      ckpt.encoder.symbol_count() != detail::symbol_count(header.at("model")) ||
      ckpt.encoder.seq_len != ckpt.model->input_length()) {
    throw CheckpointError(CheckpointErrorKind::kConfigInvalid,
                          path + ": encoding does not match model config");
  }

  auto& params = ckpt.model->parameters();
  if (params.size() != blobs.size()) {
    throw CheckpointError(CheckpointErrorKind::kConfigInvalid, path + ": parameter count mismatch");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].value.size() != blobs[i].size()) {
      throw CheckpointError(CheckpointErrorKind::kConfigInvalid,
                            path + ": size mismatch for parameter " + params[i].name);
    }
    params[i].value = nn::Tensor(params[i].value.shape(), std::move(blobs[i]));
  }

  if (probe_len != ckpt.model->input_length()) {
    throw CheckpointError(CheckpointErrorKind::kConfigInvalid, path + ": probe length mismatch");
  }
  for (std::size_t b = 0; b < probes.size(); ++b) {
    const nn::Tensor logits = ckpt.model->logits(probes[b]);
    for (std::size_t c = 0; c < kNumClasses; ++c) {
      if (std::bit_cast<std::uint64_t>(logits[c]) !=
          std::bit_cast<std::uint64_t>(expected[b * kNumClasses + c])) {
        throw CheckpointError(CheckpointErrorKind::kDigestMismatch,
                              path + ": probe batch logits differ after loading");
      }
    }
  }
  return ckpt;
}

inline Checkpoint load_checkpoint(const std::string& path,
                                  std::optional<InputKind> expected_kind = std::nullopt) {
  return parse_checkpoint(read_file(path), path, expected_kind);
}

}  // namespace quadcode
