#include "tartan/checkpoint.hpp"

#include <cmath>
#include <vector>

#include "binary.hpp"
#include "tartan/error.hpp"
#include "tartan/io.hpp"
#include "tartan/rng.hpp"

namespace tartan {

namespace {

constexpr std::string_view kMagic = "TARTCKPT";

void put_f32(detail::ByteWriter& w, double v) {
  const float f = static_cast<float>(v);
  if (std::isfinite(v) && static_cast<double>(f) != v) {
    throw numeric_error("precision_loss", "parameter value is not float-representable");
  }
  w.f32(f);
}

void put_tensor(detail::ByteWriter& w, const std::vector<double>& vs) {
  for (double v : vs) put_f32(w, v);
}

std::vector<double> get_tensor(detail::ByteReader& r, std::size_t n) {
  std::vector<double> out(n);
  for (auto& v : out) v = static_cast<double>(r.f32());
  return out;
}

void put_table(detail::ByteWriter& w, const EmbeddingTable& table) {
  w.u64(table.seed());
  w.f64(table.scale());
  std::vector<std::uint32_t> rows;
  std::vector<double> init(table.dim());
  for (const auto r : table.materialized_rows()) {
    table.initial_row(r, init);
    if (*table.materialized(r) != init) rows.push_back(r);
  }
  w.u32(static_cast<std::uint32_t>(rows.size()));
  for (const auto r : rows) {
    w.u32(r);
    put_tensor(w, *table.materialized(r));
  }
}

EmbeddingTable get_table(detail::ByteReader& r, std::uint32_t num_rows, std::uint32_t dim) {
  const std::uint64_t seed = r.u64();
  const double scale = r.f64();
  EmbeddingTable table(num_rows, dim, seed, scale);
  const std::uint32_t count = r.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t row = r.u32();
    if (row >= num_rows) throw data_error("bad_checkpoint", "row id out of range");
    auto dst = table.mutable_row(row);
    for (auto& v : dst) v = static_cast<double>(r.f32());
  }
  return table;
}

std::string finish(detail::ByteWriter& w) {
  const std::uint64_t sum = fnv1a64(w.bytes());
  w.u64(sum);
  return w.take();
}

void header(detail::ByteWriter& w, ModelKind kind) {
  w.raw(kMagic);
  w.u32(kCheckpointVersion);
  w.u8(static_cast<std::uint8_t>(kind));
}

// Validates the envelope and returns a reader positioned after the kind tag.
detail::ByteReader open(std::string_view bytes, ModelKind expected) {
  detail::ByteReader r(bytes, "checkpoint");
  if (bytes.size() < kMagic.size() || bytes.substr(0, kMagic.size()) != kMagic) {
    throw data_error("bad_magic", "not a checkpoint");
  }
  r.raw(kMagic.size());
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw data_error("unknown_version", "checkpoint version " + std::to_string(version));
  }
  if (bytes.size() < r.position() + 1 + 8) throw data_error("truncated_file", "checkpoint");
  const auto body = bytes.substr(0, bytes.size() - 8);
  detail::ByteReader tail(bytes.substr(bytes.size() - 8), "checkpoint");
  if (fnv1a64(body) != tail.u64()) throw data_error("bad_checksum", "checkpoint");
  const std::uint8_t kind = r.u8();
  if (kind > 1) throw data_error("bad_checkpoint", "unknown model kind");
  if (static_cast<ModelKind>(kind) != expected) {
    throw data_error("kind_mismatch", "expected " + std::string(to_string(expected)) +
                                          " checkpoint, found " +
                                          std::string(to_string(static_cast<ModelKind>(kind))));
  }
  return detail::ByteReader(body, "checkpoint");
}

void skip_header(detail::ByteReader& r) { r.raw(kMagic.size() + 4 + 1); }

void expect_end(const detail::ByteReader& r) {
  if (r.remaining() != 0) throw data_error("trailing_bytes", "checkpoint");
}

}  // namespace

std::string_view to_string(ModelKind kind) { return kind == ModelKind::dual ? "dual" : "cross"; }

std::string serialize_checkpoint(const DualParams& p) {
  detail::ByteWriter w;
  header(w, ModelKind::dual);
  w.u32(p.num_buckets);
  w.u32(p.dim);
  w.u32(0);
  w.f64(p.temperature);
  put_table(w, p.table);
  put_tensor(w, p.empty_row);
  put_tensor(w, p.projection);
  return finish(w);
}

std::string serialize_checkpoint(const CrossParams& p) {
  detail::ByteWriter w;
  header(w, ModelKind::cross);
  w.u32(p.num_buckets);
  w.u32(p.dim);
  w.u32(p.hidden_dim);
  w.f64(0.0);
  put_table(w, p.table);
  put_tensor(w, p.hidden);
  put_tensor(w, p.hidden_bias);
  put_tensor(w, p.output);
  put_f32(w, p.output_bias);
  return finish(w);
}

ModelKind checkpoint_kind(std::string_view bytes) {
  detail::ByteReader r(bytes, "checkpoint");
  if (bytes.size() < kMagic.size() || bytes.substr(0, kMagic.size()) != kMagic) {
    throw data_error("bad_magic", "not a checkpoint");
  }
  r.raw(kMagic.size());
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw data_error("unknown_version", "checkpoint version " + std::to_string(version));
  }
  const std::uint8_t kind = r.u8();
  if (kind > 1) throw data_error("bad_checkpoint", "unknown model kind");
  return static_cast<ModelKind>(kind);
}

DualParams deserialize_dual(std::string_view bytes) {
  auto r = open(bytes, ModelKind::dual);
  skip_header(r);
  DualParams p;
  p.num_buckets = r.u32();
  p.dim = r.u32();
  r.u32();
  p.temperature = r.f64();
  p.table = get_table(r, p.num_buckets, p.dim);
  p.empty_row = get_tensor(r, p.dim);
  p.projection = get_tensor(r, static_cast<std::size_t>(p.dim) * p.dim);
  expect_end(r);
  return p;
}

CrossParams deserialize_cross(std::string_view bytes) {
  auto r = open(bytes, ModelKind::cross);
  skip_header(r);
  CrossParams p;
  p.num_buckets = r.u32();
  p.dim = r.u32();
  p.hidden_dim = r.u32();
  r.f64();
  p.table = get_table(r, p.num_buckets, p.dim);
  p.hidden = get_tensor(r, static_cast<std::size_t>(p.dim) * p.hidden_dim);
  p.hidden_bias = get_tensor(r, p.hidden_dim);
  p.output = get_tensor(r, p.hidden_dim);
  p.output_bias = static_cast<double>(r.f32());
  expect_end(r);
  return p;
}

void save_checkpoint(const std::filesystem::path& path, const DualParams& params) {
  write_file(path, serialize_checkpoint(params));
}

void save_checkpoint(const std::filesystem::path& path, const CrossParams& params) {
  write_file(path, serialize_checkpoint(params));
}

DualParams load_dual_checkpoint(const std::filesystem::path& path) {
  return deserialize_dual(read_file(path));
}

CrossParams load_cross_checkpoint(const std::filesystem::path& path) {
  return deserialize_cross(read_file(path));
}

}  // namespace tartan
