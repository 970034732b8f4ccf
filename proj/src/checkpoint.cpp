#include "ncl/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "ncl/errors.hpp"

namespace ncl {

namespace {

constexpr char kMagic[4] = {'N', 'C', 'L', 'F'};

void write_bytes(std::ostream& out, const void* p, std::size_t n) {
  out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

void read_bytes(std::istream& in, void* p, std::size_t n) {
  in.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in.gcount()) != n)
    throw CheckpointError("checkpoint truncated: unexpected end of data");
}

void write_u8(std::ostream& out, std::uint8_t v) { write_bytes(out, &v, 1); }

void write_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  write_bytes(out, b, 4);
}

void write_i64(std::ostream& out, std::int64_t v) {
  auto u = static_cast<std::uint64_t>(v);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(u >> (8 * i));
  write_bytes(out, b, 8);
}

void write_f64(std::ostream& out, double v) {
  std::uint64_t u;
  std::memcpy(&u, &v, 8);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(u >> (8 * i));
  write_bytes(out, b, 8);
}

std::uint8_t read_u8(std::istream& in) {
  std::uint8_t v;
  read_bytes(in, &v, 1);
  return v;
}

std::uint32_t read_u32(std::istream& in) {
  unsigned char b[4];
  read_bytes(in, b, 4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

std::int64_t read_i64(std::istream& in) {
  unsigned char b[8];
  read_bytes(in, b, 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return static_cast<std::int64_t>(v);
}

double read_f64(std::istream& in) {
  unsigned char b[8];
  read_bytes(in, b, 8);
  std::uint64_t u = 0;
  for (int i = 0; i < 8; ++i) u |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  double v;
  std::memcpy(&v, &u, 8);
  return v;
}

void write_matrix(std::ostream& out, const Matrix& m) {
  for (Index r = 0; r < m.rows(); ++r)
    for (Index c = 0; c < m.cols(); ++c) write_f64(out, m(r, c));
}

void read_matrix(std::istream& in, Matrix& m) {
  for (Index r = 0; r < m.rows(); ++r)
    for (Index c = 0; c < m.cols(); ++c) m(r, c) = read_f64(in);
}

void write_vector(std::ostream& out, const Vector& v) {
  for (Index i = 0; i < v.size(); ++i) write_f64(out, v(i));
}

void read_vector(std::istream& in, Vector& v) {
  for (Index i = 0; i < v.size(); ++i) v(i) = read_f64(in);
}

void write_header(std::ostream& out, std::uint8_t kind) {
  write_bytes(out, kMagic, 4);
  write_u32(out, kCheckpointVersion);
  write_u8(out, kind);
}

std::uint8_t read_header(std::istream& in) {
  char magic[4];
  read_bytes(in, magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0)
    throw CheckpointError("not a checkpoint file (bad magic)");
  const std::uint32_t version = read_u32(in);
  if (version != kCheckpointVersion)
    throw CheckpointError("checkpoint version mismatch: expected " +
                          std::to_string(kCheckpointVersion) + ", found " +
                          std::to_string(version));
  return read_u8(in);
}

void write_network_block(std::ostream& out, const Network& net, const OptimState* optim) {
  write_u32(out, static_cast<std::uint32_t>(net.layers.size()));
  for (const LayerSpec& l : net.layers) {
    write_u32(out, l.kind == LayerKind::dense ? 0u : 1u);
    write_u32(out, static_cast<std::uint32_t>(l.in_dim));
    write_u32(out, static_cast<std::uint32_t>(l.out_dim));
    std::uint32_t act = 2;
    if (l.activation == Activation::relu) act = 0;
    if (l.activation == Activation::tanh) act = 1;
    write_u32(out, act);
  }
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    if (net.layers[i].kind != LayerKind::dense) continue;
    write_matrix(out, net.weights[i]);
    write_vector(out, net.biases[i]);
  }
  write_u8(out, optim != nullptr ? 1 : 0);
  if (optim != nullptr) {
    write_i64(out, optim->step);
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
      if (net.layers[i].kind != LayerKind::dense) continue;
      write_matrix(out, optim->weight_velocity[i]);
      write_vector(out, optim->bias_velocity[i]);
    }
  }
}

LoadedNetwork read_network_block(std::istream& in) {
  const std::uint32_t layer_count = read_u32(in);
  LoadedNetwork loaded;
  Network& net = loaded.net;
  net.layers.resize(layer_count);
  net.weights.resize(layer_count);
  net.biases.resize(layer_count);
  for (std::uint32_t i = 0; i < layer_count; ++i) {
    LayerSpec& l = net.layers[i];
    const std::uint32_t kind = read_u32(in);
    if (kind > 1) throw CheckpointError("corrupt checkpoint: unknown layer kind");
    l.kind = kind == 0 ? LayerKind::dense : LayerKind::activation;
    l.in_dim = static_cast<Index>(read_u32(in));
    l.out_dim = static_cast<Index>(read_u32(in));
    const std::uint32_t act = read_u32(in);
    if (act > 2) throw CheckpointError("corrupt checkpoint: unknown activation");
    l.activation = act == 0 ? Activation::relu : act == 1 ? Activation::tanh : Activation::identity;
  }
  for (std::uint32_t i = 0; i < layer_count; ++i) {
    if (net.layers[i].kind != LayerKind::dense) continue;
    net.weights[i].resize(net.layers[i].in_dim, net.layers[i].out_dim);
    read_matrix(in, net.weights[i]);
    net.biases[i].resize(net.layers[i].out_dim);
    read_vector(in, net.biases[i]);
  }
  if (read_u8(in) == 1) {
    OptimState state = make_optim_state(net);
    state.step = read_i64(in);
    for (std::uint32_t i = 0; i < layer_count; ++i) {
      if (net.layers[i].kind != LayerKind::dense) continue;
      read_matrix(in, state.weight_velocity[i]);
      read_vector(in, state.bias_velocity[i]);
    }
    loaded.optim = std::move(state);
  }
  return loaded;
}

}  // namespace

void save_network(std::ostream& out, const Network& net, const OptimState* optim) {
  write_header(out, 0);
  write_network_block(out, net, optim);
}

LoadedNetwork load_network(std::istream& in) {
  if (read_header(in) != 0)
    throw CheckpointError("checkpoint holds an ensemble, expected a single network");
  return read_network_block(in);
}

void save_ensemble(std::ostream& out, const NclEnsemble& model) {
  write_header(out, 1);
  write_u32(out, static_cast<std::uint32_t>(model.heads.size()));
  write_f64(out, model.lambda);
  write_u32(out, static_cast<std::uint32_t>(model.output_dim()));
  const bool weighted = model.aggregator.mode == Aggregator::Mode::weighted;
  write_u8(out, weighted ? 1 : 0);
  if (weighted) write_vector(out, model.aggregator.weights);
  write_network_block(out, model.trunk, nullptr);
  for (const Network& head : model.heads) write_network_block(out, head, nullptr);
}

NclEnsemble load_ensemble(std::istream& in) {
  if (read_header(in) != 1)
    throw CheckpointError("checkpoint holds a single network, expected an ensemble");
  NclEnsemble model;
  const std::uint32_t k = read_u32(in);
  model.lambda = read_f64(in);
  (void)read_u32(in);  // output_dim, recoverable from the heads
  if (read_u8(in) == 1) {
    Vector w(static_cast<Index>(k));
    read_vector(in, w);
    model.aggregator = Aggregator::weighted(std::move(w));
  }
  model.trunk = read_network_block(in).net;
  model.heads.reserve(k);
  for (std::uint32_t i = 0; i < k; ++i) model.heads.push_back(read_network_block(in).net);
  return model;
}

namespace {

template <typename SaveFn>
void save_to_file(const std::string& path, SaveFn&& fn) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot open checkpoint for writing: " + path);
  fn(out);
  out.flush();
  if (!out) throw CheckpointError("write failure on checkpoint: " + path);
}

std::ifstream open_for_read(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint: " + path);
  return in;
}

}  // namespace

void save_network_file(const std::string& path, const Network& net, const OptimState* optim) {
  save_to_file(path, [&](std::ostream& out) { save_network(out, net, optim); });
}

LoadedNetwork load_network_file(const std::string& path) {
  std::ifstream in = open_for_read(path);
  return load_network(in);
}

void save_ensemble_file(const std::string& path, const NclEnsemble& model) {
  save_to_file(path, [&](std::ostream& out) { save_ensemble(out, model); });
}

NclEnsemble load_ensemble_file(const std::string& path) {
  std::ifstream in = open_for_read(path);
  return load_ensemble(in);
}

}  // namespace ncl
