#pragma once

#include <iosfwd>
#include <optional>
#include <string>

#include "ncl/ensemble.hpp"
#include "ncl/net.hpp"
#include "ncl/optim.hpp"

namespace ncl {

/// Binary checkpoint format (all integers and floats little-endian):
///
///   magic   "NCLF" (4 bytes)
///   version u32, currently 1
///   kind    u8: 0 = single network, 1 = ensemble
///
/// network block:
///   layer_count u32
///   per layer: kind u32 (0 dense, 1 activation), in_dim u32, out_dim u32,
///              activation u32 (0 relu, 1 tanh, 2 identity)
///   per dense layer, in order: W as f64 row-major (in_dim x out_dim),
///                              then b as f64 (out_dim)
///   has_optim u8; if 1: step i64, then velocity buffers in the same
///                 layout as the parameters
///
/// ensemble payload:
///   K u32, lambda f64, output_dim u32,
///   agg_mode u8 (0 uniform, 1 weighted), K x f64 weights if weighted,
///   trunk network block, then K head network blocks
///
/// Doubles are stored bit-exactly, so save/load round-trips parameters
/// byte-identically. Loading rejects bad magic, truncated files, and any
/// version other than the writer's, naming expected and found versions.
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_network(std::ostream& out, const Network& net, const OptimState* optim = nullptr);

struct LoadedNetwork {
  Network net;
  std::optional<OptimState> optim;
};

LoadedNetwork load_network(std::istream& in);

void save_network_file(const std::string& path, const Network& net,
                       const OptimState* optim = nullptr);
LoadedNetwork load_network_file(const std::string& path);

void save_ensemble(std::ostream& out, const NclEnsemble& model);
NclEnsemble load_ensemble(std::istream& in);

void save_ensemble_file(const std::string& path, const NclEnsemble& model);
NclEnsemble load_ensemble_file(const std::string& path);

}  // namespace ncl
