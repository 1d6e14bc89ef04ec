#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "stego/params.hpp"
#include "stego/tape.hpp"

namespace stego {

// Every hidden stage is three parallel same-padded convolutions whose
// outputs are concatenated: 3x3 -> 50, 4x4 -> 10, 5x5 -> 5 (65 channels).
inline constexpr std::size_t kBranchKernels[3] = {3, 4, 5};
inline constexpr std::size_t kBranchChannels[3] = {50, 10, 5};
inline constexpr std::size_t kStageChannels = 65;
inline constexpr std::size_t kOutputKernel = 3;
inline constexpr double kDefaultNoiseStddev = 0.01;

enum class NodeKind { input, conv, concat, noise };

struct GraphNode {
  NodeKind kind = NodeKind::input;
  std::string name;
  std::vector<std::size_t> inputs;  // indices of earlier nodes
  std::size_t kernel = 0;
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;  // channel count this node produces
  bool relu = false;
  std::string weight;  // parameter names, conv only
  std::string bias;
};

/// Declarative network description. Nodes are stored in forward order.
struct LayerGraph {
  std::vector<GraphNode> nodes;
  std::vector<std::string> inputs;  // "secret_in", "cover_in" or "container_in"
  std::string output;               // "output_C" or "output_S"
  std::size_t image_channels = 3;
  double noise_stddev = 0.0;

  std::size_t index_of(const std::string& name) const;
  const GraphNode& node(const std::string& name) const { return nodes.at(index_of(name)); }

  // Throws ErrorKind::internal when the structural invariants do not hold:
  // forward-ordered acyclic references, consistent channel counts, and the
  // 3x3/4x4/5x5 -> 50/10/5 branch layout of every multi-kernel stage.
  void validate() const;
};

struct Network {
  LayerGraph graph;
  ParameterSet params;
};

// Parameters are zero-initialized; see glorot_init().
Network build_encoder(std::size_t channels);
Network build_decoder(std::size_t channels, double noise_stddev = kDefaultNoiseStddev);

// Uniform in [-sqrt(6/(fan_in+fan_out)), +...] for rank-4 weights; biases zero.
void glorot_init(ParameterSet& params, SplitMix64& rng);

// Parameter count of one three-branch stage reading `in_channels`.
std::size_t stage_parameter_count(std::size_t in_channels);

/// Bindings from parameter names to the tape leaves used in one run.
using ParamBindings = std::vector<std::pair<std::string, Var>>;

template <class T>
Var run_graph(const LayerGraph& graph, const BasicParameterSet<T>& params, BasicTape<T>& tape,
              const std::map<std::string, Var>& inputs, Mode mode, SplitMix64* rng, ParamBindings* bindings);

// Adds tape gradients of bound parameters into `grads` (same names).
template <class T>
void collect_grads(const BasicTape<T>& tape, const ParamBindings& bindings, BasicParameterSet<T>& grads);

Tensor forward_encoder(const LayerGraph& graph, const ParameterSet& params, const Tensor& secret, const Tensor& cover);
Tensor forward_decoder(const LayerGraph& graph, const ParameterSet& params, const Tensor& container, Mode mode,
                       SplitMix64* rng = nullptr);

// ---------------------------------------------------------------------------
// SGN1 checkpoint: "SGN1", u32 tensor count, per tensor {u16 name length,
// name bytes, u8 rank, u32 extents, f32 data}, trailing u64 step. All
// integers and floats little-endian.

struct Checkpoint {
  ParameterSet tensors;
  std::uint64_t step = 0;
};

void write_checkpoint(std::ostream& out, const Checkpoint& checkpoint);
Checkpoint read_checkpoint(std::istream& in);
void save_checkpoint(const std::string& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace stego
