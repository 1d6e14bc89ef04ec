#include "stego/net.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

namespace stego {

std::size_t LayerGraph::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (nodes[i].name == name) return i;
  }
  fail(ErrorKind::invalid_argument, "graph has no node '" + name + "'");
}

void LayerGraph::validate() const {
  auto bad = [](const std::string& what) { fail(ErrorKind::internal, "invalid layer graph: " + what); };
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const GraphNode& n = nodes[i];
    std::size_t in_total = 0;
    for (std::size_t ref : n.inputs) {
      if (ref >= i) bad("node '" + n.name + "' references a later node");
      in_total += nodes[ref].out_channels;
    }
    switch (n.kind) {
      case NodeKind::input:
        if (!n.inputs.empty()) bad("input '" + n.name + "' has predecessors");
        break;
      case NodeKind::conv:
        if (n.inputs.size() != 1 || in_total != n.in_channels) bad("conv '" + n.name + "' channel mismatch");
        break;
      case NodeKind::concat:
        if (n.inputs.empty() || in_total != n.out_channels) bad("concat '" + n.name + "' channel mismatch");
        break;
      case NodeKind::noise:
        if (n.inputs.size() != 1 || in_total != n.out_channels) bad("noise '" + n.name + "' channel mismatch");
        break;
    }
  }
  // Multi-kernel stages: concat nodes whose inputs are all convolutions.
  for (const GraphNode& n : nodes) {
    if (n.kind != NodeKind::concat) continue;
    const bool all_conv = std::all_of(n.inputs.begin(), n.inputs.end(),
                                      [&](std::size_t r) { return nodes[r].kind == NodeKind::conv; });
    if (!all_conv) continue;
    if (n.inputs.size() != 3) bad("stage '" + n.name + "' does not have three branches");
    for (std::size_t b = 0; b < 3; ++b) {
      const GraphNode& branch = nodes[n.inputs[b]];
      if (branch.kernel != kBranchKernels[b] || branch.out_channels != kBranchChannels[b] || !branch.relu) {
        bad("stage '" + n.name + "' branch '" + branch.name + "' is not " + std::to_string(kBranchKernels[b]) + "x" +
            std::to_string(kBranchKernels[b]) + " -> " + std::to_string(kBranchChannels[b]));
      }
    }
  }
  for (const std::string& in : inputs) {
    if (node(in).kind != NodeKind::input) bad("'" + in + "' is not an input node");
  }
  if (nodes.empty() || nodes.back().name != output) bad("output '" + output + "' is not the last node");
}

std::size_t stage_parameter_count(std::size_t in_channels) {
  std::size_t total = 0;
  for (std::size_t b = 0; b < 3; ++b) {
    total += kBranchKernels[b] * kBranchKernels[b] * in_channels * kBranchChannels[b] + kBranchChannels[b];
  }
  return total;
}

namespace {

class GraphBuilder {
 public:
  GraphBuilder(Network& net, std::string prefix) : net_(net), prefix_(std::move(prefix)) {}

  std::size_t input(const std::string& name, std::size_t channels) {
    GraphNode n;
    n.kind = NodeKind::input;
    n.name = name;
    n.out_channels = channels;
    net_.graph.inputs.push_back(name);
    return push(std::move(n));
  }

  std::size_t conv(const std::string& name, std::size_t from, std::size_t kernel, std::size_t out, bool relu) {
    GraphNode n;
    n.kind = NodeKind::conv;
    n.name = name;
    n.inputs = {from};
    n.kernel = kernel;
    n.in_channels = net_.graph.nodes[from].out_channels;
    n.out_channels = out;
    n.relu = relu;
    n.weight = prefix_ + name + ".w";
    n.bias = prefix_ + name + ".b";
    net_.params.add(n.weight, Tensor({kernel, kernel, n.in_channels, out}));
    net_.params.add(n.bias, Tensor({out}));
    return push(std::move(n));
  }

  std::size_t concat(const std::string& name, std::vector<std::size_t> parts) {
    GraphNode n;
    n.kind = NodeKind::concat;
    n.name = name;
    for (std::size_t p : parts) n.out_channels += net_.graph.nodes[p].out_channels;
    n.inputs = std::move(parts);
    return push(std::move(n));
  }

  std::size_t noise(const std::string& name, std::size_t from) {
    GraphNode n;
    n.kind = NodeKind::noise;
    n.name = name;
    n.inputs = {from};
    n.out_channels = net_.graph.nodes[from].out_channels;
    return push(std::move(n));
  }

  // Three parallel branches plus their concat; returns the concat node.
  std::size_t stage(const std::string& name, std::size_t from) {
    std::vector<std::size_t> branches;
    for (std::size_t b = 0; b < 3; ++b) {
      const std::string k = std::to_string(kBranchKernels[b]);
      branches.push_back(conv(name + "_" + k + "x" + k, from, kBranchKernels[b], kBranchChannels[b], true));
    }
    return concat(name + "_concat", std::move(branches));
  }

 private:
  std::size_t push(GraphNode n) {
    net_.graph.nodes.push_back(std::move(n));
    return net_.graph.nodes.size() - 1;
  }

  Network& net_;
  std::string prefix_;
};

}  // namespace

Network build_encoder(std::size_t channels) {
  if (channels == 0) fail(ErrorKind::invalid_argument, "encoder needs at least one image channel");
  Network net;
  net.graph.image_channels = channels;
  GraphBuilder b(net, "enc.");
  const std::size_t secret = b.input("secret_in", channels);
  const std::size_t cover = b.input("cover_in", channels);
  std::size_t x = b.stage("conv_prep0", secret);
  x = b.stage("conv_prep1", x);
  x = b.concat("cover_join", {cover, x});
  for (int i = 0; i < 5; ++i) x = b.stage("conv_hid" + std::to_string(i), x);
  b.conv("output_C", x, kOutputKernel, channels, false);
  net.graph.output = "output_C";
  net.graph.validate();
  return net;
}

Network build_decoder(std::size_t channels, double noise_stddev) {
  if (channels == 0) fail(ErrorKind::invalid_argument, "decoder needs at least one image channel");
  if (noise_stddev < 0.0) fail(ErrorKind::invalid_argument, "noise stddev must be >= 0");
  Network net;
  net.graph.image_channels = channels;
  net.graph.noise_stddev = noise_stddev;
  GraphBuilder b(net, "dec.");
  std::size_t x = b.input("container_in", channels);
  x = b.noise("output_C_noise", x);
  for (int i = 0; i < 5; ++i) x = b.stage("conv_rev" + std::to_string(i), x);
  b.conv("output_S", x, kOutputKernel, channels, false);
  net.graph.output = "output_S";
  net.graph.validate();
  return net;
}

void glorot_init(ParameterSet& params, SplitMix64& rng) {
  for (auto& [name, t] : params.entries()) {
    if (t.rank() != 4) {
      t.fill(0.0f);
      continue;
    }
    const double receptive = static_cast<double>(t.dim(0) * t.dim(1));
    const double limit = std::sqrt(6.0 / (receptive * static_cast<double>(t.dim(2) + t.dim(3))));
    for (float& v : t.data()) v = static_cast<float>(rng.uniform(-limit, limit));
  }
}

template <class T>
Var run_graph(const LayerGraph& graph, const BasicParameterSet<T>& params, BasicTape<T>& tape,
              const std::map<std::string, Var>& inputs, Mode mode, SplitMix64* rng, ParamBindings* bindings) {
  // Concats of ReLU convolutions over one shared input run as a single fused
  // op; relu(concat(a, b)) == concat(relu(a), relu(b)).
  std::vector<bool> fused(graph.nodes.size(), false);
  std::vector<bool> fused_stage(graph.nodes.size(), false);
  std::vector<std::size_t> consumers(graph.nodes.size(), 0);
  for (const GraphNode& n : graph.nodes) {
    for (std::size_t r : n.inputs) ++consumers[r];
  }
  for (std::size_t i = 0; i < graph.nodes.size(); ++i) {
    const GraphNode& n = graph.nodes[i];
    if (n.kind != NodeKind::concat || n.inputs.size() < 2) continue;
    const std::size_t from = graph.nodes[n.inputs[0]].inputs.empty() ? 0 : graph.nodes[n.inputs[0]].inputs[0];
    const bool fusable = std::all_of(n.inputs.begin(), n.inputs.end(), [&](std::size_t r) {
      const GraphNode& b = graph.nodes[r];
      return b.kind == NodeKind::conv && b.relu && b.inputs[0] == from && consumers[r] == 1;
    });
    if (!fusable) continue;
    fused_stage[i] = true;
    for (std::size_t r : n.inputs) fused[r] = true;
  }
  auto bind = [&](const GraphNode& n) {
    const Var w = tape.parameter(params.at(n.weight));
    const Var b = tape.parameter(params.at(n.bias));
    if (bindings) {
      bindings->emplace_back(n.weight, w);
      bindings->emplace_back(n.bias, b);
    }
    return std::pair{w, b};
  };

  std::vector<Var> vars(graph.nodes.size());
  for (std::size_t i = 0; i < graph.nodes.size(); ++i) {
    const GraphNode& n = graph.nodes[i];
    if (fused[i]) continue;
    if (fused_stage[i]) {
      std::vector<Var> w, b;
      for (std::size_t r : n.inputs) {
        const auto [wv, bv] = bind(graph.nodes[r]);
        w.push_back(wv);
        b.push_back(bv);
      }
      vars[i] = tape.relu(tape.conv2d_multi(vars[graph.nodes[n.inputs[0]].inputs[0]], w, b));
      continue;
    }
    switch (n.kind) {
      case NodeKind::input: {
        auto it = inputs.find(n.name);
        if (it == inputs.end()) fail(ErrorKind::invalid_argument, "missing graph input '" + n.name + "'");
        const auto& shape = tape.value(it->second).shape();
        if (shape.size() != 3 || shape[2] != n.out_channels) {
          fail(ErrorKind::invalid_argument, "input '" + n.name + "' has shape " + shape_string(shape) + ", expected [H,W," +
                                                std::to_string(n.out_channels) + "]");
        }
        vars[i] = it->second;
        break;
      }
      case NodeKind::conv: {
        const auto [w, b] = bind(n);
        vars[i] = tape.conv2d(vars[n.inputs[0]], w, b);
        if (n.relu) vars[i] = tape.relu(vars[i]);
        break;
      }
      case NodeKind::concat: {
        std::vector<Var> parts;
        for (std::size_t r : n.inputs) parts.push_back(vars[r]);
        vars[i] = tape.concat(parts);
        break;
      }
      case NodeKind::noise: {
        if (mode == Mode::train && graph.noise_stddev > 0.0 && rng == nullptr) {
          fail(ErrorKind::invalid_argument, "train-mode noise needs a generator");
        }
        SplitMix64 unused(0);
        vars[i] = tape.gaussian_noise(vars[n.inputs[0]], graph.noise_stddev, mode, rng ? *rng : unused);
        break;
      }
    }
  }
  return vars.back();
}

template <class T>
void collect_grads(const BasicTape<T>& tape, const ParamBindings& bindings, BasicParameterSet<T>& grads) {
  for (const auto& [name, var] : bindings) {
    if (const auto* g = tape.grad(var)) grads.at(name).add(*g);
  }
}

template Var run_graph(const LayerGraph&, const BasicParameterSet<float>&, BasicTape<float>&,
                       const std::map<std::string, Var>&, Mode, SplitMix64*, ParamBindings*);
template Var run_graph(const LayerGraph&, const BasicParameterSet<double>&, BasicTape<double>&,
                       const std::map<std::string, Var>&, Mode, SplitMix64*, ParamBindings*);
template void collect_grads(const BasicTape<float>&, const ParamBindings&, BasicParameterSet<float>&);
template void collect_grads(const BasicTape<double>&, const ParamBindings&, BasicParameterSet<double>&);

Tensor forward_encoder(const LayerGraph& graph, const ParameterSet& params, const Tensor& secret, const Tensor& cover) {
  if (secret.shape() != cover.shape()) {
    fail(ErrorKind::invalid_argument, "secret " + shape_string(secret.shape()) + " and cover " +
                                          shape_string(cover.shape()) + " must have the same shape");
  }
  Tape tape;
  const std::map<std::string, Var> inputs{{"secret_in", tape.constant(secret)}, {"cover_in", tape.constant(cover)}};
  const Var out = run_graph(graph, params, tape, inputs, Mode::eval, nullptr, nullptr);
  return tape.value(out);
}

Tensor forward_decoder(const LayerGraph& graph, const ParameterSet& params, const Tensor& container, Mode mode,
                       SplitMix64* rng) {
  Tape tape;
  const std::map<std::string, Var> inputs{{"container_in", tape.constant(container)}};
  const Var out = run_graph(graph, params, tape, inputs, mode, rng, nullptr);
  return tape.value(out);
}

// ---------------------------------------------------------------------------
// Checkpoint I/O

namespace {

template <class U>
void put_le(std::ostream& out, U value) {
  std::array<char, sizeof(U)> bytes{};
  for (std::size_t i = 0; i < sizeof(U); ++i) bytes[i] = static_cast<char>((value >> (8 * i)) & 0xFF);
  out.write(bytes.data(), bytes.size());
}

template <class U>
U get_le(std::istream& in, const char* what) {
  std::array<unsigned char, sizeof(U)> bytes{};
  if (!in.read(reinterpret_cast<char*>(bytes.data()), bytes.size())) {
    fail(ErrorKind::data, std::string("checkpoint truncated while reading ") + what);
  }
  U value = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) value |= static_cast<U>(bytes[i]) << (8 * i);
  return value;
}

}  // namespace

void write_checkpoint(std::ostream& out, const Checkpoint& checkpoint) {
  out.write("SGN1", 4);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(checkpoint.tensors.tensor_count()));
  for (const auto& [name, t] : checkpoint.tensors.entries()) {
    if (name.size() > 0xFFFF) fail(ErrorKind::invalid_argument, "tensor name too long: " + name);
    if (t.rank() > 0xFF) fail(ErrorKind::invalid_argument, "tensor rank too large: " + name);
    put_le<std::uint16_t>(out, static_cast<std::uint16_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_le<std::uint8_t>(out, static_cast<std::uint8_t>(t.rank()));
    for (std::size_t d : t.shape()) put_le<std::uint32_t>(out, static_cast<std::uint32_t>(d));
    for (float v : t.data()) put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(v));
  }
  put_le<std::uint64_t>(out, checkpoint.step);
  if (!out) fail(ErrorKind::invalid_argument, "failed writing checkpoint");
}

Checkpoint read_checkpoint(std::istream& in) {
  char magic[4] = {};
  if (!in.read(magic, 4) || std::memcmp(magic, "SGN1", 4) != 0) {
    fail(ErrorKind::data, "not an SGN1 checkpoint (bad magic)");
  }
  Checkpoint ck;
  const auto count = get_le<std::uint32_t>(in, "tensor count");
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto len = get_le<std::uint16_t>(in, "name length");
    std::string name(len, '\0');
    if (!in.read(name.data(), len)) fail(ErrorKind::data, "checkpoint truncated in tensor name");
    const auto rank = get_le<std::uint8_t>(in, "rank");
    Shape shape;
    for (std::uint8_t d = 0; d < rank; ++d) shape.push_back(get_le<std::uint32_t>(in, "extent"));
    std::vector<float> values(shape_size(shape));
    for (float& v : values) v = std::bit_cast<float>(get_le<std::uint32_t>(in, "tensor data"));
    ck.tensors.add(std::move(name), Tensor(std::move(shape), std::move(values)));
  }
  ck.step = get_le<std::uint64_t>(in, "step counter");
  if (in.peek() != std::char_traits<char>::eof()) fail(ErrorKind::data, "trailing bytes after checkpoint");
  return ck;
}

void save_checkpoint(const std::string& path, const Checkpoint& checkpoint) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::invalid_argument, "cannot open '" + path + "' for writing");
  write_checkpoint(out, checkpoint);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::invalid_argument, "cannot open checkpoint '" + path + "'");
  return read_checkpoint(in);
}

}  // namespace stego
