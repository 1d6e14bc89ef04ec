#include "stego/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iterator>
#include <map>
#include <numeric>
#include <sstream>

#include "stego/error.hpp"

namespace stego {

namespace {

constexpr std::uint64_t kShuffleStream = 0x6261746368657321ULL;
constexpr std::uint64_t kNoiseStream = 0x6e6f697365212121ULL;

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

template <class U>
U parse_unsigned(const std::string& key, const std::string& value) {
  U out{};
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc{} || ptr != value.data() + value.size()) {
    fail(ErrorKind::invalid_argument, "config: '" + key + "' expects a non-negative integer, got '" + value + "'");
  }
  return out;
}

double parse_double(const std::string& key, const std::string& value) {
  std::size_t used = 0;
  double out = 0.0;
  try {
    out = std::stod(value, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != value.size() || !std::isfinite(out)) {
    fail(ErrorKind::invalid_argument, "config: '" + key + "' expects a number, got '" + value + "'");
  }
  return out;
}

std::string format_double(double v) {
  std::ostringstream out;
  out << std::setprecision(17) << v;
  return out.str();
}

}  // namespace

void TrainConfig::validate() const {
  auto bad = [](const std::string& what) { fail(ErrorKind::invalid_argument, "config: " + what); };
  if (beta < 0.0) bad("beta must be >= 0");
  adam.validate();
  if (epochs < 1) bad("epochs must be >= 1");
  if (batch_size < 1) bad("batch_size must be >= 1");
  if (channels != 1 && channels != 3) bad("channels must be 1 or 3");
  if (noise_stddev < 0.0) bad("noise_stddev must be >= 0");
  if (grid_side < 1) bad("grid_side must be >= 1");
  if (image_size < 2) bad("image_size must be >= 2");
  if (image_size % grid_side != 0) {
    bad("image_size " + std::to_string(image_size) + " is not divisible by grid_side " + std::to_string(grid_side));
  }
  if (dataset_pairs < 1) bad("dataset_pairs must be >= 1");
  if (holdout_fraction < 0.0 || holdout_fraction >= 1.0) bad("holdout_fraction must lie in [0, 1)");
}

TrainConfig parse_train_config(const std::string& text) {
  TrainConfig c;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      fail(ErrorKind::invalid_argument, "config line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key == "beta") c.beta = parse_double(key, value);
    else if (key == "learning_rate") c.adam.learning_rate = parse_double(key, value);
    else if (key == "beta1") c.adam.beta1 = parse_double(key, value);
    else if (key == "beta2") c.adam.beta2 = parse_double(key, value);
    else if (key == "epsilon") c.adam.epsilon = parse_double(key, value);
    else if (key == "epochs") c.epochs = parse_unsigned<std::size_t>(key, value);
    else if (key == "batch_size") c.batch_size = parse_unsigned<std::size_t>(key, value);
    else if (key == "image_size") c.image_size = parse_unsigned<std::size_t>(key, value);
    else if (key == "channels") c.channels = parse_unsigned<std::size_t>(key, value);
    else if (key == "noise_stddev") c.noise_stddev = parse_double(key, value);
    else if (key == "grid_side") c.grid_side = parse_unsigned<std::size_t>(key, value);
    else if (key == "key_seed") c.key_seed = parse_unsigned<std::uint64_t>(key, value);
    else if (key == "key_policy") {
      if (value == "fixed") c.key_policy = KeyPolicy::fixed;
      else if (value == "per_pair") c.key_policy = KeyPolicy::per_pair;
      else fail(ErrorKind::invalid_argument, "config: key_policy must be fixed or per_pair");
    }
    else if (key == "dataset_seed") c.dataset_seed = parse_unsigned<std::uint64_t>(key, value);
    else if (key == "dataset_pairs") c.dataset_pairs = parse_unsigned<std::size_t>(key, value);
    else if (key == "dataset_kind") c.dataset_kind = parse_synth_kind(value);
    else if (key == "dataset_dir") c.dataset_dir = value;
    else if (key == "holdout_fraction") c.holdout_fraction = parse_double(key, value);
    else if (key == "rng_seed") c.rng_seed = parse_unsigned<std::uint64_t>(key, value);
    else if (key == "checkpoint_every") c.checkpoint_every = parse_unsigned<std::size_t>(key, value);
    else if (key == "checkpoint_path") c.checkpoint_path = value;
    else fail(ErrorKind::invalid_argument, "config line " + std::to_string(line_no) + ": unknown key '" + key + "'");
  }
  c.validate();
  return c;
}

TrainConfig load_train_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::invalid_argument, "cannot open config '" + path + "'");
  return parse_train_config(std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>()));
}

std::string format_train_config(const TrainConfig& c) {
  std::ostringstream out;
  out << "beta = " << format_double(c.beta) << "\n"
      << "learning_rate = " << format_double(c.adam.learning_rate) << "\n"
      << "beta1 = " << format_double(c.adam.beta1) << "\n"
      << "beta2 = " << format_double(c.adam.beta2) << "\n"
      << "epsilon = " << format_double(c.adam.epsilon) << "\n"
      << "epochs = " << c.epochs << "\n"
      << "batch_size = " << c.batch_size << "\n"
      << "image_size = " << c.image_size << "\n"
      << "channels = " << c.channels << "\n"
      << "noise_stddev = " << format_double(c.noise_stddev) << "\n"
      << "grid_side = " << c.grid_side << "\n"
      << "key_seed = " << c.key_seed << "\n"
      << "key_policy = " << (c.key_policy == KeyPolicy::fixed ? "fixed" : "per_pair") << "\n"
      << "dataset_seed = " << c.dataset_seed << "\n"
      << "dataset_pairs = " << c.dataset_pairs << "\n"
      << "dataset_kind = " << synth_kind_name(c.dataset_kind) << "\n";
  if (!c.dataset_dir.empty()) out << "dataset_dir = " << c.dataset_dir << "\n";
  out << "holdout_fraction = " << format_double(c.holdout_fraction) << "\n"
      << "rng_seed = " << c.rng_seed << "\n"
      << "checkpoint_every = " << c.checkpoint_every << "\n";
  if (!c.checkpoint_path.empty()) out << "checkpoint_path = " << c.checkpoint_path << "\n";
  return out.str();
}

// ---------------------------------------------------------------------------
// Model

StegoModel make_zero_model(std::size_t channels, double noise_stddev) {
  Network enc = build_encoder(channels);
  Network dec = build_decoder(channels, noise_stddev);
  StegoModel model;
  model.encoder = std::move(enc.graph);
  model.decoder = std::move(dec.graph);
  model.params = std::move(enc.params);
  model.params.merge(dec.params);
  return model;
}

StegoModel make_model(std::size_t channels, double noise_stddev, std::uint64_t seed) {
  StegoModel model = make_zero_model(channels, noise_stddev);
  SplitMix64 rng(seed);
  glorot_init(model.params, rng);
  return model;
}

Checkpoint to_checkpoint(const StegoModel& model) {
  Checkpoint ck;
  ck.tensors = model.params;
  for (const auto& [name, t] : model.adam.p.entries()) ck.tensors.add("adam.p." + name, t);
  for (const auto& [name, t] : model.adam.q.entries()) ck.tensors.add("adam.q." + name, t);
  ck.step = model.adam.t;
  return ck;
}

StegoModel from_checkpoint(const Checkpoint& checkpoint, double noise_stddev) {
  const Tensor* out_kernel = checkpoint.tensors.find("enc.output_C.w");
  if (out_kernel == nullptr || out_kernel->rank() != 4) {
    fail(ErrorKind::data, "checkpoint has no encoder output kernel 'enc.output_C.w'");
  }
  StegoModel model = make_zero_model(out_kernel->dim(3), noise_stddev);
  std::size_t loaded = 0;
  for (const auto& [name, t] : checkpoint.tensors.entries()) {
    if (name.starts_with("adam.p.") || name.starts_with("adam.q.")) {
      const std::string param = name.substr(7);
      const Tensor* target = model.params.find(param);
      if (target == nullptr || target->shape() != t.shape()) {
        fail(ErrorKind::data, "checkpoint optimizer tensor '" + name + "' does not match a parameter");
      }
      (name[5] == 'p' ? model.adam.p : model.adam.q).add(param, t);
      continue;
    }
    Tensor* target = model.params.find(name);
    if (target == nullptr) fail(ErrorKind::data, "checkpoint tensor '" + name + "' is not a model parameter");
    if (target->shape() != t.shape()) {
      fail(ErrorKind::data, "checkpoint tensor '" + name + "' has shape " + shape_string(t.shape()) + ", expected " +
                                shape_string(target->shape()));
    }
    *target = t;
    ++loaded;
  }
  if (loaded != model.params.tensor_count()) {
    fail(ErrorKind::data, "checkpoint holds " + std::to_string(loaded) + " of " +
                              std::to_string(model.params.tensor_count()) + " parameter tensors");
  }
  if (model.adam.p.tensor_count() != model.adam.q.tensor_count()) {
    fail(ErrorKind::data, "checkpoint optimizer state is incomplete");
  }
  model.adam.t = checkpoint.step;
  return model;
}

// ---------------------------------------------------------------------------
// Forward/backward for one pair

template <class T>
StepResult<T> joint_step(const LayerGraph& encoder, const LayerGraph& decoder, const BasicParameterSet<T>& params,
                         const BasicTensor<T>& secret, const BasicTensor<T>& cover, const LossConfig& loss, Mode mode,
                         SplitMix64* rng, BasicParameterSet<T>* grads) {
  if (secret.shape() != cover.shape()) {
    fail(ErrorKind::invalid_argument, "secret " + shape_string(secret.shape()) + " and cover " +
                                          shape_string(cover.shape()) + " must have the same shape");
  }
  BasicTape<T> tape;
  ParamBindings bindings;
  ParamBindings* bind = grads ? &bindings : nullptr;
  const Var s = tape.constant(secret);
  const Var c = tape.constant(cover);
  const Var container = run_graph(encoder, params, tape, {{"secret_in", s}, {"cover_in", c}}, mode, rng, bind);
  const Var revealed = run_graph(decoder, params, tape, {{"container_in", container}}, mode, rng, bind);
  auto jl = joint_loss(cover, tape.value(container), secret, tape.value(revealed), loss);

  StepResult<T> result;
  result.loss = jl.value;
  result.cover_mse = jl.cover_mse;
  result.secret_mse = jl.secret_mse;
  if (grads) {
    tape.seed(container, jl.grad_container);
    tape.seed(revealed, jl.grad_revealed);
    tape.backward();
    collect_grads(tape, bindings, *grads);
  }
  result.container = tape.value(container);
  result.revealed = tape.value(revealed);
  return result;
}

template StepResult<float> joint_step(const LayerGraph&, const LayerGraph&, const BasicParameterSet<float>&,
                                      const BasicTensor<float>&, const BasicTensor<float>&, const LossConfig&, Mode,
                                      SplitMix64*, BasicParameterSet<float>*);
template StepResult<double> joint_step(const LayerGraph&, const LayerGraph&, const BasicParameterSet<double>&,
                                       const BasicTensor<double>&, const BasicTensor<double>&, const LossConfig&, Mode,
                                       SplitMix64*, BasicParameterSet<double>*);

// ---------------------------------------------------------------------------
// Sender / receiver

namespace {

void check_model_channels(const ImageBuffer& image, const StegoModel& model, const char* what) {
  if (image.channels() != model.channels()) {
    fail(ErrorKind::data, std::string(what) + " has " + std::to_string(image.channels()) +
                              " channels but the model expects " + std::to_string(model.channels()));
  }
}

}  // namespace

ImageBuffer send(const ImageBuffer& secret, const ImageBuffer& cover, const PermutationKey* key,
                 const StegoModel& model) {
  if (!secret.same_shape(cover)) {
    fail(ErrorKind::data, "secret " + secret.shape_string() + " and cover " + cover.shape_string() +
                              " must have the same shape");
  }
  check_model_channels(cover, model, "cover");
  const ImageBuffer hidden = key ? encrypt(secret, *key) : secret;
  return from_tensor(forward_encoder(model.encoder, model.params, to_tensor(hidden), to_tensor(cover)));
}

Received receive(const ImageBuffer& container, const PermutationKey* key, const StegoModel& model) {
  check_model_channels(container, model, "container");
  if (key) check_divisible(container.height(), container.width(), key->grid_side);
  Received out;
  out.revealed_encrypted = from_tensor(forward_decoder(model.decoder, model.params, to_tensor(container), Mode::eval));
  out.secret = key ? decrypt(out.revealed_encrypted, *key) : out.revealed_encrypted;
  return out;
}

// ---------------------------------------------------------------------------
// Data

Dataset build_dataset(const TrainConfig& config) {
  config.validate();
  const std::size_t pairs = config.dataset_pairs;
  std::vector<ImageBuffer> images;
  if (config.dataset_dir.empty()) {
    images = synth_dataset(config.dataset_seed, 2 * pairs, config.image_size, config.dataset_kind, config.channels);
  } else {
    auto loaded = load_ppm_directory(config.dataset_dir);
    if (loaded.size() < 2 * pairs) {
      fail(ErrorKind::data, "dataset_dir holds " + std::to_string(loaded.size()) + " images, need " +
                                std::to_string(2 * pairs));
    }
    loaded.resize(2 * pairs);
    for (auto& img : loaded) {
      img = resize_nearest(img, config.image_size, config.image_size);
      if (config.channels == 1) img = to_grayscale(img);
    }
    images = std::move(loaded);
  }

  const auto held = static_cast<std::size_t>(std::floor(static_cast<double>(pairs) * config.holdout_fraction + 1e-9));
  const std::size_t train_count = pairs - std::min(held, pairs - 1);
  const PermutationKey fixed_key = derive_key(config.key_seed, config.grid_side);

  Dataset data;
  for (std::size_t i = 0; i < pairs; ++i) {
    PairData pair{images[i], images[i + pairs],
                  config.key_policy == KeyPolicy::fixed ? fixed_key : derive_key(config.key_seed + i, config.grid_side)};
    (i < train_count ? data.train : data.heldout).push_back(std::move(pair));
  }
  if (data.heldout.empty()) data.heldout = data.train;
  return data;
}

namespace {

Tensor clamp_unit(Tensor t) {
  for (float& v : t.data()) v = std::clamp(v, 0.0f, 1.0f);
  return t;
}

}  // namespace

Evaluation evaluate(const StegoModel& model, const std::vector<PairData>& pairs, bool include_float) {
  Evaluation ev;
  if (pairs.empty()) return ev;
  constexpr double kScale = 255.0 * 255.0;
  for (const PairData& p : pairs) {
    const ImageBuffer hidden = encrypt(p.secret, p.key);
    const Tensor cover = to_tensor(p.cover);
    const Tensor secret = to_tensor(hidden);
    const Tensor container = forward_encoder(model.encoder, model.params, secret, cover);
    if (include_float) {
      const Tensor container_float = clamp_unit(container);
      const Tensor revealed_float = clamp_unit(forward_decoder(model.decoder, model.params, container_float, Mode::eval));
      ev.cover_mse_float += mse_and_grad(container_float, cover).value * kScale;
      ev.secret_mse_float += mse_and_grad(revealed_float, secret).value * kScale;
    }

    const ImageBuffer container_bytes = from_tensor(container);
    const Received got = receive(container_bytes, &p.key, model);
    ev.cover_mse += mse_per_pixel(p.cover, container_bytes);
    ev.secret_mse += mse_per_pixel(p.secret, got.secret);
  }
  const double n = static_cast<double>(pairs.size());
  ev.cover_mse /= n;
  ev.secret_mse /= n;
  ev.cover_mse_float /= n;
  ev.secret_mse_float /= n;
  return ev;
}

// ---------------------------------------------------------------------------
// Training

TrainReport train(const TrainConfig& config, const TrainOptions& options) {
  config.validate();
  const auto start = std::chrono::steady_clock::now();

  TrainReport report;
  report.dataset = build_dataset(config);
  report.model = make_model(config.channels, config.noise_stddev, config.rng_seed);
  StegoModel& model = report.model;

  const auto& train_pairs = report.dataset.train;
  std::vector<Tensor> covers, secrets;
  for (const PairData& p : train_pairs) {
    covers.push_back(to_tensor(p.cover));
    secrets.push_back(to_tensor(encrypt(p.secret, p.key)));
  }

  SplitMix64 shuffle_rng(config.rng_seed ^ kShuffleStream);
  SplitMix64 noise_rng(config.rng_seed ^ kNoiseStream);
  const LossConfig loss{config.beta};
  ParameterSet grads = model.params.zeros_like();
  std::vector<std::size_t> order(train_pairs.size());

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = order.size() - 1; i > 0; --i) std::swap(order[i], order[shuffle_rng.below(i + 1)]);

    double epoch_loss = 0.0, epoch_reveal = 0.0;
    std::size_t batch_index = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size, ++batch_index) {
      const std::size_t end = std::min(order.size(), begin + config.batch_size);
      grads.set_zero();
      double batch_loss = 0.0;
      for (std::size_t k = begin; k < end; ++k) {
        const std::size_t idx = order[k];
        const auto step = joint_step(model.encoder, model.decoder, model.params, secrets[idx], covers[idx], loss,
                                     Mode::train, &noise_rng, &grads);
        batch_loss += step.loss;
        epoch_reveal += config.beta * step.secret_mse;
      }
      if (!std::isfinite(batch_loss)) {
        fail(ErrorKind::numeric, "non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                                     std::to_string(batch_index + 1));
      }
      const float inv = 1.0f / static_cast<float>(end - begin);
      for (auto& [name, g] : grads.entries()) {
        for (float& v : g.data()) v *= inv;
      }
      adam_step(model.params, grads, model.adam, config.adam);
      epoch_loss += batch_loss;
      if (options.on_batch) options.on_batch({epoch, batch_index + 1, batch_loss / double(end - begin), &grads});
    }

    const Evaluation ev = evaluate(model, report.dataset.heldout, false);
    MetricsRecord rec;
    rec.epoch = epoch;
    rec.encode_loss = epoch_loss / static_cast<double>(order.size());
    rec.reveal_loss = epoch_reveal / static_cast<double>(order.size());
    rec.cover_mse = ev.cover_mse;
    rec.secret_mse = ev.secret_mse;
    report.series.push_back(rec);
    if (options.on_epoch) options.on_epoch(rec);

    if (config.checkpoint_every > 0 && !config.checkpoint_path.empty() &&
        (epoch % config.checkpoint_every == 0 || epoch == config.epochs)) {
      save_checkpoint(config.checkpoint_path, to_checkpoint(model));
      report.checkpoint_path = config.checkpoint_path;
    }
  }
  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

std::string metrics_csv(const std::vector<MetricsRecord>& series) {
  std::ostringstream out;
  out << "epoch,encode_loss,reveal_loss,cover_mse,secret_mse\n" << std::setprecision(9);
  for (const auto& r : series) {
    out << r.epoch << ',' << r.encode_loss << ',' << r.reveal_loss << ',' << r.cover_mse << ',' << r.secret_mse << '\n';
  }
  return out.str();
}

std::vector<SweepRow> beta_sweep(const TrainConfig& base, const std::vector<double>& betas,
                                 const std::vector<std::uint64_t>& seeds) {
  if (betas.size() < 2) fail(ErrorKind::invalid_argument, "beta sweep needs at least two beta values");
  const std::vector<std::uint64_t> run_seeds = seeds.empty() ? std::vector<std::uint64_t>{base.rng_seed} : seeds;
  std::vector<SweepRow> rows;
  for (double beta : betas) {
    SweepRow row{beta, 0.0, 0.0};
    for (std::uint64_t seed : run_seeds) {
      TrainConfig cfg = base;
      cfg.beta = beta;
      cfg.rng_seed = seed;
      cfg.checkpoint_every = 0;
      const TrainReport report = train(cfg);
      row.cover_mse += report.series.back().cover_mse;
      row.secret_mse += report.series.back().secret_mse;
    }
    row.cover_mse /= static_cast<double>(run_seeds.size());
    row.secret_mse /= static_cast<double>(run_seeds.size());
    rows.push_back(row);
  }
  return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::ostringstream out;
  out << "beta,cover_mse,secret_mse\n" << std::setprecision(9);
  for (const auto& r : rows) out << r.beta << ',' << r.cover_mse << ',' << r.secret_mse << '\n';
  return out.str();
}

AttackResult residual_attack(const ImageBuffer& secret, const ImageBuffer& cover, const PermutationKey* key,
                             const StegoModel& model) {
  const ImageBuffer container = send(secret, cover, key, model);
  AttackResult out;
  out.residual = residual_enhance(cover, container);
  out.similarity = image_similarity(out.residual, to_grayscale(secret));
  return out;
}

}  // namespace stego
