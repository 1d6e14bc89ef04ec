#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "stego/cipher.hpp"
#include "stego/imaging.hpp"
#include "stego/net.hpp"
#include "stego/optim.hpp"

namespace stego {

enum class KeyPolicy { fixed, per_pair };

/// Everything a training run depends on. Two runs with equal configs
/// produce bit-identical checkpoints and metric series.
struct TrainConfig {
  double beta = 1.0;
  AdamConfig adam;
  std::size_t epochs = 1;
  std::size_t batch_size = 8;
  std::size_t image_size = 32;
  std::size_t channels = 3;
  double noise_stddev = kDefaultNoiseStddev;

  std::size_t grid_side = 4;
  std::uint64_t key_seed = 42;
  KeyPolicy key_policy = KeyPolicy::fixed;

  std::uint64_t dataset_seed = 1;
  std::size_t dataset_pairs = 16;  // cover/secret pairs, training plus held-out
  SynthKind dataset_kind = SynthKind::mixed;
  std::string dataset_dir;  // when set, PPMs from here replace the synthetic set
  double holdout_fraction = 0.2;

  std::uint64_t rng_seed = 7;  // weight init, batch order and noise
  std::size_t checkpoint_every = 0;  // epochs; 0 disables periodic checkpoints
  std::string checkpoint_path;

  void validate() const;
};

// Flat "key = value" lines; '#' starts a comment. Unknown keys are rejected.
TrainConfig parse_train_config(const std::string& text);
TrainConfig load_train_config(const std::string& path);
std::string format_train_config(const TrainConfig& config);

/// Encoder and decoder sharing one parameter registry ("enc." / "dec."
/// prefixes) so a single Adam step covers both.
struct StegoModel {
  LayerGraph encoder;
  LayerGraph decoder;
  ParameterSet params;
  AdamState adam;

  std::size_t channels() const { return encoder.image_channels; }
  std::size_t encoder_parameter_count() const { return params.count_with_prefix("enc."); }
  std::size_t decoder_parameter_count() const { return params.count_with_prefix("dec."); }
};

// Glorot-initialised model.
StegoModel make_model(std::size_t channels, double noise_stddev, std::uint64_t seed);
// Zero parameters, no optimizer state.
StegoModel make_zero_model(std::size_t channels, double noise_stddev = kDefaultNoiseStddev);

Checkpoint to_checkpoint(const StegoModel& model);
// Channels are inferred from the stored output_C kernel; noise stddev is not
// stored (it only matters while training).
StegoModel from_checkpoint(const Checkpoint& checkpoint, double noise_stddev = kDefaultNoiseStddev);

template <class T>
struct StepResult {
  double loss = 0.0;
  double cover_mse = 0.0;
  double secret_mse = 0.0;
  BasicTensor<T> container;
  BasicTensor<T> revealed;
};

/// One pair through encoder and decoder on a fresh tape. The decoder reads
/// the float container, so both loss terms reach the encoder. When `grads`
/// is non-null the parameter gradients are added into it.
template <class T>
StepResult<T> joint_step(const LayerGraph& encoder, const LayerGraph& decoder, const BasicParameterSet<T>& params,
                         const BasicTensor<T>& secret, const BasicTensor<T>& cover, const LossConfig& loss, Mode mode,
                         SplitMix64* rng, BasicParameterSet<T>* grads);

// Sender block: container = quantize(encoder(encrypt(secret), cover)).
// A null key skips the cipher.
ImageBuffer send(const ImageBuffer& secret, const ImageBuffer& cover, const PermutationKey* key,
                 const StegoModel& model);

struct Received {
  ImageBuffer revealed_encrypted;
  ImageBuffer secret;
};

// Receiver block: eval-mode decoder on the byte container, then decrypt.
Received receive(const ImageBuffer& container, const PermutationKey* key, const StegoModel& model);

struct MetricsRecord {
  std::size_t epoch = 0;
  double encode_loss = 0.0;  // mean joint loss over the epoch's training pairs
  double reveal_loss = 0.0;  // mean beta * MSE(secret, revealed) over the same
  double cover_mse = 0.0;    // held-out, byte images, 0..255^2 scale
  double secret_mse = 0.0;
};

struct PairData {
  ImageBuffer cover;
  ImageBuffer secret;
  PermutationKey key;
};

struct Dataset {
  std::vector<PairData> train;
  std::vector<PairData> heldout;
};

// Synthetic (or directory) images resized to image_size, paired as
// (cover i, secret i + pairs). The last holdout_fraction of pairs is held out;
// when that leaves nothing, evaluation reuses the training pairs.
Dataset build_dataset(const TrainConfig& config);

struct Evaluation {
  double cover_mse = 0.0;   // byte images
  double secret_mse = 0.0;
  double cover_mse_float = 0.0;  // clamped but unrounded outputs, same scale; zero unless requested
  double secret_mse_float = 0.0;
};

Evaluation evaluate(const StegoModel& model, const std::vector<PairData>& pairs, bool include_float = true);

struct BatchEvent {
  std::size_t epoch = 0;
  std::size_t batch = 0;
  double loss = 0.0;
  const ParameterSet* grads = nullptr;  // batch-mean gradients
};

struct TrainOptions {
  std::function<void(const BatchEvent&)> on_batch;
  std::function<void(const MetricsRecord&)> on_epoch;
};

struct TrainReport {
  std::vector<MetricsRecord> series;
  StegoModel model;
  Dataset dataset;
  std::string checkpoint_path;  // last checkpoint written, if any
  double seconds = 0.0;
};

// Throws ErrorKind::numeric on a non-finite loss, naming epoch and batch.
TrainReport train(const TrainConfig& config, const TrainOptions& options = {});

std::string metrics_csv(const std::vector<MetricsRecord>& series);

struct SweepRow {
  double beta = 0.0;
  double cover_mse = 0.0;
  double secret_mse = 0.0;
};

// Trains one model per (beta, seed) with everything else equal and reports
// held-out MSE averaged over the seeds. Empty `seeds` means {base.rng_seed}.
std::vector<SweepRow> beta_sweep(const TrainConfig& base, const std::vector<double>& betas,
                                 const std::vector<std::uint64_t>& seeds = {});

std::string sweep_csv(const std::vector<SweepRow>& rows);

struct AttackResult {
  ImageBuffer residual;  // enhanced |cover - container|, grayscale
  double similarity = 0.0;  // Pearson r against the grayscale secret
};

// Residual attack: an adversary holding the original cover enhances the
// difference to the container and compares it with the secret.
AttackResult residual_attack(const ImageBuffer& secret, const ImageBuffer& cover, const PermutationKey* key,
                             const StegoModel& model);

}  // namespace stego
