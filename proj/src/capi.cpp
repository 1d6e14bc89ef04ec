#include "stego/stego.h"

#include <cstring>
#include <exception>
#include <fstream>
#include <memory>
#include <new>
#include <string>

#include "stego/cipher.hpp"
#include "stego/error.hpp"
#include "stego/imaging.hpp"
#include "stego/pipeline.hpp"

struct stego_image {
  stego::ImageBuffer value;
};

struct stego_key {
  stego::PermutationKey value;
};

struct stego_model {
  stego::StegoModel value;
};

namespace {

thread_local std::string g_last_error;

stego_status status_for(stego::ErrorKind kind) {
  switch (kind) {
    case stego::ErrorKind::invalid_argument:
      return STEGO_USAGE;
    case stego::ErrorKind::data:
      return STEGO_DATA;
    case stego::ErrorKind::numeric:
      return STEGO_NUMERIC;
    case stego::ErrorKind::internal:
      return STEGO_INTERNAL;
  }
  return STEGO_INTERNAL;
}

template <class F>
stego_status guarded(F&& body) {
  try {
    g_last_error.clear();
    body();
    return STEGO_OK;
  } catch (const stego::Error& e) {
    g_last_error = e.what();
    return status_for(e.kind());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
  } catch (const std::exception& e) {
    g_last_error = e.what();
  } catch (...) {
    g_last_error = "unknown error";
  }
  return STEGO_INTERNAL;
}

void require(const void* p, const char* what) {
  if (p == nullptr) stego::fail(stego::ErrorKind::invalid_argument, std::string(what) + " must not be null");
}

stego_image* wrap(stego::ImageBuffer image) { return new stego_image{std::move(image)}; }

void write_text(const char* path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) stego::fail(stego::ErrorKind::invalid_argument, std::string("cannot open '") + path + "' for writing");
  out << text;
  if (!out.flush()) stego::fail(stego::ErrorKind::invalid_argument, std::string("failed writing '") + path + "'");
}

stego_epoch_metrics to_c(const stego::MetricsRecord& r) {
  return {r.epoch, r.encode_loss, r.reveal_loss, r.cover_mse, r.secret_mse};
}

}  // namespace

extern "C" {

const char* stego_last_error(void) { return g_last_error.c_str(); }

const char* stego_version(void) { return "1.0.0"; }

stego_status stego_image_create(size_t height, size_t width, size_t channels, const uint8_t* pixels,
                                stego_image** out) {
  return guarded([&] {
    require(out, "out");
    if (pixels == nullptr) {
      *out = wrap(stego::ImageBuffer(height, width, channels));
    } else {
      *out = wrap(stego::ImageBuffer(height, width, channels,
                                     std::vector<uint8_t>(pixels, pixels + height * width * channels)));
    }
  });
}

stego_status stego_image_read_ppm(const char* path, stego_image** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = wrap(stego::load_ppm(path));
  });
}

stego_status stego_image_write_ppm(const stego_image* image, const char* path) {
  return guarded([&] {
    require(image, "image");
    require(path, "path");
    stego::save_ppm(path, image->value);
  });
}

void stego_image_free(stego_image* image) { delete image; }

void stego_image_dims(const stego_image* image, size_t* height, size_t* width, size_t* channels) {
  if (image == nullptr) return;
  if (height) *height = image->value.height();
  if (width) *width = image->value.width();
  if (channels) *channels = image->value.channels();
}

const uint8_t* stego_image_pixels(const stego_image* image) {
  return image ? image->value.pixels().data() : nullptr;
}

stego_status stego_image_resize(const stego_image* image, size_t height, size_t width, stego_image** out) {
  return guarded([&] {
    require(image, "image");
    require(out, "out");
    *out = wrap(stego::resize_nearest(image->value, height, width));
  });
}

stego_status stego_image_grayscale(const stego_image* image, stego_image** out) {
  return guarded([&] {
    require(image, "image");
    require(out, "out");
    *out = wrap(stego::to_grayscale(image->value));
  });
}

stego_status stego_image_histogram(const stego_image* image, uint64_t* counts, size_t capacity) {
  return guarded([&] {
    require(image, "image");
    require(counts, "counts");
    const auto h = stego::histogram(image->value);
    if (capacity < h.bins.size() * 256) {
      stego::fail(stego::ErrorKind::invalid_argument,
                  "histogram needs room for " + std::to_string(h.bins.size() * 256) + " counts");
    }
    for (std::size_t c = 0; c < h.bins.size(); ++c) std::memcpy(counts + c * 256, h.bins[c].data(), 256 * sizeof(uint64_t));
  });
}

stego_status stego_image_error_histogram(const stego_image* a, const stego_image* b, uint64_t counts[256]) {
  return guarded([&] {
    require(a, "a");
    require(b, "b");
    require(counts, "counts");
    const auto h = stego::error_histogram(a->value, b->value);
    std::memcpy(counts, h.data(), 256 * sizeof(uint64_t));
  });
}

stego_status stego_image_mse(const stego_image* a, const stego_image* b, double* out) {
  return guarded([&] {
    require(a, "a");
    require(b, "b");
    require(out, "out");
    *out = stego::mse_per_pixel(a->value, b->value);
  });
}

stego_status stego_image_similarity(const stego_image* a, const stego_image* b, double* out) {
  return guarded([&] {
    require(a, "a");
    require(b, "b");
    require(out, "out");
    *out = stego::image_similarity(a->value, b->value);
  });
}

stego_status stego_image_adjacent_correlation(const stego_image* image, double* per_channel, size_t capacity,
                                              double* mean_abs) {
  return guarded([&] {
    require(image, "image");
    if (per_channel != nullptr) {
      const auto corr = stego::adjacent_correlation(image->value);
      if (capacity < 2 * corr.size()) {
        stego::fail(stego::ErrorKind::invalid_argument,
                    "correlation needs room for " + std::to_string(2 * corr.size()) + " values");
      }
      for (std::size_t c = 0; c < corr.size(); ++c) {
        per_channel[2 * c] = corr[c].horizontal;
        per_channel[2 * c + 1] = corr[c].vertical;
      }
    }
    if (mean_abs != nullptr) *mean_abs = stego::mean_abs_adjacent_correlation(image->value);
  });
}

stego_status stego_image_residual(const stego_image* cover, const stego_image* container, stego_image** out) {
  return guarded([&] {
    require(cover, "cover");
    require(container, "container");
    require(out, "out");
    *out = wrap(stego::residual_enhance(cover->value, container->value));
  });
}

stego_status stego_image_synthesize(uint64_t seed, size_t index, size_t size, const char* kind, size_t channels,
                                    stego_image** out) {
  return guarded([&] {
    require(kind, "kind");
    require(out, "out");
    *out = wrap(stego::synth_image(seed, index, size, stego::parse_synth_kind(kind), channels));
  });
}

stego_status stego_key_derive(uint64_t seed, size_t grid_side, stego_key** out) {
  return guarded([&] {
    require(out, "out");
    *out = new stego_key{stego::derive_key(seed, grid_side)};
  });
}

stego_status stego_key_read(const char* path, stego_key** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = new stego_key{stego::load_key(path)};
  });
}

stego_status stego_key_write(const stego_key* key, const char* path) {
  return guarded([&] {
    require(key, "key");
    require(path, "path");
    stego::save_key(path, key->value);
  });
}

void stego_key_free(stego_key* key) { delete key; }

void stego_key_info(const stego_key* key, uint64_t* seed, size_t* grid_side) {
  if (key == nullptr) return;
  if (seed) *seed = key->value.seed;
  if (grid_side) *grid_side = key->value.grid_side;
}

stego_status stego_key_permutation(const stego_key* key, uint32_t* perm, size_t capacity) {
  return guarded([&] {
    require(key, "key");
    require(perm, "perm");
    if (capacity < key->value.perm.size()) {
      stego::fail(stego::ErrorKind::invalid_argument,
                  "permutation needs room for " + std::to_string(key->value.perm.size()) + " entries");
    }
    std::copy(key->value.perm.begin(), key->value.perm.end(), perm);
  });
}

stego_status stego_encrypt(const stego_image* image, const stego_key* key, stego_image** out) {
  return guarded([&] {
    require(image, "image");
    require(key, "key");
    require(out, "out");
    *out = wrap(stego::encrypt(image->value, key->value));
  });
}

stego_status stego_decrypt(const stego_image* image, const stego_key* key, stego_image** out) {
  return guarded([&] {
    require(image, "image");
    require(key, "key");
    require(out, "out");
    *out = wrap(stego::decrypt(image->value, key->value));
  });
}

stego_status stego_keyspace(uint64_t blocks, double* log10_permutations, double* log2_permutations) {
  return guarded([&] {
    const auto ks = stego::keyspace(blocks);
    if (log10_permutations) *log10_permutations = ks.log10_permutations;
    if (log2_permutations) *log2_permutations = ks.log2_permutations;
  });
}

stego_status stego_brute_force_years(uint64_t blocks, double ops_per_second, double* log10_years) {
  return guarded([&] {
    require(log10_years, "log10_years");
    *log10_years = stego::brute_force_years(blocks, ops_per_second);
  });
}

stego_status stego_model_create(size_t channels, uint64_t seed, stego_model** out) {
  return guarded([&] {
    require(out, "out");
    *out = new stego_model{stego::make_model(channels, stego::kDefaultNoiseStddev, seed)};
  });
}

stego_status stego_model_load(const char* checkpoint_path, stego_model** out) {
  return guarded([&] {
    require(checkpoint_path, "checkpoint_path");
    require(out, "out");
    *out = new stego_model{stego::from_checkpoint(stego::load_checkpoint(checkpoint_path))};
  });
}

stego_status stego_model_save(const stego_model* model, const char* checkpoint_path) {
  return guarded([&] {
    require(model, "model");
    require(checkpoint_path, "checkpoint_path");
    stego::save_checkpoint(checkpoint_path, stego::to_checkpoint(model->value));
  });
}

void stego_model_free(stego_model* model) { delete model; }

void stego_model_parameter_counts(const stego_model* model, size_t* encoder, size_t* decoder) {
  if (model == nullptr) return;
  if (encoder) *encoder = model->value.encoder_parameter_count();
  if (decoder) *decoder = model->value.decoder_parameter_count();
}

size_t stego_model_channels(const stego_model* model) { return model ? model->value.channels() : 0; }

stego_status stego_hide(const stego_model* model, const stego_image* secret, const stego_image* cover,
                        const stego_key* key, stego_image** container) {
  return guarded([&] {
    require(model, "model");
    require(secret, "secret");
    require(cover, "cover");
    require(container, "container");
    *container = wrap(stego::send(secret->value, cover->value, key ? &key->value : nullptr, model->value));
  });
}

stego_status stego_reveal(const stego_model* model, const stego_image* container, const stego_key* key,
                          stego_image** revealed_encrypted, stego_image** secret) {
  return guarded([&] {
    require(model, "model");
    require(container, "container");
    auto got = stego::receive(container->value, key ? &key->value : nullptr, model->value);
    if (revealed_encrypted) *revealed_encrypted = wrap(std::move(got.revealed_encrypted));
    if (secret) *secret = wrap(std::move(got.secret));
  });
}

stego_status stego_attack(const stego_model* model, const stego_image* secret, const stego_image* cover,
                          const stego_key* key, stego_image** residual, double* similarity) {
  return guarded([&] {
    require(model, "model");
    require(secret, "secret");
    require(cover, "cover");
    auto result = stego::residual_attack(secret->value, cover->value, key ? &key->value : nullptr, model->value);
    if (similarity) *similarity = result.similarity;
    if (residual) *residual = wrap(std::move(result.residual));
  });
}

stego_status stego_train(const char* config_path, const char* checkpoint_path, const char* metrics_csv,
                         stego_epoch_callback on_epoch, void* user, stego_epoch_metrics* first,
                         stego_epoch_metrics* last) {
  return guarded([&] {
    require(config_path, "config_path");
    const stego::TrainConfig config = stego::load_train_config(config_path);
    // Fail on unwritable outputs before spending time on training.
    if (checkpoint_path) write_text(checkpoint_path, "");
    if (metrics_csv) write_text(metrics_csv, "");

    stego::TrainOptions options;
    std::vector<stego::MetricsRecord> partial;
    options.on_epoch = [&](const stego::MetricsRecord& r) {
      partial.push_back(r);
      if (on_epoch) {
        const stego_epoch_metrics m = to_c(r);
        on_epoch(&m, user);
      }
    };
    try {
      const stego::TrainReport report = stego::train(config, options);
      if (checkpoint_path) stego::save_checkpoint(checkpoint_path, stego::to_checkpoint(report.model));
      if (metrics_csv) write_text(metrics_csv, stego::metrics_csv(report.series));
    } catch (const stego::Error&) {
      // Keep whatever series was recorded before the failure.
      if (metrics_csv) write_text(metrics_csv, stego::metrics_csv(partial));
      throw;
    }
    if (first && !partial.empty()) *first = to_c(partial.front());
    if (last && !partial.empty()) *last = to_c(partial.back());
  });
}

stego_status stego_beta_sweep(const char* config_path, const double* betas, size_t n_betas, const uint64_t* seeds,
                              size_t n_seeds, const char* csv_path) {
  return guarded([&] {
    require(config_path, "config_path");
    require(betas, "betas");
    require(csv_path, "csv_path");
    const stego::TrainConfig config = stego::load_train_config(config_path);
    write_text(csv_path, "");
    const std::vector<double> b(betas, betas + n_betas);
    std::vector<std::uint64_t> s;
    if (seeds != nullptr) s.assign(seeds, seeds + n_seeds);
    write_text(csv_path, stego::sweep_csv(stego::beta_sweep(config, b, s)));
  });
}

}  // extern "C"
