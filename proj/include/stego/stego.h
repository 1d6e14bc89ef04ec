#ifndef STEGO_STEGO_H
#define STEGO_STEGO_H

#include <stddef.h>
#include <stdint.h>

#if defined(STEGO_BUILDING_LIBRARY)
#define STEGO_API __attribute__((visibility("default")))
#else
#define STEGO_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Status codes double as the CLI exit codes. */
typedef enum stego_status {
  STEGO_OK = 0,
  STEGO_USAGE = 2,    /* invalid argument, unreadable or unwritable path */
  STEGO_DATA = 3,     /* malformed file, incompatible shapes */
  STEGO_NUMERIC = 4,  /* non-finite loss */
  STEGO_INTERNAL = 5
} stego_status;

typedef struct stego_image stego_image;
typedef struct stego_key stego_key;
typedef struct stego_model stego_model;

/* Message for the last failing call on this thread; "" after success. */
STEGO_API const char* stego_last_error(void);
STEGO_API const char* stego_version(void);

/* ---- images: 8-bit, row-major, interleaved, 1 or 3 channels ---------- */

STEGO_API stego_status stego_image_create(size_t height, size_t width, size_t channels, const uint8_t* pixels,
                                          stego_image** out);
STEGO_API stego_status stego_image_read_ppm(const char* path, stego_image** out);
STEGO_API stego_status stego_image_write_ppm(const stego_image* image, const char* path);
STEGO_API void stego_image_free(stego_image* image);
STEGO_API void stego_image_dims(const stego_image* image, size_t* height, size_t* width, size_t* channels);
STEGO_API const uint8_t* stego_image_pixels(const stego_image* image);
STEGO_API stego_status stego_image_resize(const stego_image* image, size_t height, size_t width, stego_image** out);
STEGO_API stego_status stego_image_grayscale(const stego_image* image, stego_image** out);

/* Writes channels * 256 counts, channel-major. */
STEGO_API stego_status stego_image_histogram(const stego_image* image, uint64_t* counts, size_t capacity);
/* 256 counts of |a - b| over all subpixels. */
STEGO_API stego_status stego_image_error_histogram(const stego_image* a, const stego_image* b, uint64_t counts[256]);
STEGO_API stego_status stego_image_mse(const stego_image* a, const stego_image* b, double* out);
STEGO_API stego_status stego_image_similarity(const stego_image* a, const stego_image* b, double* out);
/* Per channel horizontal/vertical Pearson correlations (2 * channels values)
   and their mean absolute value. Either output may be null. */
STEGO_API stego_status stego_image_adjacent_correlation(const stego_image* image, double* per_channel, size_t capacity,
                                                        double* mean_abs);
STEGO_API stego_status stego_image_residual(const stego_image* cover, const stego_image* container, stego_image** out);

/* kind: "gradients", "shapes", "texture" or "mixed". */
STEGO_API stego_status stego_image_synthesize(uint64_t seed, size_t index, size_t size, const char* kind,
                                              size_t channels, stego_image** out);

/* ---- block-permutation cipher ---------------------------------------- */

STEGO_API stego_status stego_key_derive(uint64_t seed, size_t grid_side, stego_key** out);
STEGO_API stego_status stego_key_read(const char* path, stego_key** out);
STEGO_API stego_status stego_key_write(const stego_key* key, const char* path);
STEGO_API void stego_key_free(stego_key* key);
STEGO_API void stego_key_info(const stego_key* key, uint64_t* seed, size_t* grid_side);
/* Copies grid_side^2 entries; fails if capacity is smaller. */
STEGO_API stego_status stego_key_permutation(const stego_key* key, uint32_t* perm, size_t capacity);

STEGO_API stego_status stego_encrypt(const stego_image* image, const stego_key* key, stego_image** out);
STEGO_API stego_status stego_decrypt(const stego_image* image, const stego_key* key, stego_image** out);

STEGO_API stego_status stego_keyspace(uint64_t blocks, double* log10_permutations, double* log2_permutations);
/* log10 of the years needed to try every arrangement. */
STEGO_API stego_status stego_brute_force_years(uint64_t blocks, double ops_per_second, double* log10_years);

/* ---- networks -------------------------------------------------------- */

/* Glorot-initialised encoder/decoder pair. */
STEGO_API stego_status stego_model_create(size_t channels, uint64_t seed, stego_model** out);
STEGO_API stego_status stego_model_load(const char* checkpoint_path, stego_model** out);
STEGO_API stego_status stego_model_save(const stego_model* model, const char* checkpoint_path);
STEGO_API void stego_model_free(stego_model* model);
STEGO_API void stego_model_parameter_counts(const stego_model* model, size_t* encoder, size_t* decoder);
STEGO_API size_t stego_model_channels(const stego_model* model);

/* A null key skips the cipher. */
STEGO_API stego_status stego_hide(const stego_model* model, const stego_image* secret, const stego_image* cover,
                                  const stego_key* key, stego_image** container);
/* Either output may be null. Without a key both outputs are the decoder image. */
STEGO_API stego_status stego_reveal(const stego_model* model, const stego_image* container, const stego_key* key,
                                    stego_image** revealed_encrypted, stego_image** secret);
STEGO_API stego_status stego_attack(const stego_model* model, const stego_image* secret, const stego_image* cover,
                                    const stego_key* key, stego_image** residual, double* similarity);

/* ---- training -------------------------------------------------------- */

typedef struct stego_epoch_metrics {
  size_t epoch;
  double encode_loss;
  double reveal_loss;
  double cover_mse;
  double secret_mse;
} stego_epoch_metrics;

typedef void (*stego_epoch_callback)(const stego_epoch_metrics* metrics, void* user);

/* Trains from a key = value config file. checkpoint_path and metrics_csv may
   be null; summary receives the first and last epoch records. */
STEGO_API stego_status stego_train(const char* config_path, const char* checkpoint_path, const char* metrics_csv,
                                   stego_epoch_callback on_epoch, void* user, stego_epoch_metrics* first,
                                   stego_epoch_metrics* last);

/* One training run per (beta, seed); writes "beta,cover_mse,secret_mse". */
STEGO_API stego_status stego_beta_sweep(const char* config_path, const double* betas, size_t n_betas,
                                        const uint64_t* seeds, size_t n_seeds, const char* csv_path);

#ifdef __cplusplus
}
#endif

#endif
