#ifndef DEEPCFL_H
#define DEEPCFL_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes of every fallible call.
 */
typedef enum DcflStatus {
  DCFL_STATUS_OK = 0,
  DCFL_STATUS_NULL_POINTER = 1,
  DCFL_STATUS_INVALID_ARGUMENT = 2,
  DCFL_STATUS_CONFIG = 3,
  DCFL_STATUS_DIMENSION = 4,
  DCFL_STATUS_IO = 5,
  /**
   * Training produced a non-finite loss.
   */
  DCFL_STATUS_NON_FINITE = 6,
  DCFL_STATUS_FAILED = 7,
  DCFL_STATUS_PANIC = 8,
} DcflStatus;

typedef struct DcflBackbone DcflBackbone;

typedef struct DcflConfig DcflConfig;

typedef struct DcflImage DcflImage;

typedef struct DcflMask DcflMask;

typedef struct DcflReport DcflReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. Valid until the
 * next call into this library from the same thread.
 */
const char *dcfl_last_error(void);

/**
 * Frees a string returned by this library.
 *
 * # Safety
 * `s` must be null or a string returned by this library, not yet freed.
 */
void dcfl_string_free(char *s);

/**
 * Creates an image from `height*width*3` interleaved RGB values in `[0,1]`.
 *
 * # Safety
 * `hwc` must point to `height*width*3` readable floats; `out` must be
 * writable.
 */
enum DcflStatus dcfl_image_new(size_t height,
                               size_t width,
                               const float *hwc,
                               struct DcflImage **out);

/**
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum DcflStatus dcfl_image_load(const char *path, struct DcflImage **out);

/**
 * Writes an 8-bit PNG.
 *
 * # Safety
 * `image` must be a live handle and `path` a NUL-terminated string.
 */
enum DcflStatus dcfl_image_save(const struct DcflImage *image, const char *path);

/**
 * # Safety
 * `image` must be a live handle; `height` and `width` must be writable.
 */
enum DcflStatus dcfl_image_dims(const struct DcflImage *image, size_t *height, size_t *width);

/**
 * Copies interleaved RGB values into `buf`, which holds `len` floats.
 *
 * # Safety
 * `image` must be a live handle; `buf` must have room for `len` floats.
 */
enum DcflStatus dcfl_image_read(const struct DcflImage *image, float *buf, size_t len);

/**
 * # Safety
 * `image` must be null or a live handle.
 */
void dcfl_image_free(struct DcflImage *image);

/**
 * Outpainting mask removing `round(width*fraction)` border columns.
 *
 * # Safety
 * `out` must be writable.
 */
enum DcflStatus dcfl_mask_outpaint(size_t height,
                                   size_t width,
                                   double fraction,
                                   struct DcflMask **out);

/**
 * Mask with exactly `round(height*width*percent/100)` missing pixels.
 *
 * # Safety
 * `out` must be writable.
 */
enum DcflStatus dcfl_mask_random(size_t height,
                                 size_t width,
                                 double percent,
                                 uint64_t seed,
                                 struct DcflMask **out);

/**
 * Reads a raster mask (dark = missing) that must be `height x width`.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum DcflStatus dcfl_mask_load(const char *path,
                               size_t height,
                               size_t width,
                               struct DcflMask **out);

/**
 * # Safety
 * `mask` must be a live handle; `count` must be writable.
 */
enum DcflStatus dcfl_mask_zero_count(const struct DcflMask *mask, size_t *count);

/**
 * # Safety
 * `mask` must be null or a live handle.
 */
void dcfl_mask_free(struct DcflMask *mask);

/**
 * `image ⊙ mask` as a new image.
 *
 * # Safety
 * Handles must be live; `out` must be writable.
 */
enum DcflStatus dcfl_corrupt(const struct DcflImage *image,
                             const struct DcflMask *mask,
                             struct DcflImage **out);

/**
 * Known pixels from `source`, holes from `restored`.
 *
 * # Safety
 * Handles must be live; `out` must be writable.
 */
enum DcflStatus dcfl_composite(const struct DcflImage *restored,
                               const struct DcflImage *source,
                               const struct DcflMask *mask,
                               struct DcflImage **out);

/**
 * # Safety
 * Handles must be live; `value` must be writable.
 */
enum DcflStatus dcfl_psnr(const struct DcflImage *a, const struct DcflImage *b, double *value);

/**
 * # Safety
 * Handles must be live; `value` must be writable.
 */
enum DcflStatus dcfl_ssim(const struct DcflImage *a, const struct DcflImage *b, double *value);

/**
 * SSIM averaged over the mask's missing pixels.
 *
 * # Safety
 * Handles must be live; `value` must be writable.
 */
enum DcflStatus dcfl_masked_ssim(const struct DcflImage *a,
                                 const struct DcflImage *b,
                                 const struct DcflMask *mask,
                                 double *value);

/**
 * Default configuration for a task name such as `"restore_random"`.
 *
 * # Safety
 * `task` must be a NUL-terminated string; `out` must be writable.
 */
enum DcflStatus dcfl_config_new(const char *task, struct DcflConfig **out);

/**
 * Parses a TOML configuration document.
 *
 * # Safety
 * `toml` must be a NUL-terminated string; `out` must be writable.
 */
enum DcflStatus dcfl_config_from_toml(const char *toml, struct DcflConfig **out);

/**
 * # Safety
 * `config` must be a live handle.
 */
enum DcflStatus dcfl_config_set_iterations(struct DcflConfig *config, size_t iterations);

/**
 * # Safety
 * `config` must be a live handle.
 */
enum DcflStatus dcfl_config_set_seed(struct DcflConfig *config, uint64_t seed);

/**
 * Sets the four loss weights (generator, reconstruction, adversarial,
 * contextual).
 *
 * # Safety
 * `config` must be a live handle.
 */
enum DcflStatus dcfl_config_set_weights(struct DcflConfig *config,
                                        double lambda_g,
                                        double lambda_r,
                                        double lambda_cal,
                                        double lambda_cvl);

/**
 * Serializes the configuration as TOML; free with [`dcfl_string_free`].
 *
 * # Safety
 * `config` must be a live handle; `out` must be writable.
 */
enum DcflStatus dcfl_config_to_toml(const struct DcflConfig *config, char **out);

/**
 * # Safety
 * `config` must be null or a live handle.
 */
void dcfl_config_free(struct DcflConfig *config);

/**
 * Opens the perceptual backbone: `"random"` for the seeded stand-in, a
 * weight file path, or an empty string for the weights cache directory.
 *
 * # Safety
 * `setting` must be a NUL-terminated string; `out` must be writable.
 */
enum DcflStatus dcfl_backbone_open(const char *setting, struct DcflBackbone **out);

/**
 * # Safety
 * `backbone` must be null or a live handle.
 */
void dcfl_backbone_free(struct DcflBackbone *backbone);

/**
 * Restores `source` under `mask`. Writes the output image and the report.
 *
 * # Safety
 * Handles must be live; both out pointers must be writable.
 */
enum DcflStatus dcfl_train_restore(const struct DcflImage *source,
                                   const struct DcflMask *mask,
                                   const struct DcflConfig *config,
                                   const struct DcflBackbone *backbone,
                                   struct DcflImage **out_image,
                                   struct DcflReport **out_report);

/**
 * Number of completed iterations and the final total loss.
 *
 * # Safety
 * `report` must be a live handle; out pointers must be writable.
 */
enum DcflStatus dcfl_report_summary(const struct DcflReport *report,
                                    size_t *iterations,
                                    double *final_tl);

/**
 * The report as JSON; free with [`dcfl_string_free`].
 *
 * # Safety
 * `report` must be a live handle; `out` must be writable.
 */
enum DcflStatus dcfl_report_json(const struct DcflReport *report, char **out);

/**
 * # Safety
 * `report` must be null or a live handle.
 */
void dcfl_report_free(struct DcflReport *report);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DEEPCFL_H */
