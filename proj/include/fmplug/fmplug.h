// Copyright 2026 The fmplug-lab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef FMPLUG_FMPLUG_H_
#define FMPLUG_FMPLUG_H_

#include <stddef.h>
#include <stdint.h>

#if defined(FMPLUG_BUILDING_LIBRARY)
#define FMPLUG_API __attribute__((visibility("default")))
#else
#define FMPLUG_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum fmplug_status {
  FMPLUG_OK = 0,
  FMPLUG_INVALID_ARGUMENT = 1,
  FMPLUG_SHAPE = 2,
  FMPLUG_NUMERIC = 3,
  FMPLUG_FORMAT = 4,
  FMPLUG_IO = 5,
  FMPLUG_INTERNAL = 6
} fmplug_status;

typedef struct fmplug_config fmplug_config;
typedef struct fmplug_model fmplug_model;
typedef struct fmplug_result fmplug_result;

/* Message for the last non-OK status on the calling thread; never NULL. */
FMPLUG_API const char* fmplug_last_error(void);
FMPLUG_API const char* fmplug_version(void);

/* Experiment configuration (INI text or file). Relative paths in the text
   resolve against base_dir, or the working directory when it is NULL. */
FMPLUG_API fmplug_status fmplug_config_parse(const char* text, const char* base_dir,
                                             fmplug_config** out);
FMPLUG_API fmplug_status fmplug_config_load(const char* path, fmplug_config** out);
/* Overrides [run] seed, which drives test images and measurement noise. */
FMPLUG_API fmplug_status fmplug_config_set_run_seed(fmplug_config* config, uint64_t seed);
FMPLUG_API void fmplug_config_free(fmplug_config* config);

/* Trains per the [dataset] and [model] sections, or loads model.checkpoint
   when that file exists. The callback, when non-NULL, sees (step, loss). */
typedef void (*fmplug_train_callback)(size_t step, double loss, void* user);
FMPLUG_API fmplug_status fmplug_model_prepare(const fmplug_config* config,
                                              fmplug_train_callback callback, void* user,
                                              fmplug_model** out);
FMPLUG_API fmplug_status fmplug_model_load(const char* path, fmplug_model** out);
FMPLUG_API fmplug_status fmplug_model_save(const fmplug_model* model, const char* path);
FMPLUG_API size_t fmplug_model_dim(const fmplug_model* model);
FMPLUG_API void fmplug_model_free(fmplug_model* model);

/* Solves one instance of a task on a held-out test image.
   task: a [task.NAME] section of config, or "deblur" / "sr4".
   method: a [solver.NAME] section of config, or a method name with defaults.
   config may be NULL, in which case built-in settings are used with a
   32x32 smooth test image. instance picks the test image and noise draw. */
FMPLUG_API fmplug_status fmplug_solve_task(const fmplug_model* model, const fmplug_config* config,
                                           const char* task, const char* method, size_t instance,
                                           fmplug_result** out);

FMPLUG_API size_t fmplug_result_size(const fmplug_result* result);
FMPLUG_API size_t fmplug_result_height(const fmplug_result* result);
FMPLUG_API size_t fmplug_result_width(const fmplug_result* result);
/* Copies up to capacity values of the estimate; returns the full size. */
FMPLUG_API size_t fmplug_result_estimate(const fmplug_result* result, double* out, size_t capacity);
FMPLUG_API double fmplug_result_psnr(const fmplug_result* result);
FMPLUG_API double fmplug_result_ssim(const fmplug_result* result);
FMPLUG_API double fmplug_result_mse(const fmplug_result* result);
FMPLUG_API double fmplug_result_final_loss(const fmplug_result* result);
/* Learned warm-up time, or NaN for methods without one. */
FMPLUG_API double fmplug_result_learned_t(const fmplug_result* result);
FMPLUG_API size_t fmplug_result_nfe(const fmplug_result* result);
/* Writes the estimate as a one-image dataset file (same format as inputs). */
FMPLUG_API fmplug_status fmplug_result_save(const fmplug_result* result, const char* path);
FMPLUG_API void fmplug_result_free(fmplug_result* result);

/* Runs the full grid and writes results.csv and summary.md under out_dir. */
FMPLUG_API fmplug_status fmplug_run_experiment(const fmplug_config* config, const char* out_dir);

/* Gaussian concentration: mean norm and tail fractions for tau = 1, 2, 3. */
FMPLUG_API fmplug_status fmplug_concentration(size_t d, size_t n, uint64_t seed, double* mean_norm,
                                              double tail_fraction[3]);
/* Fraction of N(center, radius2 * I_d) samples whose norm lies within 1 of
   sqrt(d). */
FMPLUG_API fmplug_status fmplug_shell_overlap(const double* center, size_t d, double radius2,
                                              size_t n, uint64_t seed, double* fraction);

#ifdef __cplusplus
}
#endif

#endif  // FMPLUG_FMPLUG_H_
