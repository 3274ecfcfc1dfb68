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

#include <math.h>
#include <stdio.h>
#include <stdlib.h>
#include <string.h>

#include "fmplug/fmplug.h"

static int failures = 0;

#define EXPECT(cond)                                                  \
  do {                                                                \
    if (!(cond)) {                                                    \
      fprintf(stderr, "%s:%d: expected %s\n", __FILE__, __LINE__, #cond); \
      ++failures;                                                     \
    }                                                                 \
  } while (0)

static const char* kConfig =
    "[dataset]\n"
    "count = 48\n"
    "size = 8\n"
    "cutoff = 0.5\n"
    "[model]\n"
    "hidden = 8\n"
    "steps = 30\n"
    "batch = 8\n"
    "checkpoint = capi_model.ckpt\n"
    "[run]\n"
    "instances = 2\n"
    "[task.blur]\n"
    "operator = gaussian_blur\n"
    "kernel_size = 3\n"
    "sigma = 0.8\n"
    "[solver.quick]\n"
    "method = fmplug_w\n"
    "iterations = 3\n"
    "n_cal = 8\n";

static size_t callback_calls = 0;

static void on_step(size_t step, double loss, void* user) {
  (void)step;
  *(double*)user = loss;
  ++callback_calls;
}

int main(void) {
  EXPECT(strlen(fmplug_version()) > 0);

  fmplug_config* cfg = NULL;
  EXPECT(fmplug_config_parse("[solver.plugin]\niteratons = 3\n", NULL, &cfg) == FMPLUG_FORMAT);
  EXPECT(cfg == NULL);
  EXPECT(strstr(fmplug_last_error(), "iteratons") != NULL);
  EXPECT(fmplug_config_parse(NULL, NULL, &cfg) == FMPLUG_INVALID_ARGUMENT);
  EXPECT(fmplug_config_parse("", NULL, NULL) == FMPLUG_INVALID_ARGUMENT);
  EXPECT(fmplug_config_load("does/not/exist.ini", &cfg) == FMPLUG_IO);

  fmplug_model* model = NULL;
  EXPECT(fmplug_model_load("does/not/exist.ckpt", &model) == FMPLUG_IO);
  EXPECT(fmplug_model_dim(NULL) == 0);

  double mean = 0.0, tails[3] = {0, 0, 0};
  EXPECT(fmplug_concentration(4096, 2000, 1, &mean, tails) == FMPLUG_OK);
  EXPECT(fabs(mean - 64.0) < 0.7);
  EXPECT(tails[0] >= tails[1] && tails[1] >= tails[2]);
  EXPECT(fmplug_concentration(0, 10, 1, &mean, tails) == FMPLUG_INVALID_ARGUMENT);

  double center[64];
  memset(center, 0, sizeof center);
  center[0] = 16.0;
  double frac = 1.0;
  EXPECT(fmplug_shell_overlap(center, 64, 1.0, 2000, 2, &frac) == FMPLUG_OK);
  EXPECT(frac == 0.0);
  center[0] = 8.0;
  EXPECT(fmplug_shell_overlap(center, 64, 1e-8, 100, 2, &frac) == FMPLUG_OK);
  EXPECT(frac == 1.0);
  EXPECT(fmplug_shell_overlap(center, 64, 0.0, 100, 2, &frac) == FMPLUG_INVALID_ARGUMENT);

  remove("capi_model.ckpt");
  EXPECT(fmplug_config_parse(kConfig, NULL, &cfg) == FMPLUG_OK);
  EXPECT(fmplug_config_set_run_seed(cfg, 5) == FMPLUG_OK);
  double last_loss = -1.0;
  EXPECT(fmplug_model_prepare(cfg, on_step, &last_loss, &model) == FMPLUG_OK);
  EXPECT(callback_calls == 30);
  EXPECT(last_loss > 0.0);
  EXPECT(fmplug_model_dim(model) == 64);

  fmplug_result* res = NULL;
  EXPECT(fmplug_solve_task(model, cfg, "blur", "nope", 0, &res) == FMPLUG_INVALID_ARGUMENT);
  EXPECT(fmplug_solve_task(model, cfg, "blur", "quick", 1, &res) == FMPLUG_OK);
  EXPECT(fmplug_result_size(res) == 64);
  EXPECT(fmplug_result_height(res) == 8);
  EXPECT(fmplug_result_width(res) == 8);
  EXPECT(isfinite(fmplug_result_psnr(res)));
  EXPECT(isfinite(fmplug_result_final_loss(res)));
  EXPECT(fmplug_result_learned_t(res) > 0.0 && fmplug_result_learned_t(res) < 1.0);
  EXPECT(fmplug_result_nfe(res) > 0);
  double est[64];
  double small[4];
  EXPECT(fmplug_result_estimate(res, est, 64) == 64);
  EXPECT(fmplug_result_estimate(res, small, 4) == 64);
  EXPECT(memcmp(est, small, sizeof small) == 0);
  EXPECT(fmplug_result_save(res, "capi_estimate.bin") == FMPLUG_OK);

  fmplug_result* again = NULL;
  EXPECT(fmplug_solve_task(model, cfg, "blur", "quick", 1, &again) == FMPLUG_OK);
  double est2[64];
  fmplug_result_estimate(again, est2, 64);
  EXPECT(memcmp(est, est2, sizeof est) == 0);
  fmplug_result_free(again);
  fmplug_result_free(res);

  fmplug_result* wr = NULL;
  EXPECT(fmplug_solve_task(model, cfg, "blur", "fmplug_w_r", 0, &wr) == FMPLUG_OK);
  EXPECT(isfinite(fmplug_result_learned_t(wr)));
  fmplug_result_free(wr);
  fmplug_result* pl = NULL;
  EXPECT(fmplug_solve_task(model, cfg, "blur", "plugin", 0, &pl) == FMPLUG_OK);
  EXPECT(isnan(fmplug_result_learned_t(pl)));
  fmplug_result_free(pl);

  EXPECT(fmplug_model_save(model, "capi_copy.ckpt") == FMPLUG_OK);
  fmplug_model* loaded = NULL;
  EXPECT(fmplug_model_load("capi_copy.ckpt", &loaded) == FMPLUG_OK);
  EXPECT(fmplug_model_dim(loaded) == 64);
  fmplug_model_free(loaded);

  EXPECT(fmplug_run_experiment(cfg, "capi_out") == FMPLUG_OK);
  FILE* f = fopen("capi_out/results.csv", "r");
  EXPECT(f != NULL);
  if (f) fclose(f);

  fmplug_model_free(model);
  fmplug_config_free(cfg);
  fmplug_model_free(NULL);
  fmplug_config_free(NULL);
  fmplug_result_free(NULL);

  if (failures) {
    fprintf(stderr, "%d failures\n", failures);
    return 1;
  }
  printf("capi: all checks passed\n");
  return 0;
}
