/*
 * facadealign C interface.
 *
 * Every function returns an fa_status; on failure a human-readable message
 * is available from fa_last_error() on the calling thread until the next
 * call into the library. Objects handed out through `out` parameters are
 * owned by the caller and released with the matching *_destroy function.
 */
#ifndef FACADEALIGN_H_
#define FACADEALIGN_H_

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#if defined(FACADEALIGN_BUILDING)
#define FA_API __declspec(dllexport)
#else
#define FA_API __declspec(dllimport)
#endif
#else
#define FA_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum fa_status {
  FA_OK = 0,
  FA_ERR_DEGENERATE_BOX = 1,
  FA_ERR_NON_FINITE = 2,
  FA_ERR_CONFIDENCE_OUT_OF_RANGE = 3,
  FA_ERR_SET_MISMATCH = 4,
  FA_ERR_DEGENERATE_INPUT = 5,
  FA_ERR_RANK_OUT_OF_RANGE = 6,
  FA_ERR_ZERO_BASELINE = 7,
  FA_ERR_NO_GROUND_TRUTH = 8,
  FA_ERR_IMAGE_ID_MISMATCH = 9,
  FA_ERR_PARSE = 10,
  FA_ERR_UNKNOWN_LABEL = 11,
  FA_ERR_EMPTY_CROP = 12,
  FA_ERR_BAD_RATIOS = 13,
  FA_ERR_SPEC_OVERFLOW = 14,
  FA_ERR_INPUT_MISSING = 15,
  FA_ERR_CONFIG_INVALID = 16,
  FA_ERR_INVALID_ARGUMENT = 17,
  FA_ERR_IO = 18,
  FA_ERR_INTERNAL = 99
} fa_status;

/* Name of a status code, e.g. "DegenerateBox". Never NULL. */
FA_API const char* fa_status_name(fa_status status);
/* Message of the last failed call on this thread; "" if none. */
FA_API const char* fa_last_error(void);
FA_API const char* fa_version(void);

/* ---- boxes and detection collections ---------------------------------- */

typedef struct fa_box {
  int32_t class_id;
  double x1, y1, x2, y2;
  double confidence;
} fa_box;

/* Ordered collection of per-image detection sets. */
typedef struct fa_detections fa_detections;

FA_API fa_status fa_detections_create(fa_detections** out);
FA_API void fa_detections_destroy(fa_detections* dets);
FA_API fa_status fa_detections_clone(const fa_detections* dets, fa_detections** out);

/* Interchange file I/O; clamp warnings are kept on the collection. */
FA_API fa_status fa_detections_read(const char* path, fa_detections** out);
FA_API fa_status fa_detections_write(const fa_detections* dets, const char* path);

FA_API size_t fa_detections_image_count(const fa_detections* dets);
FA_API fa_status fa_detections_add_image(fa_detections* dets, const char* image_id, double canvas_w,
                                         double canvas_h, size_t* index_out);
/* Validates the box; clamps it into the canvas (with a warning). */
FA_API fa_status fa_detections_add_box(fa_detections* dets, size_t image, const fa_box* box);
/* `image_id` stays valid until the collection is modified or destroyed. */
FA_API fa_status fa_detections_image_info(const fa_detections* dets, size_t image,
                                          const char** image_id, double* canvas_w,
                                          double* canvas_h, size_t* box_count);
FA_API fa_status fa_detections_get_box(const fa_detections* dets, size_t image, size_t box,
                                       fa_box* out);
FA_API fa_status fa_detections_find(const fa_detections* dets, const char* image_id,
                                    size_t* index_out);

FA_API size_t fa_detections_warning_count(const fa_detections* dets);
FA_API const char* fa_detections_warning(const fa_detections* dets, size_t index);

/* ---- alignment loss ---------------------------------------------------- */

typedef struct fa_align_config {
  double threshold;   /* T, pixels, > 0 */
  double weight;      /* W, >= 0 */
  double eps_overlap; /* largest IoU treated as non-overlapping, [0, 1) */
} fa_align_config;

typedef struct fa_loss_breakdown {
  double sum_x;
  double sum_y;
  uint64_t n_x;
  uint64_t n_y;
  double total;
  double weighted; /* W * total */
} fa_loss_breakdown;

FA_API void fa_align_config_default(fa_align_config* cfg);
FA_API fa_status fa_alignment_loss(const fa_detections* dets, size_t image,
                                   const fa_align_config* cfg, fa_loss_breakdown* out);
/* Writes 4 partials (x1, y1, x2, y2) per box; grad_len >= 4 * box_count. */
FA_API fa_status fa_alignment_subgradient(const fa_detections* dets, size_t image,
                                          const fa_align_config* cfg, double* grad,
                                          size_t grad_len);

/* ---- refinement -------------------------------------------------------- */

typedef struct fa_refine_config {
  fa_align_config align;
  double lambda_fid;
  double step_size;
  uint32_t max_iters;
  double tol;
} fa_refine_config;

typedef struct fa_refine_summary {
  uint64_t images;
  uint64_t converged;
  uint64_t skipped_empty; /* images with no boxes, passed through */
  uint64_t total_iterations;
} fa_refine_summary;

FA_API void fa_refine_config_default(fa_refine_config* cfg);
/* Refines every image. When trace_csv_path is non-NULL the per-iteration
 * traces are written there with a leading image_id column. `summary` may
 * be NULL. */
FA_API fa_status fa_refine(const fa_detections* input, const fa_refine_config* cfg,
                           fa_detections** out, const char* trace_csv_path,
                           fa_refine_summary* summary);

/* ---- structural regularity -------------------------------------------- */

typedef struct fa_mask fa_mask;

FA_API fa_status fa_mask_rasterize(const fa_detections* dets, size_t image, int32_t class_id,
                                   uint32_t width, uint32_t height, fa_mask** out);
FA_API fa_status fa_mask_read_pgm(const char* path, fa_mask** out);
FA_API fa_status fa_mask_write_pgm(const fa_mask* mask, const char* path);
FA_API void fa_mask_destroy(fa_mask* mask);
FA_API fa_status fa_mask_size(const fa_mask* mask, uint32_t* width, uint32_t* height);

FA_API fa_status fa_rank_k_mse(const fa_mask* mask, uint32_t k, double* out);
/* Fills mse[0 .. k_used) (k = 1 .. k_used); mse may be NULL to only query
 * k_used and score. Fails with FA_ERR_INVALID_ARGUMENT if mse_cap < k_used. */
FA_API fa_status fa_regularity_score(const fa_mask* mask, uint32_t k_max, double* mse,
                                     size_t mse_cap, size_t* k_used, double* score);
FA_API fa_status fa_relative_regularity(const double* method, const double* baseline, size_t n,
                                        double* percent);

/* ---- detection evaluation --------------------------------------------- */

FA_API fa_status fa_confidence_filter(const fa_detections* dets, double threshold,
                                      fa_detections** out);
FA_API fa_status fa_nms(const fa_detections* dets, double iou_threshold, fa_detections** out);

typedef struct fa_eval_report fa_eval_report;

typedef struct fa_class_result {
  int32_t class_id;
  int has_ground_truth;
  double ap; /* 0 when has_ground_truth == 0 */
  uint64_t tp, fp, fn;
} fa_class_result;

/* mAP of `preds` against `gts` at iou_threshold; no filtering is applied. */
FA_API fa_status fa_evaluate(const fa_detections* preds, const fa_detections* gts,
                             double iou_threshold, fa_eval_report** out);
FA_API void fa_eval_report_destroy(fa_eval_report* report);
FA_API double fa_eval_report_map(const fa_eval_report* report);
FA_API size_t fa_eval_report_class_count(const fa_eval_report* report);
FA_API fa_status fa_eval_report_class(const fa_eval_report* report, size_t index,
                                      fa_class_result* out);
FA_API const char* fa_eval_report_summary(const fa_eval_report* report);
FA_API fa_status fa_eval_report_write_csv(const fa_eval_report* report, const char* path);

/* ---- synthetic facades ------------------------------------------------- */

typedef struct fa_grid_spec {
  uint32_t rows, cols;
  double window_w, window_h;
  double spacing_x, spacing_y;
  double margin;
  int32_t class_id;
} fa_grid_spec;

typedef struct fa_noise_spec {
  double jitter;
  double shear;
  double dropout;
  double size_noise;
  uint64_t seed;
} fa_noise_spec;

FA_API void fa_grid_spec_default(fa_grid_spec* spec);
/* `count` seeded images named <prefix>_0000...; record_path may be NULL. */
FA_API fa_status fa_synth_dataset(const fa_grid_spec* grid, const fa_noise_spec* noise,
                                  uint32_t count, const char* prefix, fa_detections** ground_truth,
                                  fa_detections** corrupted, const char* record_path);

/* ---- dataset plumbing -------------------------------------------------- */

/* Converts a directory of CMP XML annotations. labels_path lists
 * `<id> <name>`, sizes_path `<image_id> <width> <height>`. When crops_path
 * is non-NULL (`<image_id> <x> <y> <w> <h>`), the result holds one sample
 * per crop instead of one set per image. */
FA_API fa_status fa_cmp_convert(const char* annotation_dir, const char* labels_path,
                                const char* sizes_path, const char* crops_path,
                                fa_detections** out);

/* assignment[i] receives 0 (train), 1 (val) or 2 (test) for ids[i]. */
FA_API fa_status fa_split(const char* const* ids, size_t n, const double ratios[3], uint64_t seed,
                          uint8_t* assignment);

/* ---- W x T sweep ------------------------------------------------------- */

typedef struct fa_sweep_config {
  const double* weights;
  size_t weight_count;
  const double* thresholds;
  size_t threshold_count;
  fa_refine_config refine;
  const fa_detections* detections;
  const fa_detections* ground_truth; /* may be NULL: mAP reported as NaN */
  int32_t class_id;
  uint32_t mask_w, mask_h, k_max;
  double confidence;
  double nms_iou;
  double match_iou;
  const char* output_dir; /* NULL: no report files */
  uint64_t seed;
  uint32_t threads; /* 0: hardware concurrency */
} fa_sweep_config;

typedef struct fa_sweep_row {
  double weight;
  double threshold;
  double relative_regularity;
  double map50;
  double align_before;
  double align_after;
  double seconds;
  uint64_t images;
  const char* status; /* valid while the result lives */
} fa_sweep_row;

typedef struct fa_sweep_result fa_sweep_result;

FA_API void fa_sweep_config_default(fa_sweep_config* cfg);
FA_API fa_status fa_sweep(const fa_sweep_config* cfg, fa_sweep_result** out);
FA_API void fa_sweep_result_destroy(fa_sweep_result* result);
FA_API size_t fa_sweep_result_row_count(const fa_sweep_result* result);
FA_API fa_status fa_sweep_result_row(const fa_sweep_result* result, size_t index,
                                     fa_sweep_row* out);

#ifdef __cplusplus
}
#endif

#endif /* FACADEALIGN_H_ */
