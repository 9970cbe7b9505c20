#ifndef HFB_H
#define HFB_H

/* Generated from the hfb-ffi crate; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define HFB_OK 0

/**
 * Numeric failure: an evolution aborted, a series did not converge, or an
 * internal panic was caught.
 */
#define HFB_ERR_NUMERIC 1

/**
 * Caller error: bad argument, bad configuration, or a call out of order.
 */
#define HFB_ERR_USAGE 2

/**
 * Filesystem error while reading or writing artifacts.
 */
#define HFB_ERR_IO 3

/**
 * Malformed stored data (trajectory container or CSV).
 */
#define HFB_ERR_FORMAT 4

/**
 * An evolution: configuration plus, once executed, the finished run.
 */
typedef struct HfbRun HfbRun;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Version of the underlying library as a static NUL-terminated string.
 */
const char *hfb_version(void);

/**
 * Message from the most recent failing call on this thread. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *hfb_last_error(void);

/**
 * Creates a run handle with the built-in reference configuration.
 */
int32_t hfb_run_new_default(struct HfbRun **out);

/**
 * Creates a run handle from configuration text (key = value lines).
 */
int32_t hfb_run_new_from_text(const char *text, struct HfbRun **out);

/**
 * Creates a run handle from a configuration file.
 */
int32_t hfb_run_new_from_file(const char *path, struct HfbRun **out);

/**
 * Replaces the excitation seed. Only allowed before execution.
 */
int32_t hfb_run_set_seed(struct HfbRun *run, uint64_t seed);

/**
 * Runs the evolution. With a non-null `out_dir` the artifact set
 * (config.txt, traj.hfb1, monitors.csv, report.txt) is written there;
 * with null the run stays in memory.
 */
int32_t hfb_run_execute(struct HfbRun *run, const char *out_dir);

/**
 * Number of sampled frames in the executed run.
 */
int32_t hfb_run_frame_count(const struct HfbRun *run, uint64_t *out);

/**
 * Number of spatial lattice points per frame (the density buffer length).
 */
int32_t hfb_run_points(const struct HfbRun *run, uint64_t *out);

/**
 * Largest deviation of the density trace from its initial value.
 */
int32_t hfb_run_trace_drift(const struct HfbRun *run, double *out);

/**
 * Largest relative deviation of the conserved energy from its initial value.
 */
int32_t hfb_run_energy_drift(const struct HfbRun *run, double *out);

/**
 * Copies the spatial density of one sampled frame into `buf`, which must
 * hold `hfb_run_points` doubles.
 */
int32_t hfb_run_density(const struct HfbRun *run, uint64_t frame, double *buf, uint64_t len);

/**
 * Releases a run handle. Null is a no-op.
 */
void hfb_run_free(struct HfbRun *run);

/**
 * Runs one numbered acceptance check. Returns `HFB_OK` when it passes;
 * on failure the check's detail line is available via `hfb_last_error`.
 */
int32_t hfb_check(uint32_t id);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HFB_H */
