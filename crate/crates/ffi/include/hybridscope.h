#ifndef HYBRIDSCOPE_H
#define HYBRIDSCOPE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum HsAlgorithm {
  HS_ALGORITHM_LRU = 0,
  HS_ALGORITHM_ARC = 1,
} HsAlgorithm;

typedef enum HsStatus {
  HS_STATUS_OK = 0,
  HS_STATUS_NULL_POINTER = 1,
  HS_STATUS_INVALID_ARGUMENT = 2,
  HS_STATUS_PARSE_ERROR = 3,
  HS_STATUS_CAPACITY_INFEASIBLE = 4,
  HS_STATUS_IO_ERROR = 5,
  HS_STATUS_EMPTY = 6,
  HS_STATUS_INTERNAL = 7,
} HsStatus;

// Stand-alone page cache fed one page at a time.
typedef struct HsCache HsCache;

// Parsed trace, split by volume in ascending volume order.
typedef struct HsTrace HsTrace;

typedef struct HsSummary {
  uint64_t read_count;
  uint64_t write_count;
  uint64_t total_count;
  uint64_t read_bytes;
  uint64_t write_bytes;
  uint64_t footprint_bytes;
  uint64_t first_ts_us;
  uint64_t last_ts_us;
} HsSummary;

typedef struct HsCacheResult {
  uint64_t accesses;
  uint64_t hits;
  uint64_t misses;
  double hit_ratio;
} HsCacheResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *hs_version(void);

// Message for the last failed call on this thread. Valid until the next
// failing call on the same thread. Empty when nothing has failed yet.
const char *hs_last_error(void);

// Loads a trace file (`.gz` allowed). `schema_path` may be null for the
// default comma-separated layout. With `strict` set, a malformed line fails
// the load; otherwise such lines are skipped and counted.
//
// # Safety
// `path` and a non-null `schema_path` must be NUL-terminated strings; `out`
// must be writable.
enum HsStatus hs_trace_load(const char *path,
                            const char *schema_path,
                            bool strict,
                            struct HsTrace **out);

// # Safety
// `trace` must come from [`hs_trace_load`] and not be used afterwards.
void hs_trace_free(struct HsTrace *trace);

// # Safety
// `trace` must be a live handle or null.
size_t hs_trace_volume_count(const struct HsTrace *trace);

// Lines skipped as malformed during a lenient load.
//
// # Safety
// `trace` must be a live handle or null.
uint64_t hs_trace_skipped_lines(const struct HsTrace *trace);

// Volume id at `index`, owned by the handle. Null when out of range.
//
// # Safety
// `trace` must be a live handle or null.
const char *hs_trace_volume_id(const struct HsTrace *trace, size_t index);

// # Safety
// `trace` must be a live handle; `out` must be writable.
enum HsStatus hs_trace_summary(const struct HsTrace *trace, size_t index, struct HsSummary *out);

// Replays one volume through a cache sized at `size_fraction` of its
// footprint.
//
// # Safety
// `trace` must be a live handle; `out` must be writable.
enum HsStatus hs_trace_hit_ratio(const struct HsTrace *trace,
                                 size_t index,
                                 enum HsAlgorithm algorithm,
                                 double size_fraction,
                                 uint64_t page_size_bytes,
                                 struct HsCacheResult *out);

// Average share of the `k` busiest macro pages per slice, written to
// `out[0..k]`.
//
// # Safety
// `trace` must be a live handle; `out` must have room for `k` doubles.
enum HsStatus hs_trace_share_profile(const struct HsTrace *trace,
                                     size_t index,
                                     uint64_t macro_page_bytes,
                                     uint64_t interval_s,
                                     size_t k,
                                     double *out);

// Smallest size fraction after which no larger size gains `epsilon_pp`
// percentage points or more. `*found` is false when no point qualifies.
//
// # Safety
// `fractions` and `hit_ratios` must hold `n` doubles; `out` and `found` must
// be writable.
enum HsStatus hs_convergence_point(const double *fractions,
                                   const double *hit_ratios,
                                   size_t n,
                                   double epsilon_pp,
                                   double *out,
                                   bool *found);

// # Safety
// `out` must be writable.
enum HsStatus hs_cache_new(enum HsAlgorithm algorithm, size_t capacity_pages, struct HsCache **out);

// # Safety
// `cache` must come from [`hs_cache_new`] and not be used afterwards.
void hs_cache_free(struct HsCache *cache);

// Accesses one page; `*hit` reports whether it was resident. `hit` may be
// null.
//
// # Safety
// `cache` must be a live handle.
enum HsStatus hs_cache_access(struct HsCache *cache, uint64_t page_id, bool *hit);

// # Safety
// `cache` must be a live handle; `out` must be writable.
enum HsStatus hs_cache_result(const struct HsCache *cache, struct HsCacheResult *out);

// Pages currently resident.
//
// # Safety
// `cache` must be a live handle or null.
size_t hs_cache_resident(const struct HsCache *cache);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HYBRIDSCOPE_H */
