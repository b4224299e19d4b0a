#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "adain/model.hpp"

namespace adain {

struct BenchRow {
  Index size = 0;
  int count = 0;
  /// Mean seconds per image for transfer from a cached descriptor, and for
  /// style encoding plus that same transfer.
  double exclude_encoding = 0;
  double include_encoding = 0;
};

struct BenchReport {
  std::vector<BenchRow> rows;
  /// N content images against one style: encode once and reuse the
  /// descriptor, versus N full two-image transfers.
  int cache_count = 0;
  Index cache_size = 0;
  double cached_total = 0;
  double full_total = 0;

  std::string to_table() const;
  std::string to_csv() const;
};

/// Times stylization of `count` synthetic square images at each size.
/// One untimed warm-up transfer precedes every size. cache_count = 0 skips the
/// cached-descriptor comparison.
BenchReport run_bench(const StyleTransferModel& model, const std::vector<Index>& sizes, int count,
                      std::uint64_t seed = 0, int cache_count = 10);

}  // namespace adain
