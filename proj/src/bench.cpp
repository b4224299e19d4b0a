#include "adain/bench.hpp"

#include <chrono>
#include <cstdio>

#include "adain/synthetic.hpp"

namespace adain {

namespace {

using Clock = std::chrono::steady_clock;

double seconds(Clock::time_point a, Clock::time_point b) { return std::chrono::duration<double>(b - a).count(); }

}  // namespace

BenchReport run_bench(const StyleTransferModel& model, const std::vector<Index>& sizes, int count,
                      std::uint64_t seed, int cache_count) {
  if (sizes.empty()) throw ConfigError("sizes", "at least one size is required");
  if (count < 1) throw ConfigError("count", "count must be at least 1");
  if (cache_count < 0) throw ConfigError("cache_count", "cache_count must not be negative");
  for (Index s : sizes) {
    if (s < model.encoder().min_input_size()) {
      throw ConfigError("sizes", "size " + std::to_string(s) + " is below the encoder minimum " +
                                     std::to_string(model.encoder().min_input_size()));
    }
  }
  BenchReport report;
  for (Index size : sizes) {
    model.transfer(synthetic_content(seed, size, size), synthetic_style(seed, size, size));
    BenchRow row{size, count, 0, 0};
    for (int i = 0; i < count; ++i) {
      const auto content = synthetic_content(seed + i, size, size);
      const auto style = synthetic_style(seed + i, size, size);
      const auto t0 = Clock::now();
      const auto descriptor = model.encode_style(style);
      const auto t1 = Clock::now();
      model.transfer(content, descriptor);
      const auto t2 = Clock::now();
      row.exclude_encoding += seconds(t1, t2);
      row.include_encoding += seconds(t0, t2);
    }
    row.exclude_encoding /= count;
    row.include_encoding /= count;
    report.rows.push_back(row);
  }
  if (cache_count == 0) return report;

  const Index size = sizes.front();
  std::vector<Image> contents;
  for (int i = 0; i < cache_count; ++i) contents.push_back(synthetic_content(seed + 100 + i, size, size));
  const auto style = synthetic_style(seed + 100, size, size);
  report.cache_count = cache_count;
  report.cache_size = size;
  auto t0 = Clock::now();
  const auto descriptor = model.encode_style(style);
  for (const auto& c : contents) model.transfer(c, descriptor);
  report.cached_total = seconds(t0, Clock::now());
  t0 = Clock::now();
  for (const auto& c : contents) model.transfer(c, style);
  report.full_total = seconds(t0, Clock::now());
  return report;
}

std::string BenchReport::to_table() const {
  std::string out = "size    count  excl. encoding (s)  incl. encoding (s)\n";
  char buf[160];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%-7lld %-6d %-19.4f %.4f\n", static_cast<long long>(r.size), r.count,
                  r.exclude_encoding, r.include_encoding);
    out += buf;
  }
  if (cache_count > 0) {
    std::snprintf(buf, sizeof(buf), "cached descriptor, %d images at %lld: %.4f s total; full transfers: %.4f s total\n",
                  cache_count, static_cast<long long>(cache_size), cached_total, full_total);
    out += buf;
  }
  out += "published reference, not a target (GPU, full-size encoder): 256 px 0.018 s (0.027 s), "
         "512 px 0.065 s (0.098 s)\n";
  return out;
}

std::string BenchReport::to_csv() const {
  std::string out = "size,count,exclude_encoding_s,include_encoding_s\n";
  char buf[160];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%lld,%d,%.6f,%.6f\n", static_cast<long long>(r.size), r.count,
                  r.exclude_encoding, r.include_encoding);
    out += buf;
  }
  return out;
}

}  // namespace adain
