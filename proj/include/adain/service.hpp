#pragma once

#include <chrono>
#include <cstddef>
#include <list>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>

#include "adain/controls.hpp"
#include "adain/model.hpp"

namespace httplib {
class Server;
}

namespace adain {

struct ServiceConfig {
  std::string host = "0.0.0.0";
  int port = 8080;
  Index max_dim = 1024;
  std::size_t cache_size = 256;
  std::size_t max_upload_bytes = 16u << 20;
  /// Worker threads; 0 means hardware concurrency.
  unsigned threads = 0;
};

/// Hex SHA-256 of the bytes; the id of an uploaded style.
std::string content_hash(std::string_view bytes);

struct StyleCacheEntry {
  std::string id;
  StyleDescriptor descriptor;
  /// Decoded upload, kept for colour-preserving requests by id.
  Image image;
  std::chrono::system_clock::time_point created_at;
};

/// Thread-safe LRU map from style id to entry.
class StyleCache {
 public:
  explicit StyleCache(std::size_t capacity);

  /// Inserts or refreshes; evicts the least recently used entry beyond capacity.
  void put(StyleCacheEntry entry);
  std::optional<StyleCacheEntry> get(const std::string& id);
  bool contains(const std::string& id) const;
  std::size_t size() const;
  std::size_t capacity() const { return capacity_; }

 private:
  using List = std::list<StyleCacheEntry>;
  mutable std::mutex mutex_;
  std::size_t capacity_;
  List order_;  // most recent first
  std::unordered_map<std::string, List::iterator> index_;
};

/// HTTP front end:
///   GET  /api/health   -> {status, model_loaded, eps, encoder_taps, ...}
///   POST /api/styles   -> {style_id}       multipart field "style"
///   POST /api/stylize  -> image/png        fields content, styles[], style_ids[],
///                                          weights[], alpha, preserve_color, masks[]
/// Errors are JSON {error, field} with 400, 404, 413 or 422.
class StyleService {
 public:
  StyleService(std::shared_ptr<const StyleTransferModel> model, ServiceConfig config);
  ~StyleService();
  StyleService(const StyleService&) = delete;
  StyleService& operator=(const StyleService&) = delete;

  /// Blocks serving on config.host:config.port until stop().
  bool listen();
  /// Binds an ephemeral port on `host` and returns it; serve with listen_after_bind().
  int bind_to_any_port(const std::string& host = "127.0.0.1");
  bool listen_after_bind();
  void stop();
  void wait_until_ready() const;

  const ServiceConfig& config() const { return config_; }
  StyleCache& cache() { return cache_; }

 private:
  void routes();

  std::shared_ptr<const StyleTransferModel> model_;
  ServiceConfig config_;
  StyleCache cache_;
  std::unique_ptr<httplib::Server> server_;
};

}  // namespace adain
