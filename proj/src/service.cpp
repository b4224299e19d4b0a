#include "adain/service.hpp"

#include <openssl/evp.h>

#include <charconv>
#include <cmath>
#include <thread>

#include "httplib.h"
#include "json.hpp"

#include "adain/image.hpp"

namespace adain {

using nlohmann::json;

std::string content_hash(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &length, EVP_sha256(), nullptr) != 1) {
    throw Error("SHA-256 digest failed");
  }
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < length; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 15];
  }
  return out;
}

// ---------------------------------------------------------------------------

StyleCache::StyleCache(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw ConfigError("cache_size", "style cache needs room for at least one entry");
}

void StyleCache::put(StyleCacheEntry entry) {
  std::lock_guard lock(mutex_);
  if (auto it = index_.find(entry.id); it != index_.end()) {
    order_.erase(it->second);
    index_.erase(it);
  }
  order_.push_front(std::move(entry));
  index_[order_.front().id] = order_.begin();
  while (order_.size() > capacity_) {
    index_.erase(order_.back().id);
    order_.pop_back();
  }
}

std::optional<StyleCacheEntry> StyleCache::get(const std::string& id) {
  std::lock_guard lock(mutex_);
  auto it = index_.find(id);
  if (it == index_.end()) return std::nullopt;
  order_.splice(order_.begin(), order_, it->second);
  return *it->second;
}

bool StyleCache::contains(const std::string& id) const {
  std::lock_guard lock(mutex_);
  return index_.count(id) > 0;
}

std::size_t StyleCache::size() const {
  std::lock_guard lock(mutex_);
  return order_.size();
}

// ---------------------------------------------------------------------------

namespace {

// A request failure that maps onto an HTTP status.
struct HttpError {
  int status;
  std::string field;
  std::string message;
};

void send_error(httplib::Response& res, int status, const std::string& field, const std::string& message) {
  res.status = status;
  res.set_content(json{{"error", message}, {"field", field}}.dump(), "application/json");
}

std::vector<std::string> field_values(const httplib::Request& req, const std::string& name) {
  std::vector<std::string> out;
  for (const auto& key : {name + "[]", name}) {
    for (const auto& part : req.get_file_values(key)) out.push_back(part.content);
  }
  return out;
}

std::optional<std::string> single_value(const httplib::Request& req, const std::string& name) {
  const auto values = field_values(req, name);
  if (values.empty()) return std::nullopt;
  if (values.size() > 1) throw HttpError{400, name, name + " given more than once"};
  return values.front();
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

double parse_real(const std::string& field, std::string_view text) {
  const std::string t = trim(text);
  double v = 0;
  const auto [end, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || ec != std::errc() || end != t.data() + t.size()) {
    throw HttpError{400, field, field + ": \"" + t + "\" is not a number"};
  }
  return v;
}

// Each weights field holds one number or a list such as "0.5,0.5" or "[0.5, 0.5]".
std::vector<double> parse_weights(const std::vector<std::string>& values) {
  std::vector<double> out;
  for (const auto& raw : values) {
    std::string s = trim(raw);
    if (!s.empty() && s.front() == '[' && s.back() == ']') s = s.substr(1, s.size() - 2);
    std::size_t start = 0;
    while (start <= s.size()) {
      const auto comma = s.find(',', start);
      const auto piece = s.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
      out.push_back(parse_real("weights", piece));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
  }
  return out;
}

bool parse_bool(const std::string& field, const std::string& raw) {
  const std::string s = trim(raw);
  if (s == "true" || s == "1" || s == "on" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "off" || s == "no" || s.empty()) return false;
  throw HttpError{400, field, field + ": \"" + s + "\" is not a boolean"};
}

}  // namespace

// ---------------------------------------------------------------------------

StyleService::StyleService(std::shared_ptr<const StyleTransferModel> model, ServiceConfig config)
    : model_(std::move(model)), config_(config), cache_(config.cache_size), server_(std::make_unique<httplib::Server>()) {
  if (!model_) throw ConfigError("weights", "service needs a model");
  if (config_.max_dim < model_->encoder().min_input_size()) {
    throw ConfigError("max_dim", "max_dim is below the encoder's minimum input size");
  }
  const unsigned threads = config_.threads ? config_.threads : std::max(1u, std::thread::hardware_concurrency());
  server_->new_task_queue = [threads] { return new httplib::ThreadPool(threads); };
  server_->set_payload_max_length(config_.max_upload_bytes);
  routes();
}

StyleService::~StyleService() { stop(); }

bool StyleService::listen() { return server_->listen(config_.host, config_.port); }

int StyleService::bind_to_any_port(const std::string& host) { return server_->bind_to_any_port(host); }

bool StyleService::listen_after_bind() { return server_->listen_after_bind(); }

void StyleService::stop() {
  if (server_) server_->stop();
}

void StyleService::wait_until_ready() const { server_->wait_until_ready(); }

void StyleService::routes() {
  const Index min_size = model_->encoder().min_input_size();

  auto decode_checked = [this, min_size](const std::string& field, const std::string& bytes) {
    Image img;
    try {
      img = decode_image(bytes);
    } catch (const IoError& e) {
      throw HttpError{400, field, field + ": " + e.what()};
    }
    const auto s = img.shape();
    if (s.h > config_.max_dim || s.w > config_.max_dim) {
      throw HttpError{413, field, field + ": " + std::to_string(s.h) + "x" + std::to_string(s.w) +
                                      " exceeds the " + std::to_string(config_.max_dim) + " pixel limit"};
    }
    if (s.h < min_size || s.w < min_size) {
      throw HttpError{422, field, field + ": " + std::to_string(s.h) + "x" + std::to_string(s.w) +
                                      " is smaller than the encoder minimum of " + std::to_string(min_size)};
    }
    return img;
  };

  auto guarded = [](auto handler) {
    return [handler](const httplib::Request& req, httplib::Response& res) {
      try {
        handler(req, res);
      } catch (const HttpError& e) {
        send_error(res, e.status, e.field, e.message);
      } catch (const RegionOverlapError& e) {
        send_error(res, 400, "masks", e.what());
      } catch (const ConfigError& e) {
        send_error(res, 400, e.field(), e.what());
      } catch (const DimensionError& e) {
        send_error(res, 422, "content", e.what());
      } catch (const std::exception& e) {
        send_error(res, 500, "", e.what());
      }
    };
  };

  server_->set_error_handler([](const httplib::Request&, httplib::Response& res) {
    if (!res.body.empty()) return;
    if (res.status == 413) {
      send_error(res, 413, "request", "request body exceeds the upload size limit");
    } else if (res.status == 404) {
      send_error(res, 404, "path", "no such endpoint");
    }
  });
  server_->set_post_routing_handler([](const httplib::Request&, httplib::Response& res) {
    res.set_header("Access-Control-Allow-Origin", "*");
    res.set_header("Access-Control-Expose-Headers", "X-Control-Spec");
  });

  server_->Get("/api/health", [this](const httplib::Request&, httplib::Response& res) {
    const json body{{"status", "ok"},
                    {"model_loaded", model_ != nullptr},
                    {"eps", model_->eps()},
                    {"encoder_taps", model_->encoder().tap_names()},
                    {"max_dim", config_.max_dim},
                    {"cache_entries", cache_.size()},
                    {"cache_size", cache_.capacity()}};
    res.set_content(body.dump(), "application/json");
  });

  server_->Post("/api/styles", guarded([this, decode_checked](const httplib::Request& req, httplib::Response& res) {
    auto bytes = single_value(req, "style");
    if (!bytes) bytes = single_value(req, "image");
    if (!bytes) throw HttpError{400, "style", "multipart field \"style\" is required"};
    const std::string id = content_hash(*bytes);
    if (!cache_.contains(id)) {
      Image img = decode_checked("style", *bytes);
      auto descriptor = model_->encode_style(img);
      cache_.put({id, std::move(descriptor), std::move(img), std::chrono::system_clock::now()});
    }
    res.set_content(json{{"style_id", id}}.dump(), "application/json");
  }));

  server_->Post("/api/stylize", guarded([this, decode_checked](const httplib::Request& req, httplib::Response& res) {
    const auto content_bytes = single_value(req, "content");
    if (!content_bytes) throw HttpError{400, "content", "multipart field \"content\" is required"};
    const Image content = decode_checked("content", *content_bytes);

    // Inline styles first, then cached ids, each in upload order.
    std::vector<StyleSource> sources;
    json echo_styles = json::array();
    for (const auto& bytes : field_values(req, "styles")) {
      sources.push_back(StyleSource::from_image(decode_checked("styles", bytes)));
      echo_styles.push_back({{"source", "inline"}});
    }
    for (const auto& raw : field_values(req, "style_ids")) {
      const std::string id = trim(raw);
      auto entry = cache_.get(id);
      if (!entry) throw HttpError{404, "style_ids", "unknown style_id " + id};
      sources.push_back({std::move(entry->image), std::move(entry->descriptor)});
      echo_styles.push_back({{"source", "id"}, {"style_id", id}});
    }
    if (sources.empty()) throw HttpError{400, "styles", "at least one of styles[] or style_ids[] is required"};

    ControlSpec spec;
    if (auto a = single_value(req, "alpha")) spec.alpha = parse_real("alpha", *a);
    spec.weights = parse_weights(field_values(req, "weights"));
    if (auto p = single_value(req, "preserve_color")) spec.preserve_color = parse_bool("preserve_color", *p);
    for (const auto& bytes : field_values(req, "masks")) {
      try {
        spec.masks.push_back(decode_mask(bytes));
      } catch (const IoError& e) {
        throw HttpError{400, "masks", std::string("masks: ") + e.what()};
      }
    }
    validate_controls(spec, sources.size());

    const Tensorf out = stylize(*model_, content, sources, spec);
    const json echo{{"alpha", spec.alpha},
                    {"weights", resolved_weights(spec, sources.size())},
                    {"preserve_color", spec.preserve_color},
                    {"masks", spec.masks.size()},
                    {"styles", echo_styles}};
    res.set_header("X-Control-Spec", echo.dump());
    res.set_content(encode_png(out), "image/png");
  }));
}

}  // namespace adain
