#include <iostream>
#include <optional>

#include "common.hpp"

#include "adain/bundle.hpp"
#include "adain/errors.hpp"
#include "adain/service.hpp"

namespace adain::cli {

namespace {

struct ServeArgs {
  std::string host = "0.0.0.0";
  int port = 8080;
  std::string weights = "tiny";
  std::uint64_t seed = 0;
  std::optional<double> eps;
  Index max_dim = 1024;
  std::size_t cache_size = 256;
  std::size_t max_upload_mb = 16;
  unsigned threads = 0;
};

void run(const ServeArgs& a) {
  auto loaded = load_model(a.weights, a.seed);
  if (a.eps && !(*a.eps > 0)) throw ConfigError("eps", "eps must be positive");
  auto model = std::make_shared<const StyleTransferModel>(
      a.eps ? StyleTransferModel(loaded.shared_encoder(), loaded.decoder(), loaded.fusion(), static_cast<float>(*a.eps))
            : std::move(loaded));
  ServiceConfig cfg;
  cfg.host = a.host;
  cfg.port = a.port;
  cfg.max_dim = a.max_dim;
  cfg.cache_size = a.cache_size;
  cfg.max_upload_bytes = a.max_upload_mb << 20;
  cfg.threads = a.threads;
  StyleService service(model, cfg);
  std::cout << nlohmann::json{{"host", a.host},
                              {"port", a.port},
                              {"weights", a.weights},
                              {"seed", a.seed},
                              {"eps", model->eps()},
                              {"max_dim", a.max_dim},
                              {"cache_size", a.cache_size},
                              {"max_upload_mb", a.max_upload_mb},
                              {"threads", a.threads}}
                   .dump()
            << std::endl;
  std::cout << "listening on " << a.host << ":" << a.port << std::endl;
  if (!service.listen()) throw IoError("cannot listen on " + a.host + ":" + std::to_string(a.port));
}

}  // namespace

void add_serve(CLI::App& app) {
  auto args = std::make_shared<ServeArgs>();
  auto* cmd = app.add_subcommand("serve", "Run the HTTP service");
  cmd->add_option("--host", args->host, "Bind address")->capture_default_str();
  cmd->add_option("--port", args->port, "TCP port")->envname("ADAIN_PORT")->capture_default_str();
  cmd->add_option("--weights", args->weights, "Weights bundle, or tiny/reference for a random model")
      ->capture_default_str();
  add_seed_option(cmd, args->seed, "Seed of a random tiny/reference model");
  cmd->add_option("--eps", args->eps, "Override the bundle's AdaIN epsilon");
  cmd->add_option("--max-dim", args->max_dim, "Largest accepted image side")->capture_default_str();
  cmd->add_option("--cache-size", args->cache_size, "Style cache entries")->capture_default_str();
  cmd->add_option("--max-upload-mb", args->max_upload_mb, "Request body limit in MiB")->capture_default_str();
  cmd->add_option("--threads", args->threads, "Worker threads; 0 uses hardware parallelism")->capture_default_str();
  cmd->callback([args] { run(*args); });
}

}  // namespace adain::cli
