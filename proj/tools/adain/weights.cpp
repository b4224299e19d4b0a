#include <iostream>

#include "common.hpp"

#include "adain/bundle.hpp"
#include "adain/errors.hpp"

namespace adain::cli {

namespace {

std::string shape_text(const std::vector<std::int64_t>& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) out += (i ? "," : "") + std::to_string(shape[i]);
  return out + "]";
}

void inspect(const std::string& path) {
  const auto bundle = WeightsBundle::load(path);
  const auto manifest = bundle.manifest();
  std::cout << "version " << WeightsBundle::kVersion << "\n";
  for (const auto& [key, value] : bundle.metadata.items()) {
    if ((key == "encoder" || key == "decoder") && value.contains("layers")) {
      std::cout << key << " layers " << value.at("layers").size() << "\n";
    } else {
      std::cout << key << " " << value.dump() << "\n";
    }
  }
  std::cout << "tensors " << bundle.tensors.size() << "\n";
  for (const auto& t : manifest.at("tensors")) {
    std::cout << "  " << t.at("name").get<std::string>() << " " << t.at("dtype").get<std::string>() << " "
              << shape_text(t.at("shape").get<std::vector<std::int64_t>>()) << " offset "
              << t.at("offset").get<std::int64_t>() << " nbytes " << t.at("nbytes").get<std::int64_t>() << "\n";
  }
}

void verify(const std::string& path) {
  const auto bundle = WeightsBundle::load(path);
  std::int64_t elements = 0;
  for (const auto& t : bundle.tensors) elements += t.element_count();
  if (bundle.metadata.contains("decoder")) {
    model_from_bundle(bundle);
  } else {
    encoder_from_bundle(bundle);
  }
  std::cout << "OK " << path << ": " << bundle.tensors.size() << " tensors, " << elements << " parameters\n";
}

void init(const std::string& kind, std::uint64_t seed, const std::string& out) {
  save_model(load_model(kind, seed), out);
  std::cout << "wrote " << out << "\n";
}

}  // namespace

void add_weights(CLI::App& app) {
  auto* cmd = app.add_subcommand("weights", "Inspect, verify or create weights bundles");
  cmd->require_subcommand(1);

  auto path = std::make_shared<std::string>();
  auto* ins = cmd->add_subcommand("inspect", "Print the manifest, tensors in manifest order");
  ins->add_option("path", *path, "Weights bundle")->required();
  ins->callback([path] { inspect(*path); });

  auto vpath = std::make_shared<std::string>();
  auto* ver = cmd->add_subcommand("verify", "Check every bundle invariant; exit 1 naming the first violation");
  ver->add_option("path", *vpath, "Weights bundle")->required();
  ver->callback([vpath] { verify(*vpath); });

  struct InitArgs {
    std::string kind = "tiny";
    std::uint64_t seed = 0;
    std::string out;
  };
  auto args = std::make_shared<InitArgs>();
  auto* ini = cmd->add_subcommand("init", "Write a randomly initialized model");
  ini->add_option("--kind", args->kind, "tiny or reference")
      ->check(CLI::IsMember({"tiny", "reference"}))
      ->capture_default_str();
  add_seed_option(ini, args->seed, "Initialization seed");
  ini->add_option("--out", args->out, "Output bundle")->required();
  ini->callback([args] { init(args->kind, args->seed, args->out); });
}

}  // namespace adain::cli
