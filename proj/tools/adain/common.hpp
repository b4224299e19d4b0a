#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "adain/loss.hpp"
#include "adain/model.hpp"

namespace adain::cli {

void add_train(CLI::App& app);
void add_stylize(CLI::App& app);
void add_eval(CLI::App& app);
void add_experiment(CLI::App& app);
void add_bench(CLI::App& app);
void add_weights(CLI::App& app);
void add_serve(CLI::App& app);

/// Writes `config` as pretty JSON to `dir`/`name`, creating `dir`.
void echo_config(const std::filesystem::path& dir, const nlohmann::json& config,
                 const std::string& name = "config.json");

void write_text(const std::filesystem::path& path, const std::string& text);

/// "content 0.1234  style 0.5678  total 5.79  [relu1_1 ...]".
std::string format_report(const LossReport& report, const std::vector<std::string>& layers);

/// Adds --seed with ADAIN_SEED as its environment default.
CLI::Option* add_seed_option(CLI::App* cmd, std::uint64_t& seed, const std::string& help);

}  // namespace adain::cli
