#include "common.hpp"

#include <cstdio>
#include <fstream>

#include "adain/errors.hpp"

namespace adain::cli {

void echo_config(const std::filesystem::path& dir, const nlohmann::json& config, const std::string& name) {
  if (!dir.empty()) std::filesystem::create_directories(dir);
  write_text(dir / name, config.dump(2) + "\n");
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw IoError("cannot write " + path.string());
}

std::string format_report(const LossReport& report, const std::vector<std::string>& layers) {
  char buf[128];
  std::snprintf(buf, sizeof(buf), "content %.6g  style %.6g  total %.6g", report.content, report.style,
                report.total);
  std::string out = buf;
  for (std::size_t i = 0; i < report.per_layer_style.size() && i < layers.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "  %s %.6g", layers[i].c_str(), report.per_layer_style[i]);
    out += buf;
  }
  return out;
}

CLI::Option* add_seed_option(CLI::App* cmd, std::uint64_t& seed, const std::string& help) {
  return cmd->add_option("--seed", seed, help)->envname("ADAIN_SEED")->capture_default_str();
}

}  // namespace adain::cli
