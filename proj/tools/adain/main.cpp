// adain: training, stylization, evaluation, experiments, benchmarking,
// weights tooling and the HTTP service.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.

#include <iostream>

#include "common.hpp"

#include "adain/errors.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Arbitrary style transfer with adaptive instance normalization"};
  app.name("adain");
  app.require_subcommand(1);
  adain::cli::add_train(app);
  adain::cli::add_stylize(app);
  adain::cli::add_eval(app);
  adain::cli::add_experiment(app);
  adain::cli::add_bench(app);
  adain::cli::add_weights(app);
  adain::cli::add_serve(app);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  } catch (const adain::ConfigError& e) {
    std::cerr << "adain: invalid " << e.field() << ": " << e.what() << "\n";
    return 2;
  } catch (const adain::RegionOverlapError& e) {
    std::cerr << "adain: invalid masks: " << e.what() << "\n";
    return 2;
  } catch (const adain::TrainingError& e) {
    std::cerr << "adain: training aborted at iteration " << e.iteration() << " (" << e.term() << "): " << e.what()
              << "\n";
    return 1;
  } catch (const adain::FormatError& e) {
    std::cerr << "adain: bad " << e.field() << ": " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "adain: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
