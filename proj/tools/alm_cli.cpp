// Command-line front end: run studies from a config file and produce the
// synthetic datasets.
//
// Exit codes: 0 success, 1 validation / input error, 2 runtime failure.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <string>

#include "alm/alm.hpp"

namespace {

constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;

template <typename Fn>
int guarded(Fn&& fn) {
  try {
    fn();
    return 0;
  } catch (const alm::InputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << '\n';
    return kExitRuntime;
  }
}

void write_to(const std::string& path, const auto& writer) {
  if (path.empty() || path == "-") {
    writer(std::cout);
    return;
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  writer(out);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Asset allocation for a closed portfolio of annuities in payment"};
  app.require_subcommand(1);

  std::string config_path;
  std::string output_dir;
  unsigned workers = 0;
  bool workers_set = false;
  auto* run = app.add_subcommand("run", "Run the study described by a config file");
  run->add_option("config", config_path, "Config file (key = value)")->required();
  run->add_option("-o,--output-dir", output_dir, "Override output_dir");
  run->add_option("-w,--workers", workers, "Override worker count (results do not change)")
      ->each([&](const std::string&) { workers_set = true; });

  auto* check = app.add_subcommand("check-config", "Validate a config and print its canonical form");
  check->add_option("config", config_path, "Config file")->required();

  std::string out_path;
  alm::MakehamParams makeham;
  auto* table = app.add_subcommand("make-table", "Write the synthetic Makeham mortality table");
  table->add_option("-o,--out", out_path, "Output file (default stdout)");
  table->add_option("--a", makeham.a, "Makeham constant term");
  table->add_option("--b", makeham.b, "Makeham age-dependent coefficient");
  table->add_option("--c", makeham.c, "Makeham growth factor");
  table->add_option("--omega", makeham.omega, "Terminal age");

  alm::SyntheticPortfolioParams portfolio;
  auto* port = app.add_subcommand("make-portfolio", "Write a synthetic annuitant portfolio");
  port->add_option("-o,--out", out_path, "Output file (default stdout)");
  port->add_option("--size", portfolio.size, "Number of annuitants");
  port->add_option("--seed", portfolio.seed, "Generator seed");
  port->add_option("--mean-age", portfolio.mean_age, "Target mean age");
  port->add_option("--mean-annuity", portfolio.mean_annuity, "Target mean annual annuity");

  CLI11_PARSE(app, argc, argv);

  if (*run) {
    return guarded([&] {
      auto cfg = alm::load_config(config_path);
      if (!output_dir.empty()) cfg.output_dir = output_dir;
      if (workers_set) cfg.workers = workers;
      const auto res = alm::run_study(cfg);
      std::cout << alm::emit_summary(&res);
      std::cout << "results written to " << cfg.output_dir << '\n';
    });
  }
  if (*check) {
    return guarded([&] {
      const auto cfg = alm::load_config(config_path);
      for (const auto& w : alm::validate(cfg)) std::cerr << "warning: " << w << '\n';
      alm::write_config(std::cout, cfg);
    });
  }
  if (*table) {
    return guarded([&] {
      const auto t = alm::makeham_table(makeham);
      write_to(out_path, [&](std::ostream& os) { alm::write_mortality_table(os, t); });
    });
  }
  if (*port) {
    return guarded([&] {
      const auto p = alm::synthetic_portfolio(portfolio);
      write_to(out_path, [&](std::ostream& os) { alm::write_portfolio(os, p); });
    });
  }
  return 0;
}
