#include <cstdlib>
#include <iostream>

#include <CLI11.hpp>

#include "kinkzeta/commands.hpp"

namespace kz = kinkzeta;

int main(int argc, char** argv) {
  CLI::App app{"kinkzeta: kinks, one-loop corrections and sn waves of the anisotropic spin chain"};
  app.require_subcommand(1);
  std::string config_path, out_dir, width, dens;
  long workers = 0;
  bool shuffle = false, print_defaults = false;
  app.add_option("--config", config_path, "key = value configuration file");
  app.add_option("--out", out_dir, "output directory (overrides config and KINKZETA_OUT_DIR)");
  app.add_option("--workers", workers, "concurrent sweep workers")->check(CLI::PositiveNumber);
  app.add_option("--width-mode", width, "kink width convention")->check(CLI::IsMember({"paper", "eom"}));
  app.add_option("--density", dens, "energy density convention")->check(CLI::IsMember({"eq8", "eq10"}));
  app.add_flag("--print-defaults", print_defaults, "print the configuration table and exit");
  app.fallthrough();

  for (const char* name : {"kink", "corrections", "m0", "chain-sim"}) app.add_subcommand(name);
  auto* sweep = app.add_subcommand("sweep", "Cartesian sweep over sweep_axes");
  sweep->add_flag("--shuffle", shuffle, "run points in seeded random order");
  app.get_subcommand("kink")->description("both kink widths, energies, relaxation");
  app.get_subcommand("corrections")->description("one-loop corrections for d = 1..3");
  app.get_subcommand("m0")->description("sn wave at 2D + g mu_B B = 0");
  app.get_subcommand("chain-sim")->description("Landau-Lifshitz chain dynamics");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (print_defaults) {
      std::cout << kz::io::defaults_table();
      return 0;
    }
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kz::cli::exit_usage;
  }
  if (print_defaults) {
    std::cout << kz::io::defaults_table();
    return 0;
  }

  try {
    kz::io::Config cfg;
    if (!config_path.empty()) cfg.merge_file(config_path);
    if (const char* env = std::getenv("KINKZETA_OUT_DIR"); env && *env) cfg.set("out_dir", env);
    if (!out_dir.empty()) cfg.set("out_dir", out_dir);
    if (workers > 0) cfg.set("workers", std::to_string(workers));
    if (!width.empty()) cfg.set("width_mode", width);
    if (!dens.empty()) cfg.set("density", dens);
    const std::string name = app.get_subcommands().front()->get_name();
    const std::filesystem::path out = cfg.str("out_dir");
    kz::io::json summary;
    if (name == "sweep") {
      kz::cli::SweepOptions so;
      so.workers = static_cast<std::size_t>(std::max(1L, cfg.integer("workers")));
      so.shuffle = shuffle;
      summary = kz::cli::cmd_sweep(cfg, out, so);
    } else {
      summary = kz::cli::find_command(name)(cfg, out);
    }
    for (const auto& w : summary["warnings"]) std::cerr << "warning: " << w.get<std::string>() << "\n";
    if (summary.contains("headline")) std::cout << summary["headline"].dump(2) << "\n";
    std::cout << "wrote " << out.string() << "\n";
    if (name == "sweep" && summary["failed"].get<std::size_t>() > 0) return kz::cli::exit_partial;
    return kz::cli::exit_ok;
  } catch (const std::exception& e) {
    const int rc = kz::cli::exit_code_for_current_exception();
    std::cerr << "error: " << e.what() << "\n";
    return rc;
  }
}
