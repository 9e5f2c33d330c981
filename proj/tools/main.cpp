#include "optstop/cli.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

namespace cli = optstop::cli;

int main(int argc, char** argv) {
  CLI::App app{"Optimal stopping under non-linear evaluations: solve, verify, sweep"};
  app.require_subcommand(1, 1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<double> tol;
  std::optional<std::uint64_t> cap;
  std::string output;
  std::string csv_dir;
  int threads = 1;
  bool omit_timing = false;

  for (const char* name : {"solve", "oracle", "verify", "axioms", "sweep"}) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "Experiment config (JSON)")->required();
    sub->add_option("--seed", seed, "Override the config seed");
    sub->add_option("--tol", tol, "Override the equality tolerance");
    sub->add_option("--cap", cap, "Override the strategy enumeration cap");
    sub->add_option("-o,--output", output, "Write the report here instead of stdout");
    sub->add_option("--csv-dir", csv_dir, "Also export CSV tables into this directory");
    sub->add_option("--threads", threads, "Sweep workers")->check(CLI::PositiveNumber);
    sub->add_flag("--omit-timing", omit_timing, "Leave the timing field out of the report");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : cli::kExitConfig;
  }

  const auto command = cli::parse_command(app.get_subcommands().front()->get_name());
  cli::RunReport report;
  const int code = cli::run_to_report(command, config_path, {seed, tol, cap}, {threads}, report);

  const auto text = report.text(!omit_timing);
  if (output.empty()) {
    std::cout << text;
  } else {
    std::ofstream out(output, std::ios::binary);
    if (!out) {
      std::cerr << "cannot write " << output << "\n";
      return cli::kExitConfig;
    }
    out << text;
  }
  if (!csv_dir.empty()) cli::export_tables(report, cli::ExportFormat::kCsv, csv_dir);
  if (report.body.contains("error")) std::cerr << report.body["error"].get<std::string>() << "\n";
  return code;
}
