#pragma once

#include "optstop/evaluations.hpp"
#include "optstop/verify.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace optstop::cli {

/// Malformed or inconsistent configuration (exit code 2).
class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

enum ExitCode : int { kExitPass = 0, kExitFail = 1, kExitConfig = 2, kExitCap = 3 };

enum class Command { kSolve, kOracle, kVerify, kAxioms, kSweep };
Command parse_command(const std::string& name);
std::string to_string(Command command);

struct TreeSpec {
  enum class Kind { kUniform, kNodes, kRandom };
  Kind kind = Kind::kUniform;
  int depth = 1;
  std::vector<double> probs{0.5, 0.5};
  TreeDescription nodes;
  int max_depth = 4;
  int max_branch = 3;
};

struct GridSpec {
  enum class Kind { kStages, kPerLeaf, kRandom };
  Kind kind = Kind::kStages;
  /// Deterministic θ_k ≡ stages[k].
  std::vector<int> stages;
  /// θ_k as a per-leaf stage list.
  std::vector<std::vector<int>> per_leaf;
  int max_n = 3;
};

struct PayoffSpec {
  enum class Kind { kNodeValues, kStageTable, kCall, kPut, kRandom };
  Kind kind = Kind::kStageTable;
  std::vector<double> node_values;
  std::vector<std::vector<double>> table;
  /// Lattice state x at a node: spot · ∏ factors, where child i of m moves by
  /// down·(up/down)^(i/(m−1)).
  double spot = 1.0;
  double up = 1.1;
  double down = 0.9;
  double strike = 1.0;
  double low = -5.0;
  double high = 5.0;
};

struct OperatorSpec {
  std::string name = "linear";
  /// g_driver kind: "discount" or "lipschitz_demo".
  std::string kind;
  double rate = 0.0;
  double ambiguity = 0.0;
  double dt = 1.0;
  /// Entropic γ; several values cycle by instance seed.
  std::vector<double> gammas;
  AmbiguitySpec nodes;
  std::optional<double> tilt;
  double penalty = 0.0;

  Evaluation build(std::uint64_t seed = 0) const;
};

struct AxiomSpec {
  int samples = 200;
  int max_depth = 3;
  int max_branch = 3;
  std::vector<std::uint64_t> tree_seeds{1, 2, 3, 4, 5};
};

struct SweepSpec {
  int seeds = 500;
  std::uint64_t first_seed = 1;
  std::vector<OperatorSpec> operators;
  CorpusOptions corpus;
};

struct ExperimentConfig {
  std::optional<TreeSpec> tree;
  std::optional<GridSpec> grid;
  std::optional<PayoffSpec> payoff;
  std::optional<OperatorSpec> op;
  /// Empty selects the default list for the command.
  std::vector<std::string> checks;
  double tolerance = kEqualityTol;
  std::uint64_t seed = 1;
  std::uint64_t cap = kDefaultStrategyCap;
  int minimality_trials = 100;
  std::uint64_t pair_cap = 250'000;
  AxiomSpec axioms;
  std::optional<SweepSpec> sweep;
};

/// Every check name the runner understands.
const std::vector<std::string>& known_checks();

ExperimentConfig parse_config(const nlohmann::json& document);
ExperimentConfig load_config(const std::filesystem::path& path);

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<double> tolerance;
  std::optional<std::uint64_t> cap;
};
void apply(ExperimentConfig& config, const Overrides& overrides);

struct RunReport {
  /// Deterministic body; `timing` is kept apart.
  nlohmann::json body;
  double seconds = 0.0;
  int exit_code = kExitPass;

  /// Body plus the timing field, pretty-printed with a trailing newline.
  std::string text(bool include_timing = true) const;
};

struct RunOptions {
  /// Sweep workers; results are assembled in seed order.
  int threads = 1;
};

/// Runs one command. Throws ConfigError for inconsistent configs and
/// CapExceeded when an enumeration exceeds the cap.
RunReport run(Command command, const ExperimentConfig& config, const RunOptions& options = {});

/// Config load, run and error mapping to exit codes; writes the report (or an
/// error document) to `report` and returns the exit code.
int run_to_report(Command command, const std::filesystem::path& config_path,
                  const Overrides& overrides, const RunOptions& options, RunReport& report);

enum class ExportFormat { kCsv, kText };

/// Writes U.csv, V.csv, nu.csv and residuals.csv (kCsv) or report.json (kText)
/// into `directory`; tables absent from the report are skipped. Returns the
/// files written.
std::vector<std::filesystem::path> export_tables(const RunReport& report, ExportFormat format,
                                                 const std::filesystem::path& directory);

/// 64-bit FNV-1a over the tree, grid and pay-off.
std::uint64_t instance_digest(const FiltrationTree& tree, const BermudanGrid& grid,
                              const AdaptedProcess& payoff);

}  // namespace optstop::cli
