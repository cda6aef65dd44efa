#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace vrnnaug {

// Process exit codes shared by every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitArgument = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitNumeric = 4;

struct GenerateConfig {
  std::string system = "linear-gaussian";
  int64_t length = 2000;
  std::string input_mode = "excitation";  // excitation | sinusoid
  /// When positive, the final `sinusoid_tail` steps switch to the sinusoid
  /// input while the hidden state carries over.
  int64_t sinusoid_tail = 0;
  uint64_t seed = 1;
  std::string out_csv;
  std::string provenance_json;  // defaults to out_csv with a .json suffix
};

struct RunConfig {
  std::string data = "motorcycle.csv";
  std::vector<std::string> u_cols{"u"};
  std::vector<std::string> y_cols{"y"};
  double split_train = 0.5;
  double split_valid = 0.2;
  double split_test = 0.3;
  int window = 64;
  int d_z = 10;
  int gru_hidden = 100;
  std::string variant = "full";
  double logvar_min = -10.0;
  double logvar_max = 10.0;
  int mlp_hidden_layers = 3;
  int mlp_min_width = 50;
  int max_epochs = 100;
  int batch_size = 128;
  double lr = 1e-3;
  double lr_floor = 1e-6;
  int lr_check_every = 10;
  double lr_factor = 0.5;
  double grad_clip = 0.0;
  bool grad_through_feedback = false;
  uint64_t seed = 0;
  int num_samples = 100;  // forecast trajectories (K)
  std::string out_dir = "run";
  bool resume = false;
  bool quiet = false;
};

std::string run_config_to_json(const RunConfig& cfg);
RunConfig run_config_from_json(const std::string& text);

struct ForecastConfig {
  std::string run_dir;
  std::string inputs_csv;
  int horizon = 0;      // 0: use every row of the inputs file
  int num_samples = 0;  // 0: use the trained K
  uint64_t seed = 0;
  bool warm_start = false;
  /// History consumed by the warm start; defaults to the train+valid part of
  /// the training data file.
  std::string history_csv;
  std::string out_dir;  // defaults to run_dir
};

struct EvaluateConfig {
  std::string samples_json;
  std::string truth_csv;
  std::vector<std::string> y_cols{"y"};
  std::string out_json;  // defaults next to samples_json
  std::string ecp_csv;
  bool per_dim_ecp = false;
};

int cmd_generate(const GenerateConfig& cfg);
int cmd_train(const RunConfig& cfg);
int cmd_forecast(const ForecastConfig& cfg);
int cmd_evaluate(const EvaluateConfig& cfg);

/// Parses argv, dispatches to a subcommand and maps library errors onto the
/// exit codes above.
int run_cli(int argc, const char* const* argv);

}  // namespace vrnnaug
