#pragma once

#include <string>
#include <vector>

namespace compnet::cli {

struct CliArgs {
  std::string verb;
  std::string config_path;
  std::vector<std::string> overrides;  // repeated --set key=value
  std::string out_dir = ".";
  std::string checkpoint;
};

/// Dispatches a verb and maps exceptions to exit codes:
/// 0 success, 1 usage/config error, 2 data error, 3 numerical failure.
int run_command(const CliArgs& args);

int cmd_gen_data(const CliArgs& args);
int cmd_train(const CliArgs& args);
int cmd_eval(const CliArgs& args);
int cmd_infer(const CliArgs& args);
int cmd_grad_check(const CliArgs& args);
int cmd_ablate(const CliArgs& args);
int cmd_selftest(const CliArgs& args);

}  // namespace compnet::cli
