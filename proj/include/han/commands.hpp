#pragma once

#include <functional>
#include <ostream>
#include <string>

#include "han/run_config.hpp"

// Subcommand bodies of the `han` binary. Each returns a process exit code:
// 0 success, 1 check failure, 2 configuration or input error, 3 numeric failure.
namespace han::cli {

enum ExitCode : int {
  kOk = 0,
  kCheckFailed = 1,
  kInputError = 2,
  kNumericFailure = 3,
};

/// Runs `body`, translating library exceptions into exit codes and writing
/// the message to `err`.
int guarded(const std::function<int()>& body, std::ostream& err);

int gen_data(const RunConfig& config, std::ostream& out, std::ostream& err);
int train(const RunConfig& config, std::ostream& out, std::ostream& err);
int eval(const RunConfig& config, const std::string& checkpoint, std::ostream& out,
         std::ostream& err);
/// Dumps sample_id,t,region_index,weight rows; an empty `sample` dumps every sample.
int attention_dump(const RunConfig& config, const std::string& checkpoint,
                   const std::string& sample, std::ostream& out, std::ostream& err);
int gradcheck(const RunConfig& config, const std::string& corrupt_block, std::ostream& out,
              std::ostream& err);

}  // namespace han::cli
