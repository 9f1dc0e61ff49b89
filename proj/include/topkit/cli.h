// Copyright 2026 The topkit Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef TOPKIT_CLI_H_
#define TOPKIT_CLI_H_

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"

namespace topkit::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitDataError = 1,
  kExitUsage = 2,
  kExitRemote = 3,
};

// Settings shared by the pipeline commands. A JSON config file may set any
// of these by name; explicit flags override it.
struct PipelineConfig {
  std::uint64_t seed = 0;
  std::size_t factor = 1;             // augment: mask plans per sample
  std::size_t upsample_factor = 20;   // mix
  std::size_t k = 4;
  double p_geom = 0.1;
  std::string separator = " ; ";
  std::string proposer;
  std::string oracle;
  std::string bridge_url = "http://127.0.0.1:8080";
  std::size_t max_in_flight = 8;
  double timeout_s = 30.0;
  std::size_t retries = 2;
  bool strict = true;
  std::size_t jobs = 1;
  std::size_t proposals_per_mask = 1;
  std::size_t resample_epochs = 1;
};

// Throws Error(kInvalidArgument) on unknown keys, wrong types or values
// outside their ranges.
PipelineConfig config_from_json(const nlohmann::json& j,
                                PipelineConfig base = PipelineConfig{});
void validate_config(const PipelineConfig& config);

std::string version_string();

// Runs the command line `args` (args[0] is the program name). Data goes to
// `out` unless --out is given; diagnostics go to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace topkit::cli

#endif  // TOPKIT_CLI_H_
