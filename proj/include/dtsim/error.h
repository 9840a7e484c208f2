/*
 * Copyright 2026 The dtsim Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef DTSIM_ERROR_H_
#define DTSIM_ERROR_H_

#include <stdexcept>
#include <string>
#include <string_view>

namespace dtsim {

// Process exit codes used by the command line tool.
enum class ExitCode : int {
  kOk = 0,
  kGeneric = 1,
  kValidation = 2,
  kParamLookup = 3,
  kDeadlock = 4,
  kIo = 5,
};

// Base of every error raised by the library. `error_class()` is the stable,
// machine-parsable name printed by the CLI.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual std::string_view error_class() const { return "Error"; }
  virtual ExitCode exit_code() const { return ExitCode::kGeneric; }
};

#define DTSIM_DEFINE_ERROR(Name, Code)                              \
  class Name : public Error {                                       \
   public:                                                          \
    using Error::Error;                                             \
    std::string_view error_class() const override { return #Name; } \
    ExitCode exit_code() const override { return ExitCode::Code; }  \
  }

DTSIM_DEFINE_ERROR(InvalidArgument, kValidation);
DTSIM_DEFINE_ERROR(ParseError, kValidation);
DTSIM_DEFINE_ERROR(ValidationError, kValidation);
DTSIM_DEFINE_ERROR(ConfigError, kValidation);
DTSIM_DEFINE_ERROR(MissingCostError, kValidation);
DTSIM_DEFINE_ERROR(UnknownFeatureError, kValidation);
DTSIM_DEFINE_ERROR(MissingMetricsError, kValidation);
DTSIM_DEFINE_ERROR(DepthExceededError, kValidation);
DTSIM_DEFINE_ERROR(BadFeatureError, kValidation);
DTSIM_DEFINE_ERROR(DuplicateKeyError, kValidation);
DTSIM_DEFINE_ERROR(UnsupportedCombo, kParamLookup);
DTSIM_DEFINE_ERROR(OutOfRangeError, kParamLookup);
DTSIM_DEFINE_ERROR(ParamLookupError, kParamLookup);
DTSIM_DEFINE_ERROR(DeadlockError, kDeadlock);
DTSIM_DEFINE_ERROR(IoError, kIo);

#undef DTSIM_DEFINE_ERROR

}  // namespace dtsim

#endif  // DTSIM_ERROR_H_
