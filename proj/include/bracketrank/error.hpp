// Copyright 2026 The Bracketrank Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace bracketrank {

// Values double as process exit codes for the command-line tool.
enum class ErrorKind : int {
  kUsage = 1,
  kData = 2,
  kJudge = 3,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class UsageError : public Error {
 public:
  explicit UsageError(const std::string& message)
      : Error(ErrorKind::kUsage, message) {}
};

// Malformed input files, violated preconditions on data, failed fits.
class DataError : public Error {
 public:
  explicit DataError(const std::string& message)
      : Error(ErrorKind::kData, message) {}
};

// Raised when the optimizer exhausts its iteration budget.
class ConvergenceError : public DataError {
 public:
  ConvergenceError(const std::string& message, double last_gradient_norm)
      : DataError(message), last_gradient_norm_(last_gradient_norm) {}

  double last_gradient_norm() const noexcept { return last_gradient_norm_; }

 private:
  double last_gradient_norm_;
};

// A judge backend could not produce a verdict. Carries the match context.
class JudgeError : public Error {
 public:
  JudgeError(const std::string& message, std::string prompt_id,
             std::string model_a, std::string model_b,
             std::string raw_reply = {})
      : Error(ErrorKind::kJudge,
              message + " [prompt=" + prompt_id + " pair=" + model_a + "," +
                  model_b + "]"),
        prompt_id_(std::move(prompt_id)),
        model_a_(std::move(model_a)),
        model_b_(std::move(model_b)),
        raw_reply_(std::move(raw_reply)) {}

  const std::string& prompt_id() const noexcept { return prompt_id_; }
  const std::string& model_a() const noexcept { return model_a_; }
  const std::string& model_b() const noexcept { return model_b_; }
  // Empty unless the failure was an unparseable verdict.
  const std::string& raw_reply() const noexcept { return raw_reply_; }

 private:
  std::string prompt_id_;
  std::string model_a_;
  std::string model_b_;
  std::string raw_reply_;
};

}  // namespace bracketrank
