/*
 * Copyright 2026 The vbmask Authors
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

#ifndef VBMASK_ERRORS_H_
#define VBMASK_ERRORS_H_

#include <stdexcept>
#include <string>

namespace vbmask {

// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed arguments: shape mismatches, out-of-range parameters.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// A decode was attempted without every encoding's result.
class IncompleteBatch : public Error {
 public:
  using Error::Error;
};

class IntegrityNotEnabled : public Error {
 public:
  using Error::Error;
};

class SchemeGenerationError : public Error {
 public:
  using Error::Error;
};

class InsufficientWorkers : public Error {
 public:
  using Error::Error;
};

class StaleWeights : public Error {
 public:
  using Error::Error;
};

// A simulated worker never answered its job.
class WorkerTimeout : public Error {
 public:
  using Error::Error;
};

// Raised by the training loop when the integrity policy is `abort`.
class IntegrityAbort : public Error {
 public:
  using Error::Error;
};

class NonFiniteLoss : public Error {
 public:
  using Error::Error;
};

class IngestionError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace vbmask

#endif  // VBMASK_ERRORS_H_
