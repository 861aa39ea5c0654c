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

#ifndef VBMASK_IO_H_
#define VBMASK_IO_H_

#include <string>

#include "json.hpp"
#include "vbmask/tensor.h"

namespace vbmask {

// Shortest decimal form that parses back to the identical double (never
// more than 17 significant digits).
std::string FormatDouble(double v);

nlohmann::json TensorToJson(const Tensor& t);
Tensor TensorFromJson(const nlohmann::json& j);

void WriteTextFile(const std::string& path, const std::string& contents);
std::string ReadTextFile(const std::string& path);

}  // namespace vbmask

#endif  // VBMASK_IO_H_
