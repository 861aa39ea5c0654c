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

// Reduced-size invariant checks bundled into the library so an installed
// binary can check itself (`vbmask selftest`).

#ifndef VBMASK_SELFTEST_H_
#define VBMASK_SELFTEST_H_

#include <cstdint>
#include <string>
#include <vector>

namespace vbmask {

struct SelftestItem {
  std::string name;
  bool passed = false;
  std::string detail;
};

std::vector<SelftestItem> RunSelftest(std::uint64_t seed = 1);

}  // namespace vbmask

#endif  // VBMASK_SELFTEST_H_
