// Copyright 2026 The Wildsplit Authors.
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

#ifndef WILDSPLIT_RNG_H_
#define WILDSPLIT_RNG_H_

#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>
#include <string_view>
#include <utility>

namespace wildsplit {

// Derives an independent stream seed from the global seed and a list of
// labels, e.g. {dataset, identity}. Label boundaries are part of the hash.
std::uint64_t StreamSeed(std::uint64_t seed,
                         std::initializer_list<std::string_view> labels);

// std::mt19937_64 with hand-written distributions. The standard
// distributions are implementation-defined, so they would make outputs
// differ between standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t Next() { return engine_(); }
  // Uniform in [0, n). n must be > 0.
  std::uint64_t UniformBelow(std::uint64_t n);
  // Uniform in [0, 1) with 53 random bits.
  double UniformDouble();
  double Normal();
  // Geometric on {1, 2, ...} with the given mean (>= 1).
  std::uint64_t Geometric(double mean);

  template <typename T>
  void Shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const std::size_t j = UniformBelow(i);
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace wildsplit

#endif  // WILDSPLIT_RNG_H_
