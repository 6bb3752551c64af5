// Copyright 2026 The shardsearch Authors.
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

#ifndef SHARDSEARCH_COMMON_H_
#define SHARDSEARCH_COMMON_H_

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

namespace shardsearch {

// Error taxonomy. Infeasibility of a sharding task is not an error; it is
// reported through std::optional / result structs.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class NotSplittable : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

class PlanInvalid : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class TrainingDiverged : public std::runtime_error {
 public:
  TrainingDiverged(const std::string& what, int epoch)
      : std::runtime_error(what), epoch_(epoch) {}
  int epoch() const { return epoch_; }

 private:
  int epoch_;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Derives an independent 64-bit seed for stream `index` of generator `seed`
// (splitmix64 finalizer). Used so per-sample randomness depends only on
// (seed, index), never on generation order.
inline uint64_t DeriveSeed(uint64_t seed, uint64_t index) {
  uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::mt19937_64 MakeRng(uint64_t seed, uint64_t stream) {
  return std::mt19937_64(DeriveSeed(seed, stream));
}

// FNV-1a 64 over bytes, hex encoded. Content fingerprint for files/configs.
inline std::string Fingerprint(std::string_view bytes) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[i] = kHex[h & 0xf];
    h >>= 4;
  }
  return out;
}

}  // namespace shardsearch

#endif  // SHARDSEARCH_COMMON_H_
