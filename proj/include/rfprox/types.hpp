// Copyright 2026 The rfprox Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef RFPROX_TYPES_HPP_
#define RFPROX_TYPES_HPP_

#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace rfprox {

// A binary feature vector is a row of 0/1 bytes; datasets are row-major.
using Bit = std::uint8_t;
using BinaryVector = Eigen::Matrix<Bit, 1, Eigen::Dynamic>;
using BinaryMatrix =
    Eigen::Matrix<Bit, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using BinaryRef = Eigen::Ref<const BinaryVector>;

// Per-tree terminal-node ids for one instance, in tree order.
using LeafId = std::int32_t;
using LeafSignature = Eigen::Matrix<LeafId, 1, Eigen::Dynamic>;
using SignatureMatrix =
    Eigen::Matrix<LeafId, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using SignatureRef = Eigen::Ref<const LeafSignature>;

using ClassId = int;
using Index = Eigen::Index;

// Bad or inconsistent user input: files, dimensions, class ids, options.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A library invariant was violated. Indicates a bug, not bad input.
class InvariantError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

inline void check_invariant(bool ok, const char* what) {
  if (!ok) throw InvariantError(what);
}

}  // namespace rfprox

#endif  // RFPROX_TYPES_HPP_
