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
//
// Error hierarchy shared by all components.  The CLI maps these onto
// process exit codes, so keep the taxonomy stable.

#ifndef PHRASEADAPT_ERRORS_HPP_
#define PHRASEADAPT_ERRORS_HPP_

#include <cstdint>
#include <stdexcept>
#include <string>

namespace phraseadapt {

// Bad function arguments or semantically invalid values (empty phrase,
// order out of range, mismatched model vocabularies, ...).
class InputError : public std::runtime_error {
 public:
  explicit InputError(const std::string& what) : std::runtime_error(what) {}
};

// Malformed file content.  Carries a 1-based line number when known.
class FormatError : public std::runtime_error {
 public:
  explicit FormatError(const std::string& what, std::uint64_t line = 0)
      : std::runtime_error(line ? what + " (line " + std::to_string(line) + ")"
                                : what),
        line_(line) {}
  std::uint64_t line() const { return line_; }

 private:
  std::uint64_t line_ = 0;
};

// I/O failure.  Carries the uncompressed byte offset reached so far.
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what, std::uint64_t byte_offset = 0)
      : std::runtime_error(
            byte_offset ? what + " (byte offset " + std::to_string(byte_offset) + ")"
                        : what),
        byte_offset_(byte_offset) {}
  std::uint64_t byte_offset() const { return byte_offset_; }

 private:
  std::uint64_t byte_offset_ = 0;
};

// Numerical trouble: degenerate back-off renormalization, NaN loss, ...
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace phraseadapt

#endif  // PHRASEADAPT_ERRORS_HPP_
