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
// Small numeric helpers: compensated summation and the number-to-text
// conventions used across file formats.

#ifndef PHRASEADAPT_NUMERIC_HPP_
#define PHRASEADAPT_NUMERIC_HPP_

#include <cmath>
#include <string>

namespace phraseadapt {

// Kahan-Babuska compensated accumulator.  Probability masses are summed in
// linear space and individual terms can differ by many orders of magnitude.
class KahanSum {
 public:
  void add(double x) {
    double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x))
      comp_ += (sum_ - t) + x;
    else
      comp_ += (x - t) + sum_;
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

// 10^lp with a floor for finite exponents that underflow double range.
// Keeps "absent" (exact 0) distinguishable from "present but tiny".
inline double pow10_floored(double lp, double floor_value = 1e-300) {
  double v = std::pow(10.0, lp);
  if (v == 0.0 && std::isfinite(lp)) return floor_value;
  return v;
}

// Shortest decimal that parses back to the same double (phrase-table scores).
std::string format_shortest(double value);

// %.7g -- ARPA log probabilities and back-off weights.
std::string format_log10(double value);

// %.12g -- ranked scores and NN feature columns.
std::string format_score12(double value);

}  // namespace phraseadapt

#endif  // PHRASEADAPT_NUMERIC_HPP_
