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

#ifndef PHRASEADAPT_PARALLEL_HPP_
#define PHRASEADAPT_PARALLEL_HPP_

#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace phraseadapt {

// Runs fn(begin, end) over contiguous chunks of [0, n).  Results must be
// written by index so the outcome is identical for any thread count.
template <typename Fn>
void parallel_chunks(std::size_t n, int threads, Fn fn) {
  if (threads <= 1 || n < 2) {
    if (n > 0) fn(std::size_t{0}, n);
    return;
  }
  std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(threads), n);
  std::size_t chunk = (n + workers - 1) / workers;
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    std::size_t begin = w * chunk;
    std::size_t end = std::min(n, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back([&, w, begin, end] {
      try {
        fn(begin, end);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (std::thread& t : pool) t.join();
  for (std::exception_ptr& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace phraseadapt

#endif  // PHRASEADAPT_PARALLEL_HPP_
