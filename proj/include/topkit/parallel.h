// Copyright 2026 The topkit Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef TOPKIT_PARALLEL_H_
#define TOPKIT_PARALLEL_H_

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace topkit {

// Calls fn(i) for every i in [0, n) on up to `jobs` threads. Results must be
// written to per-index slots by the caller. If any call throws, the
// exception of the lowest failing index is rethrown after all workers stop,
// so failures are reported identically for every job count.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t jobs, Fn&& fn) {
  jobs = std::max<std::size_t>(1, std::min(jobs, n));
  if (jobs == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> failed_index{n};
  std::mutex mu;
  std::exception_ptr failure;
  {
    std::vector<std::jthread> workers;
    workers.reserve(jobs);
    for (std::size_t w = 0; w < jobs; ++w) {
      workers.emplace_back([&] {
        for (;;) {
          std::size_t i = next.fetch_add(1);
          if (i >= n) return;
          // Indices below a known failure still run so the lowest one wins.
          if (i > failed_index.load()) return;
          try {
            fn(i);
          } catch (...) {
            std::lock_guard<std::mutex> lock(mu);
            if (i < failed_index.load()) {
              failed_index.store(i);
              failure = std::current_exception();
            }
          }
        }
      });
    }
  }
  if (failure) std::rethrow_exception(failure);
}

}  // namespace topkit

#endif  // TOPKIT_PARALLEL_H_
