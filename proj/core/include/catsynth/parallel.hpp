// Copyright (C) 2026 The catsynth Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace catsynth {

/// Runs body(i) for i in [0, n) on up to `threads` workers. Results must be
/// written to per-index slots by the caller, which keeps output order (and
/// therefore determinism) independent of scheduling. The exception from the
/// lowest failing index is rethrown.
template <typename Body>
void parallel_for(std::size_t n, std::size_t threads, Body&& body) {
    threads = std::max<std::size_t>(1, std::min(threads, n));
    std::vector<std::exception_ptr> errors(n);
    if (threads == 1) {
        for (std::size_t i = 0; i < n; ++i) {
            try {
                body(i);
            } catch (...) {
                errors[i] = std::current_exception();
                break;
            }
        }
    } else {
        std::atomic<std::size_t> next{0};
        std::atomic<bool> failed{false};
        {
            std::vector<std::jthread> workers;
            workers.reserve(threads);
            for (std::size_t t = 0; t < threads; ++t) {
                workers.emplace_back([&] {
                    for (std::size_t i = next++; i < n && !failed.load(); i = next++) {
                        try {
                            body(i);
                        } catch (...) {
                            errors[i] = std::current_exception();
                            failed = true;
                        }
                    }
                });
            }
        }
    }
    for (auto& e : errors) {
        if (e) {
            std::rethrow_exception(e);
        }
    }
}

/// Worker count used when a caller passes 0.
inline std::size_t default_threads() {
    return std::max(1u, std::thread::hardware_concurrency());
}

} // namespace catsynth
