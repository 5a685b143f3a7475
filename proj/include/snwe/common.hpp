#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace snwe {

/// Base error. Carries the name of the module that raised it so the CLI can
/// report provenance.
class Error : public std::runtime_error {
public:
    Error(std::string module, const std::string& what)
        : std::runtime_error(module + ": " + what), module_(std::move(module)) {}

    const std::string& module() const noexcept { return module_; }

private:
    std::string module_;
};

/// Argument outside the admissible set of an operation (q > p, aliasing grid,
/// basis mismatch, ...).
class DomainError : public Error {
public:
    using Error::Error;
};

/// Floating-point range exceeded (e^{alpha u^2} beyond the overflow clamp).
class RangeError : public Error {
public:
    using Error::Error;
};

/// A mathematical precondition of the model is violated, e.g. the H_A ball
/// constraint of the Lipschitz estimate.
class PreconditionError : public Error {
public:
    using Error::Error;
};

/// Picard iteration stopped contracting.
class NonContractionError : public Error {
public:
    using Error::Error;
};

/// Runs fn(i) for i in [0, count) on `threads` workers. Each index is handled
/// exactly once; callers write results into pre-sized slots so the output is
/// independent of the worker count.
template <typename Fn>
void parallel_for(std::size_t count, std::size_t threads, Fn&& fn)
{
    if (threads <= 1 || count <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    threads = std::min(threads, count);
    std::vector<std::thread> pool;
    pool.reserve(threads);
    std::exception_ptr failure;
    std::mutex failure_mutex;
    for (std::size_t w = 0; w < threads; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (std::size_t i = w; i < count; i += threads) fn(i);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

/// Pairwise (cascade) summation. Order is fixed by the input order only.
double pairwise_sum(const double* data, std::size_t n);

inline double pairwise_sum(const std::vector<double>& v) { return pairwise_sum(v.data(), v.size()); }

}  // namespace snwe

namespace snwe {

/// Shortest round-trippable decimal form (std::to_chars); used for every CSV cell
/// so outputs are byte-stable.
std::string format_double(double v);

}  // namespace snwe
