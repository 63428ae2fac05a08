#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace wpl {

/// Running mean and co-moment matrix (Welford), mergeable (Chan et al.).
template <typename Scalar, int Dim>
class MomentAccumulator {
public:
    using Vector = Eigen::Matrix<Scalar, Dim, 1>;
    using Matrix = Eigen::Matrix<Scalar, Dim, Dim>;

    MomentAccumulator() : mean_(Vector::Zero()), comoment_(Matrix::Zero()) {}

    void add(const Vector& x) {
        ++count_;
        const Vector delta = x - mean_;
        mean_ += delta / static_cast<Scalar>(count_);
        comoment_.noalias() += delta * (x - mean_).transpose();
    }

    void merge(const MomentAccumulator& other) {
        if (other.count_ == 0) return;
        if (count_ == 0) {
            *this = other;
            return;
        }
        const auto n = static_cast<Scalar>(count_ + other.count_);
        const Vector delta = other.mean_ - mean_;
        const Scalar wa = static_cast<Scalar>(count_), wb = static_cast<Scalar>(other.count_);
        mean_ += delta * (wb / n);
        comoment_ += other.comoment_ + delta * delta.transpose() * (wa * wb / n);
        count_ += other.count_;
    }

    std::size_t count() const noexcept { return count_; }
    const Vector& mean() const noexcept { return mean_; }

    /// Unbiased sample covariance; zero with fewer than two samples.
    Matrix covariance() const {
        if (count_ < 2) return Matrix::Zero();
        return comoment_ / static_cast<Scalar>(count_ - 1);
    }

    /// Standard errors of the component means.
    Vector std_error() const {
        if (count_ < 2) return Vector::Zero();
        return (covariance().diagonal().array().max(Scalar(0)) / static_cast<Scalar>(count_)).sqrt();
    }

private:
    std::size_t count_ = 0;
    Vector mean_;
    Matrix comoment_;
};

using ScalarMoments = MomentAccumulator<double, 1>;

/// Samples are processed in blocks of this size; results never depend on
/// how blocks are distributed over threads.
inline constexpr std::size_t kSampleBlock = 1024;

/// Fixed-size worker pool handle. threads == 0 is treated as 1.
class Executor {
public:
    explicit Executor(unsigned threads = 1) : threads_(std::max(1u, threads)) {}

    unsigned threads() const noexcept { return threads_; }

    /// Calls body(b) for b in [0, blocks), each exactly once. Every block runs;
    /// afterwards the exception of the lowest failing block is rethrown.
    template <typename Body>
    void for_blocks(std::size_t blocks, Body&& body) const {
        if (blocks == 0) return;
        const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(threads_, blocks));
        std::vector<std::exception_ptr> errors(blocks);
        std::atomic<std::size_t> next{0};
        const auto work = [&] {
            for (;;) {
                const std::size_t b = next.fetch_add(1);
                if (b >= blocks) return;
                try {
                    body(b);
                } catch (...) {
                    errors[b] = std::current_exception();
                }
            }
        };
        if (workers == 1) {
            work();
        } else {
            std::vector<std::thread> pool;
            pool.reserve(workers);
            for (unsigned i = 0; i < workers; ++i) pool.emplace_back(work);
            for (auto& t : pool) t.join();
        }
        for (auto& e : errors)
            if (e) std::rethrow_exception(e);
    }

private:
    unsigned threads_;
};

/// Combines per-block results by a fixed pairwise tree: (0,1), (2,3), ... then
/// the same on the survivors. The merge order depends only on the count.
template <typename Acc>
Acc pairwise_merge(std::vector<Acc> parts) {
    if (parts.empty()) return Acc{};
    while (parts.size() > 1) {
        std::vector<Acc> next;
        next.reserve((parts.size() + 1) / 2);
        for (std::size_t i = 0; i + 1 < parts.size(); i += 2) {
            parts[i].merge(parts[i + 1]);
            next.push_back(std::move(parts[i]));
        }
        if (parts.size() % 2 == 1) next.push_back(std::move(parts.back()));
        parts = std::move(next);
    }
    return std::move(parts.front());
}

/// Sums sample(i, acc) over i in [0, n) into blocks of kSampleBlock and merges
/// them deterministically. Acc needs a default constructor and merge().
template <typename Acc, typename Sample>
Acc parallel_accumulate(const Executor& exec, std::size_t n, Sample&& sample) {
    const std::size_t blocks = (n + kSampleBlock - 1) / kSampleBlock;
    std::vector<Acc> parts(blocks);
    exec.for_blocks(blocks, [&](std::size_t b) {
        Acc acc{};
        const std::size_t end = std::min(n, (b + 1) * kSampleBlock);
        for (std::size_t i = b * kSampleBlock; i < end; ++i) sample(i, acc);
        parts[b] = std::move(acc);
    });
    return pairwise_merge(std::move(parts));
}

/// Block-level variant: block(begin, end, acc) handles a whole block, which
/// lets callers keep scratch buffers per block.
template <typename Acc, typename Block>
Acc parallel_accumulate_blocks(const Executor& exec, std::size_t n, Block&& block) {
    const std::size_t blocks = (n + kSampleBlock - 1) / kSampleBlock;
    std::vector<Acc> parts(blocks);
    exec.for_blocks(blocks, [&](std::size_t b) {
        Acc acc{};
        block(b * kSampleBlock, std::min(n, (b + 1) * kSampleBlock), acc);
        parts[b] = std::move(acc);
    });
    return pairwise_merge(std::move(parts));
}

}  // namespace wpl
