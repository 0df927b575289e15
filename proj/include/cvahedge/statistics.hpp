#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

namespace cvahedge {

struct Estimate {
    double value = 0.0;
    double std_error = 0.0;
    std::size_t n_paths = 0;
};

// Welford accumulator; feed samples in index order for reproducible sums.
class RunningStats {
public:
    void add(double x)
    {
        ++n_;
        const double d = x - mean_;
        mean_ += d / static_cast<double>(n_);
        m2_ += d * (x - mean_);
    }
    std::size_t count() const { return n_; }
    double mean() const { return mean_; }
    double variance() const { return n_ > 1 ? m2_ / static_cast<double>(n_ - 1) : 0.0; }
    double std_error() const { return n_ > 1 ? std::sqrt(variance() / static_cast<double>(n_)) : 0.0; }
    Estimate estimate() const { return {mean_, std_error(), n_}; }

private:
    std::size_t n_ = 0;
    double mean_ = 0.0;
    double m2_ = 0.0;
};

inline Estimate summarize(const std::vector<double>& samples)
{
    RunningStats s;
    for (double x : samples) s.add(x);
    return s.estimate();
}

// |a - b| within k combined standard errors, plus an absolute floor for
// roundoff when both estimates have zero variance.
inline bool agree(const Estimate& a, const Estimate& b, double k = 3.0, double floor = 1e-12)
{
    const double se = std::sqrt(a.std_error * a.std_error + b.std_error * b.std_error);
    return std::abs(a.value - b.value) <= k * se + floor;
}

inline bool agree(const Estimate& a, double exact, double k = 3.0, double floor = 1e-12)
{
    return std::abs(a.value - exact) <= k * a.std_error + floor;
}

}  // namespace cvahedge
