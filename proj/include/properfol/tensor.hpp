#pragma once

#include <cstddef>
#include <vector>

#include "spacetime.hpp"

namespace properfol {

/// Real tensor with `rank` Minkowski indices, stored row-major with the first
/// index most significant. Rank 0 holds a single scalar.
class MinkowskiTensor {
public:
    MinkowskiTensor() : rank_(0), data_(1, 0.0) {}
    explicit MinkowskiTensor(std::size_t rank) : rank_(rank), data_(std::size_t{1} << (2 * rank), 0.0) {}

    std::size_t rank() const { return rank_; }
    std::size_t size() const { return data_.size(); }

    double& operator[](std::size_t flat) { return data_[flat]; }
    double operator[](std::size_t flat) const { return data_[flat]; }

    /// Index tuple, first entry most significant.
    template <class Indices>
    double at(const Indices& mu) const {
        return data_[flatten(mu)];
    }

    template <class Indices>
    std::size_t flatten(const Indices& mu) const {
        std::size_t f = 0;
        for (std::size_t i = 0; i < rank_; ++i) f = 4 * f + static_cast<std::size_t>(mu[i]);
        return f;
    }

    /// Index of slot `slot` (0-based) inside a flat offset.
    std::size_t index_of(std::size_t flat, std::size_t slot) const {
        return (flat >> (2 * (rank_ - 1 - slot))) & 3u;
    }

    const std::vector<double>& data() const { return data_; }
    std::vector<double>& data() { return data_; }

    double max_abs() const {
        double m = 0.0;
        for (double v : data_) m = std::max(m, std::abs(v));
        return m;
    }

private:
    std::size_t rank_;
    std::vector<double> data_;
};

/// Complex tensor with one spin index per particle (dimension d_a each).
class SpinTensor {
public:
    SpinTensor() = default;
    explicit SpinTensor(std::vector<int> dims) : dims_(std::move(dims)) {
        std::size_t total = 1;
        for (int d : dims_) total *= static_cast<std::size_t>(d);
        data_.assign(total, complex{});
    }

    const std::vector<int>& dims() const { return dims_; }
    std::size_t size() const { return data_.size(); }
    complex& operator[](std::size_t i) { return data_[i]; }
    const complex& operator[](std::size_t i) const { return data_[i]; }
    const std::vector<complex>& data() const { return data_; }

    /// Single component of an all-scalar tensor.
    complex scalar() const { return data_.at(0); }

    double norm() const {
        double s = 0.0;
        for (const auto& v : data_) s += std::norm(v);
        return std::sqrt(s);
    }

    SpinTensor& operator+=(const SpinTensor& o) {
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
        return *this;
    }

private:
    std::vector<int> dims_;
    std::vector<complex> data_;
};

} // namespace properfol
