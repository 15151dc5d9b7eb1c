#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "eav/errors.hpp"

namespace eav {

/// Ordered list of nonnegative extents. Rank >= 1; a zero extent is only
/// legal for empty tensors.
class Shape {
public:
    Shape() = default;
    Shape(std::initializer_list<std::size_t> dims) : dims_(dims) {}
    explicit Shape(std::vector<std::size_t> dims) : dims_(std::move(dims)) {}

    std::size_t rank() const { return dims_.size(); }
    std::size_t operator[](std::size_t i) const { return dims_[i]; }
    const std::vector<std::size_t>& dims() const { return dims_; }

    /// Product of extents.
    std::size_t count() const;

    std::string str() const;

    bool operator==(const Shape&) const = default;

private:
    std::vector<std::size_t> dims_;
};

/// Dense 64-bit float tensor, row-major, value semantics. Immutable by
/// convention once handed to an operation; operations return fresh tensors.
class Tensor {
public:
    Tensor() = default;
    Tensor(Shape shape, std::vector<double> data);

    static Tensor zeros(const Shape& shape);
    static Tensor full(const Shape& shape, double value);

    const Shape& shape() const { return shape_; }
    std::size_t size() const { return data_.size(); }

    std::span<const double> data() const { return data_; }
    std::span<double> data() { return data_; }

    double operator[](std::size_t i) const { return data_[i]; }
    double& operator[](std::size_t i) { return data_[i]; }

    /// Multi-index access, row-major.
    double at(std::span<const std::size_t> idx) const;
    double& at(std::span<const std::size_t> idx);
    double at(std::initializer_list<std::size_t> idx) const;
    double& at(std::initializer_list<std::size_t> idx);

private:
    std::size_t flat_index(std::span<const std::size_t> idx) const;

    Shape shape_;
    std::vector<double> data_;
};

/// Deterministic PRNG: splitmix64 state advance, Box-Muller for Gaussians.
/// Identical seed gives the identical draw sequence on every platform.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64();

    /// Uniform in (0, 1).
    double next_uniform();

    /// Standard normal draw.
    double next_gaussian();

private:
    std::uint64_t state_;
    double cached_gaussian_ = 0.0;
    bool has_cached_ = false;
};

/// Matrix product over the trailing two axes. Leading axes must match
/// exactly, or one operand may be rank 2 and is broadcast.
Tensor matmul(const Tensor& a, const Tensor& b);

/// Row-wise softmax over the trailing axis of exp(x / scale), stabilized by
/// row-max subtraction. Requires rank >= 2 and scale > 0.
Tensor softmax_rows(const Tensor& x, double scale);

/// Row-major relabeling; element count must be preserved.
Tensor reshape(const Tensor& x, const Shape& new_shape);

/// Strided reorder of axes; returns a materialized copy.
/// order[i] names the source axis that becomes output axis i.
Tensor permute(const Tensor& x, std::span<const std::size_t> order);
Tensor permute(const Tensor& x, std::initializer_list<std::size_t> order);

/// Seeded standard-normal tensor.
Tensor gaussian(Rng& rng, const Shape& shape);

/// sqrt(sum of squares). Empty tensor -> std::domain_error.
double l2_norm(const Tensor& x);

/// Arithmetic mean. Empty tensor -> std::domain_error.
double mean(const Tensor& x);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double c);

}  // namespace eav
