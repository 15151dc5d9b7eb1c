#include "eav/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace eav {

std::size_t Shape::count() const {
    std::size_t n = 1;
    for (std::size_t d : dims_) n *= d;
    return n;
}

std::string Shape::str() const {
    std::ostringstream os;
    os << '(';
    for (std::size_t i = 0; i < dims_.size(); ++i) {
        if (i) os << ", ";
        os << dims_[i];
    }
    os << ')';
    return os.str();
}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.size() != shape_.count()) {
        throw DimensionError("data length " + std::to_string(data_.size()) +
                             " does not match shape " + shape_.str());
    }
}

Tensor Tensor::zeros(const Shape& shape) {
    return Tensor(shape, std::vector<double>(shape.count(), 0.0));
}

Tensor Tensor::full(const Shape& shape, double value) {
    return Tensor(shape, std::vector<double>(shape.count(), value));
}

std::size_t Tensor::flat_index(std::span<const std::size_t> idx) const {
    if (idx.size() != shape_.rank()) {
        throw DimensionError("index rank " + std::to_string(idx.size()) +
                             " does not match tensor shape " + shape_.str());
    }
    std::size_t flat = 0;
    for (std::size_t i = 0; i < idx.size(); ++i) {
        flat = flat * shape_[i] + idx[i];
    }
    return flat;
}

double Tensor::at(std::span<const std::size_t> idx) const {
    return data_[flat_index(idx)];
}

double& Tensor::at(std::span<const std::size_t> idx) {
    return data_[flat_index(idx)];
}

double Tensor::at(std::initializer_list<std::size_t> idx) const {
    return at(std::span<const std::size_t>(idx.begin(), idx.size()));
}

double& Tensor::at(std::initializer_list<std::size_t> idx) {
    return at(std::span<const std::size_t>(idx.begin(), idx.size()));
}

std::uint64_t Rng::next_u64() {
    // splitmix64 (Steele et al.)
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

double Rng::next_uniform() {
    // 53-bit mantissa, shifted into (0, 1) by adding half an ulp step.
    const std::uint64_t bits = next_u64() >> 11;
    return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
}

double Rng::next_gaussian() {
    if (has_cached_) {
        has_cached_ = false;
        return cached_gaussian_;
    }
    const double u1 = next_uniform();
    const double u2 = next_uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    cached_gaussian_ = r * std::sin(theta);
    has_cached_ = true;
    return r * std::cos(theta);
}

namespace {

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw DimensionError(std::string(op) + ": shape " + a.shape().str() +
                             " vs " + b.shape().str());
    }
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
    const Shape& sa = a.shape();
    const Shape& sb = b.shape();
    if (sa.rank() < 2 || sb.rank() < 2) {
        throw DimensionError("matmul: operands must have rank >= 2, got " +
                             sa.str() + " and " + sb.str());
    }
    const std::size_t m = sa[sa.rank() - 2];
    const std::size_t k = sa[sa.rank() - 1];
    const std::size_t kb = sb[sb.rank() - 2];
    const std::size_t n = sb[sb.rank() - 1];
    if (k != kb) {
        throw DimensionError("matmul: inner dimensions differ, " + sa.str() +
                             " x " + sb.str());
    }

    // Leading axes: equal, or one side rank-2 broadcasts.
    std::vector<std::size_t> lead;
    if (sa.rank() == 2 && sb.rank() == 2) {
        // no batch
    } else if (sb.rank() == 2) {
        lead.assign(sa.dims().begin(), sa.dims().end() - 2);
    } else if (sa.rank() == 2) {
        lead.assign(sb.dims().begin(), sb.dims().end() - 2);
    } else {
        if (std::vector<std::size_t>(sa.dims().begin(), sa.dims().end() - 2) !=
            std::vector<std::size_t>(sb.dims().begin(), sb.dims().end() - 2)) {
            throw DimensionError("matmul: leading dimensions differ, " +
                                 sa.str() + " x " + sb.str());
        }
        lead.assign(sa.dims().begin(), sa.dims().end() - 2);
    }

    std::size_t batch = 1;
    for (std::size_t d : lead) batch *= d;

    std::vector<std::size_t> out_dims = lead;
    out_dims.push_back(m);
    out_dims.push_back(n);
    Tensor out = Tensor::zeros(Shape(out_dims));

    const bool a_batched = sa.rank() > 2;
    const bool b_batched = sb.rank() > 2;
    const double* pa = a.data().data();
    const double* pb = b.data().data();
    double* po = out.data().data();

    for (std::size_t g = 0; g < batch; ++g) {
        const double* ag = pa + (a_batched ? g * m * k : 0);
        const double* bg = pb + (b_batched ? g * k * n : 0);
        double* og = po + g * m * n;
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t l = 0; l < k; ++l) {
                const double av = ag[i * k + l];
                if (av == 0.0) continue;
                const double* brow = bg + l * n;
                double* orow = og + i * n;
                for (std::size_t j = 0; j < n; ++j) {
                    orow[j] += av * brow[j];
                }
            }
        }
    }
    return out;
}

Tensor softmax_rows(const Tensor& x, double scale) {
    if (!(scale > 0.0)) {
        throw ParameterError("softmax_rows: scale must be positive, got " +
                             std::to_string(scale));
    }
    if (x.shape().rank() < 2) {
        throw DimensionError("softmax_rows: rank >= 2 required, got shape " +
                             x.shape().str());
    }
    const std::size_t cols = x.shape()[x.shape().rank() - 1];
    const std::size_t rows = x.size() / cols;

    Tensor out = Tensor::zeros(x.shape());
    const double* px = x.data().data();
    double* po = out.data().data();
    for (std::size_t r = 0; r < rows; ++r) {
        const double* row = px + r * cols;
        double* orow = po + r * cols;
        double mx = row[0] / scale;
        for (std::size_t j = 1; j < cols; ++j) {
            mx = std::max(mx, row[j] / scale);
        }
        double sum = 0.0;
        for (std::size_t j = 0; j < cols; ++j) {
            orow[j] = std::exp(row[j] / scale - mx);
            sum += orow[j];
        }
        for (std::size_t j = 0; j < cols; ++j) {
            orow[j] /= sum;
        }
    }
    return out;
}

Tensor reshape(const Tensor& x, const Shape& new_shape) {
    if (new_shape.count() != x.size()) {
        throw DimensionError("reshape: element count mismatch, " +
                             x.shape().str() + " -> " + new_shape.str());
    }
    return Tensor(new_shape,
                  std::vector<double>(x.data().begin(), x.data().end()));
}

Tensor permute(const Tensor& x, std::span<const std::size_t> order) {
    const std::size_t rank = x.shape().rank();
    if (order.size() != rank) {
        throw DimensionError("permute: order length " +
                             std::to_string(order.size()) +
                             " does not match rank of " + x.shape().str());
    }
    std::vector<bool> seen(rank, false);
    for (std::size_t ax : order) {
        if (ax >= rank || seen[ax]) {
            throw DimensionError("permute: invalid axis permutation");
        }
        seen[ax] = true;
    }

    std::vector<std::size_t> out_dims(rank);
    for (std::size_t i = 0; i < rank; ++i) {
        out_dims[i] = x.shape()[order[i]];
    }
    Tensor out = Tensor::zeros(Shape(out_dims));

    // Source strides, row-major.
    std::vector<std::size_t> src_stride(rank, 1);
    for (std::size_t i = rank; i-- > 1;) {
        src_stride[i - 1] = src_stride[i] * x.shape()[i];
    }

    std::vector<std::size_t> idx(rank, 0);
    const double* px = x.data().data();
    double* po = out.data().data();
    const std::size_t total = out.size();
    for (std::size_t flat = 0; flat < total; ++flat) {
        std::size_t src = 0;
        for (std::size_t i = 0; i < rank; ++i) {
            src += idx[i] * src_stride[order[i]];
        }
        po[flat] = px[src];
        for (std::size_t i = rank; i-- > 0;) {
            if (++idx[i] < out_dims[i]) break;
            idx[i] = 0;
        }
    }
    return out;
}

Tensor permute(const Tensor& x, std::initializer_list<std::size_t> order) {
    return permute(x, std::span<const std::size_t>(order.begin(), order.size()));
}

Tensor gaussian(Rng& rng, const Shape& shape) {
    std::vector<double> data(shape.count());
    for (double& v : data) v = rng.next_gaussian();
    return Tensor(shape, std::move(data));
}

double l2_norm(const Tensor& x) {
    if (x.size() == 0) throw std::domain_error("l2_norm of empty tensor");
    double s = 0.0;
    for (double v : x.data()) s += v * v;
    return std::sqrt(s);
}

double mean(const Tensor& x) {
    if (x.size() == 0) throw std::domain_error("mean of empty tensor");
    double s = 0.0;
    for (double v : x.data()) s += v;
    return s / static_cast<double>(x.size());
}

Tensor add(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "add");
    Tensor out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += b[i];
    return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "sub");
    Tensor out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b[i];
    return out;
}

Tensor scale(const Tensor& x, double c) {
    Tensor out = x;
    for (double& v : out.data()) v *= c;
    return out;
}

}  // namespace eav
