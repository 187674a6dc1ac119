#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

namespace hwnn {

// Dense row-major matrix of doubles. Batches are stored as rows.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double &operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    double *row_ptr(std::size_t r) { return data_.data() + r * cols_; }
    const double *row_ptr(std::size_t r) const { return data_.data() + r * cols_; }

    std::vector<double> &data() { return data_; }
    const std::vector<double> &data() const { return data_; }

    bool same_shape(const Matrix &other) const {
        return rows_ == other.rows_ && cols_ == other.cols_;
    }
    bool all_finite() const;

    Matrix &operator+=(const Matrix &other);
    Matrix &operator-=(const Matrix &other);
    Matrix &operator*=(double s);

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

[[noreturn]] void throw_shape_error(const std::string &op, const Matrix &a, const Matrix &b);

// c = a * b
Matrix matmul(const Matrix &a, const Matrix &b);
// c = a * b^T  (rows of both operands are traversed contiguously)
Matrix matmul_nt(const Matrix &a, const Matrix &b);
// c = a^T * b
Matrix matmul_tn(const Matrix &a, const Matrix &b);

Matrix transpose(const Matrix &a);

// Elementwise map/zip. F is double -> double, G is (double, double) -> double.
template <typename F>
Matrix map(const Matrix &a, F f) {
    Matrix out(a.rows(), a.cols());
    const auto &src = a.data();
    auto &dst = out.data();
    for (std::size_t i = 0; i < src.size(); ++i) dst[i] = f(src[i]);
    return out;
}

template <typename G>
Matrix zip(const Matrix &a, const Matrix &b, G g) {
    if (!a.same_shape(b)) throw_shape_error("zip", a, b);
    Matrix out(a.rows(), a.cols());
    const auto &pa = a.data();
    const auto &pb = b.data();
    auto &dst = out.data();
    for (std::size_t i = 0; i < pa.size(); ++i) dst[i] = g(pa[i], pb[i]);
    return out;
}

Matrix hadamard(const Matrix &a, const Matrix &b);
Matrix add(const Matrix &a, const Matrix &b);
Matrix sub(const Matrix &a, const Matrix &b);
Matrix scale(const Matrix &a, double s);

// xoshiro256++ stream seeded through splitmix64. Identical seeds produce
// identical streams on every platform; stream advance is the only mutation.
class Rng {
public:
    explicit Rng(std::uint64_t seed);

    std::uint64_t next_u64();
    // Uniform in [0, 1), 53 mantissa bits.
    double next_uniform();
    double uniform(double lo, double hi);
    // Uniform integer in [0, n), unbiased (power-of-two mask + rejection).
    std::uint64_t next_below(std::uint64_t n);

    // Independent child stream derived from the original seed and a stream id.
    // Derivation does not depend on how far this stream has advanced.
    Rng split(std::uint64_t stream_id) const;

    std::uint64_t seed() const { return seed_; }

    template <typename T>
    void shuffle(std::vector<T> &v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(next_below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    static constexpr const char *algorithm = "xoshiro256++";

private:
    std::uint64_t seed_;
    std::uint64_t state_[4];
};

std::vector<double> rng_uniform(Rng &rng, std::size_t n);

} // namespace hwnn
