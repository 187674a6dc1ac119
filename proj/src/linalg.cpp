#include "hwnn/linalg.hpp"

#include <cmath>

namespace hwnn {

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    Matrix m(rows.size(), rows.size() ? rows.begin()->size() : 0);
    std::size_t r = 0;
    for (const auto &row : rows) {
        if (row.size() != m.cols_) throw std::invalid_argument("from_rows: ragged rows");
        std::size_t c = 0;
        for (double v : row) m(r, c++) = v;
        ++r;
    }
    return m;
}

bool Matrix::all_finite() const {
    for (double v : data_)
        if (!std::isfinite(v)) return false;
    return true;
}

Matrix &Matrix::operator+=(const Matrix &other) {
    if (!same_shape(other)) throw_shape_error("+=", *this, other);
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
    return *this;
}

Matrix &Matrix::operator-=(const Matrix &other) {
    if (!same_shape(other)) throw_shape_error("-=", *this, other);
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
    return *this;
}

Matrix &Matrix::operator*=(double s) {
    for (double &v : data_) v *= s;
    return *this;
}

void throw_shape_error(const std::string &op, const Matrix &a, const Matrix &b) {
    throw std::invalid_argument("shape mismatch in " + op + ": " + std::to_string(a.rows()) +
                                "x" + std::to_string(a.cols()) + " vs " +
                                std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
}

Matrix matmul(const Matrix &a, const Matrix &b) {
    if (a.cols() != b.rows()) throw_shape_error("matmul", a, b);
    Matrix c(a.rows(), b.cols());
    // ikj order: the inner loop walks contiguous rows of b and c.
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double *crow = c.row_ptr(i);
        const double *arow = a.row_ptr(i);
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = arow[k];
            if (aik == 0.0) continue;
            const double *brow = b.row_ptr(k);
            for (std::size_t j = 0; j < b.cols(); ++j) crow[j] += aik * brow[j];
        }
    }
    return c;
}

Matrix matmul_nt(const Matrix &a, const Matrix &b) {
    if (a.cols() != b.cols()) throw_shape_error("matmul_nt", a, b);
    Matrix c(a.rows(), b.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const double *arow = a.row_ptr(i);
        double *crow = c.row_ptr(i);
        for (std::size_t j = 0; j < b.rows(); ++j) {
            const double *brow = b.row_ptr(j);
            double sum = 0.0;
            for (std::size_t k = 0; k < a.cols(); ++k) sum += arow[k] * brow[k];
            crow[j] = sum;
        }
    }
    return c;
}

Matrix matmul_tn(const Matrix &a, const Matrix &b) {
    if (a.rows() != b.rows()) throw_shape_error("matmul_tn", a, b);
    Matrix c(a.cols(), b.cols());
    for (std::size_t k = 0; k < a.rows(); ++k) {
        const double *arow = a.row_ptr(k);
        const double *brow = b.row_ptr(k);
        for (std::size_t i = 0; i < a.cols(); ++i) {
            const double aki = arow[i];
            if (aki == 0.0) continue;
            double *crow = c.row_ptr(i);
            for (std::size_t j = 0; j < b.cols(); ++j) crow[j] += aki * brow[j];
        }
    }
    return c;
}

Matrix transpose(const Matrix &a) {
    Matrix t(a.cols(), a.rows());
    for (std::size_t r = 0; r < a.rows(); ++r)
        for (std::size_t c = 0; c < a.cols(); ++c) t(c, r) = a(r, c);
    return t;
}

Matrix hadamard(const Matrix &a, const Matrix &b) {
    return zip(a, b, [](double x, double y) { return x * y; });
}

Matrix add(const Matrix &a, const Matrix &b) {
    return zip(a, b, [](double x, double y) { return x + y; });
}

Matrix sub(const Matrix &a, const Matrix &b) {
    return zip(a, b, [](double x, double y) { return x - y; });
}

Matrix scale(const Matrix &a, double s) {
    return map(a, [s](double x) { return x * s; });
}

namespace {

std::uint64_t splitmix64(std::uint64_t &x) {
    x += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

} // namespace

Rng::Rng(std::uint64_t seed) : seed_(seed) {
    std::uint64_t s = seed;
    for (auto &word : state_) word = splitmix64(s);
}

std::uint64_t Rng::next_u64() {
    const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
}

double Rng::next_uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) {
    return lo + (hi - lo) * next_uniform();
}

std::uint64_t Rng::next_below(std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("next_below: n must be > 0");
    std::uint64_t mask = n - 1;
    mask |= mask >> 1;
    mask |= mask >> 2;
    mask |= mask >> 4;
    mask |= mask >> 8;
    mask |= mask >> 16;
    mask |= mask >> 32;
    std::uint64_t x;
    do {
        x = next_u64() & mask;
    } while (x >= n);
    return x;
}

Rng Rng::split(std::uint64_t stream_id) const {
    std::uint64_t s = seed_;
    std::uint64_t base = splitmix64(s);
    std::uint64_t child = base ^ (stream_id * 0xD6E8FEB86659FD93ULL + 0xA5A5A5A5A5A5A5A5ULL);
    return Rng(child);
}

std::vector<double> rng_uniform(Rng &rng, std::size_t n) {
    std::vector<double> out(n);
    for (auto &v : out) v = rng.next_uniform();
    return out;
}

} // namespace hwnn
