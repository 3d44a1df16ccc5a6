#include "ctcc/tensor.hpp"

#include <cmath>
#include <cstring>
#include <sstream>

namespace ctcc {

int64_t numel_of(const std::vector<int64_t>& shape) {
    int64_t n = 1;
    for (int64_t d : shape) {
        if (d < 0) throw std::invalid_argument("negative dimension in shape");
        n *= d;
    }
    return n;
}

Tensor::Tensor(std::vector<int64_t> s, std::vector<float> d) : shape(std::move(s)), data(std::move(d)) {
    if (numel_of(shape) != static_cast<int64_t>(data.size())) {
        throw std::invalid_argument("tensor data length " + std::to_string(data.size()) +
                                    " does not match shape " + shape_str());
    }
}

Tensor Tensor::zeros(std::vector<int64_t> shape) {
    const int64_t n = numel_of(shape);
    return Tensor(std::move(shape), std::vector<float>(static_cast<size_t>(n), 0.0f));
}

Tensor Tensor::full(std::vector<int64_t> shape, float value) {
    const int64_t n = numel_of(shape);
    return Tensor(std::move(shape), std::vector<float>(static_cast<size_t>(n), value));
}

Tensor Tensor::scalar(float value) { return Tensor({1}, {value}); }

Tensor Tensor::row(std::vector<float> values) {
    const int64_t n = static_cast<int64_t>(values.size());
    return Tensor({1, n}, std::move(values));
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<float>> rows) {
    const int64_t m = static_cast<int64_t>(rows.size());
    const int64_t n = m > 0 ? static_cast<int64_t>(rows.begin()->size()) : 0;
    std::vector<float> d;
    d.reserve(static_cast<size_t>(m * n));
    for (const auto& r : rows) {
        if (static_cast<int64_t>(r.size()) != n) throw std::invalid_argument("ragged matrix literal");
        d.insert(d.end(), r.begin(), r.end());
    }
    return Tensor({m, n}, std::move(d));
}

int64_t Tensor::rows() const {
    if (shape.size() != 2) throw std::invalid_argument("rows(): tensor is not 2-D, shape " + shape_str());
    return shape[0];
}

int64_t Tensor::cols() const {
    if (shape.size() != 2) throw std::invalid_argument("cols(): tensor is not 2-D, shape " + shape_str());
    return shape[1];
}

float& Tensor::at(int64_t r, int64_t c) { return data[static_cast<size_t>(r * cols() + c)]; }
float Tensor::at(int64_t r, int64_t c) const { return data[static_cast<size_t>(r * cols() + c)]; }

void Tensor::check_finite(const std::string& what) const {
    for (float v : data) {
        if (!std::isfinite(v)) {
            throw std::runtime_error("non-finite value produced by " + what);
        }
    }
}

std::string Tensor::shape_str() const {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
    os << "]";
    return os.str();
}

void matmul_into(const Tensor& a, const Tensor& b, Tensor& out) {
    const int64_t m = a.rows(), k = a.cols(), n = b.cols();
    if (b.rows() != k) {
        throw std::invalid_argument("matmul dimension mismatch: " + a.shape_str() + " x " + b.shape_str());
    }
    out = Tensor::zeros({m, n});
    const float* ap = a.data.data();
    const float* bp = b.data.data();
    float* op = out.data.data();
    // i-k-j order keeps both B and C accesses contiguous.
    for (int64_t i = 0; i < m; ++i) {
        for (int64_t kk = 0; kk < k; ++kk) {
            const float aik = ap[i * k + kk];
            const float* brow = bp + kk * n;
            float* orow = op + i * n;
            for (int64_t j = 0; j < n; ++j) orow[j] += aik * brow[j];
        }
    }
}

void matmul_nt_into(const Tensor& a, const Tensor& b, Tensor& out) {
    const int64_t m = a.rows(), k = a.cols(), n = b.rows();
    if (b.cols() != k) {
        throw std::invalid_argument("matmul_nt dimension mismatch: " + a.shape_str() + " x " + b.shape_str() + "^T");
    }
    out = Tensor::zeros({m, n});
    const float* ap = a.data.data();
    const float* bp = b.data.data();
    for (int64_t i = 0; i < m; ++i) {
        const float* arow = ap + i * k;
        for (int64_t j = 0; j < n; ++j) {
            const float* brow = bp + j * k;
            float acc = 0.0f;
            for (int64_t kk = 0; kk < k; ++kk) acc += arow[kk] * brow[kk];
            out.data[static_cast<size_t>(i * n + j)] = acc;
        }
    }
}

void matmul_tn_into(const Tensor& a, const Tensor& b, Tensor& out) {
    const int64_t k = a.rows(), m = a.cols(), n = b.cols();
    if (b.rows() != k) {
        throw std::invalid_argument("matmul_tn dimension mismatch: " + a.shape_str() + "^T x " + b.shape_str());
    }
    out = Tensor::zeros({m, n});
    const float* ap = a.data.data();
    const float* bp = b.data.data();
    float* op = out.data.data();
    for (int64_t kk = 0; kk < k; ++kk) {
        const float* arow = ap + kk * m;
        const float* brow = bp + kk * n;
        for (int64_t i = 0; i < m; ++i) {
            const float aki = arow[i];
            float* orow = op + i * n;
            for (int64_t j = 0; j < n; ++j) orow[j] += aki * brow[j];
        }
    }
}

bool bitwise_equal(const Tensor& a, const Tensor& b) {
    if (a.shape != b.shape) return false;
    if (a.data.empty()) return true;
    return std::memcmp(a.data.data(), b.data.data(), a.data.size() * sizeof(float)) == 0;
}

uint64_t content_hash(const Tensor& t) {
    uint64_t h = 1469598103934665603ull;
    auto mix = [&h](const unsigned char* p, size_t n) {
        for (size_t i = 0; i < n; ++i) {
            h ^= p[i];
            h *= 1099511628211ull;
        }
    };
    for (int64_t d : t.shape) mix(reinterpret_cast<const unsigned char*>(&d), sizeof(d));
    if (!t.data.empty()) {
        mix(reinterpret_cast<const unsigned char*>(t.data.data()), t.data.size() * sizeof(float));
    }
    return h;
}

}  // namespace ctcc
