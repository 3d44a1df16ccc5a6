#pragma once

#include <cstdint>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

namespace ctcc {

/// Dense row-major f32 tensor. Values are plain data: no graph bookkeeping
/// lives here (see tape.hpp for differentiable computation).
struct Tensor {
    std::vector<int64_t> shape;
    std::vector<float> data;

    Tensor() = default;
    Tensor(std::vector<int64_t> s, std::vector<float> d);

    static Tensor zeros(std::vector<int64_t> shape);
    static Tensor full(std::vector<int64_t> shape, float value);
    static Tensor scalar(float value);
    static Tensor row(std::vector<float> values);               // [1 x n]
    static Tensor matrix(std::initializer_list<std::initializer_list<float>> rows);

    int64_t numel() const { return static_cast<int64_t>(data.size()); }
    int64_t rows() const;
    int64_t cols() const;
    bool is_scalar() const { return numel() == 1; }
    bool same_shape(const Tensor& other) const { return shape == other.shape; }

    float& at(int64_t r, int64_t c);
    float at(int64_t r, int64_t c) const;

    /// Throws if any element is NaN or +/-Inf. `what` names the producing op.
    void check_finite(const std::string& what) const;

    std::string shape_str() const;
};

int64_t numel_of(const std::vector<int64_t>& shape);

/// C = A(m x k) * B(k x n). Plain kernel shared by tape ops and attacks.
void matmul_into(const Tensor& a, const Tensor& b, Tensor& out);
/// C = A(m x k) * B(n x k)^T.
void matmul_nt_into(const Tensor& a, const Tensor& b, Tensor& out);
/// C = A(k x m)^T * B(k x n).
void matmul_tn_into(const Tensor& a, const Tensor& b, Tensor& out);

bool bitwise_equal(const Tensor& a, const Tensor& b);

/// FNV-1a over shape and raw data bytes; used for mutation checks.
uint64_t content_hash(const Tensor& t);

}  // namespace ctcc
