#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "ctcc/tensor.hpp"

namespace ctcc {

/// Handle to a node on a Tape.
struct Var {
    int32_t id = -1;
    bool valid() const { return id >= 0; }
};

/// Reverse-mode tape. Nodes are appended in execution order, so creation
/// order is already a topological order; backward() walks it once in
/// reverse. Leaves either reference external tensors (parameters, frozen
/// constants) or own their value.
///
/// Every op checks its result for NaN/Inf and throws on the first
/// non-finite value, so a tape can never silently carry poisoned numbers.
class Tape {
public:
    /// Trainable leaf. The tensor is borrowed (not copied); after
    /// backward(), the gradient is accumulated into *grad_sink, which must
    /// stay alive and keep value's shape.
    Var param(const Tensor* value, Tensor* grad_sink);

    /// Frozen leaf borrowing external storage. No gradient flows into it.
    Var constant(const Tensor* value);

    /// Frozen leaf owned by the tape.
    Var constant_owned(Tensor value);

    Var matmul(Var a, Var b);     // [m x k] * [k x n]
    Var matmul_nt(Var a, Var b);  // [m x k] * [n x k]^T
    Var add(Var a, Var b);
    Var add_row(Var a, Var bias);  // bias [n] broadcast over the rows of a [m x n]
    Var mul(Var a, Var b);         // elementwise
    Var scale(Var a, float c);
    Var gather_rows(Var table, std::vector<int> ids);
    Var slice_cols(Var a, int64_t start, int64_t len);
    Var concat_cols(const std::vector<Var>& parts);
    Var layer_norm(Var x, Var gain, Var bias, float eps);
    Var gelu(Var x);
    /// Row-wise softmax over columns 0..r for row r; upper triangle is 0.
    Var causal_softmax(Var scores);
    /// Mean of -log softmax(logits)[t, targets[t]] over positions where
    /// mask[t] != 0. Throws "no supervised positions" on an all-zero mask.
    Var softmax_cross_entropy(Var logits, std::vector<int> targets, std::vector<uint8_t> mask);
    Var sum(Var a);

    const Tensor& value(Var v) const;

    /// Accumulates d(seed * loss)/d(param) into every param leaf's sink.
    /// loss must be scalar. Each node is visited exactly once.
    void backward(Var loss, float seed = 1.0f);

    size_t size() const { return records_.size(); }

private:
    struct Record {
        Tensor owned;
        const Tensor* external = nullptr;
        Tensor* grad_sink = nullptr;
        Tensor grad;  // lazily allocated; empty means "not reached"
        bool requires_grad = false;
        std::function<void(Tape&, const Tensor& upstream)> backprop;

        const Tensor& val() const { return external ? *external : owned; }
    };

    Var push(Record r, const char* what);
    const Tensor& val(Var v) const { return records_[static_cast<size_t>(v.id)].val(); }
    Tensor& grad_ref(Var v);
    bool needs_grad(Var v) const { return records_[static_cast<size_t>(v.id)].requires_grad; }
    void accumulate(Var v, const Tensor& g);

    std::vector<Record> records_;
};

/// Max over `n_samples` sampled coordinates of
///   |analytic - central_difference| / (|analytic| + denom_eps)
/// where central_difference = (f(theta + h e_i) - f(theta - h e_i)) / 2h.
/// The default denom_eps guards against the f32 round-off floor of the
/// difference quotient. Throws if f evaluates to a non-finite value.
double finite_diff_check(const std::function<double(const Tensor&)>& f, const Tensor& theta,
                         const Tensor& analytic_grad, double h, int n_samples, uint64_t seed,
                         double denom_eps = 1e-2);

}  // namespace ctcc
