#include "ctcc/tape.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "ctcc/rng.hpp"

namespace ctcc {

namespace {

constexpr float kInvSqrt2 = 0.70710678118654752440f;
constexpr float kInvSqrt2Pi = 0.39894228040143267794f;

void add_into(Tensor& dst, const Tensor& src) {
    for (size_t i = 0; i < dst.data.size(); ++i) dst.data[i] += src.data[i];
}

}  // namespace

Var Tape::push(Record r, const char* what) {
    r.val().check_finite(what);
    records_.push_back(std::move(r));
    return Var{static_cast<int32_t>(records_.size() - 1)};
}

Tensor& Tape::grad_ref(Var v) {
    Record& r = records_[static_cast<size_t>(v.id)];
    if (r.grad.numel() == 0) r.grad = Tensor::zeros(r.val().shape);
    return r.grad;
}

void Tape::accumulate(Var v, const Tensor& g) {
    add_into(grad_ref(v), g);
}

Var Tape::param(const Tensor* value, Tensor* grad_sink) {
    if (!value || !grad_sink) throw std::invalid_argument("param leaf requires value and grad sink");
    if (value->shape != grad_sink->shape) throw std::invalid_argument("param grad sink shape mismatch");
    Record r;
    r.external = value;
    r.grad_sink = grad_sink;
    r.requires_grad = true;
    return push(std::move(r), "param");
}

Var Tape::constant(const Tensor* value) {
    Record r;
    r.external = value;
    return push(std::move(r), "constant");
}

Var Tape::constant_owned(Tensor value) {
    Record r;
    r.owned = std::move(value);
    return push(std::move(r), "constant");
}

Var Tape::matmul(Var a, Var b) {
    const Tensor& av = val(a);
    const Tensor& bv = val(b);
    Record r;
    matmul_into(av, bv, r.owned);
    r.requires_grad = needs_grad(a) || needs_grad(b);
    if (r.requires_grad) {
        r.backprop = [a, b](Tape& t, const Tensor& g) {
            if (t.needs_grad(a)) {
                Tensor da;
                matmul_nt_into(g, t.val(b), da);  // G * B^T
                t.accumulate(a, da);
            }
            if (t.needs_grad(b)) {
                Tensor db;
                matmul_tn_into(t.val(a), g, db);  // A^T * G
                t.accumulate(b, db);
            }
        };
    }
    return push(std::move(r), "matmul");
}

Var Tape::matmul_nt(Var a, Var b) {
    const Tensor& av = val(a);
    const Tensor& bv = val(b);
    Record r;
    matmul_nt_into(av, bv, r.owned);
    r.requires_grad = needs_grad(a) || needs_grad(b);
    if (r.requires_grad) {
        r.backprop = [a, b](Tape& t, const Tensor& g) {
            if (t.needs_grad(a)) {
                Tensor da;
                matmul_into(g, t.val(b), da);  // G * B
                t.accumulate(a, da);
            }
            if (t.needs_grad(b)) {
                Tensor db;
                matmul_tn_into(g, t.val(a), db);  // G^T * A
                t.accumulate(b, db);
            }
        };
    }
    return push(std::move(r), "matmul_nt");
}

Var Tape::add(Var a, Var b) {
    const Tensor& av = val(a);
    const Tensor& bv = val(b);
    if (av.shape != bv.shape) {
        throw std::invalid_argument("add shape mismatch: " + av.shape_str() + " vs " + bv.shape_str());
    }
    Record r;
    r.owned = av;
    add_into(r.owned, bv);
    r.requires_grad = needs_grad(a) || needs_grad(b);
    if (r.requires_grad) {
        r.backprop = [a, b](Tape& t, const Tensor& g) {
            if (t.needs_grad(a)) t.accumulate(a, g);
            if (t.needs_grad(b)) t.accumulate(b, g);
        };
    }
    return push(std::move(r), "add");
}

Var Tape::add_row(Var a, Var bias) {
    const Tensor& av = val(a);
    const Tensor& bv = val(bias);
    const int64_t m = av.rows(), n = av.cols();
    if (bv.numel() != n) {
        throw std::invalid_argument("add_row bias length mismatch: " + bv.shape_str() + " for " + av.shape_str());
    }
    Record r;
    r.owned = av;
    for (int64_t i = 0; i < m; ++i)
        for (int64_t j = 0; j < n; ++j) r.owned.data[static_cast<size_t>(i * n + j)] += bv.data[static_cast<size_t>(j)];
    r.requires_grad = needs_grad(a) || needs_grad(bias);
    if (r.requires_grad) {
        r.backprop = [a, bias, m, n](Tape& t, const Tensor& g) {
            if (t.needs_grad(a)) t.accumulate(a, g);
            if (t.needs_grad(bias)) {
                Tensor db = Tensor::zeros(t.val(bias).shape);
                for (int64_t i = 0; i < m; ++i)
                    for (int64_t j = 0; j < n; ++j) db.data[static_cast<size_t>(j)] += g.data[static_cast<size_t>(i * n + j)];
                t.accumulate(bias, db);
            }
        };
    }
    return push(std::move(r), "add_row");
}

Var Tape::mul(Var a, Var b) {
    const Tensor& av = val(a);
    const Tensor& bv = val(b);
    if (av.shape != bv.shape) {
        throw std::invalid_argument("mul shape mismatch: " + av.shape_str() + " vs " + bv.shape_str());
    }
    Record r;
    r.owned = av;
    for (size_t i = 0; i < r.owned.data.size(); ++i) r.owned.data[i] *= bv.data[i];
    r.requires_grad = needs_grad(a) || needs_grad(b);
    if (r.requires_grad) {
        r.backprop = [a, b](Tape& t, const Tensor& g) {
            if (t.needs_grad(a)) {
                Tensor da = g;
                for (size_t i = 0; i < da.data.size(); ++i) da.data[i] *= t.val(b).data[i];
                t.accumulate(a, da);
            }
            if (t.needs_grad(b)) {
                Tensor db = g;
                for (size_t i = 0; i < db.data.size(); ++i) db.data[i] *= t.val(a).data[i];
                t.accumulate(b, db);
            }
        };
    }
    return push(std::move(r), "mul");
}

Var Tape::scale(Var a, float c) {
    Record r;
    r.owned = val(a);
    for (float& v : r.owned.data) v *= c;
    r.requires_grad = needs_grad(a);
    if (r.requires_grad) {
        r.backprop = [a, c](Tape& t, const Tensor& g) {
            Tensor da = g;
            for (float& v : da.data) v *= c;
            t.accumulate(a, da);
        };
    }
    return push(std::move(r), "scale");
}

Var Tape::gather_rows(Var table, std::vector<int> ids) {
    const Tensor& tv = val(table);
    const int64_t v_rows = tv.rows(), d = tv.cols();
    const int64_t t_len = static_cast<int64_t>(ids.size());
    Record r;
    r.owned = Tensor::zeros({t_len, d});
    for (int64_t t = 0; t < t_len; ++t) {
        const int id = ids[static_cast<size_t>(t)];
        if (id < 0 || id >= v_rows) throw std::invalid_argument("gather_rows: id " + std::to_string(id) + " out of range");
        for (int64_t j = 0; j < d; ++j) r.owned.data[static_cast<size_t>(t * d + j)] = tv.data[static_cast<size_t>(id * d + j)];
    }
    r.requires_grad = needs_grad(table);
    if (r.requires_grad) {
        r.backprop = [table, ids = std::move(ids), d](Tape& t, const Tensor& g) {
            Tensor dt = Tensor::zeros(t.val(table).shape);
            for (size_t pos = 0; pos < ids.size(); ++pos) {
                const int64_t id = ids[pos];
                for (int64_t j = 0; j < d; ++j)
                    dt.data[static_cast<size_t>(id * d + j)] += g.data[pos * static_cast<size_t>(d) + static_cast<size_t>(j)];
            }
            t.accumulate(table, dt);
        };
    }
    return push(std::move(r), "gather_rows");
}

Var Tape::slice_cols(Var a, int64_t start, int64_t len) {
    const Tensor& av = val(a);
    const int64_t m = av.rows(), n = av.cols();
    if (start < 0 || len <= 0 || start + len > n) throw std::invalid_argument("slice_cols out of range");
    Record r;
    r.owned = Tensor::zeros({m, len});
    for (int64_t i = 0; i < m; ++i)
        for (int64_t j = 0; j < len; ++j)
            r.owned.data[static_cast<size_t>(i * len + j)] = av.data[static_cast<size_t>(i * n + start + j)];
    r.requires_grad = needs_grad(a);
    if (r.requires_grad) {
        r.backprop = [a, start, len, m, n](Tape& t, const Tensor& g) {
            Tensor da = Tensor::zeros(t.val(a).shape);
            for (int64_t i = 0; i < m; ++i)
                for (int64_t j = 0; j < len; ++j)
                    da.data[static_cast<size_t>(i * n + start + j)] = g.data[static_cast<size_t>(i * len + j)];
            t.accumulate(a, da);
        };
    }
    return push(std::move(r), "slice_cols");
}

Var Tape::concat_cols(const std::vector<Var>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat_cols: empty input");
    const int64_t m = val(parts[0]).rows();
    int64_t total = 0;
    bool rg = false;
    for (Var p : parts) {
        if (val(p).rows() != m) throw std::invalid_argument("concat_cols row mismatch");
        total += val(p).cols();
        rg = rg || needs_grad(p);
    }
    Record r;
    r.owned = Tensor::zeros({m, total});
    int64_t off = 0;
    for (Var p : parts) {
        const Tensor& pv = val(p);
        const int64_t w = pv.cols();
        for (int64_t i = 0; i < m; ++i)
            for (int64_t j = 0; j < w; ++j)
                r.owned.data[static_cast<size_t>(i * total + off + j)] = pv.data[static_cast<size_t>(i * w + j)];
        off += w;
    }
    r.requires_grad = rg;
    if (rg) {
        r.backprop = [parts, m, total](Tape& t, const Tensor& g) {
            int64_t off = 0;
            for (Var p : parts) {
                const int64_t w = t.val(p).cols();
                if (t.needs_grad(p)) {
                    Tensor dp = Tensor::zeros({m, w});
                    for (int64_t i = 0; i < m; ++i)
                        for (int64_t j = 0; j < w; ++j)
                            dp.data[static_cast<size_t>(i * w + j)] = g.data[static_cast<size_t>(i * total + off + j)];
                    t.accumulate(p, dp);
                }
                off += w;
            }
        };
    }
    return push(std::move(r), "concat_cols");
}

Var Tape::layer_norm(Var x, Var gain, Var bias, float eps) {
    const Tensor& xv = val(x);
    const Tensor& gv = val(gain);
    const Tensor& bv = val(bias);
    const int64_t m = xv.rows(), n = xv.cols();
    if (gv.numel() != n || bv.numel() != n) throw std::invalid_argument("layer_norm gain/bias length mismatch");
    Record r;
    r.owned = Tensor::zeros({m, n});
    Tensor xhat = Tensor::zeros({m, n});
    Tensor inv_std = Tensor::zeros({m});
    for (int64_t i = 0; i < m; ++i) {
        double mean = 0.0;
        for (int64_t j = 0; j < n; ++j) mean += xv.data[static_cast<size_t>(i * n + j)];
        mean /= static_cast<double>(n);
        double var = 0.0;
        for (int64_t j = 0; j < n; ++j) {
            const double d = xv.data[static_cast<size_t>(i * n + j)] - mean;
            var += d * d;
        }
        var /= static_cast<double>(n);
        const float is = static_cast<float>(1.0 / std::sqrt(var + eps));
        inv_std.data[static_cast<size_t>(i)] = is;
        for (int64_t j = 0; j < n; ++j) {
            const float xh = (xv.data[static_cast<size_t>(i * n + j)] - static_cast<float>(mean)) * is;
            xhat.data[static_cast<size_t>(i * n + j)] = xh;
            r.owned.data[static_cast<size_t>(i * n + j)] = gv.data[static_cast<size_t>(j)] * xh + bv.data[static_cast<size_t>(j)];
        }
    }
    r.requires_grad = needs_grad(x) || needs_grad(gain) || needs_grad(bias);
    if (r.requires_grad) {
        r.backprop = [x, gain, bias, m, n, xhat = std::move(xhat), inv_std = std::move(inv_std)](Tape& t, const Tensor& g) {
            const Tensor& gv = t.val(gain);
            if (t.needs_grad(gain)) {
                Tensor dg = Tensor::zeros(gv.shape);
                for (int64_t i = 0; i < m; ++i)
                    for (int64_t j = 0; j < n; ++j)
                        dg.data[static_cast<size_t>(j)] +=
                            g.data[static_cast<size_t>(i * n + j)] * xhat.data[static_cast<size_t>(i * n + j)];
                t.accumulate(gain, dg);
            }
            if (t.needs_grad(bias)) {
                Tensor db = Tensor::zeros(t.val(bias).shape);
                for (int64_t i = 0; i < m; ++i)
                    for (int64_t j = 0; j < n; ++j) db.data[static_cast<size_t>(j)] += g.data[static_cast<size_t>(i * n + j)];
                t.accumulate(bias, db);
            }
            if (t.needs_grad(x)) {
                Tensor dx = Tensor::zeros({m, n});
                for (int64_t i = 0; i < m; ++i) {
                    // dxhat = g * gain; project out mean and xhat components.
                    double sum_d = 0.0, sum_dx = 0.0;
                    for (int64_t j = 0; j < n; ++j) {
                        const double d = static_cast<double>(g.data[static_cast<size_t>(i * n + j)]) *
                                         gv.data[static_cast<size_t>(j)];
                        sum_d += d;
                        sum_dx += d * xhat.data[static_cast<size_t>(i * n + j)];
                    }
                    const double inv_n = 1.0 / static_cast<double>(n);
                    const double is = inv_std.data[static_cast<size_t>(i)];
                    for (int64_t j = 0; j < n; ++j) {
                        const double d = static_cast<double>(g.data[static_cast<size_t>(i * n + j)]) *
                                         gv.data[static_cast<size_t>(j)];
                        const double xh = xhat.data[static_cast<size_t>(i * n + j)];
                        dx.data[static_cast<size_t>(i * n + j)] =
                            static_cast<float>(is * (d - inv_n * sum_d - xh * inv_n * sum_dx));
                    }
                }
                t.accumulate(x, dx);
            }
        };
    }
    return push(std::move(r), "layer_norm");
}

Var Tape::gelu(Var x) {
    const Tensor& xv = val(x);
    Record r;
    r.owned = xv;
    for (float& v : r.owned.data) {
        const float phi = 0.5f * (1.0f + std::erf(v * kInvSqrt2));
        v = v * phi;
    }
    r.requires_grad = needs_grad(x);
    if (r.requires_grad) {
        r.backprop = [x](Tape& t, const Tensor& g) {
            const Tensor& xv = t.val(x);
            Tensor dx = g;
            for (size_t i = 0; i < dx.data.size(); ++i) {
                const float v = xv.data[i];
                const float phi = 0.5f * (1.0f + std::erf(v * kInvSqrt2));
                const float pdf = kInvSqrt2Pi * std::exp(-0.5f * v * v);
                dx.data[i] *= phi + v * pdf;
            }
            t.accumulate(x, dx);
        };
    }
    return push(std::move(r), "gelu");
}

Var Tape::causal_softmax(Var scores) {
    const Tensor& sv = val(scores);
    const int64_t m = sv.rows(), n = sv.cols();
    if (m != n) throw std::invalid_argument("causal_softmax expects square scores, got " + sv.shape_str());
    Record r;
    r.owned = Tensor::zeros({m, n});
    for (int64_t i = 0; i < m; ++i) {
        float mx = sv.data[static_cast<size_t>(i * n)];
        for (int64_t j = 1; j <= i; ++j) mx = std::max(mx, sv.data[static_cast<size_t>(i * n + j)]);
        double denom = 0.0;
        for (int64_t j = 0; j <= i; ++j) {
            const float e = std::exp(sv.data[static_cast<size_t>(i * n + j)] - mx);
            r.owned.data[static_cast<size_t>(i * n + j)] = e;
            denom += e;
        }
        const float inv = static_cast<float>(1.0 / denom);
        for (int64_t j = 0; j <= i; ++j) r.owned.data[static_cast<size_t>(i * n + j)] *= inv;
    }
    r.requires_grad = needs_grad(scores);
    if (r.requires_grad) {
        Tensor probs = r.owned;
        r.backprop = [scores, m, n, probs = std::move(probs)](Tape& t, const Tensor& g) {
            Tensor ds = Tensor::zeros({m, n});
            for (int64_t i = 0; i < m; ++i) {
                double dot = 0.0;
                for (int64_t j = 0; j <= i; ++j)
                    dot += static_cast<double>(g.data[static_cast<size_t>(i * n + j)]) *
                           probs.data[static_cast<size_t>(i * n + j)];
                for (int64_t j = 0; j <= i; ++j) {
                    const float p = probs.data[static_cast<size_t>(i * n + j)];
                    ds.data[static_cast<size_t>(i * n + j)] =
                        p * (g.data[static_cast<size_t>(i * n + j)] - static_cast<float>(dot));
                }
            }
            t.accumulate(scores, ds);
        };
    }
    return push(std::move(r), "causal_softmax");
}

Var Tape::softmax_cross_entropy(Var logits, std::vector<int> targets, std::vector<uint8_t> mask) {
    const Tensor& lv = val(logits);
    const int64_t t_len = lv.rows(), v_size = lv.cols();
    if (static_cast<int64_t>(targets.size()) != t_len || static_cast<int64_t>(mask.size()) != t_len) {
        throw std::invalid_argument("softmax_cross_entropy: targets/mask length mismatch");
    }
    int64_t supervised = 0;
    for (int64_t t = 0; t < t_len; ++t) {
        if (!mask[static_cast<size_t>(t)]) continue;
        ++supervised;
        const int tgt = targets[static_cast<size_t>(t)];
        if (tgt < 0 || tgt >= v_size) throw std::invalid_argument("softmax_cross_entropy: target out of range");
    }
    if (supervised == 0) throw std::invalid_argument("softmax_cross_entropy: no supervised positions");

    Tensor probs = Tensor::zeros({t_len, v_size});
    double loss_acc = 0.0;
    for (int64_t t = 0; t < t_len; ++t) {
        const float* row = lv.data.data() + t * v_size;
        float mx = row[0];
        for (int64_t j = 1; j < v_size; ++j) mx = std::max(mx, row[j]);
        double denom = 0.0;
        for (int64_t j = 0; j < v_size; ++j) {
            const float e = std::exp(row[j] - mx);
            probs.data[static_cast<size_t>(t * v_size + j)] = e;
            denom += e;
        }
        const float inv = static_cast<float>(1.0 / denom);
        for (int64_t j = 0; j < v_size; ++j) probs.data[static_cast<size_t>(t * v_size + j)] *= inv;
        if (mask[static_cast<size_t>(t)]) {
            const double log_p = static_cast<double>(row[targets[static_cast<size_t>(t)]]) - mx - std::log(denom);
            loss_acc -= log_p;
        }
    }
    Record r;
    r.owned = Tensor::scalar(static_cast<float>(loss_acc / static_cast<double>(supervised)));
    r.requires_grad = needs_grad(logits);
    if (r.requires_grad) {
        r.backprop = [logits, targets = std::move(targets), mask = std::move(mask), supervised,
                      probs = std::move(probs), t_len, v_size](Tape& t, const Tensor& g) {
            const float scale = g.data[0] / static_cast<float>(supervised);
            Tensor dl = Tensor::zeros({t_len, v_size});
            for (int64_t pos = 0; pos < t_len; ++pos) {
                if (!mask[static_cast<size_t>(pos)]) continue;
                for (int64_t j = 0; j < v_size; ++j)
                    dl.data[static_cast<size_t>(pos * v_size + j)] =
                        probs.data[static_cast<size_t>(pos * v_size + j)] * scale;
                dl.data[static_cast<size_t>(pos * v_size + targets[static_cast<size_t>(pos)])] -= scale;
            }
            t.accumulate(logits, dl);
        };
    }
    return push(std::move(r), "softmax_cross_entropy");
}

Var Tape::sum(Var a) {
    const Tensor& av = val(a);
    double acc = 0.0;
    for (float v : av.data) acc += v;
    Record r;
    r.owned = Tensor::scalar(static_cast<float>(acc));
    r.requires_grad = needs_grad(a);
    if (r.requires_grad) {
        r.backprop = [a](Tape& t, const Tensor& g) {
            Tensor da = Tensor::full(t.val(a).shape, g.data[0]);
            t.accumulate(a, da);
        };
    }
    return push(std::move(r), "sum");
}

const Tensor& Tape::value(Var v) const {
    if (!v.valid() || v.id >= static_cast<int32_t>(records_.size())) throw std::invalid_argument("invalid Var");
    return records_[static_cast<size_t>(v.id)].val();
}

void Tape::backward(Var loss, float seed) {
    const Tensor& lv = value(loss);
    if (!lv.is_scalar()) throw std::invalid_argument("backward: loss must be scalar, got " + lv.shape_str());
    grad_ref(loss).data[0] += seed;
    for (int32_t i = loss.id; i >= 0; --i) {
        Record& r = records_[static_cast<size_t>(i)];
        if (r.grad.numel() == 0) continue;  // unreachable from loss
        if (r.backprop) r.backprop(*this, r.grad);
        if (r.grad_sink) add_into(*r.grad_sink, r.grad);
    }
}

double finite_diff_check(const std::function<double(const Tensor&)>& f, const Tensor& theta,
                         const Tensor& analytic_grad, double h, int n_samples, uint64_t seed,
                         double denom_eps) {
    if (h <= 0.0) throw std::invalid_argument("finite_diff_check: h must be positive");
    if (theta.shape != analytic_grad.shape) throw std::invalid_argument("finite_diff_check: grad shape mismatch");
    SeededRng rng(seed);
    const int64_t n = theta.numel();
    const int64_t k = std::min<int64_t>(n_samples, n);
    std::vector<int64_t> coords = rng.sample_indices(n, k);
    double worst = 0.0;
    Tensor probe = theta;
    for (int64_t c : coords) {
        const float orig = probe.data[static_cast<size_t>(c)];
        probe.data[static_cast<size_t>(c)] = orig + static_cast<float>(h);
        const double f_plus = f(probe);
        probe.data[static_cast<size_t>(c)] = orig - static_cast<float>(h);
        const double f_minus = f(probe);
        probe.data[static_cast<size_t>(c)] = orig;
        if (!std::isfinite(f_plus) || !std::isfinite(f_minus)) {
            throw std::runtime_error("finite_diff_check: f evaluated to a non-finite value");
        }
        const double fd = (f_plus - f_minus) / (2.0 * h);
        const double a = analytic_grad.data[static_cast<size_t>(c)];
        const double rel = std::abs(a - fd) / (std::abs(a) + denom_eps);
        worst = std::max(worst, rel);
    }
    return worst;
}

}  // namespace ctcc
