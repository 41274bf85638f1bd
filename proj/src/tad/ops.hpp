#pragma once

#include "tad/tape.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

namespace detours::tad {

namespace detail {

// C[m x n] += A[m x k] * B[k x n]
template <class S>
void mm_nn(const S* a, const S* b, S* c, int m, int k, int n) {
    for (int i = 0; i < m; ++i) {
        const S* ar = a + static_cast<size_t>(i) * k;
        S* cr = c + static_cast<size_t>(i) * n;
        for (int p = 0; p < k; ++p) {
            const S av = ar[p];
            const S* br = b + static_cast<size_t>(p) * n;
            for (int j = 0; j < n; ++j) cr[j] += av * br[j];
        }
    }
}

// C[m x n] += A[m x k] * B^T, with B stored [n x k]
template <class S>
void mm_nt(const S* a, const S* b, S* c, int m, int k, int n) {
    for (int i = 0; i < m; ++i) {
        const S* ar = a + static_cast<size_t>(i) * k;
        S* cr = c + static_cast<size_t>(i) * n;
        for (int j = 0; j < n; ++j) {
            const S* br = b + static_cast<size_t>(j) * k;
            S acc = S(0);
            for (int p = 0; p < k; ++p) acc += ar[p] * br[p];
            cr[j] += acc;
        }
    }
}

// C[k x n] += A^T * G, with A stored [m x k], G stored [m x n]
template <class S>
void mm_tn(const S* a, const S* g, S* c, int m, int k, int n) {
    for (int i = 0; i < m; ++i) {
        const S* ar = a + static_cast<size_t>(i) * k;
        const S* gr = g + static_cast<size_t>(i) * n;
        for (int p = 0; p < k; ++p) {
            const S av = ar[p];
            S* cr = c + static_cast<size_t>(p) * n;
            for (int j = 0; j < n; ++j) cr[j] += av * gr[j];
        }
    }
}

// b's shape must equal the trailing dims of a's shape; returns how many
// copies of b tile a.
template <class S>
size_t broadcast_reps(const Tensor<S>& a, const Tensor<S>& b, const char* op) {
    if (b.rank() > a.rank())
        throw ShapeMismatch(std::string(op) + ": shapes " + shape_str(a.shape) + " vs " +
                            shape_str(b.shape));
    const int off = a.rank() - b.rank();
    for (int i = 0; i < b.rank(); ++i)
        if (a.shape[static_cast<size_t>(i + off)] != b.shape[static_cast<size_t>(i)])
            throw ShapeMismatch(std::string(op) + ": shapes " + shape_str(a.shape) + " vs " +
                                shape_str(b.shape));
    return a.numel() / std::max<size_t>(1, b.numel());
}

} // namespace detail

template <class S>
Var<S> add(Tape<S>& tape, const Var<S>& a, const Var<S>& b) {
    const size_t reps = detail::broadcast_reps(a->value, b->value, "add");
    Tensor<S> out = a->value;
    const size_t bn = b->value.numel();
    for (size_t r = 0; r < reps; ++r)
        for (size_t i = 0; i < bn; ++i) out.data[r * bn + i] += b->value.data[i];
    if (!tape.grad_enabled()) return tape.record(std::move(out), {}, nullptr);
    return tape.record(std::move(out), {a, b}, [a, b, reps, bn](Node<S>& o) {
        if (a->requires_grad) {
            a->ensure_grad();
            for (size_t i = 0; i < o.grad.numel(); ++i) a->grad.data[i] += o.grad.data[i];
        }
        if (b->requires_grad) {
            b->ensure_grad();
            for (size_t r = 0; r < reps; ++r)
                for (size_t i = 0; i < bn; ++i) b->grad.data[i] += o.grad.data[r * bn + i];
        }
    });
}

template <class S>
Var<S> mul(Tape<S>& tape, const Var<S>& a, const Var<S>& b) {
    const size_t reps = detail::broadcast_reps(a->value, b->value, "mul");
    Tensor<S> out = a->value;
    const size_t bn = b->value.numel();
    for (size_t r = 0; r < reps; ++r)
        for (size_t i = 0; i < bn; ++i) out.data[r * bn + i] *= b->value.data[i];
    if (!tape.grad_enabled()) return tape.record(std::move(out), {}, nullptr);
    return tape.record(std::move(out), {a, b}, [a, b, reps, bn](Node<S>& o) {
        if (a->requires_grad) {
            a->ensure_grad();
            for (size_t r = 0; r < reps; ++r)
                for (size_t i = 0; i < bn; ++i)
                    a->grad.data[r * bn + i] += o.grad.data[r * bn + i] * b->value.data[i];
        }
        if (b->requires_grad) {
            b->ensure_grad();
            for (size_t r = 0; r < reps; ++r)
                for (size_t i = 0; i < bn; ++i)
                    b->grad.data[i] += o.grad.data[r * bn + i] * a->value.data[r * bn + i];
        }
    });
}

template <class S>
Var<S> scale(Tape<S>& tape, const Var<S>& a, double c) {
    Tensor<S> out = a->value;
    for (auto& x : out.data) x *= static_cast<S>(c);
    if (!tape.grad_enabled()) return tape.record(std::move(out), {}, nullptr);
    return tape.record(std::move(out), {a}, [a, c](Node<S>& o) {
        a->ensure_grad();
        for (size_t i = 0; i < o.grad.numel(); ++i)
            a->grad.data[i] += o.grad.data[i] * static_cast<S>(c);
    });
}

template <class S>
Var<S> matmul(Tape<S>& tape, const Var<S>& a, const Var<S>& b) {
    if (a->value.rank() != 2 || b->value.rank() != 2 || a->value.cols() != b->value.rows())
        throw ShapeMismatch("matmul: shapes " + shape_str(a->value.shape) + " vs " +
                            shape_str(b->value.shape));
    const int m = a->value.rows(), k = a->value.cols(), n = b->value.cols();
    Tensor<S> out({m, n});
    detail::mm_nn(a->value.data.data(), b->value.data.data(), out.data.data(), m, k, n);
    if (!tape.grad_enabled()) return tape.record(std::move(out), {}, nullptr);
    return tape.record(std::move(out), {a, b}, [a, b, m, k, n](Node<S>& o) {
        if (a->requires_grad) {
            a->ensure_grad();
            detail::mm_nt(o.grad.data.data(), b->value.data.data(), a->grad.data.data(), m, n, k);
        }
        if (b->requires_grad) {
            b->ensure_grad();
            detail::mm_tn(a->value.data.data(), o.grad.data.data(), b->grad.data.data(), m, k, n);
        }
    });
}

template <class S>
Var<S> transpose(Tape<S>& tape, const Var<S>& a) {
    if (a->value.rank() != 2)
        throw ShapeMismatch("transpose: expected 2-D, got " + shape_str(a->value.shape));
    const int m = a->value.rows(), n = a->value.cols();
    Tensor<S> out({n, m});
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) out.at(j, i) = a->value.at(i, j);
    if (!tape.grad_enabled()) return tape.record(std::move(out), {}, nullptr);
    return tape.record(std::move(out), {a}, [a, m, n](Node<S>& o) {
        a->ensure_grad();
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < n; ++j) a->grad.at(i, j) += o.grad.at(j, i);
    });
}

template <class S>
Var<S> reshape(Tape<S>& tape, const Var<S>& a, std::vector<int> shape) {
    if (shape_numel(shape) != a->value.numel())
        throw ShapeMismatch("reshape: " + shape_str(a->value.shape) + " to " + shape_str(shape));
    Tensor<S> out(std::move(shape), a->value.data);
    if (!tape.grad_enabled()) return tape.record(std::move(out), {}, nullptr);
    return tape.record(std::move(out), {a}, [a](Node<S>& o) {
        a->ensure_grad();
        for (size_t i = 0; i < o.grad.numel(); ++i) a->grad.data[i] += o.grad.data[i];
    });
}

// Row-wise concatenation of 2-D tensors with matching column counts.
template <class S>
Var<S> concat(Tape<S>& tape, const std::vector<Var<S>>& parts) {
    if (parts.empty()) throw ShapeMismatch("concat: no inputs");
    const int cols = parts[0]->value.cols();
    int rows = 0;
    for (const auto& p : parts) {
        if (p->value.rank() != 2 || p->value.cols() != cols)
            throw ShapeMismatch("concat: shapes " + shape_str(parts[0]->value.shape) + " vs " +
                                shape_str(p->value.shape));
        rows += p->value.rows();
    }
    Tensor<S> out({rows, cols});
    size_t off = 0;
    for (const auto& p : parts) {
        std::copy(p->value.data.begin(), p->value.data.end(), out.data.begin() + off);
        off += p->value.numel();
    }
    if (!tape.grad_enabled()) return tape.record(std::move(out), {}, nullptr);
    return tape.record(std::move(out), parts, [parts](Node<S>& o) {
        size_t off2 = 0;
        for (const auto& p : parts) {
            if (p->requires_grad) {
                p->ensure_grad();
                for (size_t i = 0; i < p->value.numel(); ++i)
                    p->grad.data[i] += o.grad.data[off2 + i];
            }
            off2 += p->value.numel();
        }
    });
}

// Contiguous sub-range along one axis of a 2-D tensor (axis 0 = rows,
// axis 1 = columns), half-open [start, end).
template <class S>
Var<S> slice(Tape<S>& tape, const Var<S>& a, int axis, int start, int end) {
    if (a->value.rank() != 2 || axis < 0 || axis > 1)
        throw ShapeMismatch("slice: expected 2-D, got " + shape_str(a->value.shape));
    const int limit = a->value.dim(axis);
    if (start < 0 || end > limit || start >= end)
        throw IndexOutOfRange("slice: [" + std::to_string(start) + "," + std::to_string(end) +
                              ") out of " + std::to_string(limit));
    const int m = a->value.rows(), n = a->value.cols();
    Tensor<S> out(axis == 0 ? std::vector<int>{end - start, n} : std::vector<int>{m, end - start});
    if (axis == 0) {
        std::copy(a->value.row(start), a->value.row(start) + out.numel(), out.data.begin());
    } else {
        for (int i = 0; i < m; ++i)
            std::copy(a->value.row(i) + start, a->value.row(i) + end, out.row(i));
    }
    if (!tape.grad_enabled()) return tape.record(std::move(out), {}, nullptr);
    return tape.record(std::move(out), {a}, [a, axis, start](Node<S>& o) {
        a->ensure_grad();
        if (axis == 0) {
            S* dst = a->grad.row(start);
            for (size_t i = 0; i < o.grad.numel(); ++i) dst[i] += o.grad.data[i];
        } else {
            for (int i = 0; i < o.grad.rows(); ++i) {
                S* dst = a->grad.row(i) + start;
                const S* src = o.grad.row(i);
                for (int j = 0; j < o.grad.cols(); ++j) dst[j] += src[j];
            }
        }
    });
}

template <class S>
Var<S> embedding_lookup(Tape<S>& tape, const Var<S>& table, std::vector<int> ids) {
    if (table->value.rank() != 2)
        throw ShapeMismatch("embedding_lookup: table must be 2-D, got " +
                            shape_str(table->value.shape));
    const int v = table->value.rows(), d = table->value.cols();
    for (int id : ids)
        if (id < 0 || id >= v)
            throw IndexOutOfRange("embedding_lookup: id " + std::to_string(id) + " outside table of " +
                                  std::to_string(v));
    Tensor<S> out({static_cast<int>(ids.size()), d});
    for (size_t i = 0; i < ids.size(); ++i)
        std::copy(table->value.row(ids[i]), table->value.row(ids[i]) + d, out.row(static_cast<int>(i)));
    if (!tape.grad_enabled()) return tape.record(std::move(out), {}, nullptr);
    return tape.record(std::move(out), {table}, [table, ids = std::move(ids), d](Node<S>& o) {
        table->ensure_grad();
        for (size_t i = 0; i < ids.size(); ++i) {
            S* dst = table->grad.row(ids[i]);
            const S* src = o.grad.row(static_cast<int>(i));
            for (int j = 0; j < d; ++j) dst[j] += src[j];
        }
    });
}

// Softmax along the last axis.
template <class S>
Var<S> softmax(Tape<S>& tape, const Var<S>& a) {
    const int n = a->value.rank() == 0 ? 1 : a->value.shape.back();
    const int rows = static_cast<int>(a->value.numel()) / n;
    Tensor<S> out = a->value;
    for (int r = 0; r < rows; ++r) {
        S* p = out.data.data() + static_cast<size_t>(r) * n;
        S mx = p[0];
        for (int j = 1; j < n; ++j) mx = std::max(mx, p[j]);
        S sum = S(0);
        for (int j = 0; j < n; ++j) {
            p[j] = std::exp(p[j] - mx);
            sum += p[j];
        }
        for (int j = 0; j < n; ++j) p[j] /= sum;
    }
    if (!tape.grad_enabled()) return tape.record(std::move(out), {}, nullptr);
    return tape.record(std::move(out), {a}, [a, rows, n](Node<S>& o) {
        a->ensure_grad();
        for (int r = 0; r < rows; ++r) {
            const S* y = o.value.data.data() + static_cast<size_t>(r) * n;
            const S* g = o.grad.data.data() + static_cast<size_t>(r) * n;
            S dot = S(0);
            for (int j = 0; j < n; ++j) dot += g[j] * y[j];
            S* dst = a->grad.data.data() + static_cast<size_t>(r) * n;
            for (int j = 0; j < n; ++j) dst[j] += (g[j] - dot) * y[j];
        }
    });
}

// Normalizes along the last axis: (x - mean) / sqrt(var + eps). Affine
// gain/bias compose on top via mul/add.
template <class S>
Var<S> layer_norm(Tape<S>& tape, const Var<S>& a, double eps = 1e-5) {
    const int n = a->value.shape.back();
    const int rows = static_cast<int>(a->value.numel()) / n;
    Tensor<S> out(a->value.shape);
    Tensor<S> inv_sigma({rows});
    for (int r = 0; r < rows; ++r) {
        const S* x = a->value.data.data() + static_cast<size_t>(r) * n;
        S mean = S(0);
        for (int j = 0; j < n; ++j) mean += x[j];
        mean /= S(n);
        S var = S(0);
        for (int j = 0; j < n; ++j) var += (x[j] - mean) * (x[j] - mean);
        var /= S(n);
        const S is = S(1) / std::sqrt(var + static_cast<S>(eps));
        inv_sigma.data[r] = is;
        S* y = out.data.data() + static_cast<size_t>(r) * n;
        for (int j = 0; j < n; ++j) y[j] = (x[j] - mean) * is;
    }
    if (!tape.grad_enabled()) return tape.record(std::move(out), {}, nullptr);
    auto saved = std::make_shared<Tensor<S>>(std::move(inv_sigma));
    return tape.record(std::move(out), {a}, [a, saved, rows, n](Node<S>& o) {
        a->ensure_grad();
        for (int r = 0; r < rows; ++r) {
            const S* y = o.value.data.data() + static_cast<size_t>(r) * n;
            const S* g = o.grad.data.data() + static_cast<size_t>(r) * n;
            S mg = S(0), mgy = S(0);
            for (int j = 0; j < n; ++j) {
                mg += g[j];
                mgy += g[j] * y[j];
            }
            mg /= S(n);
            mgy /= S(n);
            const S is = saved->data[r];
            S* dst = a->grad.data.data() + static_cast<size_t>(r) * n;
            for (int j = 0; j < n; ++j) dst[j] += is * (g[j] - mg - y[j] * mgy);
        }
    });
}

inline constexpr double kGeluC = 0.7978845608028654; // sqrt(2/pi)
inline constexpr double kGeluA = 0.044715;

template <class S>
Var<S> gelu(Tape<S>& tape, const Var<S>& a) {
    Tensor<S> out(a->value.shape);
    for (size_t i = 0; i < out.numel(); ++i) {
        const double x = static_cast<double>(a->value.data[i]);
        out.data[i] = static_cast<S>(0.5 * x * (1.0 + std::tanh(kGeluC * (x + kGeluA * x * x * x))));
    }
    if (!tape.grad_enabled()) return tape.record(std::move(out), {}, nullptr);
    return tape.record(std::move(out), {a}, [a](Node<S>& o) {
        a->ensure_grad();
        for (size_t i = 0; i < o.grad.numel(); ++i) {
            const double x = static_cast<double>(a->value.data[i]);
            const double t = std::tanh(kGeluC * (x + kGeluA * x * x * x));
            const double d =
                0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * kGeluC * (1.0 + 3.0 * kGeluA * x * x);
            a->grad.data[i] += o.grad.data[i] * static_cast<S>(d);
        }
    });
}

// out = mask ? fill_value : a. Mask entries are 0/1; no gradient flows
// through masked positions.
template <class S>
Var<S> masked_fill(Tape<S>& tape, const Var<S>& a, const Tensor<S>& mask, double fill_value) {
    check_same_shape(a->value, mask, "masked_fill");
    Tensor<S> out = a->value;
    for (size_t i = 0; i < out.numel(); ++i)
        if (mask.data[i] != S(0)) out.data[i] = static_cast<S>(fill_value);
    if (!tape.grad_enabled()) return tape.record(std::move(out), {}, nullptr);
    auto saved = std::make_shared<Tensor<S>>(mask);
    return tape.record(std::move(out), {a}, [a, saved](Node<S>& o) {
        a->ensure_grad();
        for (size_t i = 0; i < o.grad.numel(); ++i)
            if (saved->data[i] == S(0)) a->grad.data[i] += o.grad.data[i];
    });
}

template <class S>
Var<S> sum_all(Tape<S>& tape, const Var<S>& a) {
    S total = S(0);
    for (S x : a->value.data) total += x;
    Tensor<S> out({1});
    out.data[0] = total;
    if (!tape.grad_enabled()) return tape.record(std::move(out), {}, nullptr);
    return tape.record(std::move(out), {a}, [a](Node<S>& o) {
        a->ensure_grad();
        const S g = o.grad.data[0];
        for (size_t i = 0; i < a->grad.numel(); ++i) a->grad.data[i] += g;
    });
}

// Scaled dot-product attention over pre-projected q/k/v, heads formed by
// splitting the feature axis. Causal masking keeps position i attending
// to positions <= i.
template <class S>
Var<S> multi_head_attention(Tape<S>& tape, const Var<S>& q, const Var<S>& k, const Var<S>& v,
                            int heads, bool causal) {
    check_same_shape(q->value, k->value, "multi_head_attention");
    check_same_shape(q->value, v->value, "multi_head_attention");
    if (q->value.rank() != 2 || q->value.cols() % heads != 0)
        throw ShapeMismatch("multi_head_attention: shape " + shape_str(q->value.shape) + " vs " +
                            std::to_string(heads) + " heads");
    const int t = q->value.rows();
    const int d = q->value.cols();
    const int hd = d / heads;
    const S scl = static_cast<S>(1.0 / std::sqrt(static_cast<double>(hd)));

    // attention weights per head, kept for backward: [heads][t x t]
    auto attn = std::make_shared<Tensor<S>>(std::vector<int>{heads, t, t});
    Tensor<S> out({t, d});
    std::vector<S> qh(static_cast<size_t>(t) * hd), kh(qh.size()), vh(qh.size());

    for (int h = 0; h < heads; ++h) {
        const int c0 = h * hd;
        for (int i = 0; i < t; ++i) {
            std::copy(q->value.row(i) + c0, q->value.row(i) + c0 + hd, qh.begin() + static_cast<size_t>(i) * hd);
            std::copy(k->value.row(i) + c0, k->value.row(i) + c0 + hd, kh.begin() + static_cast<size_t>(i) * hd);
            std::copy(v->value.row(i) + c0, v->value.row(i) + c0 + hd, vh.begin() + static_cast<size_t>(i) * hd);
        }
        S* a = attn->data.data() + static_cast<size_t>(h) * t * t;
        for (int i = 0; i < t; ++i) {
            const int jmax = causal ? i + 1 : t;
            const S* qi = qh.data() + static_cast<size_t>(i) * hd;
            S* ai = a + static_cast<size_t>(i) * t;
            S mx = -std::numeric_limits<S>::infinity();
            for (int j = 0; j < jmax; ++j) {
                const S* kj = kh.data() + static_cast<size_t>(j) * hd;
                S dot = S(0);
                for (int p = 0; p < hd; ++p) dot += qi[p] * kj[p];
                ai[j] = dot * scl;
                mx = std::max(mx, ai[j]);
            }
            S sum = S(0);
            for (int j = 0; j < jmax; ++j) {
                ai[j] = std::exp(ai[j] - mx);
                sum += ai[j];
            }
            for (int j = 0; j < jmax; ++j) ai[j] /= sum;
            for (int j = jmax; j < t; ++j) ai[j] = S(0);
            // out row i, head slice: sum_j a_ij * v_j
            S* oi = out.row(i) + c0;
            for (int j = 0; j < jmax; ++j) {
                const S aij = ai[j];
                const S* vj = vh.data() + static_cast<size_t>(j) * hd;
                for (int p = 0; p < hd; ++p) oi[p] += aij * vj[p];
            }
        }
    }

    if (!tape.grad_enabled()) return tape.record(std::move(out), {}, nullptr);
    return tape.record(std::move(out), {q, k, v}, [q, k, v, attn, heads, t, hd, scl, causal](Node<S>& o) {
        q->ensure_grad();
        k->ensure_grad();
        v->ensure_grad();
        std::vector<S> da(static_cast<size_t>(t) * t), ds(da.size());
        for (int h = 0; h < heads; ++h) {
            const int c0 = h * hd;
            const S* a = attn->data.data() + static_cast<size_t>(h) * t * t;
            // dV_j += sum_i a_ij * gO_i ; dA_ij = gO_i . V_j
            std::fill(da.begin(), da.end(), S(0));
            for (int i = 0; i < t; ++i) {
                const int jmax = causal ? i + 1 : t;
                const S* gi = o.grad.row(i) + c0;
                const S* ai = a + static_cast<size_t>(i) * t;
                for (int j = 0; j < jmax; ++j) {
                    const S* vj = v->value.row(j) + c0;
                    S* dvj = v->grad.row(j) + c0;
                    S dot = S(0);
                    const S aij = ai[j];
                    for (int p = 0; p < hd; ++p) {
                        dot += gi[p] * vj[p];
                        dvj[p] += aij * gi[p];
                    }
                    da[static_cast<size_t>(i) * t + j] = dot;
                }
            }
            // softmax backward rows: dS = (dA - rowdot) * A
            for (int i = 0; i < t; ++i) {
                const int jmax = causal ? i + 1 : t;
                const S* ai = a + static_cast<size_t>(i) * t;
                const S* dai = da.data() + static_cast<size_t>(i) * t;
                S rowdot = S(0);
                for (int j = 0; j < jmax; ++j) rowdot += dai[j] * ai[j];
                S* dsi = ds.data() + static_cast<size_t>(i) * t;
                for (int j = 0; j < jmax; ++j) dsi[j] = (dai[j] - rowdot) * ai[j];
                for (int j = jmax; j < t; ++j) dsi[j] = S(0);
            }
            // dQ_i += scl * sum_j dS_ij K_j ; dK_j += scl * sum_i dS_ij Q_i
            for (int i = 0; i < t; ++i) {
                const int jmax = causal ? i + 1 : t;
                const S* dsi = ds.data() + static_cast<size_t>(i) * t;
                S* dqi = q->grad.row(i) + c0;
                const S* qi = q->value.row(i) + c0;
                for (int j = 0; j < jmax; ++j) {
                    const S w = dsi[j] * scl;
                    const S* kj = k->value.row(j) + c0;
                    S* dkj = k->grad.row(j) + c0;
                    for (int p = 0; p < hd; ++p) {
                        dqi[p] += w * kj[p];
                        dkj[p] += w * qi[p];
                    }
                }
            }
        }
    });
}

// Numerically stable binary cross entropy on a single logit.
template <class S>
Var<S> bce_with_logits(Tape<S>& tape, const Var<S>& logit, int label) {
    if (logit->value.numel() != 1)
        throw ShapeMismatch("bce_with_logits: logit must be scalar, got " +
                            shape_str(logit->value.shape));
    const double z = static_cast<double>(logit->value.data[0]);
    const double y = label ? 1.0 : 0.0;
    const double loss = std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
    Tensor<S> out({1});
    out.data[0] = static_cast<S>(loss);
    if (!tape.grad_enabled()) return tape.record(std::move(out), {}, nullptr);
    return tape.record(std::move(out), {logit}, [logit, z, y](Node<S>& o) {
        logit->ensure_grad();
        const double sig = z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
        logit->grad.data[0] += o.grad.data[0] * static_cast<S>(sig - y);
    });
}

// -log softmax(logits)[target] over a 1-D logit vector.
template <class S>
Var<S> cross_entropy(Tape<S>& tape, const Var<S>& logits, int target) {
    const int n = static_cast<int>(logits->value.numel());
    if (target < 0 || target >= n)
        throw IndexOutOfRange("cross_entropy: target " + std::to_string(target) + " outside [0," +
                              std::to_string(n) + ")");
    const S* z = logits->value.data.data();
    S mx = z[0];
    for (int j = 1; j < n; ++j) mx = std::max(mx, z[j]);
    double sum = 0.0;
    for (int j = 0; j < n; ++j) sum += std::exp(static_cast<double>(z[j] - mx));
    const double lse = static_cast<double>(mx) + std::log(sum);
    Tensor<S> out({1});
    out.data[0] = static_cast<S>(lse - static_cast<double>(z[target]));
    if (!tape.grad_enabled()) return tape.record(std::move(out), {}, nullptr);
    return tape.record(std::move(out), {logits}, [logits, target, lse, n](Node<S>& o) {
        logits->ensure_grad();
        const S g = o.grad.data[0];
        for (int j = 0; j < n; ++j) {
            const double p = std::exp(static_cast<double>(logits->value.data[j]) - lse);
            logits->grad.data[j] += g * static_cast<S>(p - (j == target ? 1.0 : 0.0));
        }
    });
}

} // namespace detours::tad
