#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <utility>
#include <vector>

#include "har/core/error.hpp"
#include "har/core/tensor.hpp"

namespace har {

enum class PoolKind { kAvg, kMax };

/// Handle to a graph node. Only meaningful for the graph that produced it.
struct Var {
    int id = -1;
    bool valid() const { return id >= 0; }
};

/// Floor for log/pow arguments; keeps CE/focal losses finite on saturated
/// probabilities.
inline constexpr double kLogClamp = 1e-12;

/// Reverse-mode compute graph. Nodes are appended in topological order
/// (inputs precede consumers); backward() replays them in reverse.
///
/// A graph instance is single-threaded and built fresh per forward pass.
/// Parameters registered via param() receive accumulated gradients in their
/// grad slot after backward().
template <typename T>
class GraphT {
public:
    GraphT() = default;
    GraphT(const GraphT&) = delete;
    GraphT& operator=(const GraphT&) = delete;

    // ---- leaves -----------------------------------------------------------

    /// Constant leaf; no gradient is tracked.
    Var value(TensorT<T> t) { return push_leaf(std::move(t), false); }

    /// Gradient-tracked leaf not bound to a parameter (used by checks that
    /// differentiate w.r.t. inputs).
    Var leaf(TensorT<T> t) { return push_leaf(std::move(t), true); }

    /// Parameter leaf. Registering the same parameter twice returns the
    /// original node so gradients accumulate in one place.
    Var param(ParameterT<T>& p) {
        for (size_t i = 0; i < bound_.size(); ++i)
            if (bound_[i].first == &p) return Var{bound_[i].second};
        Var v = push_leaf(p.value, true);
        bound_.emplace_back(&p, v.id);
        return v;
    }

    const TensorT<T>& val(Var v) const { return nodes_[static_cast<size_t>(v.id)].out; }
    const TensorT<T>& grad(Var v) const {
        const Node& n = nodes_[static_cast<size_t>(v.id)];
        require(n.needs_grad, "node ", v.id, " does not track gradients");
        return n.grad;
    }

    // ---- convolution / pooling / dense ------------------------------------

    Var conv1d(Var x, Var w, Var b, int stride, int padding, int groups) {
        const TensorT<T>& xi = val(x);
        const TensorT<T>& wi = val(w);
        const TensorT<T>& bi = val(b);
        require(xi.ndim() == 3, "conv1d: input must be [B,Cin,L], got ", shape_str(xi.shape()));
        require(wi.ndim() == 3, "conv1d: kernel must be [Cout,Cin/groups,Kw], got ",
                shape_str(wi.shape()));
        const int B = xi.dim(0), Cin = xi.dim(1), L = xi.dim(2);
        const int Cout = wi.dim(0), Kw = wi.dim(2);
        require(groups >= 1 && Cin % groups == 0,
                "conv1d: groups ", groups, " does not divide input channels ", Cin);
        require(Cout % groups == 0,
                "conv1d: groups ", groups, " does not divide output channels ", Cout);
        require(wi.dim(1) == Cin / groups, "conv1d: kernel channel dim ", wi.dim(1),
                " != Cin/groups = ", Cin / groups);
        require(bi.ndim() == 1 && bi.dim(0) == Cout, "conv1d: bias dim ",
                shape_str(bi.shape()), " != output channels ", Cout);
        require(stride >= 1, "conv1d: stride must be >= 1, got ", stride);
        require(padding >= 0, "conv1d: padding must be >= 0, got ", padding);
        const int Lout = (L + 2 * padding - Kw) / stride + 1;
        require(L + 2 * padding >= Kw && Lout >= 1,
                "conv1d: output length ", Lout, " < 1 for L=", L, " pad=", padding, " Kw=", Kw);

        const int icg = Cin / groups, ocg = Cout / groups;
        TensorT<T> out({B, Cout, Lout});
        for (int bb = 0; bb < B; ++bb)
            for (int oc = 0; oc < Cout; ++oc) {
                const int g = oc / ocg;
                for (int ol = 0; ol < Lout; ++ol) {
                    T acc = bi[oc];
                    const int base = ol * stride - padding;
                    for (int ic = 0; ic < icg; ++ic)
                        for (int k = 0; k < Kw; ++k) {
                            const int il = base + k;
                            if (il < 0 || il >= L) continue;
                            acc += xi.at(bb, g * icg + ic, il) * wi.at(oc, ic, k);
                        }
                    out.at(bb, oc, ol) = acc;
                }
            }

        return push_op(std::move(out), {x, w, b}, [=, this](const TensorT<T>& dy) {
            TensorT<T>* dx = grad_slot(x);
            TensorT<T>* dw = grad_slot(w);
            TensorT<T>* db = grad_slot(b);
            const TensorT<T>& xv = val(x);
            const TensorT<T>& wv = val(w);
            for (int bb = 0; bb < B; ++bb)
                for (int oc = 0; oc < Cout; ++oc) {
                    const int g = oc / ocg;
                    for (int ol = 0; ol < Lout; ++ol) {
                        const T go = dy.at(bb, oc, ol);
                        if (db) (*db)[oc] += go;
                        const int base = ol * stride - padding;
                        for (int ic = 0; ic < icg; ++ic)
                            for (int k = 0; k < Kw; ++k) {
                                const int il = base + k;
                                if (il < 0 || il >= L) continue;
                                if (dw) dw->at(oc, ic, k) += go * xv.at(bb, g * icg + ic, il);
                                if (dx) dx->at(bb, g * icg + ic, il) += go * wv.at(oc, ic, k);
                            }
                    }
                }
        });
    }

    Var pool1d(Var x, PoolKind kind, int window, int stride) {
        const TensorT<T>& xi = val(x);
        require(xi.ndim() == 3, "pool1d: input must be [B,C,L], got ", shape_str(xi.shape()));
        const int B = xi.dim(0), C = xi.dim(1), L = xi.dim(2);
        require(window >= 1 && window <= L, "pool1d: window ", window,
                " out of range for length ", L);
        require(stride >= 1, "pool1d: stride must be >= 1, got ", stride);
        const int Lout = (L - window) / stride + 1;

        TensorT<T> out({B, C, Lout});
        std::vector<int> argmax;
        if (kind == PoolKind::kMax) argmax.resize(static_cast<size_t>(B) * C * Lout);
        for (int bb = 0; bb < B; ++bb)
            for (int c = 0; c < C; ++c)
                for (int ol = 0; ol < Lout; ++ol) {
                    const int base = ol * stride;
                    if (kind == PoolKind::kAvg) {
                        T acc = 0;
                        for (int k = 0; k < window; ++k) acc += xi.at(bb, c, base + k);
                        out.at(bb, c, ol) = acc / static_cast<T>(window);
                    } else {
                        // ties route to the first maximal index
                        int best = base;
                        T bv = xi.at(bb, c, base);
                        for (int k = 1; k < window; ++k) {
                            const T v = xi.at(bb, c, base + k);
                            if (v > bv) {
                                bv = v;
                                best = base + k;
                            }
                        }
                        out.at(bb, c, ol) = bv;
                        argmax[(static_cast<size_t>(bb) * C + c) * Lout + ol] = best;
                    }
                }

        return push_op(std::move(out), {x},
                       [=, this, argmax = std::move(argmax)](const TensorT<T>& dy) {
            TensorT<T>* dx = grad_slot(x);
            if (!dx) return;
            for (int bb = 0; bb < B; ++bb)
                for (int c = 0; c < C; ++c)
                    for (int ol = 0; ol < Lout; ++ol) {
                        const T go = dy.at(bb, c, ol);
                        if (kind == PoolKind::kAvg) {
                            const T share = go / static_cast<T>(window);
                            for (int k = 0; k < window; ++k)
                                dx->at(bb, c, ol * stride + k) += share;
                        } else {
                            dx->at(bb, c, argmax[(static_cast<size_t>(bb) * C + c) * Lout + ol]) += go;
                        }
                    }
        });
    }

    /// Grouped affine map. The weight is stored [M,N]; with groups > 1 only
    /// the block-diagonal entries participate, so cross-group entries have no
    /// effect on the output or gradients.
    Var dense(Var x, Var w, Var b, int groups = 1) {
        const TensorT<T>& xi = val(x);
        const TensorT<T>& wi = val(w);
        const TensorT<T>& bi = val(b);
        require(xi.ndim() == 2, "dense: input must be [B,N], got ", shape_str(xi.shape()));
        require(wi.ndim() == 2, "dense: weight must be [M,N], got ", shape_str(wi.shape()));
        const int B = xi.dim(0), N = xi.dim(1), M = wi.dim(0);
        require(wi.dim(1) == N, "dense: weight cols ", wi.dim(1), " != input features ", N);
        require(bi.ndim() == 1 && bi.dim(0) == M, "dense: bias dim ", shape_str(bi.shape()),
                " != output features ", M);
        require(groups >= 1 && N % groups == 0 && M % groups == 0,
                "dense: groups ", groups, " must divide N=", N, " and M=", M);
        const int ng = N / groups, mg = M / groups;

        TensorT<T> out({B, M});
        for (int bb = 0; bb < B; ++bb)
            for (int m = 0; m < M; ++m) {
                const int g = m / mg;
                T acc = bi[m];
                for (int n = g * ng; n < (g + 1) * ng; ++n) acc += wi.at(m, n) * xi.at(bb, n);
                out.at(bb, m) = acc;
            }

        return push_op(std::move(out), {x, w, b}, [=, this](const TensorT<T>& dy) {
            TensorT<T>* dx = grad_slot(x);
            TensorT<T>* dw = grad_slot(w);
            TensorT<T>* db = grad_slot(b);
            const TensorT<T>& xv = val(x);
            const TensorT<T>& wv = val(w);
            for (int bb = 0; bb < B; ++bb)
                for (int m = 0; m < M; ++m) {
                    const int g = m / mg;
                    const T go = dy.at(bb, m);
                    if (db) (*db)[m] += go;
                    for (int n = g * ng; n < (g + 1) * ng; ++n) {
                        if (dw) dw->at(m, n) += go * xv.at(bb, n);
                        if (dx) dx->at(bb, n) += go * wv.at(m, n);
                    }
                }
        });
    }

    // ---- activations / elementwise -----------------------------------------

    Var relu(Var x) {
        TensorT<T> out = val(x);
        for (int64_t i = 0; i < out.size(); ++i) out[i] = std::max(out[i], T(0));
        return push_op(std::move(out), {x}, [=, this](const TensorT<T>& dy) {
            TensorT<T>* dx = grad_slot(x);
            if (!dx) return;
            const TensorT<T>& xv = val(x);
            for (int64_t i = 0; i < dy.size(); ++i)
                if (xv[i] > T(0)) (*dx)[i] += dy[i];
        });
    }

    Var sigmoid(Var x) {
        TensorT<T> out = val(x);
        for (int64_t i = 0; i < out.size(); ++i)
            out[i] = T(1) / (T(1) + std::exp(-out[i]));
        return push_op(std::move(out), {x}, [=, this, id = next_id()](const TensorT<T>& dy) {
            TensorT<T>* dx = grad_slot(x);
            if (!dx) return;
            const TensorT<T>& yv = nodes_[static_cast<size_t>(id)].out;
            for (int64_t i = 0; i < dy.size(); ++i)
                (*dx)[i] += dy[i] * yv[i] * (T(1) - yv[i]);
        });
    }

    /// log with the argument clamped to >= kLogClamp.
    Var log_clamped(Var x) {
        TensorT<T> out = val(x);
        for (int64_t i = 0; i < out.size(); ++i)
            out[i] = std::log(std::max(out[i], static_cast<T>(kLogClamp)));
        return push_op(std::move(out), {x}, [=, this](const TensorT<T>& dy) {
            TensorT<T>* dx = grad_slot(x);
            if (!dx) return;
            const TensorT<T>& xv = val(x);
            for (int64_t i = 0; i < dy.size(); ++i)
                if (xv[i] >= static_cast<T>(kLogClamp)) (*dx)[i] += dy[i] / xv[i];
        });
    }

    Var abs(Var x) {
        TensorT<T> out = val(x);
        for (int64_t i = 0; i < out.size(); ++i) out[i] = std::abs(out[i]);
        return push_op(std::move(out), {x}, [=, this](const TensorT<T>& dy) {
            TensorT<T>* dx = grad_slot(x);
            if (!dx) return;
            const TensorT<T>& xv = val(x);
            for (int64_t i = 0; i < dy.size(); ++i) {
                if (xv[i] > T(0)) (*dx)[i] += dy[i];
                else if (xv[i] < T(0)) (*dx)[i] -= dy[i];
            }
        });
    }

    /// x^c for constant exponent; base clamped to >= 0.
    Var pow_const(Var x, T c) {
        TensorT<T> out = val(x);
        for (int64_t i = 0; i < out.size(); ++i)
            out[i] = std::pow(std::max(out[i], T(0)), c);
        return push_op(std::move(out), {x}, [=, this](const TensorT<T>& dy) {
            TensorT<T>* dx = grad_slot(x);
            if (!dx) return;
            const TensorT<T>& xv = val(x);
            for (int64_t i = 0; i < dy.size(); ++i) {
                const T base = std::max(xv[i], T(0));
                if (base > T(0)) (*dx)[i] += dy[i] * c * std::pow(base, c - T(1));
            }
        });
    }

    /// y = a*x + b (constants).
    Var affine(Var x, T a, T b) {
        TensorT<T> out = val(x);
        for (int64_t i = 0; i < out.size(); ++i) out[i] = a * out[i] + b;
        return push_op(std::move(out), {x}, [=, this](const TensorT<T>& dy) {
            TensorT<T>* dx = grad_slot(x);
            if (!dx) return;
            for (int64_t i = 0; i < dy.size(); ++i) (*dx)[i] += a * dy[i];
        });
    }

    Var scale(Var x, T a) { return affine(x, a, T(0)); }

    Var add(Var x, Var y) { return binary(x, y, /*mul=*/false, /*negate_y=*/false); }
    Var sub(Var x, Var y) { return binary(x, y, /*mul=*/false, /*negate_y=*/true); }
    Var mul(Var x, Var y) { return binary(x, y, /*mul=*/true, /*negate_y=*/false); }

    // ---- reductions / shape ------------------------------------------------

    /// [B,C,L] -> [B,C], mean over the sequence axis.
    Var global_avg_pool(Var x) {
        const TensorT<T>& xi = val(x);
        require(xi.ndim() == 3, "global_avg_pool: input must be [B,C,L], got ",
                shape_str(xi.shape()));
        const int B = xi.dim(0), C = xi.dim(1), L = xi.dim(2);
        TensorT<T> out({B, C});
        for (int bb = 0; bb < B; ++bb)
            for (int c = 0; c < C; ++c) {
                T acc = 0;
                for (int l = 0; l < L; ++l) acc += xi.at(bb, c, l);
                out.at(bb, c) = acc / static_cast<T>(L);
            }
        return push_op(std::move(out), {x}, [=, this](const TensorT<T>& dy) {
            TensorT<T>* dx = grad_slot(x);
            if (!dx) return;
            for (int bb = 0; bb < B; ++bb)
                for (int c = 0; c < C; ++c) {
                    const T share = dy.at(bb, c) / static_cast<T>(L);
                    for (int l = 0; l < L; ++l) dx->at(bb, c, l) += share;
                }
        });
    }

    Var softmax(Var x, int axis) {
        const TensorT<T>& xi = val(x);
        require(axis >= 0 && axis < xi.ndim(), "softmax: axis ", axis,
                " invalid for shape ", shape_str(xi.shape()));
        const auto [outer, len, inner] = axis_strides(xi.shape(), axis);
        TensorT<T> out(xi.shape());
        for (int64_t o = 0; o < outer; ++o)
            for (int64_t in = 0; in < inner; ++in) {
                const int64_t base = o * len * inner + in;
                T mx = xi[base];
                for (int64_t k = 1; k < len; ++k)
                    mx = std::max(mx, xi[base + k * inner]);
                T sum = 0;
                for (int64_t k = 0; k < len; ++k) {
                    const T e = std::exp(xi[base + k * inner] - mx);
                    out[base + k * inner] = e;
                    sum += e;
                }
                for (int64_t k = 0; k < len; ++k) out[base + k * inner] /= sum;
            }
        return push_op(std::move(out), {x}, [=, this, id = next_id()](const TensorT<T>& dy) {
            TensorT<T>* dx = grad_slot(x);
            if (!dx) return;
            const TensorT<T>& yv = nodes_[static_cast<size_t>(id)].out;
            for (int64_t o = 0; o < outer; ++o)
                for (int64_t in = 0; in < inner; ++in) {
                    const int64_t base = o * len * inner + in;
                    T dot = 0;
                    for (int64_t k = 0; k < len; ++k)
                        dot += dy[base + k * inner] * yv[base + k * inner];
                    for (int64_t k = 0; k < len; ++k)
                        (*dx)[base + k * inner] +=
                            yv[base + k * inner] * (dy[base + k * inner] - dot);
                }
        });
    }

    Var reshape(Var x, Shape shape) {
        const TensorT<T>& xi = val(x);
        require(shape_numel(shape) == xi.size(), "reshape: cannot view ",
                shape_str(xi.shape()), " as ", shape_str(shape));
        TensorT<T> out(shape, xi.vec());
        return push_op(std::move(out), {x}, [=, this](const TensorT<T>& dy) {
            TensorT<T>* dx = grad_slot(x);
            if (!dx) return;
            for (int64_t i = 0; i < dy.size(); ++i) (*dx)[i] += dy[i];
        });
    }

    /// Concatenate along dim 1 (channels for 3-D, features for 2-D).
    Var concat_axis1(const std::vector<Var>& parts) {
        require(!parts.empty(), "concat_axis1: no inputs");
        const TensorT<T>& first = val(parts[0]);
        const int nd = first.ndim();
        require(nd == 2 || nd == 3, "concat_axis1: inputs must be 2-D or 3-D");
        int total = 0;
        for (Var p : parts) {
            const TensorT<T>& t = val(p);
            require(t.ndim() == nd && t.dim(0) == first.dim(0) &&
                        (nd == 2 || t.dim(2) == first.dim(2)),
                    "concat_axis1: mismatched shapes ", shape_str(first.shape()), " vs ",
                    shape_str(t.shape()));
            total += t.dim(1);
        }
        Shape oshape = first.shape();
        oshape[1] = total;
        const int B = first.dim(0);
        const int inner = nd == 3 ? first.dim(2) : 1;
        TensorT<T> out(oshape);
        int off = 0;
        for (Var p : parts) {
            const TensorT<T>& t = val(p);
            const int c = t.dim(1);
            for (int bb = 0; bb < B; ++bb)
                for (int j = 0; j < c * inner; ++j)
                    out[(static_cast<int64_t>(bb) * total + off) * inner + j] =
                        t[(static_cast<int64_t>(bb) * c) * inner + j];
            off += c;
        }
        return push_op(std::move(out), parts, [=, this](const TensorT<T>& dy) {
            int o = 0;
            for (Var p : parts) {
                const int c = val(p).dim(1);
                if (TensorT<T>* dx = grad_slot(p)) {
                    for (int bb = 0; bb < B; ++bb)
                        for (int j = 0; j < c * inner; ++j)
                            (*dx)[(static_cast<int64_t>(bb) * c) * inner + j] +=
                                dy[(static_cast<int64_t>(bb) * total + o) * inner + j];
                }
                o += c;
            }
        });
    }

    Var slice_axis1(Var x, int from, int count) {
        const TensorT<T>& xi = val(x);
        const int nd = xi.ndim();
        require(nd == 2 || nd == 3, "slice_axis1: input must be 2-D or 3-D");
        const int C = xi.dim(1);
        require(from >= 0 && count >= 1 && from + count <= C, "slice_axis1: range [",
                from, ",", from + count, ") out of bounds for ", C, " channels");
        const int B = xi.dim(0);
        const int inner = nd == 3 ? xi.dim(2) : 1;
        Shape oshape = xi.shape();
        oshape[1] = count;
        TensorT<T> out(oshape);
        for (int bb = 0; bb < B; ++bb)
            for (int j = 0; j < count * inner; ++j)
                out[(static_cast<int64_t>(bb) * count) * inner + j] =
                    xi[(static_cast<int64_t>(bb) * C + from) * inner + j];
        return push_op(std::move(out), {x}, [=, this](const TensorT<T>& dy) {
            TensorT<T>* dx = grad_slot(x);
            if (!dx) return;
            for (int bb = 0; bb < B; ++bb)
                for (int j = 0; j < count * inner; ++j)
                    (*dx)[(static_cast<int64_t>(bb) * C + from) * inner + j] +=
                        dy[(static_cast<int64_t>(bb) * count) * inner + j];
        });
    }

    /// [B,C,L] -> [B,2,L]: per-position average and maximum across channels.
    Var channel_avg_max(Var x) {
        const TensorT<T>& xi = val(x);
        require(xi.ndim() == 3, "channel_avg_max: input must be [B,C,L]");
        const int B = xi.dim(0), C = xi.dim(1), L = xi.dim(2);
        TensorT<T> out({B, 2, L});
        std::vector<int> argmax(static_cast<size_t>(B) * L);
        for (int bb = 0; bb < B; ++bb)
            for (int l = 0; l < L; ++l) {
                T acc = 0, bv = xi.at(bb, 0, l);
                int bc = 0;
                for (int c = 0; c < C; ++c) {
                    const T v = xi.at(bb, c, l);
                    acc += v;
                    if (v > bv) {
                        bv = v;
                        bc = c;
                    }
                }
                out.at(bb, 0, l) = acc / static_cast<T>(C);
                out.at(bb, 1, l) = bv;
                argmax[static_cast<size_t>(bb) * L + l] = bc;
            }
        return push_op(std::move(out), {x},
                       [=, this, argmax = std::move(argmax)](const TensorT<T>& dy) {
            TensorT<T>* dx = grad_slot(x);
            if (!dx) return;
            for (int bb = 0; bb < B; ++bb)
                for (int l = 0; l < L; ++l) {
                    const T share = dy.at(bb, 0, l) / static_cast<T>(C);
                    for (int c = 0; c < C; ++c) dx->at(bb, c, l) += share;
                    dx->at(bb, argmax[static_cast<size_t>(bb) * L + l], l) += dy.at(bb, 1, l);
                }
        });
    }

    /// x [B,C,L] * gate [B,1,L], broadcast over channels.
    Var mul_gate_time(Var x, Var gate) {
        const TensorT<T>& xi = val(x);
        const TensorT<T>& gi = val(gate);
        require(xi.ndim() == 3 && gi.ndim() == 3 && gi.dim(1) == 1 &&
                    gi.dim(0) == xi.dim(0) && gi.dim(2) == xi.dim(2),
                "mul_gate_time: gate must be [B,1,L] matching input ",
                shape_str(xi.shape()), ", got ", shape_str(gi.shape()));
        const int B = xi.dim(0), C = xi.dim(1), L = xi.dim(2);
        TensorT<T> out(xi.shape());
        for (int bb = 0; bb < B; ++bb)
            for (int c = 0; c < C; ++c)
                for (int l = 0; l < L; ++l)
                    out.at(bb, c, l) = xi.at(bb, c, l) * gi.at(bb, 0, l);
        return push_op(std::move(out), {x, gate}, [=, this](const TensorT<T>& dy) {
            TensorT<T>* dx = grad_slot(x);
            TensorT<T>* dg = grad_slot(gate);
            const TensorT<T>& xv = val(x);
            const TensorT<T>& gv = val(gate);
            for (int bb = 0; bb < B; ++bb)
                for (int c = 0; c < C; ++c)
                    for (int l = 0; l < L; ++l) {
                        const T go = dy.at(bb, c, l);
                        if (dx) dx->at(bb, c, l) += go * gv.at(bb, 0, l);
                        if (dg) dg->at(bb, 0, l) += go * xv.at(bb, c, l);
                    }
        });
    }

    /// x [B,C,L] * gate [B,C], broadcast over positions.
    Var mul_gate_channel(Var x, Var gate) {
        const TensorT<T>& xi = val(x);
        const TensorT<T>& gi = val(gate);
        require(xi.ndim() == 3 && gi.ndim() == 2 && gi.dim(0) == xi.dim(0) &&
                    gi.dim(1) == xi.dim(1),
                "mul_gate_channel: gate must be [B,C] matching input ",
                shape_str(xi.shape()), ", got ", shape_str(gi.shape()));
        const int B = xi.dim(0), C = xi.dim(1), L = xi.dim(2);
        TensorT<T> out(xi.shape());
        for (int bb = 0; bb < B; ++bb)
            for (int c = 0; c < C; ++c)
                for (int l = 0; l < L; ++l)
                    out.at(bb, c, l) = xi.at(bb, c, l) * gi.at(bb, c);
        return push_op(std::move(out), {x, gate}, [=, this](const TensorT<T>& dy) {
            TensorT<T>* dx = grad_slot(x);
            TensorT<T>* dg = grad_slot(gate);
            const TensorT<T>& xv = val(x);
            const TensorT<T>& gv = val(gate);
            for (int bb = 0; bb < B; ++bb)
                for (int c = 0; c < C; ++c)
                    for (int l = 0; l < L; ++l) {
                        const T go = dy.at(bb, c, l);
                        if (dx) dx->at(bb, c, l) += go * gv.at(bb, c);
                        if (dg) dg->at(bb, c) += go * xv.at(bb, c, l);
                    }
        });
    }

    /// x [B,C,L] + bias [B,C], broadcast over positions.
    Var add_gate_channel(Var x, Var bias) {
        const TensorT<T>& xi = val(x);
        const TensorT<T>& gi = val(bias);
        require(xi.ndim() == 3 && gi.ndim() == 2 && gi.dim(0) == xi.dim(0) &&
                    gi.dim(1) == xi.dim(1),
                "add_gate_channel: bias must be [B,C] matching input ",
                shape_str(xi.shape()), ", got ", shape_str(gi.shape()));
        const int B = xi.dim(0), C = xi.dim(1), L = xi.dim(2);
        TensorT<T> out(xi.shape());
        for (int bb = 0; bb < B; ++bb)
            for (int c = 0; c < C; ++c)
                for (int l = 0; l < L; ++l)
                    out.at(bb, c, l) = xi.at(bb, c, l) + gi.at(bb, c);
        return push_op(std::move(out), {x, bias}, [=, this](const TensorT<T>& dy) {
            TensorT<T>* dx = grad_slot(x);
            TensorT<T>* dg = grad_slot(bias);
            for (int bb = 0; bb < B; ++bb)
                for (int c = 0; c < C; ++c)
                    for (int l = 0; l < L; ++l) {
                        if (dx) dx->at(bb, c, l) += dy.at(bb, c, l);
                        if (dg) dg->at(bb, c) += dy.at(bb, c, l);
                    }
        });
    }

    Var upsample_nearest(Var x, int factor) {
        const TensorT<T>& xi = val(x);
        require(xi.ndim() == 3, "upsample_nearest: input must be [B,C,L]");
        require(factor >= 1, "upsample_nearest: factor must be >= 1, got ", factor);
        const int B = xi.dim(0), C = xi.dim(1), L = xi.dim(2);
        TensorT<T> out({B, C, L * factor});
        for (int bb = 0; bb < B; ++bb)
            for (int c = 0; c < C; ++c)
                for (int l = 0; l < L * factor; ++l)
                    out.at(bb, c, l) = xi.at(bb, c, l / factor);
        return push_op(std::move(out), {x}, [=, this](const TensorT<T>& dy) {
            TensorT<T>* dx = grad_slot(x);
            if (!dx) return;
            for (int bb = 0; bb < B; ++bb)
                for (int c = 0; c < C; ++c)
                    for (int l = 0; l < L * factor; ++l)
                        dx->at(bb, c, l / factor) += dy.at(bb, c, l);
        });
    }

    /// Zero-pad or crop the sequence axis to an exact target length.
    Var pad_or_crop_time(Var x, int target_len) {
        const TensorT<T>& xi = val(x);
        require(xi.ndim() == 3, "pad_or_crop_time: input must be [B,C,L]");
        require(target_len >= 1, "pad_or_crop_time: target length must be >= 1");
        const int B = xi.dim(0), C = xi.dim(1), L = xi.dim(2);
        const int copy = std::min(L, target_len);
        TensorT<T> out({B, C, target_len});
        for (int bb = 0; bb < B; ++bb)
            for (int c = 0; c < C; ++c)
                for (int l = 0; l < copy; ++l) out.at(bb, c, l) = xi.at(bb, c, l);
        return push_op(std::move(out), {x}, [=, this](const TensorT<T>& dy) {
            TensorT<T>* dx = grad_slot(x);
            if (!dx) return;
            for (int bb = 0; bb < B; ++bb)
                for (int c = 0; c < C; ++c)
                    for (int l = 0; l < copy; ++l) dx->at(bb, c, l) += dy.at(bb, c, l);
        });
    }

    /// Per-channel batch normalization over (batch, position). Training mode
    /// normalizes with batch statistics (population variance) and folds them
    /// into the running buffers; eval mode normalizes with the running stats.
    Var batch_norm1d(Var x, Var gamma, Var beta, TensorT<T>& run_mean, TensorT<T>& run_var,
                     bool training, T momentum, T eps) {
        const TensorT<T>& xi = val(x);
        require(xi.ndim() == 3, "batch_norm1d: input must be [B,C,L]");
        const int B = xi.dim(0), C = xi.dim(1), L = xi.dim(2);
        const TensorT<T>& gi = val(gamma);
        const TensorT<T>& bi = val(beta);
        require(gi.ndim() == 1 && gi.dim(0) == C && bi.ndim() == 1 && bi.dim(0) == C,
                "batch_norm1d: gamma/beta must be [C] with C=", C);
        require(run_mean.ndim() == 1 && run_mean.dim(0) == C && run_var.ndim() == 1 &&
                    run_var.dim(0) == C,
                "batch_norm1d: running stats must be [C] with C=", C);
        const T n = static_cast<T>(B * L);

        std::vector<T> mean(C), inv_std(C);
        if (training) {
            for (int c = 0; c < C; ++c) {
                T mu = 0;
                for (int bb = 0; bb < B; ++bb)
                    for (int l = 0; l < L; ++l) mu += xi.at(bb, c, l);
                mu /= n;
                T var = 0;
                for (int bb = 0; bb < B; ++bb)
                    for (int l = 0; l < L; ++l) {
                        const T d = xi.at(bb, c, l) - mu;
                        var += d * d;
                    }
                var /= n;
                mean[c] = mu;
                inv_std[c] = T(1) / std::sqrt(var + eps);
                run_mean[c] = (T(1) - momentum) * run_mean[c] + momentum * mu;
                run_var[c] = (T(1) - momentum) * run_var[c] + momentum * var;
            }
        } else {
            for (int c = 0; c < C; ++c) {
                mean[c] = run_mean[c];
                inv_std[c] = T(1) / std::sqrt(run_var[c] + eps);
            }
        }

        TensorT<T> xhat({B, C, L});
        TensorT<T> out({B, C, L});
        for (int bb = 0; bb < B; ++bb)
            for (int c = 0; c < C; ++c)
                for (int l = 0; l < L; ++l) {
                    const T h = (xi.at(bb, c, l) - mean[c]) * inv_std[c];
                    xhat.at(bb, c, l) = h;
                    out.at(bb, c, l) = gi[c] * h + bi[c];
                }

        return push_op(std::move(out), {x, gamma, beta},
                       [=, this, xhat = std::move(xhat),
                        inv_std = std::move(inv_std)](const TensorT<T>& dy) {
            TensorT<T>* dx = grad_slot(x);
            TensorT<T>* dg = grad_slot(gamma);
            TensorT<T>* db = grad_slot(beta);
            const TensorT<T>& gv = val(gamma);
            for (int c = 0; c < C; ++c) {
                T sum_dy = 0, sum_dy_h = 0;
                for (int bb = 0; bb < B; ++bb)
                    for (int l = 0; l < L; ++l) {
                        sum_dy += dy.at(bb, c, l);
                        sum_dy_h += dy.at(bb, c, l) * xhat.at(bb, c, l);
                    }
                if (dg) (*dg)[c] += sum_dy_h;
                if (db) (*db)[c] += sum_dy;
                if (dx) {
                    const T k = gv[c] * inv_std[c];
                    if (training) {
                        for (int bb = 0; bb < B; ++bb)
                            for (int l = 0; l < L; ++l)
                                dx->at(bb, c, l) +=
                                    k * (dy.at(bb, c, l) - sum_dy / n -
                                         xhat.at(bb, c, l) * sum_dy_h / n);
                    } else {
                        for (int bb = 0; bb < B; ++bb)
                            for (int l = 0; l < L; ++l)
                                dx->at(bb, c, l) += k * dy.at(bb, c, l);
                    }
                }
            }
        });
    }

    /// probs [B,K] -> [B], picking the target-class entry per row.
    Var select_index(Var probs, std::vector<int> targets) {
        const TensorT<T>& pi = val(probs);
        require(pi.ndim() == 2, "select_index: input must be [B,K]");
        const int B = pi.dim(0), K = pi.dim(1);
        require(static_cast<int>(targets.size()) == B, "select_index: ", targets.size(),
                " targets for batch of ", B);
        for (int t : targets)
            require(t >= 0 && t < K, "select_index: target id ", t, " out of range [0,", K, ")");
        TensorT<T> out({B});
        for (int bb = 0; bb < B; ++bb) out[bb] = pi.at(bb, targets[static_cast<size_t>(bb)]);
        return push_op(std::move(out), {probs},
                       [=, this, targets = std::move(targets)](const TensorT<T>& dy) {
            TensorT<T>* dp = grad_slot(probs);
            if (!dp) return;
            for (int bb = 0; bb < B; ++bb)
                dp->at(bb, targets[static_cast<size_t>(bb)]) += dy[bb];
        });
    }

    /// [B,K] -> [B], sum over dim 1.
    Var sum_axis1(Var x) {
        const TensorT<T>& xi = val(x);
        require(xi.ndim() == 2, "sum_axis1: input must be [B,K]");
        const int B = xi.dim(0), K = xi.dim(1);
        TensorT<T> out({B});
        for (int bb = 0; bb < B; ++bb) {
            T acc = 0;
            for (int k = 0; k < K; ++k) acc += xi.at(bb, k);
            out[bb] = acc;
        }
        return push_op(std::move(out), {x}, [=, this](const TensorT<T>& dy) {
            TensorT<T>* dx = grad_slot(x);
            if (!dx) return;
            for (int bb = 0; bb < B; ++bb)
                for (int k = 0; k < K; ++k) dx->at(bb, k) += dy[bb];
        });
    }

    Var sum_all(Var x) {
        const TensorT<T>& xi = val(x);
        T acc = 0;
        for (int64_t i = 0; i < xi.size(); ++i) acc += xi[i];
        TensorT<T> out({1});
        out[0] = acc;
        return push_op(std::move(out), {x}, [=, this](const TensorT<T>& dy) {
            TensorT<T>* dx = grad_slot(x);
            if (!dx) return;
            for (int64_t i = 0; i < dx->size(); ++i) (*dx)[i] += dy[0];
        });
    }

    Var mean_all(Var x) {
        const int64_t n = val(x).size();
        return scale(sum_all(x), T(1) / static_cast<T>(n));
    }

    // ---- backward ----------------------------------------------------------

    /// Reverse pass from a scalar loss. Populates grad slots of every
    /// registered parameter. May be called once per graph.
    void backward(Var loss) {
        require(val(loss).size() == 1, "backward: loss must be scalar, got shape ",
                shape_str(val(loss).shape()));
        require(!backward_done_, "backward: already run on this graph");
        backward_done_ = true;
        Node& ln = nodes_[static_cast<size_t>(loss.id)];
        require(ln.needs_grad, "backward: loss does not depend on any tracked leaf");
        ln.grad[0] = T(1);
        for (int i = loss.id; i >= 0; --i) {
            Node& nd = nodes_[static_cast<size_t>(i)];
            if (nd.needs_grad && nd.backward) nd.backward(nd.grad);
        }
        for (auto& [p, id] : bound_) {
            const TensorT<T>& g = nodes_[static_cast<size_t>(id)].grad;
            require(p->grad.same_shape(p->value), "parameter ", p->name,
                    " gradient shape mismatch");
            for (int64_t i = 0; i < g.size(); ++i) p->grad[i] += g[i];
        }
    }

    size_t num_nodes() const { return nodes_.size(); }

private:
    struct Node {
        TensorT<T> out;
        TensorT<T> grad;
        bool needs_grad = false;
        std::function<void(const TensorT<T>&)> backward;
    };

    int next_id() const { return static_cast<int>(nodes_.size()); }

    Var push_leaf(TensorT<T> t, bool needs_grad) {
        Node n;
        n.out = std::move(t);
        n.needs_grad = needs_grad;
        if (needs_grad) n.grad = TensorT<T>(n.out.shape());
        nodes_.push_back(std::move(n));
        return Var{next_id() - 1};
    }

    template <typename Fn>
    Var push_op(TensorT<T> out, const std::vector<Var>& inputs, Fn&& bwd) {
        bool needs = false;
        for (Var v : inputs) needs |= nodes_[static_cast<size_t>(v.id)].needs_grad;
        Node n;
        n.out = std::move(out);
        n.needs_grad = needs;
        if (needs) {
            n.grad = TensorT<T>(n.out.shape());
            n.backward = std::forward<Fn>(bwd);
        }
        nodes_.push_back(std::move(n));
        return Var{next_id() - 1};
    }

    /// Gradient accumulator of a node, or nullptr when it tracks no gradient.
    TensorT<T>* grad_slot(Var v) {
        Node& n = nodes_[static_cast<size_t>(v.id)];
        return n.needs_grad ? &n.grad : nullptr;
    }

    Var binary(Var x, Var y, bool mul_op, bool negate_y) {
        const TensorT<T>& xi = val(x);
        const TensorT<T>& yi = val(y);
        require(xi.same_shape(yi), "elementwise op: shape mismatch ", shape_str(xi.shape()),
                " vs ", shape_str(yi.shape()));
        TensorT<T> out(xi.shape());
        for (int64_t i = 0; i < out.size(); ++i)
            out[i] = mul_op ? xi[i] * yi[i] : (negate_y ? xi[i] - yi[i] : xi[i] + yi[i]);
        return push_op(std::move(out), {x, y}, [=, this](const TensorT<T>& dy) {
            TensorT<T>* dx = grad_slot(x);
            TensorT<T>* dyv = grad_slot(y);
            const TensorT<T>& xv = val(x);
            const TensorT<T>& yv = val(y);
            for (int64_t i = 0; i < dy.size(); ++i) {
                if (mul_op) {
                    if (dx) (*dx)[i] += dy[i] * yv[i];
                    if (dyv) (*dyv)[i] += dy[i] * xv[i];
                } else {
                    if (dx) (*dx)[i] += dy[i];
                    if (dyv) (*dyv)[i] += negate_y ? -dy[i] : dy[i];
                }
            }
        });
    }

    static std::tuple<int64_t, int64_t, int64_t> axis_strides(const Shape& s, int axis) {
        int64_t outer = 1, inner = 1;
        for (int i = 0; i < axis; ++i) outer *= s[static_cast<size_t>(i)];
        for (size_t i = static_cast<size_t>(axis) + 1; i < s.size(); ++i) inner *= s[i];
        return {outer, s[static_cast<size_t>(axis)], inner};
    }

    std::vector<Node> nodes_;
    std::vector<std::pair<ParameterT<T>*, int>> bound_;
    bool backward_done_ = false;
};

using Graph = GraphT<float>;
using GraphD = GraphT<double>;

}  // namespace har
