// Finite-difference validation of every differentiable op in the substrate,
// at 64-bit precision on small random shapes.
#include <gtest/gtest.h>

#include "har/core/graph.hpp"
#include "har/core/random.hpp"
#include "oracles.hpp"

using namespace har;

namespace {

constexpr double kTol = 1e-4;

TensorD random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
    TensorD t(std::move(shape));
    rng.fill_uniform(t, lo, hi);
    return t;
}

/// Projects an op output to a scalar with fixed random weights so every
/// output element influences the loss differently.
Var weighted_sum(GraphD& g, Var y, uint64_t seed) {
    Rng rng(seed);
    TensorD r(g.val(y).shape());
    rng.fill_uniform(r, -1.0, 1.0);
    return g.sum_all(g.mul(y, g.value(r)));
}

}  // namespace

TEST(Gradients, Conv1dAllLeaves) {
    Rng rng(101);
    for (int trial = 0; trial < 6; ++trial) {
        const int B = rng.uniform_int(1, 2), Cin = 2 * rng.uniform_int(1, 2);
        const int Cout = 2 * rng.uniform_int(1, 2), L = rng.uniform_int(5, 12);
        const int stride = rng.uniform_int(1, 2), pad = rng.uniform_int(0, 1);
        const int groups = trial % 2 == 0 ? 1 : 2;
        const int Kw = 3;
        if ((L + 2 * pad - Kw) / stride + 1 < 1) continue;

        auto fn = [&](const std::vector<TensorD>& leaves, std::vector<TensorD>* grads) {
            GraphD g;
            Var x = g.leaf(leaves[0]);
            Var w = g.leaf(leaves[1]);
            Var b = g.leaf(leaves[2]);
            Var loss = weighted_sum(g, g.conv1d(x, w, b, stride, pad, groups), 55);
            const double lv = g.val(loss)[0];
            if (grads) {
                g.backward(loss);
                *grads = {g.grad(x), g.grad(w), g.grad(b)};
            }
            return lv;
        };
        const double err = oracle::max_fd_error(
            fn, {random_tensor({B, Cin, L}, rng), random_tensor({Cout, Cin / groups, Kw}, rng),
                 random_tensor({Cout}, rng)});
        EXPECT_LT(err, kTol) << "trial " << trial;
    }
}

TEST(Gradients, DenseGrouped) {
    Rng rng(103);
    for (int groups : {1, 2}) {
        auto fn = [&](const std::vector<TensorD>& leaves, std::vector<TensorD>* grads) {
            GraphD g;
            Var x = g.leaf(leaves[0]);
            Var w = g.leaf(leaves[1]);
            Var b = g.leaf(leaves[2]);
            Var loss = weighted_sum(g, g.dense(x, w, b, groups), 77);
            const double lv = g.val(loss)[0];
            if (grads) {
                g.backward(loss);
                *grads = {g.grad(x), g.grad(w), g.grad(b)};
            }
            return lv;
        };
        const double err = oracle::max_fd_error(
            fn, {random_tensor({2, 4}, rng), random_tensor({6, 4}, rng),
                 random_tensor({6}, rng)});
        EXPECT_LT(err, kTol) << "groups " << groups;
    }
}

TEST(Gradients, PoolBothKinds) {
    Rng rng(107);
    for (PoolKind kind : {PoolKind::kAvg, PoolKind::kMax}) {
        auto fn = [&](const std::vector<TensorD>& leaves, std::vector<TensorD>* grads) {
            GraphD g;
            Var x = g.leaf(leaves[0]);
            Var loss = weighted_sum(g, g.pool1d(x, kind, 3, 2), 91);
            const double lv = g.val(loss)[0];
            if (grads) {
                g.backward(loss);
                *grads = {g.grad(x)};
            }
            return lv;
        };
        // well-separated values keep the max argument stable under +-h
        TensorD x({1, 2, 9});
        for (int64_t i = 0; i < x.size(); ++i)
            x[i] = 0.37 * static_cast<double>((i * 7) % 11) - 1.0;
        EXPECT_LT(oracle::max_fd_error(fn, {x}), kTol);
    }
}

TEST(Gradients, ElementwiseChain) {
    Rng rng(109);
    auto fn = [&](const std::vector<TensorD>& leaves, std::vector<TensorD>* grads) {
        GraphD g;
        Var x = g.leaf(leaves[0]);
        Var y = g.leaf(leaves[1]);
        Var z = g.mul(g.add(x, y), g.sub(x, y));
        Var s = g.sigmoid(g.affine(z, 0.5, 0.1));
        Var loss = weighted_sum(g, s, 13);
        const double lv = g.val(loss)[0];
        if (grads) {
            g.backward(loss);
            *grads = {g.grad(x), g.grad(y)};
        }
        return lv;
    };
    EXPECT_LT(oracle::max_fd_error(
                  fn, {random_tensor({2, 3}, rng), random_tensor({2, 3}, rng)}),
              kTol);
}

TEST(Gradients, ReluAwayFromKink) {
    Rng rng(113);
    TensorD x = random_tensor({2, 6}, rng);
    for (int64_t i = 0; i < x.size(); ++i)
        if (std::abs(x[i]) < 0.05) x[i] = 0.2;  // keep +-h on one side of zero
    auto fn = [&](const std::vector<TensorD>& leaves, std::vector<TensorD>* grads) {
        GraphD g;
        Var v = g.leaf(leaves[0]);
        Var loss = weighted_sum(g, g.relu(v), 29);
        const double lv = g.val(loss)[0];
        if (grads) {
            g.backward(loss);
            *grads = {g.grad(v)};
        }
        return lv;
    };
    EXPECT_LT(oracle::max_fd_error(fn, {x}), kTol);
}

TEST(Gradients, SoftmaxLogPow) {
    Rng rng(127);
    auto fn = [&](const std::vector<TensorD>& leaves, std::vector<TensorD>* grads) {
        GraphD g;
        Var x = g.leaf(leaves[0]);
        Var p = g.softmax(x, 1);
        Var lp = g.log_clamped(p);
        Var pw = g.pow_const(p, 2.5);
        Var loss = g.add(weighted_sum(g, lp, 41), weighted_sum(g, pw, 43));
        const double lv = g.val(loss)[0];
        if (grads) {
            g.backward(loss);
            *grads = {g.grad(x)};
        }
        return lv;
    };
    EXPECT_LT(oracle::max_fd_error(fn, {random_tensor({2, 5}, rng, -2.0, 2.0)}), kTol);
}

TEST(Gradients, SoftmaxOverMiddleAxis) {
    Rng rng(131);
    auto fn = [&](const std::vector<TensorD>& leaves, std::vector<TensorD>* grads) {
        GraphD g;
        Var x = g.leaf(leaves[0]);
        Var loss = weighted_sum(g, g.softmax(x, 1), 47);
        const double lv = g.val(loss)[0];
        if (grads) {
            g.backward(loss);
            *grads = {g.grad(x)};
        }
        return lv;
    };
    EXPECT_LT(oracle::max_fd_error(fn, {random_tensor({2, 3, 4}, rng, -2.0, 2.0)}), kTol);
}

TEST(Gradients, GatesAndReductions) {
    Rng rng(137);
    auto fn = [&](const std::vector<TensorD>& leaves, std::vector<TensorD>* grads) {
        GraphD g;
        Var x = g.leaf(leaves[0]);     // [B,C,L]
        Var gate_t = g.leaf(leaves[1]);  // [B,1,L]
        Var gate_c = g.leaf(leaves[2]);  // [B,C]
        Var a = g.mul_gate_time(x, gate_t);
        Var b = g.mul_gate_channel(a, gate_c);
        Var c = g.add_gate_channel(b, gate_c);
        Var d = g.global_avg_pool(c);
        Var loss = g.add(weighted_sum(g, d, 59), g.mean_all(g.sum_axis1(d)));
        const double lv = g.val(loss)[0];
        if (grads) {
            g.backward(loss);
            *grads = {g.grad(x), g.grad(gate_t), g.grad(gate_c)};
        }
        return lv;
    };
    const double err = oracle::max_fd_error(
        fn, {random_tensor({2, 3, 5}, rng), random_tensor({2, 1, 5}, rng),
             random_tensor({2, 3}, rng)});
    EXPECT_LT(err, kTol);
}

TEST(Gradients, ConcatSliceReshapeUpsample) {
    Rng rng(139);
    auto fn = [&](const std::vector<TensorD>& leaves, std::vector<TensorD>* grads) {
        GraphD g;
        Var x = g.leaf(leaves[0]);
        Var y = g.leaf(leaves[1]);
        Var cat = g.concat_axis1({x, y});
        Var up = g.upsample_nearest(cat, 2);
        Var crop = g.pad_or_crop_time(up, 7);
        Var sl = g.slice_axis1(crop, 1, 3);
        Var rs = g.reshape(sl, {2, 3 * 7});
        Var loss = weighted_sum(g, rs, 61);
        const double lv = g.val(loss)[0];
        if (grads) {
            g.backward(loss);
            *grads = {g.grad(x), g.grad(y)};
        }
        return lv;
    };
    const double err = oracle::max_fd_error(
        fn, {random_tensor({2, 2, 4}, rng), random_tensor({2, 3, 4}, rng)});
    EXPECT_LT(err, kTol);
}

TEST(Gradients, ChannelAvgMaxStableArgmax) {
    Rng rng(149);
    TensorD x = random_tensor({2, 4, 5}, rng);
    // separate channel values so the max channel never flips under +-h
    for (int b = 0; b < 2; ++b)
        for (int l = 0; l < 5; ++l)
            for (int c = 0; c < 4; ++c) x.at(b, c, l) += 0.5 * c;
    auto fn = [&](const std::vector<TensorD>& leaves, std::vector<TensorD>* grads) {
        GraphD g;
        Var v = g.leaf(leaves[0]);
        Var loss = weighted_sum(g, g.channel_avg_max(v), 67);
        const double lv = g.val(loss)[0];
        if (grads) {
            g.backward(loss);
            *grads = {g.grad(v)};
        }
        return lv;
    };
    EXPECT_LT(oracle::max_fd_error(fn, {x}), kTol);
}

TEST(Gradients, BatchNormTrainingMode) {
    Rng rng(151);
    auto fn = [&](const std::vector<TensorD>& leaves, std::vector<TensorD>* grads) {
        GraphD g;
        TensorD run_mean({3}), run_var = TensorD::full({3}, 1.0);
        Var x = g.leaf(leaves[0]);
        Var gamma = g.leaf(leaves[1]);
        Var beta = g.leaf(leaves[2]);
        Var y = g.batch_norm1d(x, gamma, beta, run_mean, run_var, true, 0.1, 1e-5);
        Var loss = weighted_sum(g, y, 71);
        const double lv = g.val(loss)[0];
        if (grads) {
            g.backward(loss);
            *grads = {g.grad(x), g.grad(gamma), g.grad(beta)};
        }
        return lv;
    };
    const double err = oracle::max_fd_error(
        fn, {random_tensor({2, 3, 6}, rng, -2.0, 2.0),
             random_tensor({3}, rng, 0.5, 1.5), random_tensor({3}, rng)});
    EXPECT_LT(err, kTol);
}

TEST(Gradients, BatchNormEvalMode) {
    Rng rng(157);
    TensorD run_mean = random_tensor({3}, rng);
    TensorD run_var = random_tensor({3}, rng, 0.5, 2.0);
    auto fn = [&](const std::vector<TensorD>& leaves, std::vector<TensorD>* grads) {
        GraphD g;
        TensorD rm = run_mean, rv = run_var;
        Var x = g.leaf(leaves[0]);
        Var gamma = g.leaf(leaves[1]);
        Var beta = g.leaf(leaves[2]);
        Var y = g.batch_norm1d(x, gamma, beta, rm, rv, false, 0.1, 1e-5);
        Var loss = weighted_sum(g, y, 73);
        const double lv = g.val(loss)[0];
        if (grads) {
            g.backward(loss);
            *grads = {g.grad(x), g.grad(gamma), g.grad(beta)};
        }
        return lv;
    };
    const double err = oracle::max_fd_error(
        fn, {random_tensor({2, 3, 4}, rng), random_tensor({3}, rng, 0.5, 1.5),
             random_tensor({3}, rng)});
    EXPECT_LT(err, kTol);
}

TEST(Gradients, SelectIndexAndAbs) {
    Rng rng(163);
    TensorD x = random_tensor({3, 4}, rng);
    for (int64_t i = 0; i < x.size(); ++i)
        if (std::abs(x[i]) < 0.05) x[i] = 0.3;  // keep abs differentiable at +-h
    auto fn = [&](const std::vector<TensorD>& leaves, std::vector<TensorD>* grads) {
        GraphD g;
        Var v = g.leaf(leaves[0]);
        Var sel = g.select_index(v, {1, 0, 3});
        Var loss = g.add(weighted_sum(g, sel, 79), g.mean_all(g.abs(v)));
        const double lv = g.val(loss)[0];
        if (grads) {
            g.backward(loss);
            *grads = {g.grad(v)};
        }
        return lv;
    };
    EXPECT_LT(oracle::max_fd_error(fn, {x}), kTol);
}

TEST(Gradients, CompositeOfAllCoreOps) {
    // randomized composite mirroring a miniature network, 20 seeds
    for (uint64_t seed = 1; seed <= 20; ++seed) {
        Rng rng(seed * 7919);
        const int B = rng.uniform_int(1, 2);
        const int C = 2 * rng.uniform_int(1, 2);
        const int L = rng.uniform_int(8, 16);
        auto fn = [&](const std::vector<TensorD>& leaves, std::vector<TensorD>* grads) {
            GraphD g;
            Var x = g.leaf(leaves[0]);
            Var w = g.leaf(leaves[1]);
            Var b = g.leaf(leaves[2]);
            Var h = g.conv1d(x, w, b, 1, 1, 1);
            h = g.sigmoid(h);
            h = g.pool1d(h, PoolKind::kAvg, 2, 2);
            Var pooled = g.global_avg_pool(h);
            Var sm = g.softmax(pooled, 1);
            Var loss = weighted_sum(g, g.log_clamped(sm), seed);
            const double lv = g.val(loss)[0];
            if (grads) {
                g.backward(loss);
                *grads = {g.grad(x), g.grad(w), g.grad(b)};
            }
            return lv;
        };
        const double err = oracle::max_fd_error(
            fn, {random_tensor({B, C, L}, rng), random_tensor({4, C, 3}, rng),
                 random_tensor({4}, rng)});
        EXPECT_LT(err, kTol) << "seed " << seed;
    }
}
