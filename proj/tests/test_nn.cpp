#include <cmath>
#include <functional>

#include "doctest.h"
#include "seastereo/nn/ops.hpp"
#include "seastereo/nn/optim.hpp"
#include "seastereo/rng.hpp"

using namespace seastereo;
using namespace seastereo::nn;

namespace {

using D = double;

Tensor<D> rand_tensor(std::vector<int> shape, Rng& rng, double lo = -1, double hi = 1) {
    Tensor<D> t(std::move(shape));
    for (auto& v : t.data) v = rng.uniform(lo, hi);
    return t;
}

// Central finite differences of a scalar-valued graph w.r.t. one leaf.
// `build` must reconstruct the graph from the leaf values each call.
void gradcheck(const std::function<Var<D>(const std::vector<Var<D>>&)>& build,
               std::vector<Tensor<D>> leaf_values, double h = 1e-5,
               double tol = 1e-6) {
    std::vector<Var<D>> leaves;
    for (auto& t : leaf_values) leaves.push_back(make_leaf<D>(t, true));
    Var<D> loss = build(leaves);
    backward(loss);

    for (size_t li = 0; li < leaves.size(); ++li) {
        auto& leaf = leaves[li];
        REQUIRE(!leaf->grad.data.empty());
        for (size_t j = 0; j < leaf->value.data.size(); ++j) {
            double orig = leaf->value.data[j];
            leaf->value.data[j] = orig + h;
            std::vector<Var<D>> fresh;
            for (auto& l : leaves) fresh.push_back(make_leaf<D>(l->value, false));
            double up = build(fresh)->value.data[0];
            leaf->value.data[j] = orig - h;
            fresh.clear();
            for (auto& l : leaves) fresh.push_back(make_leaf<D>(l->value, false));
            double dn = build(fresh)->value.data[0];
            leaf->value.data[j] = orig;

            double fd = (up - dn) / (2 * h);
            double an = leaf->grad.data[j];
            double err = std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-4});
            if (err >= tol) {
                CAPTURE(li);
                CAPTURE(j);
                CAPTURE(fd);
                CAPTURE(an);
            }
            CHECK(err < tol);
        }
    }
}

Tensor<D> rand_like_weights(const std::vector<int>& shape, Rng& rng) {
    Tensor<D> w(shape);
    for (auto& v : w.data) v = rng.uniform(-1, 1);
    return w;
}

}  // namespace

TEST_CASE("gradcheck: elementwise ops") {
    Rng rng(1);
    auto w = rand_like_weights({3, 7}, rng);
    for (auto op : {0, 1, 2, 3, 4, 5}) {
        gradcheck(
            [&, op](const std::vector<Var<D>>& in) {
                Var<D> y;
                switch (op) {
                    case 0: y = leaky_relu(in[0], 0.1); break;
                    case 1: y = sigmoid(in[0]); break;
                    case 2: y = tanh_op(in[0]); break;
                    case 3: y = elu1(in[0]); break;
                    case 4: y = smooth_l1(in[0], 1.0); break;
                    default: y = scale(add_scalar(in[0], 0.3), -1.7); break;
                }
                return weighted_sum(y, w);
            },
            {rand_tensor({3, 7}, rng)});
    }
}

TEST_CASE("gradcheck: binary ops and reductions") {
    Rng rng(2);
    auto w = rand_like_weights({4, 5}, rng);
    gradcheck(
        [&](const std::vector<Var<D>>& in) {
            return weighted_sum(mul(add(in[0], in[1]), sub(in[0], in[1])), w);
        },
        {rand_tensor({4, 5}, rng), rand_tensor({4, 5}, rng)});
    gradcheck([&](const std::vector<Var<D>>& in) { return mean_all(abs_op(in[0])); },
              {rand_tensor({4, 5}, rng, 0.2, 1.0)});
}

TEST_CASE("gradcheck: matmul in all transpose modes") {
    Rng rng(3);
    for (bool ta : {false, true})
        for (bool tb : {false, true}) {
            std::vector<int> sa = ta ? std::vector<int>{4, 3} : std::vector<int>{3, 4};
            std::vector<int> sb = tb ? std::vector<int>{5, 4} : std::vector<int>{4, 5};
            auto w = rand_like_weights({3, 5}, rng);
            gradcheck(
                [&, ta, tb](const std::vector<Var<D>>& in) {
                    return weighted_sum(matmul(in[0], in[1], ta, tb), w);
                },
                {rand_tensor(sa, rng), rand_tensor(sb, rng)});
        }
}

TEST_CASE("gradcheck: layer_norm, softmax, row ops") {
    Rng rng(4);
    auto w = rand_like_weights({6, 5}, rng);
    gradcheck(
        [&](const std::vector<Var<D>>& in) {
            return weighted_sum(layer_norm(in[0], in[1], in[2]), w);
        },
        {rand_tensor({6, 5}, rng), rand_tensor({1, 5}, rng, 0.5, 1.5),
         rand_tensor({1, 5}, rng)},
        1e-5, 1e-5);
    gradcheck(
        [&](const std::vector<Var<D>>& in) {
            return weighted_sum(softmax_dim0(in[0]), w);
        },
        {rand_tensor({6, 5}, rng)});
    auto w2 = rand_like_weights({1, 5}, rng);
    gradcheck(
        [&](const std::vector<Var<D>>& in) {
            return weighted_sum(sum_rows(in[0]), w2);
        },
        {rand_tensor({6, 5}, rng)});
    auto w3 = rand_like_weights({6, 5}, rng);
    gradcheck(
        [&](const std::vector<Var<D>>& in) {
            return weighted_sum(div_colvec(in[0], in[1], 1e-6), w3);
        },
        {rand_tensor({6, 5}, rng), rand_tensor({6, 1}, rng, 0.5, 2.0)});
    gradcheck(
        [&](const std::vector<Var<D>>& in) {
            return weighted_sum(add_rowvec(in[0], in[1]), w3);
        },
        {rand_tensor({6, 5}, rng), rand_tensor({1, 5}, rng)});
}

TEST_CASE("gradcheck: concat, slice, token reshapes") {
    Rng rng(5);
    auto w = rand_like_weights({2, 5, 2, 3}, rng);
    gradcheck(
        [&](const std::vector<Var<D>>& in) {
            return weighted_sum(concat_dim1(in[0], in[1]), w);
        },
        {rand_tensor({2, 2, 2, 3}, rng), rand_tensor({2, 3, 2, 3}, rng)});
    auto w2 = rand_like_weights({2, 2, 2, 3}, rng);
    gradcheck(
        [&](const std::vector<Var<D>>& in) {
            return weighted_sum(slice_dim1(in[0], 1, 2), w2);
        },
        {rand_tensor({2, 4, 2, 3}, rng)});
    auto w3 = rand_like_weights({6, 4}, rng);
    gradcheck(
        [&](const std::vector<Var<D>>& in) {
            return weighted_sum(nchw_to_tokens(in[0]), w3);
        },
        {rand_tensor({1, 4, 2, 3}, rng)});
    auto w4 = rand_like_weights({1, 4, 2, 3}, rng);
    gradcheck(
        [&](const std::vector<Var<D>>& in) {
            return weighted_sum(tokens_to_nchw(in[0], 2, 3), w4);
        },
        {rand_tensor({6, 4}, rng)});
}

TEST_CASE("gradcheck: conv2d strided and padded") {
    Rng rng(6);
    // x [1,3,6,8], w [4,3,3,3], stride 2, pad 1 -> out [1,4,3,4]
    auto w = rand_like_weights({1, 4, 3, 4}, rng);
    gradcheck(
        [&](const std::vector<Var<D>>& in) {
            return weighted_sum(conv2d(in[0], in[1], in[2], 2, 1), w);
        },
        {rand_tensor({1, 3, 6, 8}, rng), rand_tensor({4, 3, 3, 3}, rng),
         rand_tensor({4}, rng)});
    // 1x1 conv, stride 1, no pad, batch 2.
    auto w2 = rand_like_weights({2, 2, 3, 3}, rng);
    gradcheck(
        [&](const std::vector<Var<D>>& in) {
            return weighted_sum(conv2d(in[0], in[1], in[2], 1, 0), w2);
        },
        {rand_tensor({2, 5, 3, 3}, rng), rand_tensor({2, 5, 1, 1}, rng),
         rand_tensor({2}, rng)});
}

TEST_CASE("gradcheck: conv_transpose2d") {
    Rng rng(7);
    // x [1,3,3,4], w [3,2,4,4], stride 2, pad 1 -> out [1,2,6,8]
    auto w = rand_like_weights({1, 2, 6, 8}, rng);
    gradcheck(
        [&](const std::vector<Var<D>>& in) {
            return weighted_sum(conv_transpose2d(in[0], in[1], in[2], 2, 1), w);
        },
        {rand_tensor({1, 3, 3, 4}, rng), rand_tensor({3, 2, 4, 4}, rng),
         rand_tensor({2}, rng)});
}

TEST_CASE("conv_transpose2d matches the conv2d adjoint relation") {
    // <conv(x), y> == <x, deconv(y)> for shared weights and zero bias.
    Rng rng(8);
    auto x = make_leaf<D>(rand_tensor({1, 3, 5, 7}, rng));
    auto wt = rand_tensor({4, 3, 3, 3}, rng);
    auto w_conv = make_leaf<D>(wt);
    // The conv weight [O,C,kh,kw] reinterpreted as [Cin,Out,kh,kw] is the
    // adjoint operator's weight, same buffer.
    Tensor<D> wt_t = wt;
    wt_t.shape = {4, 3, 3, 3};
    auto w_deconv = make_leaf<D>(wt_t);
    auto y = make_leaf<D>(rand_tensor({1, 4, 3, 4}, rng));

    auto cx = conv2d<D>(x, w_conv, nullptr, 2, 1);
    auto dy = conv_transpose2d<D>(y, w_deconv, nullptr, 2, 1);
    double lhs = 0, rhs = 0;
    for (size_t i = 0; i < cx->value.data.size(); ++i)
        lhs += cx->value.data[i] * y->value.data[i];
    for (size_t i = 0; i < dy->value.data.size(); ++i)
        rhs += dy->value.data[i] * x->value.data[i];
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-10));
}

TEST_CASE("gradcheck: upsample, l2norm, corr volume, lookup, mask mix") {
    Rng rng(9);
    auto w = rand_like_weights({1, 2, 6, 8}, rng);
    gradcheck(
        [&](const std::vector<Var<D>>& in) {
            return weighted_sum(upsample_bilinear(in[0], 2), w);
        },
        {rand_tensor({1, 2, 3, 4}, rng)});

    auto w2 = rand_like_weights({1, 3, 2, 4}, rng);
    gradcheck(
        [&](const std::vector<Var<D>>& in) {
            return weighted_sum(l2norm_channels(in[0]), w2);
        },
        {rand_tensor({1, 3, 2, 4}, rng)});

    auto w3 = rand_like_weights({1, 3, 2, 4}, rng);
    gradcheck(
        [&](const std::vector<Var<D>>& in) {
            return weighted_sum(corr_volume(in[0], in[1], 3), w3);
        },
        {rand_tensor({1, 3, 2, 4}, rng), rand_tensor({1, 3, 2, 4}, rng)});

    // Lookup: disparity constant, gradient flows into the volume.
    Tensor<D> disp({1, 1, 2, 4});
    for (auto& v : disp.data) v = rng.uniform(0.0, 12.0);
    auto w4 = rand_like_weights({1, 5, 2, 4}, rng);
    gradcheck(
        [&](const std::vector<Var<D>>& in) {
            auto d = make_const<D>(disp);
            return weighted_sum(lookup_volume(in[0], d, 2), w4);
        },
        {rand_tensor({1, 4, 2, 4}, rng)});

    Tensor<D> mask({3, 4});
    for (auto& v : mask.data) v = rng.uniform() < 0.5 ? 0.0 : 1.0;
    auto w5 = rand_like_weights({1, 2, 3, 4}, rng);
    gradcheck(
        [&](const std::vector<Var<D>>& in) {
            return weighted_sum(mask_mix(in[0], in[1], mask), w5);
        },
        {rand_tensor({1, 2, 3, 4}, rng), rand_tensor({2}, rng)});
}

TEST_CASE("adam drives a quadratic to its minimum") {
    Rng rng(10);
    ParamStore<D> store;
    auto p = store.create("p", rand_tensor({4}, rng, 2.0, 3.0));
    Adam<D> opt(store.params(), 0.9, 0.999, 1e-8, 0.0, 0.0);
    for (int step = 0; step < 400; ++step) {
        auto diff = add_scalar(p, -1.5);
        auto loss = mean_all(mul(diff, diff));
        opt.zero_grad();
        backward(loss);
        opt.step(0.05);
    }
    for (double v : p->value.data) CHECK(v == doctest::Approx(1.5).epsilon(1e-2));
}

TEST_CASE("gradients accumulate across branches and detach blocks them") {
    Rng rng(11);
    auto x = make_leaf<D>(rand_tensor({2, 2}, rng), true);
    auto y = add(mul(x, x), detach(mul(x, x)));
    backward(sum_all(y));
    // Only the live branch contributes: d/dx sum(x^2) = 2x.
    for (size_t i = 0; i < x->value.data.size(); ++i)
        CHECK(x->grad.data[i] == doctest::Approx(2 * x->value.data[i]).epsilon(1e-12));
}
