#include <cmath>

#include <gtest/gtest.h>

#include "set2seq/model/encoder.hpp"
#include "set2seq/numerics/gradcheck.hpp"
#include "test_util.hpp"

using namespace set2seq;
using namespace set2seq::testing;

namespace {

template <class T>
struct Fixture {
    ParameterStore<T> store;
    EncoderWeights w;
    EncoderConfig cfg;

    explicit Fixture(EncoderConfig c, std::uint64_t seed = 1) : cfg(c) {
        SeededRng rng(seed);
        w = EncoderWeights::create(store, cfg, rng);
    }

    EncodedSet<T> encode(Tape<T>& t, const Matrix<T>& x, const Mask& m) {
        Context<T> ctx(t, store);
        return encode_set(ctx, t.constant(x), w, cfg, m);
    }
    EncodedSet<T> encode(Tape<T>& t, const Matrix<T>& x) { return encode(t, x, full_mask(static_cast<std::size_t>(x.rows()))); }
};

EncoderConfig small_cfg(int sit = 2, bool augment = true) {
    EncoderConfig c;
    c.d_input = 3;
    c.d_model = 8;
    c.n_heads = 2;
    c.n_sit_layers = sit;
    c.augment_set = augment;
    return c;
}

}  // namespace

TEST(EncoderConfigTest, Validation) {
    EncoderConfig c = small_cfg();
    c.n_heads = 3;
    EXPECT_THROW(c.validate(), Error);
    c = small_cfg();
    c.n_sit_layers = -1;
    EXPECT_THROW(c.validate(), Error);
    c = small_cfg();
    c.dropout = 1.0;
    EXPECT_THROW(c.validate(), Error);
    EXPECT_EQ(sigma_from_string("tanh"), Sigma::tanh);
    EXPECT_THROW(sigma_from_string("gelu"), Error);
}

TEST(MultiHeadAttention, SingleKeyReturnsProjectedValue) {
    Fixture<double> f(small_cfg());
    SeededRng rng(2);
    auto x = random_matrix<double>(1, 8, rng);
    Tape<double> t;
    Context<double> ctx(t, f.store);
    auto out = multi_head_attention(ctx, t.constant(x), t.constant(x), f.w.basic, 2, full_mask(1));
    Matrix<double> expected = x * f.store[f.w.basic.wv].value * f.store[f.w.basic.wo].value;
    EXPECT_LT(max_abs_diff(out.value(), expected), 1e-14);
}

TEST(MultiHeadAttention, KeyOrderIrrelevantForFixedQuery) {
    Fixture<double> f(small_cfg());
    SeededRng rng(3);
    auto q = random_matrix<double>(2, 8, rng);
    auto kv = random_matrix<double>(5, 8, rng);
    Mask mask{1, 0, 1, 1, 0};
    Tape<double> t;
    Context<double> ctx(t, f.store);
    auto base = multi_head_attention(ctx, t.constant(q), t.constant(kv), f.w.basic, 2, mask).value();
    std::vector<std::size_t> order{3, 4, 0, 2, 1};
    Mask pmask;
    for (auto i : order) pmask.push_back(mask[i]);
    auto perm = multi_head_attention(ctx, t.constant(q), t.constant(permute_rows(kv, order)), f.w.basic, 2, pmask).value();
    EXPECT_LT(max_abs_diff(base, perm), 1e-12);
    EXPECT_THROW(multi_head_attention(ctx, t.constant(q), t.constant(kv), f.w.basic, 2, Mask(5, 0)), Error);
}

TEST(MultiHeadAttention, MatchesNaivePerHeadLoop) {
    Fixture<double> f(small_cfg());
    SeededRng rng(4);
    auto x = random_matrix<double>(3, 8, rng);
    Tape<double> t;
    Context<double> ctx(t, f.store);
    auto out = multi_head_attention(ctx, t.constant(x), t.constant(x), f.w.basic, 2, full_mask(3)).value();

    auto X = to_vec(x);
    auto Q = naive_matmul(X, to_vec(f.store[f.w.basic.wq].value));
    auto K = naive_matmul(X, to_vec(f.store[f.w.basic.wk].value));
    auto V = naive_matmul(X, to_vec(f.store[f.w.basic.wv].value));
    Grid concat(3, std::vector<double>());
    for (std::size_t h = 0; h < 2; ++h) {
        auto H = naive_attention(naive_cols(Q, 4 * h, 4), naive_cols(K, 4 * h, 4), naive_cols(V, 4 * h, 4), 1.0 / 2.0, full_mask(3));
        for (std::size_t i = 0; i < 3; ++i) concat[i].insert(concat[i].end(), H[i].begin(), H[i].end());
    }
    auto ref = naive_matmul(concat, to_vec(f.store[f.w.basic.wo].value));
    EXPECT_LT(max_abs_diff(ref, out), 1e-12);
}

TEST(EncodeElements, EquivarianceAndDuplicates) {
    Fixture<double> f(small_cfg());
    SeededRng rng(5);
    auto x = random_matrix<double>(6, 8, rng);
    x.row(4) = x.row(1);
    Tape<double> t;
    Context<double> ctx(t, f.store);
    auto e = encode_elements(ctx, t.constant(x), f.w.basic, 2, full_mask(6)).value();
    EXPECT_LT(max_abs_diff<double>(e.row(4), e.row(1)), 1e-14);
    std::vector<std::size_t> order{5, 2, 0, 4, 1, 3};
    auto ep = encode_elements(ctx, t.constant(permute_rows(x, order)), f.w.basic, 2, full_mask(6)).value();
    EXPECT_LT(max_abs_diff(ep, permute_rows(e, order)), 1e-12);
}

TEST(EncodeElements, HandSetTwoByTwo) {
    // d=2, one head, identity projections: scores = x x^T / sqrt(2).
    EncoderConfig c;
    c.d_input = 2;
    c.d_model = 2;
    c.n_heads = 1;
    c.n_sit_layers = 0;
    Fixture<double> f(c);
    for (auto idx : {f.w.basic.wq, f.w.basic.wk, f.w.basic.wv, f.w.basic.wo}) f.store[idx].value.setIdentity();
    Matrix<double> x(2, 2);
    x << 1, 0, 0, 1;
    Tape<double> t;
    Context<double> ctx(t, f.store);
    auto e = encode_elements(ctx, t.constant(x), f.w.basic, 1, full_mask(2)).value();
    // a = 1 / (1 + exp(-1/sqrt(2))), reference arithmetic at 20 digits.
    EXPECT_NEAR(e(0, 0), 0.66976154932665692562, 1e-15);
    EXPECT_NEAR(e(0, 1), 0.33023845067334307438, 1e-15);
    EXPECT_NEAR(e(1, 0), 0.33023845067334307438, 1e-15);
    EXPECT_NEAR(e(1, 1), 0.66976154932665692562, 1e-15);
}

TEST(Pma, InvarianceSingleRowAndDuplicates) {
    Fixture<double> f(small_cfg());
    SeededRng rng(6);
    auto e = random_matrix<double>(5, 8, rng);
    Tape<double> t;
    Context<double> ctx(t, f.store);
    auto s = pma(ctx, t.constant(e), f.w.pma, 2, full_mask(5)).value();
    ASSERT_EQ(s.rows(), 1);
    ASSERT_EQ(s.cols(), 8);
    for (int trial = 0; trial < 10; ++trial) {
        auto sp = pma(ctx, t.constant(permute_rows(e, rng.permutation(5))), f.w.pma, 2, full_mask(5)).value();
        EXPECT_LT(max_abs_diff(s, sp), 1e-12);
    }
    // n=1: attention weight 1, so s is the fixed linear image e W_V W_O.
    Matrix<double> one = e.topRows(1);
    auto s1 = pma(ctx, t.constant(one), f.w.pma, 2, full_mask(1)).value();
    Matrix<double> lin = one * f.store[f.w.pma.wv].value * f.store[f.w.pma.wo].value;
    EXPECT_LT(max_abs_diff(s1, lin), 1e-14);
    // Duplicate rows renormalise to the same weights as a single copy.
    Matrix<double> two(2, 8);
    two << one, one;
    auto s2 = pma(ctx, t.constant(two), f.w.pma, 2, full_mask(2)).value();
    EXPECT_LT(max_abs_diff(s1, s2), 1e-14);
}

TEST(AugmentSplit, RoundTripAndShapes) {
    SeededRng rng(7);
    Tape<double> t;
    auto e = t.constant(random_matrix<double>(2, 4, rng));
    auto s = t.constant(random_matrix<double>(1, 4, rng));
    auto a = augment(e, s);
    ASSERT_EQ(a.rows(), 3);
    EXPECT_EQ(Matrix<double>(a.value().row(2)), s.value());
    auto [e2, s2] = split(a);
    EXPECT_EQ(e2.value(), e.value());
    EXPECT_EQ(s2.value(), s.value());

    auto five = t.constant(random_matrix<double>(5, 4, rng));
    auto [e5, s5] = split(five);
    EXPECT_EQ(e5.rows(), 4);
    EXPECT_EQ(s5.rows(), 1);
    EXPECT_THROW(split(s), Error);
    EXPECT_THROW(augment(e, t.constant(random_matrix<double>(1, 3, rng))), Error);
}

TEST(SitLayer, JointEquivarianceWithFixedSetRow) {
    for (auto sigma : {Sigma::softmax, Sigma::tanh, Sigma::relu}) {
        auto c = small_cfg(1);
        c.sigma = sigma;
        Fixture<double> f(c);
        SeededRng rng(8);
        auto s_pi = random_matrix<double>(6, 8, rng);  // 5 elements + set row
        Tape<double> t;
        Context<double> ctx(t, f.store);
        auto out = sit_layer(ctx, t.constant(s_pi), f.w.sit[0], c, full_mask(6)).value();
        std::vector<std::size_t> order{3, 1, 4, 0, 2, 5};
        auto outp = sit_layer(ctx, t.constant(permute_rows(s_pi, order)), f.w.sit[0], c, full_mask(6)).value();
        EXPECT_LT(max_abs_diff(outp, permute_rows(out, order)), 1e-12) << to_string(sigma);
    }
}

TEST(SitLayer, MatchesNaiveReference) {
    auto c = small_cfg(1);
    c.use_residual = false;
    c.use_layer_norm = false;
    Fixture<double> f(c);
    SeededRng rng(9);
    auto s_pi = random_matrix<double>(4, 8, rng);
    Tape<double> t;
    Context<double> ctx(t, f.store);
    auto out = sit_layer(ctx, t.constant(s_pi), f.w.sit[0], c, full_mask(4)).value();
    const auto& w = f.w.sit[0].att;
    auto S = to_vec(s_pi);
    auto Q = naive_matmul(S, to_vec(f.store[w.wq].value));
    auto K = naive_matmul(S, to_vec(f.store[w.wk].value));
    auto V = naive_matmul(S, to_vec(f.store[w.wv].value));
    Grid concat(4, std::vector<double>());
    for (std::size_t h = 0; h < 2; ++h) {
        // scaled by sqrt(d_s) with d_s = d_model = 8
        auto H = naive_attention(naive_cols(Q, 4 * h, 4), naive_cols(K, 4 * h, 4), naive_cols(V, 4 * h, 4), 1.0 / std::sqrt(8.0), full_mask(4));
        for (std::size_t i = 0; i < 4; ++i) concat[i].insert(concat[i].end(), H[i].begin(), H[i].end());
    }
    EXPECT_LT(max_abs_diff(naive_matmul(concat, to_vec(f.store[w.wo].value)), out), 1e-12);
}

TEST(SitLayer, TwoRowSoftmaxAttentionRowsSumToOne) {
    // With value and output projections set to identity, and residual/LN
    // off, each output row is a convex combination of the two input rows.
    auto c = small_cfg(1);
    c.n_heads = 1;
    c.use_residual = false;
    c.use_layer_norm = false;
    Fixture<double> f(c);
    f.store[f.w.sit[0].att.wv].value.setIdentity();
    f.store[f.w.sit[0].att.wo].value.setIdentity();
    Matrix<double> s_pi = Matrix<double>::Zero(2, 8);
    s_pi(0, 0) = 1;
    s_pi(1, 1) = 1;
    Tape<double> t;
    Context<double> ctx(t, f.store);
    auto out = sit_layer(ctx, t.constant(s_pi), f.w.sit[0], c, full_mask(2)).value();
    ASSERT_EQ(out.rows(), 2);
    EXPECT_NEAR(out(0, 0) + out(0, 1), 1.0, 1e-14);
    EXPECT_NEAR(out(1, 0) + out(1, 1), 1.0, 1e-14);
}

template <class T>
void check_invariance(double tol) {
    double worst_s = 0, worst_e = 0;
    SeededRng rng(10);
    for (int trial = 0; trial < 100; ++trial) {
        auto c = small_cfg(2);
        Fixture<T> f(c, 1000 + static_cast<std::uint64_t>(trial));
        const auto n = rng.uniform_int(2, 16);
        auto x = random_matrix<T>(n, 3, rng);
        Tape<T> t(false);
        auto base = f.encode(t, x);
        for (int k = 0; k < 5; ++k) {
            auto order = rng.permutation(static_cast<std::size_t>(n));
            auto p = f.encode(t, permute_rows(x, order));
            worst_s = std::max(worst_s, max_abs_diff<T>(p.set.value(), base.set.value()));
            worst_e = std::max(worst_e, max_abs_diff<T>(p.elements.value(), permute_rows<T>(base.elements.value(), order)));
        }
    }
    EXPECT_LT(worst_s, tol);
    EXPECT_LT(worst_e, tol);
}

TEST(EncodeSet, PermutationInvarianceDouble) { check_invariance<double>(1e-10); }
TEST(EncodeSet, PermutationInvarianceSingle) { check_invariance<float>(1e-5); }

TEST(EncodeSet, ZeroLayersEqualsBasicEncoderAndAblation) {
    SeededRng rng(11);
    auto x = random_matrix<double>(7, 3, rng);
    Fixture<double> on(small_cfg(0, true), 5), off(small_cfg(0, false), 5);
    Tape<double> t(false);
    auto a = on.encode(t, x), b = off.encode(t, x);
    EXPECT_EQ(a.elements.value(), b.elements.value());
    EXPECT_EQ(a.set.value(), b.set.value());
    // and equals the basic encoder written out by hand
    Context<double> ctx(t, on.store);
    auto proj = ad::add_row(ad::matmul(t.constant(x), ctx.p(on.w.in_w)), ctx.p(on.w.in_b));
    auto e = ad::add(encode_elements(ctx, proj, on.w.basic, 2, full_mask(7)), proj);
    EXPECT_EQ(a.elements.value(), e.value());
    EXPECT_EQ(a.set.value(), pma(ctx, e, on.w.pma, 2, full_mask(7)).value());
}

TEST(EncodeSet, ShapesAcrossCardinalities) {
    Fixture<float> f(small_cfg(2));
    SeededRng rng(12);
    for (int n : {1, 2, 3, 17, 64, 128}) {
        Tape<float> t(false);
        auto r = f.encode(t, random_matrix<float>(n, 3, rng));
        EXPECT_EQ(r.elements.rows(), n);
        EXPECT_EQ(r.elements.cols(), 8);
        EXPECT_EQ(r.set.rows(), 1);
        EXPECT_EQ(r.set.cols(), 8);
    }
    Tape<float> t(false);
    EXPECT_THROW(f.encode(t, Matrix<float>(0, 3)), Error);
    EXPECT_THROW(f.encode(t, Matrix<float>::Zero(2, 4)), Error);
}

TEST(EncodeSet, PaddingRowsChangeNothing) {
    for (bool augment : {true, false}) {
        Fixture<float> f(small_cfg(2, augment), 21);
        SeededRng rng(13);
        auto x = random_matrix<float>(5, 3, rng);
        Matrix<float> padded(9, 3);
        padded << x, random_matrix<float>(4, 3, rng, -50, 50);
        Mask mask{1, 1, 1, 1, 1, 0, 0, 0, 0};
        Tape<float> t(false);
        auto a = f.encode(t, x);
        auto b = f.encode(t, padded, mask);
        EXPECT_LT(max_abs_diff<float>(a.set.value(), b.set.value()), 1e-6);
        EXPECT_LT(max_abs_diff<float>(a.elements.value(), b.elements.value().topRows(5)), 1e-6);
    }
}

TEST(EncodeSet, SetVectorInvariantUnderFullPipelinePermutation) {
    Fixture<double> f(small_cfg(3));
    SeededRng rng(14);
    auto x = random_matrix<double>(9, 3, rng);
    Tape<double> t(false);
    auto a = f.encode(t, x);
    auto b = f.encode(t, permute_rows(x, rng.permutation(9)));
    EXPECT_LT(max_abs_diff<double>(a.set.value(), b.set.value()), 1e-12);
}

TEST(EncoderGradient, EveryOperationPassesGradCheck) {
    for (auto sigma : {Sigma::softmax, Sigma::tanh}) {
        for (bool augment : {true, false}) {
            auto c = small_cfg(2, augment);
            c.sigma = sigma;
            Fixture<double> f(c, 31);
            SeededRng rng(15);
            auto x = random_matrix<double>(4, 3, rng);
            Matrix<double> proj_e = random_matrix<double>(4, 8, rng), proj_s = random_matrix<double>(1, 8, rng);
            auto rep = grad_check<double>(f.store, [&](Tape<double>& t) {
                auto r = f.encode(t, x);
                return ad::add(ad::sum(ad::mul_const(r.elements, proj_e)), ad::sum(ad::mul_const(r.set, proj_s)));
            });
            for (const auto& e : rep.entries) {
                EXPECT_LT(e.max_rel_error, 1e-3) << e.name << " sigma=" << to_string(sigma) << " augment=" << augment;
            }
        }
    }
}
