#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>

#include <gtest/gtest.h>

#include "m2curl/numerics/adam.hpp"
#include "m2curl/numerics/checkpoint.hpp"
#include "m2curl/numerics/gradcheck.hpp"
#include "m2curl/numerics/layers.hpp"
#include "test_util.hpp"

using namespace m2curl;

namespace {

Tensor<double> random_tensor(Shape shape, std::mt19937_64& rng, double scale = 1.0) {
    Tensor<double> t(std::move(shape));
    std::normal_distribution<double> d(0.0, scale);
    for (auto& v : t.data()) v = d(rng);
    return t;
}

// Direct-summation cross-correlation used as an oracle.
Tensor<double> conv_oracle(const Tensor<double>& x, const Tensor<double>& k, const Tensor<double>& b,
                           std::size_t stride) {
    const std::size_t C = x.dim(0), H = x.dim(1), W = x.dim(2), O = k.dim(0), K = k.dim(2);
    const std::size_t OH = (H - K) / stride + 1, OW = (W - K) / stride + 1;
    Tensor<double> out(Shape{O, OH, OW});
    for (std::size_t o = 0; o < O; ++o)
        for (std::size_t i = 0; i < OH; ++i)
            for (std::size_t j = 0; j < OW; ++j) {
                double s = b[o];
                for (std::size_t c = 0; c < C; ++c)
                    for (std::size_t u = 0; u < K; ++u)
                        for (std::size_t v = 0; v < K; ++v)
                            s += k[((o * C + c) * K + u) * K + v] * x[(c * H + i * stride + u) * W + j * stride + v];
                out[(o * OH + i) * OW + j] = s;
            }
    return out;
}

}  // namespace

TEST(Affine, IdentityWeightReturnsInput) {
    Tape<double> tape;
    Parameter<double> w("w", Tensor<double>::matrix(2, 2, {1, 0, 0, 1}));
    Parameter<double> b("b", Tensor<double>(Shape{2}));
    Var y = ops::affine(tape, tape.constant(Tensor<double>::vector({3, -1})), tape.param(w), tape.param(b));
    EXPECT_EQ(tape.value(y).storage(), (std::vector<double>{3, -1}));
}

TEST(Affine, HandMultiply) {
    // Hand oracle: [1,1] * [[1,2],[3,4]] + [1,1] = [1+3+1, 2+4+1].
    Tape<double> tape;
    Parameter<double> w("w", Tensor<double>::matrix(2, 2, {1, 2, 3, 4}));
    Parameter<double> b("b", Tensor<double>::vector({1, 1}));
    Var y = ops::affine(tape, tape.constant(Tensor<double>::vector({1, 1})), tape.param(w), tape.param(b));
    EXPECT_EQ(tape.value(y).storage(), (std::vector<double>{5, 7}));
}

TEST(Affine, ZeroWeightGivesBias) {
    Tape<double> tape;
    Parameter<double> w("w", Tensor<double>(Shape{3, 1}));
    Parameter<double> b("b", Tensor<double>::vector({2.5}));
    Var y = ops::affine(tape, tape.constant(Tensor<double>::matrix(2, 3, {1, -4, 9, 0.5, 2, -3})), tape.param(w),
                        tape.param(b));
    EXPECT_EQ(tape.value(y).storage(), (std::vector<double>{2.5, 2.5}));
}

TEST(Affine, ShapeMismatchNamesBothShapes) {
    Tape<double> tape;
    Parameter<double> w("w", Tensor<double>(Shape{3, 2}));
    Parameter<double> b("b", Tensor<double>(Shape{2}));
    try {
        ops::affine(tape, tape.constant(Tensor<double>(Shape{4, 5})), tape.param(w), tape.param(b));
        FAIL() << "expected DimensionError";
    } catch (const DimensionError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("[4,5]"), std::string::npos) << msg;
        EXPECT_NE(msg.find("[3,2]"), std::string::npos) << msg;
    }
}

TEST(Affine, MatchesLoopOracleOnRandomShapes) {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t B = 1 + rng() % 5, in = 1 + rng() % 7, out = 1 + rng() % 6;
        auto x = random_tensor({B, in}, rng), w = random_tensor({in, out}, rng), b = random_tensor({out}, rng);
        Tape<double> tape;
        Var y = ops::affine(tape, tape.constant(x), tape.constant(w), tape.constant(b));
        for (std::size_t i = 0; i < B; ++i)
            for (std::size_t j = 0; j < out; ++j) {
                double s = b[j];
                for (std::size_t k = 0; k < in; ++k) s += x.at(i, k) * w.at(k, j);
                EXPECT_NEAR(tape.value(y).at(i, j), s, 1e-12);
            }
    }
}

TEST(Conv2d, UnitKernelIsIdentity) {
    std::mt19937_64 rng(1);
    auto x = random_tensor({1, 5, 4}, rng);
    Tape<double> tape;
    Parameter<double> k("k", Tensor<double>(Shape{1, 1, 1, 1}, 1.0));
    Parameter<double> b("b", Tensor<double>(Shape{1}));
    Var y = ops::conv2d(tape, tape.constant(x), tape.param(k), tape.param(b), 1);
    EXPECT_EQ(tape.value(y), x);
}

TEST(Conv2d, OnesKernelSumsWindow) {
    Tape<double> tape;
    Parameter<double> k("k", Tensor<double>(Shape{1, 1, 2, 2}, 1.0));
    Parameter<double> b("b", Tensor<double>(Shape{1}));
    Var y = ops::conv2d(tape, tape.constant(Tensor<double>(Shape{1, 2, 2}, {1, 2, 3, 4})), tape.param(k),
                        tape.param(b), 1);
    EXPECT_EQ(tape.value(y).shape(), (Shape{1, 1, 1}));
    EXPECT_EQ(tape.value(y)[0], 10.0);
}

TEST(Conv2d, ZeroInputGivesBias) {
    std::mt19937_64 rng(2);
    Tape<double> tape;
    Parameter<double> k("k", random_tensor({3, 2, 3, 3}, rng));
    Parameter<double> b("b", Tensor<double>::vector({0.5, -1.0, 2.0}));
    Var y = ops::conv2d(tape, tape.constant(Tensor<double>(Shape{2, 7, 7})), tape.param(k), tape.param(b), 2);
    const auto& out = tape.value(y);
    ASSERT_EQ(out.shape(), (Shape{3, 3, 3}));
    for (std::size_t o = 0; o < 3; ++o)
        for (std::size_t p = 0; p < 9; ++p) EXPECT_EQ(out[o * 9 + p], b.value[o]);
}

TEST(Conv2d, KernelLargerThanInputIsDimensionError) {
    Tape<double> tape;
    Parameter<double> k("k", Tensor<double>(Shape{1, 1, 5, 5}));
    Parameter<double> b("b", Tensor<double>(Shape{1}));
    EXPECT_THROW(ops::conv2d(tape, tape.constant(Tensor<double>(Shape{1, 4, 4})), tape.param(k), tape.param(b), 1),
                 DimensionError);
}

TEST(Conv2d, MatchesDirectSummationOracle) {
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 10; ++trial) {
        const std::size_t C = 1 + rng() % 3, O = 1 + rng() % 3, K = 1 + rng() % 3, stride = 1 + rng() % 2;
        const std::size_t H = K + rng() % 6, W = K + rng() % 6, B = 1 + rng() % 3;
        auto x = random_tensor({B, C, H, W}, rng), k = random_tensor({O, C, K, K}, rng), b = random_tensor({O}, rng);
        Tape<double> tape;
        Var y = ops::conv2d(tape, tape.constant(x), tape.constant(k), tape.constant(b), stride);
        const std::size_t OH = (H - K) / stride + 1, OW = (W - K) / stride + 1;
        ASSERT_EQ(tape.value(y).shape(), (Shape{B, O, OH, OW}));
        for (std::size_t bi = 0; bi < B; ++bi) {
            Tensor<double> xi(Shape{C, H, W}, std::vector<double>(x.raw() + bi * C * H * W, x.raw() + (bi + 1) * C * H * W));
            auto ref = conv_oracle(xi, k, b, stride);
            for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_NEAR(tape.value(y)[bi * ref.size() + i], ref[i], 1e-12);
        }
    }
}

TEST(Relu, SignCasesAndSubgradient) {
    Tape<double> tape;
    Parameter<double> x("x", Tensor<double>::vector({-1, 0, 2}));
    Var y = ops::relu(tape, tape.param(x));
    EXPECT_EQ(tape.value(y).storage(), (std::vector<double>{0, 0, 2}));
    tape.backward(ops::sum(tape, y));
    EXPECT_EQ(x.grad.storage(), (std::vector<double>{0, 0, 1}));
}

TEST(Relu, AllNegativeGivesZeros) {
    Tape<double> tape;
    Var y = ops::relu(tape, tape.constant(Tensor<double>::vector({-3, -0.5, -7})));
    EXPECT_EQ(tape.value(y).storage(), (std::vector<double>{0, 0, 0}));
}

TEST(GradEval, SumOfProductHandDerivative) {
    // d/dW sum(x W) for x = [1,1], W 2x1 is x^T = [1,1]^T.
    Tape<double> tape;
    Parameter<double> w("w", Tensor<double>::matrix(2, 1, {0.3, -0.7}));
    Parameter<double> b("b", Tensor<double>(Shape{1}));
    Var y = ops::affine(tape, tape.constant(Tensor<double>::matrix(1, 2, {1, 1})), tape.param(w), tape.detached(b));
    tape.backward(ops::sum(tape, y));
    EXPECT_EQ(w.grad.storage(), (std::vector<double>{1, 1}));
}

TEST(GradEval, UnusedParameterHasZeroGrad) {
    Tape<double> tape;
    Parameter<double> used("used", Tensor<double>::vector({2.0}));
    Parameter<double> unused("unused", Tensor<double>::vector({5.0}));
    tape.param(unused);
    tape.backward(ops::sum(tape, ops::square(tape, tape.param(used))));
    EXPECT_EQ(unused.grad[0], 0.0);
    EXPECT_EQ(used.grad[0], 4.0);
}

TEST(GradEval, SecondCallDoublesGradients) {
    std::mt19937_64 rng(5);
    Parameter<double> w("w", random_tensor({3, 2}, rng));
    Parameter<double> b("b", random_tensor({2}, rng));
    Tape<double> tape;
    Var loss = ops::sum(tape, ops::tanh(tape, ops::affine(tape, tape.constant(random_tensor({4, 3}, rng)),
                                                          tape.param(w), tape.param(b))));
    tape.backward(loss);
    const auto once = w.grad;
    tape.backward(loss);
    for (std::size_t i = 0; i < once.size(); ++i) EXPECT_EQ(w.grad[i], 2.0 * once[i]);
}

TEST(GradEval, NonScalarLossIsContractError) {
    Tape<double> tape;
    Parameter<double> x("x", Tensor<double>::vector({1, 2}));
    EXPECT_THROW(tape.backward(ops::square(tape, tape.param(x))), ContractError);
}

TEST(GradEval, ZeroGradsMakesResultHistoryIndependent) {
    std::mt19937_64 rng(6);
    Parameter<double> w("w", random_tensor({3, 3}, rng));
    Parameter<double> b("b", random_tensor({3}, rng));
    const auto x = random_tensor({2, 3}, rng);
    auto run = [&] {
        Tape<double> tape;
        tape.backward(ops::mean(tape, ops::relu(tape, ops::affine(tape, tape.constant(x), tape.param(w), tape.param(b)))));
    };
    run();
    zero_grads<double>({&w, &b});
    run();
    const auto first = w.grad;
    run();
    run();
    zero_grads<double>({&w, &b});
    run();
    EXPECT_EQ(w.grad, first);
}

TEST(Numerics, NonFiniteResultIsAnError) {
    Tape<double> tape;
    EXPECT_THROW(ops::log(tape, tape.constant(Tensor<double>::vector({-1.0}))), NumericError);
    EXPECT_THROW(ops::exp(tape, tape.constant(Tensor<double>::vector({1e6}))), NumericError);
}

TEST(Adam, ZeroGradLeavesValueAndCountsStep) {
    Parameter<double> p("p", Tensor<double>::vector({1.5, -2.0}));
    AdamState<double> s(p.value.shape(), AdamConfig{});
    adam_step(p, s);
    EXPECT_EQ(p.value.storage(), (std::vector<double>{1.5, -2.0}));
    EXPECT_EQ(s.step_count, 1u);
}

TEST(Adam, FirstStepMovesByLearningRate) {
    // First step closed form: m_hat = g, v_hat = g^2, so delta = -lr * g / (|g| + eps).
    for (double g : {0.37, -4.0, 1e-3}) {
        Parameter<double> p("p", Tensor<double>::vector({0.0}));
        p.grad[0] = g;
        AdamConfig cfg;
        cfg.learning_rate = 0.01;
        AdamState<double> s(p.value.shape(), cfg);
        adam_step(p, s);
        EXPECT_NEAR(p.value[0], -0.01 * g / (std::abs(g) + 1e-8), 1e-15);
        EXPECT_NEAR(std::abs(p.value[0]), 0.01, 1e-7);
    }
}

TEST(Adam, IdenticalInputsGiveIdenticalUpdates) {
    std::mt19937_64 rng(7);
    Parameter<double> a("a", random_tensor({4}, rng));
    Parameter<double> b = a;
    AdamState<double> sa(a.value.shape(), {}), sb(b.value.shape(), {});
    for (int i = 0; i < 5; ++i) {
        a.grad = random_tensor({4}, rng);
        b.grad = a.grad;
        adam_step(a, sa);
        adam_step(b, sb);
    }
    EXPECT_EQ(a.value, b.value);
}

TEST(Adam, ZeroLearningRateNeverMoves) {
    std::mt19937_64 rng(8);
    Parameter<double> p("p", random_tensor({6}, rng));
    const auto before = p.value;
    AdamConfig cfg;
    cfg.learning_rate = 0.0;
    AdamState<double> s(p.value.shape(), cfg);
    for (int i = 0; i < 10; ++i) {
        p.grad = random_tensor({6}, rng);
        adam_step(p, s);
    }
    EXPECT_EQ(p.value, before);
}

TEST(GradCheck, AffineLayer) {
    std::mt19937_64 rng(9);
    Linear<double> layer("fc", 3, 3, rng);
    const auto x = random_tensor({3, 3}, rng);
    auto report = grad_check(
        [&](Tape<double>& t) { return ops::sum(t, ops::square(t, layer(t, t.constant(x), Binding::trainable))); },
        params_of<double>(layer), 1e-4);
    EXPECT_TRUE(report.ok()) << report.summary();
    EXPECT_LT(report.max_rel_error, 1e-4);
}

TEST(GradCheck, ConvLayer) {
    std::mt19937_64 rng(10);
    Conv2d<double> conv("conv", 1, 2, 3, 1, rng);
    const auto x = random_tensor({1, 6, 6}, rng);
    auto report = grad_check(
        [&](Tape<double>& t) { return ops::sum(t, ops::square(t, conv(t, t.constant(x), Binding::trainable))); },
        params_of<double>(conv), 1e-4);
    EXPECT_TRUE(report.ok()) << report.summary();
}

TEST(GradCheck, ConvInputGradientThroughStride) {
    std::mt19937_64 rng(11);
    Conv2d<double> conv("conv", 2, 3, 3, 2, rng);
    Parameter<double> x("x", random_tensor({2, 2, 7, 7}, rng));
    ParamRefs<double> ps = params_of<double>(conv);
    ps.push_back(&x);
    auto report = grad_check(
        [&](Tape<double>& t) { return ops::sum(t, ops::tanh(t, conv(t, t.param(x), Binding::trainable))); }, ps, 1e-4);
    EXPECT_TRUE(report.ok()) << report.summary();
}

TEST(GradCheck, ElementwiseAndStructuralOps) {
    std::mt19937_64 rng(12);
    Parameter<double> a("a", random_tensor({3, 4}, rng));
    Parameter<double> b("b", random_tensor({3, 4}, rng));
    Parameter<double> v("v", random_tensor({4}, rng));
    auto report = grad_check(
        [&](Tape<double>& t) {
            Var av = t.param(a), bv = t.param(b);
            Var e = ops::exp(t, ops::scale(t, av, 0.3));
            Var l = ops::log(t, ops::add_scalar(t, ops::square(t, bv), 1.0));
            Var m = ops::minimum(t, e, l);
            Var sp = ops::softplus(t, ops::mul(t, av, bv));
            Var c = ops::clamp(t, ops::sub(t, sp, m), -0.5, 0.5);
            Var cat = ops::concat_cols(t, {c, ops::broadcast_rows(t, t.param(v), 3)});
            Var sl = ops::slice_cols(t, cat, 2, 7);
            Var n = ops::l2_normalize_rows(t, sl);
            return ops::add(t, ops::sum(t, ops::sum_cols(t, ops::mul(t, n, n))), ops::mean(t, ops::tanh(t, sl)));
        },
        {&a, &b, &v}, 1e-4);
    EXPECT_TRUE(report.ok()) << report.summary();
}

TEST(GradCheck, InfoNceBothSides) {
    std::mt19937_64 rng(13);
    Parameter<double> q("q", random_tensor({5, 3}, rng));
    Parameter<double> k("k", random_tensor({5, 3}, rng));
    auto report = grad_check(
        [&](Tape<double>& t) {
            return ops::info_nce(t, ops::l2_normalize_rows(t, t.param(q)), ops::l2_normalize_rows(t, t.param(k)), 0.2);
        },
        {&q, &k}, 1e-4);
    EXPECT_TRUE(report.ok()) << report.summary();
}

TEST(GradCheck, ReportsOffendingParameter) {
    // A deliberately wrong gradient: the tape sees a constant, the loss depends on p.
    Parameter<double> p("broken", Tensor<double>::vector({0.5, 1.5}));
    Parameter<double> ok("fine", Tensor<double>::vector({1.0}));
    auto report = grad_check(
        [&](Tape<double>& t) {
            Var c = t.constant(p.value);
            return ops::add(t, ops::sum(t, ops::square(t, c)), ops::sum(t, ops::square(t, t.param(ok))));
        },
        {&p, &ok}, 1e-4);
    EXPECT_FALSE(report.ok());
    ASSERT_EQ(report.failures.size(), 1u);
    EXPECT_EQ(report.failures[0], "broken");
    EXPECT_THROW(report.require_ok(), NumericError);
}

TEST(Checkpoint, RoundTripIsBitExactAndStable) {
    std::mt19937_64 rng(14);
    Mlp<float> net("net", {5, 7, 3}, rng);
    const auto dir = test_util::temp_dir("ckpt");
    auto ck = Checkpoint::from_params<float>(const_params_of<float>(net));
    ck.metadata["env_steps"] = 42;
    save_checkpoint(ck, dir / "a");

    Mlp<float> other("net", {5, 7, 3}, rng);
    load_checkpoint(dir / "a").into_params<float>(params_of<float>(other));
    const auto pa = const_params_of<float>(net), pb = const_params_of<float>(other);
    for (std::size_t i = 0; i < pa.size(); ++i) EXPECT_EQ(pa[i]->value, pb[i]->value);

    save_checkpoint(load_checkpoint(dir / "a"), dir / "b");
    EXPECT_EQ(test_util::read_bytes(dir / "a.bin"), test_util::read_bytes(dir / "b.bin"));
    auto ja = test_util::read_bytes(dir / "a.json"), jb = test_util::read_bytes(dir / "b.json");
    // Manifests differ only in the blob file name.
    EXPECT_EQ(ja.size(), jb.size());
}

TEST(Checkpoint, BlobIsLittleEndianF32InManifestOrder) {
    Parameter<float> a("a", Tensor<float>::vector({1.0f, -2.0f}));
    Parameter<float> b("b", Tensor<float>::vector({0.5f}));
    const auto dir = test_util::temp_dir("ckpt_le");
    save_checkpoint(Checkpoint::from_params<float>({&a, &b}), dir / "m");
    const auto bytes = test_util::read_bytes(dir / "m.bin");
    ASSERT_EQ(bytes.size(), 12u);
    // 1.0f = 0x3F800000, -2.0f = 0xC0000000, 0.5f = 0x3F000000
    const std::vector<unsigned char> expect{0, 0, 0x80, 0x3F, 0, 0, 0, 0xC0, 0, 0, 0, 0x3F};
    EXPECT_EQ(bytes, expect);
}

TEST(Checkpoint, ShapeMismatchIsRejected) {
    std::mt19937_64 rng(15);
    Mlp<float> net("net", {2, 3}, rng), wrong("net", {2, 4}, rng);
    const auto dir = test_util::temp_dir("ckpt_bad");
    save_checkpoint(Checkpoint::from_params<float>(const_params_of<float>(net)), dir / "c");
    EXPECT_THROW(load_checkpoint(dir / "c").into_params<float>(params_of<float>(wrong)), ParseError);
}
