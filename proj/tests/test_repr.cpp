#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "m2curl/numerics/gradcheck.hpp"
#include "m2curl/repr/pretrain.hpp"

using namespace m2curl;
using namespace m2curl::repr;

namespace {

ContrastiveConfig small_config(std::size_t crop = 9) {
    ContrastiveConfig c;
    c.crop_size = crop;
    c.embed_dim = 4;
    c.head_hidden = 6;
    return c;
}

std::vector<sim::Observation> random_observations(std::size_t n, std::size_t size, std::mt19937_64& rng) {
    std::uniform_int_distribution<int> px(0, 255);
    std::vector<sim::Observation> out(n);
    for (auto& o : out) {
        o.visual = sim::Image(size, size);
        o.tactile = sim::Image(size, size);
        for (auto& p : o.visual.pixels) p = static_cast<std::uint8_t>(px(rng));
        for (auto& p : o.tactile.pixels) p = static_cast<std::uint8_t>(px(rng));
    }
    return out;
}

ObsBatch pointers(const std::vector<sim::Observation>& obs) {
    ObsBatch b;
    for (const auto& o : obs) b.push_back(&o);
    return b;
}

Tensor<double> random_rows(std::size_t B, std::size_t d, std::mt19937_64& rng) {
    Tensor<double> t(Shape{B, d});
    std::normal_distribution<double> n(0.0, 1.0);
    for (auto& v : t.data()) v = n(rng);
    return t;
}

// Plain double loops: mean_i -log(exp(s_ii / tau) / sum_j exp(s_ij / tau)).
double brute_force_info_nce(const Tensor<double>& q, const Tensor<double>& k, double tau) {
    const std::size_t B = q.dim(0), d = q.dim(1);
    double loss = 0.0;
    for (std::size_t i = 0; i < B; ++i) {
        double denom = 0.0, pos = 0.0;
        for (std::size_t j = 0; j < B; ++j) {
            double s = 0.0;
            for (std::size_t c = 0; c < d; ++c) s += q.at(i, c) * k.at(j, c);
            denom += std::exp(s / tau);
            if (j == i) pos = std::exp(s / tau);
        }
        loss += -std::log(pos / denom);
    }
    return loss / static_cast<double>(B);
}

bool all_grads_zero(const ParamRefs<double>& ps) {
    for (auto* p : ps)
        for (double g : p->grad.data())
            if (g != 0.0) return false;
    return true;
}

bool any_grad_nonzero(const ParamRefs<double>& ps) {
    for (auto* p : ps)
        for (double g : p->grad.data())
            if (g != 0.0) return true;
    return false;
}

struct Fixture {
    std::mt19937_64 rng{11};
    ContrastiveConfig cfg = small_config();
    RepresentationModel<double> model{cfg, rng};
    std::vector<sim::Observation> obs = random_observations(5, 12, rng);
    AugmentedPair<double> aug = augment_pair<double>(pointers(obs), cfg.crop_size, rng);

    // Grads of every parameter after one backward pass of L_MM under `c`.
    CombinedLoss backward(const ContrastiveConfig& c) {
        zero_grads(model.all_params());
        Tape<double> tape;
        CombinedLoss loss = combined_loss(tape, model, aug, c);
        tape.backward(loss.total);
        return loss;
    }
};

}  // namespace

TEST(Augment, FullSizeCropIsIdentityOverNormalization) {
    std::mt19937_64 rng(1);
    auto obs = random_observations(3, 9, rng);
    auto aug = augment_pair<double>(pointers(obs), 9, rng);
    for (std::size_t b = 0; b < 3; ++b)
        for (std::size_t i = 0; i < 81; ++i) {
            EXPECT_EQ(aug.query_visual[b * 81 + i], obs[b].visual.pixels[i] / 255.0);
            EXPECT_EQ(aug.key_tactile[b * 81 + i], obs[b].tactile.pixels[i] / 255.0);
        }
}

TEST(Augment, ConstantImageIsOffsetIndependent) {
    sim::Observation o;
    o.visual = sim::Image(16, 16);
    o.tactile = sim::Image(16, 16);
    std::fill(o.visual.pixels.begin(), o.visual.pixels.end(), 128);
    std::fill(o.tactile.pixels.begin(), o.tactile.pixels.end(), 128);
    std::mt19937_64 rng(2);
    auto aug = augment_pair<double>({&o, &o}, 10, rng);
    for (const auto* t : {&aug.query_visual, &aug.query_tactile, &aug.key_visual, &aug.key_tactile}) {
        EXPECT_EQ(t->shape(), (Shape{2, 1, 10, 10}));
        for (double v : t->data()) EXPECT_EQ(v, 128.0 / 255.0);
    }
}

TEST(Augment, SeedDeterminesOffsets) {
    std::mt19937_64 data_rng(3);
    auto obs = random_observations(8, 20, data_rng);
    std::mt19937_64 a(42), b(42);
    auto x = augment_pair<float>(pointers(obs), 12, a);
    auto y = augment_pair<float>(pointers(obs), 12, b);
    EXPECT_EQ(x.crop_offsets, y.crop_offsets);
    EXPECT_EQ(x.query_visual, y.query_visual);
}

TEST(Augment, ViewsAreCroppedIndependently) {
    std::mt19937_64 rng(4);
    auto obs = random_observations(16, 30, rng);
    auto aug = augment_pair<double>(pointers(obs), 10, rng);
    std::size_t differ = 0;
    for (const auto& v : aug.crop_offsets) {
        differ += !(v.query_visual == v.key_visual);
        differ += !(v.query_visual == v.query_tactile);
        EXPECT_LE(v.key_tactile.row, 20u);
        EXPECT_LE(v.key_tactile.col, 20u);
    }
    EXPECT_GT(differ, 20u);
    for (double v : aug.query_visual.data()) {
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 1.0);
    }
}

TEST(Augment, CropLargerThanImageIsConfigError) {
    std::mt19937_64 rng(5);
    auto obs = random_observations(2, 8, rng);
    EXPECT_THROW(augment_pair<double>(pointers(obs), 9, rng), ConfigError);
    EXPECT_THROW(augment_pair<double>({}, 4, rng), ContractError);
}

TEST(Encode, ZeroInputGivesFinalBias) {
    std::mt19937_64 rng(6);
    Encoder<double> enc("enc", 11, 5, rng);
    enc.conv1.bias.value.fill(0.0);
    enc.conv2.bias.value.fill(0.0);
    Tape<double> tape;
    Var z = enc(tape, tape.constant(Tensor<double>(Shape{2, 1, 11, 11})), Binding::trainable);
    ASSERT_EQ(tape.shape(z), (Shape{2, 5}));
    for (std::size_t b = 0; b < 2; ++b)
        for (std::size_t j = 0; j < 5; ++j) EXPECT_EQ(tape.value(z).at(b, j), enc.fc.bias.value[j]);
}

TEST(Encode, IdenticalImagesGiveIdenticalEmbeddings) {
    std::mt19937_64 rng(7);
    Encoder<double> enc("enc", 9, 4, rng);
    Tensor<double> one(Shape{1, 1, 9, 9});
    std::uniform_real_distribution<double> u(0, 1);
    for (auto& v : one.data()) v = u(rng);
    Tape<double> tape;
    const auto& a = tape.value(enc(tape, tape.constant(one), Binding::detached));
    const auto& b = tape.value(enc(tape, tape.constant(Tensor<double>(one)), Binding::detached));
    EXPECT_EQ(a, b);
    // Within one batch the GEMM may round rows differently, so compare loosely there.
    Tensor<double> two(Shape{2, 1, 9, 9});
    for (std::size_t i = 0; i < 81; ++i) two[i] = two[81 + i] = one[i];
    const auto& z = tape.value(enc(tape, tape.constant(two), Binding::detached));
    for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(z.at(0, j), z.at(1, j), 1e-12);
}

TEST(Encode, WrongImageSizeIsDimensionError) {
    std::mt19937_64 rng(8);
    Encoder<double> enc("enc", 9, 4, rng);
    Tape<double> tape;
    EXPECT_THROW(enc(tape, tape.constant(Tensor<double>(Shape{1, 1, 10, 10})), Binding::trainable), DimensionError);
    EXPECT_THROW(enc(tape, tape.constant(Tensor<double>(Shape{1, 2, 9, 9})), Binding::trainable), DimensionError);
}

TEST(Encode, GradCheck) {
    std::mt19937_64 rng(9);
    Encoder<double> enc("enc", 11, 3, rng);
    Tensor<double> x(Shape{2, 1, 11, 11});
    std::uniform_real_distribution<double> u(0, 1);
    for (auto& v : x.data()) v = u(rng);
    Tensor<double> w = random_rows(2, 3, rng);
    auto loss = [&](Tape<double>& t) {
        return ops::sum(t, ops::mul(t, enc(t, t.constant(x), Binding::trainable), t.constant(w)));
    };
    auto report = grad_check(loss, params_of<double>(enc), 1e-3);
    EXPECT_TRUE(report.ok()) << report.summary();
}

TEST(Head, CodesHaveUnitNorm) {
    std::mt19937_64 rng(10);
    Head<double> head("h", 5, 7, rng);
    Tape<double> tape;
    const auto& c = tape.value(head(tape, tape.constant(random_rows(6, 5, rng)), Binding::trainable));
    for (std::size_t i = 0; i < 6; ++i) {
        double s = 0;
        for (std::size_t j = 0; j < 5; ++j) s += c.at(i, j) * c.at(i, j);
        EXPECT_NEAR(std::sqrt(s), 1.0, 1e-6);
    }
}

TEST(Head, NormalizationIsScaleInvariant) {
    std::mt19937_64 rng(12);
    Tensor<double> x = random_rows(3, 4, rng);
    Tensor<double> y = x;
    for (auto& v : y.data()) v *= 7.5;
    auto a = CodeBatch<double>::normalized(x), b = CodeBatch<double>::normalized(y);
    for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(a.codes[i], b.codes[i], 1e-15);
}

TEST(Head, GradCheck) {
    std::mt19937_64 rng(13);
    Head<double> head("h", 4, 6, rng);
    Tensor<double> z = random_rows(3, 4, rng), w = random_rows(3, 4, rng);
    auto loss = [&](Tape<double>& t) {
        return ops::sum(t, ops::mul(t, head(t, t.constant(z), Binding::trainable), t.constant(w)));
    };
    auto report = grad_check(loss, params_of<double>(head), 1e-4);
    EXPECT_TRUE(report.ok()) << report.summary();
}

TEST(InfoNce, IdenticalRowsGiveLogB) {
    std::mt19937_64 rng(14);
    Tensor<double> row = random_rows(1, 6, rng);
    Tensor<double> rows(Shape{8, 6});
    for (std::size_t i = 0; i < 8; ++i)
        for (std::size_t j = 0; j < 6; ++j) rows.at(i, j) = row[j];
    auto c = CodeBatch<double>::normalized(rows);
    EXPECT_NEAR(info_nce(c, c, 0.1), std::log(8.0), 1e-9);
    EXPECT_NEAR(std::log(8.0), 2.0794, 1e-4);
}

TEST(InfoNce, TwoOrthogonalPairs) {
    CodeBatch<double> c{Tensor<double>::matrix(2, 2, {1, 0, 0, 1})};
    const double expected = -std::log(std::exp(1.0) / (std::exp(1.0) + 1.0));
    EXPECT_NEAR(info_nce(c, c, 1.0), expected, 1e-12);
    EXPECT_NEAR(expected, 0.31326, 1e-5);
}

TEST(InfoNce, MatchesBruteForceOnRandomBatches) {
    std::mt19937_64 rng(15);
    for (std::size_t B : {2, 4, 8, 16})
        for (std::size_t d : {2, 8, 50}) {
            auto q = CodeBatch<double>::normalized(random_rows(B, d, rng));
            auto k = CodeBatch<double>::normalized(random_rows(B, d, rng));
            for (double tau : {0.05, 0.1, 1.0}) {
                EXPECT_NEAR(info_nce(q, k, tau), brute_force_info_nce(q.codes, k.codes, tau), 1e-6);
            }
        }
}

TEST(InfoNce, BoundedByLogBPlusTwoOverTau) {
    std::mt19937_64 rng(16);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t B = 2 + trial % 10;
        const double tau = 0.05 + 0.02 * trial;
        auto q = CodeBatch<double>::normalized(random_rows(B, 3, rng));
        auto k = CodeBatch<double>::normalized(random_rows(B, 3, rng));
        EXPECT_LE(info_nce(q, k, tau), std::log(static_cast<double>(B)) + 2.0 / tau);
    }
    // Worst case: every positive is antipodal, every negative aligned.
    CodeBatch<double> q{Tensor<double>::matrix(2, 1, {1, -1})};
    CodeBatch<double> k{Tensor<double>::matrix(2, 1, {-1, 1})};
    EXPECT_LE(info_nce(q, k, 0.5), std::log(2.0) + 4.0);
}

TEST(InfoNce, DistinctIdenticalPairsBeatUniform) {
    std::mt19937_64 rng(17);
    auto c = CodeBatch<double>::normalized(random_rows(8, 5, rng));
    EXPECT_LT(info_nce(c, c, 0.2), std::log(8.0));
}

TEST(InfoNce, BatchOfOneIsConfigError) {
    CodeBatch<double> c{Tensor<double>::matrix(1, 2, {1, 0})};
    EXPECT_THROW(info_nce(c, c, 1.0), ConfigError);
}

TEST(IntraLoss, SelfAgreementBeatsMismatchedKeys) {
    Fixture f;
    AugmentedPair<double> same = f.aug;
    same.key_visual = same.query_visual;
    same.key_tactile = same.query_tactile;
    momentum_update(f.model, 0.0);
    AugmentedPair<double> shuffled = same;
    std::mt19937_64 rng(99);
    auto others = random_observations(5, 12, rng);
    auto other = augment_pair<double>(pointers(others), f.cfg.crop_size, rng);
    shuffled.key_visual = other.key_visual;
    shuffled.key_tactile = other.key_tactile;
    for (auto m : {Modality::visual, Modality::tactile}) {
        Tape<double> t1, t2;
        const double aligned = t1.value(intra_loss(t1, f.model, same, m, 0.1)).item();
        const double random = t2.value(intra_loss(t2, f.model, shuffled, m, 0.1)).item();
        EXPECT_LT(aligned, random);
    }
}

TEST(IntraLoss, VisualLossLeavesTactileEncoderUntouched) {
    Fixture f;
    zero_grads(f.model.all_params());
    Tape<double> tape;
    tape.backward(intra_loss(tape, f.model, f.aug, Modality::visual, 0.1));
    EXPECT_TRUE(all_grads_zero(params_of<double>(f.model.online_tactile)));
    EXPECT_TRUE(any_grad_nonzero(params_of<double>(f.model.online_visual)));
}

TEST(IntraLoss, ValueDoesNotDependOnLambdas) {
    Fixture f;
    ContrastiveConfig a = f.cfg, b = f.cfg;
    b.lambda_vv = 5;
    b.lambda_tt = 0;
    Tape<double> t1, t2;
    EXPECT_EQ(combined_loss(t1, f.model, f.aug, a).components.loss_vv,
              combined_loss(t2, f.model, f.aug, b).components.loss_vv);
}

TEST(InterLoss, VisualToTactileLeavesIntraHeadsUntouched) {
    Fixture f;
    zero_grads(f.model.all_params());
    Tape<double> tape;
    tape.backward(inter_loss(tape, f.model, f.aug, Direction::vt, 0.1));
    EXPECT_TRUE(all_grads_zero(params_of<double>(f.model.head_vv)));
    EXPECT_TRUE(all_grads_zero(params_of<double>(f.model.head_tt)));
    EXPECT_TRUE(any_grad_nonzero(params_of<double>(f.model.head_vt)));
}

TEST(InterLoss, CopiedModalitiesAlignPerfectly) {
    Fixture f;
    copy_values(m2curl::as_const(params_of<double>(f.model.online_visual)), params_of<double>(f.model.online_tactile));
    copy_values(m2curl::as_const(params_of<double>(f.model.head_vt)), params_of<double>(f.model.head_tv));
    momentum_update(f.model, 0.0);
    AugmentedPair<double> a = f.aug;
    a.query_tactile = a.query_visual;
    a.key_visual = a.query_visual;
    a.key_tactile = a.query_visual;
    AugmentedPair<double> shuffled = a;
    std::mt19937_64 rng(5);
    auto others = random_observations(5, 12, rng);
    shuffled.key_tactile = augment_pair<double>(pointers(others), f.cfg.crop_size, rng).key_tactile;

    Tape<double> tape;
    const PairEmbeddings emb = embed_pair(tape, f.model, a);
    const auto& q = tape.value(f.model.head_vt(tape, emb.query_visual, Binding::detached));
    const auto& k = tape.value(f.model.head_tv(tape, emb.key_tactile, Binding::detached));
    for (std::size_t i = 0; i < q.dim(0); ++i) {
        double s = 0;
        for (std::size_t j = 0; j < q.dim(1); ++j) s += q.at(i, j) * k.at(i, j);
        EXPECT_NEAR(s, 1.0, 1e-12);
    }
    Tape<double> t1, t2;
    EXPECT_LT(t1.value(inter_loss(t1, f.model, a, Direction::vt, 0.1)).item(),
              t2.value(inter_loss(t2, f.model, shuffled, Direction::vt, 0.1)).item());
}

TEST(InterLoss, MatchesBruteForceOracle) {
    Fixture f;
    for (auto dir : {Direction::vt, Direction::tv}) {
        Tape<double> tape;
        const PairEmbeddings emb = embed_pair(tape, f.model, f.aug);
        const bool vt = dir == Direction::vt;
        const Tensor<double> q = tape.value(vt ? f.model.head_vt(tape, emb.query_visual, Binding::detached)
                                               : f.model.head_tv(tape, emb.query_tactile, Binding::detached));
        const Tensor<double> k = tape.value(vt ? f.model.head_tv(tape, emb.key_tactile, Binding::detached)
                                               : f.model.head_vt(tape, emb.key_visual, Binding::detached));
        Tape<double> t2;
        EXPECT_NEAR(t2.value(inter_loss(t2, f.model, f.aug, dir, 0.1)).item(), brute_force_info_nce(q, k, 0.1), 1e-6);
    }
}

TEST(CombinedLoss, UnitLambdasSumComponents) {
    Fixture f;
    const CombinedLoss l = f.backward(f.cfg);
    const auto& c = l.components;
    EXPECT_NEAR(c.loss_mm, c.loss_vv + c.loss_tt + c.loss_vt + c.loss_tv, 1e-9);
}

TEST(CombinedLoss, IntraOnlyZeroesCrossHeadGradients) {
    Fixture f;
    ContrastiveConfig c = f.cfg;
    c.lambda_vt = c.lambda_tv = 0;
    f.backward(c);
    EXPECT_TRUE(all_grads_zero(params_of<double>(f.model.head_vt)));
    EXPECT_TRUE(all_grads_zero(params_of<double>(f.model.head_tv)));
    EXPECT_TRUE(any_grad_nonzero(params_of<double>(f.model.head_vv)));
}

TEST(CombinedLoss, InterOnlyZeroesIntraHeadGradients) {
    Fixture f;
    ContrastiveConfig c = f.cfg;
    c.lambda_vv = c.lambda_tt = 0;
    f.backward(c);
    EXPECT_TRUE(all_grads_zero(params_of<double>(f.model.head_vv)));
    EXPECT_TRUE(all_grads_zero(params_of<double>(f.model.head_tt)));
    EXPECT_TRUE(any_grad_nonzero(params_of<double>(f.model.head_tv)));
}

TEST(CombinedLoss, ZeroLambdasGiveZeroLossAndGradients) {
    Fixture f;
    ContrastiveConfig c = f.cfg;
    c.lambda_vv = c.lambda_tt = c.lambda_vt = c.lambda_tv = 0;
    EXPECT_EQ(f.backward(c).components.loss_mm, 0.0);
    EXPECT_TRUE(all_grads_zero(f.model.all_params()));
}

TEST(CombinedLoss, LinearInEachLambda) {
    Fixture f;
    ContrastiveConfig c = f.cfg;
    c.lambda_tt = c.lambda_vt = c.lambda_tv = 0;
    const double one = f.backward(c).components.loss_mm;
    c.lambda_vv = 2;
    const double two = f.backward(c).components.loss_mm;
    EXPECT_NEAR(two, 2 * one, 1e-12);
}

TEST(CombinedLoss, CodesEnteringInfoNceAreUnitNorm) {
    Fixture f;
    Tape<double> tape;
    const PairEmbeddings emb = embed_pair(tape, f.model, f.aug);
    for (Var z : {emb.query_visual, emb.key_visual}) {
        const auto& c = tape.value(f.model.head_vv(tape, z, Binding::detached));
        for (std::size_t i = 0; i < c.dim(0); ++i) {
            double s = 0;
            for (std::size_t j = 0; j < c.dim(1); ++j) s += c.at(i, j) * c.at(i, j);
            EXPECT_NEAR(s, 1.0, 1e-6);
        }
    }
}

TEST(CombinedLoss, FullPipelineGradCheck) {
    Fixture f;
    // The key path is a stop-gradient; freeze it so finite differences only move the query path.
    RepresentationModel<double> frozen = f.model;
    auto loss = [&](Tape<double>& t) { return combined_loss(t, f.model, f.aug, f.cfg, &frozen).total; };
    auto report = grad_check(loss, f.model.trainable_params(), 1e-3);
    EXPECT_TRUE(report.ok()) << report.summary();
}

TEST(Momentum, NeverReceivesGradient) {
    Fixture f;
    f.backward(f.cfg);
    EXPECT_TRUE(all_grads_zero(f.model.momentum_params()));
    EXPECT_TRUE(any_grad_nonzero(f.model.online_encoder_params()));
}

TEST(Momentum, FixedPointAndFullCopy) {
    Fixture f;
    for (auto* p : f.model.online_encoder_params())
        for (auto& v : p->value.data()) v += 0.5;
    const auto before = f.model.momentum_params();
    std::vector<Tensor<double>> saved;
    for (auto* p : before) saved.push_back(p->value);
    momentum_update(f.model, 1.0);
    for (std::size_t i = 0; i < saved.size(); ++i) EXPECT_EQ(before[i]->value, saved[i]);
    momentum_update(f.model, 0.0);
    const auto online = f.model.online_encoder_params();
    for (std::size_t i = 0; i < online.size(); ++i) EXPECT_EQ(before[i]->value, online[i]->value);
}

TEST(Momentum, UpdateRuleArithmeticAndInterval) {
    Fixture f;
    auto mom = f.model.momentum_params();
    auto online = f.model.online_encoder_params();
    mom[0]->value[0] = 1.0;
    online[0]->value[0] = 0.0;
    std::vector<Tensor<double>> old;
    for (auto* p : mom) old.push_back(p->value);
    std::mt19937_64 rng(3);
    std::normal_distribution<double> n(0, 1);
    for (std::size_t i = 1; i < online.size(); ++i)
        for (auto& v : online[i]->value.data()) v += n(rng);
    momentum_update(f.model, 0.9);
    EXPECT_DOUBLE_EQ(mom[0]->value[0], 0.9);
    for (std::size_t i = 0; i < mom.size(); ++i)
        for (std::size_t k = 0; k < mom[i]->value.size(); ++k) {
            const double lo = std::min(old[i][k], online[i]->value[k]);
            const double hi = std::max(old[i][k], online[i]->value[k]);
            EXPECT_GE(mom[i]->value[k], lo);
            EXPECT_LE(mom[i]->value[k], hi);
        }
}

TEST(Momentum, MismatchedShapesAreContractError) {
    Fixture f;
    f.model.momentum_visual.fc.bias.value = Tensor<double>(Shape{3});
    EXPECT_THROW(momentum_update(f.model, 0.5), ContractError);
}

TEST(ContrastiveConfig, AlgorithmDefaultsAndValidation) {
    EXPECT_EQ(ContrastiveConfig::for_sac().beta, 0.1);
    EXPECT_EQ(ContrastiveConfig::for_ppo().beta, 1.0);
    EXPECT_EQ(ContrastiveConfig::for_ppo().tau, 0.05);
    ContrastiveConfig c;
    c.lambda_vt = -1;
    try {
        c.validate(64);
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("lambda_vt"), std::string::npos);
    }
    c = {};
    c.crop_size = 65;
    EXPECT_THROW(c.validate(64), ConfigError);
    c = {};
    c.tau = 0;
    EXPECT_THROW(c.validate(64), ConfigError);
}

TEST(Alignment, TrainingIsDeterministicAndLowersLoss) {
    auto run = [](std::vector<LossComponents>& hist) {
        std::mt19937_64 rng(21);
        ContrastiveConfig c = small_config(10);
        RepresentationModel<float> model(c, rng);
        auto obs = random_observations(16, 12, rng);
        AlignmentConfig a;
        a.steps = 60;
        a.batch_size = 8;
        hist = train_alignment(model, obs, c, a, rng);
        return retrieval_accuracy(model, obs, c.crop_size, 8);
    };
    std::vector<LossComponents> h1, h2;
    const double acc1 = run(h1), acc2 = run(h2);
    EXPECT_EQ(acc1, acc2);
    ASSERT_EQ(h1.size(), 60u);
    for (std::size_t i = 0; i < h1.size(); ++i) EXPECT_EQ(h1[i].loss_mm, h2[i].loss_mm);
    double first = 0, last = 0;
    for (std::size_t i = 0; i < 10; ++i) {
        first += h1[i].loss_mm;
        last += h1[50 + i].loss_mm;
    }
    EXPECT_LT(last, first);
}
