// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>

#include "attention_oracle.hpp"
#include "sqoe/model.hpp"
#include "support.hpp"

namespace sqoe {
namespace {

using ag::Mat;
using ag::Var;
using fixtures::TempDir;

Mat random_mat(Eigen::Index r, Eigen::Index c, Rng& rng, double s = 1.0) {
    Mat m(r, c);
    for (Eigen::Index i = 0; i < m.size(); ++i) {
        m.data()[i] = s * rng.normal();
    }
    return m;
}

void randomize(const Model& model, Rng& rng, double s = 0.3) {
    for (const auto& [name, p] : model.parameters().all()) {
        p.mutable_value() = random_mat(p.rows(), p.cols(), rng, s);
    }
}

TEST(ModelConfig, DefaultsAndJsonRoundTrip) {
    const ModelConfig d;
    EXPECT_EQ(d.fusion.mode, FusionMode::concat_kv);
    EXPECT_EQ(d.fusion.layers, (std::set<int>{1, 3, 5}));
    EXPECT_EQ(d.head_hidden, (std::vector<int>{256, 64, 1}));
    auto cfg = fixtures::tiny_config();
    cfg.lora = LoraConfig{};
    cfg.backbone_mode = BackboneMode::imported_frozen;
    const nlohmann::json j = cfg;
    EXPECT_EQ(j.get<ModelConfig>(), cfg);
}

TEST(ModelConfig, ValidationRejectsBadShapes) {
    auto cfg = fixtures::tiny_config();
    cfg.num_heads = 3;
    EXPECT_THROW(cfg.validate(), Error);
    cfg = fixtures::tiny_config();
    cfg.input_width = 20;
    EXPECT_THROW(cfg.validate(), Error);
    cfg = fixtures::tiny_config();
    cfg.fusion.layers = {7};
    EXPECT_THROW(cfg.validate(), Error);
    cfg = fixtures::tiny_config();
    cfg.head_hidden = {4, 2};
    EXPECT_THROW(cfg.validate(), Error);
    EXPECT_THROW(parse_fusion_mode("sideways"), Error);
    EXPECT_EQ(parse_fusion_mode("swap"), FusionMode::swap_kv);
}

TEST(TrainConfig, JsonRoundTripAndValidation) {
    TrainConfig t;
    t.learning_rate = 1e-3;
    t.target_train_accuracy = 0.9;
    const nlohmann::json j = t;
    const auto back = j.get<TrainConfig>();
    EXPECT_EQ(back.learning_rate, 1e-3);
    EXPECT_EQ(back.target_train_accuracy, 0.9);
    EXPECT_EQ(j["optimizer"]["name"], "adam");
    auto bad = j;
    bad["margin"] = 0.0;
    EXPECT_THROW(bad.get<TrainConfig>(), Error);
}

TEST(PrepareInput, NormalizesPixelsIntoPatchRows) {
    auto cfg = fixtures::tiny_config();  // 16x16, patch 8
    Rng rng(1);
    const auto left = fixtures::random_plane(16, 16, rng);
    const auto in = prepare_input(StereoImage(left, left), cfg);
    ASSERT_EQ(in.left.rows(), 4);
    ASSERT_EQ(in.left.cols(), 192);
    const double mean[3] = {0.485, 0.456, 0.406};
    const double stdv[3] = {0.229, 0.224, 0.225};
    for (int trial = 0; trial < 50; ++trial) {
        const int x = static_cast<int>(rng.below(16));
        const int y = static_cast<int>(rng.below(16));
        const int c = static_cast<int>(rng.below(3));
        const int patch = (y / 8) * 2 + (x / 8);
        const int col = ((y % 8) * 8 + (x % 8)) * 3 + c;
        const double want = (left.at(x, y, c) / 255.0 - mean[c]) / stdv[c];
        EXPECT_NEAR(in.left(patch, col), want, 1e-6);
    }
}

TEST(PrepareInput, HalvingAveragesTwoByTwoBlocks) {
    auto cfg = fixtures::tiny_config();
    Rng rng(2);
    const auto big = fixtures::random_plane(32, 32, rng);
    const auto in = prepare_input(StereoImage(big, big), cfg);
    for (int y = 0; y < 16; y += 5) {
        for (int x = 0; x < 16; x += 3) {
            double acc = 0.0;
            for (int dy = 0; dy < 2; ++dy) {
                for (int dx = 0; dx < 2; ++dx) {
                    acc += big.at(2 * x + dx, 2 * y + dy, 0);
                }
            }
            const double want = (acc / 4.0 / 255.0 - 0.485) / 0.229;
            const int patch = (y / 8) * 2 + (x / 8);
            EXPECT_NEAR(in.right(patch, ((y % 8) * 8 + (x % 8)) * 3), want, 1e-5);
        }
    }
}

TEST(Model, ParameterNamesAndTrainability) {
    auto cfg = fixtures::tiny_config();
    cfg.lora = LoraConfig{};
    const Model m(cfg, 1);
    for (const auto* name : {"embed.patch.weight", "embed.cls", "embed.pos", "blocks.0.attn.q.weight",
                             "blocks.1.mlp.fc2.bias", "norm.weight", "head.0.weight", "head.1.bias",
                             "blocks.1.attn.v.lora_a", "blocks.1.attn.o.lora_b"}) {
        EXPECT_TRUE(m.parameters().contains(name)) << name;
    }
    EXPECT_TRUE(m.is_trainable("blocks.0.attn.q.weight"));
    cfg.backbone_mode = BackboneMode::imported_frozen;
    const Model frozen(cfg, 1);
    EXPECT_FALSE(frozen.is_trainable("blocks.0.attn.q.weight"));
    EXPECT_FALSE(frozen.parameters().at("embed.cls").requires_grad());
    EXPECT_TRUE(frozen.is_trainable("head.0.weight"));
    EXPECT_TRUE(frozen.is_trainable("blocks.0.attn.q.lora_a"));
    EXPECT_EQ(frozen.parameters().at("blocks.0.attn.k.lora_b").value(), Mat::Zero(8, 8));
}

TEST(Model, ScoreIsInUnitIntervalAndDeterministic) {
    const auto cfg = fixtures::tiny_config();
    const Model a(cfg, 5);
    const Model b(cfg, 5);
    Rng rng(3);
    const auto in = fixtures::random_input(cfg, rng);
    const double s = a.score(in).value;
    EXPECT_GT(s, 0.0);
    EXPECT_LT(s, 1.0);
    EXPECT_EQ(s, b.score(in).value);
    EXPECT_NE(s, Model(cfg, 6).score(in).value);
}

// With fusion off, each stream of the twin encoder is exactly the single encoder.
TEST(Fusion, NoneEqualsIndependentTwinEncoders) {
    auto cfg = fixtures::tiny_config();
    cfg.fusion.mode = FusionMode::none;
    const Model m(cfg, 7);
    Rng rng(4);
    for (int trial = 0; trial < 5; ++trial) {
        const auto in = fixtures::random_input(cfg, rng);
        ForwardContext ctx;
        const auto [tl, tr] = m.encode(in, ctx);
        EXPECT_EQ(tl.value(), m.encode_single(in.left, ctx).value());
        EXPECT_EQ(tr.value(), m.encode_single(in.right, ctx).value());
    }
}

TEST(Fusion, ActiveFusionCouplesTheStreams) {
    auto cfg = fixtures::tiny_config();
    const Model m(cfg, 7);
    Rng rng(5);
    auto in = fixtures::random_input(cfg, rng);
    ForwardContext ctx;
    const Mat before = m.encode(in, ctx).first.value();
    in.right(0, 0) += 1.0;
    EXPECT_NE(m.encode(in, ctx).first.value(), before);
}

TEST(Fusion, SwapKvMatchesScalarOracleOnTwoTokens) {
    auto cfg = fixtures::tiny_config();
    const Model m(cfg, 8);
    Rng rng(6);
    randomize(m, rng);
    const auto ref = oracle::attention_reference(m, 0);
    const Mat hl = random_mat(2, cfg.embed_dim, rng);
    const Mat hr = random_mat(2, cfg.embed_dim, rng);
    ForwardContext ctx;
    const auto [ol, orr] = m.attention(0, Var(hl), Var(hr), FusionMode::swap_kv, ctx);
    EXPECT_LE((ol.value() - ref.run(hl, {hr})).cwiseAbs().maxCoeff(), 1e-5);
    EXPECT_LE((orr.value() - ref.run(hr, {hl})).cwiseAbs().maxCoeff(), 1e-5);
}

TEST(Fusion, ConcatKvAndNoneMatchScalarOracle) {
    auto cfg = fixtures::tiny_config();
    const Model m(cfg, 9);
    Rng rng(7);
    randomize(m, rng);
    const auto ref = oracle::attention_reference(m, 1);
    const Mat hl = random_mat(3, cfg.embed_dim, rng);
    const Mat hr = random_mat(3, cfg.embed_dim, rng);
    ForwardContext ctx;
    const auto [cl, cr] = m.attention(1, Var(hl), Var(hr), FusionMode::concat_kv, ctx);
    EXPECT_LE((cl.value() - ref.run(hl, {hl, hr})).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_LE((cr.value() - ref.run(hr, {hr, hl})).cwiseAbs().maxCoeff(), 1e-9);
    const auto [nl, nr] = m.attention(1, Var(hl), Var(hr), FusionMode::none, ctx);
    EXPECT_LE((nl.value() - ref.run(hl, {hl})).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_LE((nr.value() - ref.run(hr, {hr})).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Lora, IdentityAtInitIsBitExact) {
    auto cfg = fixtures::tiny_config();
    const Model base(cfg, 11);
    cfg.lora = LoraConfig{};
    const Model adapted(cfg, 11);
    Rng rng(8);
    for (int i = 0; i < 10; ++i) {
        const auto in = fixtures::random_input(cfg, rng);
        EXPECT_EQ(base.score(in).value, adapted.score(in).value) << "input " << i;
    }
}

TEST(Lora, NonZeroUpdateChangesOutputByScaledLowRankTerm) {
    auto cfg = fixtures::tiny_config();
    cfg.lora = LoraConfig{2, 4.0, 0.0, {"q"}};
    const Model m(cfg, 12);
    Rng rng(9);
    const auto& a = m.parameters().at("blocks.0.attn.q.lora_a");
    const auto& b = m.parameters().at("blocks.0.attn.q.lora_b");
    b.mutable_value() = random_mat(b.rows(), b.cols(), rng, 0.1);
    const auto ref = oracle::attention_reference(m, 0);
    const Mat h = random_mat(2, cfg.embed_dim, rng);
    // Fold the adapter into the query weight: W' = W + (alpha/r) A B.
    auto folded = ref;
    folded.wq = ref.wq + 2.0 * a.value() * b.value();
    ForwardContext ctx;
    const auto [ol, orr] = m.attention(0, Var(h), Var(h), FusionMode::none, ctx);
    EXPECT_LE((ol.value() - folded.run(h, {h})).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_GT((ol.value() - ref.run(h, {h})).cwiseAbs().maxCoeff(), 1e-6);
    EXPECT_THROW((LoraConfig{0, 1.0, 0.0, {"q"}}.validate()), Error);
    EXPECT_THROW((LoraConfig{4, 1.0, 0.0, {"mlp"}}.validate()), Error);
}

TEST(Lora, TrainingForwardNeedsRngForDropout) {
    auto cfg = fixtures::tiny_config();
    cfg.lora = LoraConfig{};
    const Model m(cfg, 13);
    Rng rng(10);
    const auto in = fixtures::random_input(cfg, rng);
    ForwardContext no_rng{true, nullptr};
    EXPECT_THROW((void)m.score_var(in, no_rng), Error);
}

TEST(Hinge, WorkedExamples) {
    EXPECT_DOUBLE_EQ(hinge_loss({0.2}, {0.5}, 0.05), 0.0);
    EXPECT_DOUBLE_EQ(hinge_loss({0.5}, {0.2}, 0.05), 0.35);
    EXPECT_NEAR(hinge_loss({0.3}, {0.32}, 0.05), 0.03, 1e-15);
    EXPECT_THROW(hinge_loss({0.3}, {0.3}, 0.0), Error);
    const Var l = hinge_loss(Var(Mat::Constant(1, 1, 0.5)), Var(Mat::Constant(1, 1, 0.2)), 0.05);
    EXPECT_DOUBLE_EQ(l.value()(0, 0), 0.35);
}

TEST(Predict, LowerScoreWinsAndTiesGoToA) {
    EXPECT_EQ(predict_preference(0.2, 0.4), Choice::A);
    EXPECT_EQ(predict_preference(0.4, 0.2), Choice::B);
    EXPECT_EQ(predict_preference(0.3, 0.3), Choice::A);
}

// Directional central differences of hinge(score(a), score(b)) over all head parameters.
TEST(GradCheck, HeadParametersMatchFiniteDifferences) {
    const auto cfg = fixtures::tiny_config();
    const Model m(cfg, 14);
    Rng rng(11);
    const auto a = fixtures::random_input(cfg, rng);
    const auto b = fixtures::random_input(cfg, rng);
    const double margin = 1.0;  // keeps the hinge active
    auto loss = [&]() {
        ForwardContext ctx;
        return hinge_loss(m.score_var(a, ctx), m.score_var(b, ctx), margin);
    };
    m.parameters().zero_grad();
    loss().backward();
    std::vector<std::pair<Var, Mat>> head;
    for (const auto& [name, p] : m.parameters().all()) {
        if (is_head_parameter(name)) {
            head.emplace_back(p, p.grad());
        }
    }
    ASSERT_FALSE(head.empty());
    for (int dir = 0; dir < 20; ++dir) {
        std::vector<Mat> v;
        double analytic = 0.0;
        for (const auto& [p, g] : head) {
            v.push_back(random_mat(p.rows(), p.cols(), rng));
            analytic += g.cwiseProduct(v.back()).sum();
        }
        const double h = 1e-5;
        auto shifted = [&](double t) {
            for (std::size_t i = 0; i < head.size(); ++i) {
                head[i].first.mutable_value() += t * v[i];
            }
            ag::NoGradGuard guard;
            const double out = loss().value()(0, 0);
            for (std::size_t i = 0; i < head.size(); ++i) {
                head[i].first.mutable_value() -= t * v[i];
            }
            return out;
        };
        const double numeric = (shifted(h) - shifted(-h)) / (2 * h);
        const double rel = std::abs(analytic - numeric) / std::max(1e-12, std::abs(numeric));
        EXPECT_LE(rel, 1e-3) << "direction " << dir << " analytic " << analytic << " numeric " << numeric;
    }
}

TEST(Checkpoint, RoundTripIsBitIdentical) {
    TempDir dir("ckpt");
    auto cfg = fixtures::tiny_config();
    cfg.lora = LoraConfig{};
    const Model m(cfg, 15);
    Rng rng(12);
    randomize(m, rng);
    save_checkpoint(m, dir / "a.ckpt");
    const Model back = load_checkpoint(dir / "a.ckpt");
    EXPECT_EQ(back.config(), cfg);
    for (const auto& [name, p] : m.parameters().all()) {
        EXPECT_EQ(back.parameters().at(name).value(), p.value()) << name;
    }
    const auto in = fixtures::random_input(cfg, rng);
    EXPECT_EQ(back.score(in).value, m.score(in).value);
    save_checkpoint(back, dir / "b.ckpt");
    EXPECT_EQ(fixtures::read_file(dir / "a.ckpt"), fixtures::read_file(dir / "b.ckpt"));
}

TEST(Checkpoint, CorruptFilesAreRejected) {
    TempDir dir("badckpt");
    const Model m(fixtures::tiny_config(), 1);
    save_checkpoint(m, dir / "m.ckpt");
    auto bytes = fixtures::read_file(dir / "m.ckpt");
    {
        std::ofstream(dir / "trunc.ckpt", std::ios::binary) << bytes.substr(0, bytes.size() - 9);
        std::ofstream(dir / "magic.ckpt", std::ios::binary) << "NOTACKPT" << bytes.substr(8);
    }
    EXPECT_THROW(load_checkpoint(dir / "trunc.ckpt"), Error);
    EXPECT_THROW(load_checkpoint(dir / "magic.ckpt"), Error);
    EXPECT_THROW(load_checkpoint(dir / "none.ckpt"), Error);
}

TEST(Checkpoint, ImportBackboneSkipsHeadAndAdapters) {
    TempDir dir("import");
    auto cfg = fixtures::tiny_config();
    const Model donor(cfg, 16);
    Rng rng(13);
    randomize(donor, rng);
    save_checkpoint(donor, dir / "donor.ckpt");
    cfg.backbone_mode = BackboneMode::imported_frozen;
    cfg.lora = LoraConfig{};
    Model m(cfg, 17);
    const Mat head_before = m.parameters().at("head.0.weight").value();
    const auto n = import_backbone(m, dir / "donor.ckpt");
    EXPECT_GT(n, 0U);
    EXPECT_EQ(m.parameters().at("blocks.1.attn.k.weight").value(),
              donor.parameters().at("blocks.1.attn.k.weight").value());
    EXPECT_EQ(m.parameters().at("head.0.weight").value(), head_before);

    auto other = fixtures::tiny_config();
    other.embed_dim = 12;
    other.num_heads = 2;
    Model mismatched(other, 1);
    EXPECT_THROW(import_backbone(mismatched, dir / "donor.ckpt"), Error);
}

}  // namespace
}  // namespace sqoe
