#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <limits>

#include "noisectx/datagen.hpp"
#include "noisectx/grad_check.hpp"
#include "noisectx/trainer.hpp"
#include "test_support.hpp"

namespace noisectx {
namespace {

Dataset small_dataset(std::size_t n, std::uint64_t seed, double utterance = 0.3, double context = 0.5) {
  const FeatureExtractor fx;
  IdentityTaskOptions opts;
  opts.examples = n;
  opts.seed = seed;
  opts.utterance_seconds = utterance;
  opts.context_seconds = context;
  return to_dataset(context_reveals_identity_task(opts, fx), fx);
}

TEST(Snri, IdentityAndUniformMasksGiveZero) {
  const auto x = testing::random_tensor({6, 128}, 1, 0.01, 2.0);
  const auto n = testing::random_tensor({6, 128}, 2, 0.01, 2.0);
  EXPECT_NEAR(snr_improvement_db(x, n, TensorD({6, 128}, 1.0), 0.5, 0.01), 0.0, 1e-12);
  EXPECT_NEAR(snr_improvement_db(x, n, TensorD({6, 128}, 0.01), 0.5, 0.01), 0.0, 1e-12);
  EXPECT_NEAR(snr_improvement_db(x, n, TensorD({6, 128}, 0.0), 0.5, 0.01), 0.0, 1e-12);
}

TEST(Snri, MatchesHandFormulaAndOracleMaskHelps) {
  const auto x = TensorD::matrix(1, 2, {4.0, 1.0});
  const auto n = TensorD::matrix(1, 2, {1.0, 4.0});
  const auto m = TensorD::matrix(1, 2, {1.0, 0.25});
  const double expected = 10 * std::log10((4.0 + 0.5) / (1.0 + 2.0)) - 10 * std::log10(5.0 / 5.0);
  EXPECT_NEAR(snr_improvement_db(x, n, m, 0.5, 0.01), expected, 1e-12);

  const auto xs = testing::random_tensor({8, 128}, 3, 0.0, 2.0);
  const auto ns = testing::random_tensor({8, 128}, 4, 0.0, 2.0);
  EXPECT_GT(snr_improvement_db(xs, ns, compute_irm({xs, ns}), 0.5, 0.01), 0.0);
}

TEST(EvaluateMasks, GroupsBySnrCondition) {
  auto data = small_dataset(4, 3);
  data[0].snr_db = data[1].snr_db = -5;
  data[2].snr_db = data[3].snr_db = 5;
  const auto identity = evaluate_masks(data, [](const TrainingExample& ex) { return TensorD(ex.irm.shape(), 1.0); },
                                       0.5, 0.01);
  ASSERT_EQ(identity.by_snr.size(), 2u);
  EXPECT_EQ(identity.by_snr.at(-5).examples, 2u);
  EXPECT_EQ(identity.overall.examples, 4u);
  EXPECT_NEAR(identity.overall.snri_db, 0.0, 1e-12);
  const auto oracle = evaluate_masks(data, [](const TrainingExample& ex) { return ex.irm; }, 0.5, 0.01);
  EXPECT_EQ(oracle.overall.mean_loss, 0.0);
  EXPECT_GT(oracle.overall.snri_db, 0.0);
  double loss = 0, bins = 0;
  for (const auto& ex : data) {
    loss += irm_loss(ex.irm, TensorD(ex.irm.shape(), 1.0));
    bins += ex.irm.size();
  }
  EXPECT_NEAR(identity.overall.mean_loss, loss / bins, 1e-12);
}

TEST(Batching, PaddingLeavesGradientsUnchanged) {
  const Frontend model(tiny_config(Variant::E3));
  const auto params = model.initialize<float>(2);
  auto a = small_dataset(2, 4, 0.3)[0];
  auto b = small_dataset(2, 5, 0.5)[1];
  ASSERT_NE(a.frames(), b.frames());
  const TrainingExample* both[] = {&a, &b};
  const TrainingExample* only_a[] = {&a};
  const TrainingExample* only_b[] = {&b};
  const double pad = std::log(FeatureConfig{}.mel_floor);
  const auto gab = batch_gradient(model, params, pad_batch(both, pad));
  const auto ga = batch_gradient(model, params, pad_batch(only_a, pad));
  const auto gb = batch_gradient(model, params, pad_batch(only_b, pad));
  const double bins_a = static_cast<double>(a.irm.size()), bins_b = static_cast<double>(b.irm.size());
  EXPECT_NEAR(gab.loss, (ga.loss * bins_a + gb.loss * bins_b) / (bins_a + bins_b), 1e-5);
  for (const auto& [name, g] : gab.grads) {
    const auto& x = ga.grads.at(name);
    const auto& y = gb.grads.at(name);
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double ref = static_cast<double>(x[i]) + y[i];
      ASSERT_NEAR(g[i], ref, 1e-4 * std::max(1.0, std::abs(ref))) << name;
    }
  }
}

TEST(Batching, ContextVariantRejectsMissingContext) {
  const Frontend model(tiny_config(Variant::E2));
  auto ex = small_dataset(1, 1)[0];
  ex.context.reset();
  const TrainingExample* batch[] = {&ex};
  EXPECT_THROW(batch_gradient(model, model.initialize<float>(1), pad_batch(batch, -6.9)), ConfigError);
}

TEST(Training, ZeroLearningRateKeepsParameters) {
  const Frontend model(tiny_config(Variant::E3));
  const auto data = small_dataset(4, 6);
  TrainOptions opts;
  opts.epochs = 2;
  opts.batch_size = 2;
  opts.seed = 9;
  opts.adam.lr = 0.0;
  const auto result = train(model, data, {}, opts);
  EXPECT_EQ(result.final_state.params, model.initialize<float>(9));
  ASSERT_EQ(result.report.epochs.size(), 2u);
  EXPECT_EQ(result.report.epochs[1].step, 4);
}

TEST(Training, SameSeedSameReportAndCheckpoints) {
  const Frontend model(tiny_config(Variant::E3));
  const auto data = small_dataset(4, 7);
  const auto dir = testing::scratch_dir("trainer_ckpt");
  TrainOptions opts;
  opts.epochs = 2;
  opts.batch_size = 3;
  opts.seed = 4;
  opts.checkpoint_dir = dir;
  std::size_t callbacks = 0;
  opts.on_epoch = [&](const EpochRecord&) { ++callbacks; };
  const auto a = train(model, data, data, opts);
  const auto b = train(model, data, data, opts);
  EXPECT_EQ(a.report, b.report);
  EXPECT_EQ(a.final_state.params, b.final_state.params);
  EXPECT_EQ(callbacks, 4u);
  EXPECT_TRUE(std::filesystem::exists(dir / "epoch_1.ckpt"));
  EXPECT_TRUE(std::filesystem::exists(dir / "epoch_2.ckpt"));
  EXPECT_TRUE(std::filesystem::exists(dir / "best.ckpt"));
  for (const auto& e : a.report.epochs) {
    EXPECT_TRUE(std::isfinite(e.loss));
    EXPECT_TRUE(std::isfinite(e.val_loss));
    EXPECT_TRUE(std::isfinite(e.val_snri_db));
  }
  opts.seed = 5;
  EXPECT_FALSE(train(model, data, data, opts).report == a.report);
}

TEST(Training, ResumeContinuesOptimizerState) {
  const Frontend model(tiny_config(Variant::E0));
  const auto data = small_dataset(2, 8);
  TrainOptions opts;
  opts.epochs = 2;
  opts.batch_size = 1;
  const auto straight = train(model, data, {}, opts);
  opts.epochs = 1;
  const auto first = train(model, data, {}, opts);
  opts.on_epoch = nullptr;
  const auto second = train(model, first.final_state, data, {}, opts);
  EXPECT_EQ(second.final_state.adam->step, 4);
  EXPECT_EQ(second.report.epochs.back().epoch, 2u);
  EXPECT_EQ(second.final_state.params, straight.final_state.params);
}

TEST(Training, NonFiniteLossNamesStep) {
  const Frontend model(tiny_config(Variant::E0));
  auto data = small_dataset(2, 9);
  data[1].noisy[0] = std::numeric_limits<double>::quiet_NaN();
  TrainOptions opts;
  opts.epochs = 1;
  opts.batch_size = 2;
  try {
    train(model, data, {}, opts);
    FAIL() << "expected NumericalError";
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("step 1"), std::string::npos) << e.what();
  }
  EXPECT_THROW(train(model, Dataset{}, {}, opts), ContractError);
}

TEST(Training, OverfitsOneExample) {
  FrontendConfig cfg = tiny_config(Variant::E3);
  cfg.d = 16;
  const Frontend model(cfg);
  const FeatureExtractor fx;
  const auto mixture = make_example({.kind = SourceKind::HarmonicTone, .seed = 4}, {.kind = SourceKind::Pink, .seed = 5},
                                    0.0, {.utterance_seconds = 0.2, .context_seconds = 0.5}, fx);
  const TrainingExample ex = to_training_example(mixture, fx, "one");
  auto params = model.initialize<float>(3);
  auto state = AdamState<float>::fresh(params, {.lr = 1e-2});
  const TrainingExample* batch[] = {&ex};
  const double initial = train_step(model, params, state, batch);
  for (int i = 1; i < 500; ++i) train_step(model, params, state, batch);
  const double last = batch_gradient(model, params, pad_batch(batch, std::log(1e-3))).loss;
  EXPECT_LT(last, 0.01 * initial) << "initial " << initial << " final " << last;
}

}  // namespace
}  // namespace noisectx
