#include <gtest/gtest.h>

#include "noisectx/grad_check.hpp"
#include "noisectx/ops.hpp"
#include "test_support.hpp"

namespace noisectx {
namespace {

TEST(RelativeError, Definition) {
  EXPECT_EQ(relative_error(1.0, 1.0), 0.0);
  EXPECT_DOUBLE_EQ(relative_error(2.0, 1.0), 0.5);
  EXPECT_DOUBLE_EQ(relative_error(0.0, 1e-10), 1e-10 / 1e-8);
}

TEST(GradCheck, LinearModelIsExact) {
  NamedTensors<double> params;
  params.insert("w", testing::random_tensor({4, 3}, 1));
  params.insert("b", testing::random_tensor({3}, 2));
  const auto x = testing::random_tensor({5, 4}, 3);
  const auto report = grad_check(params, [&](Graph<double>& g) {
    return sum(affine(g.constant(x), g.param("w"), g.param("b")));
  });
  ASSERT_EQ(report.blocks.size(), 2u);
  EXPECT_EQ(report.blocks[0].checked, 12u);
  EXPECT_LT(report.max_rel_error, 1e-9);
  EXPECT_TRUE(report.passed());
}

TEST(GradCheck, TermwiseDifferencesResolveSmallGradientsUnderLargeLoss) {
  NamedTensors<double> params;
  params.insert("w", testing::random_tensor({4096}, 4));
  TensorD offset({4096});
  for (auto& v : offset.values()) v = 1.0;
  auto terms_var = [&](Graph<double>& g) {
    Var<double> w = g.param("w");
    return add(g.constant(offset), scale(mul(w, w), 1e-3));
  };
  auto loss = [&](Graph<double>& g) { return sum(terms_var(g)); };
  auto terms = [&](Graph<double>& g) { return terms_var(g).value(); };
  const auto scalar = grad_check(params, loss);
  const auto termwise = grad_check(params, loss, LossTermsBuilder(terms));
  EXPECT_GT(scalar.max_rel_error, 1e-5);
  EXPECT_LT(termwise.max_rel_error, 1e-5);
  EXPECT_LT(termwise.max_rel_error, scalar.max_rel_error);
}

class FrontendGradCheck : public ::testing::TestWithParam<Variant> {};

TEST_P(FrontendGradCheck, TinyModelMatchesFiniteDifferences) {
  const Frontend model(tiny_config(GetParam()));
  const auto params = model.initialize<double>(11);
  const auto inputs = random_grad_check_inputs(model.config(), 5, 7, 12);
  const auto report = grad_check_frontend(model, params, inputs);
  EXPECT_EQ(report.blocks.size(), params.size());
  for (const auto& b : report.blocks) EXPECT_GE(b.checked, std::min<std::size_t>(20, params.at(b.name).size()));
  EXPECT_LT(report.max_rel_error, 1e-4);
  EXPECT_TRUE(report.passed());
}

INSTANTIATE_TEST_SUITE_P(Variants, FrontendGradCheck,
                         ::testing::Values(Variant::E0, Variant::E1, Variant::E2, Variant::E3),
                         [](const auto& info) { return std::string(to_string(info.param)); });

TEST(GradCheck, CorruptedFilmBackwardIsCaught) {
  const Frontend model(tiny_config(Variant::E3));
  const auto params = model.initialize<double>(11);
  const auto inputs = random_grad_check_inputs(model.config(), 5, 7, 12);
  GradCheckOptions opts;
  opts.fault_op = "film";
  opts.fault_scale = 2.0;
  const auto report = grad_check_frontend(model, params, inputs, opts);
  EXPECT_FALSE(report.passed());
  bool film_listed = false;
  for (const auto& name : report.failing) film_listed = film_listed || name.find(".film.") != std::string::npos;
  EXPECT_TRUE(film_listed);
}

}  // namespace
}  // namespace noisectx
