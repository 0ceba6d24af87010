#include <gtest/gtest.h>

#include "noisectx/ops.hpp"
#include "test_support.hpp"

namespace noisectx {
namespace {

using testing::random_tensor;

NamedTensors<double> two_params() {
  NamedTensors<double> p;
  p.insert("w", random_tensor({2, 3}, 1));
  p.insert("unused", random_tensor({4}, 2));
  return p;
}

TEST(Backward, LinearSumHasHandDerivedGradient) {
  auto params = two_params();
  auto x = random_tensor({3, 2}, 3);
  Graph<double> g(&params);
  auto grads = g.backward(sum(matmul(g.param("w"), g.constant(x))));
  // d/dW[i,k] sum_ij (W x)_ij = sum_j x[k,j]
  const TensorD& gw = grads.at("w");
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t k = 0; k < 3; ++k) EXPECT_DOUBLE_EQ(gw(i, k), x(k, 0) + x(k, 1));
}

TEST(Backward, UnreachedParameterGetsZeros) {
  auto params = two_params();
  Graph<double> g(&params);
  auto grads = g.backward(sum(g.param("w")));
  EXPECT_EQ(grads.at("unused"), TensorD({4}));
  EXPECT_EQ(grads.at("w").shape(), params.at("w").shape());
}

TEST(Backward, GradientsFollowStoreOrder) {
  auto params = two_params();
  Graph<double> g(&params);
  auto grads = g.backward(sum(g.param("unused")));
  std::vector<std::string> names;
  for (const auto& [n, _] : grads) names.push_back(n);
  EXPECT_EQ(names, (std::vector<std::string>{"w", "unused"}));
}

TEST(Backward, NonScalarLossIsAContractError) {
  auto params = two_params();
  Graph<double> g(&params);
  EXPECT_THROW(g.backward(g.param("w")), ContractError);
}

TEST(Backward, GraphIsSingleUse) {
  auto params = two_params();
  Graph<double> g(&params);
  auto loss = sum(g.param("w"));
  g.backward(loss);
  EXPECT_THROW(g.backward(loss), ContractError);
}

TEST(Backward, FanOutAccumulates) {
  Graph<double> g;
  auto x = g.variable(TensorD::scalar(3.0));
  auto y = add(mul(x, x), x);  // x^2 + x
  g.backward(y);
  EXPECT_EQ((*g.grad(x))[0], 7.0);
}

TEST(Backward, RepeatedParamLookupSharesNode) {
  auto params = two_params();
  Graph<double> g(&params);
  EXPECT_EQ(g.param("w").id(), g.param("w").id());
  EXPECT_THROW(g.param("nope"), ContractError);
}

TEST(Backward, InjectedFaultScalesTaggedOp) {
  auto params = two_params();
  Graph<double> g(&params);
  g.inject_backward_fault("scale", 3.0);
  auto grads = g.backward(sum(scale(g.param("w"), 2.0)));
  for (double v : grads.at("w").values()) EXPECT_EQ(v, 6.0);
}

}  // namespace
}  // namespace noisectx
