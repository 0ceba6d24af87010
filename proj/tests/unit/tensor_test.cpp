#include <gtest/gtest.h>

#include <cmath>

#include "noisectx/named_tensors.hpp"
#include "noisectx/tensor.hpp"

namespace noisectx {
namespace {

TEST(Tensor, ShapeAndStorageAgree) {
  TensorD t({2, 3, 4}, 1.5);
  EXPECT_EQ(t.rank(), 3u);
  EXPECT_EQ(t.size(), 24u);
  EXPECT_EQ(t.cols(), 4u);
  EXPECT_EQ(t.rows(), 6u);
  for (double v : t.values()) EXPECT_EQ(v, 1.5);
}

TEST(Tensor, RejectsZeroExtentAndWrongValueCount) {
  EXPECT_THROW(TensorD({3, 0}), DimensionError);
  EXPECT_THROW(TensorD({2, 2}, std::vector<double>{1, 2, 3}), DimensionError);
}

TEST(Tensor, RowMajorIndexing) {
  auto m = TensorD::matrix(2, 3, {1, 2, 3, 4, 5, 6});
  EXPECT_EQ(m(1, 0), 4.0);
  EXPECT_EQ(m.row(1)[2], 6.0);
}

TEST(Tensor, CastAndBitwiseEquality) {
  auto m = TensorD::matrix(1, 2, {0.1, -2.0});
  TensorF f = m.cast<float>();
  EXPECT_EQ(f[0], 0.1f);
  EXPECT_EQ(f.cast<double>().cast<float>(), f);
  auto m2 = m;
  m2[1] = -2.0000000000000004;
  EXPECT_FALSE(m == m2);
}

TEST(Tensor, HeadAndConcatRows) {
  auto a = TensorD::matrix(2, 2, {1, 2, 3, 4});
  auto b = TensorD::matrix(1, 2, {5, 6});
  auto c = concat_rows(a, b);
  EXPECT_EQ(c.shape(), (Shape{3, 2}));
  EXPECT_EQ(c(2, 1), 6.0);
  EXPECT_EQ(head_rows(c, 2), a);
  EXPECT_THROW(concat_rows(a, TensorD({1, 3})), DimensionError);
}

TEST(Tensor, FinitenessScan) {
  std::vector<double> v{1.0, 2.0};
  EXPECT_TRUE(all_finite(std::span<const double>(v)));
  v.push_back(std::nan(""));
  EXPECT_FALSE(all_finite(std::span<const double>(v)));
}

TEST(NamedTensors, KeepsInsertionOrderAndRejectsDuplicates) {
  NamedTensors<double> s;
  s.insert("z", TensorD({2}));
  s.insert("a", TensorD({3}));
  std::vector<std::string> names;
  for (const auto& [n, _] : s) names.push_back(n);
  EXPECT_EQ(names, (std::vector<std::string>{"z", "a"}));
  EXPECT_EQ(s.scalar_count(), 5u);
  EXPECT_THROW(s.insert("z", TensorD({1})), ContractError);
  EXPECT_THROW(s.at("missing"), ContractError);
  EXPECT_EQ(s.find("missing"), nullptr);
}

TEST(NamedTensors, ZerosLikeKeepsShapes) {
  NamedTensors<double> s;
  s.insert("w", TensorD({2, 3}, 4.0));
  auto z = s.zeros_like();
  EXPECT_EQ(z.at("w").shape(), (Shape{2, 3}));
  EXPECT_EQ(z.at("w")[5], 0.0);
}

}  // namespace
}  // namespace noisectx
