#include <gtest/gtest.h>

#include <cmath>

#include "noisectx/blocks.hpp"
#include "noisectx/ops.hpp"
#include "noisectx/parameters.hpp"
#include "test_support.hpp"

namespace noisectx {
namespace {

using testing::max_abs_diff;
using testing::random_tensor;

// Initialized parameters with every entry jittered so gains and biases are
// not trivially 1 and 0.
template <typename Block>
NamedTensors<double> jittered(const Block& block, std::uint64_t seed) {
  ParameterLayout layout;
  block.declare(layout);
  auto p = initialize<double>(layout, seed);
  std::uint64_t k = seed;
  for (auto& [name, t] : p) {
    auto noise = random_tensor(t.shape(), ++k, -0.3, 0.3);
    for (std::size_t i = 0; i < t.size(); ++i) t[i] += noise[i];
  }
  return p;
}

// ---- plain-loop reference implementations ----

TensorD ref_norm(const TensorD& x, const TensorD& gain, const TensorD& bias) {
  TensorD y(x.shape());
  const std::size_t d = x.cols();
  for (std::size_t r = 0; r < x.rows(); ++r) {
    double mean = 0, var = 0;
    for (std::size_t c = 0; c < d; ++c) mean += x(r, c);
    mean /= static_cast<double>(d);
    for (std::size_t c = 0; c < d; ++c) var += (x(r, c) - mean) * (x(r, c) - mean);
    var /= static_cast<double>(d);
    for (std::size_t c = 0; c < d; ++c) y(r, c) = (x(r, c) - mean) / std::sqrt(var + 1e-6) * gain[c] + bias[c];
  }
  return y;
}

TensorD ref_affine(const TensorD& x, const TensorD& w, const TensorD& b) {
  TensorD y({x.rows(), w.cols()});
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (std::size_t o = 0; o < w.cols(); ++o) {
      double s = b[o];
      for (std::size_t i = 0; i < x.cols(); ++i) s += x(r, i) * w(i, o);
      y(r, o) = s;
    }
  return y;
}

TensorD ref_matmul(const TensorD& x, const TensorD& w) { return ref_affine(x, w, TensorD({w.cols()}, 0.0)); }

double ref_sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

TensorD ref_norm_named(const NamedTensors<double>& p, const std::string& pre, const TensorD& x) {
  return ref_norm(x, p.at(pre + ".gain"), p.at(pre + ".bias"));
}
TensorD ref_dense(const NamedTensors<double>& p, const std::string& pre, const TensorD& x) {
  return ref_affine(x, p.at(pre + ".w"), p.at(pre + ".b"));
}

// softmax(q k^T / sqrt(dh)) v per head, with an optional causal lookback.
TensorD ref_attention(const TensorD& q, const TensorD& k, const TensorD& v, std::size_t heads, long lookback,
                      bool causal) {
  const std::size_t t_len = q.rows(), s_len = k.rows(), d = q.cols(), dh = d / heads;
  TensorD out({t_len, d});
  for (std::size_t h = 0; h < heads; ++h)
    for (std::size_t t = 0; t < t_len; ++t) {
      std::vector<double> logits(s_len, -INFINITY);
      double mx = -INFINITY;
      for (std::size_t s = 0; s < s_len; ++s) {
        if (causal && (s > t || (lookback >= 0 && static_cast<long>(t - s) > lookback))) continue;
        double dot = 0;
        for (std::size_t c = 0; c < dh; ++c) dot += q(t, h * dh + c) * k(s, h * dh + c);
        logits[s] = dot / std::sqrt(static_cast<double>(dh));
        mx = std::max(mx, logits[s]);
      }
      double z = 0;
      for (auto& l : logits) z += (l = std::exp(l - mx));
      for (std::size_t c = 0; c < dh; ++c) {
        double acc = 0;
        for (std::size_t s = 0; s < s_len; ++s) acc += logits[s] / z * v(s, h * dh + c);
        out(t, h * dh + c) = acc;
      }
    }
  return out;
}

template <typename F>
TensorD run(const NamedTensors<double>& p, F&& f) {
  Graph<double> g(&p);
  return f(g).value();
}

// ---- feed-forward ----

TEST(FeedForwardBlock, ZeroParametersGiveZeroOutput) {
  FeedForward ffn("f", 8);
  ParameterLayout layout;
  ffn.declare(layout);
  NamedTensors<double> p;
  for (const auto& s : layout.specs()) p.insert(s.name, TensorD(s.shape));
  auto y = run(p, [&](Graph<double>& g) { return ffn(g, g.constant(random_tensor({5, 8}, 1))); });
  for (double v : y.values()) EXPECT_EQ(v, 0.0);
}

TEST(FeedForwardBlock, PreservesShapeAndMatchesOracle) {
  FeedForward ffn("f", 8);
  auto p = jittered(ffn, 2);
  for (std::size_t t : {1u, 7u, 30u}) {
    auto x = random_tensor({t, 8}, t);
    auto y = run(p, [&](Graph<double>& g) { return ffn(g, g.constant(x)); });
    ASSERT_EQ(y.shape(), x.shape());
    auto h = ref_dense(p, "f.fc1", ref_norm_named(p, "f.ln", x));
    for (auto& v : h.values()) v = v * ref_sigmoid(v);
    EXPECT_LT(max_abs_diff(y, ref_dense(p, "f.fc2", h)), 1e-10);
  }
}

TEST(FeedForwardBlock, GradientMatchesFiniteDifferences) {
  FeedForward ffn("f", 8);
  auto p = jittered(ffn, 3);
  auto x = random_tensor({4, 8}, 4);
  auto w = random_tensor({4, 8}, 5);
  double err = testing::max_param_fd_error(p, [&](Graph<double>& g) {
    return sum(mul(ffn(g, g.constant(x)), g.constant(w)));
  });
  EXPECT_LT(err, 1e-6);
}

// ---- convolution module ----

TEST(ConvModuleBlock, ZeroInputWithZeroBiasesGivesZero) {
  ConvModule conv("c", 4, 15);
  ParameterLayout layout;
  conv.declare(layout);
  auto p = initialize<double>(layout, 9);
  auto y = run(p, [&](Graph<double>& g) { return conv(g, g.constant(TensorD({6, 4}))); });
  for (double v : y.values()) EXPECT_EQ(v, 0.0);
}

TEST(ConvModuleBlock, MatchesStepByStepOracle) {
  ConvModule conv("c", 4, 15);
  auto p = jittered(conv, 10);
  auto x = random_tensor({6, 4}, 11);
  auto y = run(p, [&](Graph<double>& g) { return conv(g, g.constant(x)); });

  auto h = ref_dense(p, "c.pw1", ref_norm_named(p, "c.ln", x));
  TensorD gated({6, 4});
  for (std::size_t t = 0; t < 6; ++t)
    for (std::size_t c = 0; c < 4; ++c) gated(t, c) = h(t, c) * ref_sigmoid(h(t, c + 4));
  const TensorD& k = p.at("c.dw.kernel");
  TensorD conv_out({6, 4});
  for (std::size_t t = 0; t < 6; ++t)
    for (std::size_t c = 0; c < 4; ++c) {
      double s = 0;
      for (std::size_t j = 0; j < 15; ++j) {
        const long src = static_cast<long>(t) - 14 + static_cast<long>(j);
        if (src >= 0) s += k(j, c) * gated(static_cast<std::size_t>(src), c);
      }
      conv_out(t, c) = s;
    }
  auto normed = ref_norm_named(p, "c.gn", conv_out);
  for (auto& v : normed.values()) v = v * ref_sigmoid(v);
  EXPECT_LT(max_abs_diff(y, ref_dense(p, "c.pw2", normed)), 1e-10);
}

TEST(ConvModuleBlock, IsCausal) {
  ConvModule conv("c", 4, 3);
  auto p = jittered(conv, 12);
  auto x = random_tensor({9, 4}, 13);
  auto base = run(p, [&](Graph<double>& g) { return conv(g, g.constant(x)); });
  for (std::size_t t = 0; t + 1 < 9; ++t) {
    auto z = x;
    for (std::size_t c = 0; c < 4; ++c) z(t + 1, c) += 5.0;
    auto y = run(p, [&](Graph<double>& g) { return conv(g, g.constant(z)); });
    for (std::size_t r = 0; r <= t; ++r)
      for (std::size_t c = 0; c < 4; ++c) EXPECT_EQ(y(r, c), base(r, c));
  }
}

TEST(ConvModuleBlock, GradientMatchesFiniteDifferences) {
  ConvModule conv("c", 4, 3);
  auto p = jittered(conv, 14);
  auto x = random_tensor({5, 4}, 15);
  auto w = random_tensor({5, 4}, 16);
  EXPECT_LT(testing::max_param_fd_error(p, [&](Graph<double>& g) { return sum(mul(conv(g, g.constant(x)), g.constant(w))); }),
            1e-6);
}

// ---- self-attention ----

TEST(SelfAttentionBlock, SingleFrameReturnsProjectedValue) {
  SelfAttention att("a", 8, 2, AttentionMask{});
  auto p = jittered(att, 17);
  auto x = random_tensor({1, 8}, 18);
  auto y = run(p, [&](Graph<double>& g) { return att(g, g.constant(x)); });
  auto expected = ref_dense(p, "a.out", ref_dense(p, "a.v", ref_norm_named(p, "a.ln", x)));
  EXPECT_LT(max_abs_diff(y, expected), 1e-12);
}

TEST(SelfAttentionBlock, ZeroLookbackAttendsOnlyToSelf) {
  SelfAttention att("a", 8, 2, AttentionMask{0, true});
  auto p = jittered(att, 19);
  AttentionTrace<double> trace;
  run(p, [&](Graph<double>& g) { return att(g, g.constant(random_tensor({6, 8}, 20)), &trace); });
  ASSERT_EQ(trace.weights.size(), 2u);
  for (const auto& w : trace.weights)
    for (std::size_t t = 0; t < 6; ++t)
      for (std::size_t s = 0; s < 6; ++s) EXPECT_EQ(w(t, s), t == s ? 1.0 : 0.0);
}

TEST(SelfAttentionBlock, MatchesScalarOracle) {
  SelfAttention att("a", 8, 2, AttentionMask{3, true});
  auto p = jittered(att, 21);
  auto x = random_tensor({7, 8}, 22);
  auto y = run(p, [&](Graph<double>& g) { return att(g, g.constant(x)); });
  auto h = ref_norm_named(p, "a.ln", x);
  auto o = ref_attention(ref_dense(p, "a.q", h), ref_matmul(h, p.at("a.k.w")), ref_dense(p, "a.v", h), 2, 3, true);
  EXPECT_LT(max_abs_diff(y, ref_dense(p, "a.out", o)), 1e-10);
}

TEST(SelfAttentionBlock, FutureAndDistantPastAreInvisible) {
  SelfAttention att("a", 8, 2, AttentionMask{64, true});
  auto p = jittered(att, 23);
  auto x = random_tensor({80, 8}, 24);
  auto base = run(p, [&](Graph<double>& g) { return att(g, g.constant(x)); });

  auto future = x;
  for (std::size_t t = 75; t < 80; ++t)
    for (std::size_t c = 0; c < 8; ++c) future(t, c) = 0.0;
  auto yf = run(p, [&](Graph<double>& g) { return att(g, g.constant(future)); });
  for (std::size_t c = 0; c < 8; ++c) EXPECT_EQ(yf(10, c), base(10, c));

  // frame 70 sees frames 6..70 only
  auto past = x;
  for (std::size_t t = 0; t < 6; ++t)
    for (std::size_t c = 0; c < 8; ++c) past(t, c) = 9.0;
  auto yp = run(p, [&](Graph<double>& g) { return att(g, g.constant(past)); });
  for (std::size_t c = 0; c < 8; ++c) EXPECT_EQ(yp(70, c), base(70, c));
  bool changed = false;
  for (std::size_t c = 0; c < 8; ++c) changed |= yp(69, c) != base(69, c);
  EXPECT_TRUE(changed);
}

TEST(SelfAttentionBlock, WeightRowsAreDistributions) {
  SelfAttention att("a", 8, 4, AttentionMask{5, true});
  auto p = jittered(att, 25);
  AttentionTrace<double> trace;
  run(p, [&](Graph<double>& g) { return att(g, g.constant(random_tensor({12, 8}, 26, -3, 3)), &trace); });
  for (const auto& w : trace.weights)
    for (std::size_t t = 0; t < 12; ++t) {
      double s = 0;
      for (std::size_t j = 0; j < 12; ++j) {
        EXPECT_GE(w(t, j), 0.0);
        s += w(t, j);
      }
      EXPECT_NEAR(s, 1.0, 1e-12);
    }
}

TEST(SelfAttentionBlock, RejectsIndivisibleHeads) { EXPECT_THROW(SelfAttention("a", 10, 4, AttentionMask{}), ConfigError); }

TEST(SelfAttentionBlock, GradientMatchesFiniteDifferences) {
  SelfAttention att("a", 4, 2, AttentionMask{2, true});
  auto p = jittered(att, 27);
  auto x = random_tensor({5, 4}, 28);
  auto w = random_tensor({5, 4}, 29);
  EXPECT_LT(testing::max_param_fd_error(p, [&](Graph<double>& g) { return sum(mul(att(g, g.constant(x)), g.constant(w))); }),
            1e-6);
}

// ---- cross-attention ----

TEST(CrossAttentionBlock, SingleContextFrameIgnoresQueries) {
  CrossAttention att("m", 8, 2);
  auto p = jittered(att, 30);
  auto n = random_tensor({1, 8}, 31);
  auto y = run(p, [&](Graph<double>& g) { return att(g, g.constant(random_tensor({4, 8}, 32)), g.constant(n)); });
  auto expected = ref_dense(p, "m.out", ref_dense(p, "m.v", ref_norm_named(p, "m.ln_kv", n)));
  for (std::size_t t = 0; t < 4; ++t)
    for (std::size_t c = 0; c < 8; ++c) EXPECT_NEAR(y(t, c), expected(0, c), 1e-12);
}

TEST(CrossAttentionBlock, IdenticalContextRowsGiveThatRowsProjection) {
  CrossAttention att("m", 8, 2);
  auto p = jittered(att, 33);
  auto row = random_tensor({1, 8}, 34);
  TensorD n({5, 8});
  for (std::size_t s = 0; s < 5; ++s)
    for (std::size_t c = 0; c < 8; ++c) n(s, c) = row(0, c);
  auto y = run(p, [&](Graph<double>& g) { return att(g, g.constant(random_tensor({3, 8}, 35)), g.constant(n)); });
  auto expected = ref_dense(p, "m.out", ref_dense(p, "m.v", ref_norm_named(p, "m.ln_kv", row)));
  for (std::size_t t = 0; t < 3; ++t)
    for (std::size_t c = 0; c < 8; ++c) EXPECT_NEAR(y(t, c), expected(0, c), 1e-12);
}

TEST(CrossAttentionBlock, MatchesScalarOracle) {
  CrossAttention att("m", 8, 2);
  auto p = jittered(att, 36);
  auto x = random_tensor({3, 8}, 37), n = random_tensor({5, 8}, 38);
  auto y = run(p, [&](Graph<double>& g) { return att(g, g.constant(x), g.constant(n)); });
  auto hq = ref_norm_named(p, "m.ln_q", x);
  auto hkv = ref_norm_named(p, "m.ln_kv", n);
  auto o = ref_attention(ref_dense(p, "m.q", hq), ref_matmul(hkv, p.at("m.k.w")), ref_dense(p, "m.v", hkv), 2, -1, false);
  EXPECT_LT(max_abs_diff(y, ref_dense(p, "m.out", o)), 1e-10);
}

TEST(CrossAttentionBlock, OutputLengthFollowsQueries) {
  CrossAttention att("m", 8, 2);
  auto p = jittered(att, 39);
  for (std::size_t s : {1u, 2u, 17u, 1000u}) {
    AttentionTrace<double> trace;
    auto y = run(p, [&](Graph<double>& g) {
      return att(g, g.constant(random_tensor({6, 8}, 40)), g.constant(random_tensor({s, 8}, s)), &trace);
    });
    EXPECT_EQ(y.shape(), (Shape{6, 8}));
    for (const auto& w : trace.weights)
      for (std::size_t t = 0; t < 6; ++t) {
        double total = 0;
        for (std::size_t j = 0; j < s; ++j) total += w(t, j);
        EXPECT_NEAR(total, 1.0, 1e-9);
      }
  }
}

TEST(CrossAttentionBlock, GradientMatchesFiniteDifferences) {
  CrossAttention att("m", 4, 2);
  auto p = jittered(att, 41);
  auto x = random_tensor({3, 4}, 42), n = random_tensor({6, 4}, 43), w = random_tensor({3, 4}, 44);
  EXPECT_LT(testing::max_param_fd_error(
                p, [&](Graph<double>& g) { return sum(mul(att(g, g.constant(x), g.constant(n)), g.constant(w))); }),
            1e-6);
}

// ---- FiLM ----

TEST(FilmBlock, IdentityConfigurationIsBitExact) {
  Film film_block("film", 6);
  ParameterLayout layout;
  film_block.declare(layout);
  auto p = initialize<double>(layout, 45);
  p.at("film.r.w").fill(0.0);
  p.at("film.r.b").fill(1.0);
  p.at("film.h.w").fill(0.0);
  p.at("film.h.b").fill(0.0);
  auto x = random_tensor({4, 6}, 46);
  auto y = run(p, [&](Graph<double>& g) { return film_block(g, g.constant(x), g.constant(random_tensor({4, 6}, 47))); });
  EXPECT_EQ(y, x);
}

TEST(FilmBlock, GradientMatchesFiniteDifferences) {
  Film film_block("film", 3);
  auto p = jittered(film_block, 48);
  auto x = random_tensor({2, 3}, 49), y = random_tensor({2, 3}, 50), w = random_tensor({2, 3}, 51);
  EXPECT_LT(testing::max_param_fd_error(
                p, [&](Graph<double>& g) { return sum(mul(film_block(g, g.constant(x), g.constant(y)), g.constant(w))); }),
            1e-6);
}

TEST(Blocks, ParameterCountsMatchHandCount) {
  auto count = [](const auto& block) {
    ParameterLayout l;
    block.declare(l);
    return l.scalar_count();
  };
  const std::size_t d = 8;
  EXPECT_EQ(count(FeedForward("f", d)), 2 * d + (d * 4 * d + 4 * d) + (4 * d * d + d));
  EXPECT_EQ(count(ConvModule("c", d, 15)), 2 * d + (2 * d * d + 2 * d) + 15 * d + 2 * d + (d * d + d));
  EXPECT_EQ(count(SelfAttention("a", d, 2, AttentionMask{})), 2 * d + 4 * d * d + 3 * d);
  EXPECT_EQ(count(CrossAttention("m", d, 2)), 4 * d + 4 * d * d + 3 * d);
  EXPECT_EQ(count(Film("film", d)), 2 * (d * d + d));
}

}  // namespace
}  // namespace noisectx
