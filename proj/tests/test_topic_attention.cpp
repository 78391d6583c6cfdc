#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "taas/autodiff.hpp"
#include "taas/matrix.hpp"
#include "taas/optim.hpp"
#include "taas/topic_attention.hpp"
#include "testutil.hpp"

using taas::Graph;
using taas::Matrix;
using taas::NodeRef;
using taas::ParameterSet;
using taas::ProjectionVariant;
using taas::TopicProjection;

namespace {

Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed,
                     double lo = -1.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(lo, hi);
  Matrix m(rows, cols);
  for (double& v : m.data) v = dist(rng);
  return m;
}

}  // namespace

TEST_SUITE_BEGIN("topic_attention");

TEST_CASE("raw scores are plain dot products") {
  Matrix h(3, 2);  // tokens x hidden
  h(0, 0) = 1.0;
  h(0, 1) = 0.0;
  h(1, 0) = 0.0;
  h(1, 1) = 2.0;
  h(2, 0) = 1.0;
  h(2, 1) = 1.0;
  Matrix P(2, 2);  // topics x hidden
  P(0, 0) = 1.0;
  P(0, 1) = 1.0;
  P(1, 0) = -1.0;
  P(1, 1) = 0.5;

  Matrix raw = taas::score_topics(h, P);
  REQUIRE(raw.rows == 2);
  REQUIRE(raw.cols == 3);
  CHECK(raw(0, 0) == 1.0);
  CHECK(raw(0, 1) == 2.0);
  CHECK(raw(0, 2) == 2.0);
  CHECK(raw(1, 0) == -1.0);
  CHECK(raw(1, 1) == 1.0);
  CHECK(raw(1, 2) == -0.5);

  Matrix bad(2, 3);
  CHECK_THROWS_AS(taas::score_topics(h, bad), std::invalid_argument);
}

TEST_CASE("pooling averages topics and renormalizes over real tokens") {
  Matrix raw(2, 3);
  raw(0, 0) = 1.0;
  raw(0, 1) = 3.0;
  raw(0, 2) = 50.0;  // sits on a PAD column, must not matter
  raw(1, 0) = 3.0;
  raw(1, 1) = 1.0;
  raw(1, 2) = -50.0;
  std::vector<double> mask{1.0, 1.0, 0.0};

  taas::TopicAttentionWeights w = taas::pool_and_normalize(raw, mask);
  REQUIRE(w.alpha.size() == 3);
  CHECK(w.alpha[0] == 2.0);
  CHECK(w.alpha[1] == 2.0);
  REQUIRE(w.alpha_hat.size() == 3);
  // Equal means over the two live tokens split the weight evenly.
  CHECK(w.alpha_hat[0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(w.alpha_hat[1] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(w.alpha_hat[2] == 0.0);
}

TEST_CASE("pooling rejects bad masks") {
  Matrix raw(2, 3, 1.0);
  CHECK_THROWS_AS(taas::pool_and_normalize(raw, {1.0, 1.0}),
                  std::invalid_argument);
  std::string msg = testutil::message_of<std::invalid_argument>(
      [&] { taas::pool_and_normalize(raw, {0.0, 0.0, 0.0}); });
  CHECK(msg.find("PAD") != std::string::npos);
}

TEST_CASE("attention weights form a distribution over live tokens") {
  std::mt19937_64 rng(404);
  std::uniform_real_distribution<double> val(-4.0, 4.0);
  std::bernoulli_distribution pad(0.3);
  std::uniform_int_distribution<std::size_t> kd(1, 6), nd(1, 12);

  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t K = kd(rng), N = nd(rng);
    Matrix raw(K, N);
    for (double& v : raw.data) v = val(rng);
    std::vector<double> mask(N, 1.0);
    for (std::size_t i = 0; i < N; ++i) {
      if (pad(rng)) mask[i] = 0.0;
    }
    mask[rng() % N] = 1.0;  // keep at least one live token

    taas::TopicAttentionWeights w = taas::pool_and_normalize(raw, mask);
    double sum = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
      if (mask[i] == 0.0) {
        CHECK(w.alpha_hat[i] == 0.0);
      } else {
        CHECK(w.alpha_hat[i] >= 0.0);
        sum += w.alpha_hat[i];
      }
      double col = 0.0;
      for (std::size_t k = 0; k < K; ++k) col += raw(k, i);
      CHECK(w.alpha[i] == doctest::Approx(col / static_cast<double>(K)).epsilon(1e-12));
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("reordering the tokens only reorders the weights") {
  // Shuffling the token axis of the raw scores, the mask, and the hidden
  // rows together must shuffle alpha_hat the same way and leave the pooled
  // state where it was. Only the softmax denominator and the pooling sum
  // change their accumulation order, so everything agrees to rounding.
  std::mt19937_64 rng(808);
  std::uniform_real_distribution<double> val(-4.0, 4.0);
  std::bernoulli_distribution pad(0.3);
  std::uniform_int_distribution<std::size_t> kd(1, 6), nd(2, 12);
  auto close = [](double a, double b) {
    return std::abs(a - b) <= 1e-12 * std::max({std::abs(a), std::abs(b), 1.0});
  };

  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t K = kd(rng), N = nd(rng), H = 4;
    Matrix raw(K, N);
    for (double& v : raw.data) v = val(rng);
    Matrix h(N, H);
    for (double& v : h.data) v = val(rng);
    std::vector<double> mask(N, 1.0);
    for (std::size_t i = 0; i < N; ++i) {
      if (pad(rng)) mask[i] = 0.0;
    }
    mask[rng() % N] = 1.0;

    std::vector<std::size_t> perm(N);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    Matrix raw_p(K, N);
    Matrix h_p(N, H);
    std::vector<double> mask_p(N);
    for (std::size_t i = 0; i < N; ++i) {
      mask_p[i] = mask[perm[i]];
      for (std::size_t k = 0; k < K; ++k) raw_p(k, i) = raw(k, perm[i]);
      for (std::size_t c = 0; c < H; ++c) h_p(i, c) = h(perm[i], c);
    }

    taas::TopicAttentionWeights w = taas::pool_and_normalize(raw, mask);
    taas::TopicAttentionWeights w_p = taas::pool_and_normalize(raw_p, mask_p);
    for (std::size_t i = 0; i < N; ++i) {
      // Each column mean sums the same topic scores in the same order, so
      // the unnormalized weights transport exactly.
      CHECK(w_p.alpha[i] == w.alpha[perm[i]]);
      if (mask_p[i] == 0.0) {
        CHECK(w_p.alpha_hat[i] == 0.0);
      } else {
        CHECK(close(w_p.alpha_hat[i], w.alpha_hat[perm[i]]));
      }
    }

    Matrix s = taas::pool_sequence(w.alpha_hat, h);
    Matrix s_p = taas::pool_sequence(w_p.alpha_hat, h_p);
    for (std::size_t c = 0; c < s.size(); ++c) {
      CHECK(close(s_p.data[c], s.data[c]));
    }
  }
}

TEST_CASE("junk in padded hidden rows never reaches the pooled state") {
  // A PAD column's score feeds the softmax only after the mask shoves it to
  // -1e30, far below the point where the original value survives rounding,
  // and its weight underflows to an exact zero. Overwriting the padded rows
  // of h with large garbage must therefore leave alpha_hat and s unchanged,
  // not merely close.
  std::mt19937_64 rng(909);
  std::uniform_real_distribution<double> val(-1.0, 1.0);
  std::uniform_real_distribution<double> junk(-1e6, 1e6);
  std::uniform_int_distribution<std::size_t> kd(1, 5), vd(3, 8), hd(2, 6), nd(2, 10);

  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t K = kd(rng), Vt = vd(rng), H = 2 * hd(rng), N = nd(rng);
    ParameterSet params;
    TopicProjection proj(Vt, H,
                         trial % 2 ? ProjectionVariant::post_ln
                                   : ProjectionVariant::additive,
                         params, rng);
    Matrix beta(K, Vt);
    for (std::size_t k = 0; k < K; ++k) {
      double total = 0.0;
      for (std::size_t v = 0; v < Vt; ++v) {
        beta(k, v) = 0.05 + std::abs(val(rng));
        total += beta(k, v);
      }
      for (std::size_t v = 0; v < Vt; ++v) beta(k, v) /= total;
    }
    Matrix h(N, H);
    for (double& v : h.data) v = val(rng);
    std::vector<double> mask(N, 1.0);
    std::bernoulli_distribution pad(0.4);
    for (std::size_t i = 0; i < N; ++i) {
      if (pad(rng)) mask[i] = 0.0;
    }
    const std::size_t live_at = rng() % N;
    mask[live_at] = 1.0;
    mask[(live_at + 1 + rng() % (N - 1)) % N] = 0.0;

    Matrix P = proj.project(beta);
    Matrix raw = taas::score_topics(h, P);
    taas::TopicAttentionWeights w = taas::pool_and_normalize(raw, mask);
    Matrix s = taas::pool_sequence(w.alpha_hat, h);

    Matrix h2 = h;
    for (std::size_t i = 0; i < N; ++i) {
      if (mask[i] != 0.0) continue;
      for (std::size_t c = 0; c < H; ++c) h2(i, c) = junk(rng);
    }
    Matrix raw2 = taas::score_topics(h2, P);
    taas::TopicAttentionWeights w2 = taas::pool_and_normalize(raw2, mask);
    Matrix s2 = taas::pool_sequence(w2.alpha_hat, h2);

    for (std::size_t i = 0; i < N; ++i) CHECK(w2.alpha_hat[i] == w.alpha_hat[i]);
    for (std::size_t c = 0; c < s.size(); ++c) CHECK(s2.data[c] == s.data[c]);
  }
}

TEST_CASE("pooled state is the attention mixture of hidden rows") {
  Matrix h(3, 2);
  h(0, 0) = 1.0;
  h(0, 1) = 2.0;
  h(1, 0) = 3.0;
  h(1, 1) = 4.0;
  h(2, 0) = 5.0;
  h(2, 1) = 6.0;

  Matrix s = taas::pool_sequence({0.25, 0.75, 0.0}, h);
  REQUIRE(s.rows == 1);
  REQUIRE(s.cols == 2);
  CHECK(s(0, 0) == doctest::Approx(0.25 * 1.0 + 0.75 * 3.0).epsilon(1e-15));
  CHECK(s(0, 1) == doctest::Approx(0.25 * 2.0 + 0.75 * 4.0).epsilon(1e-15));

  // A one-hot attention vector must reproduce that row bit for bit.
  Matrix picked = taas::pool_sequence({0.0, 0.0, 1.0}, h);
  CHECK(picked(0, 0) == 5.0);
  CHECK(picked(0, 1) == 6.0);

  CHECK_THROWS_AS(taas::pool_sequence({1.0}, h), std::invalid_argument);
}

TEST_CASE("projection collapses to zero when the feed-forward is zeroed") {
  // With both affine layers zeroed, FFN(beta) is the zero matrix and the
  // softmax term is a constant row, whose layer norm is exactly zero. Both
  // variants must then emit an exactly zero projection. Hidden width is a
  // power of two so the uniform-row mean is exact.
  for (ProjectionVariant variant :
       {ProjectionVariant::additive, ProjectionVariant::post_ln}) {
    std::mt19937_64 rng(7);
    ParameterSet params;
    TopicProjection proj(5, 4, variant, params, rng);
    params.at("proj.ffn1.w").value = Matrix(5, 4);
    params.at("proj.ffn2.w").value = Matrix(4, 4);

    Matrix beta = random_matrix(3, 5, 42, 0.0, 1.0);
    Matrix P = proj.project(beta);
    REQUIRE(P.rows == 3);
    REQUIRE(P.cols == 4);
    for (double v : P.data) CHECK(v == 0.0);
  }
}

TEST_CASE("projection variants produce different maps") {
  std::mt19937_64 rng(11);
  ParameterSet pa, pb;
  std::mt19937_64 ra(11), rb(11);
  TopicProjection additive(6, 4, ProjectionVariant::additive, pa, ra);
  TopicProjection post_ln(6, 4, ProjectionVariant::post_ln, pb, rb);

  Matrix beta = random_matrix(2, 6, 5, 0.0, 1.0);
  Matrix a = additive.project(beta);
  Matrix b = post_ln.project(beta);
  bool differ = false;
  for (std::size_t i = 0; i < a.size(); ++i) differ = differ || a.data[i] != b.data[i];
  CHECK(differ);
}

TEST_CASE("projection rejects a beta of the wrong width") {
  std::mt19937_64 rng(13);
  ParameterSet params;
  TopicProjection proj(6, 4, ProjectionVariant::additive, params, rng);
  Matrix beta(2, 5);
  CHECK_THROWS_AS(proj.project(beta), std::invalid_argument);
  Graph g;
  CHECK_THROWS_AS(proj.project_nodes(g, g.constant(beta)), std::invalid_argument);
}

TEST_CASE("graph and value paths compute the same attention") {
  std::mt19937_64 rng(17);
  ParameterSet params;
  TopicProjection proj(5, 4, ProjectionVariant::additive, params, rng);
  Matrix beta = random_matrix(3, 5, 23, 0.0, 1.0);
  Matrix h = random_matrix(6, 4, 29);
  std::vector<double> mask{1.0, 1.0, 0.0, 1.0, 0.0, 1.0};

  // Value path.
  Matrix P = proj.project(beta);
  Matrix raw = taas::score_topics(h, P);
  taas::TopicAttentionWeights w = taas::pool_and_normalize(raw, mask);
  Matrix s = taas::pool_sequence(w.alpha_hat, h);

  // Graph path over the same inputs.
  Graph g;
  NodeRef Pn = proj.project_nodes(g, g.constant(beta));
  NodeRef rawn = taas::score_topics_node(g, g.constant(h), Pn);
  taas::TopicAttentionNodes an = taas::pool_and_normalize_nodes(g, rawn, mask);
  NodeRef sn = taas::pool_sequence_node(g, an.alpha_hat, g.constant(h));

  const Matrix& raw_g = g.value(rawn);
  REQUIRE(raw_g.rows == raw.rows);
  REQUIRE(raw_g.cols == raw.cols);
  for (std::size_t i = 0; i < raw.size(); ++i) CHECK(raw_g.data[i] == raw.data[i]);

  const Matrix& ah_g = g.value(an.alpha_hat);
  REQUIRE(ah_g.cols == w.alpha_hat.size());
  for (std::size_t i = 0; i < w.alpha_hat.size(); ++i) {
    CHECK(ah_g(0, i) == w.alpha_hat[i]);
  }

  const Matrix& s_g = g.value(sn);
  for (std::size_t i = 0; i < s.size(); ++i) CHECK(s_g.data[i] == s.data[i]);
}

TEST_CASE("gradients flow through the whole attention stack") {
  std::mt19937_64 rng(19);
  ParameterSet params;
  TopicProjection proj(5, 4, ProjectionVariant::post_ln, params, rng);
  Matrix beta = random_matrix(2, 5, 31, 0.05, 1.0);
  Matrix h = random_matrix(4, 4, 37);
  std::vector<double> mask{1.0, 0.0, 1.0, 1.0};

  auto build = [&](Graph& g) {
    NodeRef Pn = proj.project_nodes(g, g.constant(beta));
    NodeRef rawn = taas::score_topics_node(g, g.constant(h), Pn);
    taas::TopicAttentionNodes an = taas::pool_and_normalize_nodes(g, rawn, mask);
    NodeRef sn = taas::pool_sequence_node(g, an.alpha_hat, g.constant(h));
    // Fold the pooled state into a scalar with uneven weights so every
    // component of s matters.
    Matrix fold(4, 1);
    fold(0, 0) = 0.3;
    fold(1, 0) = -1.1;
    fold(2, 0) = 0.7;
    fold(3, 0) = 2.0;
    return g.matmul(sn, g.constant(fold));
  };

  auto forward = [&]() {
    Graph g;
    return g.value(build(g))(0, 0);
  };
  {
    Graph g;
    g.backward(build(g));
  }
  std::map<std::string, Matrix> analytic = testutil::grab_gradients(params);
  REQUIRE(analytic.size() == 6);
  testutil::FdReport report = testutil::fd_check(params, forward, analytic, 40);
  INFO("worst coordinate: ", report.worst);
  CHECK(report.max_rel_err <= 1e-5);
}

TEST_SUITE_END();
