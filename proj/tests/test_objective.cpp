// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "vidistill/objective.hpp"
#include "vidistill/rng.hpp"

using namespace vidistill;

namespace {

Tensor random_tensor(std::vector<int64_t> shape, SeedStream& rng) {
  Tensor t(std::move(shape));
  for (int64_t i = 0; i < t.numel(); ++i) t[i] = rng.normal();
  return t;
}

LossConfig single_target_cfg(bool pool) {
  LossConfig cfg;
  cfg.temporal_pool = pool;
  cfg.targets = {"a"};
  return cfg;
}

}  // namespace

TEST_CASE("cosine distance endpoint values") {
  Tensor q({3}, {1.0, 2.0, -1.0});
  CHECK(cosine_distance(q, q) == doctest::Approx(0.0).epsilon(1e-14));

  Tensor x({2}, {1.0, 0.0});
  Tensor y({2}, {0.0, 1.0});
  CHECK(cosine_distance(x, y) == doctest::Approx(2.0).epsilon(1e-14));

  Tensor nq({3}, {-1.0, -2.0, 1.0});
  CHECK(cosine_distance(q, nq) == doctest::Approx(4.0).epsilon(1e-14));
}

TEST_CASE("cosine distance rejects zero-norm input") {
  Tensor q({2}, {0.0, 0.0});
  Tensor k({2}, {1.0, 0.0});
  CHECK_THROWS_AS(cosine_distance(q, k), std::domain_error);
  CHECK_THROWS_AS(cosine_distance(k, q), std::domain_error);
}

TEST_CASE("cosine distance is scale invariant") {
  SeedStream rng(3);
  for (int rep = 0; rep < 50; ++rep) {
    Tensor q = random_tensor({8}, rng);
    Tensor k = random_tensor({8}, rng);
    double base = cosine_distance(q, k);

    // Powers of two scale exactly in floating point: bit-identical result.
    Tensor q2 = q, k4 = k;
    for (int64_t i = 0; i < 8; ++i) {
      q2[i] *= 4.0;
      k4[i] *= 0.5;
    }
    CHECK(cosine_distance(q2, k) == base);
    CHECK(cosine_distance(q, k4) == base);

    // Arbitrary positive scales agree to rounding.
    double a = std::exp(rng.uniform(-3.0, 3.0));
    double b = std::exp(rng.uniform(-3.0, 3.0));
    Tensor qa = q, kb = k;
    for (int64_t i = 0; i < 8; ++i) {
      qa[i] *= a;
      kb[i] *= b;
    }
    CHECK(cosine_distance(qa, kb) == doctest::Approx(base).epsilon(1e-12));
  }
}

TEST_CASE("temporal pooling") {
  Tensor rows({3, 2}, {0.5, -1.0, 0.5, -1.0, 0.5, -1.0});
  Tensor pooled = temporal_pool(rows);
  CHECK(pooled[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(pooled[1] == doctest::Approx(-1.0).epsilon(1e-15));

  Tensor two({2, 2}, {2.0, 0.0, 0.0, 2.0});
  Tensor p2 = temporal_pool(two);
  CHECK(p2[0] == doctest::Approx(1.0));
  CHECK(p2[1] == doctest::Approx(1.0));

  Tensor one({1, 4}, {1.0, 2.0, 3.0, 4.0});
  Tensor p1 = temporal_pool(one);
  for (int64_t i = 0; i < 4; ++i) CHECK(p1[i] == one[i]);

  CHECK_THROWS_AS(temporal_pool(Tensor({0, 4})), std::invalid_argument);
}

TEST_CASE("prediction loss basic values") {
  SeedStream rng(5);
  Tensor k = random_tensor({4, 6}, rng);

  auto perfect = prediction_loss({k}, k, true);
  CHECK(perfect.value == doctest::Approx(0.0).epsilon(1e-12));

  // One view at distance 0, one at distance 2 (orthogonal in every frame).
  Tensor q0({2, 2}, {1.0, 0.0, 1.0, 0.0});
  Tensor q2({2, 2}, {0.0, 1.0, 0.0, 1.0});
  Tensor kk({2, 2}, {1.0, 0.0, 1.0, 0.0});
  auto mixed = prediction_loss({q0, q2}, kk, true);
  CHECK(mixed.value == doctest::Approx(1.0).epsilon(1e-12));

  // At T=1 pooling is the identity: both variants agree.
  Tensor q1 = random_tensor({1, 5}, rng);
  Tensor k1 = random_tensor({1, 5}, rng);
  auto pooled = prediction_loss({q1}, k1, true);
  auto framed = prediction_loss({q1}, k1, false);
  CHECK(pooled.value == doctest::Approx(framed.value).epsilon(1e-14));
}

TEST_CASE("pooled and per-frame agree on temporally constant features") {
  SeedStream rng(6);
  Tensor qrow = random_tensor({1, 7}, rng);
  Tensor krow = random_tensor({1, 7}, rng);
  Tensor q({4, 7}), k({4, 7});
  for (int64_t t = 0; t < 4; ++t)
    for (int64_t d = 0; d < 7; ++d) {
      q.at2(t, d) = qrow[d];
      k.at2(t, d) = krow[d];
    }
  auto pooled = prediction_loss({q}, k, true);
  auto framed = prediction_loss({q}, k, false);
  CHECK(std::fabs(pooled.value - framed.value) < 1e-12);
}

TEST_CASE("loss values stay in range") {
  SeedStream rng(7);
  LossConfig cfg;
  cfg.targets = {"a", "b"};
  for (int rep = 0; rep < 30; ++rep) {
    bool pool = rep % 2 == 0;
    cfg.temporal_pool = pool;
    std::map<std::string, std::vector<Tensor>> q_sets;
    std::map<std::string, Tensor> k_set;
    for (const auto& name : cfg.targets) {
      q_sets[name] = {random_tensor({3, 5}, rng), random_tensor({3, 5}, rng)};
      k_set[name] = random_tensor({3, 5}, rng);
    }
    auto res = ensemble_loss(q_sets, k_set, cfg);
    CHECK(res.value >= 0.0);
    CHECK(res.value <= 4.0 * static_cast<double>(cfg.targets.size()));
    CHECK(std::isfinite(res.value));
    for (const auto& [name, v] : res.per_target) {
      CHECK(v >= 0.0);
      CHECK(v <= 4.0);
    }
  }
}

TEST_CASE("ensemble additivity and singleton reduction") {
  SeedStream rng(8);
  LossConfig cfg2;
  cfg2.targets = {"a", "b"};
  std::map<std::string, std::vector<Tensor>> q_sets;
  std::map<std::string, Tensor> k_set;
  q_sets["a"] = {random_tensor({2, 4}, rng)};
  k_set["a"] = random_tensor({2, 4}, rng);
  q_sets["b"] = {random_tensor({2, 6}, rng)};
  k_set["b"] = random_tensor({2, 6}, rng);

  auto both = ensemble_loss(q_sets, k_set, cfg2);
  auto la = prediction_loss(q_sets["a"], k_set["a"], true);
  auto lb = prediction_loss(q_sets["b"], k_set["b"], true);
  CHECK(std::fabs(both.value - la.value - lb.value) < 1e-12);
  CHECK(both.per_target.at("a") == doctest::Approx(la.value).epsilon(1e-14));

  // Identical targets at distance d each sum to 2d.
  std::map<std::string, std::vector<Tensor>> q_dup{{"a", q_sets["a"]}, {"b", q_sets["a"]}};
  std::map<std::string, Tensor> k_dup{{"a", k_set["a"]}, {"b", k_set["a"]}};
  auto dup = ensemble_loss(q_dup, k_dup, cfg2);
  CHECK(dup.value == doctest::Approx(2.0 * la.value).epsilon(1e-12));

  LossConfig cfg1;
  cfg1.targets = {"a"};
  auto single = ensemble_loss({{"a", q_sets["a"]}}, {{"a", k_set["a"]}}, cfg1);
  CHECK(single.value == la.value);

  // Averaging switch: mean instead of sum.
  cfg2.average_targets = true;
  auto avg = ensemble_loss(q_sets, k_set, cfg2);
  CHECK(avg.value == doctest::Approx(0.5 * both.value).epsilon(1e-12));
}

TEST_CASE("ensemble rejects mismatched target lists") {
  SeedStream rng(9);
  LossConfig cfg;
  cfg.targets = {"a", "b"};
  std::map<std::string, std::vector<Tensor>> q_sets{{"a", {random_tensor({2, 3}, rng)}}};
  std::map<std::string, Tensor> k_set{{"a", random_tensor({2, 3}, rng)}};
  CHECK_THROWS_AS(ensemble_loss(q_sets, k_set, cfg), std::invalid_argument);
}

TEST_CASE("aux loss contract") {
  SeedStream rng(10);
  LossConfig cfg = single_target_cfg(true);
  Tensor q = random_tensor({2, 4}, rng);
  Tensor k = random_tensor({2, 4}, rng);
  CHECK_THROWS_AS(aux_ssl_loss({q}, k, cfg), std::invalid_argument);

  cfg.aux_ssl = true;
  cfg.aux_weight = 0.3;
  auto res = aux_ssl_loss({q}, k, cfg);
  CHECK(res.value >= 0.0);
  CHECK(res.value <= 4.0);
  // Same functional form as the prediction loss.
  CHECK(res.value == prediction_loss({q}, k, true).value);
}

TEST_CASE("aux_weight zero leaves the total at the distillation loss") {
  SeedStream rng(11);
  LossConfig cfg = single_target_cfg(true);
  cfg.aux_ssl = true;
  cfg.aux_weight = 0.0;
  Tensor q = random_tensor({2, 4}, rng);
  Tensor k = random_tensor({2, 4}, rng);
  auto distill = prediction_loss({q}, k, true);
  auto aux = aux_ssl_loss({q}, k, cfg);
  double total = distill.value + cfg.aux_weight * aux.value;
  CHECK(total == distill.value);
}

TEST_CASE("analytic gradients match central finite differences") {
  SeedStream rng(12);
  const double eps = 1e-5;
  int checked = 0;
  for (int rep = 0; rep < 100; ++rep) {
    int64_t T = rng.uniform_int(1, 4);
    int64_t D = rng.uniform_int(2, 16);
    bool pool = rng.bernoulli(0.5);
    int64_t V = rng.uniform_int(1, 2);
    std::vector<Tensor> q_views;
    for (int64_t v = 0; v < V; ++v) q_views.push_back(random_tensor({T, D}, rng));
    Tensor k = random_tensor({T, D}, rng);

    auto res = prediction_loss(q_views, k, pool);
    for (int64_t v = 0; v < V; ++v) {
      for (int64_t probe = 0; probe < 6; ++probe) {
        int64_t i = rng.uniform_int(0, T * D - 1);
        double orig = q_views[static_cast<size_t>(v)][i];
        q_views[static_cast<size_t>(v)][i] = orig + eps;
        double fp = prediction_loss(q_views, k, pool).value;
        q_views[static_cast<size_t>(v)][i] = orig - eps;
        double fm = prediction_loss(q_views, k, pool).value;
        q_views[static_cast<size_t>(v)][i] = orig;
        double numeric = (fp - fm) / (2 * eps);
        double analytic = res.grad_q[static_cast<size_t>(v)][i];
        double denom = std::max({std::fabs(numeric), std::fabs(analytic), 1e-6});
        CHECK(std::fabs(numeric - analytic) / denom < 1e-4);
        ++checked;
      }
    }
  }
  CHECK(checked > 500);
}

TEST_CASE("no gradient path exists toward the target features") {
  // Stop-gradient is structural: the loss API returns gradients for q only.
  // Mutating k after the call must not touch the returned gradients, and the
  // gradient buffers depend on k only through the forward value.
  SeedStream rng(13);
  Tensor q = random_tensor({2, 4}, rng);
  Tensor k = random_tensor({2, 4}, rng);
  auto res = prediction_loss({q}, k, true);
  Tensor saved = res.grad_q[0];
  for (int64_t i = 0; i < k.numel(); ++i) k[i] += 100.0;
  CHECK(res.grad_q[0].raw() == saved.raw());
}
