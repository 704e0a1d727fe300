// SPDX-License-Identifier: Apache-2.0
//
// Finite-difference checks for every trainable layer; the training loop is
// only as correct as these backward passes.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <functional>

#include "vidistill/nn.hpp"
#include "vidistill/rng.hpp"

using namespace vidistill;

namespace {

Tensor random_tensor(std::vector<int64_t> shape, SeedStream& rng, double scale = 1.0) {
  Tensor t(std::move(shape));
  for (int64_t i = 0; i < t.numel(); ++i) t[i] = scale * rng.normal();
  return t;
}

// Scalar objective: weighted sum of outputs, weights fixed per run so the
// backward has a nontrivial upstream gradient.
double weighted_sum(const Tensor& y, const Tensor& w) {
  double s = 0.0;
  for (int64_t i = 0; i < y.numel(); ++i) s += y[i] * w[i];
  return s;
}

// Relative error between analytic and numeric gradients.
double rel_err(double a, double b) {
  double denom = std::max({std::fabs(a), std::fabs(b), 1e-8});
  return std::fabs(a - b) / denom;
}

constexpr double kEps = 1e-6;
constexpr double kTol = 1e-5;

void check_grad(Tensor& x, const Tensor& analytic, const std::function<double()>& eval,
                int64_t max_checks = 40) {
  SeedStream pick(4242);
  for (int64_t rep = 0; rep < std::min<int64_t>(max_checks, x.numel()); ++rep) {
    int64_t i = pick.uniform_int(0, x.numel() - 1);
    double orig = x[i];
    auto numeric_at = [&](double eps) {
      x[i] = orig + eps;
      double fp = eval();
      x[i] = orig - eps;
      double fm = eval();
      x[i] = orig;
      return (fp - fm) / (2 * eps);
    };
    double numeric = numeric_at(kEps);
    double numeric2 = numeric_at(2 * kEps);
    // Two step sizes disagreeing flags a non-smooth point (a ReLU kink
    // inside the perturbation window); central differences are invalid there.
    if (rel_err(numeric, numeric2) > 1e-3) continue;
    CHECK(rel_err(analytic[i], numeric) < kTol);
  }
}

}  // namespace

TEST_CASE("conv3d gradients match finite differences") {
  SeedStream rng(1);
  nn::Conv3d conv(2, 3, 3, 3, 2);
  conv.init(rng);
  Tensor x = random_tensor({2, 2, 3, 7, 7}, rng);
  Tensor upstream;

  auto eval = [&]() {
    nn::Conv3d fresh(2, 3, 3, 3, 2);
    fresh.weight.value = conv.weight.value;
    fresh.bias.value = conv.bias.value;
    return weighted_sum(fresh.forward(x), upstream);
  };

  Tensor y = conv.forward(x);
  SeedStream wrng(2);
  upstream = random_tensor(y.shape(), wrng);
  conv.weight.grad.fill(0.0);
  conv.bias.grad.fill(0.0);
  Tensor dx = conv.backward(upstream);

  check_grad(x, dx, eval);
  check_grad(conv.weight.value, conv.weight.grad, eval);
  check_grad(conv.bias.value, conv.bias.grad, eval, 3);
}

TEST_CASE("conv3d preserves the temporal extent for any T") {
  SeedStream rng(3);
  nn::Conv3d conv(3, 4, 3, 3, 1);
  conv.init(rng);
  for (int64_t T : {1, 2, 4, 8}) {
    Tensor x = random_tensor({1, 3, T, 6, 6}, rng);
    Tensor y = conv.forward(x);
    CHECK(y.dim(2) == T);
  }
}

TEST_CASE("batchnorm1d gradients match finite differences") {
  SeedStream rng(5);
  nn::BatchNorm1d bn(4);
  // Non-trivial affine parameters.
  for (int64_t i = 0; i < 4; ++i) {
    bn.gamma.value[i] = 0.5 + 0.3 * i;
    bn.beta.value[i] = 0.1 * i;
  }
  Tensor x = random_tensor({6, 4}, rng);
  Tensor upstream = random_tensor({6, 4}, rng);

  auto eval = [&]() {
    nn::BatchNorm1d fresh(4);
    fresh.gamma.value = bn.gamma.value;
    fresh.beta.value = bn.beta.value;
    return weighted_sum(fresh.forward(x, true), upstream);
  };

  bn.forward(x, true);
  Tensor dx = bn.backward(upstream);
  check_grad(x, dx, eval);
  check_grad(bn.gamma.value, bn.gamma.grad, eval, 4);
  check_grad(bn.beta.value, bn.beta.grad, eval, 4);
}

TEST_CASE("batchnorm3d gradients match finite differences") {
  SeedStream rng(6);
  nn::BatchNorm3d bn(2);
  bn.gamma.value[0] = 1.3;
  bn.gamma.value[1] = 0.7;
  Tensor x = random_tensor({2, 2, 2, 3, 3}, rng);
  Tensor upstream = random_tensor({2, 2, 2, 3, 3}, rng);

  auto eval = [&]() {
    nn::BatchNorm3d fresh(2);
    fresh.gamma.value = bn.gamma.value;
    fresh.beta.value = bn.beta.value;
    return weighted_sum(fresh.forward(x, true), upstream);
  };
  bn.forward(x, true);
  Tensor dx = bn.backward(upstream);
  check_grad(x, dx, eval);
  check_grad(bn.gamma.value, bn.gamma.grad, eval, 2);
  check_grad(bn.beta.value, bn.beta.grad, eval, 2);
}

TEST_CASE("batchnorm eval mode uses running statistics") {
  SeedStream rng(7);
  nn::BatchNorm1d bn(3);
  Tensor x = random_tensor({8, 3}, rng);
  bn.forward(x, true);
  Tensor y1 = bn.forward(x, false);
  Tensor y2 = bn.forward(x, false);  // eval mode must not drift
  CHECK(y1.raw() == y2.raw());
}

TEST_CASE("linear gradients match finite differences") {
  SeedStream rng(8);
  nn::Linear fc(5, 3);
  fc.init(rng);
  Tensor x = random_tensor({4, 5}, rng);
  Tensor upstream = random_tensor({4, 3}, rng);

  auto eval = [&]() {
    nn::Linear fresh(5, 3);
    fresh.weight.value = fc.weight.value;
    fresh.bias.value = fc.bias.value;
    return weighted_sum(fresh.forward(x), upstream);
  };
  fc.forward(x);
  Tensor dx = fc.backward(upstream);
  check_grad(x, dx, eval);
  check_grad(fc.weight.value, fc.weight.grad, eval);
  check_grad(fc.bias.value, fc.bias.grad, eval, 3);
}

TEST_CASE("pooling and normalization backward match finite differences") {
  SeedStream rng(9);
  Tensor x = random_tensor({2, 3, 2, 4, 4}, rng);
  Tensor up = random_tensor({2, 2, 3}, rng);
  Tensor dx = nn::spatial_avg_pool_backward(up, x.shape());
  auto eval_pool = [&]() { return weighted_sum(nn::spatial_avg_pool(x), up); };
  check_grad(x, dx, eval_pool);

  Tensor upr = random_tensor({3, 2}, rng);
  Tensor bt = random_tensor({3, 5, 2}, rng);
  Tensor dbt = nn::temporal_avg_pool_batch_backward(upr, 5);
  auto eval_tpool = [&]() { return weighted_sum(nn::temporal_avg_pool_batch(bt), upr); };
  check_grad(bt, dbt, eval_tpool);

  Tensor rows = random_tensor({4, 6}, rng);
  Tensor upn = random_tensor({4, 6}, rng);
  Tensor dn = nn::l2_normalize_rows_backward(upn, rows);
  auto eval_norm = [&]() { return weighted_sum(nn::l2_normalize_rows(rows), upn); };
  check_grad(rows, dn, eval_norm);
}

TEST_CASE("softmax cross entropy gradient matches finite differences") {
  SeedStream rng(10);
  Tensor logits = random_tensor({5, 4}, rng);
  std::vector<int64_t> labels{0, 3, 1, 2, 2};
  Tensor dlogits;
  nn::softmax_cross_entropy(logits, labels, &dlogits);
  auto eval = [&]() { return nn::softmax_cross_entropy(logits, labels, nullptr); };
  check_grad(logits, dlogits, eval);
}

TEST_CASE("mlp end-to-end gradient matches finite differences") {
  SeedStream rng(11);
  nn::Mlp mlp(4, 6, 3);
  mlp.init(rng);
  Tensor x = random_tensor({5, 4}, rng);
  Tensor upstream = random_tensor({5, 3}, rng);

  auto eval = [&]() {
    nn::Mlp fresh(4, 6, 3);
    fresh.fc1.weight.value = mlp.fc1.weight.value;
    fresh.fc1.bias.value = mlp.fc1.bias.value;
    fresh.bn.gamma.value = mlp.bn.gamma.value;
    fresh.bn.beta.value = mlp.bn.beta.value;
    fresh.fc2.weight.value = mlp.fc2.weight.value;
    fresh.fc2.bias.value = mlp.fc2.bias.value;
    return weighted_sum(fresh.forward(x, true), upstream);
  };
  mlp.forward(x, true);
  std::vector<nn::ParamRef> params;
  mlp.collect_parameters("mlp", params);
  for (auto& p : params) p.grad->fill(0.0);
  Tensor dx = mlp.backward(upstream);
  check_grad(x, dx, eval);
  for (auto& p : params) check_grad(*p.value, *p.grad, eval, 10);
}
