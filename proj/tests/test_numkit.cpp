#include <catch2/catch_amalgamated.hpp>

#include "oracles.hpp"
#include "ucil/grad_check.hpp"
#include "ucil/gradcheck_suite.hpp"
#include "ucil/matrix.hpp"
#include "ucil/special.hpp"
#include "ucil/tape.hpp"

using namespace ucil;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, Rng& rng) {
  Matrix m(r, c);
  for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
  return m;
}

}  // namespace

TEST_CASE("digamma matches known values") {
  CHECK(digamma(1.0) == Catch::Approx(-0.57721566490153286).epsilon(1e-12));
  CHECK(digamma(2.0) - digamma(1.0) == Catch::Approx(1.0).margin(1e-12));
  CHECK(digamma(4.0) - digamma(2.0) == Catch::Approx(5.0 / 6.0).margin(1e-12));
  CHECK_THROWS_AS(digamma(0.0), std::domain_error);
  CHECK_THROWS_AS(digamma(-1.5), std::domain_error);
}

TEST_CASE("digamma matches the long-shift series oracle") {
  Rng rng(101);
  for (int k = 0; k < 25; ++k) {
    const double x = std::exp(rng.uniform(std::log(1e-3), std::log(50.0)));
    const double ref = oracles::digamma_reference(x);
    const double got = digamma(x);
    CHECK(std::abs(got - ref) <= 1e-10 * std::max(1.0, std::abs(ref)));
  }
}

TEST_CASE("digamma recurrence psi(x+1) = psi(x) + 1/x") {
  Rng rng(7);
  for (int k = 0; k < 100; ++k) {
    const double x = rng.uniform(0.01, 50.0);
    CHECK(std::abs(digamma(x + 1.0) - digamma(x) - 1.0 / x) <= 1e-10);
  }
}

TEST_CASE("trigamma matches pi^2/6 at 1 and the digamma recurrence derivative") {
  CHECK(trigamma(1.0) ==
        Catch::Approx(3.14159265358979323846 * 3.14159265358979323846 / 6.0).epsilon(1e-12));
  Rng rng(11);
  for (int k = 0; k < 50; ++k) {
    const double x = rng.uniform(0.05, 30.0);
    CHECK(std::abs(trigamma(x) - trigamma(x + 1.0) - 1.0 / (x * x)) <= 1e-10);
  }
}

TEST_CASE("tape operations are deterministic") {
  Rng rng(3);
  Matrix a = random_matrix(6, 4, rng), b = random_matrix(4, 5, rng);
  auto run = [&]() {
    Tape t;
    Var va = t.leaf(a), vb = t.leaf(b);
    Var out = t.softplus(t.matmul(va, vb));
    Var loss = t.mean(t.mul(out, out));
    t.backward(loss);
    std::pair<Matrix, Matrix> res{t.value(out), t.grad(va)};
    return res;
  };
  auto [v1, g1] = run();
  auto [v2, g2] = run();
  CHECK(v1 == v2);
  CHECK(g1 == g2);
}

TEST_CASE("published operations reject non-finite results") {
  Tape t;
  Var x = t.constant(Matrix(2, 2, -1.0));
  CHECK_THROWS_AS(t.log(x), NonFiniteError);
  Var zero = t.constant(Matrix(2, 2, 0.0));
  Var one = t.constant(Matrix(2, 2, 1.0));
  CHECK_THROWS_AS(t.div(one, zero), NonFiniteError);
}

TEST_CASE("gradient of a node off the loss path stays zero") {
  Tape t;
  Var a = t.leaf(Matrix(2, 2, 1.5));
  Var b = t.leaf(Matrix(2, 2, -0.5));
  Var unused = t.softplus(b);
  Var loss = t.sum(t.mul(a, a));
  t.backward(loss);
  CHECK(t.grad(b).max_abs_diff(Matrix(2, 2, 0.0)) == 0.0);
  CHECK(t.grad(unused).max_abs_diff(Matrix(2, 2, 0.0)) == 0.0);
}

TEST_CASE("matmul agrees with a hand-rolled triple loop") {
  Rng rng(5);
  Matrix a = random_matrix(7, 3, rng), b = random_matrix(3, 6, rng);
  const Matrix c = matmul(a, b);
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) acc += a(i, k) * b(k, j);
      CHECK(c(i, j) == Catch::Approx(acc).margin(1e-12));
    }
}

TEST_CASE("grad_check: sum of squares is exact to machine noise") {
  Rng rng(13);
  Matrix x = random_matrix(3, 3, rng);
  ParamRef ref{"x", &x};
  auto report = check_problem(std::span(&ref, 1), [&](Binding& b) {
    Var v = b.bind(x);
    return b.tape().sum(b.tape().mul(v, v));
  });
  CHECK(report.max_rel_error < 1e-7);
}

TEST_CASE("grad_check flags a wrong gradient") {
  Matrix x(2, 2, 1.0);
  ParamRef ref{"x", &x};
  auto loss_fn = [&]() {
    double acc = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) acc += x.data()[i] * x.data()[i];
    return acc;
  };
  auto bad_grad = [&]() { return std::vector<Matrix>{Matrix(2, 2, 0.0)}; };
  auto report = grad_check(std::span(&ref, 1), loss_fn, bad_grad);
  CHECK_FALSE(report.ok());
}

TEST_CASE("full gradient suite passes at 1e-4") {
  const GradSuiteResult result = run_grad_check_suite(/*seed=*/7, /*tol=*/1e-4);
  for (const auto& c : result.checks) {
    INFO(c.name << " max rel err " << c.max_rel_error);
    CHECK(c.ok);
  }
  CHECK(result.ok);
}
