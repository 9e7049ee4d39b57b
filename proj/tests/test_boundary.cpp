#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include "oracles.hpp"
#include "ucil/contrastive.hpp"
#include "ucil/gradcheck_suite.hpp"
#include "ucil/prototypes.hpp"

using namespace ucil;

namespace {

Matrix unit_rows(std::size_t r, std::size_t c, Rng& rng) {
  Matrix m(r, c);
  for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
  renormalize_rows(m);
  return m;
}

double ucl_value(const Matrix& z, const std::vector<int>& labels, const Matrix& protos,
                 const std::vector<double>& margins, double tau = 1.0) {
  Tape t;
  return t.scalar_value(ucl_loss(t, t.constant(z), labels, t.constant(protos), margins, tau));
}

}  // namespace

TEST_CASE("margin contrastive loss hand values") {
  // two classes; the sample sits exactly on its own prototype, orthogonal to
  // the other
  Matrix protos(2, 2);
  protos(0, 0) = 1.0;
  protos(1, 1) = 1.0;
  Matrix z(1, 2);
  z(0, 0) = 1.0;
  const std::vector<int> labels{0};

  CHECK(ucl_value(z, labels, protos, {0.0}) ==
        Catch::Approx(std::log(1.0 + std::exp(-1.0))).margin(1e-12));
  CHECK(ucl_value(z, labels, protos, {0.0}) == Catch::Approx(0.3133).margin(5e-5));
  CHECK(ucl_value(z, labels, protos, {0.5}) ==
        Catch::Approx(std::log(1.0 + std::exp(-0.5))).margin(1e-12));
  CHECK(ucl_value(z, labels, protos, {0.5}) == Catch::Approx(0.4741).margin(5e-5));
}

TEST_CASE("single-class degenerate case is zero") {
  Matrix protos(1, 3);
  protos(0, 0) = 1.0;
  Matrix z(2, 3);
  z(0, 0) = 1.0;
  z(1, 1) = 1.0;
  CHECK(ucl_value(z, {0, 0}, protos, {0.3, 0.3}) == Catch::Approx(0.0).margin(1e-15));
}

TEST_CASE("zero margins recover the prototype softmax loss") {
  Rng rng(71);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t batch = 1 + rng.index(6), d = 4;
    const int classes = 2 + static_cast<int>(rng.index(4));
    const Matrix z = unit_rows(batch, d, rng);
    const Matrix protos = unit_rows(static_cast<std::size_t>(classes), d, rng);
    std::vector<int> labels(batch);
    for (auto& y : labels) y = static_cast<int>(rng.index(static_cast<std::size_t>(classes)));
    const std::vector<double> zero(batch, 0.0);
    const double lhs = ucl_value(z, labels, protos, zero);
    const double rhs = oracles::psc_reference(z, labels, protos, 1.0);
    CHECK(lhs == Catch::Approx(rhs).margin(1e-9));
  }
}

TEST_CASE("temperature variant matches the softmax reference") {
  Rng rng(73);
  const Matrix z = unit_rows(5, 4, rng);
  const Matrix protos = unit_rows(3, 4, rng);
  const std::vector<int> labels{0, 1, 2, 1, 0};
  const std::vector<double> zero(5, 0.0);
  for (double tau : {0.5, 1.0, 2.0})
    CHECK(ucl_value(z, labels, protos, zero, tau) ==
          Catch::Approx(oracles::psc_reference(z, labels, protos, tau)).margin(1e-9));
}

TEST_CASE("loss is nondecreasing in the class uncertainty margin") {
  Rng rng(79);
  const Matrix z = unit_rows(6, 5, rng);
  const Matrix protos = unit_rows(4, 5, rng);
  const std::vector<int> labels{0, 1, 2, 3, 1, 2};
  MarginPolicy policy;
  policy.kind = MarginPolicyKind::uncertainty;
  policy.beta = 0.1;
  double previous = -1.0;
  for (double u = 0.0; u <= 1.0; u += 0.1) {
    const std::vector<double> table(4, u);
    std::vector<double> margins(6);
    for (std::size_t k = 0; k < 6; ++k)
      margins[k] = policy.margin_for(labels[k], table, table);
    const double value = ucl_value(z, labels, protos, margins);
    CHECK(value >= previous);
    previous = value;
  }
}

TEST_CASE("margin policies and validation") {
  MarginPolicy policy;
  const std::vector<double> u{0.5, 0.9};
  const std::vector<double> err{0.25, 1.0};
  policy.kind = MarginPolicyKind::none;
  CHECK(policy.margin_for(1, u, err) == 0.0);
  policy.kind = MarginPolicyKind::fixed;
  policy.fixed_margin = 0.3;
  CHECK(policy.margin_for(1, u, err) == Catch::Approx(0.3));
  policy.kind = MarginPolicyKind::error_rate;
  policy.error_scale = 0.2;
  CHECK(policy.margin_for(0, u, err) == Catch::Approx(0.05));
  policy.kind = MarginPolicyKind::uncertainty;
  policy.beta = 0.1;
  CHECK(policy.margin_for(1, u, err) == Catch::Approx(0.09));

  Tape t;
  Matrix z(1, 2);
  z(0, 0) = 1.0;
  Matrix protos(3, 2);
  protos(0, 0) = 1.0;
  protos(1, 1) = 1.0;
  protos(2, 0) = -1.0;
  const std::vector<double> zero_margin{0.0};
  CHECK_THROWS_AS(
      ucl_loss(t, t.constant(z), std::vector<int>{5}, t.constant(protos), zero_margin),
      std::invalid_argument);
  Matrix long_z(1, 2);
  long_z(0, 0) = 2.0;
  CHECK_THROWS_AS(
      ucl_loss(t, t.constant(long_z), std::vector<int>{0}, t.constant(protos), zero_margin),
      std::invalid_argument);
}

TEST_CASE("centroid updates") {
  const int classes = 2;
  Matrix previous(2, 2);
  previous(0, 0) = 1.0;
  previous(1, 1) = 1.0;

  SECTION("single member becomes the centroid") {
    Matrix embed(2, 2);
    embed(0, 0) = 0.6;
    embed(0, 1) = 0.8;
    embed(1, 1) = 1.0;
    const std::vector<int> labels{0, 1};
    const std::vector<std::size_t> train{0, 1};
    const Matrix bank = update_centroids(embed, labels, train, classes, previous);
    CHECK(bank(0, 0) == Catch::Approx(0.6).margin(1e-12));
    CHECK(bank(0, 1) == Catch::Approx(0.8).margin(1e-12));
  }
  SECTION("antipodal members flag a degenerate mean and keep the old row") {
    Matrix embed(3, 2);
    embed(0, 0) = 1.0;
    embed(1, 0) = -1.0;
    embed(2, 1) = 1.0;
    const std::vector<int> labels{0, 0, 1};
    const std::vector<std::size_t> train{0, 1, 2};
    std::ostringstream warnings;
    const Matrix bank = update_centroids(embed, labels, train, classes, previous, &warnings);
    CHECK(bank(0, 0) == Catch::Approx(1.0));  // previous row retained
    CHECK(warnings.str().find("degenerate") != std::string::npos);
  }
  SECTION("orthogonal members average to the diagonal") {
    Matrix embed(3, 2);
    embed(0, 0) = 1.0;
    embed(1, 1) = 1.0;
    embed(2, 0) = 1.0;
    const std::vector<int> labels{0, 0, 1};
    const std::vector<std::size_t> train{0, 1, 2};
    const Matrix bank = update_centroids(embed, labels, train, classes, previous);
    const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
    CHECK(bank(0, 0) == Catch::Approx(inv_sqrt2).margin(1e-12));
    CHECK(bank(0, 1) == Catch::Approx(inv_sqrt2).margin(1e-12));
    // dot product with each member is 0.7071
    CHECK(bank(0, 0) * embed(0, 0) + bank(0, 1) * embed(0, 1) ==
          Catch::Approx(0.7071).margin(5e-5));
  }
  SECTION("empty class is rejected") {
    Matrix embed(1, 2);
    embed(0, 0) = 1.0;
    const std::vector<int> labels{0};
    const std::vector<std::size_t> train{0};
    CHECK_THROWS_AS(update_centroids(embed, labels, train, classes, previous),
                    std::invalid_argument);
  }
}

TEST_CASE("cross-view consistency loss") {
  Rng rng(83);
  const Matrix z = unit_rows(4, 6, rng);

  SECTION("identical views give zero") {
    Tape t;
    std::array<Var, 3> views{t.constant(z), t.constant(z), t.constant(z)};
    CHECK(t.scalar_value(common_loss(t, views)) == Catch::Approx(0.0).margin(1e-15));
  }
  SECTION("a third view with a different similarity structure is strictly positive") {
    // a whole-view orthogonal rotation leaves the Gram matrix unchanged, so
    // flip a single row instead; that provably alters the off-diagonals
    Matrix flipped = z;
    for (std::size_t j = 0; j < z.cols(); ++j) flipped(0, j) = -z(0, j);
    Tape t;
    std::array<Var, 3> views{t.constant(z), t.constant(z), t.constant(flipped)};
    CHECK(t.scalar_value(common_loss(t, views)) > 0.0);
  }
  SECTION("a whole-view rotation leaves the loss at zero") {
    Matrix rotated(z.rows(), z.cols());
    for (std::size_t i = 0; i < z.rows(); ++i) {
      rotated(i, 0) = z(i, 1);
      rotated(i, 1) = -z(i, 0);
      for (std::size_t j = 2; j < z.cols(); ++j) rotated(i, j) = z(i, j);
    }
    Tape t;
    std::array<Var, 3> views{t.constant(z), t.constant(z), t.constant(rotated)};
    CHECK(t.scalar_value(common_loss(t, views)) == Catch::Approx(0.0).margin(1e-12));
  }
  SECTION("hand-built 2x2 similarity gap of 0.5 in a symmetric pair") {
    // orthogonal pair in view A (off-diagonal 0) vs 30-degree pair in view B
    // (off-diagonal 0.5): entry-mean term is 2 * 0.25 / 4 = 0.125
    Matrix a(2, 2), bm(2, 2);
    a(0, 0) = 1.0;
    a(1, 1) = 1.0;
    bm(0, 0) = 1.0;
    bm(1, 0) = 0.5;
    bm(1, 1) = std::sqrt(3.0) / 2.0;
    Tape t;
    std::array<Var, 2> views{t.constant(a), t.constant(bm)};
    CHECK(t.scalar_value(common_loss(t, views, /*entry_mean=*/true)) ==
          Catch::Approx(0.125).margin(1e-12));
    // raw Frobenius variant is batch^2 times larger
    CHECK(t.scalar_value(common_loss(t, views, /*entry_mean=*/false)) ==
          Catch::Approx(0.5).margin(1e-12));
  }
}

TEST_CASE("per-class training error rates") {
  const std::vector<int> labels{0, 0, 0, 0, 1, 1};
  const std::vector<std::size_t> train{0, 1, 2, 3, 4, 5};
  SECTION("perfect predictions give zeros") {
    const std::vector<int> preds{0, 0, 0, 0, 1, 1};
    const auto rates = error_rate_table(preds, labels, train, 2);
    CHECK(rates == std::vector<double>{0.0, 0.0});
  }
  SECTION("one wrong out of four") {
    const std::vector<int> preds{0, 1, 0, 0, 1, 1};
    const auto rates = error_rate_table(preds, labels, train, 2);
    CHECK(rates[0] == Catch::Approx(0.25));
    CHECK(rates[1] == Catch::Approx(0.0));
  }
  SECTION("all wrong") {
    const std::vector<int> preds{1, 1, 1, 1, 0, 0};
    const auto rates = error_rate_table(preds, labels, train, 2);
    CHECK(rates == std::vector<double>{1.0, 1.0});
  }
  SECTION("empty class is rejected") {
    const std::vector<int> two{0, 0};
    const std::vector<std::size_t> idx{0, 1};
    CHECK_THROWS_AS(error_rate_table(two, two, idx, 2), std::invalid_argument);
  }
}

TEST_CASE("prototype gradients flow through the contrastive loss") {
  Rng rng(89);
  Matrix z_raw(4, 5), p_raw(3, 5);
  for (std::size_t i = 0; i < z_raw.size(); ++i) z_raw.data()[i] = rng.normal();
  for (std::size_t i = 0; i < p_raw.size(); ++i) p_raw.data()[i] = rng.normal();
  const std::vector<int> labels{0, 1, 2, 0};
  const std::vector<double> margins{0.05, 0.0, 0.09, 0.02};
  std::vector<ParamRef> refs{{"z", &z_raw}, {"p", &p_raw}};
  const auto report = check_problem(refs, [&](Binding& b) {
    Tape& t = b.tape();
    Var z = t.l2_normalize_rows(b.bind(z_raw));
    Var p = t.l2_normalize_rows(b.bind(p_raw));
    return ucl_loss(t, z, labels, p, margins);
  });
  INFO("max rel err " << report.max_rel_error);
  CHECK(report.ok());
}
