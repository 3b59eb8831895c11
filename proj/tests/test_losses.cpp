#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "cct/error.hpp"
#include "cct/losses.hpp"
#include "oracles.hpp"

using namespace cct;

namespace {

using test::oracle_total;
using test::oracle_view1;
using test::oracle_view2;

MatrixD random_features(int k, int d, std::mt19937_64& gen) {
  std::normal_distribution<double> n(0.0, 1.0);
  MatrixD m(k, d);
  for (int r = 0; r < k; ++r) {
    for (int c = 0; c < d; ++c) m(r, c) = n(gen);
  }
  return m;
}

ContrastiveBatch<double> orthonormal_pair() {
  MatrixD h = MatrixD::Identity(2, 2);
  return {h, h};
}

} // namespace

TEST_SUITE("losses") {

TEST_CASE("cross entropy with floor") {
  MatrixD p(3, 3);
  p << 0.7, 0.2, 0.1,
       0.0, 1.0, 0.0,
       0.25, 0.25, 0.5;
  const std::vector<int> y = {0, 0, 2};
  const auto ce = cross_entropy_per_sample(p, y);
  CHECK(ce[0] == doctest::Approx(-std::log(0.7)));
  CHECK(ce[1] == doctest::Approx(-std::log(1e-12)));
  CHECK(ce[2] == doctest::Approx(std::log(2.0)));
}

TEST_CASE("cross entropy rejects bad labels") {
  MatrixD p = MatrixD::Constant(2, 3, 1.0 / 3);
  const std::vector<int> y = {0, 3};
  CHECK_THROWS_AS(cross_entropy_per_sample(p, y), Error);
  const std::vector<int> short_y = {0};
  CHECK_THROWS_AS(cross_entropy_per_sample(p, short_y), Error);
}

TEST_CASE("selected loss is a sum") {
  const std::vector<double> l = {0.5, 1.0, 2.0, 4.0};
  const std::vector<std::size_t> sel = {0, 2, 3};
  const auto r = selected_classification_loss(l, sel);
  CHECK(r.value == 6.5);
  CHECK_FALSE(r.empty_selection);
}

TEST_CASE("empty selection yields zero and a flag") {
  const std::vector<double> l = {0.5, 1.0};
  const auto r = selected_classification_loss(l, std::vector<std::size_t>{});
  CHECK(r.value == 0.0);
  CHECK(r.empty_selection);
}

TEST_CASE("duplicate or out-of-range selection indices are rejected") {
  const std::vector<double> l = {0.5, 1.0, 2.0};
  CHECK_THROWS_AS(selected_classification_loss(l, std::vector<std::size_t>{1, 1}), Error);
  CHECK_THROWS_AS(selected_classification_loss(l, std::vector<std::size_t>{3}), Error);
}

TEST_CASE("selected logit gradient") {
  MatrixD p(2, 2);
  p << 0.6, 0.4, 0.3, 0.7;
  const std::vector<int> y = {1, 1};
  const auto g = selected_cross_entropy_logit_grad(p, y, std::vector<std::size_t>{1});
  CHECK(g.row(0).isZero());
  CHECK(g(1, 0) == doctest::Approx(0.3));
  CHECK(g(1, 1) == doctest::Approx(-0.3));
}

TEST_CASE("interleave order") {
  MatrixD a(2, 1), b(2, 1);
  a << 1, 3;
  b << 2, 4;
  const auto c = interleave(a, b);
  REQUIRE(c.rows() == 4);
  for (int r = 0; r < 4; ++r) CHECK(c(r, 0) == r + 1);
  const auto [a2, b2] = deinterleave(c);
  CHECK(a2 == a);
  CHECK(b2 == b);
}

TEST_CASE("orthonormal two-sample example") {
  const auto batch = orthonormal_pair();
  const double expected = -std::log(std::exp(2.0) / (std::exp(2.0) + 2.0));
  CHECK(expected == doctest::Approx(0.2395).epsilon(1e-3));
  CHECK(contrastive_loss_view1<double>(0, batch, 0.5) == doctest::Approx(expected).epsilon(1e-12));
  CHECK(contrastive_loss_view2<double>(1, batch, 0.5) == doctest::Approx(expected).epsilon(1e-12));
  CHECK(contrastive_loss_batch(batch, 0.5) == doctest::Approx(4.0 * expected).epsilon(1e-12));
  CHECK(contrastive_loss_batch(batch, 0.5) == doctest::Approx(0.9580).epsilon(1e-3));
}

TEST_CASE("single sample gives exactly zero") {
  std::mt19937_64 gen(1);
  for (int d : {1, 3, 8}) {
    ContrastiveBatch<double> b{random_features(1, d, gen), random_features(1, d, gen)};
    CHECK(contrastive_loss_batch(b, 0.5) == 0.0);
    const auto g = contrastive_loss_with_grad(b, 0.5);
    CHECK(g.loss == 0.0);
    CHECK(g.d_first.isZero());
    CHECK(g.d_second.isZero());
  }
}

TEST_CASE("matches the literal oracle on random batches") {
  std::mt19937_64 gen(2024);
  std::uniform_int_distribution<int> kd(1, 8), dd(2, 16);
  std::uniform_real_distribution<double> phid(0.1, 2.0);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const int k = kd(gen), d = dd(gen);
    const double phi = trial == 0 ? 0.5 : phid(gen);
    ContrastiveBatch<double> b{random_features(k, d, gen), random_features(k, d, gen)};
    const double ours = contrastive_loss_batch(b, phi);
    const double ref = oracle_total(b.first, b.second, phi);
    worst = std::max(worst, std::abs(ours - ref));
    for (int i = 1; i <= k; ++i) {
      CHECK(std::abs(contrastive_loss_view1<double>(i - 1, b, phi) - oracle_view1(i, b.first, b.second, phi)) <= 1e-9);
      CHECK(std::abs(contrastive_loss_view2<double>(i - 1, b, phi) - oracle_view2(i, b.first, b.second, phi)) <= 1e-9);
    }
    CHECK(std::abs(contrastive_loss_with_grad(b, phi).loss - ref) <= 1e-9);
  }
  CHECK(worst <= 1e-9);
}

TEST_CASE("invariant to positive rescaling of any feature row") {
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> s(0.01, 100.0);
  ContrastiveBatch<double> b{random_features(6, 5, gen), random_features(6, 5, gen)};
  const double base = contrastive_loss_batch(b, 0.5);
  ContrastiveBatch<double> scaled = b;
  for (int r = 0; r < 6; ++r) {
    scaled.first.row(r) *= s(gen);
    scaled.second.row(r) *= s(gen);
  }
  CHECK(std::abs(contrastive_loss_batch(scaled, 0.5) - base) <= 1e-9);
}

TEST_CASE("invariant to a shared permutation of samples") {
  std::mt19937_64 gen(6);
  ContrastiveBatch<double> b{random_features(7, 4, gen), random_features(7, 4, gen)};
  std::vector<int> perm = {3, 0, 6, 1, 5, 2, 4};
  ContrastiveBatch<double> p{MatrixD(7, 4), MatrixD(7, 4)};
  for (int r = 0; r < 7; ++r) {
    p.first.row(r) = b.first.row(perm[r]);
    p.second.row(r) = b.second.row(perm[r]);
  }
  CHECK(std::abs(contrastive_loss_batch(p, 0.5) - contrastive_loss_batch(b, 0.5)) <= 1e-9);
}

TEST_CASE("loss is non-negative and drops as positives align") {
  std::mt19937_64 gen(8);
  ContrastiveBatch<double> b{random_features(5, 6, gen), random_features(5, 6, gen)};
  const double before = contrastive_loss_batch(b, 0.5);
  CHECK(before >= 0.0);
  ContrastiveBatch<double> aligned{b.first, b.first};
  CHECK(contrastive_loss_batch(aligned, 0.5) < before);
}

TEST_CASE("gradient matches central differences") {
  std::mt19937_64 gen(9);
  for (int k : {2, 3, 5}) {
    ContrastiveBatch<double> b{random_features(k, 4, gen), random_features(k, 4, gen)};
    const auto g = contrastive_loss_with_grad(b, 0.5);
    const double eps = 1e-6;
    for (int which = 0; which < 2; ++which) {
      MatrixD& m = which == 0 ? b.first : b.second;
      const MatrixD& grad = which == 0 ? g.d_first : g.d_second;
      for (int r = 0; r < k; ++r) {
        for (int c = 0; c < 4; ++c) {
          const double keep = m(r, c);
          m(r, c) = keep + eps;
          const double up = oracle_total(b.first, b.second, 0.5);
          m(r, c) = keep - eps;
          const double down = oracle_total(b.first, b.second, 0.5);
          m(r, c) = keep;
          const double fd = (up - down) / (2 * eps);
          CHECK(std::abs(fd - grad(r, c)) <= 1e-6 * (1.0 + std::abs(fd)));
        }
      }
    }
  }
}

TEST_CASE("float and double agree") {
  std::mt19937_64 gen(10);
  ContrastiveBatch<double> b{random_features(8, 16, gen), random_features(8, 16, gen)};
  ContrastiveBatch<float> f{b.first.cast<float>(), b.second.cast<float>()};
  CHECK(contrastive_loss_batch(f, 0.5) == doctest::Approx(contrastive_loss_batch(b, 0.5)).epsilon(1e-5));
}

TEST_CASE("invalid inputs") {
  ContrastiveBatch<double> mismatched{MatrixD::Ones(2, 3), MatrixD::Ones(3, 3)};
  CHECK_THROWS_AS(contrastive_loss_batch(mismatched, 0.5), Error);
  ContrastiveBatch<double> zero{MatrixD::Zero(2, 3), MatrixD::Ones(2, 3)};
  try {
    contrastive_loss_batch(zero, 0.5);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::numeric_failure);
  }
  ContrastiveBatch<double> ok{MatrixD::Ones(2, 3), MatrixD::Ones(2, 3)};
  CHECK_THROWS_AS(contrastive_loss_batch(ok, 0.0), Error);
  CHECK_THROWS_AS(contrastive_loss_view1<double>(2, ok, 0.5), Error);
}

TEST_CASE("combined loss") {
  CHECK(combined_loss(1.0, 2.0, 1e-4) == doctest::Approx(1.0002).epsilon(1e-12));
  CHECK(combined_loss(0.0, 0.958, 1e-4) == doctest::Approx(9.58e-5).epsilon(1e-12));
  CHECK(combined_loss(0.7, 123.0, 0.0) == 0.7);
}

TEST_CASE("loss config validation") {
  LossConfig c;
  CHECK_NOTHROW(c.validate());
  c.temperature = 0.0;
  CHECK_THROWS_AS(c.validate(), Error);
  c.temperature = 0.5;
  c.lambda = -1.0;
  CHECK_THROWS_AS(c.validate(), Error);
}

}
