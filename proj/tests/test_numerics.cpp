#include "nihigs/numerics.hpp"

#include <doctest.h>

#include <random>

using namespace nihigs;

TEST_SUITE("numerics") {

TEST_CASE("solve_linear returns rhs for the identity") {
  Mat I = Mat::Identity(3, 3);
  Mat b(3, 1);
  b << 1.5, -2.0, 7.25;
  Mat x = solve_linear(I, b);
  CHECK((x - b).norm() == 0.0);
}

TEST_CASE("solve_linear inverts a diagonal system") {
  Mat M(2, 2);
  M << 2, 0, 0, 4;
  Mat b(2, 1);
  b << 2, 4;
  Mat x = solve_linear(M, b);
  CHECK(x(0, 0) == doctest::Approx(1.0));
  CHECK(x(1, 0) == doctest::Approx(1.0));
}

TEST_CASE("solve_linear rejects a singular matrix") {
  Mat M(2, 2);
  M << 1, 2, 2, 4;
  Mat b = Mat::Ones(2, 1);
  CHECK_THROWS_AS(solve_linear(M, b), SingularMatrix);
}

TEST_CASE("solve_linear keeps the residual below 1e-9 of the rhs") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> gauss;
  for (int trial = 0; trial < 20; ++trial) {
    Mat M(5, 5);
    Mat b(5, 2);
    for (int i = 0; i < 5; ++i) {
      for (int j = 0; j < 5; ++j) M(i, j) = gauss(rng);
      for (int j = 0; j < 2; ++j) b(i, j) = gauss(rng);
    }
    M += 5.0 * Mat::Identity(5, 5);  // keep the sample well conditioned
    Mat x = solve_linear(M, b);
    CHECK((M * x - b).norm() <= 1e-9 * b.norm());
  }
}

TEST_CASE("solve_linear_complex handles a rotation shift") {
  CMat M(2, 2);
  const std::complex<double> j(0.0, 1.0);
  M << 1.0 + j, 0.0, 0.0, 2.0;
  CMat b(2, 1);
  b << 1.0, 1.0;
  CMat x = solve_linear_complex(M, b);
  CHECK(std::abs(x(0, 0) - (0.5 - 0.5 * j)) < 1e-12);
  CHECK(std::abs(x(1, 0) - 0.5) < 1e-12);
}

TEST_CASE("eig_general finds the rotation-matrix pair") {
  Mat M(2, 2);
  M << 0, 1, -1, 0;
  auto eigs = eig_general(M);
  REQUIRE(eigs.size() == 2);
  std::sort(eigs.begin(), eigs.end(),
            [](auto a, auto b) { return a.imag() < b.imag(); });
  CHECK(std::abs(eigs[0] - std::complex<double>(0, -1)) < 1e-9);
  CHECK(std::abs(eigs[1] - std::complex<double>(0, 1)) < 1e-9);
}

TEST_CASE("eig_general reads a diagonal matrix directly") {
  Mat M(2, 2);
  M << 2, 0, 0, -3;
  auto eigs = eig_general(M);
  REQUIRE(eigs.size() == 2);
  std::sort(eigs.begin(), eigs.end(),
            [](auto a, auto b) { return a.real() < b.real(); });
  CHECK(eigs[0].real() == doctest::Approx(-3.0));
  CHECK(eigs[1].real() == doctest::Approx(2.0));
  CHECK(std::abs(eigs[0].imag()) < 1e-12);
}

TEST_CASE("eig_general matches trace and determinant on random 4x4 samples") {
  std::mt19937_64 rng(23);
  std::normal_distribution<double> gauss;
  for (int trial = 0; trial < 10; ++trial) {
    Mat M(4, 4);
    for (int i = 0; i < 16; ++i) M(i / 4, i % 4) = gauss(rng);
    auto eigs = eig_general(M);
    std::complex<double> sum = 0.0, prod = 1.0;
    for (auto lam : eigs) {
      sum += lam;
      prod *= lam;
    }
    CHECK(std::abs(sum.real() - M.trace()) <= 1e-8 * (1.0 + std::abs(M.trace())));
    CHECK(std::abs(sum.imag()) <= 1e-8 * M.norm());
    double det = M.determinant();
    CHECK(std::abs(prod.real() - det) <= 1e-6 * (1.0 + std::abs(det)));
  }
}

TEST_CASE("eig_general refuses matrices above the size cap") {
  Mat M = Mat::Identity(65, 65);
  CHECK_THROWS_AS(eig_general(M), std::invalid_argument);
}

TEST_CASE("eig_symmetric sorts ascending") {
  Mat M(3, 3);
  M << 2, 1, 0, 1, 2, 0, 0, 0, -1;
  Vec lam = eig_symmetric(M);
  REQUIRE(lam.size() == 3);
  CHECK(lam(0) == doctest::Approx(-1.0));
  CHECK(lam(1) == doctest::Approx(1.0));
  CHECK(lam(2) == doctest::Approx(3.0));
}

TEST_CASE("is_pos_def accepts the identity and rejects indefinite input") {
  CHECK(is_pos_def(Mat::Identity(2, 2)));
  Mat M(2, 2);
  M << 1, 0, 0, -1e-3;
  CHECK_FALSE(is_pos_def(M));
  M << 1, 2, 2, 1;  // eigenvalues -1 and 3
  CHECK_FALSE(is_pos_def(M));
}

TEST_CASE("is_pos_def treats semidefinite as not definite") {
  Mat M(2, 2);
  M << 1, 0, 0, 0;
  CHECK_FALSE(is_pos_def(M));
}

TEST_CASE("definiteness predicates reject asymmetric input") {
  Mat M(2, 2);
  M << 1, 5, 0, 1;
  CHECK_THROWS_AS(is_pos_def(M), AsymmetricInput);
  CHECK_THROWS_AS(is_neg_semidef(M), AsymmetricInput);
}

TEST_CASE("is_neg_semidef admits the boundary") {
  CHECK(is_neg_semidef(Mat::Zero(2, 2)));
  Mat M(2, 2);
  M << 0, 0, 0, -2;
  CHECK(is_neg_semidef(M));
  M << 0, 1, 1, 0;  // eigenvalues are +1 and -1
  CHECK_FALSE(is_neg_semidef(M));
}

TEST_CASE("is_pos_def and is_neg_semidef agree through a sign flip") {
  std::mt19937_64 rng(37);
  std::normal_distribution<double> gauss;
  const double eps = 1e-6;
  int definite_seen = 0;
  for (int trial = 0; trial < 40; ++trial) {
    Mat M(3, 3);
    for (int i = 0; i < 9; ++i) M(i / 3, i % 3) = gauss(rng);
    Mat S = 0.5 * (M + M.transpose());
    if (trial % 2 == 0) S += 4.0 * Mat::Identity(3, 3);  // force definite samples
    if (is_pos_def(S, eps)) {
      ++definite_seen;
      CHECK(is_neg_semidef(-S - eps * Mat::Identity(3, 3), eps));
    }
    // A failed shifted semidefiniteness check certifies a negative eigenvalue.
    if (!is_neg_semidef(-S - eps * Mat::Identity(3, 3), eps)) {
      CHECK_FALSE(is_pos_def(S, eps));
    }
  }
  CHECK(definite_seen > 0);
}

}  // TEST_SUITE
