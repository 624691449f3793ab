#include <catch2/catch_amalgamated.hpp>

#include "stella/numkernel.hpp"

using namespace stella;

TEST_CASE("thin_svd identity") {
  SvdResult s = thin_svd(Matrix::Identity(3, 3));
  CHECK((s.u - Matrix::Identity(3, 3)).cwiseAbs().maxCoeff() < 1e-14);
  CHECK((s.v - Matrix::Identity(3, 3)).cwiseAbs().maxCoeff() < 1e-14);
  for (int i = 0; i < 3; ++i) CHECK(s.sigma(i) == Catch::Approx(1.0));
}

TEST_CASE("thin_svd diagonal") {
  Matrix a = Matrix::Zero(2, 2);
  a(0, 0) = 3;
  a(1, 1) = 2;
  SvdResult s = thin_svd(a);
  CHECK(s.sigma(0) == Catch::Approx(3.0));
  CHECK(s.sigma(1) == Catch::Approx(2.0));
}

TEST_CASE("thin_svd reconstruction and invariants on random input") {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    Matrix a = gaussian_matrix(50, 8, seed);
    SvdResult s = thin_svd(a);
    Matrix rec = s.u * s.sigma.asDiagonal() * s.v.transpose();
    CHECK((rec - a).norm() / a.norm() < 1e-10);
    CHECK(orthonormality_error(s.u) < 1e-12);
    CHECK(orthonormality_error(s.v) < 1e-12);
    for (int i = 0; i + 1 < s.sigma.size(); ++i) CHECK(s.sigma(i) >= s.sigma(i + 1));
    CHECK(s.sigma.minCoeff() >= 0);
  }
}

TEST_CASE("thin_svd rejects non-finite input") {
  Matrix a = Matrix::Zero(2, 2);
  a(0, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(thin_svd(a), NumericalError);
}

TEST_CASE("polar_factor fixes orthonormal blocks") {
  Matrix a = Matrix::Zero(4, 2);
  a(0, 0) = 1;
  a(1, 1) = 1;
  CHECK((polar_factor(a) - a).norm() < 1e-14);
}

TEST_CASE("polar_factor of positive diagonal is identity") {
  Matrix a = Matrix::Zero(2, 2);
  a(0, 0) = 2;
  a(1, 1) = 5;
  CHECK((polar_factor(a) - Matrix::Identity(2, 2)).norm() < 1e-14);
}

TEST_CASE("polar_factor orthonormality and symmetry of q^T a") {
  Matrix a = gaussian_matrix(64, 8, 99);
  Matrix q = polar_factor(a);
  CHECK(orthonormality_error(q) < 1e-12);
  Matrix qa = q.transpose() * a;
  CHECK((qa - qa.transpose()).norm() < 1e-10);
  // positive definite
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (qa + qa.transpose()));
  CHECK(es.eigenvalues().minCoeff() > 0);
}

TEST_CASE("polar_factor is the closest orthonormal matrix") {
  // Sampling oracle: no random orthonormal candidate beats the polar factor.
  for (long k : {1L, 2L, 3L}) {
    Matrix a = gaussian_matrix(5, k, 7 + k);
    Matrix q = polar_factor(a);
    const double best = (q - a).norm();
    for (int i = 0; i < 1000; ++i) {
      Matrix cand = random_orthonormal(5, k, 1000 * k + i);
      CHECK((cand - a).norm() > best - 1e-9);
    }
  }
}

TEST_CASE("polar_factor rejects rank deficiency") {
  Matrix a = Matrix::Zero(4, 2);
  a(0, 0) = 1;  // second column zero
  CHECK_THROWS_AS(polar_factor(a), NumericalError);
  CHECK_THROWS_AS(polar_factor(Matrix::Zero(3, 2)), NumericalError);
}

TEST_CASE("polar_factor shape contract") {
  CHECK_THROWS_AS(polar_factor(gaussian_matrix(2, 4, 1)), ContractError);
}

TEST_CASE("batched_polar_factor equals the sequential path") {
  std::vector<Matrix> stack;
  for (int i = 0; i < 17; ++i) stack.push_back(gaussian_matrix(24, 4, 100 + i));
  auto batched = batched_polar_factor(stack);
  REQUIRE(batched.size() == stack.size());
  for (std::size_t i = 0; i < stack.size(); ++i) {
    CHECK((batched[i] - polar_factor(stack[i])).norm() < 1e-12);
  }
}

TEST_CASE("batched_polar_factor trivial batches") {
  Matrix id = Matrix::Identity(4, 2);
  auto out = batched_polar_factor({id, id, id});
  for (const auto& m : out) CHECK((m - id).norm() < 1e-14);

  Matrix a = gaussian_matrix(12, 3, 5);
  auto single = batched_polar_factor({a});
  CHECK((single[0] - polar_factor(a)).norm() == 0.0);

  CHECK(batched_polar_factor({}).empty());
}

TEST_CASE("batched_polar_factor error reporting") {
  CHECK_THROWS_AS(batched_polar_factor({gaussian_matrix(4, 2, 1), gaussian_matrix(5, 2, 2)}),
                  ContractError);
  std::vector<Matrix> stack = {gaussian_matrix(4, 2, 1), Matrix::Zero(4, 2),
                               gaussian_matrix(4, 2, 3)};
  CHECK_THROWS_WITH(batched_polar_factor(stack), Catch::Matchers::ContainsSubstring("element 1"));
}

TEST_CASE("matrix_exp basics") {
  CHECK((matrix_exp(Matrix::Zero(3, 3)) - Matrix::Identity(3, 3)).norm() == 0.0);

  const double theta = M_PI / 2;
  Matrix skew(2, 2);
  skew << 0, -theta, theta, 0;
  Matrix rot = matrix_exp(skew);
  Matrix expected(2, 2);
  expected << 0, -1, 1, 0;
  CHECK((rot - expected).norm() < 1e-14);
}

TEST_CASE("matrix_exp matches truncated Taylor series") {
  Matrix a = gaussian_matrix(6, 6, 42);
  a *= 0.9 / a.norm();
  Matrix series = Matrix::Identity(6, 6);
  Matrix term = Matrix::Identity(6, 6);
  for (int i = 1; i <= 20; ++i) {
    term = (term * a) / static_cast<double>(i);
    series += term;
  }
  CHECK((matrix_exp(a) - series).norm() < 1e-12);
}

TEST_CASE("matrix_exp scaling identity") {
  Matrix a = gaussian_matrix(5, 5, 8);
  Matrix half = matrix_exp(a / 2);
  CHECK((matrix_exp(a) - half * half).norm() < 1e-10 * matrix_exp(a).norm());
}

TEST_CASE("matrix_exp of skew is orthogonal") {
  Matrix g = gaussian_matrix(4, 4, 11);
  Matrix skew = g - g.transpose();
  CHECK(orthonormality_error(matrix_exp(skew)) < 1e-10);
}

TEST_CASE("matrix_exp contracts") {
  CHECK_THROWS_AS(matrix_exp(gaussian_matrix(2, 3, 1)), ContractError);
}

TEST_CASE("thin_qr fixes orthonormal input") {
  Matrix q0 = random_orthonormal(10, 3, 21);
  auto [q, r] = thin_qr(q0);
  CHECK((q - q0).norm() < 1e-12);
  CHECK((r - Matrix::Identity(3, 3)).norm() < 1e-12);
}

TEST_CASE("thin_qr rank-deficient column") {
  Matrix a = Matrix::Zero(2, 2);
  a(0, 0) = 2;
  auto [q, r] = thin_qr(a);
  CHECK(r(0, 0) == Catch::Approx(2.0));
  CHECK(std::abs(r(1, 1)) < 1e-15);
}

TEST_CASE("thin_qr reconstruction, orthonormality, sign convention") {
  for (std::uint64_t seed : {4u, 5u, 6u}) {
    Matrix a = gaussian_matrix(40, 8, seed);
    auto [q, r] = thin_qr(a);
    CHECK((q * r - a).norm() < 1e-12 * a.norm());
    CHECK(orthonormality_error(q) < 1e-12);
    for (int j = 0; j < 8; ++j) CHECK(r(j, j) >= 0);
    for (int i = 1; i < 8; ++i)
      for (int j = 0; j < i; ++j) CHECK(r(i, j) == 0.0);
  }
}

TEST_CASE("random_orthonormal contract and determinism") {
  Matrix one = random_orthonormal(1, 1, 3);
  CHECK(std::abs(std::abs(one(0, 0)) - 1.0) < 1e-15);

  CHECK((random_orthonormal(12, 4, 77) - random_orthonormal(12, 4, 77)).norm() == 0.0);
  CHECK((random_orthonormal(12, 4, 77) - random_orthonormal(12, 4, 78)).norm() > 1e-3);

  CHECK(orthonormality_error(random_orthonormal(128, 16, 9)) < 1e-12);

  CHECK_THROWS_AS(random_orthonormal(3, 5, 0), ContractError);
}
