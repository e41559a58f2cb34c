#include <gtest/gtest.h>

#include "podocp/affine.hpp"

using namespace podocp;

namespace {

SparseOperator random_sparse(int n, double density, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<Eigen::Triplet<double>> t;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (std::abs(u(rng)) < density) t.emplace_back(i, j, u(rng));
  SparseOperator s(n, n);
  s.setFromTriplets(t.begin(), t.end());
  return s;
}

}  // namespace

TEST(Theta, EvaluateProductAndDescriptor) {
  const Theta t = Theta::monomial(3, {{0, 1}, {2, -1}}, 2.0);
  const Parameter mu{{0.5, 7.0, 4.0}};
  EXPECT_DOUBLE_EQ(t(mu), 2.0 * 0.5 / 4.0);
  const Theta sq = t * t;
  EXPECT_DOUBLE_EQ(sq(mu), t(mu) * t(mu));
  EXPECT_EQ(t.descriptor(), "2|1 0 -1");
  EXPECT_EQ(Theta::parse(t.descriptor()), t);
  const Theta odd{0.1, {0, 3}};
  EXPECT_EQ(Theta::parse(odd.descriptor()), odd);
  EXPECT_THROW(Theta::parse("1.0 2 3"), ArtifactError);
  EXPECT_THROW(Theta::parse("x|1"), ArtifactError);
  EXPECT_THROW(t(Parameter{{1.0}}), ConfigError);
}

TEST(AffineFamily, SingleTermReturnsOperator) {
  const SparseOperator a = random_sparse(8, 0.3, 1);
  AffineOperator fam;
  fam.add(Theta::constant(2), a);
  fam.finalize();
  EXPECT_EQ(max_abs(fam.evaluate(Parameter{{0.3, 0.4}}) - a), 0.0);
}

TEST(AffineFamily, PartitionOfUnity) {
  const SparseOperator a = random_sparse(8, 0.3, 2);
  AffineOperator fam;
  fam.add(Theta::monomial(1, {{0, 1}}), a);  // mu
  fam.add(Theta::constant(1), a);
  fam.add(Theta::monomial(1, {{0, 1}}, -1.0), SparseOperator(a));  // merged into the first term
  EXPECT_EQ(fam.size(), 2u);
  // mu a - mu a + a = a for any mu
  fam.finalize();
  EXPECT_LT(max_abs(fam.evaluate(Parameter{{0.37}}) - a), 1e-15);
}

TEST(AffineFamily, UnifiedPatternMatchesNaiveSum) {
  AffineOperator fam;
  std::vector<SparseOperator> ops;
  std::vector<Theta> thetas = {Theta::constant(2), Theta::monomial(2, {{0, 1}}),
                               Theta::monomial(2, {{0, 1}, {1, -1}}), Theta::monomial(2, {{1, 2}}, 0.5)};
  for (unsigned q = 0; q < thetas.size(); ++q) {
    ops.push_back(random_sparse(20, 0.15, 10 + q));
    fam.add(thetas[q], ops.back());
  }
  fam.finalize();
  for (const auto& t : fam.terms()) EXPECT_EQ(t.value.nonZeros(), fam.terms().front().value.nonZeros());
  const Parameter mu{{0.7, 1.9}};
  SparseOperator naive(20, 20);
  for (std::size_t q = 0; q < ops.size(); ++q) naive += thetas[q](mu) * ops[q];
  EXPECT_LT(max_abs(fam.evaluate(mu) - naive), 1e-14);
}

TEST(AffineFamily, DenseAndScalarFamilies) {
  AffineScalar c;
  c.add(Theta::monomial(2, {{0, 1}}), 3.0);
  c.add(Theta::monomial(2, {{0, 2}}), -1.0);
  EXPECT_DOUBLE_EQ(c.evaluate(Parameter{{2.0, 5.0}}), 6.0 - 4.0);

  AffineMatrix m;
  m.add(Theta::constant(1), Matrix::Identity(3, 3));
  EXPECT_THROW(m.add(Theta::constant(1), Matrix::Identity(2, 2)), ConfigError);
  EXPECT_THROW(AffineVector().evaluate(Parameter{{1.0}}), ConfigError);

  auto doubled = m.map<Matrix>([](const Matrix& x) { return Matrix(2.0 * x); });
  EXPECT_DOUBLE_EQ(doubled.evaluate(Parameter{{9.0}})(1, 1), 2.0);
}
