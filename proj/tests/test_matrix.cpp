#include <gtest/gtest.h>

#include <cmath>

#include "denoise_ad/gradient_check.hpp"
#include "denoise_ad/matrix.hpp"
#include "denoise_ad/random.hpp"

using namespace denoise_ad;

TEST(Matmul, IdentityPassesThrough) {
    const Matrix eye = Matrix::from_rows({{1, 0}, {0, 1}});
    const Matrix v = Matrix::from_rows({{3}, {4}});
    const Matrix out = matmul(eye, v);
    EXPECT_EQ(out, v);
}

TEST(Matmul, HandComputedProduct) {
    const Matrix a = Matrix::from_rows({{1, 2}, {3, 4}});
    const Matrix b = Matrix::from_rows({{5}, {6}});
    const Matrix out = matmul(a, b);
    ASSERT_EQ(out.rows(), 2u);
    ASSERT_EQ(out.cols(), 1u);
    EXPECT_DOUBLE_EQ(out[0], 17.0);
    EXPECT_DOUBLE_EQ(out[1], 39.0);
}

TEST(Matmul, ShapeErrorNamesBothShapes) {
    const Matrix a(2, 3);
    const Matrix b(4, 1);
    try {
        matmul(a, b);
        FAIL() << "expected ShapeError";
    } catch (const ShapeError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("2x3"), std::string::npos) << msg;
        EXPECT_NE(msg.find("4x1"), std::string::npos) << msg;
    }
}

TEST(Matmul, AssociativityOnRandomTriples) {
    Rng rng(101);
    for (int trial = 0; trial < 20; ++trial) {
        const Matrix a = rng.uniform_matrix(3, 4, -1.0, 1.0);
        const Matrix b = rng.uniform_matrix(4, 5, -1.0, 1.0);
        const Matrix c = rng.uniform_matrix(5, 2, -1.0, 1.0);
        const Matrix left = matmul(matmul(a, b), c);
        const Matrix right = matmul(a, matmul(b, c));
        EXPECT_LE(max_relative_error(left, right, 1.0), 1e-9);
    }
}

TEST(TransposedMatmul, MatchesExplicitTranspose) {
    Rng rng(7);
    const Matrix a = rng.uniform_matrix(4, 3, -1.0, 1.0);
    const Matrix b = rng.uniform_matrix(4, 2, -1.0, 1.0);
    EXPECT_EQ(transposed_matmul(a, b), matmul(transpose(a), b));
}

TEST(Activations, SymmetryPoints) {
    const Matrix zero(1, 1, 0.0);
    EXPECT_DOUBLE_EQ(apply_activation(zero, Activation::Sigmoid)[0], 0.5);
    EXPECT_DOUBLE_EQ(apply_activation(zero, Activation::Tanh)[0], 0.0);
}

TEST(Activations, StableAtLargeInputs) {
    const Matrix big(1, 1, 1000.0);
    const double s = apply_activation(big, Activation::Sigmoid)[0];
    EXPECT_TRUE(std::isfinite(s));
    EXPECT_GT(s, 0.0);
    EXPECT_LE(s, 1.0);

    const Matrix neg(1, 1, -1000.0);
    const double sn = apply_activation(neg, Activation::Sigmoid)[0];
    EXPECT_TRUE(std::isfinite(sn));
    EXPECT_GE(sn, 0.0);
    EXPECT_LT(sn, 1.0);
}

TEST(Activations, CodomainBoundsAtExtremes) {
    const Matrix probe = Matrix::from_rows({{-1e6, -3.5, 0.0, 3.5, 1e6}});
    const Matrix sig = apply_activation(probe, Activation::Sigmoid);
    const Matrix th = apply_activation(probe, Activation::Tanh);
    for (std::size_t i = 0; i < probe.size(); ++i) {
        EXPECT_TRUE(std::isfinite(sig[i]));
        EXPECT_GE(sig[i], 0.0);
        EXPECT_LE(sig[i], 1.0);
        EXPECT_TRUE(std::isfinite(th[i]));
        EXPECT_GE(th[i], -1.0);
        EXPECT_LE(th[i], 1.0);
    }
}

TEST(Rng, SameSeedSameStream) {
    Rng a(42), b(42);
    const Matrix ma = a.uniform_matrix(8, 8);
    const Matrix mb = b.uniform_matrix(8, 8);
    EXPECT_EQ(ma, mb);
}

TEST(Rng, KnownStreamIsStable) {
    // frozen draws for seed 42; guards cross-platform reproducibility
    Rng rng(42);
    EXPECT_EQ(rng.next_u64(), 15021278609987233951ULL);
    EXPECT_EQ(rng.next_u64(), 5881210131331364753ULL);
    EXPECT_EQ(rng.next_u64(), 18149643915985481100ULL);
    Rng fresh(42);
    EXPECT_DOUBLE_EQ(fresh.uniform(), 0.81430514512290986);
}

TEST(Rng, UniformRangeAndMean) {
    Rng rng(1234);
    const std::size_t n = 100000;
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double u = rng.uniform();
        ASSERT_GE(u, 0.0);
        ASSERT_LT(u, 1.0);
        sum += u;
    }
    EXPECT_NEAR(sum / static_cast<double>(n), 0.5, 0.01);
}

TEST(Rng, BoundedCoversRange) {
    Rng rng(5);
    std::vector<int> seen(7, 0);
    for (int i = 0; i < 2000; ++i) seen[rng.bounded(7)] += 1;
    for (int count : seen) EXPECT_GT(count, 0);
}

TEST(NumericGradient, LinearFunctionGivesOnes) {
    Rng rng(3);
    const Matrix x = rng.uniform_matrix(2, 3, -2.0, 2.0);
    const Matrix g = numeric_gradient([](const Matrix& m) { return sum(m); }, x, 1e-5);
    for (std::size_t i = 0; i < g.size(); ++i) EXPECT_NEAR(g[i], 1.0, 1e-9);
}

TEST(NumericGradient, SquareAtThree) {
    const Matrix x(1, 1, 3.0);
    const Matrix g =
        numeric_gradient([](const Matrix& m) { return squared_norm(m); }, x, 1e-5);
    EXPECT_NEAR(g[0], 6.0, 1e-6);
}

TEST(NumericGradient, SquaredNormMatchesAnalytic) {
    Rng rng(9);
    const Matrix x = rng.uniform_matrix(2, 2, -1.0, 1.0);
    const Matrix g =
        numeric_gradient([](const Matrix& m) { return squared_norm(m); }, x, 1e-5);
    for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(g[i], 2.0 * x[i], 1e-6);
}

TEST(NumericGradient, NonFiniteEvaluationIsAnOracleError) {
    const Matrix x(1, 1, 0.0);
    EXPECT_THROW(
        numeric_gradient([](const Matrix& m) { return std::log(m[0] - 1.0); }, x, 1e-5),
        OracleError);
}

TEST(NumericGradient, RejectsNonPositiveEps) {
    const Matrix x(1, 1, 0.0);
    EXPECT_THROW(numeric_gradient([](const Matrix& m) { return sum(m); }, x, 0.0),
                 ConfigError);
}
