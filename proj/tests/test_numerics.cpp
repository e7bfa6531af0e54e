#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "cantibec/numerics.hpp"
#include "cantibec/parallel.hpp"

using namespace cantibec;

TEST(Numerics, BisectFindsRoot) {
    const double r = numerics::bisect([](double x) { return x * x - 2.0; }, 0.0, 2.0, 1e-14);
    EXPECT_NEAR(r, std::sqrt(2.0), 1e-13);
}

TEST(Numerics, BisectRejectsMissingSignChange) {
    EXPECT_THROW(numerics::bisect([](double x) { return x * x + 1.0; }, -1.0, 1.0, 1e-12), PhysicsError);
}

TEST(Numerics, GoldenSectionMinimum) {
    const auto m = numerics::golden_section([](double x) { return (x - 0.3) * (x - 0.3) + 1.0; }, -2.0, 2.0, 1e-10,
                                            1.0);
    EXPECT_NEAR(m.x, 0.3, 1e-7);
    EXPECT_NEAR(m.value, 1.0, 1e-12);
}

TEST(Numerics, LinearRegressionExactLine) {
    const std::vector<double> x = {0, 1, 2, 3, 4};
    std::vector<double> y;
    for (double v : x) y.push_back(2.5 * v - 1.0);
    const auto f = numerics::linear_regression(x, y);
    EXPECT_NEAR(f.slope, 2.5, 1e-12);
    EXPECT_NEAR(f.intercept, -1.0, 1e-12);
    EXPECT_NEAR(f.r_squared, 1.0, 1e-12);
    EXPECT_EQ(f.points, 5u);
}

TEST(Numerics, IsotonicPoolsViolators) {
    const std::vector<double> y = {0.0, 0.3, 0.1, 0.5, 0.4, 0.9};
    const auto f = numerics::isotonic_increasing(y);
    ASSERT_EQ(f.size(), y.size());
    for (std::size_t i = 1; i < f.size(); ++i) EXPECT_GE(f[i], f[i - 1]);
    EXPECT_NEAR(f[1], 0.2, 1e-12);
    EXPECT_NEAR(f[2], 0.2, 1e-12);
    EXPECT_NEAR(f[3], 0.45, 1e-12);
}

TEST(Numerics, LorentzianFitRecoversParameters) {
    numerics::LorentzianFit truth;
    truth.center = 10000.3;
    truth.fwhm = 6.0;
    truth.depth = 400.0;
    truth.baseline = 1500.0;
    std::vector<double> x, y;
    std::mt19937_64 rng(7);
    std::normal_distribution<double> noise(0.0, 2.0);
    for (double f = 9980.0; f <= 10020.0; f += 1.0) {
        x.push_back(f);
        y.push_back(numerics::lorentzian_dip(f, truth) + noise(rng));
    }
    const auto fit = numerics::fit_lorentzian_dip(x, y);
    ASSERT_TRUE(fit.converged);
    EXPECT_NEAR(fit.center, truth.center, 0.1);
    EXPECT_NEAR(fit.fwhm, truth.fwhm, 0.3);
    EXPECT_NEAR(fit.depth, truth.depth, 10.0);
}

TEST(Numerics, StreamSeedsDiffer) {
    EXPECT_NE(numerics::stream_seed(1, 0), numerics::stream_seed(1, 1));
    EXPECT_NE(numerics::stream_seed(1, 0), numerics::stream_seed(2, 0));
    EXPECT_EQ(numerics::stream_seed(5, 9), numerics::stream_seed(5, 9));
}

TEST(Numerics, LinearInterpolateClampsAndInterpolates) {
    const std::vector<double> xs = {0, 1, 3}, ys = {0, 10, 30};
    EXPECT_DOUBLE_EQ(numerics::linear_interpolate(xs, ys, -1), 0.0);
    EXPECT_DOUBLE_EQ(numerics::linear_interpolate(xs, ys, 2), 20.0);
    EXPECT_DOUBLE_EQ(numerics::linear_interpolate(xs, ys, 5), 30.0);
}

TEST(Parallel, EveryIndexOnceAnyWorkerCount) {
    for (unsigned workers : {1u, 2u, 3u, 8u}) {
        std::vector<int> hits(1000, 0);
        parallel_for(hits.size(), [&](std::size_t i) { hits[i] += 1; }, workers);
        for (int h : hits) EXPECT_EQ(h, 1);
    }
}

TEST(Parallel, RethrowsBodyException) {
    EXPECT_THROW(parallel_for(100, [](std::size_t i) { if (i == 37) throw DomainError("x"); }, 4), DomainError);
}

TEST(Parallel, ScopedWorkersOverrides) {
    {
        ScopedWorkers guard(5);
        EXPECT_EQ(worker_count(), 5u);
    }
    EXPECT_EQ(forced_workers().load(), 0u);
}
