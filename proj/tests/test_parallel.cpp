#include "rsstab/parallel.hpp"

#include <gtest/gtest.h>

#include <atomic>
#include <numeric>
#include <stdexcept>

using namespace rsstab;

TEST(ParallelFor, VisitsEveryIndexOnce) {
    std::vector<std::atomic<int>> hits(1000);
    parallel_for(hits.size(), 4, [&](std::size_t i) { hits[i]++; });
    for (auto& h : hits) EXPECT_EQ(h.load(), 1);
}

TEST(ParallelFor, RethrowsWorkerException) {
    EXPECT_THROW(parallel_for(100, 3,
                              [](std::size_t i) {
                                  if (i == 57) throw std::runtime_error("boom");
                              }),
                 std::runtime_error);
}

TEST(PairwiseSum, MatchesCompensatedSum) {
    std::vector<double> v(10007);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = 1.0 / static_cast<double>(i + 1);
    long double ref = 0;
    for (double x : v) ref += x;
    EXPECT_NEAR(pairwise_sum(v), static_cast<double>(ref), 1e-13);
    EXPECT_EQ(pairwise_sum(std::span<const double>()), 0.0);
}

TEST(EstimateMean, KnownValues) {
    const std::vector<double> v{1, 2, 3, 4};
    const auto m = estimate_mean(v);
    EXPECT_DOUBLE_EQ(m.mean, 2.5);
    EXPECT_DOUBLE_EQ(m.variance, 5.0 / 3.0);
    EXPECT_DOUBLE_EQ(m.std_error, std::sqrt(5.0 / 12.0));
    EXPECT_EQ(m.n, 4u);
}

TEST(ParallelFor, ResultIndependentOfThreadCount) {
    std::vector<double> a(5000), b(5000);
    auto fill = [](std::vector<double>& out) {
        return [&out](std::size_t i) { out[i] = std::sin(static_cast<double>(i)); };
    };
    parallel_for(a.size(), 1, fill(a));
    parallel_for(b.size(), 7, fill(b));
    EXPECT_EQ(pairwise_sum(a), pairwise_sum(b));
}
