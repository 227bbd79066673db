#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "calseg/metrics.hpp"
#include "calseg/rng.hpp"
#include "doctest.h"

using namespace calseg;

namespace {

PredictionMap make_map(std::vector<double> probs, std::vector<double> truth) {
    const std::size_t n = probs.size();
    PredictionMap m;
    m.fg_prob = Tensor({1, n}, std::move(probs));
    m.truth = Tensor({1, n}, std::move(truth));
    return m;
}

std::size_t comma_count(const std::string& s) {
    return static_cast<std::size_t>(std::count(s.begin(), s.end(), ','));
}

}  // namespace

TEST_CASE("confusion counts with threshold-inclusive foreground") {
    const auto m = make_map({0.9, 0.5, 0.4, 0.1}, {1, 0, 1, 0});
    const ConfusionCounts c = confusion(m, 0.5);
    // 0.9 -> fg (TP), 0.5 -> fg on the boundary (FP), 0.4 -> bg (FN), 0.1 -> bg (TN)
    CHECK(c.tp == 1);
    CHECK(c.fp == 1);
    CHECK(c.fn == 1);
    CHECK(c.tn == 1);
}

TEST_CASE("overlap metrics on a known confusion") {
    const ConfusionCounts c{3, 1, 10, 2};  // tp fp tn fn
    CHECK(dice(c) == doctest::Approx(6.0 / 9.0).epsilon(1e-15));
    CHECK(jaccard(c) == doctest::Approx(3.0 / 6.0).epsilon(1e-15));
    CHECK(recall(c) == doctest::Approx(3.0 / 5.0).epsilon(1e-15));
    CHECK(precision(c) == doctest::Approx(3.0 / 4.0).epsilon(1e-15));
}

TEST_CASE("zero-denominator conventions") {
    // nothing true, nothing predicted: perfect scores
    const ConfusionCounts empty{0, 0, 4, 0};
    CHECK(dice(empty) == 1.0);
    CHECK(jaccard(empty) == 1.0);
    CHECK(recall(empty) == 1.0);
    CHECK(precision(empty) == 1.0);

    // nothing true but false positives exist: recall undefined -> 0
    const ConfusionCounts fp_only{0, 2, 2, 0};
    CHECK(recall(fp_only) == 0.0);
    CHECK(dice(fp_only) == 0.0);

    // something true but nothing predicted: precision undefined -> 0
    const ConfusionCounts fn_only{0, 0, 2, 2};
    CHECK(precision(fn_only) == 0.0);
    CHECK(recall(fn_only) == 0.0);
}

TEST_CASE("dice and jaccard satisfy d = 2j/(1+j)") {
    Rng rng(5);
    for (int i = 0; i < 50; ++i) {
        ConfusionCounts c;
        c.tp = static_cast<std::size_t>(rng.below(20)) + 1;
        c.fp = static_cast<std::size_t>(rng.below(20));
        c.fn = static_cast<std::size_t>(rng.below(20));
        c.tn = static_cast<std::size_t>(rng.below(20));
        const double j = jaccard(c);
        CHECK(dice(c) == doctest::Approx(2.0 * j / (1.0 + j)).epsilon(1e-12));
    }
}

TEST_CASE("nll averages clipped per-pixel likelihoods") {
    const auto m = make_map({0.8, 0.3}, {1, 0});
    const double expected = -(std::log(0.8) + std::log(0.7)) / 2.0;
    CHECK(nll(m) == doctest::Approx(expected).epsilon(1e-12));

    // p_true = 0 clips at 1e-7 instead of diverging
    const auto worst = make_map({0.0, 1.0}, {1, 0});
    CHECK(nll(worst) == doctest::Approx(-std::log(1e-7)).epsilon(1e-9));
    CHECK(std::isfinite(nll(worst)));
}

TEST_CASE("brier score on the reference two-pixel map") {
    const auto m = make_map({0.8, 0.3}, {1, 0});
    CHECK(brier(m) == doctest::Approx(0.065).epsilon(1e-12));
    const auto perfect = make_map({1.0, 0.0}, {1, 0});
    CHECK(brier(perfect) == 0.0);
}

TEST_CASE("softmax histogram uses uniform bins with a closed last bin") {
    const auto m = make_map({0.0, 0.05, 0.5, 0.95, 1.0, 0.999}, {0, 0, 1, 1, 1, 1});
    const auto h = softmax_histogram(m, 20);
    REQUIRE(h.size() == 20);
    CHECK(h[0] == 1);   // 0.0
    CHECK(h[1] == 1);   // 0.05 sits exactly on an edge -> lower-inclusive upper bin
    CHECK(h[10] == 1);  // 0.5
    CHECK(h[19] == 3);  // 0.95, 0.999, and 1.0 (last bin closed above)
    CHECK(std::accumulate(h.begin(), h.end(), std::size_t{0}) == 6);
    CHECK_THROWS_AS((void)softmax_histogram(m, 0), std::invalid_argument);
}

TEST_CASE("bootstrap interval of a constant sequence collapses to a point") {
    const std::vector<double> v(10, 3.25);
    const Interval ci = bootstrap_ci(v, 0.95, 500, 7);
    CHECK(ci.lo == 3.25);
    CHECK(ci.hi == 3.25);
}

TEST_CASE("bootstrap interval brackets the mean and is deterministic") {
    Rng rng(8);
    std::vector<double> v;
    for (int i = 0; i < 30; ++i) v.push_back(rng.uniform(0.0, 1.0));
    const double m = mean_of(v);
    const Interval a = bootstrap_ci(v, 0.95, 2000, 123);
    const Interval b = bootstrap_ci(v, 0.95, 2000, 123);
    CHECK(a.lo == b.lo);
    CHECK(a.hi == b.hi);
    CHECK(a.lo <= m);
    CHECK(a.hi >= m);
    // wider level -> wider or equal interval
    const Interval tight = bootstrap_ci(v, 0.5, 2000, 123);
    CHECK(tight.hi - tight.lo <= a.hi - a.lo);
}

TEST_CASE("bootstrap on two values only produces attainable resample means") {
    const Interval ci = bootstrap_ci({0.0, 1.0}, 0.95, 1000, 9);
    // resampled means can only be 0, 0.5, or 1
    const auto attainable = [](double x) { return x == 0.0 || x == 0.5 || x == 1.0; };
    CHECK(attainable(ci.lo));
    CHECK(attainable(ci.hi));
    CHECK(ci.lo <= ci.hi);
    CHECK_THROWS_AS((void)bootstrap_ci({1.0}, 0.95, 100, 1), std::invalid_argument);
}

TEST_CASE("rank-sum test: exact two-sided p on disjoint samples") {
    const RankSumResult r = wilcoxon_rank_sum({1, 2, 3}, {4, 5, 6});
    CHECK(r.statistic == 6.0);
    CHECK(r.p_value == doctest::Approx(0.1).epsilon(1e-12));
    // swapping the samples flips the statistic but not the p-value
    const RankSumResult s = wilcoxon_rank_sum({4, 5, 6}, {1, 2, 3});
    CHECK(s.statistic == 15.0);
    CHECK(s.p_value == doctest::Approx(0.1).epsilon(1e-12));
}

TEST_CASE("rank-sum test uses midranks for ties") {
    // sorted: 1,1,1,2,2,3 -> midranks 2,2,2,4.5,4.5,6
    const RankSumResult r = wilcoxon_rank_sum({1, 1, 2}, {1, 2, 3});
    CHECK(r.statistic == doctest::Approx(8.5).epsilon(1e-15));
    CHECK(r.p_value > 0.0);
    CHECK(r.p_value <= 1.0);
}

TEST_CASE("rank-sum test on identical samples is insignificant") {
    const RankSumResult r = wilcoxon_rank_sum({1, 2, 3}, {1, 2, 3});
    CHECK(r.p_value == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("rank-sum test large-sample path") {
    std::vector<double> xs, ys;
    for (int i = 0; i < 13; ++i) {
        xs.push_back(i);
        ys.push_back(i + 13);
    }
    const RankSumResult r = wilcoxon_rank_sum(xs, ys);  // N = 26 -> normal approximation
    CHECK(r.p_value < 0.001);
    CHECK(r.p_value > 0.0);

    std::vector<double> same_a, same_b;
    Rng rng(10);
    for (int i = 0; i < 15; ++i) {
        same_a.push_back(rng.uniform(0.0, 1.0));
        same_b.push_back(rng.uniform(0.0, 1.0));
    }
    const RankSumResult u = wilcoxon_rank_sum(same_a, same_b);
    CHECK(u.p_value > 0.05);  // same distribution, should not look significant
    CHECK(u.p_value <= 1.0);
}

TEST_CASE("rank-sum rejects empty samples") {
    CHECK_THROWS_AS((void)wilcoxon_rank_sum({}, {1.0}), std::invalid_argument);
    CHECK_THROWS_AS((void)wilcoxon_rank_sum({1.0}, {}), std::invalid_argument);
}

TEST_CASE("number formatting uses six significant digits") {
    CHECK(format_number(0.123456789) == "0.123457");
    CHECK(format_number(2.0) == "2");
    CHECK(format_number(1e-7) == "1e-07");
    CHECK(format_number(-0.5) == "-0.5");
    CHECK(format_number(123456.7) == "123457");
}

TEST_CASE("mean_of") {
    CHECK(mean_of({1.0, 2.0, 3.0}) == doctest::Approx(2.0).epsilon(1e-15));
    CHECK_THROWS_AS((void)mean_of({}), std::invalid_argument);
}

TEST_CASE("metrics CSV header and row have matching column counts") {
    MetricsReport r;
    r.dataset = "vessels";
    r.loss = "dsc";
    r.gamma = 1.0;
    r.nll = {0.5, 0.6};
    r.brier = {0.1, 0.2};
    r.dice = {0.8, 0.9};
    r.jaccard = {0.7, 0.8};
    r.recall = {0.9, 1.0};
    r.precision = {0.8, 0.85};
    BootstrapConfig bs;
    bs.resamples = 200;
    const std::string header = metrics_csv_header();
    const std::string row = metrics_csv_row(r, bs);
    CHECK(comma_count(header) == comma_count(row));
    CHECK(comma_count(header) == 20);  // 21 columns
    CHECK(header.substr(0, 8) == "dataset,");
    CHECK(row.substr(0, 8) == "vessels,");
}
