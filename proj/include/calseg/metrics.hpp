#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "calseg/tensor.hpp"

namespace calseg {

// Per-image foreground probability map with its binary ground truth.
struct PredictionMap {
    Tensor fg_prob;  // [H,W] in [0,1]
    Tensor truth;    // [H,W] in {0,1}
};

struct ConfusionCounts {
    std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
};

// Predict foreground iff fg_prob >= threshold.
ConfusionCounts confusion(const PredictionMap& map, double threshold);

// Overlap metrics from counts. Zero-denominator convention: 1.0 when the
// complementary error count is also zero, else 0.0.
double dice(const ConfusionCounts& c);
double jaccard(const ConfusionCounts& c);
double recall(const ConfusionCounts& c);
double precision(const ConfusionCounts& c);

// Mean negative log-likelihood; probabilities clipped to [1e-7, 1-1e-7].
double nll(const PredictionMap& map);

// (1/C)(1/N) sum over both channels of squared error, C = 2.
double brier(const PredictionMap& map);

// Uniform bin counts of fg_prob over [0,1]; final bin closed on the right.
std::vector<std::size_t> softmax_histogram(const PredictionMap& map, std::size_t bins);

struct Interval {
    double lo = 0.0, hi = 0.0;
};

// Percentile bootstrap CI of the mean; seeded, >= 2 values required.
Interval bootstrap_ci(const std::vector<double>& values, double level = 0.95,
                      std::size_t resamples = 10000, std::uint64_t seed = 0x5EED);

struct RankSumResult {
    double statistic = 0.0;  // rank sum of xs, midranks for ties
    double p_value = 1.0;    // two-sided; exact when |xs|+|ys| <= 12
};

RankSumResult wilcoxon_rank_sum(const std::vector<double>& xs, const std::vector<double>& ys);

// Per-image metric values for one evaluated condition.
struct MetricsReport {
    std::string dataset;
    std::string loss;
    double gamma = 0.0;
    std::vector<double> nll, brier, dice, jaccard, recall, precision;
};

struct BootstrapConfig {
    double level = 0.95;
    std::size_t resamples = 10000;
    std::uint64_t seed = 0x5EED;
};

// CSV row: dataset,loss,gamma,<six metric means>,<six lo,hi pairs>, values
// printed with 6 significant digits.
std::string metrics_csv_header();
std::string metrics_csv_row(const MetricsReport& r, const BootstrapConfig& bs);

double mean_of(const std::vector<double>& v);

// 6-significant-digit number formatting shared by every CSV writer.
std::string format_number(double v);

}  // namespace calseg
