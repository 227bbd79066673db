#include "calseg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <stdexcept>

#include "calseg/rng.hpp"

namespace calseg {

namespace {

void check_map(const PredictionMap& map) {
    if (map.fg_prob.rank() != 2 || map.truth.shape != map.fg_prob.shape)
        throw std::invalid_argument("prediction map: fg_prob and truth must be equal [H,W]");
    for (double v : map.truth.data)
        if (v != 0.0 && v != 1.0)
            throw std::invalid_argument("prediction map: truth must be binary");
}

double safe_ratio(std::size_t num, std::size_t den, std::size_t complementary_errors) {
    if (den == 0) return complementary_errors == 0 ? 1.0 : 0.0;
    return static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

ConfusionCounts confusion(const PredictionMap& map, double threshold) {
    check_map(map);
    ConfusionCounts c;
    for (std::size_t i = 0; i < map.fg_prob.size(); ++i) {
        const bool pred = map.fg_prob[i] >= threshold;
        const bool truth = map.truth[i] == 1.0;
        if (pred && truth) ++c.tp;
        else if (pred && !truth) ++c.fp;
        else if (!pred && truth) ++c.fn;
        else ++c.tn;
    }
    return c;
}

double dice(const ConfusionCounts& c) {
    return safe_ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn, 0);
}

double jaccard(const ConfusionCounts& c) {
    return safe_ratio(c.tp, c.tp + c.fp + c.fn, 0);
}

double recall(const ConfusionCounts& c) {
    return safe_ratio(c.tp, c.tp + c.fn, c.fp);
}

double precision(const ConfusionCounts& c) {
    return safe_ratio(c.tp, c.tp + c.fp, c.fn);
}

double nll(const PredictionMap& map) {
    check_map(map);
    // clipping is required: converged Dice-loss models emit exact 0/1
    constexpr double lo = 1e-7, hi = 1.0 - 1e-7;
    double acc = 0.0;
    for (std::size_t i = 0; i < map.fg_prob.size(); ++i) {
        const double p = std::clamp(map.fg_prob[i], lo, hi);
        acc -= map.truth[i] == 1.0 ? std::log(p) : std::log(1.0 - p);
    }
    return acc / static_cast<double>(map.fg_prob.size());
}

double brier(const PredictionMap& map) {
    check_map(map);
    double acc = 0.0;
    for (std::size_t i = 0; i < map.fg_prob.size(); ++i) {
        const double p0 = map.fg_prob[i], y0 = map.truth[i];
        const double p1 = 1.0 - p0, y1 = 1.0 - y0;
        acc += (y0 - p0) * (y0 - p0) + (y1 - p1) * (y1 - p1);
    }
    return acc / (2.0 * static_cast<double>(map.fg_prob.size()));
}

std::vector<std::size_t> softmax_histogram(const PredictionMap& map, std::size_t bins) {
    check_map(map);
    if (bins == 0) throw std::invalid_argument("softmax_histogram: bins must be >= 1");
    std::vector<std::size_t> counts(bins, 0);
    for (double p : map.fg_prob.data) {
        if (p < 0.0 || p > 1.0)
            throw std::invalid_argument("softmax_histogram: probabilities must lie in [0,1]");
        std::size_t b = static_cast<std::size_t>(p * static_cast<double>(bins));
        if (b >= bins) b = bins - 1;  // p == 1 falls into the final closed bin
        ++counts[b];
    }
    return counts;
}

Interval bootstrap_ci(const std::vector<double>& values, double level,
                      std::size_t resamples, std::uint64_t seed) {
    if (values.size() < 2)
        throw std::invalid_argument("bootstrap_ci: need at least 2 values");
    if (!(level > 0.0 && level < 1.0))
        throw std::invalid_argument("bootstrap_ci: level must be in (0,1)");
    if (resamples == 0)
        throw std::invalid_argument("bootstrap_ci: need at least 1 resample");
    const std::size_t n = values.size();
    Rng rng(seed);
    std::vector<double> means(resamples);
    for (std::size_t r = 0; r < resamples; ++r) {
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) acc += values[rng.below(n)];
        means[r] = acc / static_cast<double>(n);
    }
    std::sort(means.begin(), means.end());
    // nearest-rank percentiles keep endpoints inside the resample support
    auto pick = [&](double q) {
        const double pos = q * static_cast<double>(resamples - 1);
        return means[static_cast<std::size_t>(std::llround(pos))];
    };
    const double a = (1.0 - level) / 2.0;
    return Interval{pick(a), pick(1.0 - a)};
}

namespace {

// midranks of the pooled sample; also returns tie-group sizes
std::vector<double> midranks(const std::vector<double>& pooled, std::vector<std::size_t>& ties) {
    const std::size_t n = pooled.size();
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(),
              [&](std::size_t a, std::size_t b) { return pooled[a] < pooled[b]; });
    std::vector<double> ranks(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && pooled[idx[j + 1]] == pooled[idx[i]]) ++j;
        const double r = 0.5 * static_cast<double>(i + j) + 1.0;  // average rank, 1-based
        for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = r;
        ties.push_back(j - i + 1);
        i = j + 1;
    }
    return ranks;
}

double normal_sf_two_sided(double z) {
    return std::erfc(std::abs(z) / std::sqrt(2.0));
}

}  // namespace

RankSumResult wilcoxon_rank_sum(const std::vector<double>& xs, const std::vector<double>& ys) {
    if (xs.empty() || ys.empty())
        throw std::invalid_argument("wilcoxon_rank_sum: both samples must be non-empty");
    const std::size_t m = xs.size(), nPool = xs.size() + ys.size();
    std::vector<double> pooled = xs;
    pooled.insert(pooled.end(), ys.begin(), ys.end());
    std::vector<std::size_t> ties;
    const std::vector<double> ranks = midranks(pooled, ties);

    double w = 0.0;
    for (std::size_t i = 0; i < m; ++i) w += ranks[i];

    RankSumResult result;
    result.statistic = w;

    if (nPool <= 12) {
        // exact: enumerate every m-subset of the pooled ranks
        std::vector<double> sorted_ranks = ranks;
        std::sort(sorted_ranks.begin(), sorted_ranks.end());
        std::size_t total = 0, count_le = 0, count_ge = 0;
        std::vector<std::size_t> comb(m);
        std::iota(comb.begin(), comb.end(), 0);
        const double tol = 1e-9;
        while (true) {
            double s = 0.0;
            for (std::size_t i : comb) s += sorted_ranks[i];
            ++total;
            if (s <= w + tol) ++count_le;
            if (s >= w - tol) ++count_ge;
            // advance combination
            std::size_t i = m;
            while (i-- > 0) {
                if (comb[i] != i + nPool - m) {
                    ++comb[i];
                    for (std::size_t j = i + 1; j < m; ++j) comb[j] = comb[j - 1] + 1;
                    break;
                }
                if (i == 0) goto done;
            }
        }
    done:
        const double p_le = static_cast<double>(count_le) / static_cast<double>(total);
        const double p_ge = static_cast<double>(count_ge) / static_cast<double>(total);
        result.p_value = std::min(1.0, 2.0 * std::min(p_le, p_ge));
        return result;
    }

    // normal approximation with tie correction and continuity correction
    const double mm = static_cast<double>(m);
    const double nn = static_cast<double>(nPool - m);
    const double N = static_cast<double>(nPool);
    const double mu = mm * (N + 1.0) / 2.0;
    double tie_adj = 0.0;
    for (std::size_t t : ties) {
        const double td = static_cast<double>(t);
        tie_adj += td * td * td - td;
    }
    const double var = mm * nn / 12.0 * ((N + 1.0) - tie_adj / (N * (N - 1.0)));
    if (var <= 0.0) {
        result.p_value = 1.0;
        return result;
    }
    double delta = w - mu;
    if (delta > 0.5) delta -= 0.5;
    else if (delta < -0.5) delta += 0.5;
    else delta = 0.0;
    result.p_value = std::min(1.0, normal_sf_two_sided(delta / std::sqrt(var)));
    return result;
}

double mean_of(const std::vector<double>& v) {
    if (v.empty()) throw std::invalid_argument("mean_of: empty");
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

std::string format_number(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

std::string metrics_csv_header() {
    return "dataset,loss,gamma,nll,brier,dice,jaccard,recall,precision,"
           "nll_lo,nll_hi,brier_lo,brier_hi,dice_lo,dice_hi,"
           "jaccard_lo,jaccard_hi,recall_lo,recall_hi,precision_lo,precision_hi";
}

std::string metrics_csv_row(const MetricsReport& r, const BootstrapConfig& bs) {
    const std::vector<const std::vector<double>*> cols = {&r.nll,     &r.brier,  &r.dice,
                                                          &r.jaccard, &r.recall, &r.precision};
    std::string row = r.dataset + "," + r.loss + "," + format_number(r.gamma);
    for (const auto* c : cols) row += "," + format_number(mean_of(*c));
    for (const auto* c : cols) {
        const Interval ci = bootstrap_ci(*c, bs.level, bs.resamples, bs.seed);
        row += "," + format_number(ci.lo) + "," + format_number(ci.hi);
    }
    return row;
}

}  // namespace calseg
