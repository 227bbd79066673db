#include "calseg/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace calseg {

PlateauScheduler::PlateauScheduler(double lr0, double factor, std::size_t patience, double tol)
    : lr_(lr0), factor_(factor), best_(std::numeric_limits<double>::infinity()), tol_(tol),
      patience_(patience) {
    if (!(lr0 > 0.0)) throw std::invalid_argument("plateau: lr0 must be positive");
    if (!(factor > 0.0 && factor < 1.0))
        throw std::invalid_argument("plateau: factor must lie in (0,1)");
    if (patience == 0) throw std::invalid_argument("plateau: patience must be >= 1");
}

double PlateauScheduler::update(double val_loss) {
    if (val_loss < best_ - tol_) {
        best_ = val_loss;
        misses_ = 0;
    } else if (++misses_ >= patience_) {
        lr_ *= factor_;
        misses_ = 0;
    }
    return lr_;
}

EarlyStopper::EarlyStopper(std::size_t patience, double tol)
    : best_(std::numeric_limits<double>::infinity()), tol_(tol), patience_(patience) {
    if (patience == 0) throw std::invalid_argument("early stop: patience must be >= 1");
}

bool EarlyStopper::update(double val_loss) {
    if (val_loss < best_ - tol_) {
        best_ = val_loss;
        misses_ = 0;
        return false;
    }
    return ++misses_ >= patience_;
}

void sgd_step(ParameterSet& params, const std::vector<std::pair<std::string, Tensor>>& grads,
              double lr) {
    if (grads.size() != params.items.size())
        throw std::invalid_argument("sgd_step: gradient entry count mismatch");
    for (std::size_t i = 0; i < grads.size(); ++i) {
        Tensor& p = params.items[i].second;
        const Tensor& g = grads[i].second;
        if (grads[i].first != params.items[i].first || !same_shape(p, g))
            throw std::invalid_argument("sgd_step: gradient for " + params.items[i].first +
                                        " does not match parameter");
        for (std::size_t j = 0; j < p.size(); ++j) p[j] -= lr * g[j];
    }
}

Tensor normalize_image(const Tensor& image) {
    Tensor out = image;
    const double n = static_cast<double>(out.size());
    double mean = 0.0;
    for (double v : out.data) mean += v;
    mean /= n;
    double var = 0.0;
    for (double v : out.data) var += (v - mean) * (v - mean);
    var /= n;
    const double sd = std::sqrt(var);
    if (sd < 1e-12) {
        std::fill(out.data.begin(), out.data.end(), 0.5);
        return out;
    }
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (double& v : out.data) {
        v = (v - mean) / sd;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    const double range = hi - lo;
    for (double& v : out.data) v = (v - lo) / range;
    return out;
}

void augment(Tensor& image, Tensor& mask, Rng& rng, double prob) {
    if (!same_shape(image, mask) || image.rank() != 2)
        throw std::invalid_argument("augment: image and mask must be equal [H,W]");
    const std::size_t H = image.shape[0], W = image.shape[1];
    if (rng.uniform() < prob) {  // horizontal flip
        for (std::size_t y = 0; y < H; ++y)
            for (std::size_t x = 0; x < W / 2; ++x) {
                std::swap(image.at2(y, x), image.at2(y, W - 1 - x));
                std::swap(mask.at2(y, x), mask.at2(y, W - 1 - x));
            }
    }
    if (rng.uniform() < prob) {  // vertical flip
        for (std::size_t y = 0; y < H / 2; ++y)
            for (std::size_t x = 0; x < W; ++x) {
                std::swap(image.at2(y, x), image.at2(H - 1 - y, x));
                std::swap(mask.at2(y, x), mask.at2(H - 1 - y, x));
            }
    }
    if (rng.uniform() < prob) {  // brightness, image only
        const double factor = rng.uniform(0.5, 2.0);
        for (double& v : image.data) v = std::clamp(v * factor, 0.0, 1.0);
    }
}

namespace {

double run_validation(const Model& model, const ParameterSet& params,
                      const std::vector<Sample>& val_set, const LossFn& loss) {
    double acc = 0.0;
    for (const Sample& s : val_set) {
        ForwardPass pass = model.forward(params, normalize_image(s.image));
        acc += loss(pass.probs, onehot_from_mask(s.mask))->value[0];
    }
    return acc / static_cast<double>(val_set.size());
}

}  // namespace

TrainResult train(const Model& model, ParameterSet init, const std::vector<Sample>& train_set,
                  const std::vector<Sample>& val_set, const TrainConfig& cfg,
                  const LossFn& loss) {
    if (train_set.empty() || val_set.empty())
        throw std::invalid_argument("train: train and val sets must be non-empty");
    if (cfg.batch_size == 0) throw std::invalid_argument("train: batch_size must be >= 1");
    if (!(cfg.lr0 > 0.0)) throw std::invalid_argument("train: lr0 must be positive");

    TrainResult result;
    result.params = std::move(init);
    result.log.stop_reason = "max_epochs";
    result.log.best_val_loss = std::numeric_limits<double>::infinity();
    if (cfg.max_epochs == 0) return result;

    PlateauScheduler scheduler(cfg.lr0, cfg.plateau_factor, cfg.plateau_patience,
                               cfg.improve_tol);
    EarlyStopper stopper(cfg.early_stop_patience, cfg.improve_tol);
    Rng rng(cfg.seed);
    ParameterSet best = result.params;

    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), 0);
    double lr = cfg.lr0;

    for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        rng.shuffle(order);
        double train_acc = 0.0;
        std::size_t pos = 0;
        while (pos < order.size()) {
            const std::size_t batch_end = std::min(pos + cfg.batch_size, order.size());
            // batch loss = mean of per-image losses
            NodePtr batch_loss;
            std::vector<std::pair<std::string, NodePtr>> all_leaves;
            for (std::size_t b = pos; b < batch_end; ++b) {
                const Sample& s = train_set[order[b]];
                Tensor image = normalize_image(s.image);
                Tensor mask = s.mask;
                if (cfg.augment) augment(image, mask, rng, cfg.aug_prob);
                ForwardPass pass = model.forward(result.params, image);
                NodePtr l = loss(pass.probs, onehot_from_mask(mask));
                batch_loss = batch_loss ? add(batch_loss, l) : l;
                for (auto& leafp : pass.param_leaves) all_leaves.push_back(std::move(leafp));
            }
            const double count = static_cast<double>(batch_end - pos);
            batch_loss = divide(batch_loss, count);
            backward(batch_loss);
            train_acc += batch_loss->value[0] * count;

            // per-parameter gradients, summed across the batch graphs
            std::vector<std::pair<std::string, Tensor>> grads;
            for (std::size_t i = 0; i < result.params.items.size(); ++i)
                grads.emplace_back(result.params.items[i].first,
                                   Tensor(result.params.items[i].second.shape, 0.0));
            const std::size_t per = result.params.items.size();
            for (std::size_t li = 0; li < all_leaves.size(); ++li) {
                Tensor& g = grads[li % per].second;
                const Tensor& lg = all_leaves[li].second->grad;
                for (std::size_t j = 0; j < g.size(); ++j) g[j] += lg[j];
            }
            sgd_step(result.params, grads, lr);
            pos = batch_end;
        }
        const double train_loss = train_acc / static_cast<double>(order.size());
        const double val_loss = run_validation(model, result.params, val_set, loss);

        if (val_loss < result.log.best_val_loss - cfg.improve_tol) {
            result.log.best_val_loss = val_loss;
            best = result.params;
        }

        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = train_loss;
        rec.val_loss = val_loss;
        rec.lr = lr;
        rec.wall_ms = static_cast<long>(std::chrono::duration_cast<std::chrono::milliseconds>(
                                            std::chrono::steady_clock::now() - t0)
                                            .count());
        result.log.epochs.push_back(rec);

        lr = scheduler.update(val_loss);
        if (stopper.update(val_loss)) {
            result.log.stop_reason = "early_stop";
            break;
        }
    }

    result.params = std::move(best);
    return result;
}

}  // namespace calseg
