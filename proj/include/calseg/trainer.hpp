#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "calseg/losses.hpp"
#include "calseg/rng.hpp"
#include "calseg/segnet.hpp"
#include "calseg/synthdata.hpp"

namespace calseg {

struct TrainConfig {
    double lr0 = 0.1;
    std::size_t batch_size = 1;
    std::size_t max_epochs = 100;
    double plateau_factor = 0.1;
    std::size_t plateau_patience = 25;
    std::size_t early_stop_patience = 50;
    double improve_tol = 1e-8;  // improvement means val < best - tol
    bool augment = true;
    double aug_prob = 0.15;  // per augmentation
    std::uint64_t seed = 13;
};

struct EpochRecord {
    std::size_t epoch = 0;  // 1-based
    double train_loss = 0.0;
    double val_loss = 0.0;
    double lr = 0.0;
    long wall_ms = 0;
};

struct TrainLog {
    std::vector<EpochRecord> epochs;
    std::string stop_reason;  // "max_epochs" or "early_stop"
    double best_val_loss = 0.0;
};

// Multiplies lr by `factor` after `patience` consecutive non-improving
// updates, then resets the counter.
class PlateauScheduler {
public:
    PlateauScheduler(double lr0, double factor, std::size_t patience, double tol);
    double update(double val_loss);  // returns the lr for the next epoch
    double lr() const { return lr_; }

private:
    double lr_, factor_, best_, tol_;
    std::size_t patience_, misses_ = 0;
};

// Signals stop after `patience` consecutive non-improving updates.
class EarlyStopper {
public:
    EarlyStopper(std::size_t patience, double tol);
    bool update(double val_loss);  // true when training should stop

private:
    double best_, tol_;
    std::size_t patience_, misses_ = 0;
};

// In-place p -= lr * g for every parameter; shapes must match exactly.
void sgd_step(ParameterSet& params, const std::vector<std::pair<std::string, Tensor>>& grads,
              double lr);

// z-score per image, then min-max rescale to [0,1] (constant image -> 0.5).
Tensor normalize_image(const Tensor& image);

// Each augmentation fires independently with probability `prob`:
// horizontal flip and vertical flip act on image and mask jointly; brightness
// scales the image only by a factor in [0.5, 2] and clamps to [0,1].
void augment(Tensor& image, Tensor& mask, Rng& rng, double prob);

struct TrainResult {
    ParameterSet params;  // parameters from the best-validation epoch
    TrainLog log;
};

// SGD (no momentum) over per-image losses. Shuffles the training set per
// epoch, tracks validation loss for scheduling, early stopping, and
// best-checkpoint selection. max_epochs == 0 returns `init` with an empty log.
TrainResult train(const Model& model, ParameterSet init,
                  const std::vector<Sample>& train_set, const std::vector<Sample>& val_set,
                  const TrainConfig& cfg, const LossFn& loss);

}  // namespace calseg
