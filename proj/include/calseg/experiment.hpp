#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "calseg/losses.hpp"
#include "calseg/metrics.hpp"
#include "calseg/segnet.hpp"
#include "calseg/synthdata.hpp"
#include "calseg/trainer.hpp"

namespace calseg {

// Configuration mistakes (unknown key, bad value, bad command) -> exit 2;
// everything else that throws -> exit 3.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Flat `key = value` configuration with a fixed schema; '#' starts a comment.
// Unknown keys are rejected. Values stay strings until typed extraction.
class ConfigMap {
public:
    static ConfigMap defaults();
    static ConfigMap from_file(const std::string& path);

    void set(const std::string& key, const std::string& value);  // rejects unknown keys
    const std::string& get(const std::string& key) const;

    double get_double(const std::string& key) const;
    std::size_t get_size(const std::string& key) const;
    std::uint64_t get_u64(const std::string& key) const;
    bool get_bool(const std::string& key) const;
    std::vector<double> get_list(const std::string& key) const;
    std::vector<std::string> get_names(const std::string& key) const;

    // Full schema in declaration order with effective values; parses back to
    // an identical map.
    std::string resolved_text() const;

private:
    std::vector<std::pair<std::string, std::string>> entries_;  // schema order
};

struct ExperimentConfig {
    ConfigMap raw = ConfigMap::defaults();

    SynthConfig data_config() const;
    NetConfig net_config() const;
    TrainConfig train_config() const;

    // Loss hyperparameters: per-kind defaults, overridden by any loss.* key
    // whose value is not "auto".
    LossConfig loss_config(const std::string& name) const;
    LossConfig loss_config() const;  // for key loss.name

    BootstrapConfig bootstrap_config() const;
};

struct EvalResult {
    MetricsReport report;
    std::vector<PredictionMap> maps;  // per test image
};

// Forward every sample in `indices` through the given parameters and score
// against ground truth at the given threshold.
EvalResult evaluate(const SegNet& net, const ParameterSet& params, const Dataset& ds,
                    const std::vector<std::size_t>& indices, double threshold,
                    const std::string& dataset_name, const std::string& loss_name,
                    double gamma);

struct ConditionResult {
    std::string name;
    LossConfig loss;
    TrainResult trained;
    EvalResult eval;
};

// Trains and evaluates each named loss on the same dataset with identical
// seeds (paired conditions), in list order.
std::vector<ConditionResult> run_conditions(const ExperimentConfig& cfg, const Dataset& ds,
                                            const std::vector<std::string>& losses);

// Threshold metrics recomputed from already-evaluated maps (no retraining).
MetricsReport rescore_at_threshold(const EvalResult& eval, double threshold);

// Fraction of fg-probabilities strictly inside (lo, hi), over all maps.
double confidence_mass(const std::vector<PredictionMap>& maps, double lo, double hi);

std::string sweep_csv_header(const std::string& variable);
std::string sweep_csv_row(double value, const MetricsReport& r, const BootstrapConfig& bs);

// CLI entry point used by the calseg binary: runs one subcommand and writes
// its outputs (plus resolved_config.txt) under out_dir.
void run_command(const std::string& command, const ExperimentConfig& cfg,
                 const std::string& out_dir);

}  // namespace calseg
