#include "calseg/experiment.hpp"

#include <algorithm>
#include <cctype>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <utility>

#include "calseg/render.hpp"

namespace calseg {

namespace {

namespace fs = std::filesystem;

// Full configuration schema, in the order resolved_config.txt is written.
// "auto" for a loss hyperparameter means "use the per-loss default".
const std::vector<std::pair<std::string, std::string>>& schema() {
    static const std::vector<std::pair<std::string, std::string>> keys = {
        {"data.kind", "vessels"},
        {"data.height", "64"},
        {"data.width", "64"},
        {"data.fg_fraction", "0.04"},
        {"data.ambiguity", "1.5"},
        {"data.noise_sigma", "0.05"},
        {"data.contrast", "1"},
        {"data.count", "200"},
        {"data.seed", "7"},
        {"data.train_frac", "0.64"},
        {"data.val_frac", "0.16"},
        {"data.test_frac", "0.2"},
        {"data.split_seed", "17"},
        {"net.depth", "2"},
        {"net.base_channels", "8"},
        {"net.kernel", "3"},
        {"net.seed", "11"},
        {"train.lr0", "0.1"},
        {"train.batch_size", "1"},
        {"train.max_epochs", "100"},
        {"train.plateau_factor", "0.1"},
        {"train.plateau_patience", "25"},
        {"train.early_stop_patience", "50"},
        {"train.improve_tol", "1e-8"},
        {"train.augment", "true"},
        {"train.aug_prob", "0.15"},
        {"train.seed", "13"},
        {"loss.name", "dsc"},
        {"loss.gamma", "auto"},
        {"loss.alpha", "auto"},
        {"loss.beta", "auto"},
        {"loss.delta", "auto"},
        {"loss.lambda", "auto"},
        {"loss.smooth", "auto"},
        {"run.data_root", "data"},
        {"run.checkpoint", "checkpoints/model.sgnt"},
        {"run.input", "input.pfm"},
        {"run.threshold", "0.5"},
        {"run.gammas", "0.5,1,1.5,2,2.5,3,3.5,4,4.5,5"},
        {"run.thresholds",
         "0.05,0.1,0.15,0.2,0.25,0.3,0.35,0.4,0.45,0.5,"
         "0.55,0.6,0.65,0.7,0.75,0.8,0.85,0.9,0.95"},
        {"run.losses", "dsc,dscpp"},
        {"run.bins", "20"},
        {"run.overlay_index", "0"},
        {"run.bootstrap_level", "0.95"},
        {"run.bootstrap_resamples", "10000"},
        {"run.bootstrap_seed", "24237"},
    };
    return keys;
}

std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

double parse_double(const std::string& key, const std::string& value) {
    const char* begin = value.c_str();
    char* end = nullptr;
    const double v = std::strtod(begin, &end);
    if (end == begin || *end != '\0' || !std::isfinite(v)) {
        throw ConfigError(key + ": expected a number, got '" + value + "'");
    }
    return v;
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
    const char* begin = value.c_str();
    char* end = nullptr;
    errno = 0;
    const unsigned long long v = std::strtoull(begin, &end, 10);
    if (end == begin || *end != '\0' || errno == ERANGE || value[0] == '-') {
        throw ConfigError(key + ": expected a non-negative integer, got '" + value + "'");
    }
    return static_cast<std::uint64_t>(v);
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::string index_name(std::size_t idx) {
    char buf[24];
    std::snprintf(buf, sizeof(buf), "%04zu", idx);
    return buf;
}

std::vector<Sample> pick(const std::vector<Sample>& samples,
                         const std::vector<std::size_t>& indices) {
    std::vector<Sample> out;
    out.reserve(indices.size());
    for (std::size_t i : indices) out.push_back(samples.at(i));
    return out;
}

double checked_threshold(const ExperimentConfig& cfg, const std::string& key) {
    const double t = cfg.raw.get_double(key);
    if (t < 0.0 || t > 1.0) {
        throw ConfigError(key + ": threshold must lie in [0,1], got " + format_number(t));
    }
    return t;
}

std::string dataset_label(const ExperimentConfig& cfg) { return cfg.raw.get("data.kind"); }

std::string trainlog_csv(const TrainLog& log) {
    std::string text = "epoch,train_loss,val_loss,lr\n";
    for (const EpochRecord& e : log.epochs) {
        text += std::to_string(e.epoch);
        text += ',';
        text += format_number(e.train_loss);
        text += ',';
        text += format_number(e.val_loss);
        text += ',';
        text += format_number(e.lr);
        text += '\n';
    }
    return text;
}

LossConfig loss_with_gamma(const ExperimentConfig& cfg, const std::string& name, double gamma) {
    LossConfig lc = cfg.loss_config(name);
    switch (lc.kind) {
        case LossKind::DSCpp:
        case LossKind::FocalTversky:
        case LossKind::UnifiedFocal:
            break;
        default:
            throw ConfigError("sweep-gamma needs a gamma-parameterised loss, got '" + name + "'");
    }
    lc.gamma = gamma;
    try {
        make_loss(lc);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("run.gammas: ") + e.what());
    }
    return lc;
}

void cmd_gen_data(const ExperimentConfig& cfg, const fs::path& out) {
    const SynthConfig sc = cfg.data_config();
    const std::vector<Sample> samples = generate(sc);
    const SplitIndices parts =
        split(samples.size(), cfg.raw.get_double("data.train_frac"),
              cfg.raw.get_double("data.val_frac"), cfg.raw.get_double("data.test_frac"),
              cfg.raw.get_u64("data.split_seed"));
    write_dataset(out.string(), samples, parts);
}

void cmd_train(const ExperimentConfig& cfg, const fs::path& out) {
    const Dataset ds = load_dataset(cfg.raw.get("run.data_root"));
    const SegNet net(cfg.net_config());
    const LossConfig lc = cfg.loss_config();
    const TrainResult tr = train(net, net.init_params(), pick(ds.samples, ds.split.train),
                                 pick(ds.samples, ds.split.val), cfg.train_config(),
                                 make_loss(lc));
    fs::create_directories(out / "checkpoints");
    save_checkpoint((out / "checkpoints" / "model.sgnt").string(), tr.params);
    write_text(out / "trainlog.csv", trainlog_csv(tr.log));
}

void cmd_eval(const ExperimentConfig& cfg, const fs::path& out) {
    const Dataset ds = load_dataset(cfg.raw.get("run.data_root"));
    const SegNet net(cfg.net_config());
    const ParameterSet params = load_checkpoint(cfg.raw.get("run.checkpoint"));
    net.check_params(params);
    const LossConfig lc = cfg.loss_config();
    const double threshold = checked_threshold(cfg, "run.threshold");
    const EvalResult ev = evaluate(net, params, ds, ds.split.test, threshold,
                                   dataset_label(cfg), loss_name(lc), lc.gamma);

    write_text(out / "metrics.csv", metrics_csv_header() + "\n" +
                                        metrics_csv_row(ev.report, cfg.bootstrap_config()) +
                                        "\n");
    fs::create_directories(out / "predictions");
    for (std::size_t k = 0; k < ev.maps.size(); ++k) {
        const std::size_t idx = ds.split.test[k];
        write_pfm((out / "predictions" / (index_name(idx) + ".pfm")).string(),
                  ev.maps[k].fg_prob);
    }
}

std::string histogram_csv(const std::vector<PredictionMap>& maps, std::size_t bins) {
    std::vector<std::size_t> counts(bins, 0);
    for (const PredictionMap& m : maps) {
        const std::vector<std::size_t> h = softmax_histogram(m, bins);
        for (std::size_t i = 0; i < bins; ++i) counts[i] += h[i];
    }
    std::string text = "bin_lo,bin_hi,count\n";
    for (std::size_t i = 0; i < bins; ++i) {
        text += format_number(static_cast<double>(i) / static_cast<double>(bins));
        text += ',';
        text += format_number(static_cast<double>(i + 1) / static_cast<double>(bins));
        text += ',';
        text += std::to_string(counts[i]);
        text += '\n';
    }
    return text;
}

void cmd_sweep_gamma(const ExperimentConfig& cfg, const fs::path& out) {
    const Dataset ds = load_dataset(cfg.raw.get("run.data_root"));
    const std::vector<double> gammas = cfg.raw.get_list("run.gammas");
    const std::string base_name = cfg.raw.get("loss.name");
    const std::size_t bins = cfg.raw.get_size("run.bins");
    if (bins == 0) throw ConfigError("run.bins must be at least 1");
    const double threshold = checked_threshold(cfg, "run.threshold");

    const SegNet net(cfg.net_config());
    const ParameterSet init = net.init_params();
    const TrainConfig tc = cfg.train_config();
    const std::vector<Sample> train_set = pick(ds.samples, ds.split.train);
    const std::vector<Sample> val_set = pick(ds.samples, ds.split.val);
    const BootstrapConfig bs = cfg.bootstrap_config();

    fs::create_directories(out / "histograms");
    fs::create_directories(out / "checkpoints");
    std::string sweep = sweep_csv_header("gamma") + "\n";
    for (double g : gammas) {
        const LossConfig lc = loss_with_gamma(cfg, base_name, g);
        const TrainResult tr = train(net, init, train_set, val_set, tc, make_loss(lc));
        const EvalResult ev = evaluate(net, tr.params, ds, ds.split.test, threshold,
                                       dataset_label(cfg), loss_name(lc), g);
        sweep += sweep_csv_row(g, ev.report, bs) + "\n";
        const std::string tag = format_number(g);
        write_text(out / "histograms" / ("gamma_" + tag + ".csv"),
                   histogram_csv(ev.maps, bins));
        save_checkpoint((out / "checkpoints" / ("gamma_" + tag + ".sgnt")).string(),
                        tr.params);
    }
    write_text(out / "sweep.csv", sweep);
}

void cmd_sweep_threshold(const ExperimentConfig& cfg, const fs::path& out) {
    const Dataset ds = load_dataset(cfg.raw.get("run.data_root"));
    const SegNet net(cfg.net_config());
    const ParameterSet params = load_checkpoint(cfg.raw.get("run.checkpoint"));
    net.check_params(params);
    const LossConfig lc = cfg.loss_config();
    const std::vector<double> thresholds = cfg.raw.get_list("run.thresholds");
    for (double t : thresholds) {
        if (t < 0.0 || t > 1.0) {
            throw ConfigError("run.thresholds: threshold must lie in [0,1], got " +
                              format_number(t));
        }
    }
    const std::size_t overlay_index = cfg.raw.get_size("run.overlay_index");

    const EvalResult ev = evaluate(net, params, ds, ds.split.test, 0.5, dataset_label(cfg),
                                   loss_name(lc), lc.gamma);
    if (overlay_index >= ev.maps.size()) {
        throw ConfigError("run.overlay_index: only " + std::to_string(ev.maps.size()) +
                          " test images, got index " + std::to_string(overlay_index));
    }

    const BootstrapConfig bs = cfg.bootstrap_config();
    fs::create_directories(out / "overlays");
    std::string sweep = sweep_csv_header("threshold") + "\n";
    for (double t : thresholds) {
        sweep += sweep_csv_row(t, rescore_at_threshold(ev, t), bs) + "\n";
        const PredictionMap& map = ev.maps[overlay_index];
        write_ppm((out / "overlays" / ("overlay_t" + format_number(t) + ".ppm")).string(),
                  map.truth.shape[0], map.truth.shape[1], overlay_pixels(map, t));
    }
    write_text(out / "sweep.csv", sweep);
}

void cmd_compare_losses(const ExperimentConfig& cfg, const fs::path& out) {
    const Dataset ds = load_dataset(cfg.raw.get("run.data_root"));
    const std::vector<std::string> names = cfg.raw.get_names("run.losses");
    const std::vector<ConditionResult> conditions = run_conditions(cfg, ds, names);

    const BootstrapConfig bs = cfg.bootstrap_config();
    std::string metrics = metrics_csv_header() + "\n";
    fs::create_directories(out / "checkpoints");
    for (const ConditionResult& c : conditions) {
        metrics += metrics_csv_row(c.eval.report, bs) + "\n";
        save_checkpoint((out / "checkpoints" / (c.name + ".sgnt")).string(),
                        c.trained.params);
        write_text(out / ("trainlog_" + c.name + ".csv"), trainlog_csv(c.trained.log));
    }
    write_text(out / "metrics.csv", metrics);

    const auto matrix = [&](const std::string& file,
                            const std::vector<double> MetricsReport::*field) {
        std::string text = "loss";
        for (const ConditionResult& c : conditions) text += "," + c.name;
        text += '\n';
        for (const ConditionResult& a : conditions) {
            text += a.name;
            for (const ConditionResult& b : conditions) {
                const double p = (&a == &b) ? 1.0
                                            : wilcoxon_rank_sum(a.eval.report.*field,
                                                                b.eval.report.*field)
                                                  .p_value;
                text += "," + format_number(p);
            }
            text += '\n';
        }
        write_text(out / file, text);
    };
    matrix("significance_nll.csv", &MetricsReport::nll);
    matrix("significance_dice.csv", &MetricsReport::dice);
}

void cmd_render_heatmap(const ExperimentConfig& cfg, const fs::path& out) {
    const std::string input = cfg.raw.get("run.input");
    const Tensor map = read_pfm(input);
    fs::create_directories(out / "heatmaps");
    const std::string stem = fs::path(input).stem().string();
    write_ppm((out / "heatmaps" / (stem + ".ppm")).string(), map.shape[0], map.shape[1],
              heatmap_pixels(map));
}

}  // namespace

ConfigMap ConfigMap::defaults() {
    ConfigMap m;
    for (const auto& [key, value] : schema()) m.entries_.emplace_back(key, value);
    return m;
}

ConfigMap ConfigMap::from_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config file: " + path);
    ConfigMap m = defaults();
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const std::string text = trim(line);
        if (text.empty()) continue;
        const std::size_t eq = text.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(path + ":" + std::to_string(line_no) +
                              ": expected 'key = value', got '" + text + "'");
        }
        try {
            m.set(trim(text.substr(0, eq)), trim(text.substr(eq + 1)));
        } catch (const ConfigError& e) {
            throw ConfigError(path + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return m;
}

void ConfigMap::set(const std::string& key, const std::string& value) {
    if (value.empty()) throw ConfigError(key + ": empty value");
    for (auto& [k, v] : entries_) {
        if (k == key) {
            v = value;
            return;
        }
    }
    throw ConfigError("unknown configuration key: '" + key + "'");
}

const std::string& ConfigMap::get(const std::string& key) const {
    for (const auto& [k, v] : entries_) {
        if (k == key) return v;
    }
    throw std::logic_error("configuration key not in schema: " + key);
}

double ConfigMap::get_double(const std::string& key) const {
    return parse_double(key, get(key));
}

std::size_t ConfigMap::get_size(const std::string& key) const {
    return static_cast<std::size_t>(parse_u64(key, get(key)));
}

std::uint64_t ConfigMap::get_u64(const std::string& key) const {
    return parse_u64(key, get(key));
}

bool ConfigMap::get_bool(const std::string& key) const {
    const std::string& v = get(key);
    if (v == "true") return true;
    if (v == "false") return false;
    throw ConfigError(key + ": expected 'true' or 'false', got '" + v + "'");
}

std::vector<double> ConfigMap::get_list(const std::string& key) const {
    const std::string& text = get(key);
    std::vector<double> out;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t comma = std::min(text.find(',', pos), text.size());
        const std::string item = trim(text.substr(pos, comma - pos));
        if (item.empty()) throw ConfigError(key + ": empty list element");
        out.push_back(parse_double(key, item));
        pos = comma + 1;
    }
    return out;
}

std::vector<std::string> ConfigMap::get_names(const std::string& key) const {
    const std::string& text = get(key);
    std::vector<std::string> out;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t comma = std::min(text.find(',', pos), text.size());
        const std::string item = trim(text.substr(pos, comma - pos));
        if (item.empty()) throw ConfigError(key + ": empty list element");
        out.push_back(item);
        pos = comma + 1;
    }
    return out;
}

std::string ConfigMap::resolved_text() const {
    std::string text;
    for (const auto& [k, v] : entries_) {
        text += k;
        text += " = ";
        text += v;
        text += '\n';
    }
    return text;
}

SynthConfig ExperimentConfig::data_config() const {
    SynthConfig sc;
    const std::string& kind = raw.get("data.kind");
    if (kind == "vessels") {
        sc.kind = SynthKind::Vessels;
    } else if (kind == "blobs") {
        sc.kind = SynthKind::Blobs;
    } else {
        throw ConfigError("data.kind: expected 'vessels' or 'blobs', got '" + kind + "'");
    }
    sc.height = raw.get_size("data.height");
    sc.width = raw.get_size("data.width");
    sc.fg_fraction_target = raw.get_double("data.fg_fraction");
    sc.ambiguity_width = raw.get_double("data.ambiguity");
    sc.noise_sigma = raw.get_double("data.noise_sigma");
    sc.contrast = raw.get_double("data.contrast");
    sc.count = raw.get_size("data.count");
    sc.seed = raw.get_u64("data.seed");
    if (sc.height < 8 || sc.width < 8) throw ConfigError("data.height/width must be >= 8");
    if (!(sc.fg_fraction_target > 0.0 && sc.fg_fraction_target < 0.5)) {
        throw ConfigError("data.fg_fraction must lie in (0, 0.5)");
    }
    if (sc.ambiguity_width < 0.0) throw ConfigError("data.ambiguity must be >= 0");
    if (sc.noise_sigma < 0.0) throw ConfigError("data.noise_sigma must be >= 0");
    if (!(sc.contrast > 0.0 && sc.contrast <= 1.0)) {
        throw ConfigError("data.contrast must lie in (0, 1]");
    }
    if (sc.count == 0) throw ConfigError("data.count must be >= 1");

    const double tf = raw.get_double("data.train_frac");
    const double vf = raw.get_double("data.val_frac");
    const double ef = raw.get_double("data.test_frac");
    if (tf < 0.0 || vf < 0.0 || ef < 0.0 || std::abs(tf + vf + ef - 1.0) > 1e-9) {
        throw ConfigError("data.{train,val,test}_frac must be non-negative and sum to 1");
    }
    return sc;
}

NetConfig ExperimentConfig::net_config() const {
    NetConfig nc;
    nc.depth = raw.get_size("net.depth");
    nc.base_channels = raw.get_size("net.base_channels");
    nc.kernel = raw.get_size("net.kernel");
    nc.seed = raw.get_u64("net.seed");
    if (nc.depth == 0) throw ConfigError("net.depth must be >= 1");
    if (nc.base_channels == 0) throw ConfigError("net.base_channels must be >= 1");
    if (nc.kernel == 0 || nc.kernel % 2 == 0) throw ConfigError("net.kernel must be odd");
    return nc;
}

TrainConfig ExperimentConfig::train_config() const {
    TrainConfig tc;
    tc.lr0 = raw.get_double("train.lr0");
    tc.batch_size = raw.get_size("train.batch_size");
    tc.max_epochs = raw.get_size("train.max_epochs");
    tc.plateau_factor = raw.get_double("train.plateau_factor");
    tc.plateau_patience = raw.get_size("train.plateau_patience");
    tc.early_stop_patience = raw.get_size("train.early_stop_patience");
    tc.improve_tol = raw.get_double("train.improve_tol");
    tc.augment = raw.get_bool("train.augment");
    tc.aug_prob = raw.get_double("train.aug_prob");
    tc.seed = raw.get_u64("train.seed");
    if (!(tc.lr0 > 0.0)) throw ConfigError("train.lr0 must be > 0");
    if (tc.batch_size == 0) throw ConfigError("train.batch_size must be >= 1");
    if (!(tc.plateau_factor > 0.0 && tc.plateau_factor < 1.0)) {
        throw ConfigError("train.plateau_factor must lie in (0, 1)");
    }
    if (tc.plateau_patience == 0) throw ConfigError("train.plateau_patience must be >= 1");
    if (tc.early_stop_patience == 0) {
        throw ConfigError("train.early_stop_patience must be >= 1");
    }
    if (tc.improve_tol < 0.0) throw ConfigError("train.improve_tol must be >= 0");
    if (tc.aug_prob < 0.0 || tc.aug_prob > 1.0) {
        throw ConfigError("train.aug_prob must lie in [0, 1]");
    }
    return tc;
}

LossConfig ExperimentConfig::loss_config(const std::string& name) const {
    bool plusplus = false;
    LossKind kind;
    try {
        kind = loss_kind_from_name(name, &plusplus);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    LossConfig lc = LossConfig::defaults(kind);
    lc.plusplus = plusplus;
    const auto override_key = [&](const char* key, double LossConfig::*field) {
        const std::string& v = raw.get(key);
        if (v != "auto") lc.*field = parse_double(key, v);
    };
    override_key("loss.gamma", &LossConfig::gamma);
    override_key("loss.alpha", &LossConfig::alpha);
    override_key("loss.beta", &LossConfig::beta);
    override_key("loss.delta", &LossConfig::delta);
    override_key("loss.lambda", &LossConfig::lambda);
    override_key("loss.smooth", &LossConfig::smooth);
    try {
        make_loss(lc);  // hyperparameter range validation
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("loss configuration: ") + e.what());
    }
    return lc;
}

LossConfig ExperimentConfig::loss_config() const { return loss_config(raw.get("loss.name")); }

BootstrapConfig ExperimentConfig::bootstrap_config() const {
    BootstrapConfig bs;
    bs.level = raw.get_double("run.bootstrap_level");
    bs.resamples = raw.get_size("run.bootstrap_resamples");
    bs.seed = raw.get_u64("run.bootstrap_seed");
    if (!(bs.level > 0.0 && bs.level < 1.0)) {
        throw ConfigError("run.bootstrap_level must lie in (0, 1)");
    }
    if (bs.resamples == 0) throw ConfigError("run.bootstrap_resamples must be >= 1");
    return bs;
}

EvalResult evaluate(const SegNet& net, const ParameterSet& params, const Dataset& ds,
                    const std::vector<std::size_t>& indices, double threshold,
                    const std::string& dataset_name, const std::string& loss_name,
                    double gamma) {
    EvalResult out;
    out.report.dataset = dataset_name;
    out.report.loss = loss_name;
    out.report.gamma = gamma;
    for (std::size_t idx : indices) {
        const Sample& s = ds.samples.at(idx);
        const ForwardPass fp = net.forward(params, normalize_image(s.image));
        const Tensor& pv = fp.probs->value;  // [2,H,W]
        const std::size_t h = pv.shape[1], w = pv.shape[2];
        Tensor fg({h, w});
        std::copy(pv.data.begin(), pv.data.begin() + static_cast<std::ptrdiff_t>(h * w),
                  fg.data.begin());
        PredictionMap map{std::move(fg), s.mask};

        out.report.nll.push_back(nll(map));
        out.report.brier.push_back(brier(map));
        const ConfusionCounts c = confusion(map, threshold);
        out.report.dice.push_back(dice(c));
        out.report.jaccard.push_back(jaccard(c));
        out.report.recall.push_back(recall(c));
        out.report.precision.push_back(precision(c));
        out.maps.push_back(std::move(map));
    }
    return out;
}

std::vector<ConditionResult> run_conditions(const ExperimentConfig& cfg, const Dataset& ds,
                                            const std::vector<std::string>& losses) {
    if (losses.empty()) throw ConfigError("run.losses must name at least one loss");
    const SegNet net(cfg.net_config());
    const ParameterSet init = net.init_params();
    const TrainConfig tc = cfg.train_config();
    const double threshold = checked_threshold(cfg, "run.threshold");
    const std::vector<Sample> train_set = pick(ds.samples, ds.split.train);
    const std::vector<Sample> val_set = pick(ds.samples, ds.split.val);
    const std::string dsname = dataset_label(cfg);

    std::vector<ConditionResult> results;
    results.reserve(losses.size());
    for (const std::string& name : losses) {
        const LossConfig lc = cfg.loss_config(name);
        const std::string canon = loss_name(lc);
        for (const ConditionResult& prev : results) {
            if (prev.name == canon) {
                throw ConfigError("run.losses: duplicate loss '" + canon + "'");
            }
        }
        TrainResult tr = train(net, init, train_set, val_set, tc, make_loss(lc));
        EvalResult ev =
            evaluate(net, tr.params, ds, ds.split.test, threshold, dsname, canon, lc.gamma);
        results.push_back({canon, lc, std::move(tr), std::move(ev)});
    }
    return results;
}

MetricsReport rescore_at_threshold(const EvalResult& eval, double threshold) {
    MetricsReport r;
    r.dataset = eval.report.dataset;
    r.loss = eval.report.loss;
    r.gamma = eval.report.gamma;
    r.nll = eval.report.nll;
    r.brier = eval.report.brier;
    for (const PredictionMap& map : eval.maps) {
        const ConfusionCounts c = confusion(map, threshold);
        r.dice.push_back(dice(c));
        r.jaccard.push_back(jaccard(c));
        r.recall.push_back(recall(c));
        r.precision.push_back(precision(c));
    }
    return r;
}

double confidence_mass(const std::vector<PredictionMap>& maps, double lo, double hi) {
    std::size_t inside = 0, total = 0;
    for (const PredictionMap& m : maps) {
        for (double p : m.fg_prob.data) {
            inside += (p > lo && p < hi) ? 1 : 0;
        }
        total += m.fg_prob.size();
    }
    if (total == 0) throw std::invalid_argument("confidence_mass: no pixels");
    return static_cast<double>(inside) / static_cast<double>(total);
}

std::string sweep_csv_header(const std::string& variable) {
    return variable +
           ",nll,brier,dice,jaccard,recall,precision"
           ",nll_lo,nll_hi,brier_lo,brier_hi,dice_lo,dice_hi"
           ",jaccard_lo,jaccard_hi,recall_lo,recall_hi,precision_lo,precision_hi";
}

std::string sweep_csv_row(double value, const MetricsReport& r, const BootstrapConfig& bs) {
    const std::vector<double>* columns[6] = {&r.nll,     &r.brier,  &r.dice,
                                             &r.jaccard, &r.recall, &r.precision};
    std::string row = format_number(value);
    for (const auto* v : columns) row += "," + format_number(mean_of(*v));
    for (const auto* v : columns) {
        const Interval ci = bootstrap_ci(*v, bs.level, bs.resamples, bs.seed);
        row += "," + format_number(ci.lo) + "," + format_number(ci.hi);
    }
    return row;
}

void run_command(const std::string& command, const ExperimentConfig& cfg,
                 const std::string& out_dir) {
    if (out_dir.empty()) throw ConfigError("output directory must not be empty");
    const fs::path out(out_dir);
    fs::create_directories(out);
    write_text(out / "resolved_config.txt", cfg.raw.resolved_text());

    if (command == "gen-data") {
        cmd_gen_data(cfg, out);
    } else if (command == "train") {
        cmd_train(cfg, out);
    } else if (command == "eval") {
        cmd_eval(cfg, out);
    } else if (command == "sweep-gamma") {
        cmd_sweep_gamma(cfg, out);
    } else if (command == "sweep-threshold") {
        cmd_sweep_threshold(cfg, out);
    } else if (command == "compare-losses") {
        cmd_compare_losses(cfg, out);
    } else if (command == "render-heatmap") {
        cmd_render_heatmap(cfg, out);
    } else {
        throw ConfigError("unknown command: '" + command + "'");
    }
}

}  // namespace calseg
