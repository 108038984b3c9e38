#pragma once

// Run configuration and the end-to-end pipeline: pretrain, finetune, K-means
// evaluation, geometry tracking, the noise-robustness sweep and the ablation
// harness.

#include "checkpoint.hpp"
#include "clustering.hpp"
#include "data.hpp"
#include "dec.hpp"
#include "geometry.hpp"
#include "model.hpp"
#include "proximity.hpp"
#include "trace.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <optional>
#include <sstream>
#include <string>

namespace rdc {

struct SynthSpec {
    std::size_t n_per_cluster = 500;
    double noise = 0.05;
};

struct RunConfig {
    std::optional<std::filesystem::path> data_path;
    std::optional<DataFormat> data_format;
    bool csv_labels = false;
    SynthSpec synth;

    std::uint64_t seed = 0;
    PretrainConfig pretrain;
    FinetuneConfig finetune;
    std::size_t k = 4;
    int kmeans_restarts = 10;
    bool geometry = false;
    bool geometry_per_cluster = false;
    long long dec_epochs = 50;
    std::filesystem::path out = "rdc-out";

    /// Pushes the global seed into every component.
    void propagate_seed() {
        pretrain.seed = seed;
        finetune.seed = seed;
    }

    void validate() const {
        finetune.filter.validate();
        if (k < 1) throw std::invalid_argument("K must be >= 1");
        pretrain.validate();
        finetune.validate();
        if (data_path && !std::filesystem::exists(*data_path))
            throw std::invalid_argument("dataset not found: " + data_path->string());
    }
};

/// Applies the keys present in a JSON config object.
inline void apply_config_json(RunConfig& c, const nlohmann::json& j) {
    if (!j.is_object()) throw std::invalid_argument("config must be a JSON object");
    static const char* known[] = {"data", "format", "labels", "synth_n", "synth_noise", "seed", "t1", "lr", "batch",
                                  "lambda", "hidden", "latent", "augment", "alpha", "beta", "m", "max_epochs",
                                  "stability_window", "k", "restarts", "geometry", "geometry_per_cluster",
                                  "dec_epochs", "out"};
    for (const auto& [key, _] : j.items())
        if (std::find_if(std::begin(known), std::end(known), [&](const char* k) { return key == k; }) == std::end(known))
            throw std::invalid_argument("unknown config key '" + key + "'");
    if (j.contains("data")) c.data_path = j["data"].get<std::string>();
    if (j.contains("format")) c.data_format = data_format_from_string(j["format"].get<std::string>());
    if (j.contains("labels")) c.csv_labels = j["labels"].get<bool>();
    if (j.contains("synth_n")) c.synth.n_per_cluster = j["synth_n"].get<std::size_t>();
    if (j.contains("synth_noise")) c.synth.noise = j["synth_noise"].get<double>();
    if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("t1")) c.pretrain.iterations = j["t1"].get<long long>();
    if (j.contains("lr")) c.pretrain.lr = c.finetune.lr = j["lr"].get<double>();
    if (j.contains("batch")) c.pretrain.batch = c.finetune.batch = j["batch"].get<std::size_t>();
    if (j.contains("lambda")) c.pretrain.lambda = j["lambda"].get<double>();
    if (j.contains("hidden")) c.pretrain.arch.hidden = j["hidden"].get<std::vector<std::size_t>>();
    if (j.contains("latent")) c.pretrain.arch.latent = j["latent"].get<std::size_t>();
    if (j.contains("augment")) c.pretrain.augment = c.finetune.augment = j["augment"].get<bool>();
    if (j.contains("alpha")) c.finetune.filter.alpha = j["alpha"].get<double>();
    if (j.contains("beta")) c.finetune.filter.beta = j["beta"].get<double>();
    if (j.contains("m")) c.finetune.filter.M = j["m"].get<std::size_t>();
    if (j.contains("max_epochs")) c.finetune.max_epochs = j["max_epochs"].get<long long>();
    if (j.contains("stability_window")) c.finetune.stability_window = j["stability_window"].get<long long>();
    if (j.contains("k")) c.k = j["k"].get<std::size_t>();
    if (j.contains("restarts")) c.kmeans_restarts = j["restarts"].get<int>();
    if (j.contains("geometry")) c.geometry = j["geometry"].get<bool>();
    if (j.contains("geometry_per_cluster")) c.geometry_per_cluster = j["geometry_per_cluster"].get<bool>();
    if (j.contains("dec_epochs")) c.dec_epochs = j["dec_epochs"].get<long long>();
    if (j.contains("out")) c.out = j["out"].get<std::string>();
}

inline Dataset load_run_dataset(const RunConfig& c) {
    if (!c.data_path) return gen_curved_clusters(c.synth.n_per_cluster, c.synth.noise, c.seed);
    const DataFormat fmt = c.data_format.value_or(guess_format(*c.data_path));
    return load_dataset(*c.data_path, fmt, c.csv_labels);
}

// ---------------------------------------------------------------------------
// Evaluation

struct Evaluation {
    ClusterResult clusters;
    std::optional<MetricReport> metrics;
};

inline Evaluation evaluate_latent(const Matrix& Z, const std::optional<std::vector<int>>& labels, std::size_t k,
                                  std::uint64_t seed, int restarts = 1) {
    Evaluation ev;
    ev.clusters = kmeans(Z, KMeansConfig{k, seed, 300, restarts});
    if (labels) ev.metrics = evaluate_clustering(ev.clusters.assignments, *labels);
    return ev;
}

inline Evaluation evaluate(const AutoencoderParams& ae, const Dataset& data, std::size_t k, std::uint64_t seed,
                           int restarts = 1) {
    return evaluate_latent(encode(ae, data.X), data.labels, k, seed, restarts);
}

/// Metric JSON: k, inertia, acc/f1 (labelled data only), mapping, assignments.
inline std::string evaluation_json(const Evaluation& ev, std::size_t k) {
    nlohmann::ordered_json o;
    o["k"] = k;
    o["inertia"] = ev.clusters.inertia;
    if (ev.metrics) {
        o["acc"] = ev.metrics->acc;
        o["f1_macro"] = ev.metrics->f1_macro;
        o["f1_micro"] = ev.metrics->f1_micro;
        nlohmann::ordered_json m = nlohmann::ordered_json::object();
        for (const auto& [c, l] : ev.metrics->mapping) m[std::to_string(c)] = l;
        o["mapping"] = std::move(m);
    }
    o["assignments"] = ev.clusters.assignments;
    return o.dump(2) + "\n";
}

inline std::string geometry_json(const GeometryReport& g) {
    nlohmann::ordered_json o;
    o["id"] = g.id_estimate;
    o["lid"] = g.lid_estimate;
    o["gap"] = g.gap;
    o["n_points"] = g.n_points;
    return o.dump(2) + "\n";
}

/// Epoch hook that fills id/lid (when enabled) and acc (when labelled).
inline EpochHook make_tracking_hook(const RunConfig& c, const Dataset& data, bool with_acc = true) {
    return [&c, &data, with_acc](const Matrix& Z, EpochRecord& rec) {
        if (c.geometry) {
            const std::vector<int>* per = (c.geometry_per_cluster && data.labels) ? &*data.labels : nullptr;
            track_geometry(Z, rec.id, rec.lid, per);
        }
        if (with_acc && data.labels) rec.acc = evaluate_latent(Z, data.labels, c.k, c.seed, c.kmeans_restarts).metrics->acc;
    };
}

// ---------------------------------------------------------------------------
// Full pipeline

struct PipelineResult {
    PretrainState pretrained;
    PretrainTrace pretrain_trace;
    AutoencoderParams ae_phase1;
    AutoencoderParams ae_final;
    RunTrace finetune_trace;
    Evaluation eval_phase1;
    Evaluation eval_final;
};

inline PipelineResult run_pipeline(const Dataset& data, const RunConfig& cfg) {
    cfg.validate();
    PipelineResult r;
    r.pretrained = init_pretrain(data.dim(), cfg.pretrain);
    r.pretrain_trace = pretrain(r.pretrained, data, cfg.pretrain);
    r.ae_phase1 = r.pretrained.ae;
    r.eval_phase1 = evaluate(r.ae_phase1, data, cfg.k, cfg.seed, cfg.kmeans_restarts);
    r.ae_final = r.ae_phase1;
    r.finetune_trace = finetune(r.ae_final, data, cfg.finetune, make_tracking_hook(cfg, data, cfg.geometry));
    r.eval_final = evaluate(r.ae_final, data, cfg.k, cfg.seed, cfg.kmeans_restarts);
    return r;
}

// ---------------------------------------------------------------------------
// Robustness sweep: Z-score, Gaussian noise at each level, full pipeline.

struct RobustnessRow {
    double sigma_p = 0.0;
    double acc = 0.0;
    double f1_macro = 0.0;
    double f1_micro = 0.0;
    double tau = 0.0;
    std::size_t epochs = 0;
};

inline std::vector<RobustnessRow> run_robustness(const Dataset& data, const RunConfig& cfg,
                                                 std::span<const double> levels = kNoiseLevels) {
    if (!data.labels) throw std::invalid_argument("robustness sweep needs a labelled dataset");
    const ZScore norm = zscore_normalize(data.X);
    std::vector<RobustnessRow> rows;
    for (double sp : levels) {
        Dataset noisy = data;
        noisy.X = add_gaussian_noise(norm.X, NoiseSpec{sp, cfg.seed});
        const PipelineResult p = run_pipeline(noisy, cfg);
        RobustnessRow row;
        row.sigma_p = sp;
        row.acc = p.eval_final.metrics->acc;
        row.f1_macro = p.eval_final.metrics->f1_macro;
        row.f1_micro = p.eval_final.metrics->f1_micro;
        row.tau = p.finetune_trace.epochs.empty() ? 0.0 : p.finetune_trace.epochs.back().tau;
        row.epochs = p.finetune_trace.epochs.size();
        rows.push_back(row);
    }
    return rows;
}

inline std::string robustness_csv(const std::vector<RobustnessRow>& rows) {
    std::ostringstream os;
    os << "sigma_p,acc,f1_macro,f1_micro,tau,epochs\n";
    for (const auto& r : rows)
        os << format_double(r.sigma_p) << ',' << format_double(r.acc) << ',' << format_double(r.f1_macro) << ','
           << format_double(r.f1_micro) << ',' << format_double(r.tau) << ',' << r.epochs << '\n';
    return os.str();
}

// ---------------------------------------------------------------------------
// Ablation: P1 & P2 versus P1 & P3 from the same pretrained weights.

struct AblationResult {
    double acc_p1 = 0.0;
    double acc_p1_p2 = 0.0;
    double acc_p1_p3 = 0.0;
    RunTrace p2_trace;
    RunTrace p3_trace;
    AutoencoderParams ae_p2;
    AutoencoderParams ae_p3;
};

inline AblationResult run_ablation(const Dataset& data, const RunConfig& cfg) {
    if (!data.labels) throw std::invalid_argument("ablation needs a labelled dataset");
    cfg.validate();
    AblationResult a;
    PretrainState s = init_pretrain(data.dim(), cfg.pretrain);
    pretrain(s, data, cfg.pretrain);
    a.acc_p1 = evaluate(s.ae, data, cfg.k, cfg.seed, cfg.kmeans_restarts).metrics->acc;
    const EpochHook hook = make_tracking_hook(cfg, data, false);

    a.ae_p2 = s.ae;
    a.p2_trace = finetune(a.ae_p2, data, cfg.finetune, hook);
    a.acc_p1_p2 = evaluate(a.ae_p2, data, cfg.k, cfg.seed, cfg.kmeans_restarts).metrics->acc;

    a.ae_p3 = s.ae;
    DecConfig dc{cfg.k, cfg.finetune.lr, cfg.finetune.batch, cfg.dec_epochs, cfg.seed};
    a.p3_trace = dec_finetune(a.ae_p3, data, dc, hook);
    a.acc_p1_p3 = evaluate(a.ae_p3, data, cfg.k, cfg.seed, cfg.kmeans_restarts).metrics->acc;
    return a;
}

}  // namespace rdc
