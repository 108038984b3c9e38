// rdc: command-line front end for the two-phase deep clustering pipeline.
//
//   rdc synth      generate the four-arc synthetic dataset
//   rdc pretrain   phase one (autoencoder + interpolation critic)
//   rdc finetune   phase two (proximity-level self-supervision)
//   rdc evaluate   K-means on the latent codes, ACC / F1 as JSON
//   rdc diagnose   TwoNN ID and PCA LID of the latent codes as JSON
//   rdc robustness Z-score + Gaussian noise sweep, one metrics row per level

#include <rdc/rdc.hpp>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace {

// Flags shared by the training/evaluation subcommands. Unset flags leave the
// config file (or built-in default) untouched.
struct Flags {
    std::string config;
    std::optional<std::string> data;
    std::optional<std::string> format;
    bool labels = false;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<long long> t1;
    std::optional<double> lr;
    std::optional<std::size_t> batch;
    std::optional<double> lambda;
    std::optional<std::string> hidden;
    std::optional<std::size_t> latent;
    bool augment = false;
    std::optional<double> alpha;
    std::optional<double> beta;
    std::optional<std::size_t> m;
    std::optional<std::size_t> k;
    std::optional<long long> max_epochs;
    std::optional<long long> stability_window;
    std::optional<int> restarts;
    bool geometry = false;
    bool per_cluster = false;
    std::optional<std::size_t> synth_n;
    std::optional<double> synth_noise;
};

void add_common(CLI::App* app, Flags& f) {
    app->add_option("--config", f.config, "JSON config file; command-line flags override its keys");
    app->add_option("--data", f.data, "dataset path (omit to use the synthetic four-arc set)");
    app->add_option("--format", f.format, "dataset format: csv | raw-f64 (default: by extension)");
    app->add_flag("--labels", f.labels, "CSV: last column holds integer labels");
    app->add_option("--seed", f.seed, "global seed");
    app->add_option("--out", f.out, "output directory");
    app->add_option("--synth-n", f.synth_n, "synthetic points per cluster when --data is absent");
    app->add_option("--synth-noise", f.synth_noise, "synthetic jitter when --data is absent");
    app->add_option("--hidden", f.hidden, "comma-separated hidden widths (default 500,500,2000)");
    app->add_option("--latent", f.latent, "latent dimension (default 10)");
    app->add_option("--lr", f.lr, "Adam learning rate");
    app->add_option("--batch", f.batch, "mini-batch size");
    app->add_flag("--augment", f.augment, "shift/rotate image rows (needs a grid shape in the dataset sidecar)");
}

void add_finetune_flags(CLI::App* app, Flags& f) {
    app->add_option("--alpha", f.alpha, "core-point density threshold, (0, 1]");
    app->add_option("--beta", f.beta, "reliable-neighbour distance threshold, >= 0");
    app->add_option("--m", f.m, "neighbours per point");
    app->add_option("--max-epochs", f.max_epochs, "phase-two epoch cap");
    app->add_option("--stability-window", f.stability_window, "epochs without a new core-count maximum before stopping");
    app->add_flag("--geometry", f.geometry, "record per-epoch ID / LID / ACC in the trace");
    app->add_flag("--per-cluster", f.per_cluster, "average ID / LID over true-label groups");
}

void add_pretrain_flags(CLI::App* app, Flags& f) {
    app->add_option("--t1", f.t1, "pretraining iterations");
    app->add_option("--lambda", f.lambda, "weight of the critic-fooling term");
}

std::vector<std::size_t> parse_widths(const std::string& s) {
    std::vector<std::size_t> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (tok.empty()) continue;
        out.push_back(static_cast<std::size_t>(std::stoul(tok)));
    }
    return out;
}

rdc::RunConfig build_config(const Flags& f) {
    rdc::RunConfig c;
    if (!f.config.empty()) {
        std::ifstream in(f.config);
        if (!in) throw std::invalid_argument("cannot open config " + f.config);
        rdc::apply_config_json(c, nlohmann::json::parse(in));
    }
    if (f.data) c.data_path = *f.data;
    if (f.format) c.data_format = rdc::data_format_from_string(*f.format);
    if (f.labels) c.csv_labels = true;
    if (f.synth_n) c.synth.n_per_cluster = *f.synth_n;
    if (f.synth_noise) c.synth.noise = *f.synth_noise;
    if (f.seed) c.seed = *f.seed;
    if (f.out) c.out = *f.out;
    if (f.t1) c.pretrain.iterations = *f.t1;
    if (f.lr) c.pretrain.lr = c.finetune.lr = *f.lr;
    if (f.batch) c.pretrain.batch = c.finetune.batch = *f.batch;
    if (f.lambda) c.pretrain.lambda = *f.lambda;
    if (f.hidden) c.pretrain.arch.hidden = parse_widths(*f.hidden);
    if (f.latent) c.pretrain.arch.latent = *f.latent;
    if (f.augment) c.pretrain.augment = c.finetune.augment = true;
    if (f.alpha) c.finetune.filter.alpha = *f.alpha;
    if (f.beta) c.finetune.filter.beta = *f.beta;
    if (f.m) c.finetune.filter.M = *f.m;
    if (f.k) c.k = *f.k;
    if (f.max_epochs) c.finetune.max_epochs = *f.max_epochs;
    if (f.stability_window) c.finetune.stability_window = *f.stability_window;
    if (f.restarts) c.kmeans_restarts = *f.restarts;
    if (f.geometry) c.geometry = true;
    if (f.per_cluster) c.geometry_per_cluster = true;
    c.propagate_seed();
    c.validate();
    return c;
}

std::string pretrain_trace_csv(const rdc::PretrainTrace& t) {
    std::ostringstream os;
    os << "iteration,update,loss,reconstruction\n";
    for (const auto& r : t.records)
        os << r.iteration << ',' << (r.ae_step ? "autoencoder" : "critic") << ',' << rdc::format_double(r.loss) << ','
           << (r.ae_step ? rdc::format_double(r.reconstruction) : std::string()) << '\n';
    return os.str();
}

int cmd_synth(std::size_t n, double noise, std::uint64_t seed, const std::string& out, const std::string& format) {
    const rdc::Dataset ds = rdc::gen_curved_clusters(n, noise, seed);
    fs::create_directories(out);
    if (format == "csv") {
        const fs::path p = fs::path(out) / "synth.csv";
        rdc::save_csv(ds, p, true);
        std::cout << p.string() << "\n";
    } else {
        const fs::path p = fs::path(out) / "synth.f64";
        rdc::save_raw(ds, p);
        std::cout << p.string() << "\n";
    }
    return 0;
}

int cmd_pretrain(const Flags& f, const std::string& resume) {
    const rdc::RunConfig c = build_config(f);
    const rdc::Dataset data = rdc::load_run_dataset(c);
    rdc::PretrainState state = resume.empty() ? rdc::init_pretrain(data.dim(), c.pretrain)
                                              : rdc::pretrain_state_from(rdc::load_checkpoint(resume));
    const auto trace = rdc::pretrain(state, data, c.pretrain);
    fs::create_directories(c.out);
    rdc::save_checkpoint(rdc::pretrain_checkpoint(state), c.out / "pretrain.ckpt.json");
    rdc::write_text(c.out / "pretrain_trace.csv", pretrain_trace_csv(trace));
    std::cout << "pretrained " << state.iteration << " iterations -> " << (c.out / "pretrain.ckpt.json").string() << "\n";
    return 0;
}

int cmd_finetune(const Flags& f, const std::string& checkpoint) {
    const rdc::RunConfig c = build_config(f);
    const rdc::Dataset data = rdc::load_run_dataset(c);
    rdc::Checkpoint ck = rdc::load_checkpoint(checkpoint);
    const auto trace = rdc::finetune(ck.ae, data, c.finetune, rdc::make_tracking_hook(c, data, c.geometry));
    fs::create_directories(c.out);
    rdc::Checkpoint out{"finetune", ck.ae, std::nullopt, std::nullopt};
    rdc::save_checkpoint(out, c.out / "finetune.ckpt.json");
    rdc::write_trace(trace, c.out / "finetune_trace.csv");
    std::cout << "finetuned " << trace.epochs.size() << " epochs, stop: " << rdc::to_string(*trace.stop_reason)
              << ", tau = " << trace.epochs.back().tau << "\n";
    return 0;
}

int cmd_evaluate(const Flags& f, const std::string& checkpoint) {
    const rdc::RunConfig c = build_config(f);
    const rdc::Dataset data = rdc::load_run_dataset(c);
    const rdc::Checkpoint ck = rdc::load_checkpoint(checkpoint);
    if (c.k > data.size()) throw std::invalid_argument("K exceeds the number of samples");
    const auto ev = rdc::evaluate(ck.ae, data, c.k, c.seed, c.kmeans_restarts);
    fs::create_directories(c.out);
    const std::string json = rdc::evaluation_json(ev, c.k);
    rdc::write_text(c.out / "metrics.json", json);
    if (ev.metrics)
        std::cout << "acc " << ev.metrics->acc << "  f1_macro " << ev.metrics->f1_macro << "  f1_micro " << ev.metrics->f1_micro << "\n";
    else
        std::cout << "no labels: wrote assignments only\n";
    return 0;
}

int cmd_diagnose(const Flags& f, const std::string& checkpoint) {
    const rdc::RunConfig c = build_config(f);
    const rdc::Dataset data = rdc::load_run_dataset(c);
    rdc::Matrix Z = data.X;
    if (!checkpoint.empty()) Z = rdc::encode(rdc::load_checkpoint(checkpoint).ae, data.X);
    const rdc::GeometryReport g = (c.geometry_per_cluster && data.labels) ? rdc::geometry_report_per_cluster(Z, *data.labels)
                                                                           : rdc::geometry_report(Z);
    const std::string json = rdc::geometry_json(g);
    fs::create_directories(c.out);
    rdc::write_text(c.out / "geometry.json", json);
    std::cout << json;
    return 0;
}

int cmd_robustness(const Flags& f) {
    const rdc::RunConfig c = build_config(f);
    const rdc::Dataset data = rdc::load_run_dataset(c);
    const auto rows = rdc::run_robustness(data, c);
    fs::create_directories(c.out);
    const std::string csv = rdc::robustness_csv(rows);
    rdc::write_text(c.out / "robustness.csv", csv);
    std::cout << csv;
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"rdc: autoencoder pretraining with interpolation critic, proximity-level finetuning, K-means evaluation"};
    app.require_subcommand(1);

    std::size_t synth_n = 500;
    double synth_noise = 0.05;
    std::uint64_t synth_seed = 0;
    std::string synth_out = "rdc-out", synth_format = "raw-f64";
    auto* synth = app.add_subcommand("synth", "write the four-arc synthetic dataset (raw-f64 + JSON sidecar)");
    synth->add_option("--n", synth_n, "points per cluster")->check(CLI::PositiveNumber);
    synth->add_option("--noise", synth_noise, "Gaussian jitter around the arcs");
    synth->add_option("--seed", synth_seed, "seed");
    synth->add_option("--out", synth_out, "output directory");
    synth->add_option("--format", synth_format, "raw-f64 | csv")->check(CLI::IsMember({"raw-f64", "csv"}));

    Flags pf, ff, ef, df, rf;
    std::string resume, ft_ckpt, ev_ckpt, dg_ckpt;

    auto* pre = app.add_subcommand("pretrain", "phase one: autoencoder + critic");
    add_common(pre, pf);
    add_pretrain_flags(pre, pf);
    pre->add_option("--resume", resume, "continue from a pretrain checkpoint");

    auto* fin = app.add_subcommand("finetune", "phase two: proximity-level self-supervision");
    add_common(fin, ff);
    add_finetune_flags(fin, ff);
    fin->add_option("--checkpoint", ft_ckpt, "pretrained checkpoint")->required();
    fin->add_option("--k", ff.k, "clusters for per-epoch ACC");

    auto* ev = app.add_subcommand("evaluate", "K-means on latent codes; writes metrics.json");
    add_common(ev, ef);
    ev->add_option("--checkpoint", ev_ckpt, "checkpoint to evaluate")->required();
    ev->add_option("--k", ef.k, "number of clusters");
    ev->add_option("--restarts", ef.restarts, "K-means restarts (lowest inertia wins)");

    auto* dg = app.add_subcommand("diagnose", "TwoNN ID, PCA LID and their gap; writes geometry.json");
    add_common(dg, df);
    dg->add_option("--checkpoint", dg_ckpt, "checkpoint whose encoder maps the data (omit to diagnose raw inputs)");
    dg->add_flag("--per-cluster", df.per_cluster, "average over true-label groups");

    auto* rb = app.add_subcommand("robustness", "Z-score + Gaussian noise sweep over sigma_p in {0, .05, .10, .15, .20, .25}");
    add_common(rb, rf);
    add_pretrain_flags(rb, rf);
    add_finetune_flags(rb, rf);
    rb->add_option("--k", rf.k, "number of clusters");
    rb->add_option("--restarts", rf.restarts, "K-means restarts");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*synth) return cmd_synth(synth_n, synth_noise, synth_seed, synth_out, synth_format);
        if (*pre) return cmd_pretrain(pf, resume);
        if (*fin) return cmd_finetune(ff, ft_ckpt);
        if (*ev) return cmd_evaluate(ef, ev_ckpt);
        if (*dg) return cmd_diagnose(df, dg_ckpt);
        if (*rb) return cmd_robustness(rf);
    } catch (const std::exception& e) {
        std::cerr << "rdc: error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
