#include "support.hpp"

#include <gtest/gtest.h>

using namespace rdc;

namespace {

RunConfig quick_config(std::uint64_t seed) {
    RunConfig c = rdc::test::desk_config(seed);
    c.synth.n_per_cluster = 60;
    c.pretrain.iterations = 60;
    c.pretrain.batch = 32;
    c.finetune.batch = 32;
    c.pretrain.arch.hidden = {16, 16, 32};
    c.finetune.max_epochs = 4;
    c.dec_epochs = 3;
    c.kmeans_restarts = 2;
    return c;
}

}  // namespace

TEST(Config, JsonKeysApply) {
    RunConfig c;
    apply_config_json(c, nlohmann::json::parse(R"({"alpha":0.5,"beta":0.3,"m":7,"t1":12,"lr":0.01,"hidden":[4,4],"k":3,"seed":9})"));
    c.propagate_seed();
    EXPECT_EQ(c.finetune.filter.alpha, 0.5);
    EXPECT_EQ(c.finetune.filter.beta, 0.3);
    EXPECT_EQ(c.finetune.filter.M, 7u);
    EXPECT_EQ(c.pretrain.iterations, 12);
    EXPECT_EQ(c.finetune.lr, 0.01);
    EXPECT_EQ(c.pretrain.arch.hidden, (std::vector<std::size_t>{4, 4}));
    EXPECT_EQ(c.k, 3u);
    EXPECT_EQ(c.finetune.seed, 9u);
    EXPECT_THROW(apply_config_json(c, nlohmann::json::parse(R"({"alpah":0.5})")), std::invalid_argument);
    apply_config_json(c, nlohmann::json::parse(R"({"alpha":1.5})"));
    EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(Config, DefaultsFollowPublishedSettings) {
    const RunConfig c;
    EXPECT_EQ(c.pretrain.iterations, 10000);
    EXPECT_EQ(c.pretrain.lr, 1e-3);
    EXPECT_EQ(c.finetune.lr, 1e-3);
    EXPECT_EQ(c.pretrain.arch.hidden, (std::vector<std::size_t>{500, 500, 2000}));
    EXPECT_EQ(c.pretrain.arch.latent, 10u);
    EXPECT_EQ(c.finetune.filter.alpha, 0.8);
    EXPECT_EQ(c.finetune.filter.beta, 1.0);
}

TEST(Pipeline, RunsAreReproducible) {
    const RunConfig c = quick_config(3);
    const Dataset data = load_run_dataset(c);
    const auto a = run_pipeline(data, c);
    const auto b = run_pipeline(data, c);
    EXPECT_EQ(trace_csv(a.finetune_trace), trace_csv(b.finetune_trace));
    EXPECT_EQ(evaluation_json(a.eval_final, c.k), evaluation_json(b.eval_final, c.k));
}

TEST(Pipeline, UnlabelledEvaluationHasNoAccuracy) {
    const RunConfig c = quick_config(4);
    Dataset data = load_run_dataset(c);
    data.labels.reset();
    const auto ev = evaluate_latent(data.X, data.labels, 4, 4);
    const auto j = nlohmann::json::parse(evaluation_json(ev, 4));
    EXPECT_FALSE(j.contains("acc"));
    EXPECT_EQ(j["assignments"].size(), data.size());
}

TEST(Robustness, SixRowsAndCleanRowMatchesPipeline) {
    RunConfig c = quick_config(5);
    c.finetune.max_epochs = 2;
    const Dataset data = load_run_dataset(c);
    const auto rows = run_robustness(data, c);
    ASSERT_EQ(rows.size(), 6u);
    const std::string csv = robustness_csv(rows);
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 7);
    Dataset clean = data;
    clean.X = zscore_normalize(data.X).X;
    const auto p = run_pipeline(clean, c);
    EXPECT_EQ(rows[0].sigma_p, 0.0);
    EXPECT_EQ(rows[0].acc, p.eval_final.metrics->acc);
    EXPECT_EQ(rows[0].f1_macro, p.eval_final.metrics->f1_macro);
    EXPECT_EQ(rows[0].epochs, p.finetune_trace.epochs.size());
}

TEST(Ablation, SharesPretrainedWeights) {
    const RunConfig c = quick_config(6);
    const auto a = run_ablation(load_run_dataset(c), c);
    EXPECT_EQ(a.p3_trace.epochs.size(), 3u);
    EXPECT_GT(a.acc_p1, 0.0);
    EXPECT_EQ(a.ae_p2.decoder.size(), a.ae_p3.decoder.size());
}

TEST(Dec, SoftAssignmentRowsSumToOne) {
    Engine rng = stream(7, "test");
    const Matrix Q = soft_assignments(rdc::test::random_matrix(20, 3, rng), rdc::test::random_matrix(4, 3, rng));
    for (Eigen::Index i = 0; i < Q.rows(); ++i) EXPECT_NEAR(Q.row(i).sum(), 1.0, 1e-14);
    const Matrix P = target_distribution(Q);
    for (Eigen::Index i = 0; i < P.rows(); ++i) EXPECT_NEAR(P.row(i).sum(), 1.0, 1e-14);
}

TEST(Dec, GradientsMatchFiniteDifferences) {
    for (int inst = 0; inst < 10; ++inst) {
        Engine rng = stream(800 + inst, "test");
        Matrix Z = rdc::test::random_matrix(8, 3, rng);
        Matrix C = rdc::test::random_matrix(3, 3, rng);
        const Matrix P = target_distribution(soft_assignments(Z, C));
        const DecLoss l = dec_kl(Z, C, P);
        const double h = 1e-5;
        for (Matrix* m : {&Z, &C}) {
            const Matrix& g = m == &Z ? l.latent_grad : l.center_grad;
            for (Eigen::Index i = 0; i < m->size(); ++i) {
                const double keep = m->data()[i];
                m->data()[i] = keep + h;
                const double up = dec_kl(Z, C, P).loss;
                m->data()[i] = keep - h;
                const double down = dec_kl(Z, C, P).loss;
                m->data()[i] = keep;
                EXPECT_LT(rdc::test::rel_error(g.data()[i], (up - down) / (2 * h)), 1e-4);
            }
        }
    }
}

TEST(Trace, CsvLayoutAndMeta) {
    RunTrace t;
    EpochRecord r;
    r.epoch = 1;
    r.tau = 0.25;
    r.n_core = 5;
    r.lid = 2.0;
    t.epochs.push_back(r);
    t.stop_reason = StopReason::MaxEpochs;
    const std::string csv = trace_csv(t);
    EXPECT_EQ(csv, "epoch,l1,l2,loss,tau,n_core,id,lid,acc\n1,0,0,0,0.25,5,,2,\n");
    const auto path = std::filesystem::temp_directory_path() / "rdc-test-trace" / "t.csv";
    write_trace(t, path);
    const auto meta = nlohmann::json::parse(read_text(path.string() + ".meta.json"));
    EXPECT_EQ(meta["stop_reason"], "max-epochs");
}

// Desk run, seed 1. Recorded core counts per epoch: 43 41 37 39 41.
TEST(Fixture, CoreRatioAtConvergenceNotBelowFirstEpoch) {
    const RunConfig c = rdc::test::desk_config(1);
    const Dataset data = load_run_dataset(c);
    PretrainState s = init_pretrain(data.dim(), c.pretrain);
    pretrain(s, data, c.pretrain);
    const RunTrace trace = finetune(s.ae, data, c.finetune);
    std::vector<std::size_t> counts;
    for (const auto& e : trace.epochs) counts.push_back(e.n_core);
    EXPECT_EQ(counts, (std::vector<std::size_t>{43, 41, 37, 39, 41}));
    EXPECT_GE(trace.epochs.back().tau, trace.epochs.front().tau);
}
