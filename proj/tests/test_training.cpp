#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "dekt/training.hpp"

using namespace dekt;

namespace {

Dataset small_dataset(int students = 12, int length = 8, std::uint64_t seed = 3,
                      bool emotions = true) {
    SyntheticProfile p;
    p.students = students;
    p.length = length;
    p.concepts = 4;
    p.exercises = 8;
    p.seed = seed;
    p.emit_emotions = emotions;
    return make_dataset(simulate(p), length, 20);
}

TrainConfig small_config() {
    TrainConfig cfg;
    cfg.d_k = 4;
    cfg.bins = 20;
    cfg.length = 8;
    cfg.batch_size = 4;
    cfg.epochs = 2;
    cfg.folds = 3;
    cfg.seed = 9;
    return cfg;
}

FoldSplit first_fold(const Dataset& d, const TrainConfig& cfg) {
    std::set<std::string> ids;
    for (const auto& s : d.sequences) ids.insert(s.student_id);
    return split_folds({ids.begin(), ids.end()}, cfg.folds, cfg.val_fraction, cfg.seed).front();
}

// O(n^2) pairwise AUC used as the oracle
double brute_auc(const std::vector<double>& s, const std::vector<double>& l) {
    double num = 0.0;
    long long pairs = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (l[i] < 0.5) continue;
        for (std::size_t j = 0; j < s.size(); ++j) {
            if (l[j] > 0.5) continue;
            ++pairs;
            if (s[i] > s[j]) num += 1.0;
            else if (s[i] == s[j]) num += 0.5;
        }
    }
    return num / static_cast<double>(pairs);
}

} // namespace

TEST_CASE("train config validation") {
    TrainConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    TrainConfig bad = cfg;
    bad.learning_rate = 0.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = cfg;
    bad.dropout = 1.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = cfg;
    bad.folds = 1;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = cfg;
    bad.length = 1;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("response loss at maximum uncertainty is ln 2") {
    Graph g;
    PredBatch b;
    b.y_nodes.push_back(g.constant(Array::vec({0.5})));
    b.a_targets.push_back(1.0);
    NodeId loss = joint_loss(g, b, false);
    CHECK(g.value(loss).at(0) == doctest::Approx(std::log(2.0)));
}

TEST_CASE("joint loss adds the summed emotion error") {
    Graph g;
    PredBatch b;
    b.y_nodes.push_back(g.constant(Array::vec({0.5})));
    b.a_targets.push_back(0.0);
    b.g_nodes.push_back(g.constant(Array::vec({0.5, 0.5, 0.5, 0.5})));
    b.v_targets.push_back({0.7, 0.5, 0.5, 0.1});
    NodeId loss = joint_loss(g, b, true);
    double expected = std::log(2.0) + (0.04 + 0.16);
    CHECK(g.value(loss).at(0) == doctest::Approx(expected));
    PredBatch empty;
    CHECK_THROWS_AS(joint_loss(g, empty, false), std::invalid_argument);
}

TEST_CASE("loss clamps saturated probabilities") {
    Graph g;
    PredBatch b;
    b.y_nodes.push_back(g.constant(Array::vec({1.0})));
    b.a_targets.push_back(0.0);
    NodeId loss = joint_loss(g, b, false);
    CHECK(std::isfinite(g.value(loss).at(0)));
    CHECK(g.value(loss).at(0) == doctest::Approx(-std::log(1e-7)));
}

TEST_CASE("first optimizer update has closed form") {
    ParameterStore p;
    p.add("w", Array::vec({0.0}));
    AdamState opt;
    std::map<std::string, Array> grads;
    grads.emplace("w", Array::vec({0.5}));
    adam_step(p, grads, opt, 0.002);
    // bias correction makes the first step size equal the learning rate
    CHECK(p.at("w").at(0) == doctest::Approx(-0.002).epsilon(1e-6));
}

TEST_CASE("optimizer respects freeze sets") {
    ParameterStore p;
    p.add("frozen", Array::vec({1.0}));
    p.frozen.insert("frozen");
    p.add("table", Array({2, 2}, {0, 0, 1, 1}));
    p.freeze_row0.insert("table");
    AdamState opt;
    std::map<std::string, Array> grads;
    grads.emplace("frozen", Array::vec({3.0}));
    grads.emplace("table", Array({2, 2}, 1.0));
    adam_step(p, grads, opt, 0.1);
    CHECK(p.at("frozen").at(0) == 1.0);
    CHECK(p.at("table").at(0, 0) == 0.0);
    CHECK(p.at("table").at(0, 1) == 0.0);
    CHECK(p.at("table").at(1, 0) != 1.0);

    std::map<std::string, Array> bad;
    bad.emplace("table", Array({2, 2}, std::nan("")));
    CHECK_THROWS_AS(adam_step(p, bad, opt, 0.1), std::runtime_error);
}

TEST_CASE("optimizer minimizes a convex quadratic") {
    ParameterStore p;
    p.add("w", Array::vec({5.0}));
    AdamState opt;
    for (int i = 0; i < 400; ++i) {
        Graph g;
        NodeId w = g.parameter("w", p.at("w"));
        NodeId d = g.add(w, g.constant(Array::vec({-1.0})));
        auto grads = g.backward(g.reduce_sum(g.mul(d, d)));
        adam_step(p, grads, opt, 0.05);
    }
    CHECK(p.at("w").at(0) == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("ranking metric matches brute-force pairwise counting") {
    CHECK(brute_auc({0.9, 0.8, 0.3}, {1, 0, 1}) == 0.5);
    EvalArrays ex;
    ex.scores = {0.9, 0.8, 0.3};
    ex.labels = {1, 0, 1};
    CHECK(*compute_metrics(ex).auc == 0.5);

    Rng rng(13);
    for (int trial = 0; trial < 200; ++trial) {
        int n = 2 + rng.uniform_int(40);
        EvalArrays a;
        bool pos = false, neg = false;
        for (int i = 0; i < n; ++i) {
            // coarse grid so ties actually occur
            a.scores.push_back(rng.uniform_int(10) / 10.0);
            double l = rng.bernoulli(0.5) ? 1.0 : 0.0;
            (l > 0.5 ? pos : neg) = true;
            a.labels.push_back(l);
        }
        auto m = compute_metrics(a);
        if (!pos || !neg) {
            CHECK(!m.auc.has_value());
        } else {
            REQUIRE(m.auc.has_value());
            CHECK(*m.auc == doctest::Approx(brute_auc(a.scores, a.labels)).epsilon(1e-12));
        }
    }
}

TEST_CASE("scalar metrics on fixed cases") {
    EvalArrays perfect;
    perfect.scores = {1, 0, 1, 0};
    perfect.labels = {1, 0, 1, 0};
    auto m1 = compute_metrics(perfect);
    CHECK(m1.rmse == 0.0);
    CHECK(m1.acc == 1.0);
    CHECK(m1.r2 == doctest::Approx(1.0));

    EvalArrays mid;
    mid.scores = {0.8, 0.4, 0.6};
    mid.labels = {1, 0, 0};
    auto m2 = compute_metrics(mid);
    CHECK(m2.rmse == doctest::Approx(std::sqrt(0.56 / 3.0)));
    CHECK(m2.acc == doctest::Approx(2.0 / 3.0));
    CHECK(m2.r2 == doctest::Approx(0.75));

    EvalArrays flat;
    flat.scores = {0.5, 0.5};
    flat.labels = {1, 0};
    auto m3 = compute_metrics(flat);
    CHECK(m3.acc == 0.5);  // 0.5 rounds up to a positive call
    CHECK(m3.r2 == 0.0);   // zero score variance
    CHECK(*m3.auc == 0.5);

    EvalArrays bad;
    CHECK_THROWS_AS(compute_metrics(bad), std::invalid_argument);
}

TEST_CASE("per-emotion error is reported separately") {
    EvalArrays a;
    a.scores = {0.5};
    a.labels = {1};
    a.has_emotion = true;
    a.g_preds = {{0.5, 0.5, 0.5, 0.5}, {0.5, 0.5, 0.5, 0.5}};
    a.v_truth = {{0.5, 0.6, 0.7, 0.9}, {0.5, 0.4, 0.3, 0.5}};
    auto m = compute_metrics(a);
    REQUIRE(m.has_emotion);
    CHECK(m.emotion_rmse[0] == 0.0);
    CHECK(m.emotion_rmse[1] == doctest::Approx(0.1));
    CHECK(m.emotion_rmse[2] == doctest::Approx(0.2));
    CHECK(m.emotion_rmse[3] == doctest::Approx(std::sqrt((0.16 + 0.0) / 2.0)));
    CHECK(m.emotion_rmse_mean ==
          doctest::Approx((m.emotion_rmse[0] + m.emotion_rmse[1] + m.emotion_rmse[2] +
                           m.emotion_rmse[3]) / 4.0));
}

TEST_CASE("padded steps change nothing") {
    Dataset data = small_dataset(4, 6);
    TrainConfig cfg = small_config();
    cfg.length = 6;
    ModelConfig mc = model_config_for(cfg, data);
    mc.dropout = 0.0;
    Rng rng(1);
    auto params = init_parameters(mc, rng);

    auto run = [&](const std::vector<StudentSequence>& seqs) {
        Graph g;
        g.register_parameters(params);
        DektCell cell(g, mc, true);
        PredBatch batch;
        for (const auto& s : seqs) unroll_sequence(g, cell, s, data.qmatrix, false, nullptr, batch);
        NodeId loss = joint_loss(g, batch, true);
        auto grads = g.backward(loss);
        return std::make_pair(g.value(loss).at(0), grads);
    };

    auto padded = data.sequences;
    for (auto& s : padded) {
        s.length += 10;
        s.exercise.resize(s.exercise.size() + 10, 0);
        s.concepts.resize(s.concepts.size() + 10, 0);
        s.answer_time.resize(s.answer_time.size() + 10, 0);
        s.interval_time.resize(s.interval_time.size() + 10, 0);
        s.answer.resize(s.answer.size() + 10, 0);
        for (auto& e : s.emotion_bins) e.resize(e.size() + 10, 0);
        s.emotion_raw.resize(s.emotion_raw.size() + 10, {0, 0, 0, 0});
        s.mask.resize(s.mask.size() + 10, 0);
    }

    auto [loss_a, grads_a] = run(data.sequences);
    auto [loss_b, grads_b] = run(padded);
    CHECK(loss_a == loss_b);
    REQUIRE(grads_a.size() == grads_b.size());
    for (const auto& [name, ga] : grads_a) CHECK(ga.data == grads_b.at(name).data);
}

TEST_CASE("sequences shorter than two steps are skipped") {
    Dataset data = small_dataset(3, 5);
    TrainConfig cfg = small_config();
    cfg.length = 5;
    ModelConfig mc = model_config_for(cfg, data);
    Rng rng(2);
    auto params = init_parameters(mc, rng);
    Graph g;
    g.register_parameters(params);
    DektCell cell(g, mc, false);
    StudentSequence stub = data.sequences.front();
    stub.real_length = 1;
    PredBatch batch;
    unroll_sequence(g, cell, stub, data.qmatrix, false, nullptr, batch);
    CHECK(batch.count() == 0);

    PredBatch full;
    unroll_sequence(g, cell, data.sequences.front(), data.qmatrix, false, nullptr, full);
    CHECK(full.count() == data.sequences.front().real_length - 1);
}

TEST_CASE("training runs, records history, and is deterministic") {
    Dataset data = small_dataset();
    TrainConfig cfg = small_config();
    FoldSplit fold = first_fold(data, cfg);

    auto r1 = train(cfg, data, fold);
    auto r2 = train(cfg, data, fold);
    CHECK(r1.history.size() == r2.history.size());
    REQUIRE(!r1.history.empty());
    CHECK(r1.history[0].train_loss == r2.history[0].train_loss);
    CHECK(r1.best_epoch == r2.best_epoch);
    for (const auto& name : r1.params.order)
        CHECK(r1.params.at(name).data == r2.params.at(name).data);
    CHECK(r1.test.n_steps > 0);
    CHECK(r1.test.has_emotion);

    TrainConfig other = cfg;
    other.seed = cfg.seed + 1;
    auto r3 = train(other, data, fold);
    bool any_diff = false;
    for (const auto& name : r1.params.order)
        any_diff = any_diff || r1.params.at(name).data != r3.params.at(name).data;
    CHECK(any_diff);
}

TEST_CASE("training loss decreases on a learnable dataset") {
    Dataset data = small_dataset(16, 10, 5);
    TrainConfig cfg = small_config();
    cfg.length = 10;
    cfg.epochs = 6;
    cfg.patience = 6;
    FoldSplit fold = first_fold(data, cfg);
    auto r = train(cfg, data, fold);
    REQUIRE(r.history.size() >= 2);
    CHECK(r.history.back().train_loss < r.history.front().train_loss);
}

TEST_CASE("emotion regime is enforced") {
    Dataset with = small_dataset();
    Dataset without = small_dataset(12, 8, 3, /*emotions=*/false);
    TrainConfig cfg = small_config();
    FoldSplit fold = first_fold(with, cfg);

    TrainConfig transfer = cfg;
    transfer.transfer_mode = true;
    CHECK_THROWS_AS(train(transfer, with, fold), std::invalid_argument);
    CHECK_THROWS_AS(train(cfg, without, fold), std::invalid_argument);
}

TEST_CASE("ablation selector trains the requested variant") {
    Dataset data = small_dataset();
    TrainConfig cfg = small_config();
    cfg.epochs = 1;
    FoldSplit fold = first_fold(data, cfg);
    auto m = run_ablation("no-gain", cfg, data, fold);
    CHECK(m.n_steps > 0);
    CHECK_THROWS_AS(run_ablation("nope", cfg, data, fold), std::invalid_argument);
}

TEST_CASE("bin sweep retrains per discretization level") {
    SyntheticProfile p;
    p.students = 10;
    p.length = 6;
    p.concepts = 3;
    p.exercises = 6;
    p.seed = 4;
    auto records = simulate(p);
    TrainConfig cfg = small_config();
    cfg.length = 6;
    cfg.epochs = 1;
    auto rows = sweep_bins({5, 50}, cfg, records);
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].bins == 5);
    CHECK(rows[1].bins == 50);
    CHECK(rows[0].metrics.n_steps > 0);
    CHECK_THROWS_AS(sweep_bins({0}, cfg, records), std::invalid_argument);
}
