#include "dekt/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace dekt {

void TrainConfig::validate() const {
    if (d_k <= 0 || bins <= 0 || length < 2 || batch_size <= 0 || epochs <= 0)
        throw std::invalid_argument("TrainConfig: sizes must be positive");
    if (learning_rate <= 0.0) throw std::invalid_argument("TrainConfig: learning rate must be positive");
    if (dropout < 0.0 || dropout >= 1.0) throw std::invalid_argument("TrainConfig: dropout outside [0,1)");
    if (folds < 2) throw std::invalid_argument("TrainConfig: folds must be >= 2");
}

void adam_step(ParameterStore& params, const std::map<std::string, Array>& grads,
               AdamState& opt, double lr) {
    ++opt.step;
    double c1 = 1.0 - std::pow(opt.beta1, static_cast<double>(opt.step));
    double c2 = 1.0 - std::pow(opt.beta2, static_cast<double>(opt.step));
    for (const auto& name : params.order) {
        if (params.frozen.count(name)) continue;
        auto git = grads.find(name);
        if (git == grads.end()) continue;
        Array grad = git->second;
        if (!grad.all_finite()) throw std::runtime_error("non-finite gradient for parameter " + name);
        Array& theta = params.at(name);
        if (params.freeze_row0.count(name)) {
            for (int j = 0; j < theta.cols(); ++j) grad.at(0, j) = 0.0;
        }
        Array& m = opt.m.try_emplace(name, Array(theta.shape, 0.0)).first->second;
        Array& v = opt.v.try_emplace(name, Array(theta.shape, 0.0)).first->second;
        for (int i = 0; i < theta.size(); ++i) {
            double gi = grad.at(i);
            m.at(i) = opt.beta1 * m.at(i) + (1.0 - opt.beta1) * gi;
            v.at(i) = opt.beta2 * v.at(i) + (1.0 - opt.beta2) * gi * gi;
            double mhat = m.at(i) / c1;
            double vhat = v.at(i) / c2;
            theta.at(i) -= lr * mhat / (std::sqrt(vhat) + opt.epsilon);
        }
    }
}

NodeId joint_loss(Graph& g, const PredBatch& batch, bool with_emotion) {
    if (batch.count() == 0) throw std::invalid_argument("joint_loss: empty batch");
    const double lo = 1e-7, hi = 1.0 - 1e-7;
    NodeId one = g.constant(Array::scalar(1.0));
    NodeId ce_sum = -1;
    for (int i = 0; i < batch.count(); ++i) {
        NodeId y = batch.y_nodes[static_cast<std::size_t>(i)];
        NodeId term;
        if (batch.a_targets[static_cast<std::size_t>(i)] > 0.5) {
            term = g.scale(g.log_clamped(y, lo, hi), -1.0);
        } else {
            NodeId one_minus = g.add(one, g.scale(y, -1.0));
            term = g.scale(g.log_clamped(one_minus, lo, hi), -1.0);
        }
        ce_sum = ce_sum < 0 ? term : g.add(ce_sum, term);
    }
    NodeId loss = g.scale(ce_sum, 1.0 / batch.count());

    if (with_emotion) {
        if (batch.g_nodes.size() != batch.y_nodes.size())
            throw std::invalid_argument("joint_loss: emotion predictions misaligned");
        NodeId mse_sum = -1;
        for (int i = 0; i < batch.count(); ++i) {
            const auto& v = batch.v_targets[static_cast<std::size_t>(i)];
            NodeId neg_v = g.constant(Array::vec({-v[0], -v[1], -v[2], -v[3]}));
            NodeId diff = g.add(batch.g_nodes[static_cast<std::size_t>(i)], neg_v);
            NodeId sq = g.reduce_sum(g.mul(diff, diff));
            mse_sum = mse_sum < 0 ? sq : g.add(mse_sum, sq);
        }
        loss = g.add(loss, g.scale(mse_sum, 1.0 / batch.count()));
    }
    return loss;
}

void unroll_sequence(Graph& g, DektCell& cell, const StudentSequence& seq, const QMatrix& qm,
                     bool self_loop, Rng* g0_rng, PredBatch& out, std::vector<StepTrace>* trace) {
    if (seq.real_length < 2) return;
    NodeId h = cell.initial_h();
    NodeId f = cell.initial_f();
    NodeId prev_g = -1;
    std::array<double, 4> g0{};
    if (self_loop) {
        if (!g0_rng) throw std::invalid_argument("unroll_sequence: self-loop needs an rng for g0");
        for (auto& v : g0) v = g0_rng->uniform01();
    }

    for (int t = 0; t + 1 < seq.real_length; ++t) {
        auto ti = static_cast<std::size_t>(t);
        StepInput in;
        in.exercise = seq.exercise[ti];
        in.answer_time = seq.answer_time[ti];
        in.interval_time = seq.interval_time[ti];
        in.answer = seq.answer[ti];
        in.emotion_bins = {seq.emotion_bins[0][ti], seq.emotion_bins[1][ti],
                           seq.emotion_bins[2][ti], seq.emotion_bins[3][ti]};
        in.emotion_raw = seq.emotion_raw[ti];
        in.next_exercise = seq.exercise[ti + 1];
        in.q = &qm.row(in.exercise);
        in.q_next = &qm.row(in.next_exercise);

        NodeId cm;
        if (self_loop) {
            cm = prev_g < 0 ? cell.cm_from_values(g0) : cell.cm_from_prediction(prev_g);
        } else {
            cm = cell.observed_cm(in);
        }
        StepNodes sn = cell.step(h, f, cm, in);
        h = sn.h;
        f = sn.f;
        prev_g = sn.g;

        out.y_nodes.push_back(sn.y);
        out.a_targets.push_back(seq.answer[ti + 1] == 2 ? 1.0 : 0.0);
        out.g_nodes.push_back(sn.g);
        out.v_targets.push_back(seq.emotion_raw[ti + 1]);

        if (trace) {
            StepTrace st;
            st.t = t + 1;
            st.exercise_index = in.next_exercise;
            st.y = g.value(sn.y).at(0);
            const Array& gv = g.value(sn.g);
            st.g = {gv.at(0), gv.at(1), gv.at(2), gv.at(3)};
            const std::vector<double>& qn = *in.q_next;
            const Array& hv = g.value(sn.h);
            double norm = 0.0;
            for (int c = 0; c < hv.rows(); ++c) {
                if (qn[static_cast<std::size_t>(c)] == 0.0) continue;
                for (int j = 0; j < hv.cols(); ++j) {
                    double x = qn[static_cast<std::size_t>(c)] * hv.at(c, j);
                    norm += x * x;
                }
            }
            st.h_related_norm = std::sqrt(norm);
            trace->push_back(st);
        }
    }
}

namespace {

// average-rank AUC with ties counted half
std::optional<double> rank_auc(const std::vector<double>& scores, const std::vector<double>& labels) {
    int n = static_cast<int>(scores.size());
    std::vector<int> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(),
              [&](int a, int b) { return scores[static_cast<std::size_t>(a)] < scores[static_cast<std::size_t>(b)]; });
    long long n_pos = 0;
    for (double l : labels) n_pos += l > 0.5 ? 1 : 0;
    long long n_neg = n - n_pos;
    if (n_pos == 0 || n_neg == 0) return std::nullopt;

    double rank_sum_pos = 0.0;
    int i = 0;
    while (i < n) {
        int j = i;
        while (j < n && scores[static_cast<std::size_t>(idx[static_cast<std::size_t>(j)])] ==
                            scores[static_cast<std::size_t>(idx[static_cast<std::size_t>(i)])])
            ++j;
        double avg_rank = (i + 1 + j) / 2.0;  // 1-based average rank of the tie group
        for (int k = i; k < j; ++k)
            if (labels[static_cast<std::size_t>(idx[static_cast<std::size_t>(k)])] > 0.5)
                rank_sum_pos += avg_rank;
        i = j;
    }
    double u = rank_sum_pos - static_cast<double>(n_pos) * (n_pos + 1) / 2.0;
    return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

} // namespace

MetricsReport compute_metrics(const EvalArrays& arrays) {
    const auto& s = arrays.scores;
    const auto& l = arrays.labels;
    if (s.size() != l.size() || s.empty())
        throw std::invalid_argument("compute_metrics: empty or misaligned inputs");
    int n = static_cast<int>(s.size());

    MetricsReport r;
    r.n_steps = n;
    r.auc = rank_auc(s, l);

    double se = 0.0;
    int correct = 0;
    for (int i = 0; i < n; ++i) {
        double d = s[static_cast<std::size_t>(i)] - l[static_cast<std::size_t>(i)];
        se += d * d;
        int pred = s[static_cast<std::size_t>(i)] >= 0.5 ? 1 : 0;
        if (pred == (l[static_cast<std::size_t>(i)] > 0.5 ? 1 : 0)) ++correct;
    }
    r.rmse = std::sqrt(se / n);
    r.acc = static_cast<double>(correct) / n;

    double ms = std::accumulate(s.begin(), s.end(), 0.0) / n;
    double ml = std::accumulate(l.begin(), l.end(), 0.0) / n;
    double cov = 0.0, vs = 0.0, vl = 0.0;
    for (int i = 0; i < n; ++i) {
        double ds = s[static_cast<std::size_t>(i)] - ms;
        double dl = l[static_cast<std::size_t>(i)] - ml;
        cov += ds * dl;
        vs += ds * ds;
        vl += dl * dl;
    }
    r.r2 = (vs > 0.0 && vl > 0.0) ? (cov * cov) / (vs * vl) : 0.0;

    if (arrays.has_emotion && !arrays.g_preds.empty()) {
        r.has_emotion = true;
        double mean = 0.0;
        for (int e = 0; e < 4; ++e) {
            double sum = 0.0;
            for (std::size_t i = 0; i < arrays.g_preds.size(); ++i) {
                double d = arrays.g_preds[i][static_cast<std::size_t>(e)] -
                           arrays.v_truth[i][static_cast<std::size_t>(e)];
                sum += d * d;
            }
            r.emotion_rmse[static_cast<std::size_t>(e)] =
                std::sqrt(sum / static_cast<double>(arrays.g_preds.size()));
            mean += r.emotion_rmse[static_cast<std::size_t>(e)];
        }
        r.emotion_rmse_mean = mean / 4.0;
    }
    return r;
}

Dataset make_dataset(const std::vector<InteractionRecord>& records, int length, int bins,
                     bool multi_hot_q) {
    Dataset d;
    d.bins = bins;
    d.has_emotions = dataset_has_emotions(records);
    d.vocab = build_vocabulary(records);
    d.sequences = build_sequences(records, length, d.vocab, bins);
    d.qmatrix = build_qmatrix(records, d.vocab, multi_hot_q);
    return d;
}

ModelConfig model_config_for(const TrainConfig& cfg, const Dataset& data) {
    ModelConfig mc;
    mc.d_k = cfg.d_k;
    mc.bins = cfg.bins;
    mc.n_exercises = data.vocab.n_exercises();
    mc.n_concepts = data.vocab.n_concepts();
    mc.n_answer_time = data.vocab.n_answer_time();
    mc.n_interval_time = data.vocab.n_interval_time();
    mc.variant = cfg.variant;
    mc.dropout = cfg.dropout;
    return mc;
}

EvalArrays evaluate_model(const ParameterStore& params, const ModelConfig& cfg,
                          const std::vector<const StudentSequence*>& seqs, const QMatrix& qm,
                          bool self_loop, std::uint64_t seed) {
    EvalArrays out;
    Rng g0_rng(seed);
    for (const StudentSequence* seq : seqs) {
        if (seq->real_length < 2) continue;
        Graph g;
        g.register_parameters(params);
        DektCell cell(g, cfg, /*training=*/false);
        PredBatch batch;
        unroll_sequence(g, cell, *seq, qm, self_loop, &g0_rng, batch);
        for (int i = 0; i < batch.count(); ++i) {
            out.scores.push_back(g.value(batch.y_nodes[static_cast<std::size_t>(i)]).at(0));
            out.labels.push_back(batch.a_targets[static_cast<std::size_t>(i)]);
            if (seq->has_emotions) {
                const Array& gv = g.value(batch.g_nodes[static_cast<std::size_t>(i)]);
                out.g_preds.push_back({gv.at(0), gv.at(1), gv.at(2), gv.at(3)});
                out.v_truth.push_back(batch.v_targets[static_cast<std::size_t>(i)]);
            }
        }
        if (seq->has_emotions) out.has_emotion = true;
    }
    return out;
}

namespace {

std::vector<const StudentSequence*> select_sequences(const Dataset& data,
                                                     const std::vector<std::string>& students) {
    std::set<std::string> ids(students.begin(), students.end());
    std::vector<const StudentSequence*> out;
    for (const auto& s : data.sequences)
        if (ids.count(s.student_id)) out.push_back(&s);
    return out;
}

} // namespace

TrainResult train(const TrainConfig& cfg, const Dataset& data, const FoldSplit& fold,
                  const ParameterStore* init) {
    cfg.validate();
    if (data.sequences.empty()) throw std::invalid_argument("train: empty dataset");
    if (cfg.transfer_mode && data.has_emotions)
        throw std::invalid_argument("train: transfer mode expects an emotionless dataset");
    if (!cfg.transfer_mode && !data.has_emotions)
        throw std::invalid_argument("train: dataset has no emotions; use transfer mode");

    ModelConfig mc = model_config_for(cfg, data);
    Rng rng(cfg.seed);
    ParameterStore params = init ? *init : init_parameters(mc, rng);
    AdamState opt;

    auto train_seqs = select_sequences(data, fold.train);
    auto val_seqs = select_sequences(data, fold.validation);
    auto test_seqs = select_sequences(data, fold.test);
    if (train_seqs.empty()) throw std::invalid_argument("train: no training sequences in fold");

    bool with_emotion = data.has_emotions && !cfg.transfer_mode;
    bool self_loop = cfg.transfer_mode;

    TrainResult result;
    double best_score = -1e300;
    int since_best = 0;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng.shuffle(train_seqs);
        double loss_sum = 0.0;
        long pred_count = 0;
        for (std::size_t start = 0; start < train_seqs.size();
             start += static_cast<std::size_t>(cfg.batch_size)) {
            std::size_t end = std::min(train_seqs.size(), start + static_cast<std::size_t>(cfg.batch_size));
            Graph g(&rng);
            g.register_parameters(params);
            DektCell cell(g, mc, /*training=*/true);
            PredBatch batch;
            for (std::size_t i = start; i < end; ++i)
                unroll_sequence(g, cell, *train_seqs[i], data.qmatrix, self_loop, &rng, batch);
            if (batch.count() == 0) continue;
            NodeId loss = joint_loss(g, batch, with_emotion);
            double loss_value = g.value(loss).at(0);
            if (!std::isfinite(loss_value))
                throw std::runtime_error("train: divergence (non-finite loss) at epoch " +
                                         std::to_string(epoch) + ", batch " +
                                         std::to_string(start / static_cast<std::size_t>(cfg.batch_size)));
            auto grads = g.backward(loss);
            adam_step(params, grads, opt, cfg.learning_rate);
            loss_sum += loss_value * batch.count();
            pred_count += batch.count();
        }

        EpochStats stats;
        stats.epoch = epoch;
        stats.train_loss = pred_count > 0 ? loss_sum / static_cast<double>(pred_count) : 0.0;
        if (!val_seqs.empty()) {
            auto arrays = evaluate_model(params, mc, val_seqs, data.qmatrix, self_loop, cfg.seed);
            stats.val = compute_metrics(arrays);
        }
        result.history.push_back(stats);

        double score = stats.val.auc ? *stats.val.auc : -stats.val.rmse;
        if (val_seqs.empty()) score = -stats.train_loss;
        if (score > best_score) {
            best_score = score;
            result.params = params;
            result.best_epoch = epoch;
            since_best = 0;
        } else if (++since_best >= cfg.patience) {
            break;
        }
    }
    if (result.best_epoch < 0) {
        result.params = params;
        result.best_epoch = static_cast<int>(result.history.size()) - 1;
    }

    if (!test_seqs.empty()) {
        auto arrays = evaluate_model(result.params, mc, test_seqs, data.qmatrix, self_loop, cfg.seed);
        result.test = compute_metrics(arrays);
    }
    return result;
}

MetricsReport run_ablation(const std::string& variant, TrainConfig cfg, const Dataset& data,
                           const FoldSplit& fold) {
    cfg.variant = variant_from_string(variant);
    return train(cfg, data, fold).test;
}

std::vector<SweepRow> sweep_bins(const std::vector<int>& bin_counts, TrainConfig cfg,
                                 const std::vector<InteractionRecord>& records) {
    std::vector<SweepRow> out;
    for (int bins : bin_counts) {
        if (bins < 1) throw std::invalid_argument("sweep_bins: bins must be >= 1");
        TrainConfig c = cfg;
        c.bins = bins;
        Dataset data = make_dataset(records, c.length, bins, c.multi_hot_q);
        std::set<std::string> ids;
        for (const auto& r : records) ids.insert(r.student_id);
        std::vector<std::string> students(ids.begin(), ids.end());
        auto folds = split_folds(students, c.folds, c.val_fraction, c.seed);
        SweepRow row;
        row.bins = bins;
        row.metrics = train(c, data, folds.front()).test;
        out.push_back(std::move(row));
    }
    return out;
}

} // namespace dekt
