#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dekt/data.hpp"
#include "dekt/model.hpp"

namespace dekt {

struct TrainConfig {
    int d_k = 128;
    int bins = 1000;
    int length = 100;
    int batch_size = 32;
    int epochs = 100;
    double learning_rate = 0.002;
    double dropout = 0.2;
    double val_fraction = 0.2;
    std::uint64_t seed = 0;
    Variant variant = Variant::Full;
    int folds = 5;
    int patience = 5;
    bool transfer_mode = false;  // self-loop input, response loss only
    bool multi_hot_q = false;
    void validate() const;
};

struct MetricsReport {
    double rmse = 0.0;
    std::optional<double> auc;  // absent when labels are degenerate
    double acc = 0.0;
    double r2 = 0.0;
    std::array<double, 4> emotion_rmse{};
    double emotion_rmse_mean = 0.0;
    bool has_emotion = false;
    int n_steps = 0;
};

struct AdamState {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    long step = 0;
    std::unordered_map<std::string, Array> m;
    std::unordered_map<std::string, Array> v;
};

void adam_step(ParameterStore& params, const std::map<std::string, Array>& grads,
               AdamState& opt, double lr);

// Predictions collected while unrolling one or more sequences in a graph.
struct PredBatch {
    std::vector<NodeId> y_nodes;
    std::vector<double> a_targets;
    std::vector<NodeId> g_nodes;
    std::vector<std::array<double, 4>> v_targets;
    int count() const { return static_cast<int>(y_nodes.size()); }
};

// Mean cross-entropy plus (optionally) mean squared emotion error.
NodeId joint_loss(Graph& g, const PredBatch& batch, bool with_emotion);

struct StepTrace {
    int t = 0;
    int exercise_index = 0;
    double y = 0.0;
    std::array<double, 4> g{};
    double h_related_norm = 0.0;
};

// Unrolls the valid prefix of a sequence; masked steps are skipped entirely.
// In self-loop mode the first cm comes from a uniform random 4-vector drawn
// from g0_rng and later steps feed on the model's own predictions.
void unroll_sequence(Graph& g, DektCell& cell, const StudentSequence& seq, const QMatrix& qm,
                     bool self_loop, Rng* g0_rng, PredBatch& out,
                     std::vector<StepTrace>* trace = nullptr);

struct EvalArrays {
    std::vector<double> scores, labels;
    std::vector<std::array<double, 4>> g_preds, v_truth;
    bool has_emotion = false;
};

MetricsReport compute_metrics(const EvalArrays& arrays);

struct Dataset {
    std::vector<StudentSequence> sequences;
    QMatrix qmatrix;
    Vocabulary vocab;
    int bins = 1000;
    bool has_emotions = false;
};

Dataset make_dataset(const std::vector<InteractionRecord>& records, int length, int bins,
                     bool multi_hot_q = false);

ModelConfig model_config_for(const TrainConfig& cfg, const Dataset& data);

EvalArrays evaluate_model(const ParameterStore& params, const ModelConfig& cfg,
                          const std::vector<const StudentSequence*>& seqs, const QMatrix& qm,
                          bool self_loop, std::uint64_t seed);

struct EpochStats {
    int epoch = 0;
    double train_loss = 0.0;
    MetricsReport val;
};

struct TrainResult {
    ParameterStore params;  // best-validation checkpoint
    std::vector<EpochStats> history;
    MetricsReport test;
    int best_epoch = -1;
};

// Mini-batch Adam on the joint objective over one fold. When `init` is given
// it supplies the starting parameters (transfer training).
TrainResult train(const TrainConfig& cfg, const Dataset& data, const FoldSplit& fold,
                  const ParameterStore* init = nullptr);

MetricsReport run_ablation(const std::string& variant, TrainConfig cfg, const Dataset& data,
                           const FoldSplit& fold);

struct SweepRow {
    int bins = 0;
    MetricsReport metrics;
};

// Retrains per bin count with rebuilt emotion vocabularies.
std::vector<SweepRow> sweep_bins(const std::vector<int>& bin_counts, TrainConfig cfg,
                                 const std::vector<InteractionRecord>& records);

} // namespace dekt
