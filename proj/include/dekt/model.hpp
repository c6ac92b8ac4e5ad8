#pragma once

#include <array>
#include <string>

#include "dekt/graph.hpp"

namespace dekt {

enum class Variant { Full, NoEmbedding, NoGain, NoExpression, NoExercise, NoInteraction };

Variant variant_from_string(const std::string& s);
std::string variant_to_string(Variant v);

struct ModelConfig {
    int d_k = 128;
    int bins = 1000;
    int n_exercises = 0;     // without padding
    int n_concepts = 0;      // M
    int n_answer_time = 0;
    int n_interval_time = 0;
    Variant variant = Variant::Full;
    double dropout = 0.2;

    int cm_dim() const { return variant == Variant::NoEmbedding ? 4 : d_k; }
};

// Fresh parameter set, uniform in [-sqrt(1/d_k), sqrt(1/d_k)], padding rows
// zeroed and excluded from updates. Insertion order is the checkpoint order.
ParameterStore init_parameters(const ModelConfig& cfg, Rng& rng);

struct StepInput {
    int exercise = 0;
    int answer_time = 0;
    int interval_time = 0;
    int answer = 0;                      // 1 incorrect, 2 correct
    std::array<int, 4> emotion_bins{};   // with +1 padding offset
    std::array<double, 4> emotion_raw{};
    int next_exercise = 0;
    const std::vector<double>* q = nullptr;       // current exercise concept row, M
    const std::vector<double>* q_next = nullptr;  // next exercise concept row, M
};

struct StepNodes {
    NodeId y;  // response probability for t+1, shape [1]
    NodeId g;  // predicted emotions for t+1, shape [4]
    NodeId h;  // knowledge state, M x d_k
    NodeId f;  // emotional state, d_k
};

// One-graph view of the model: binds the parameter nodes once and exposes the
// per-timestep cell. The caller skips masked steps entirely.
class DektCell {
public:
    DektCell(Graph& g, const ModelConfig& cfg, bool training);

    NodeId initial_h();  // zeros, M x d_k
    NodeId initial_f();  // 0.5 everywhere, d_k

    // cm for the interaction at t; observed emotions, or the raw 4-vector in
    // the NoEmbedding variant
    NodeId observed_cm(const StepInput& in);
    // self-loop cm: discretizes the value of a previous g node and looks it
    // up in the emotion tables (the gradient path through g is cut)
    NodeId cm_from_prediction(NodeId g_node);
    // same lookup path from raw emotion values (the self-loop's g0)
    NodeId cm_from_values(const std::array<double, 4>& values);

    StepNodes step(NodeId h_prev, NodeId f_prev, NodeId cm, const StepInput& in);

    const ModelConfig& config() const { return cfg_; }

private:
    Graph& g_;
    ModelConfig cfg_;
    bool training_;
    NodeId w_[14], b_[14];
    NodeId beta_at_, beta_a_;
    NodeId emb_exercise_, emb_answer_time_, emb_interval_time_, emb_answer_;
    NodeId emb_emotion_[4];
};

} // namespace dekt
