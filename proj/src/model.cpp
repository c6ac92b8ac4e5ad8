#include "dekt/model.hpp"

#include <cmath>
#include <stdexcept>

#include "dekt/data.hpp"
#include "dekt/embeddings.hpp"
#include "dekt/emotion.hpp"
#include "dekt/knowledge.hpp"
#include "dekt/predict.hpp"

namespace dekt {

Variant variant_from_string(const std::string& s) {
    if (s == "full") return Variant::Full;
    if (s == "no-embedding") return Variant::NoEmbedding;
    if (s == "no-gain") return Variant::NoGain;
    if (s == "no-expression") return Variant::NoExpression;
    if (s == "no-exercise") return Variant::NoExercise;
    if (s == "no-interaction") return Variant::NoInteraction;
    throw std::invalid_argument("unknown variant '" + s + "'");
}

std::string variant_to_string(Variant v) {
    switch (v) {
    case Variant::Full: return "full";
    case Variant::NoEmbedding: return "no-embedding";
    case Variant::NoGain: return "no-gain";
    case Variant::NoExpression: return "no-expression";
    case Variant::NoExercise: return "no-exercise";
    case Variant::NoInteraction: return "no-interaction";
    }
    throw std::logic_error("bad variant");
}

ParameterStore init_parameters(const ModelConfig& cfg, Rng& rng) {
    if (cfg.d_k <= 0) throw std::invalid_argument("init_parameters: d_k must be positive");
    if (cfg.variant == Variant::NoEmbedding && cfg.d_k < 4)
        throw std::invalid_argument("init_parameters: no-embedding needs d_k >= 4");
    int dk = cfg.d_k;
    int cm = cfg.cm_dim();
    double bound = std::sqrt(1.0 / dk);
    ParameterStore p;

    auto table = [&](const std::string& name, int rows) {
        Array a = seeded_init({rows, dk}, bound, rng);
        for (int j = 0; j < dk; ++j) a.at(0, j) = 0.0;  // padding row
        p.add(name, std::move(a));
        p.freeze_row0.insert(name);
    };

    table("emb_exercise", cfg.n_exercises + 1);
    table("emb_answer_time", cfg.n_answer_time + 1);
    table("emb_interval_time", cfg.n_interval_time + 1);
    table("emb_answer", 3);
    if (cfg.variant != Variant::NoEmbedding) {
        table("emb_conc", cfg.bins + 1);
        table("emb_bor", cfg.bins + 1);
        table("emb_conf", cfg.bins + 1);
        table("emb_fru", cfg.bins + 1);
        p.add("W1", seeded_init({4 * dk, dk}, bound, rng));
        p.add("b1", seeded_init({dk}, bound, rng));
    }
    p.add("W2", seeded_init({3 * dk, dk}, bound, rng));
    p.add("b2", seeded_init({dk}, bound, rng));
    p.add("W3", seeded_init({2 * dk, dk}, bound, rng));
    p.add("b3", seeded_init({dk}, bound, rng));
    p.add("W4", seeded_init({2 * dk, dk}, bound, rng));
    p.add("b4", seeded_init({dk}, bound, rng));
    p.add("W5", seeded_init({cm + 2 * dk, dk}, bound, rng));
    p.add("b5", seeded_init({dk}, bound, rng));
    p.add("W6", seeded_init({3 * dk, dk}, bound, rng));
    p.add("b6", seeded_init({dk}, bound, rng));
    p.add("W7", seeded_init({2 * dk + cm, dk}, bound, rng));
    p.add("b7", seeded_init({dk}, bound, rng));
    p.add("W8", seeded_init({2 * dk, dk}, bound, rng));
    p.add("b8", seeded_init({dk}, bound, rng));
    p.add("W9", seeded_init({2 * dk, dk}, bound, rng));
    p.add("b9", seeded_init({dk}, bound, rng));
    p.add("W10", seeded_init({dk, dk}, bound, rng));
    p.add("b10", seeded_init({dk}, bound, rng));
    p.add("W11", seeded_init({2 * dk, dk}, bound, rng));
    p.add("b11", seeded_init({dk}, bound, rng));
    p.add("W12", seeded_init({2 * dk, 1}, bound, rng));
    p.add("b12", seeded_init({1}, bound, rng));
    p.add("W13", seeded_init({dk, 4}, bound, rng));
    p.add("b13", seeded_init({4}, bound, rng));
    p.add("beta_at", seeded_init({1}, bound, rng));
    p.add("beta_a", seeded_init({1}, bound, rng));
    return p;
}

DektCell::DektCell(Graph& g, const ModelConfig& cfg, bool training)
    : g_(g), cfg_(cfg), training_(training) {
    for (int i = 1; i <= 13; ++i) {
        if (i == 1 && cfg_.variant == Variant::NoEmbedding) continue;
        w_[i] = g_.param_node("W" + std::to_string(i));
        b_[i] = g_.param_node("b" + std::to_string(i));
    }
    beta_at_ = g_.param_node("beta_at");
    beta_a_ = g_.param_node("beta_a");
    emb_exercise_ = g_.param_node("emb_exercise");
    emb_answer_time_ = g_.param_node("emb_answer_time");
    emb_interval_time_ = g_.param_node("emb_interval_time");
    emb_answer_ = g_.param_node("emb_answer");
    if (cfg_.variant != Variant::NoEmbedding) {
        emb_emotion_[0] = g_.param_node("emb_conc");
        emb_emotion_[1] = g_.param_node("emb_bor");
        emb_emotion_[2] = g_.param_node("emb_conf");
        emb_emotion_[3] = g_.param_node("emb_fru");
    }
}

NodeId DektCell::initial_h() {
    return g_.constant(Array({cfg_.n_concepts, cfg_.d_k}, 0.0));
}

NodeId DektCell::initial_f() {
    return g_.constant(Array({cfg_.d_k}, 0.5));
}

NodeId DektCell::observed_cm(const StepInput& in) {
    if (cfg_.variant == Variant::NoEmbedding) {
        return g_.constant(Array::vec({in.emotion_raw[0], in.emotion_raw[1], in.emotion_raw[2],
                                       in.emotion_raw[3]}));
    }
    NodeId e[4];
    for (int i = 0; i < 4; ++i)
        e[i] = lookup(g_, emb_emotion_[i], in.emotion_bins[static_cast<std::size_t>(i)]);
    return fuse_emotions(g_, e[0], e[1], e[2], e[3], w_[1], b_[1]);
}

NodeId DektCell::cm_from_prediction(NodeId g_node) {
    const Array& gv = g_.value(g_node);
    if (gv.size() != 4) throw std::invalid_argument("cm_from_prediction: expected a 4-vector");
    return cm_from_values({gv.at(0), gv.at(1), gv.at(2), gv.at(3)});
}

NodeId DektCell::cm_from_values(const std::array<double, 4>& values) {
    for (double v : values)
        if (v < 0.0 || v > 1.0) throw std::invalid_argument("cm_from_values: value outside [0,1]");
    if (cfg_.variant == Variant::NoEmbedding) {
        return g_.constant(Array::vec({values[0], values[1], values[2], values[3]}));
    }
    NodeId e[4];
    for (int i = 0; i < 4; ++i) {
        int bin = discretize_emotion(values[static_cast<std::size_t>(i)], cfg_.bins) + 1;
        e[i] = lookup(g_, emb_emotion_[i], bin);
    }
    return fuse_emotions(g_, e[0], e[1], e[2], e[3], w_[1], b_[1]);
}

StepNodes DektCell::step(NodeId h_prev, NodeId f_prev, NodeId cm, const StepInput& in) {
    NodeId e = lookup(g_, emb_exercise_, in.exercise);
    NodeId at = lookup(g_, emb_answer_time_, in.answer_time);
    NodeId it = lookup(g_, emb_interval_time_, in.interval_time);
    NodeId a = lookup(g_, emb_answer_, in.answer);
    NodeId q = g_.constant(Array({cfg_.n_concepts}, *in.q));
    NodeId q_next = g_.constant(Array({cfg_.n_concepts}, *in.q_next));

    // knowledge path
    NodeId l = compose_learning_unit(g_, e, at, a, w_[2], b_[2]);
    l = g_.dropout(l, cfg_.dropout, training_);
    NodeId h_rel = related_state(g_, q, h_prev);
    LearningGain gain =
        cfg_.variant == Variant::NoGain
            ? emotion_boosted_gain(g_, l, h_rel, -1, q, w_[3], b_[3], w_[4], b_[4])
            : emotion_boosted_gain(g_, l, h_rel, cm, q, w_[3], b_[3], w_[5], b_[5]);
    NodeId h_new = forget_update(g_, h_prev, gain.delta_h, gain.delta_h_tilde, it, w_[6], b_[6]);

    // emotion path
    NodeId cm_scores = cm;
    if (cfg_.variant == Variant::NoEmbedding) {
        // the raw 4-vector cannot dot a d_k embedding; zero-pad for the scores
        Array padded({cfg_.d_k}, 0.0);
        const Array& cv = g_.value(cm);
        for (int i = 0; i < 4; ++i) padded.at(i) = cv.at(i);
        cm_scores = g_.constant(std::move(padded));
    }
    NodeId es = emotion_sensitive_embedding(g_, cm_scores, at, a, beta_at_, beta_a_);
    NodeId f_temp = temporary_state(g_, e, cm, es, w_[7], b_[7]);
    f_temp = g_.dropout(f_temp, cfg_.dropout, training_);
    NodeId delta_f = emotional_gain(g_, f_temp, f_prev, w_[8], b_[8], w_[9], b_[9]);
    NodeId dh_related =
        cfg_.variant == Variant::NoInteraction ? -1 : g_.matmul(q, gain.delta_h_tilde);
    NodeId f_new = update_emotional_state(g_, f_prev, delta_f, dh_related, w_[10], b_[10]);

    // prediction against exercise t+1
    NodeId e_next = lookup(g_, emb_exercise_, in.next_exercise);
    NodeId cm_pred = predict_emotion(g_, f_new, e_next, w_[11], b_[11]);
    NodeId g_pred = decode_emotion(g_, cm_pred, w_[13], b_[13]);
    NodeId y = predict_response(g_, cm_pred, e_next, h_new, q_next, w_[12], b_[12],
                                cfg_.variant == Variant::NoExercise,
                                cfg_.variant == Variant::NoExpression);
    return {y, g_pred, h_new, f_new};
}

} // namespace dekt
