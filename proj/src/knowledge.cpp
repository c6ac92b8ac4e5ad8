#include "dekt/knowledge.hpp"

namespace dekt {

NodeId compose_learning_unit(Graph& g, NodeId e, NodeId at, NodeId a, NodeId w2, NodeId b2) {
    return affine(g, g.concat({e, at, a}), w2, b2);
}

NodeId related_state(Graph& g, NodeId q, NodeId h) {
    return g.matmul(q, h);
}

LearningGain emotion_boosted_gain(Graph& g, NodeId l, NodeId h_rel, NodeId cm, NodeId q,
                                  NodeId w3, NodeId b3, NodeId w_gate, NodeId b_gate) {
    NodeId lg = g.tanh_(affine(g, g.concat({l, h_rel}), w3, b3));
    NodeId gate_in = cm >= 0 ? g.concat({cm, l, h_rel}) : g.concat({l, h_rel});
    NodeId gate = g.sigmoid(affine(g, gate_in, w_gate, b_gate));
    // (lg + 1) / 2 keeps the gain nonnegative
    NodeId positive = g.scale(g.add(lg, g.constant(Array::scalar(1.0))), 0.5);
    LearningGain out;
    out.delta_h = g.mul(gate, positive);
    out.delta_h_tilde = g.outer(q, out.delta_h);
    return out;
}

NodeId forget_update(Graph& g, NodeId h, NodeId delta_h, NodeId delta_h_tilde, NodeId it,
                     NodeId w6, NodeId b6) {
    int m = g.value(h).rows();
    NodeId ones = g.constant(Array({m}, 1.0));
    NodeId dh_rows = g.outer(ones, delta_h);  // delta_h broadcast over concepts
    NodeId it_rows = g.outer(ones, it);
    NodeId bias_rows = g.outer(ones, b6);
    NodeId logits = g.add(g.matmul(g.concat({h, dh_rows, it_rows}), w6), bias_rows);
    NodeId gate = g.sigmoid(logits);
    return g.add(delta_h_tilde, g.mul(gate, h));
}

} // namespace dekt
