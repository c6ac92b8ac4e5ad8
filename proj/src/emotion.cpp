#include "dekt/emotion.hpp"

namespace dekt {

NodeId emotion_sensitive_embedding(Graph& g, NodeId cm, NodeId at, NodeId a,
                                   NodeId beta_at, NodeId beta_a) {
    NodeId s1 = g.add(g.reduce_sum(g.mul(cm, at)), beta_at);
    NodeId s2 = g.add(g.reduce_sum(g.mul(cm, a)), beta_a);
    NodeId alpha = g.softmax(g.concat({s1, s2}));
    // row-stack [at; a] and contract with the attention weights
    NodeId row0 = g.constant(Array::vec({1.0, 0.0}));
    NodeId row1 = g.constant(Array::vec({0.0, 1.0}));
    NodeId stacked = g.add(g.outer(row0, at), g.outer(row1, a));
    return g.matmul(alpha, stacked);
}

NodeId temporary_state(Graph& g, NodeId e, NodeId cm, NodeId es, NodeId w7, NodeId b7) {
    return g.sigmoid(affine(g, g.concat({e, cm, es}), w7, b7));
}

NodeId emotional_gain(Graph& g, NodeId f_temp, NodeId f_prev, NodeId w8, NodeId b8,
                      NodeId w9, NodeId b9) {
    NodeId cat = g.concat({f_temp, f_prev});
    NodeId aec = g.tanh_(affine(g, cat, w8, b8));
    NodeId gate = g.sigmoid(affine(g, cat, w9, b9));
    return g.mul(aec, gate);
}

NodeId update_emotional_state(Graph& g, NodeId f_prev, NodeId delta_f, NodeId dh_related,
                              NodeId w10, NodeId b10) {
    NodeId interaction = dh_related >= 0 ? g.mul(delta_f, dh_related) : delta_f;
    NodeId weight = g.softmax(affine(g, interaction, w10, b10));
    NodeId one = g.constant(Array(g.value(weight).shape, 1.0));
    NodeId complement = g.add(one, g.scale(weight, -1.0));
    return g.add(g.mul(weight, delta_f), g.mul(complement, f_prev));
}

} // namespace dekt
