#pragma once

#include "dekt/graph.hpp"

namespace dekt {

// Learning unit from exercise, answer-time and answer embeddings (affine).
NodeId compose_learning_unit(Graph& g, NodeId e, NodeId at, NodeId a, NodeId w2, NodeId b2);

// Concept-weighted aggregation of the knowledge matrix: q^T h -> d_k vector.
NodeId related_state(Graph& g, NodeId q, NodeId h);

struct LearningGain {
    NodeId delta_h;        // d_k, every coordinate in [0,1)
    NodeId delta_h_tilde;  // M x d_k, outer(q, delta_h)
};

// Gated learning gain. Pass cm >= 0 with the emotion gate weights (W5/b5) for
// the emotion-boosted path, or cm = -1 with W4/b4 for the baseline gate.
LearningGain emotion_boosted_gain(Graph& g, NodeId l, NodeId h_rel, NodeId cm, NodeId q,
                                  NodeId w3, NodeId b3, NodeId w_gate, NodeId b_gate);

// Per-concept forget gate and state update: h' = delta_h_tilde + gate * h.
NodeId forget_update(Graph& g, NodeId h, NodeId delta_h, NodeId delta_h_tilde, NodeId it,
                     NodeId w6, NodeId b6);

} // namespace dekt
