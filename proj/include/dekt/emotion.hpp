#pragma once

#include "dekt/graph.hpp"

namespace dekt {

// Attention over the answer-time and answer embeddings, scored against the
// fused emotion representation with learned scalar biases.
NodeId emotion_sensitive_embedding(Graph& g, NodeId cm, NodeId at, NodeId a,
                                   NodeId beta_at, NodeId beta_a);

// Temporary emotional state, strictly inside (0,1)^d_k.
NodeId temporary_state(Graph& g, NodeId e, NodeId cm, NodeId es, NodeId w7, NodeId b7);

// Gated emotional gain in (-1,1)^d_k.
NodeId emotional_gain(Graph& g, NodeId f_temp, NodeId f_prev, NodeId w8, NodeId b8,
                      NodeId w9, NodeId b9);

// Convex mix of previous state and gain; weights softmax-normalized from the
// product of emotional and knowledge gains. dh_related = -1 drops the
// knowledge factor (NoInteraction ablation).
NodeId update_emotional_state(Graph& g, NodeId f_prev, NodeId delta_f, NodeId dh_related,
                              NodeId w10, NodeId b10);

} // namespace dekt
