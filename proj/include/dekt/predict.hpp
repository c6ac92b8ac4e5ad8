#pragma once

#include "dekt/graph.hpp"

namespace dekt {

// Predicted emotion representation for the next interaction.
NodeId predict_emotion(Graph& g, NodeId f, NodeId e_next, NodeId w11, NodeId b11);

// Decode the predicted representation into the four emotion values.
NodeId decode_emotion(Graph& g, NodeId cm_pred, NodeId w13, NodeId b13);

// Emotion-modulated response probability for the next exercise. The bypass
// flags turn off the exercise-understanding and knowledge-mobilization
// modulation respectively (NoExercise / NoExpression ablations).
NodeId predict_response(Graph& g, NodeId cm_pred, NodeId e_next, NodeId h, NodeId q_next,
                        NodeId w12, NodeId b12, bool no_exercise = false,
                        bool no_expression = false);

} // namespace dekt
