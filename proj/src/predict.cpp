#include "dekt/predict.hpp"

#include "dekt/knowledge.hpp"

namespace dekt {

NodeId predict_emotion(Graph& g, NodeId f, NodeId e_next, NodeId w11, NodeId b11) {
    return g.sigmoid(affine(g, g.concat({f, e_next}), w11, b11));
}

NodeId decode_emotion(Graph& g, NodeId cm_pred, NodeId w13, NodeId b13) {
    return g.sigmoid(affine(g, cm_pred, w13, b13));
}

NodeId predict_response(Graph& g, NodeId cm_pred, NodeId e_next, NodeId h, NodeId q_next,
                        NodeId w12, NodeId b12, bool no_exercise, bool no_expression) {
    NodeId h_rel = related_state(g, q_next, h);
    NodeId em = no_exercise ? e_next : g.mul(cm_pred, e_next);
    NodeId hm = no_expression ? h_rel : g.mul(cm_pred, h_rel);
    return g.sigmoid(affine(g, g.concat({em, hm}), w12, b12));
}

} // namespace dekt
