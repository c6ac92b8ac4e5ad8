#include "dekt/embeddings.hpp"

namespace dekt {

NodeId lookup(Graph& g, NodeId table, int index) {
    return g.gather(table, {index});
}

NodeId fuse_emotions(Graph& g, NodeId e_conc, NodeId e_bor, NodeId e_conf, NodeId e_fru,
                     NodeId w1, NodeId b1) {
    NodeId cat = g.concat({e_conc, e_bor, e_conf, e_fru});
    return affine(g, cat, w1, b1);
}

} // namespace dekt
