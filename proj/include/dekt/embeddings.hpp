#pragma once

#include "dekt/graph.hpp"

namespace dekt {

// Row selection from an embedding table; gradient flows to that row only.
NodeId lookup(Graph& g, NodeId table, int index);

// Fusion of the four emotion embeddings into one representation (affine,
// no activation).
NodeId fuse_emotions(Graph& g, NodeId e_conc, NodeId e_bor, NodeId e_conf, NodeId e_fru,
                     NodeId w1, NodeId b1);

} // namespace dekt
