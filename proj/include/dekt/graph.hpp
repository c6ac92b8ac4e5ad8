#pragma once

#include <functional>
#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "dekt/array.hpp"
#include "dekt/rng.hpp"

namespace dekt {

using NodeId = int;

enum class OpKind {
    Constant,
    Parameter,
    MatMul,
    Add,
    Mul,        // element-wise, or scalar broadcast when one side has size 1
    Concat,     // along last axis
    Sigmoid,
    Tanh,
    Softmax,    // over last axis
    Gather,     // rows of a 2-D table
    ReduceSum,
    ReduceMean,
    Scale,      // multiply by a compile-time scalar
    Dropout,    // apply a precomputed keep mask
    Log,        // element-wise log with clamped input
};

struct Node {
    OpKind op;
    std::vector<NodeId> inputs;
    Array value;
    Array grad;
    // op attributes
    std::vector<int> indices;   // Gather
    double scalar = 0.0;        // Scale
    double clamp_lo = 0.0;      // Log
    double clamp_hi = 0.0;      // Log
    bool outer = false;         // MatMul: treat 1-D lhs as column, 1-D rhs as row
    Array mask;                 // Dropout keep mask (already scaled by 1/keep)
    std::string name;           // Parameter
};

// Named parameter values shared across graph rebuilds. Insertion order is
// preserved so reports and checkpoints are stable.
struct ParameterStore {
    std::vector<std::string> order;
    std::unordered_map<std::string, Array> values;
    std::set<std::string> frozen;       // excluded from optimizer updates
    std::set<std::string> freeze_row0;  // embedding padding rows held at zero

    void add(const std::string& name, Array value);
    bool has(const std::string& name) const { return values.count(name) != 0; }
    Array& at(const std::string& name);
    const Array& at(const std::string& name) const;
};

// Single computation graph. Values are computed eagerly as nodes are added;
// backward() fills gradient accumulators in reverse insertion order.
class Graph {
public:
    explicit Graph(Rng* rng = nullptr, bool checked = false) : rng_(rng), checked_(checked) {}

    NodeId constant(Array value);
    NodeId parameter(const std::string& name, Array value);
    // registers every entry of the store as a parameter node
    void register_parameters(const ParameterStore& store);
    NodeId param_node(const std::string& name) const;

    NodeId matmul(NodeId a, NodeId b);
    NodeId outer(NodeId a, NodeId b);  // 1-D x 1-D -> 2-D
    NodeId add(NodeId a, NodeId b);
    NodeId mul(NodeId a, NodeId b);
    NodeId concat(const std::vector<NodeId>& parts);
    NodeId sigmoid(NodeId a);
    NodeId tanh_(NodeId a);
    NodeId softmax(NodeId a);
    NodeId gather(NodeId table, std::vector<int> indices);
    NodeId reduce_sum(NodeId a);
    NodeId reduce_mean(NodeId a);
    NodeId scale(NodeId a, double s);
    NodeId log_clamped(NodeId a, double lo, double hi);
    // Bernoulli keep mask scaled by 1/keep, drawn from the graph's rng
    NodeId dropout(NodeId a, double rate, bool training);

    const Array& value(NodeId id) const { return nodes_[static_cast<std::size_t>(id)].value; }
    const Array& grad(NodeId id) const { return nodes_[static_cast<std::size_t>(id)].grad; }
    const Node& node(NodeId id) const { return nodes_[static_cast<std::size_t>(id)]; }
    int num_nodes() const { return static_cast<int>(nodes_.size()); }
    Rng* rng() const { return rng_; }

    // Reverse-mode accumulation from a scalar root. Returns gradients for
    // every registered parameter; parameters off the path get exact zeros.
    std::map<std::string, Array> backward(NodeId root);

private:
    NodeId apply(Node n);
    void compute_value(Node& n);
    void backprop_node(NodeId id);

    std::vector<Node> nodes_;
    std::unordered_map<std::string, NodeId> params_;
    std::vector<std::string> param_order_;
    Rng* rng_;
    bool checked_;
};

inline NodeId affine(Graph& g, NodeId x, NodeId w, NodeId b) {
    return g.add(g.matmul(x, w), b);
}

// Uniform [-bound, bound] initialization from the seeded source.
Array seeded_init(const std::vector<int>& shape, double bound, Rng& rng);

struct GradCheckReport {
    double max_rel_err = 0.0;
    std::string worst_param;
    int worst_index = -1;
    double analytic = 0.0;
    double numeric = 0.0;
};

using GraphBuilder = std::function<NodeId(Graph&, const ParameterStore&)>;

// Compares analytic gradients with central finite differences over every
// coordinate of every non-frozen parameter in the store.
GradCheckReport grad_check(const GraphBuilder& build, ParameterStore& point, double epsilon);

} // namespace dekt
