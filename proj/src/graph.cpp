#include "dekt/graph.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dekt {

void ParameterStore::add(const std::string& name, Array value) {
    if (values.count(name)) throw std::invalid_argument("ParameterStore: duplicate name " + name);
    order.push_back(name);
    values.emplace(name, std::move(value));
}

Array& ParameterStore::at(const std::string& name) {
    auto it = values.find(name);
    if (it == values.end()) throw std::out_of_range("ParameterStore: unknown name " + name);
    return it->second;
}

const Array& ParameterStore::at(const std::string& name) const {
    auto it = values.find(name);
    if (it == values.end()) throw std::out_of_range("ParameterStore: unknown name " + name);
    return it->second;
}

namespace {

// Effective 2-D view of a matmul operand. 1-D arrays read as a row vector
// unless the node is flagged outer, where lhs is a column and rhs a row.
struct MatView {
    int rows, cols;
};

MatView lhs_view(const Array& a, bool outer) {
    if (a.rank() == 2) return {a.rows(), a.cols()};
    if (a.rank() == 1) return outer ? MatView{a.shape[0], 1} : MatView{1, a.shape[0]};
    throw std::invalid_argument("matmul: lhs must be 1-D or 2-D");
}

MatView rhs_view(const Array& b, bool outer) {
    if (b.rank() == 2) return {b.rows(), b.cols()};
    if (b.rank() == 1) return outer ? MatView{1, b.shape[0]} : MatView{b.shape[0], 1};
    throw std::invalid_argument("matmul: rhs must be 1-D or 2-D");
}

// C(r,c) += A(r,k) * B(k,c), optionally transposing either input view
void gemm_acc(const double* a, int ar, int ac, bool ta,
              const double* b, int br, int bc, bool tb,
              double* c) {
    int r = ta ? ac : ar;
    int k = ta ? ar : ac;
    int cc = tb ? br : bc;
    for (int i = 0; i < r; ++i) {
        for (int p = 0; p < k; ++p) {
            double av = ta ? a[p * ac + i] : a[i * ac + p];
            if (av == 0.0) continue;
            const double* brow;
            if (!tb) {
                brow = b + p * bc;
                double* crow = c + i * cc;
                for (int j = 0; j < cc; ++j) crow[j] += av * brow[j];
            } else {
                double* crow = c + i * cc;
                for (int j = 0; j < cc; ++j) crow[j] += av * b[j * bc + p];
            }
        }
    }
}

bool scalar_like(const Array& a) { return a.size() == 1; }

} // namespace

NodeId Graph::apply(Node n) {
    compute_value(n);
    nodes_.push_back(std::move(n));
    return static_cast<NodeId>(nodes_.size()) - 1;
}

NodeId Graph::constant(Array value) {
    if (checked_ && !value.all_finite()) throw std::invalid_argument("constant: non-finite input");
    Node n;
    n.op = OpKind::Constant;
    n.value = std::move(value);
    nodes_.push_back(std::move(n));
    return static_cast<NodeId>(nodes_.size()) - 1;
}

NodeId Graph::parameter(const std::string& name, Array value) {
    if (params_.count(name)) throw std::invalid_argument("parameter: duplicate name " + name);
    if (checked_ && !value.all_finite()) throw std::invalid_argument("parameter " + name + ": non-finite input");
    Node n;
    n.op = OpKind::Parameter;
    n.name = name;
    n.value = std::move(value);
    nodes_.push_back(std::move(n));
    NodeId id = static_cast<NodeId>(nodes_.size()) - 1;
    params_.emplace(name, id);
    param_order_.push_back(name);
    return id;
}

void Graph::register_parameters(const ParameterStore& store) {
    for (const auto& name : store.order) parameter(name, store.at(name));
}

NodeId Graph::param_node(const std::string& name) const {
    auto it = params_.find(name);
    if (it == params_.end()) throw std::out_of_range("param_node: unknown name " + name);
    return it->second;
}

void Graph::compute_value(Node& n) {
    auto v = [&]() -> const Array& { return nodes_[static_cast<std::size_t>(n.inputs[0])].value; };
    switch (n.op) {
    case OpKind::Constant:
    case OpKind::Parameter:
        break;
    case OpKind::MatMul: {
        const Array& a = nodes_[static_cast<std::size_t>(n.inputs[0])].value;
        const Array& b = nodes_[static_cast<std::size_t>(n.inputs[1])].value;
        MatView av = lhs_view(a, n.outer), bv = rhs_view(b, n.outer);
        if (av.cols != bv.rows)
            throw std::invalid_argument("matmul: inner dims " + std::to_string(av.cols) + " vs " +
                                        std::to_string(bv.rows));
        std::vector<int> shape;
        if (n.outer) shape = {av.rows, bv.cols};
        else if (a.rank() == 1 && b.rank() == 2) shape = {bv.cols};
        else if (a.rank() == 2 && b.rank() == 1) shape = {av.rows};
        else if (a.rank() == 2 && b.rank() == 2) shape = {av.rows, bv.cols};
        else throw std::invalid_argument("matmul: 1-D x 1-D needs outer()");
        n.value = Array(shape, 0.0);
        gemm_acc(a.data.data(), av.rows, av.cols, false, b.data.data(), bv.rows, bv.cols, false,
                 n.value.data.data());
        break;
    }
    case OpKind::Add:
    case OpKind::Mul: {
        const Array& a = nodes_[static_cast<std::size_t>(n.inputs[0])].value;
        const Array& b = nodes_[static_cast<std::size_t>(n.inputs[1])].value;
        bool mul = n.op == OpKind::Mul;
        if (a.same_shape(b)) {
            n.value = Array(a.shape, 0.0);
            for (int i = 0; i < a.size(); ++i)
                n.value.at(i) = mul ? a.at(i) * b.at(i) : a.at(i) + b.at(i);
        } else if (scalar_like(b)) {
            n.value = Array(a.shape, 0.0);
            double s = b.at(0);
            for (int i = 0; i < a.size(); ++i) n.value.at(i) = mul ? a.at(i) * s : a.at(i) + s;
        } else if (scalar_like(a)) {
            n.value = Array(b.shape, 0.0);
            double s = a.at(0);
            for (int i = 0; i < b.size(); ++i) n.value.at(i) = mul ? s * b.at(i) : s + b.at(i);
        } else {
            throw std::invalid_argument((mul ? std::string("mul") : std::string("add")) +
                                        ": shape mismatch " + a.shape_str() + " vs " + b.shape_str());
        }
        break;
    }
    case OpKind::Concat: {
        const Array& first = nodes_[static_cast<std::size_t>(n.inputs[0])].value;
        int rank = first.rank();
        if (rank == 1) {
            int total = 0;
            for (NodeId id : n.inputs) {
                const Array& p = nodes_[static_cast<std::size_t>(id)].value;
                if (p.rank() != 1) throw std::invalid_argument("concat: mixed ranks");
                total += p.shape[0];
            }
            n.value = Array({total}, 0.0);
            int off = 0;
            for (NodeId id : n.inputs) {
                const Array& p = nodes_[static_cast<std::size_t>(id)].value;
                std::copy(p.data.begin(), p.data.end(), n.value.data.begin() + off);
                off += p.size();
            }
        } else if (rank == 2) {
            int r = first.rows(), total_cols = 0;
            for (NodeId id : n.inputs) {
                const Array& p = nodes_[static_cast<std::size_t>(id)].value;
                if (p.rank() != 2 || p.rows() != r)
                    throw std::invalid_argument("concat: leading dims differ");
                total_cols += p.cols();
            }
            n.value = Array({r, total_cols}, 0.0);
            for (int i = 0; i < r; ++i) {
                int off = 0;
                for (NodeId id : n.inputs) {
                    const Array& p = nodes_[static_cast<std::size_t>(id)].value;
                    for (int j = 0; j < p.cols(); ++j)
                        n.value.at(i, off + j) = p.at(i, j);
                    off += p.cols();
                }
            }
        } else {
            throw std::invalid_argument("concat: unsupported rank");
        }
        break;
    }
    case OpKind::Sigmoid: {
        const Array& a = v();
        n.value = Array(a.shape, 0.0);
        for (int i = 0; i < a.size(); ++i) n.value.at(i) = 1.0 / (1.0 + std::exp(-a.at(i)));
        break;
    }
    case OpKind::Tanh: {
        const Array& a = v();
        n.value = Array(a.shape, 0.0);
        for (int i = 0; i < a.size(); ++i) n.value.at(i) = std::tanh(a.at(i));
        break;
    }
    case OpKind::Softmax: {
        const Array& a = v();
        n.value = Array(a.shape, 0.0);
        int r = a.rank() == 2 ? a.rows() : 1;
        int c = a.rank() == 2 ? a.cols() : a.size();
        for (int i = 0; i < r; ++i) {
            const double* row = a.data.data() + static_cast<std::size_t>(i) * c;
            double* out = n.value.data.data() + static_cast<std::size_t>(i) * c;
            double m = row[0];
            for (int j = 1; j < c; ++j) m = std::max(m, row[j]);
            double sum = 0.0;
            for (int j = 0; j < c; ++j) sum += (out[j] = std::exp(row[j] - m));
            for (int j = 0; j < c; ++j) out[j] /= sum;
        }
        break;
    }
    case OpKind::Gather: {
        const Array& t = v();
        if (t.rank() != 2) throw std::invalid_argument("gather: table must be 2-D");
        int k = static_cast<int>(n.indices.size());
        for (int idx : n.indices)
            if (idx < 0 || idx >= t.rows())
                throw std::out_of_range("gather: index " + std::to_string(idx) + " outside table of " +
                                        std::to_string(t.rows()) + " rows");
        if (k == 1) {
            n.value = Array({t.cols()}, 0.0);
            for (int j = 0; j < t.cols(); ++j) n.value.at(j) = t.at(n.indices[0], j);
        } else {
            n.value = Array({k, t.cols()}, 0.0);
            for (int i = 0; i < k; ++i)
                for (int j = 0; j < t.cols(); ++j) n.value.at(i, j) = t.at(n.indices[i], j);
        }
        break;
    }
    case OpKind::ReduceSum:
    case OpKind::ReduceMean: {
        const Array& a = v();
        double s = 0.0;
        for (double x : a.data) s += x;
        if (n.op == OpKind::ReduceMean) s /= a.size();
        n.value = Array::scalar(s);
        break;
    }
    case OpKind::Scale: {
        const Array& a = v();
        n.value = Array(a.shape, 0.0);
        for (int i = 0; i < a.size(); ++i) n.value.at(i) = a.at(i) * n.scalar;
        break;
    }
    case OpKind::Dropout: {
        const Array& a = v();
        if (!a.same_shape(n.mask)) throw std::invalid_argument("dropout: mask shape mismatch");
        n.value = Array(a.shape, 0.0);
        for (int i = 0; i < a.size(); ++i) n.value.at(i) = a.at(i) * n.mask.at(i);
        break;
    }
    case OpKind::Log: {
        const Array& a = v();
        n.value = Array(a.shape, 0.0);
        for (int i = 0; i < a.size(); ++i) {
            double x = std::clamp(a.at(i), n.clamp_lo, n.clamp_hi);
            n.value.at(i) = std::log(x);
        }
        break;
    }
    }
}

NodeId Graph::matmul(NodeId a, NodeId b) {
    Node n;
    n.op = OpKind::MatMul;
    n.inputs = {a, b};
    return apply(std::move(n));
}

NodeId Graph::outer(NodeId a, NodeId b) {
    Node n;
    n.op = OpKind::MatMul;
    n.inputs = {a, b};
    n.outer = true;
    return apply(std::move(n));
}

NodeId Graph::add(NodeId a, NodeId b) {
    Node n;
    n.op = OpKind::Add;
    n.inputs = {a, b};
    return apply(std::move(n));
}

NodeId Graph::mul(NodeId a, NodeId b) {
    Node n;
    n.op = OpKind::Mul;
    n.inputs = {a, b};
    return apply(std::move(n));
}

NodeId Graph::concat(const std::vector<NodeId>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat: no inputs");
    Node n;
    n.op = OpKind::Concat;
    n.inputs = parts;
    return apply(std::move(n));
}

NodeId Graph::sigmoid(NodeId a) {
    Node n;
    n.op = OpKind::Sigmoid;
    n.inputs = {a};
    return apply(std::move(n));
}

NodeId Graph::tanh_(NodeId a) {
    Node n;
    n.op = OpKind::Tanh;
    n.inputs = {a};
    return apply(std::move(n));
}

NodeId Graph::softmax(NodeId a) {
    Node n;
    n.op = OpKind::Softmax;
    n.inputs = {a};
    return apply(std::move(n));
}

NodeId Graph::gather(NodeId table, std::vector<int> indices) {
    Node n;
    n.op = OpKind::Gather;
    n.inputs = {table};
    n.indices = std::move(indices);
    return apply(std::move(n));
}

NodeId Graph::reduce_sum(NodeId a) {
    Node n;
    n.op = OpKind::ReduceSum;
    n.inputs = {a};
    return apply(std::move(n));
}

NodeId Graph::reduce_mean(NodeId a) {
    Node n;
    n.op = OpKind::ReduceMean;
    n.inputs = {a};
    return apply(std::move(n));
}

NodeId Graph::scale(NodeId a, double s) {
    Node n;
    n.op = OpKind::Scale;
    n.inputs = {a};
    n.scalar = s;
    return apply(std::move(n));
}

NodeId Graph::log_clamped(NodeId a, double lo, double hi) {
    Node n;
    n.op = OpKind::Log;
    n.inputs = {a};
    n.clamp_lo = lo;
    n.clamp_hi = hi;
    return apply(std::move(n));
}

NodeId Graph::dropout(NodeId a, double rate, bool training) {
    if (!training || rate <= 0.0) return a;
    if (!rng_) throw std::logic_error("dropout: graph has no rng");
    double keep = 1.0 - rate;
    const Array& av = value(a);
    Node n;
    n.op = OpKind::Dropout;
    n.inputs = {a};
    n.mask = Array(av.shape, 0.0);
    for (int i = 0; i < n.mask.size(); ++i)
        n.mask.at(i) = rng_->bernoulli(keep) ? 1.0 / keep : 0.0;
    return apply(std::move(n));
}

void Graph::backprop_node(NodeId id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    const Array& g = n.grad;
    switch (n.op) {
    case OpKind::Constant:
    case OpKind::Parameter:
        break;
    case OpKind::MatMul: {
        Node& an = nodes_[static_cast<std::size_t>(n.inputs[0])];
        Node& bn = nodes_[static_cast<std::size_t>(n.inputs[1])];
        MatView av = lhs_view(an.value, n.outer), bv = rhs_view(bn.value, n.outer);
        // dA += dC * B^T ; dB += A^T * dC   (effective 2-D views)
        gemm_acc(g.data.data(), av.rows, bv.cols, false, bn.value.data.data(), bv.rows, bv.cols, true,
                 an.grad.data.data());
        gemm_acc(an.value.data.data(), av.rows, av.cols, true, g.data.data(), av.rows, bv.cols, false,
                 bn.grad.data.data());
        break;
    }
    case OpKind::Add: {
        for (int k = 0; k < 2; ++k) {
            Node& in = nodes_[static_cast<std::size_t>(n.inputs[k])];
            if (in.value.same_shape(n.value)) {
                for (int i = 0; i < g.size(); ++i) in.grad.at(i) += g.at(i);
            } else { // scalar operand
                double s = 0.0;
                for (int i = 0; i < g.size(); ++i) s += g.at(i);
                in.grad.at(0) += s;
            }
        }
        break;
    }
    case OpKind::Mul: {
        Node& an = nodes_[static_cast<std::size_t>(n.inputs[0])];
        Node& bn = nodes_[static_cast<std::size_t>(n.inputs[1])];
        if (an.value.same_shape(bn.value)) {
            for (int i = 0; i < g.size(); ++i) {
                an.grad.at(i) += g.at(i) * bn.value.at(i);
                bn.grad.at(i) += g.at(i) * an.value.at(i);
            }
        } else if (scalar_like(bn.value)) {
            double s = bn.value.at(0), acc = 0.0;
            for (int i = 0; i < g.size(); ++i) {
                an.grad.at(i) += g.at(i) * s;
                acc += g.at(i) * an.value.at(i);
            }
            bn.grad.at(0) += acc;
        } else {
            double s = an.value.at(0), acc = 0.0;
            for (int i = 0; i < g.size(); ++i) {
                bn.grad.at(i) += g.at(i) * s;
                acc += g.at(i) * bn.value.at(i);
            }
            an.grad.at(0) += acc;
        }
        break;
    }
    case OpKind::Concat: {
        if (n.value.rank() == 1) {
            int off = 0;
            for (NodeId in_id : n.inputs) {
                Node& in = nodes_[static_cast<std::size_t>(in_id)];
                for (int i = 0; i < in.value.size(); ++i) in.grad.at(i) += g.at(off + i);
                off += in.value.size();
            }
        } else {
            int r = n.value.rows();
            for (int i = 0; i < r; ++i) {
                int off = 0;
                for (NodeId in_id : n.inputs) {
                    Node& in = nodes_[static_cast<std::size_t>(in_id)];
                    for (int j = 0; j < in.value.cols(); ++j) in.grad.at(i, j) += g.at(i, off + j);
                    off += in.value.cols();
                }
            }
        }
        break;
    }
    case OpKind::Sigmoid: {
        Node& in = nodes_[static_cast<std::size_t>(n.inputs[0])];
        for (int i = 0; i < g.size(); ++i) {
            double y = n.value.at(i);
            in.grad.at(i) += g.at(i) * y * (1.0 - y);
        }
        break;
    }
    case OpKind::Tanh: {
        Node& in = nodes_[static_cast<std::size_t>(n.inputs[0])];
        for (int i = 0; i < g.size(); ++i) {
            double y = n.value.at(i);
            in.grad.at(i) += g.at(i) * (1.0 - y * y);
        }
        break;
    }
    case OpKind::Softmax: {
        Node& in = nodes_[static_cast<std::size_t>(n.inputs[0])];
        int r = n.value.rank() == 2 ? n.value.rows() : 1;
        int c = n.value.rank() == 2 ? n.value.cols() : n.value.size();
        for (int i = 0; i < r; ++i) {
            const double* y = n.value.data.data() + static_cast<std::size_t>(i) * c;
            const double* gy = g.data.data() + static_cast<std::size_t>(i) * c;
            double* gx = in.grad.data.data() + static_cast<std::size_t>(i) * c;
            double dot = 0.0;
            for (int j = 0; j < c; ++j) dot += gy[j] * y[j];
            for (int j = 0; j < c; ++j) gx[j] += y[j] * (gy[j] - dot);
        }
        break;
    }
    case OpKind::Gather: {
        Node& t = nodes_[static_cast<std::size_t>(n.inputs[0])];
        int c = t.value.cols();
        int k = static_cast<int>(n.indices.size());
        for (int i = 0; i < k; ++i)
            for (int j = 0; j < c; ++j) t.grad.at(n.indices[i], j) += g.at(i * c + j);
        break;
    }
    case OpKind::ReduceSum: {
        Node& in = nodes_[static_cast<std::size_t>(n.inputs[0])];
        double s = g.at(0);
        for (int i = 0; i < in.value.size(); ++i) in.grad.at(i) += s;
        break;
    }
    case OpKind::ReduceMean: {
        Node& in = nodes_[static_cast<std::size_t>(n.inputs[0])];
        double s = g.at(0) / in.value.size();
        for (int i = 0; i < in.value.size(); ++i) in.grad.at(i) += s;
        break;
    }
    case OpKind::Scale: {
        Node& in = nodes_[static_cast<std::size_t>(n.inputs[0])];
        for (int i = 0; i < g.size(); ++i) in.grad.at(i) += g.at(i) * n.scalar;
        break;
    }
    case OpKind::Dropout: {
        Node& in = nodes_[static_cast<std::size_t>(n.inputs[0])];
        for (int i = 0; i < g.size(); ++i) in.grad.at(i) += g.at(i) * n.mask.at(i);
        break;
    }
    case OpKind::Log: {
        Node& in = nodes_[static_cast<std::size_t>(n.inputs[0])];
        for (int i = 0; i < g.size(); ++i) {
            double x = in.value.at(i);
            if (x > n.clamp_lo && x < n.clamp_hi) in.grad.at(i) += g.at(i) / x;
            // clamped coordinates get zero gradient
        }
        break;
    }
    }
}

std::map<std::string, Array> Graph::backward(NodeId root) {
    if (root < 0 || root >= num_nodes()) throw std::out_of_range("backward: root not in graph");
    if (value(root).size() != 1) throw std::invalid_argument("backward: root is not scalar");

    // mark nodes on a path to the root
    std::vector<char> reach(nodes_.size(), 0);
    std::vector<NodeId> stack{root};
    reach[static_cast<std::size_t>(root)] = 1;
    while (!stack.empty()) {
        NodeId id = stack.back();
        stack.pop_back();
        for (NodeId in : nodes_[static_cast<std::size_t>(id)].inputs) {
            if (!reach[static_cast<std::size_t>(in)]) {
                reach[static_cast<std::size_t>(in)] = 1;
                stack.push_back(in);
            }
        }
    }

    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        if (reach[i] || nodes_[i].op == OpKind::Parameter)
            nodes_[i].grad = Array(nodes_[i].value.shape, 0.0);
    }
    nodes_[static_cast<std::size_t>(root)].grad.at(0) = 1.0;

    for (NodeId id = root; id >= 0; --id) {
        if (!reach[static_cast<std::size_t>(id)]) continue;
        backprop_node(id);
    }

    std::map<std::string, Array> out;
    for (const auto& name : param_order_)
        out.emplace(name, nodes_[static_cast<std::size_t>(params_.at(name))].grad);
    return out;
}

Array seeded_init(const std::vector<int>& shape, double bound, Rng& rng) {
    if (bound <= 0.0) throw std::invalid_argument("seeded_init: bound must be positive");
    if (shape.empty()) throw std::invalid_argument("seeded_init: zero-sized shape");
    Array a(shape, 0.0);
    for (int i = 0; i < a.size(); ++i) a.at(i) = rng.uniform(-bound, bound);
    return a;
}

GradCheckReport grad_check(const GraphBuilder& build, ParameterStore& point, double epsilon) {
    if (epsilon <= 0.0) throw std::invalid_argument("grad_check: epsilon must be positive");

    auto eval = [&](const ParameterStore& p) {
        Graph g;
        NodeId root = build(g, p);
        return g.value(root).at(0);
    };

    Graph g;
    NodeId root = build(g, point);
    double v1 = g.value(root).at(0);
    double v2 = eval(point);
    if (v1 != v2) throw std::runtime_error("grad_check: non-deterministic build");

    auto analytic = g.backward(root);

    GradCheckReport rep;
    for (const auto& name : point.order) {
        if (point.frozen.count(name)) continue;
        Array& theta = point.at(name);
        const Array& a = analytic.at(name);
        for (int i = 0; i < theta.size(); ++i) {
            double orig = theta.at(i);
            theta.at(i) = orig + epsilon;
            double fp = eval(point);
            theta.at(i) = orig - epsilon;
            double fm = eval(point);
            theta.at(i) = orig;
            double num = (fp - fm) / (2.0 * epsilon);
            double ana = a.at(i);
            double rel = std::abs(ana - num) / std::max({std::abs(ana), std::abs(num), 1e-8});
            if (rel > rep.max_rel_err) {
                rep.max_rel_err = rel;
                rep.worst_param = name;
                rep.worst_index = i;
                rep.analytic = ana;
                rep.numeric = num;
            }
        }
    }
    return rep;
}

} // namespace dekt
