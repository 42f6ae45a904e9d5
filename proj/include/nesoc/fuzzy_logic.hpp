#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "nesoc/error.hpp"

namespace nesoc::fuzzy {

// Scalar real-logic connectives over truth degrees in [0,1].
//
// Family: product t-norm, probabilistic sum, standard negation and the
// Reichenbach implication. Every operation is closed on [0,1] (the
// disjunction and implication are computed in complement form so closure
// holds exactly in floating point) and the pair (and, or) satisfies
// De Morgan under 1-x negation.

inline void check_truth(double v, const char* ctx) {
    if (!(v >= 0.0 && v <= 1.0))
        throw Error(std::string(ctx) + ": truth value outside [0,1]: " +
                    std::to_string(v));
}

inline double t_not(double x) {
    check_truth(x, "t_not");
    return 1.0 - x;
}

inline double t_and(double x, double y) {
    check_truth(x, "t_and");
    check_truth(y, "t_and");
    return x * y;
}

inline double t_or(double x, double y) {
    check_truth(x, "t_or");
    check_truth(y, "t_or");
    return 1.0 - (1.0 - x) * (1.0 - y);
}

inline double t_implies(double x, double y) {
    check_truth(x, "t_implies");
    check_truth(y, "t_implies");
    return 1.0 - x * (1.0 - y);
}

/// p-mean-error quantifier aggregation: 1 - (mean((1-a_i)^p))^(1/p).
/// Behaves like a smooth universal quantifier: 1 iff all members are 1,
/// and increasingly dominated by the worst violators as p grows.
inline double forall_value(std::span<const double> vals, double p) {
    if (vals.empty()) throw Error("forall_value: empty quantifier domain");
    if (!(p >= 1.0)) throw Error("forall_value: exponent must be >= 1");
    if (vals.size() == 1) {
        // identity on singletons, kept exact (the complement form would
        // round tiny truth values away)
        check_truth(vals[0], "forall_value");
        return vals[0];
    }
    double acc = 0.0;
    for (double v : vals) {
        check_truth(v, "forall_value");
        acc += std::pow(1.0 - v, p);
    }
    return 1.0 - std::pow(acc / static_cast<double>(vals.size()), 1.0 / p);
}

/// Aggregates per-axiom satisfaction into one scalar (p = 2).
inline double sat_value(std::span<const double> axioms) {
    if (axioms.empty()) throw Error("sat_value: empty axiom list");
    return forall_value(axioms, 2.0);
}

// ---------------------------------------------------------------------------
// Reverse-mode computation graph.
//
// Nodes are created bottom-up (inputs before consumers), forward values are
// computed eagerly at construction, and backward() runs one reverse sweep in
// creation order. Values are flat double vectors; scalars have length 1.
// A graph is single-writer: build, read and differentiate from one thread.
// ---------------------------------------------------------------------------

enum class Op : std::uint8_t {
    Constant,
    Parameter,
    Affine,
    Elu,
    Softmax,
    Select,
    Not,
    And,
    Or,
    Implies,
    Forall,
    SatAll,
    Mean,
    CrossEntropy,
};

inline const char* op_name(Op op) {
    switch (op) {
        case Op::Constant: return "constant";
        case Op::Parameter: return "parameter";
        case Op::Affine: return "affine";
        case Op::Elu: return "elu";
        case Op::Softmax: return "softmax";
        case Op::Select: return "select";
        case Op::Not: return "not";
        case Op::And: return "and";
        case Op::Or: return "or";
        case Op::Implies: return "implies";
        case Op::Forall: return "forall";
        case Op::SatAll: return "sat";
        case Op::Mean: return "mean";
        case Op::CrossEntropy: return "cross_entropy";
    }
    return "?";
}

struct NodeId {
    std::uint32_t index = 0;
    friend bool operator==(NodeId a, NodeId b) { return a.index == b.index; }
};

class Graph {
public:
    NodeId constant(double v) { return add_node(Op::Constant, {}, {v}); }

    NodeId constant_vec(std::span<const double> v) {
        return add_node(Op::Constant, {}, std::vector<double>(v.begin(), v.end()));
    }

    NodeId parameter(std::span<const double> init) {
        NodeId id = add_node(Op::Parameter, {}, std::vector<double>(init.begin(), init.end()));
        parameters_.push_back(id);
        return id;
    }

    /// value = W x + b with W row-major (rows x cols).
    NodeId affine(NodeId w, NodeId b, NodeId x, std::size_t rows, std::size_t cols) {
        if (len(w) != rows * cols) throw Error("affine: weight size mismatch");
        if (len(b) != rows) throw Error("affine: bias size mismatch");
        if (len(x) != cols) throw Error("affine: input size mismatch");
        std::vector<double> out(rows);
        const double* wp = value_ptr(w);
        const double* xp = value_ptr(x);
        const double* bp = value_ptr(b);
        for (std::size_t r = 0; r < rows; ++r) {
            double acc = bp[r];
            const double* row = wp + r * cols;
            for (std::size_t c = 0; c < cols; ++c) acc += row[c] * xp[c];
            out[r] = acc;
        }
        NodeId id = add_node(Op::Affine, {w, b, x}, std::move(out));
        node(id).arg0 = static_cast<std::uint32_t>(rows);
        node(id).arg1 = static_cast<std::uint32_t>(cols);
        return id;
    }

    NodeId elu(NodeId x) {
        std::vector<double> out(len(x));
        const double* xp = value_ptr(x);
        for (std::size_t i = 0; i < out.size(); ++i)
            out[i] = xp[i] > 0.0 ? xp[i] : std::expm1(xp[i]);
        return add_node(Op::Elu, {x}, std::move(out));
    }

    NodeId softmax(NodeId x) {
        std::size_t n = len(x);
        if (n == 0) throw Error("softmax: empty input");
        const double* xp = value_ptr(x);
        double m = xp[0];
        for (std::size_t i = 1; i < n; ++i) m = std::max(m, xp[i]);
        std::vector<double> out(n);
        double sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            out[i] = std::exp(xp[i] - m);
            sum += out[i];
        }
        for (double& v : out) v /= sum;
        return add_node(Op::Softmax, {x}, std::move(out));
    }

    NodeId select(NodeId v, std::size_t i) {
        if (i >= len(v)) throw Error("select: index out of range");
        NodeId id = add_node(Op::Select, {v}, {value_ptr(v)[i]});
        node(id).arg0 = static_cast<std::uint32_t>(i);
        return id;
    }

    NodeId fuzzy_not(NodeId x) {
        return add_node(Op::Not, {x}, {t_not(scalar_of(x, "not"))});
    }

    NodeId fuzzy_and(NodeId a, NodeId b) {
        return add_node(Op::And, {a, b}, {t_and(scalar_of(a, "and"), scalar_of(b, "and"))});
    }

    NodeId fuzzy_or(NodeId a, NodeId b) {
        return add_node(Op::Or, {a, b}, {t_or(scalar_of(a, "or"), scalar_of(b, "or"))});
    }

    NodeId fuzzy_implies(NodeId a, NodeId b) {
        return add_node(Op::Implies, {a, b},
                        {t_implies(scalar_of(a, "implies"), scalar_of(b, "implies"))});
    }

    /// Universal quantifier over a batch of scalar truth values.
    NodeId forall(std::span<const NodeId> vals, double p) {
        NodeId id = aggregate(Op::Forall, vals, p, "forall");
        return id;
    }

    /// Per-axiom satisfaction aggregated with the same p-mean-error form, p = 2.
    NodeId sat_all(std::span<const NodeId> axioms) {
        return aggregate(Op::SatAll, axioms, 2.0, "sat");
    }

    /// Arithmetic mean of scalars (baseline loss plumbing, not a connective).
    NodeId mean(std::span<const NodeId> vals) {
        if (vals.empty()) throw Error("mean: empty input list");
        std::vector<NodeId> in(vals.begin(), vals.end());
        double acc = 0.0;
        for (NodeId v : vals) {
            if (len(v) != 1) throw Error("mean: inputs must be scalar");
            acc += value_ptr(v)[0];
        }
        return add_node(Op::Mean, std::move(in), {acc / static_cast<double>(vals.size())});
    }

    /// -log(probs[target]); probs is expected to be a softmax output.
    NodeId cross_entropy(NodeId probs, std::size_t target) {
        if (target >= len(probs)) throw Error("cross_entropy: target out of range");
        NodeId id = add_node(Op::CrossEntropy, {probs}, {-std::log(value_ptr(probs)[target])});
        node(id).arg0 = static_cast<std::uint32_t>(target);
        return id;
    }

    std::size_t size() const { return nodes_.size(); }
    std::size_t len(NodeId id) const { return node(id).len; }

    double scalar(NodeId id) const {
        if (len(id) != 1) throw Error("scalar: node is not scalar");
        return value_ptr(id)[0];
    }

    std::span<const double> values(NodeId id) const {
        return {value_ptr(id), len(id)};
    }

    std::span<const double> grad(NodeId id) const {
        if (grads_.size() != values_.size()) throw Error("grad: backward has not run");
        return {grads_.data() + node(id).val_off, len(id)};
    }

    const std::vector<NodeId>& parameters() const { return parameters_; }

    /// Reverse-mode sweep from a scalar root. After it returns, grad(id)
    /// holds d root / d id for every node in the graph.
    void backward(NodeId root) {
        if (len(root) != 1) throw Error("backward: root must be scalar");
        grads_.assign(values_.size(), 0.0);
        grads_[node(root).val_off] = 1.0;

        for (std::size_t i = nodes_.size(); i-- > 0;) {
            const Node& n = nodes_[i];
            const double* g = grads_.data() + n.val_off;
            for (std::size_t k = 0; k < n.len; ++k)
                if (std::isnan(g[k]))
                    throw Error(std::string("backward: NaN gradient at node #") +
                                std::to_string(i) + " (" + op_name(n.op) + ")");
            propagate(n);
        }
    }

private:
    struct Node {
        Op op;
        std::uint32_t in_off = 0;
        std::uint32_t in_count = 0;
        std::uint32_t val_off = 0;
        std::uint32_t len = 0;
        std::uint32_t arg0 = 0; // affine rows | select index | CE target
        std::uint32_t arg1 = 0; // affine cols
        double exponent = 0.0;  // aggregator p
    };

    Node& node(NodeId id) { return nodes_[id.index]; }
    const Node& node(NodeId id) const { return nodes_[id.index]; }

    const double* value_ptr(NodeId id) const { return values_.data() + node(id).val_off; }

    double scalar_of(NodeId id, const char* ctx) const {
        if (len(id) != 1) throw Error(std::string(ctx) + ": expects scalar input");
        return value_ptr(id)[0];
    }

    NodeId add_node(Op op, std::vector<NodeId> inputs, std::vector<double> value) {
        Node n;
        n.op = op;
        n.in_off = static_cast<std::uint32_t>(input_ids_.size());
        n.in_count = static_cast<std::uint32_t>(inputs.size());
        n.val_off = static_cast<std::uint32_t>(values_.size());
        n.len = static_cast<std::uint32_t>(value.size());
        for (NodeId in : inputs) {
            if (in.index >= nodes_.size())
                throw Error("graph: input node does not exist yet");
            input_ids_.push_back(in.index);
        }
        for (double v : value) {
            if (std::isnan(v))
                throw Error(std::string("forward: NaN at node #") +
                            std::to_string(nodes_.size()) + " (" + op_name(op) + ")");
            values_.push_back(v);
        }
        nodes_.push_back(n);
        return NodeId{static_cast<std::uint32_t>(nodes_.size() - 1)};
    }

    NodeId aggregate(Op op, std::span<const NodeId> vals, double p, const char* ctx) {
        if (vals.empty()) throw Error(std::string(ctx) + ": empty quantifier domain");
        std::vector<NodeId> in(vals.begin(), vals.end());
        std::vector<double> scalars(vals.size());
        for (std::size_t i = 0; i < vals.size(); ++i)
            scalars[i] = scalar_of(vals[i], ctx);
        NodeId id = add_node(op, std::move(in), {forall_value(scalars, p)});
        node(id).exponent = p;
        return id;
    }

    std::span<const std::uint32_t> inputs(const Node& n) const {
        return {input_ids_.data() + n.in_off, n.in_count};
    }

    double* grad_ptr(std::uint32_t node_index) {
        return grads_.data() + nodes_[node_index].val_off;
    }

    void propagate(const Node& n) {
        const double* g = grads_.data() + n.val_off;
        const double* v = values_.data() + n.val_off;
        auto in = inputs(n);
        switch (n.op) {
            case Op::Constant:
            case Op::Parameter:
                break;
            case Op::Affine: {
                std::size_t rows = n.arg0, cols = n.arg1;
                double* gw = grad_ptr(in[0]);
                double* gb = grad_ptr(in[1]);
                double* gx = grad_ptr(in[2]);
                const double* wv = values_.data() + nodes_[in[0]].val_off;
                const double* xv = values_.data() + nodes_[in[2]].val_off;
                for (std::size_t r = 0; r < rows; ++r) {
                    double gr = g[r];
                    gb[r] += gr;
                    const double* wrow = wv + r * cols;
                    double* gwrow = gw + r * cols;
                    for (std::size_t c = 0; c < cols; ++c) {
                        gwrow[c] += gr * xv[c];
                        gx[c] += gr * wrow[c];
                    }
                }
                break;
            }
            case Op::Elu: {
                double* gx = grad_ptr(in[0]);
                const double* xv = values_.data() + nodes_[in[0]].val_off;
                for (std::size_t i = 0; i < n.len; ++i)
                    gx[i] += g[i] * (xv[i] > 0.0 ? 1.0 : v[i] + 1.0);
                break;
            }
            case Op::Softmax: {
                double* gx = grad_ptr(in[0]);
                double dot = 0.0;
                for (std::size_t i = 0; i < n.len; ++i) dot += g[i] * v[i];
                for (std::size_t i = 0; i < n.len; ++i)
                    gx[i] += v[i] * (g[i] - dot);
                break;
            }
            case Op::Select:
                grad_ptr(in[0])[n.arg0] += g[0];
                break;
            case Op::Not:
                grad_ptr(in[0])[0] -= g[0];
                break;
            case Op::And: {
                double a = values_[nodes_[in[0]].val_off];
                double b = values_[nodes_[in[1]].val_off];
                grad_ptr(in[0])[0] += g[0] * b;
                grad_ptr(in[1])[0] += g[0] * a;
                break;
            }
            case Op::Or: {
                double a = values_[nodes_[in[0]].val_off];
                double b = values_[nodes_[in[1]].val_off];
                grad_ptr(in[0])[0] += g[0] * (1.0 - b);
                grad_ptr(in[1])[0] += g[0] * (1.0 - a);
                break;
            }
            case Op::Implies: {
                double a = values_[nodes_[in[0]].val_off];
                double b = values_[nodes_[in[1]].val_off];
                grad_ptr(in[0])[0] -= g[0] * (1.0 - b);
                grad_ptr(in[1])[0] += g[0] * a;
                break;
            }
            case Op::Forall:
            case Op::SatAll: {
                // f = 1 - M^(1/p), M = mean((1-a_i)^p).
                // df/da_i = M^(1/p-1) (1-a_i)^(p-1) / n; 0 at the all-true point.
                // Singleton aggregation is the identity (matching forward).
                if (in.size() == 1) {
                    grad_ptr(in[0])[0] += g[0];
                    break;
                }
                double p = n.exponent;
                std::size_t cnt = in.size();
                double m = 0.0;
                for (std::uint32_t idx : in)
                    m += std::pow(1.0 - values_[nodes_[idx].val_off], p);
                m /= static_cast<double>(cnt);
                if (m > 0.0) {
                    double outer = std::pow(m, 1.0 / p - 1.0) / static_cast<double>(cnt);
                    for (std::uint32_t idx : in) {
                        double a = values_[nodes_[idx].val_off];
                        grad_ptr(idx)[0] += g[0] * outer * std::pow(1.0 - a, p - 1.0);
                    }
                }
                break;
            }
            case Op::Mean: {
                double w = 1.0 / static_cast<double>(in.size());
                for (std::uint32_t idx : in) grad_ptr(idx)[0] += g[0] * w;
                break;
            }
            case Op::CrossEntropy: {
                const double* pv = values_.data() + nodes_[in[0]].val_off;
                grad_ptr(in[0])[n.arg0] -= g[0] / pv[n.arg0];
                break;
            }
        }
    }

    std::vector<Node> nodes_;
    std::vector<std::uint32_t> input_ids_;
    std::vector<double> values_;
    std::vector<double> grads_;
    std::vector<NodeId> parameters_;
};

/// Named axioms, each rooted at a scalar truth node of one graph.
struct AxiomSet {
    std::vector<std::pair<std::string, NodeId>> axioms;

    NodeId satisfaction(Graph& g) const {
        std::vector<NodeId> roots;
        roots.reserve(axioms.size());
        for (const auto& [name, id] : axioms) roots.push_back(id);
        return g.sat_all(roots);
    }
};

} // namespace nesoc::fuzzy
