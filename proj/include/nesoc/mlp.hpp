#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "nesoc/error.hpp"
#include "nesoc/fuzzy_logic.hpp"
#include "nesoc/kv.hpp"
#include "nesoc/netflow_data.hpp"
#include "nesoc/rng.hpp"

namespace nesoc::net {

// The class-membership predicate P(x, class): a fully connected MLP with a
// softmax head over the three flow classes. The same architecture and
// init serve both the cross-entropy baseline and the axiom-trained model.

struct MlpModel {
    std::vector<std::size_t> layer_dims;       // input width first, classes last
    std::vector<std::vector<double>> weights;  // row-major [out x in] per layer
    std::vector<std::vector<double>> biases;
    std::string activation = "elu";

    std::size_t num_layers() const { return weights.size(); }

    std::size_t param_count() const {
        std::size_t n = 0;
        for (std::size_t l = 0; l < weights.size(); ++l) n += weights[l].size() + biases[l].size();
        return n;
    }
};

inline std::vector<std::size_t> default_layer_dims() { return {15, 16, 16, 8, 3}; }

/// Glorot-uniform weights, zero biases, fully determined by seed.
inline MlpModel mlp_init(const std::vector<std::size_t>& layer_dims, std::uint64_t seed) {
    if (layer_dims.size() < 2) throw Error("mlp_init: need at least input and output dims");
    for (std::size_t d : layer_dims)
        if (d == 0) throw Error("mlp_init: zero layer dimension");
    MlpModel m;
    m.layer_dims = layer_dims;
    std::mt19937_64 gen(seed);
    for (std::size_t l = 0; l + 1 < layer_dims.size(); ++l) {
        std::size_t fan_in = layer_dims[l], fan_out = layer_dims[l + 1];
        double limit = std::sqrt(6.0 / double(fan_in + fan_out));
        std::vector<double> w(fan_out * fan_in);
        for (double& x : w) x = rng::uniform(gen, -limit, limit);
        m.weights.push_back(std::move(w));
        m.biases.emplace_back(fan_out, 0.0);
    }
    return m;
}

// ---------------------------------------------------------------------------
// Flat parameter order: layer 0 weights (row-major), layer 0 biases,
// layer 1 weights, ... Shared by Adam, gradients, and checkpoints.
// ---------------------------------------------------------------------------

inline std::vector<double> flat_params(const MlpModel& m) {
    std::vector<double> out;
    out.reserve(m.param_count());
    for (std::size_t l = 0; l < m.num_layers(); ++l) {
        out.insert(out.end(), m.weights[l].begin(), m.weights[l].end());
        out.insert(out.end(), m.biases[l].begin(), m.biases[l].end());
    }
    return out;
}

inline void set_flat_params(MlpModel& m, std::span<const double> flat) {
    if (flat.size() != m.param_count()) throw Error("set_flat_params: size mismatch");
    std::size_t off = 0;
    for (std::size_t l = 0; l < m.num_layers(); ++l) {
        std::copy_n(flat.begin() + off, m.weights[l].size(), m.weights[l].begin());
        off += m.weights[l].size();
        std::copy_n(flat.begin() + off, m.biases[l].size(), m.biases[l].begin());
        off += m.biases[l].size();
    }
}

// ---------------------------------------------------------------------------
// Inference
// ---------------------------------------------------------------------------

/// Plain forward pass. Mirrors the graph builder's operation order exactly
/// so trained-graph outputs and checkpoint inference agree bit for bit.
inline std::vector<double> predict(const MlpModel& m, std::span<const double> features) {
    if (features.size() != m.layer_dims.front())
        throw Error("predict: expected " + std::to_string(m.layer_dims.front()) + " features, got " +
                    std::to_string(features.size()));
    for (double f : features)
        if (!std::isfinite(f)) throw Error("predict: non-finite feature value");

    std::vector<double> x(features.begin(), features.end());
    for (std::size_t l = 0; l < m.num_layers(); ++l) {
        std::size_t rows = m.layer_dims[l + 1], cols = m.layer_dims[l];
        std::vector<double> y(rows);
        for (std::size_t r = 0; r < rows; ++r) {
            double acc = m.biases[l][r];
            const double* row = m.weights[l].data() + r * cols;
            for (std::size_t c = 0; c < cols; ++c) acc += row[c] * x[c];
            y[r] = acc;
        }
        if (l + 1 < m.num_layers())
            for (double& v : y) v = v > 0 ? v : std::expm1(v);
        x = std::move(y);
    }
    // softmax head, max-shifted
    double mx = x[0];
    for (double v : x) mx = std::max(mx, v);
    double sum = 0.0;
    for (double& v : x) {
        v = std::exp(v - mx);
        sum += v;
    }
    for (double& v : x) v /= sum;
    return x;
}

/// Argmax class; ties break toward the lowest class index.
inline flow::ClassLabel classify(const MlpModel& m, std::span<const double> features) {
    std::vector<double> probs = predict(m, features);
    std::size_t best = 0;
    for (std::size_t i = 1; i < probs.size(); ++i)
        if (probs[i] > probs[best]) best = i;
    return static_cast<flow::ClassLabel>(best);
}

// ---------------------------------------------------------------------------
// Graph construction for training
// ---------------------------------------------------------------------------

struct GraphParams {
    std::vector<fuzzy::NodeId> weights;
    std::vector<fuzzy::NodeId> biases;
};

inline GraphParams emplace_params(fuzzy::Graph& g, const MlpModel& m) {
    GraphParams p;
    for (std::size_t l = 0; l < m.num_layers(); ++l) {
        p.weights.push_back(g.parameter(m.weights[l]));
        p.biases.push_back(g.parameter(m.biases[l]));
    }
    return p;
}

/// Forward pass inside the graph; returns the softmax membership node.
inline fuzzy::NodeId forward(fuzzy::Graph& g, const GraphParams& p, const MlpModel& m,
                             fuzzy::NodeId input) {
    fuzzy::NodeId x = input;
    for (std::size_t l = 0; l < m.num_layers(); ++l) {
        x = g.affine(p.weights[l], p.biases[l], x, m.layer_dims[l + 1], m.layer_dims[l]);
        if (l + 1 < m.num_layers()) x = g.elu(x);
    }
    return g.softmax(x);
}

/// Gradients in flat parameter order after a backward pass.
inline std::vector<double> flat_grads(const fuzzy::Graph& g, const GraphParams& p) {
    std::vector<double> out;
    for (std::size_t l = 0; l < p.weights.size(); ++l) {
        auto gw = g.grad(p.weights[l]);
        out.insert(out.end(), gw.begin(), gw.end());
        auto gb = g.grad(p.biases[l]);
        out.insert(out.end(), gb.begin(), gb.end());
    }
    return out;
}

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

struct AdamState {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::uint64_t t = 0;
    std::vector<double> m;
    std::vector<double> v;
};

/// Bias-corrected update: theta -= lr * m_hat / (sqrt(v_hat) + eps).
inline void adam_step(MlpModel& model, const std::vector<double>& grads, AdamState& state) {
    std::size_t n = model.param_count();
    if (grads.size() != n) throw Error("adam_step: gradient size mismatch");
    if (state.m.empty()) {
        state.m.assign(n, 0.0);
        state.v.assign(n, 0.0);
    }
    if (state.m.size() != n) throw Error("adam_step: state size mismatch");
    state.t += 1;
    double c1 = 1.0 - std::pow(state.beta1, double(state.t));
    double c2 = 1.0 - std::pow(state.beta2, double(state.t));
    std::vector<double> params = flat_params(model);
    for (std::size_t i = 0; i < n; ++i) {
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * grads[i];
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * grads[i] * grads[i];
        double m_hat = state.m[i] / c1;
        double v_hat = state.v[i] / c2;
        params[i] -= state.lr * m_hat / (std::sqrt(v_hat) + state.eps);
    }
    set_flat_params(model, params);
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

enum class TrainMode { Baseline, Ltn };

struct TrainConfig {
    TrainMode mode = TrainMode::Ltn;
    std::vector<std::size_t> layer_dims = default_layer_dims();
    std::size_t epochs = 200;
    std::size_t batch_size = 512;
    std::uint64_t seed = 1;
    double learning_rate = 0.01;
    double p_exponent = 2.0;
};

/// Normalized features plus class indices, ready for either loop.
struct TrainSet {
    std::vector<std::array<double, flow::kNumFeatures>> features;
    std::vector<int> labels;

    std::size_t size() const { return features.size(); }
};

inline TrainSet make_train_set(const flow::Dataset& ds, const flow::NormStats& stats) {
    TrainSet ts;
    ts.features.reserve(ds.size());
    ts.labels.reserve(ds.size());
    for (const auto& r : ds.records) {
        ts.features.push_back(flow::extract_features(r, stats));
        ts.labels.push_back(static_cast<int>(r.label));
    }
    return ts;
}

struct TrainResult {
    MlpModel model;
    std::vector<double> history;  // per-epoch mean loss (baseline) or satisfaction (ltn)
};

namespace detail {

// Above this many samples an epoch switches from one full-batch step to
// mini-batch steps.
constexpr std::size_t kFullBatchLimit = 10000;

/// Mini-batch slice with wrap-around so small partitions still contribute
/// to every step of an epoch.
inline std::vector<std::size_t> cycle_slice(const std::vector<std::size_t>& order,
                                            std::size_t step, std::size_t per_step) {
    std::vector<std::size_t> out;
    out.reserve(per_step);
    for (std::size_t k = 0; k < per_step && k < order.size(); ++k)
        out.push_back(order[(step * per_step + k) % order.size()]);
    return out;
}

} // namespace detail

inline TrainResult train_baseline(const TrainSet& ts, const TrainConfig& cfg) {
    if (ts.size() == 0) throw Error("train_baseline: empty training set");
    if (ts.features.size() != ts.labels.size())
        throw Error("train_baseline: feature/label length mismatch");

    TrainResult res;
    res.model = mlp_init(cfg.layer_dims, cfg.seed);
    AdamState adam;
    adam.lr = cfg.learning_rate;
    std::mt19937_64 gen(cfg.seed);

    std::vector<std::size_t> order(ts.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    bool full_batch = ts.size() <= detail::kFullBatchLimit;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        double epoch_loss = 0.0;
        std::size_t steps = 0;
        if (!full_batch) rng::shuffle(order, gen);
        std::size_t per_step = full_batch ? ts.size() : cfg.batch_size;
        for (std::size_t start = 0; start < ts.size(); start += per_step) {
            std::size_t end = std::min(start + per_step, ts.size());
            fuzzy::Graph g;
            GraphParams params = emplace_params(g, res.model);
            std::vector<fuzzy::NodeId> losses;
            losses.reserve(end - start);
            for (std::size_t k = start; k < end; ++k) {
                std::size_t i = order[k];
                fuzzy::NodeId x = g.constant_vec(ts.features[i]);
                fuzzy::NodeId probs = forward(g, params, res.model, x);
                losses.push_back(g.cross_entropy(probs, static_cast<std::size_t>(ts.labels[i])));
            }
            fuzzy::NodeId loss = g.mean(losses);
            g.backward(loss);
            adam_step(res.model, flat_grads(g, params), adam);
            epoch_loss += g.scalar(loss);
            ++steps;
        }
        res.history.push_back(epoch_loss / double(steps));
    }
    return res;
}

/// Axiom-satisfaction training. Per step, four universally quantified
/// axioms constrain the predicate: each labeled partition must carry its
/// class, and NWS flows must carry neither attack class. The minimized
/// loss is 1 - sat_aggregate.
inline TrainResult train_ltn(const TrainSet& ts, const std::vector<std::size_t>& nws_indices,
                             const TrainConfig& cfg) {
    if (ts.size() == 0) throw Error("train_ltn: empty training set");
    if (ts.features.size() != ts.labels.size())
        throw Error("train_ltn: feature/label length mismatch");
    for (std::size_t i : nws_indices)
        if (i >= ts.size()) throw Error("train_ltn: NWS index out of range");

    std::array<std::vector<std::size_t>, flow::kNumClasses> parts;
    for (std::size_t i = 0; i < ts.size(); ++i) parts[ts.labels[i]].push_back(i);
    for (int c = 0; c < flow::kNumClasses; ++c)
        if (parts[c].empty())
            throw Error(std::string("train_ltn: class ") +
                        flow::label_name(static_cast<flow::ClassLabel>(c)) +
                        " partition is empty");

    TrainResult res;
    res.model = mlp_init(cfg.layer_dims, cfg.seed);
    AdamState adam;
    adam.lr = cfg.learning_rate;
    std::mt19937_64 gen(cfg.seed);

    std::vector<std::size_t> nws(nws_indices);
    bool full_batch = ts.size() <= detail::kFullBatchLimit;
    std::size_t steps_per_epoch = 1;
    if (!full_batch)
        steps_per_epoch = (ts.size() + cfg.batch_size - 1) / cfg.batch_size;

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        if (!full_batch) {
            for (auto& p : parts) rng::shuffle(p, gen);
            rng::shuffle(nws, gen);
        }
        double epoch_sat = 0.0;
        for (std::size_t step = 0; step < steps_per_epoch; ++step) {
            fuzzy::Graph g;
            GraphParams params = emplace_params(g, res.model);

            std::map<std::size_t, fuzzy::NodeId> memberships;
            auto probs_of = [&](std::size_t i) {
                auto it = memberships.find(i);
                if (it != memberships.end()) return it->second;
                fuzzy::NodeId x = g.constant_vec(ts.features[i]);
                fuzzy::NodeId probs = forward(g, params, res.model, x);
                memberships.emplace(i, probs);
                return probs;
            };

            auto batch_of = [&](const std::vector<std::size_t>& part) {
                if (full_batch) return part;
                std::size_t per_step = (part.size() + steps_per_epoch - 1) / steps_per_epoch;
                return detail::cycle_slice(part, step, std::max<std::size_t>(per_step, 1));
            };

            std::vector<fuzzy::NodeId> axioms;
            for (int c = 0; c < flow::kNumClasses; ++c) {
                std::vector<fuzzy::NodeId> truths;
                for (std::size_t i : batch_of(parts[c]))
                    truths.push_back(g.select(probs_of(i), static_cast<std::size_t>(c)));
                axioms.push_back(g.forall(truths, cfg.p_exponent));
            }
            // NWS axiom is vacuous (and omitted) when the set is empty.
            std::vector<std::size_t> nws_batch = batch_of(nws);
            if (!nws_batch.empty()) {
                std::vector<fuzzy::NodeId> truths;
                for (std::size_t i : nws_batch) {
                    fuzzy::NodeId probs = probs_of(i);
                    fuzzy::NodeId attack = g.fuzzy_or(g.select(probs, 1), g.select(probs, 2));
                    truths.push_back(g.fuzzy_not(attack));
                }
                axioms.push_back(g.forall(truths, cfg.p_exponent));
            }

            fuzzy::NodeId sat = g.sat_all(axioms);
            fuzzy::NodeId loss = g.fuzzy_not(sat);
            g.backward(loss);
            adam_step(res.model, flat_grads(g, params), adam);
            epoch_sat += g.scalar(sat);
        }
        res.history.push_back(epoch_sat / double(steps_per_epoch));
    }
    return res;
}

// ---------------------------------------------------------------------------
// Checkpoints: text header, then a little-endian double blob holding the
// normalization stats (15 minima, 15 maxima) and the flat parameters.
// ---------------------------------------------------------------------------

struct Checkpoint {
    MlpModel model;
    flow::NormStats stats;
    std::string mode = "ltn";
    std::uint64_t seed = 1;
    std::size_t epochs = 200;
    std::size_t batch_size = 512;
    double learning_rate = 0.01;
    double p_exponent = 2.0;
    double train_fraction = 0.7;
};

namespace detail {

inline void write_le_double(std::ostream& out, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    char b[8];
    for (int i = 0; i < 8; ++i) b[i] = char((bits >> (8 * i)) & 0xff);
    out.write(b, 8);
}

inline double read_le_double(std::istream& in) {
    char b[8];
    if (!in.read(b, 8)) throw Error("checkpoint: truncated parameter blob");
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= std::uint64_t(static_cast<unsigned char>(b[i])) << (8 * i);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
}

} // namespace detail

inline void save_checkpoint(const std::string& path, const Checkpoint& ck) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write checkpoint: " + path);
    char buf[96];
    out << "nesoc-model v1\n";
    out << "mode = " << ck.mode << "\n";
    out << "seed = " << ck.seed << "\n";
    out << "epochs = " << ck.epochs << "\n";
    out << "batch_size = " << ck.batch_size << "\n";
    std::snprintf(buf, sizeof(buf), "learning_rate = %.17g\n", ck.learning_rate);
    out << buf;
    std::snprintf(buf, sizeof(buf), "p_exponent = %.17g\n", ck.p_exponent);
    out << buf;
    std::snprintf(buf, sizeof(buf), "train_fraction = %.17g\n", ck.train_fraction);
    out << buf;
    out << "activation = " << ck.model.activation << "\n";
    out << "layer_dims =";
    for (std::size_t d : ck.model.layer_dims) out << " " << d;
    out << "\n";
    out << "binary\n";
    for (int i = 0; i < flow::kNumFeatures; ++i) detail::write_le_double(out, ck.stats.min[i]);
    for (int i = 0; i < flow::kNumFeatures; ++i) detail::write_le_double(out, ck.stats.max[i]);
    for (double v : flat_params(ck.model)) detail::write_le_double(out, v);
    if (!out) throw Error("checkpoint write failed: " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open checkpoint: " + path);
    std::string line;
    if (!std::getline(in, line) || line != "nesoc-model v1")
        throw Error("checkpoint: bad magic line (want 'nesoc-model v1')");

    Checkpoint ck;
    std::vector<std::size_t> dims;
    while (std::getline(in, line)) {
        if (line == "binary") break;
        auto eq = line.find('=');
        if (eq == std::string::npos) throw Error("checkpoint: malformed header line: " + line);
        std::string key = kv::trim(line.substr(0, eq));
        std::string value = kv::trim(line.substr(eq + 1));
        if (key == "mode") ck.mode = value;
        else if (key == "seed") ck.seed = std::stoull(value);
        else if (key == "epochs") ck.epochs = std::stoull(value);
        else if (key == "batch_size") ck.batch_size = std::stoull(value);
        else if (key == "learning_rate") ck.learning_rate = std::stod(value);
        else if (key == "p_exponent") ck.p_exponent = std::stod(value);
        else if (key == "train_fraction") ck.train_fraction = std::stod(value);
        else if (key == "activation") ck.model.activation = value;
        else if (key == "layer_dims")
            for (const auto& d : kv::split_list(value)) dims.push_back(std::stoull(d));
        else throw Error("checkpoint: unknown header key '" + key + "'");
    }
    if (dims.size() < 2) throw Error("checkpoint: missing or invalid layer_dims");

    for (int i = 0; i < flow::kNumFeatures; ++i) ck.stats.min[i] = detail::read_le_double(in);
    for (int i = 0; i < flow::kNumFeatures; ++i) ck.stats.max[i] = detail::read_le_double(in);

    ck.model.layer_dims = dims;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        ck.model.weights.emplace_back(dims[l + 1] * dims[l]);
        ck.model.biases.emplace_back(dims[l + 1]);
    }
    std::vector<double> flat(ck.model.param_count());
    for (double& v : flat) v = detail::read_le_double(in);
    set_flat_params(ck.model, flat);
    char extra;
    if (in.read(&extra, 1)) throw Error("checkpoint: trailing bytes after parameter blob");
    return ck;
}

} // namespace nesoc::net

