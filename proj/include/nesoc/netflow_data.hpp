#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "nesoc/error.hpp"
#include "nesoc/kv.hpp"
#include "nesoc/rng.hpp"

namespace nesoc::flow {

enum class ClassLabel : int { Benign = 0, BruteForce = 1, Xss = 2 };

constexpr int kNumClasses = 3;
constexpr int kNumFeatures = 15;

inline const char* label_name(ClassLabel c) {
    switch (c) {
        case ClassLabel::Benign: return "Benign";
        case ClassLabel::BruteForce: return "BruteForce";
        case ClassLabel::Xss: return "XSS";
    }
    return "?";
}

struct FlowRecord {
    std::string src_addr;
    std::string dst_addr;
    int src_port = 0;
    int dst_port = 0;
    int protocol = 0;
    double flow_duration = 0;      // microseconds
    double tot_len_fwd = 0;        // bytes
    double tot_len_bwd = 0;
    double fwd_header_len = 0;
    double bwd_header_len = 0;
    double fwd_psh_flags = 0;
    double fin_flag_count = 0;
    double bwd_pkt_len_min = 0;
    double init_win_fwd = 0;
    double init_win_bwd = 0;
    double subflow_fwd_bytes = 0;
    ClassLabel label = ClassLabel::Benign;
};

struct Dataset {
    std::vector<FlowRecord> records;
    std::size_t dropped_rows = 0;

    std::size_t size() const { return records.size(); }

    std::array<std::vector<std::size_t>, kNumClasses> indices_by_class() const {
        std::array<std::vector<std::size_t>, kNumClasses> out;
        for (std::size_t i = 0; i < records.size(); ++i)
            out[static_cast<int>(records[i].label)].push_back(i);
        return out;
    }
};

// ---------------------------------------------------------------------------
// CSV ingestion
// ---------------------------------------------------------------------------

/// Canonical field key -> CSV header cell. Header matching is
/// case-insensitive after trimming; a schema file may override any entry
/// for exports with nonstandard column names.
using Schema = std::map<std::string, std::string>;

inline Schema default_schema() {
    return {
        {"source_address", "Source IP"},
        {"destination_address", "Destination IP"},
        {"source_port", "Source Port"},
        {"destination_port", "Destination Port"},
        {"protocol", "Protocol"},
        {"flow_duration", "Flow Duration"},
        {"total_length_fwd", "Total Length of Fwd Packets"},
        {"total_length_bwd", "Total Length of Bwd Packets"},
        {"fwd_header_length", "Fwd Header Length"},
        {"bwd_header_length", "Bwd Header Length"},
        {"fwd_psh_flags", "Fwd PSH Flags"},
        {"fin_flag_count", "FIN Flag Count"},
        {"bwd_packet_length_min", "Bwd Packet Length Min"},
        {"init_win_bytes_fwd", "Init_Win_bytes_forward"},
        {"init_win_bytes_bwd", "Init_Win_bytes_backward"},
        {"subflow_fwd_bytes", "Subflow Fwd Bytes"},
        {"label", "Label"},
    };
}

inline Schema load_schema(const std::string& path) {
    Schema schema = default_schema();
    kv::KvFile file = kv::KvFile::load(path);
    for (const auto& e : file.entries()) {
        if (!schema.count(e.key))
            throw ParseError("line " + std::to_string(e.line) + ": unknown schema key '" + e.key +
                                 "'",
                             e.line);
        schema[e.key] = e.value;
    }
    return schema;
}

/// Lowercased label string -> class.
using LabelTable = std::map<std::string, ClassLabel>;

inline LabelTable default_label_table() {
    return {
        {"benign", ClassLabel::Benign},
        {"bruteforce", ClassLabel::BruteForce},
        {"web attack - brute force", ClassLabel::BruteForce},
        {"web attack \xe2\x80\x93 brute force", ClassLabel::BruteForce},
        {"xss", ClassLabel::Xss},
        {"web attack - xss", ClassLabel::Xss},
        {"web attack \xe2\x80\x93 xss", ClassLabel::Xss},
    };
}

namespace detail {

inline bool parse_double(const std::string& s, double& out) {
    const char* p = s.c_str();
    char* end = nullptr;
    out = std::strtod(p, &end);
    if (end == p || *end != '\0') return false;
    return std::isfinite(out);
}

inline bool parse_port(const std::string& s, int& out) {
    double v;
    if (!parse_double(s, v)) return false;
    if (v < 0 || v > 65535 || v != static_cast<int>(v)) return false;
    out = static_cast<int>(v);
    return true;
}

inline bool is_ipv4(const std::string& s) {
    auto parts = kv::split(s, '.');
    if (parts.size() != 4) return false;
    for (const auto& p : parts) {
        if (p.empty() || p.size() > 3) return false;
        for (char c : p)
            if (!std::isdigit(static_cast<unsigned char>(c))) return false;
        if (std::stoi(p) > 255) return false;
    }
    return true;
}

} // namespace detail

inline Dataset parse_flows(std::istream& in, const Schema& schema = default_schema(),
                           const LabelTable& labels = default_label_table()) {
    std::string header;
    if (!std::getline(in, header) || kv::trim(header).empty())
        throw Error("missing CSV header row");

    std::vector<std::string> cells = kv::split(header, ',');
    std::map<std::string, std::size_t> column;
    for (std::size_t i = 0; i < cells.size(); ++i) column[kv::to_lower(kv::trim(cells[i]))] = i;

    std::map<std::string, std::size_t> col;
    for (const auto& [key, name] : schema) {
        auto it = column.find(kv::to_lower(kv::trim(name)));
        if (it == column.end()) throw Error("CSV header is missing column '" + name + "'");
        col[key] = it->second;
    }

    Dataset ds;
    std::string line;
    while (std::getline(in, line)) {
        if (kv::trim(line).empty()) continue;
        std::vector<std::string> row = kv::split(line, ',');
        for (auto& c : row) c = kv::trim(c);

        auto cell = [&](const std::string& key) -> const std::string& {
            return row[col.at(key)];
        };
        bool row_ok = true;
        for (const auto& [key, index] : col)
            if (index >= row.size() || row[index].empty()) row_ok = false;
        if (!row_ok) {
            ++ds.dropped_rows;
            continue;
        }

        // Unknown labels are a configuration problem, not row noise: abort.
        std::string label_str = kv::to_lower(cell("label"));
        auto lit = labels.find(label_str);
        if (lit == labels.end())
            throw Error("unknown label value '" + cell("label") + "'");

        FlowRecord r;
        r.label = lit->second;
        r.src_addr = cell("source_address");
        r.dst_addr = cell("destination_address");
        double proto;
        bool ok = detail::is_ipv4(r.src_addr) && detail::is_ipv4(r.dst_addr) &&
                  detail::parse_port(cell("source_port"), r.src_port) &&
                  detail::parse_port(cell("destination_port"), r.dst_port) &&
                  detail::parse_double(cell("protocol"), proto) &&
                  detail::parse_double(cell("flow_duration"), r.flow_duration) &&
                  detail::parse_double(cell("total_length_fwd"), r.tot_len_fwd) &&
                  detail::parse_double(cell("total_length_bwd"), r.tot_len_bwd) &&
                  detail::parse_double(cell("fwd_header_length"), r.fwd_header_len) &&
                  detail::parse_double(cell("bwd_header_length"), r.bwd_header_len) &&
                  detail::parse_double(cell("fwd_psh_flags"), r.fwd_psh_flags) &&
                  detail::parse_double(cell("fin_flag_count"), r.fin_flag_count) &&
                  detail::parse_double(cell("bwd_packet_length_min"), r.bwd_pkt_len_min) &&
                  detail::parse_double(cell("init_win_bytes_fwd"), r.init_win_fwd) &&
                  detail::parse_double(cell("init_win_bytes_bwd"), r.init_win_bwd) &&
                  detail::parse_double(cell("subflow_fwd_bytes"), r.subflow_fwd_bytes);
        ok = ok && r.tot_len_fwd >= 0 && r.tot_len_bwd >= 0 && r.fwd_header_len >= 0 &&
             r.bwd_header_len >= 0 && r.fwd_psh_flags >= 0 && r.fin_flag_count >= 0 &&
             r.bwd_pkt_len_min >= 0 && r.subflow_fwd_bytes >= 0 && r.flow_duration >= 0;
        if (!ok) {
            ++ds.dropped_rows;
            continue;
        }
        r.protocol = static_cast<int>(proto);
        ds.records.push_back(std::move(r));
    }
    if (ds.records.empty()) throw Error("no parseable flow rows");
    return ds;
}

inline Dataset load_flows(const std::string& path, const Schema& schema = default_schema(),
                          const LabelTable& labels = default_label_table()) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open flow CSV: " + path);
    return parse_flows(in, schema, labels);
}

// ---------------------------------------------------------------------------
// Stratified split
// ---------------------------------------------------------------------------

/// Per-class round-half-up split, deterministic in seed. Record order within
/// each part follows the source dataset.
inline std::pair<Dataset, Dataset> split(const Dataset& ds, double train_fraction,
                                         std::uint64_t seed) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw Error("split: train fraction must be in (0, 1)");
    std::mt19937_64 gen(seed);
    std::vector<bool> in_train(ds.size(), false);
    auto by_class = ds.indices_by_class();
    for (int c = 0; c < kNumClasses; ++c) {
        auto& idx = by_class[c];
        if (idx.size() < 2)
            throw Error(std::string("split: class ") + label_name(static_cast<ClassLabel>(c)) +
                        " has fewer than 2 records");
        rng::shuffle(idx, gen);
        auto n_train =
            static_cast<std::size_t>(std::floor(train_fraction * double(idx.size()) + 0.5));
        for (std::size_t i = 0; i < n_train; ++i) in_train[idx[i]] = true;
    }
    Dataset train, test;
    for (std::size_t i = 0; i < ds.size(); ++i)
        (in_train[i] ? train : test).records.push_back(ds.records[i]);
    return {std::move(train), std::move(test)};
}

// ---------------------------------------------------------------------------
// Feature extraction
// ---------------------------------------------------------------------------

// Fixed feature order (slot 15 repeats total fwd length; the reference
// schema carries the duplication, so the model input stays 15-wide):
//   0 source port          5 total len bwd      10 bwd pkt len min
//   1 destination port     6 fwd header len     11 init win fwd
//   2 protocol             7 bwd header len     12 init win bwd
//   3 flow duration        8 fwd PSH flags      13 subflow fwd bytes
//   4 total len fwd        9 FIN flag count     14 total len fwd
inline std::array<double, kNumFeatures> raw_features(const FlowRecord& r) {
    return {static_cast<double>(r.src_port),
            static_cast<double>(r.dst_port),
            static_cast<double>(r.protocol),
            r.flow_duration,
            r.tot_len_fwd,
            r.tot_len_bwd,
            r.fwd_header_len,
            r.bwd_header_len,
            r.fwd_psh_flags,
            r.fin_flag_count,
            r.bwd_pkt_len_min,
            static_cast<double>(r.init_win_fwd),
            static_cast<double>(r.init_win_bwd),
            r.subflow_fwd_bytes,
            r.tot_len_fwd};
}

struct NormStats {
    std::array<double, kNumFeatures> min{};
    std::array<double, kNumFeatures> max{};
};

/// Per-feature minima/maxima. Compute on the training split only.
inline NormStats compute_stats(const Dataset& train) {
    if (train.records.empty()) throw Error("compute_stats: empty dataset");
    NormStats s;
    s.min.fill(std::numeric_limits<double>::infinity());
    s.max.fill(-std::numeric_limits<double>::infinity());
    for (const auto& r : train.records) {
        auto f = raw_features(r);
        for (int i = 0; i < kNumFeatures; ++i) {
            s.min[i] = std::min(s.min[i], f[i]);
            s.max[i] = std::max(s.max[i], f[i]);
        }
    }
    return s;
}

/// Min-max normalization into [0,1]; out-of-range test values clamp, and a
/// degenerate feature (min == max) maps to 0.
inline std::array<double, kNumFeatures> extract_features(const FlowRecord& r,
                                                         const NormStats& stats) {
    auto f = raw_features(r);
    std::array<double, kNumFeatures> out{};
    for (int i = 0; i < kNumFeatures; ++i) {
        double span = stats.max[i] - stats.min[i];
        double v = span > 0 ? (f[i] - stats.min[i]) / span : 0.0;
        out[i] = std::clamp(v, 0.0, 1.0);
    }
    return out;
}

// ---------------------------------------------------------------------------
// NWS membership
// ---------------------------------------------------------------------------

struct NwsConfig {
    std::vector<std::string> web_server_addrs;
    std::vector<int> web_server_ports{80, 443, 8080};

    bool empty() const { return web_server_addrs.empty() && web_server_ports.empty(); }
};

inline NwsConfig load_nws_config(const std::string& path) {
    kv::KvFile file = kv::KvFile::load(path);
    NwsConfig cfg;
    cfg.web_server_addrs = file.get_list("web_server_addrs");
    if (file.has("web_server_ports")) {
        cfg.web_server_ports.clear();
        for (const auto& p : file.get_list("web_server_ports")) {
            int port;
            if (!detail::parse_port(p, port))
                throw Error("invalid web server port '" + p + "' in " + path);
            cfg.web_server_ports.push_back(port);
        }
    }
    return cfg;
}

/// Indices of flows where no endpoint matches a web-server address and no
/// port matches a web port ("not web server" traffic). Ascending order.
inline std::vector<std::size_t> compute_nws(const Dataset& ds, const NwsConfig& cfg) {
    if (cfg.empty()) throw Error("compute_nws: empty web-server config");
    auto is_web_addr = [&](const std::string& a) {
        return std::find(cfg.web_server_addrs.begin(), cfg.web_server_addrs.end(), a) !=
               cfg.web_server_addrs.end();
    };
    auto is_web_port = [&](int p) {
        return std::find(cfg.web_server_ports.begin(), cfg.web_server_ports.end(), p) !=
               cfg.web_server_ports.end();
    };
    std::vector<std::size_t> nws;
    for (std::size_t i = 0; i < ds.records.size(); ++i) {
        const auto& r = ds.records[i];
        bool web = is_web_addr(r.src_addr) || is_web_addr(r.dst_addr) ||
                   is_web_port(r.src_port) || is_web_port(r.dst_port);
        if (!web) nws.push_back(i);
    }
    return nws;
}

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

struct ClassMetrics {
    double precision = 0;
    double recall = 0;
    double f1 = 0;
};

/// One-vs-rest precision/recall/F1 per class; 0/0 ratios are defined as 0.
inline std::array<ClassMetrics, kNumClasses> metrics(const std::vector<ClassLabel>& predictions,
                                                     const std::vector<ClassLabel>& truth) {
    if (predictions.size() != truth.size())
        throw Error("metrics: prediction/truth length mismatch");
    if (predictions.empty()) throw Error("metrics: empty input");
    std::array<ClassMetrics, kNumClasses> out{};
    for (int c = 0; c < kNumClasses; ++c) {
        std::size_t tp = 0, fp = 0, fn = 0;
        for (std::size_t i = 0; i < truth.size(); ++i) {
            bool pred = static_cast<int>(predictions[i]) == c;
            bool is = static_cast<int>(truth[i]) == c;
            tp += pred && is;
            fp += pred && !is;
            fn += !pred && is;
        }
        ClassMetrics m;
        m.precision = (tp + fp) ? double(tp) / double(tp + fp) : 0.0;
        m.recall = (tp + fn) ? double(tp) / double(tp + fn) : 0.0;
        m.f1 = (m.precision + m.recall) > 0
                   ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
                   : 0.0;
        out[c] = m;
    }
    return out;
}

inline std::string metrics_table(const std::array<ClassMetrics, kNumClasses>& m) {
    char buf[128];
    std::string out = "class        precision  recall     f1\n";
    for (int c = 0; c < kNumClasses; ++c) {
        std::snprintf(buf, sizeof(buf), "%-12s %-10.3f %-10.3f %-10.3f\n",
                      label_name(static_cast<ClassLabel>(c)), m[c].precision, m[c].recall,
                      m[c].f1);
        out += buf;
    }
    return out;
}

/// Machine-readable lines, one per (class, metric). %.17g round-trips
/// doubles, so equal models print byte-identical reports.
inline std::string metrics_kv(const std::array<ClassMetrics, kNumClasses>& m,
                              const std::string& prefix = "") {
    char buf[160];
    std::string out;
    for (int c = 0; c < kNumClasses; ++c) {
        std::string cls = prefix + kv::to_lower(label_name(static_cast<ClassLabel>(c)));
        std::snprintf(buf, sizeof(buf), "%s_precision = %.17g\n", cls.c_str(), m[c].precision);
        out += buf;
        std::snprintf(buf, sizeof(buf), "%s_recall = %.17g\n", cls.c_str(), m[c].recall);
        out += buf;
        std::snprintf(buf, sizeof(buf), "%s_f1 = %.17g\n", cls.c_str(), m[c].f1);
        out += buf;
    }
    return out;
}

} // namespace nesoc::flow
