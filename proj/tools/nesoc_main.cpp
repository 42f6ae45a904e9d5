// Command-line front end: ingest -> train/eval detector -> emit symbolic
// alert traces -> recognize plans -> extract patterns from CTI text.
//
// All data output goes to stdout or files; diagnostics go to stderr.
// Machine-readable output is line-oriented `key = value` text and is
// byte-stable for identical inputs and seed.

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "nesoc/cti.hpp"
#include "nesoc/error.hpp"
#include "nesoc/http_client.hpp"
#include "nesoc/kv.hpp"
#include "nesoc/ltlf.hpp"
#include "nesoc/mlp.hpp"
#include "nesoc/netflow_data.hpp"
#include "nesoc/plan_recognition.hpp"

namespace {

using namespace nesoc;

std::string fmt_g(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

// Option resolution: command-line flag beats config-file key beats the
// built-in default (the bound variable's initial value).
class Opts {
public:
    Opts(const CLI::App* cmd, const std::string& config_path) : cmd_(cmd) {
        if (!config_path.empty()) cfg_ = kv::KvFile::load(config_path);
    }

    bool provided(const char* flag, const char* key) const {
        return cmd_->count(flag) > 0 || cfg_.has(key);
    }

    std::string str(const char* flag, const char* key, const std::string& bound) const {
        if (cmd_->count(flag)) return bound;
        if (cfg_.has(key)) return cfg_.get(key);
        return bound;
    }

    double real(const char* flag, const char* key, double bound) const {
        if (cmd_->count(flag)) return bound;
        if (cfg_.has(key)) {
            std::string raw = cfg_.get(key);
            try {
                std::size_t pos = 0;
                double v = std::stod(raw, &pos);
                if (pos == raw.size()) return v;
            } catch (const std::exception&) {
            }
            throw Error(std::string("config key '") + key + "': expected a number, got '" + raw +
                        "'");
        }
        return bound;
    }

    std::uint64_t uint(const char* flag, const char* key, std::uint64_t bound) const {
        if (cmd_->count(flag)) return bound;
        if (cfg_.has(key)) {
            std::string raw = cfg_.get(key);
            try {
                std::size_t pos = 0;
                std::uint64_t v = std::stoull(raw, &pos);
                if (pos == raw.size()) return v;
            } catch (const std::exception&) {
            }
            throw Error(std::string("config key '") + key + "': expected an integer, got '" +
                        raw + "'");
        }
        return bound;
    }

private:
    const CLI::App* cmd_;
    kv::KvFile cfg_;
};

flow::Schema schema_for(const std::string& path) {
    return path.empty() ? flow::default_schema() : flow::load_schema(path);
}

std::string require(const std::string& value, const char* what) {
    if (value.empty()) throw Error(std::string(what) + " is required");
    return value;
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open file: " + path);
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct TrainArgs {
    std::string config, data, schema, nws_config, out = ".";
    std::uint64_t seed = 1;
    std::uint64_t epochs = 200, batch_size = 512;
    double fraction = 0.7, learning_rate = 0.01, p_exponent = 2.0;
};

void run_train(const CLI::App* cmd, const TrainArgs& a) {
    Opts o(cmd, a.config);
    std::string data = require(o.str("--data", "data", a.data), "--data (or config key 'data')");
    std::string nws_path = require(o.str("--nws-config", "nws_config", a.nws_config),
                                   "--nws-config (or config key 'nws_config')");
    std::string out_dir = o.str("--out", "out", a.out);
    std::uint64_t seed = o.uint("--seed", "seed", a.seed);
    std::uint64_t epochs = o.uint("--epochs", "epochs", a.epochs);
    std::uint64_t batch = o.uint("--batch-size", "batch_size", a.batch_size);
    double fraction = o.real("--fraction", "fraction", a.fraction);
    double lr = o.real("--learning-rate", "learning_rate", a.learning_rate);
    double p = o.real("--p-exponent", "p_exponent", a.p_exponent);

    flow::Dataset ds = flow::load_flows(data, schema_for(o.str("--schema", "schema", a.schema)));
    auto [train_ds, test_ds] = flow::split(ds, fraction, seed);
    flow::NormStats stats = flow::compute_stats(train_ds);
    flow::NwsConfig nws_cfg = flow::load_nws_config(nws_path);
    std::vector<std::size_t> nws = flow::compute_nws(train_ds, nws_cfg);
    net::TrainSet ts = net::make_train_set(train_ds, stats);

    net::TrainConfig tc;
    tc.epochs = epochs;
    tc.batch_size = batch;
    tc.seed = seed;
    tc.learning_rate = lr;
    tc.p_exponent = p;

    std::cerr << "training baseline (" << epochs << " epochs, " << ts.size() << " samples)\n";
    tc.mode = net::TrainMode::Baseline;
    net::TrainResult base = net::train_baseline(ts, tc);
    std::cerr << "training ltn (" << epochs << " epochs, " << nws.size() << " NWS samples)\n";
    tc.mode = net::TrainMode::Ltn;
    net::TrainResult ltn = net::train_ltn(ts, nws, tc);

    std::filesystem::create_directories(out_dir);
    auto save = [&](const std::string& name, const net::MlpModel& model, const char* mode) {
        net::Checkpoint ck;
        ck.model = model;
        ck.stats = stats;
        ck.mode = mode;
        ck.seed = seed;
        ck.epochs = epochs;
        ck.batch_size = batch;
        ck.learning_rate = lr;
        ck.p_exponent = p;
        ck.train_fraction = fraction;
        net::save_checkpoint((std::filesystem::path(out_dir) / name).string(), ck);
    };
    save("baseline.ckpt", base.model, "baseline");
    save("ltn.ckpt", ltn.model, "ltn");

    std::ofstream log((std::filesystem::path(out_dir) / "train_log.txt").string());
    if (!log) throw Error("cannot write training log in " + out_dir);
    for (std::size_t i = 0; i < base.history.size(); ++i)
        log << "baseline_loss_" << i << " = " << fmt_g(base.history[i]) << "\n";
    for (std::size_t i = 0; i < ltn.history.size(); ++i)
        log << "ltn_sat_" << i << " = " << fmt_g(ltn.history[i]) << "\n";

    std::cout << "flows_total = " << ds.size() << "\n";
    std::cout << "flows_dropped = " << ds.dropped_rows << "\n";
    std::cout << "train_size = " << train_ds.size() << "\n";
    std::cout << "test_size = " << test_ds.size() << "\n";
    std::cout << "nws_train_size = " << nws.size() << "\n";
    if (!base.history.empty())
        std::cout << "baseline_final_loss = " << fmt_g(base.history.back()) << "\n";
    if (!ltn.history.empty())
        std::cout << "ltn_final_sat = " << fmt_g(ltn.history.back()) << "\n";
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

struct EvalArgs {
    std::string config, data, schema, nws_config;
    std::string baseline_model = "baseline.ckpt", ltn_model = "ltn.ckpt";
    std::uint64_t seed = 0;
    double fraction = 0.0;
    bool check_directional = false;
};

std::vector<flow::ClassLabel> classify_all(const net::Checkpoint& ck, const flow::Dataset& ds) {
    std::vector<flow::ClassLabel> out;
    out.reserve(ds.size());
    for (const auto& r : ds.records)
        out.push_back(net::classify(ck.model, flow::extract_features(r, ck.stats)));
    return out;
}

std::size_t count_nws_attacks(const std::vector<flow::ClassLabel>& pred,
                              const std::vector<std::size_t>& nws) {
    std::size_t n = 0;
    for (std::size_t i : nws)
        if (pred[i] != flow::ClassLabel::Benign) ++n;
    return n;
}

void run_eval(const CLI::App* cmd, const EvalArgs& a) {
    Opts o(cmd, a.config);
    std::string data = require(o.str("--data", "data", a.data), "--data (or config key 'data')");
    net::Checkpoint base_ck =
        net::load_checkpoint(o.str("--baseline-model", "baseline_model", a.baseline_model));
    net::Checkpoint ltn_ck = net::load_checkpoint(o.str("--ltn-model", "ltn_model", a.ltn_model));
    if (base_ck.seed != ltn_ck.seed || base_ck.train_fraction != ltn_ck.train_fraction)
        throw Error("checkpoints disagree on seed or train fraction; retrain them together");

    std::uint64_t seed = o.provided("--seed", "seed") ? o.uint("--seed", "seed", a.seed)
                                                      : base_ck.seed;
    double fraction = o.provided("--fraction", "fraction")
                          ? o.real("--fraction", "fraction", a.fraction)
                          : base_ck.train_fraction;

    flow::Dataset ds = flow::load_flows(data, schema_for(o.str("--schema", "schema", a.schema)));
    auto [train_ds, test_ds] = flow::split(ds, fraction, seed);

    std::vector<flow::ClassLabel> truth;
    truth.reserve(test_ds.size());
    for (const auto& r : test_ds.records) truth.push_back(r.label);

    std::vector<flow::ClassLabel> base_pred = classify_all(base_ck, test_ds);
    std::vector<flow::ClassLabel> ltn_pred = classify_all(ltn_ck, test_ds);
    auto base_m = flow::metrics(base_pred, truth);
    auto ltn_m = flow::metrics(ltn_pred, truth);

    std::cout << "== baseline ==\n" << flow::metrics_table(base_m);
    std::cout << "== ltn ==\n" << flow::metrics_table(ltn_m);
    std::cout << "reference (reported on the full corpus, for context only):\n"
              << "  baseline: Benign 0.999/0.916/0.956  BruteForce 0.090/0.686/0.159  "
                 "XSS 0.088/0.628/0.155\n"
              << "  ltn:      Benign 0.998/0.963/0.981  BruteForce 0.155/0.622/0.248  "
                 "XSS 0.213/0.648/0.321\n\n";

    std::cout << "test_size = " << test_ds.size() << "\n";
    std::cout << flow::metrics_kv(base_m, "baseline_");
    std::cout << flow::metrics_kv(ltn_m, "ltn_");

    std::string nws_path = o.str("--nws-config", "nws_config", a.nws_config);
    bool directional = a.check_directional || o.provided("--check-directional", "check_directional");
    std::size_t base_nws = 0, ltn_nws = 0;
    if (!nws_path.empty()) {
        flow::NwsConfig nws_cfg = flow::load_nws_config(nws_path);
        std::vector<std::size_t> nws = flow::compute_nws(test_ds, nws_cfg);
        base_nws = count_nws_attacks(base_pred, nws);
        ltn_nws = count_nws_attacks(ltn_pred, nws);
        std::cout << "nws_test_size = " << nws.size() << "\n";
        std::cout << "baseline_nws_attack_count = " << base_nws << "\n";
        std::cout << "ltn_nws_attack_count = " << ltn_nws << "\n";
    } else if (directional) {
        throw Error("--check-directional requires --nws-config");
    }

    if (directional) {
        int bf = static_cast<int>(flow::ClassLabel::BruteForce);
        int xss = static_cast<int>(flow::ClassLabel::Xss);
        int ben = static_cast<int>(flow::ClassLabel::Benign);
        bool prec_ok = ltn_m[bf].precision >= base_m[bf].precision &&
                       ltn_m[xss].precision >= base_m[xss].precision;
        bool nws_ok = ltn_nws < base_nws;
        bool recall_ok = ltn_m[ben].recall >= base_m[ben].recall - 0.01;
        std::cout << "directional_attack_precision_ok = " << (prec_ok ? 1 : 0) << "\n";
        std::cout << "directional_nws_suppression_ok = " << (nws_ok ? 1 : 0) << "\n";
        std::cout << "directional_benign_recall_ok = " << (recall_ok ? 1 : 0) << "\n";
    }
}

// ---------------------------------------------------------------------------
// detect
// ---------------------------------------------------------------------------

struct DetectArgs {
    std::string config, data, schema, model, alert_map, out_trace = "trace.txt";
};

void run_detect(const CLI::App* cmd, const DetectArgs& a) {
    Opts o(cmd, a.config);
    std::string data = require(o.str("--data", "data", a.data), "--data (or config key 'data')");
    std::string model_path =
        require(o.str("--model", "model", a.model), "--model (or config key 'model')");
    std::string map_path = require(o.str("--alert-map", "alert_map", a.alert_map),
                                   "--alert-map (or config key 'alert_map')");
    std::string out_trace = o.str("--out-trace", "out_trace", a.out_trace);

    net::Checkpoint ck = net::load_checkpoint(model_path);
    flow::Dataset ds = flow::load_flows(data, schema_for(o.str("--schema", "schema", a.schema)));

    kv::KvFile map = kv::KvFile::load(map_path);
    std::array<std::string, flow::kNumClasses> alert_for;
    for (int c = 1; c < flow::kNumClasses; ++c) {
        std::string key = kv::to_lower(flow::label_name(static_cast<flow::ClassLabel>(c)));
        if (!map.has(key))
            throw Error("alert map is missing key '" + key + "' in " + map_path);
        alert_for[c] = map.get(key);
        if (!ltlf::is_atom_name(alert_for[c]))
            throw Error("alert map value for '" + key + "' is not a valid atom: '" +
                        alert_for[c] + "'");
    }

    std::array<std::size_t, flow::kNumClasses> counts{};
    std::ofstream out(out_trace);
    if (!out) throw Error("cannot write trace file: " + out_trace);
    for (const auto& r : ds.records) {
        flow::ClassLabel cls = net::classify(ck.model, flow::extract_features(r, ck.stats));
        ++counts[static_cast<int>(cls)];
        if (cls != flow::ClassLabel::Benign) out << alert_for[static_cast<int>(cls)] << "\n";
    }

    std::cout << "flows_total = " << ds.size() << "\n";
    std::cout << "benign_count = " << counts[0] << "\n";
    std::cout << "bruteforce_count = " << counts[1] << "\n";
    std::cout << "xss_count = " << counts[2] << "\n";
    std::cout << "alerts_emitted = " << counts[1] + counts[2] << "\n";
}

// ---------------------------------------------------------------------------
// recognize
// ---------------------------------------------------------------------------

struct RecognizeArgs {
    std::string config, trace, rules, plans;
    std::uint64_t max_witnesses = 10;
};

std::string witness_compact(const plan::Witness& w) {
    std::string out;
    for (const auto& step : w) {
        if (!step.technique) continue;
        if (!out.empty()) out += ' ';
        out += std::to_string(step.position) + ":" + *step.technique;
    }
    return out;
}

void run_recognize(const CLI::App* cmd, const RecognizeArgs& a) {
    Opts o(cmd, a.config);
    std::string trace_path =
        require(o.str("--trace", "trace", a.trace), "--trace (or config key 'trace')");
    std::string rules_path =
        require(o.str("--rules", "rules", a.rules), "--rules (or config key 'rules')");
    std::string plans_path =
        require(o.str("--plans", "plans", a.plans), "--plans (or config key 'plans')");
    std::uint64_t max_witnesses = o.uint("--max-witnesses", "max_witnesses", a.max_witnesses);

    plan::AlertTrace trace = plan::load_alert_trace(trace_path);
    std::vector<plan::TechniqueRule> rules = plan::load_rule_file(rules_path);
    std::vector<ltlf::PlanPattern> plans = ltlf::load_plan_library(plans_path);
    if (plans.empty()) return;  // nothing to report

    std::vector<plan::RecognitionResult> results =
        plan::recognize(trace, rules, plans, max_witnesses);

    for (const auto& res : results) {
        for (const auto& w : res.warnings) std::cerr << "warning: " << w << "\n";
        std::cout << "plan " << res.plan_id << ": "
                  << (res.plausible ? "plausible" : "implausible") << " (" << res.witnesses.size()
                  << " witness" << (res.witnesses.size() == 1 ? "" : "es") << " shown)\n";
        for (std::size_t j = 0; j < res.witnesses.size(); ++j) {
            std::cout << "  witness " << j << ":";
            for (const auto& step : res.witnesses[j])
                std::cout << " " << step.position << ":" << step.alert << "="
                          << (step.technique ? *step.technique : std::string("-"));
            std::cout << "\n";
        }
    }
    std::cout << "\n";
    for (const auto& res : results) {
        std::cout << "plan_" << res.plan_id << "_plausible = " << (res.plausible ? 1 : 0) << "\n";
        std::cout << "plan_" << res.plan_id << "_witness_count = " << res.witnesses.size() << "\n";
        for (std::size_t j = 0; j < res.witnesses.size(); ++j)
            std::cout << "plan_" << res.plan_id << "_witness_" << j << " = "
                      << witness_compact(res.witnesses[j]) << "\n";
    }
}

// ---------------------------------------------------------------------------
// extract
// ---------------------------------------------------------------------------

struct ExtractArgs {
    std::string config, report, table, backend = "keyword", plan_id = "planX", append_to,
                endpoint;
};

void run_extract(const CLI::App* cmd, const ExtractArgs& a) {
    Opts o(cmd, a.config);
    std::string report_path =
        require(o.str("--report", "report", a.report), "--report (or config key 'report')");
    std::string backend = o.str("--backend", "backend", a.backend);
    std::string plan_id = o.str("--plan-id", "plan_id", a.plan_id);
    std::string append_to = o.str("--append-to", "append_to", a.append_to);
    std::string report = read_text_file(report_path);

    ltlf::PlanPattern plan;
    if (backend == "keyword") {
        std::string table_path =
            require(o.str("--table", "table", a.table), "--table (or config key 'table')");
        cti::KeywordTable table = cti::load_keyword_table(table_path);
        plan = cti::extract_plan(report, table, plan_id);
    } else if (backend == "remote") {
        std::string endpoint = require(o.str("--endpoint", "endpoint", a.endpoint),
                                       "--endpoint (or config key 'endpoint')");
        const char* key = std::getenv("NESOC_API_KEY");
        if (!key || !*key)
            throw Error("remote backend requires the NESOC_API_KEY environment variable");
        cti::HttpCompletionBackend remote({endpoint, key}, &std::cerr);
        plan = cti::extract_plan_remote(report, remote, plan_id);
    } else {
        throw Error("unknown backend '" + backend + "' (use 'keyword' or 'remote')");
    }

    std::string line = ltlf::format_plan(plan);
    if (!append_to.empty()) {
        std::ofstream out(append_to, std::ios::app);
        if (!out) throw Error("cannot append to plan library: " + append_to);
        out << line << "\n";
    }
    std::cout << line << "\n";
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"neurosymbolic security operations toolkit"};
    app.require_subcommand(1);

    TrainArgs train_args;
    CLI::App* train = app.add_subcommand("train", "train baseline and axiom-constrained models");
    train->add_option("--config", train_args.config, "key-value config file");
    train->add_option("--data", train_args.data, "flow CSV");
    train->add_option("--schema", train_args.schema, "CSV schema remap file");
    train->add_option("--nws-config", train_args.nws_config, "web-server config for the NWS set");
    train->add_option("--out", train_args.out, "output directory");
    train->add_option("--seed", train_args.seed, "RNG seed (default 1)");
    train->add_option("--epochs", train_args.epochs, "training epochs (default 200)");
    train->add_option("--batch-size", train_args.batch_size, "mini-batch size above 10k samples");
    train->add_option("--fraction", train_args.fraction, "train fraction (default 0.7)");
    train->add_option("--learning-rate", train_args.learning_rate, "Adam learning rate");
    train->add_option("--p-exponent", train_args.p_exponent, "quantifier aggregation exponent");
    train->callback([&] { run_train(train, train_args); });

    EvalArgs eval_args;
    CLI::App* eval = app.add_subcommand("eval", "evaluate both models on the test split");
    eval->add_option("--config", eval_args.config, "key-value config file");
    eval->add_option("--data", eval_args.data, "flow CSV");
    eval->add_option("--schema", eval_args.schema, "CSV schema remap file");
    eval->add_option("--nws-config", eval_args.nws_config, "web-server config for NWS counts");
    eval->add_option("--baseline-model", eval_args.baseline_model, "baseline checkpoint");
    eval->add_option("--ltn-model", eval_args.ltn_model, "ltn checkpoint");
    eval->add_option("--seed", eval_args.seed, "split seed (default: from checkpoint)");
    eval->add_option("--fraction", eval_args.fraction, "train fraction (default: from checkpoint)");
    eval->add_flag("--check-directional", eval_args.check_directional,
                   "report the three directional properties");
    eval->callback([&] { run_eval(eval, eval_args); });

    DetectArgs detect_args;
    CLI::App* detect = app.add_subcommand("detect", "classify flows and emit an alert trace");
    detect->add_option("--config", detect_args.config, "key-value config file");
    detect->add_option("--data", detect_args.data, "flow CSV");
    detect->add_option("--schema", detect_args.schema, "CSV schema remap file");
    detect->add_option("--model", detect_args.model, "checkpoint to classify with");
    detect->add_option("--alert-map", detect_args.alert_map,
                       "key-value map from class to alert atom");
    detect->add_option("--out-trace", detect_args.out_trace, "alert trace output path");
    detect->callback([&] { run_detect(detect, detect_args); });

    RecognizeArgs rec_args;
    CLI::App* recognize = app.add_subcommand("recognize", "match plan patterns against a trace");
    recognize->add_option("--config", rec_args.config, "key-value config file");
    recognize->add_option("--trace", rec_args.trace, "alert trace file");
    recognize->add_option("--rules", rec_args.rules, "alert-to-technique rule file");
    recognize->add_option("--plans", rec_args.plans, "plan library file");
    recognize->add_option("--max-witnesses", rec_args.max_witnesses,
                          "witness cap per plan (default 10)");
    recognize->callback([&] { run_recognize(recognize, rec_args); });

    ExtractArgs extract_args;
    CLI::App* extract = app.add_subcommand("extract", "turn a CTI report into a plan pattern");
    extract->add_option("--config", extract_args.config, "key-value config file");
    extract->add_option("--report", extract_args.report, "CTI report text file");
    extract->add_option("--table", extract_args.table, "keyword table (keyword backend)");
    extract->add_option("--backend", extract_args.backend, "'keyword' or 'remote'");
    extract->add_option("--plan-id", extract_args.plan_id, "id for the extracted pattern");
    extract->add_option("--append-to", extract_args.append_to, "plan library to append to");
    extract->add_option("--endpoint", extract_args.endpoint, "completion endpoint URL (remote)");
    extract->callback([&] { run_extract(extract, extract_args); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
