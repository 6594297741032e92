// eadf: command line front end.
//
//   simulate  generate a decision stream from a config or a reference scenario
//   run       compare fusion algorithms over a stream and write a report
//   uci       ionosphere train/test fusion protocol
//   extract   region covariance features for an image manifest
//   alarms    morphological cleanup and connected components of a mask
//   serve     start the oracle service
//
// Exit status: 0 success, 2 invalid input or configuration, 1 anything else.

#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "eadf/alarm.hpp"
#include "eadf/classifier.hpp"
#include "eadf/covariance.hpp"
#include "eadf/csv.hpp"
#include "eadf/error.hpp"
#include "eadf/eval.hpp"
#include "eadf/http_api.hpp"
#include "eadf/serialize.hpp"
#include "eadf/service.hpp"
#include "eadf/stream.hpp"

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

constexpr int kExitInvalid = 2;

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw eadf::ValidationError("cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

json read_json(const fs::path& path) {
    try {
        return json::parse(read_text(path));
    } catch (const json::parse_error& e) {
        throw eadf::ValidationError("invalid JSON in '" + path.string() + "': " + e.what());
    }
}

eadf::StreamConfig reference_config(const std::string& name, std::optional<std::uint64_t> seed) {
    if (name == "drift") return seed ? eadf::reference_drift_config(*seed) : eadf::reference_drift_config();
    if (name == "regime") return seed ? eadf::regime_switch_config(*seed) : eadf::regime_switch_config();
    throw eadf::ValidationError("unknown reference scenario '" + name + "' (drift, regime)");
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

// ---------------------------------------------------------------- simulate

struct SimulateArgs {
    std::string config;
    std::string reference;
    std::optional<std::uint64_t> seed;
    std::optional<std::int64_t> length;
    std::string out;
    std::string format;
};

int simulate(const SimulateArgs& a) {
    if (a.config.empty() == a.reference.empty()) {
        throw eadf::ValidationError("give exactly one of --config or --reference");
    }
    eadf::StreamConfig cfg =
        a.config.empty() ? reference_config(a.reference, a.seed) : eadf::load_stream_config(a.config);
    if (a.seed) cfg.seed = *a.seed;
    if (a.length) cfg.length = *a.length;
    const auto events = eadf::generate_stream(cfg);
    const auto format = a.format.empty() ? eadf::stream_format_from_path(a.out)
                        : a.format == "csv" ? eadf::StreamFormat::CSV
                                            : eadf::StreamFormat::JSONL;
    eadf::save_stream(a.out, events, format);
    std::cout << "wrote " << events.size() << " events to " << a.out << '\n';
    return 0;
}

// ---------------------------------------------------------------- run

struct RunArgs {
    std::string stream;
    std::string reference;
    std::string config;
    std::string algorithms = "eadf,pocs,ulp,fixed";
    std::optional<double> mu;
    std::optional<double> c;
    std::string solver;
    std::optional<std::int64_t> freeze_after;
    std::string report;
    std::string format;
    std::optional<std::uint64_t> seed;
};

int run(const RunArgs& a) {
    if (a.stream.empty() == a.reference.empty()) {
        throw eadf::ValidationError("give exactly one of --stream or --reference");
    }
    std::vector<eadf::FusionEvent> events;
    if (!a.stream.empty()) {
        if (a.seed) std::cerr << "note: --seed is ignored with --stream\n";
        events = eadf::load_stream(a.stream, eadf::stream_format_from_path(a.stream));
    } else {
        events = eadf::generate_stream(reference_config(a.reference, a.seed));
    }

    eadf::FusionConfig base = a.config.empty() ? eadf::FusionConfig{} : eadf::fusion_config_from_json(read_json(a.config));
    if (a.mu) base.mu = *a.mu;
    if (a.c) base.c = *a.c;
    if (!a.solver.empty()) base.solver = eadf::parse_solver(a.solver);
    base.validate();

    std::vector<eadf::Algorithm> algs;
    for (const auto& name : split_list(a.algorithms)) algs.push_back(eadf::parse_algorithm(name));
    if (algs.empty()) throw eadf::ValidationError("--algorithms is empty");

    const auto policy = a.freeze_after ? eadf::FeedbackPolicy::train_then_freeze(*a.freeze_after)
                                       : eadf::FeedbackPolicy::always();
    if (a.freeze_after && *a.freeze_after < 0) throw eadf::ValidationError("--freeze-after must be >= 0");
    const auto metrics = eadf::run_comparison(events, algs, base, policy);

    if (!a.report.empty()) {
        eadf::ReportFormat fmt = eadf::ReportFormat::JSON;
        if (a.format == "csv" || (a.format.empty() && fs::path(a.report).extension() == ".csv")) {
            fmt = eadf::ReportFormat::CSV;
        }
        eadf::emit_report(metrics, a.report, fmt);
    }
    std::cout << eadf::report_to_csv(metrics);
    return 0;
}

// ---------------------------------------------------------------- uci

int uci(const std::string& data, const std::string& fusion, const std::string& out) {
    eadf::UciOptions opts;
    opts.fusion = eadf::parse_algorithm(fusion);
    const auto result = eadf::run_uci(eadf::load_uci(data), opts);
    const std::string text = eadf::uci_result_to_json(result).dump(2);
    if (!out.empty()) {
        std::ofstream f(out, std::ios::trunc);
        if (!f) throw eadf::ValidationError("cannot write '" + out + "'");
        f << text << '\n';
    }
    std::cout << text << '\n';
    return 0;
}

// ---------------------------------------------------------------- extract

struct ExtractArgs {
    std::string manifest;
    std::string out;
    std::string border = "interior";
    std::string train;
    std::string model;
    int k = 4;
};

int extract(const ExtractArgs& a) {
    const auto policy = a.border == "interior"    ? eadf::BorderPolicy::InteriorOnly
                        : a.border == "replicate" ? eadf::BorderPolicy::ReplicateEdge
                                                  : throw eadf::ValidationError("--border must be interior or replicate");
    const fs::path base = fs::path(a.manifest).parent_path();
    const auto rows = eadf::csv::parse(read_text(a.manifest));
    if (rows.empty() || rows.front().fields != std::vector<std::string>{"path", "label"}) {
        throw eadf::ValidationError("manifest must start with the header 'path,label'");
    }

    std::vector<std::vector<double>> features;
    std::vector<eadf::OracleLabel> labels;
    std::ostringstream csv;
    csv << "path,label";
    for (std::size_t i = 1; i <= eadf::kRegionFeatureSize; ++i) csv << ",f" << i;
    csv << '\n';
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        if (row.fields.size() != 2) throw eadf::ParseError(row.line, "expected 'path,label'");
        eadf::OracleLabel label = eadf::OracleLabel::negative();
        try {
            label = eadf::OracleLabel::from_int(std::stoll(row.fields[1]));
        } catch (const std::logic_error&) {
            throw eadf::ParseError(row.line, "label must be -1 or 1");
        }
        fs::path img = row.fields[0];
        if (img.is_relative()) img = base / img;
        eadf::RegionFeature f;
        try {
            f = eadf::describe_region(eadf::load_image(img), policy);
        } catch (const eadf::Error& e) {
            throw eadf::ParseError(row.line, img.string() + ": " + e.what());
        }
        csv << eadf::csv::escape(row.fields[0]) << ',' << label.value();
        for (double v : f) csv << ',' << json(v).dump();
        csv << '\n';
        features.emplace_back(f.begin(), f.end());
        labels.push_back(label);
    }

    if (!a.out.empty()) {
        std::ofstream out(a.out, std::ios::binary | std::ios::trunc);
        if (!out) throw eadf::ValidationError("cannot write '" + a.out + "'");
        out << csv.str();
    } else {
        std::cout << csv.str();
    }

    if (!a.train.empty()) {
        if (a.model.empty()) throw eadf::ValidationError("--train needs --model");
        eadf::ClassifierParams params;
        params.k = a.k;
        const auto clf = eadf::train_classifier(eadf::parse_classifier_kind(a.train), features, labels, params);
        eadf::save_classifier(*clf, a.model);
        std::size_t correct = 0;
        for (std::size_t i = 0; i < features.size(); ++i) correct += clf->label(features[i]) == labels[i];
        std::cerr << "trained " << a.train << " on " << features.size() << " regions, training accuracy "
                  << static_cast<double>(correct) / static_cast<double>(features.size()) << '\n';
    }
    return 0;
}

// ---------------------------------------------------------------- alarms

int alarms(const std::string& mask_path, int radius, std::size_t min_pixels, const std::string& out_mask) {
    const auto cleaned = eadf::morph_open(eadf::load_mask(mask_path), radius);
    if (!out_mask.empty()) eadf::save_mask(out_mask, cleaned);
    std::cout << eadf::alarms_to_json(eadf::extract_alarms(cleaned, min_pixels)).dump(2) << '\n';
    return 0;
}

// ---------------------------------------------------------------- serve

eadf::OracleServer* g_server = nullptr;

extern "C" void on_signal(int) {
    if (g_server) g_server->stop();
}

int serve(const std::string& host, int port, const std::string& data_dir) {
    eadf::SessionManager sessions(data_dir.empty() ? std::nullopt : std::optional<fs::path>(data_dir));
    eadf::OracleServer server(sessions);
    const int bound = server.bind(host, port);
    g_server = &server;
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    std::cout << "listening on http://" << host << ':' << bound << std::endl;
    server.run();
    g_server = nullptr;
    sessions.close_all();
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Entropic adaptive decision fusion toolkit"};
    app.require_subcommand(1);

    SimulateArgs sim;
    auto* simulate_cmd = app.add_subcommand("simulate", "Generate a decision stream");
    simulate_cmd->add_option("--config", sim.config, "Stream config JSON");
    simulate_cmd->add_option("--reference", sim.reference, "Reference scenario: drift or regime");
    simulate_cmd->add_option("--seed", sim.seed, "Override the seed");
    simulate_cmd->add_option("--length", sim.length, "Override the step count");
    simulate_cmd->add_option("--out", sim.out, "Output path (.jsonl or .csv)")->required();
    simulate_cmd->add_option("--format", sim.format, "jsonl or csv (default: from extension)")
        ->check(CLI::IsMember({"jsonl", "csv"}));

    RunArgs ra;
    auto* run_cmd = app.add_subcommand("run", "Compare fusion algorithms on a stream");
    run_cmd->add_option("--stream", ra.stream, "Stream file (.jsonl or .csv)");
    run_cmd->add_option("--reference", ra.reference, "Reference scenario: drift or regime");
    run_cmd->add_option("--config", ra.config, "Fusion config JSON (flags override)");
    run_cmd->add_option("--algorithms", ra.algorithms, "Comma-separated list")->capture_default_str();
    run_cmd->add_option("--mu", ra.mu, "POCS relaxation");
    run_cmd->add_option("--c", ra.c, "ULP temperature");
    run_cmd->add_option("--solver", ra.solver, "root or grid");
    run_cmd->add_option("--freeze-after", ra.freeze_after, "Feedback only for the first k events");
    run_cmd->add_option("--report", ra.report, "Report path");
    run_cmd->add_option("--format", ra.format, "json or csv (default: from extension)")
        ->check(CLI::IsMember({"json", "csv"}));
    run_cmd->add_option("--seed", ra.seed, "Seed for --reference");

    std::string uci_data = "data/ionosphere.data";
    std::string uci_fusion = "eadf";
    std::string uci_out;
    auto* uci_cmd = app.add_subcommand("uci", "Ionosphere fusion protocol");
    uci_cmd->add_option("--data", uci_data, "Ionosphere CSV")->capture_default_str();
    uci_cmd->add_option("--fusion", uci_fusion, "eadf or pocs")->capture_default_str();
    uci_cmd->add_option("--out", uci_out, "Also write the JSON result here");

    ExtractArgs ea;
    auto* extract_cmd = app.add_subcommand("extract", "Region covariance features for an image manifest");
    extract_cmd->add_option("--manifest", ea.manifest, "CSV with header path,label")->required();
    extract_cmd->add_option("--out", ea.out, "Feature CSV (default stdout)");
    extract_cmd->add_option("--border", ea.border, "interior or replicate")->capture_default_str();
    extract_cmd->add_option("--train", ea.train, "Train a classifier: logistic, knn or ncc");
    extract_cmd->add_option("--model", ea.model, "Where to save the trained classifier");
    extract_cmd->add_option("--k", ea.k, "k for knn")->capture_default_str();

    std::string mask_path;
    std::string out_mask;
    int radius = 1;
    std::size_t min_pixels = eadf::kDefaultMinPixels;
    auto* alarms_cmd = app.add_subcommand("alarms", "Alarm regions of a binary mask");
    alarms_cmd->add_option("--mask", mask_path, "P5 mask (0 background)")->required();
    alarms_cmd->add_option("--radius", radius, "Opening radius")->capture_default_str();
    alarms_cmd->add_option("--min-pixels", min_pixels, "Components must be larger than this")->capture_default_str();
    alarms_cmd->add_option("--out-mask", out_mask, "Write the cleaned mask");

    std::string host = "127.0.0.1";
    int port = 8080;
    std::string data_dir;
    auto* serve_cmd = app.add_subcommand("serve", "Start the oracle service");
    serve_cmd->add_option("--host", host)->capture_default_str();
    serve_cmd->add_option("--port", port)->capture_default_str();
    serve_cmd->add_option("--data-dir", data_dir, "Persist session logs here");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitInvalid;
    }

    try {
        if (*simulate_cmd) return simulate(sim);
        if (*run_cmd) return run(ra);
        if (*uci_cmd) return uci(uci_data, uci_fusion, uci_out);
        if (*extract_cmd) return extract(ea);
        if (*alarms_cmd) return alarms(mask_path, radius, min_pixels, out_mask);
        if (*serve_cmd) return serve(host, port, data_dir);
    } catch (const eadf::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitInvalid;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}
