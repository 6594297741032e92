#include <cmath>
#include <fstream>
#include <sstream>

#include "eadf/csv.hpp"
#include "eadf/error.hpp"
#include "eadf/eval.hpp"
#include "eadf/session.hpp"

namespace eadf {

using nlohmann::json;

UciDataset parse_uci(const std::string& text) {
    UciDataset data;
    for (const auto& row : csv::parse(text)) {
        if (row.fields.size() != UciDataset::kFeatures + 1) {
            throw ParseError(row.line, "expected " + std::to_string(UciDataset::kFeatures + 1) + " fields, found " +
                                           std::to_string(row.fields.size()));
        }
        std::vector<double> f(UciDataset::kFeatures);
        for (std::size_t i = 0; i < UciDataset::kFeatures; ++i) {
            const std::string& s = row.fields[i];
            char* end = nullptr;
            f[i] = std::strtod(s.c_str(), &end);
            if (s.empty() || *end != '\0' || !std::isfinite(f[i])) {
                throw ParseError(row.line, "invalid feature value '" + s + "'");
            }
        }
        const std::string& cls = row.fields.back();
        if (cls == "g") {
            data.labels.push_back(OracleLabel::positive());
        } else if (cls == "b") {
            data.labels.push_back(OracleLabel::negative());
        } else {
            throw ParseError(row.line, "class must be 'g' or 'b', found '" + cls + "'");
        }
        data.features.push_back(std::move(f));
    }
    if (data.features.size() != UciDataset::kRows) {
        throw ValidationError("ionosphere data must have " + std::to_string(UciDataset::kRows) + " rows, found " +
                              std::to_string(data.features.size()));
    }
    return data;
}

UciDataset load_uci(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_uci(ss.str());
}

UciResult run_uci(const UciDataset& data, const UciOptions& options) {
    if (data.features.size() != UciDataset::kRows || data.labels.size() != UciDataset::kRows) {
        throw ValidationError("malformed ionosphere dataset");
    }
    if (options.fusion != Algorithm::EADF && options.fusion != Algorithm::POCS) {
        throw ValidationError("ionosphere fusion must be eadf or pocs");
    }
    if (options.sub_classifiers.empty()) throw ValidationError("no sub-classifiers requested");

    const auto split = static_cast<std::ptrdiff_t>(UciDataset::kTrain);
    const std::vector<std::vector<double>> train_x(data.features.begin(), data.features.begin() + split);
    const std::vector<OracleLabel> train_y(data.labels.begin(), data.labels.begin() + split);
    const std::size_t n = data.features.size();
    const std::size_t m = options.sub_classifiers.size();

    // decisions[s][i]: +-1 output of sub-classifier i on sample s
    std::vector<std::vector<double>> decisions(n, std::vector<double>(m));
    UciResult result;
    for (std::size_t i = 0; i < m; ++i) {
        const ClassifierKind kind = options.sub_classifiers[i];
        const ClassifierParams& params = kind == ClassifierKind::KNN ? options.knn : options.logistic;
        const auto clf = train_classifier(kind, train_x, train_y, params);
        AccuracyEntry entry{std::string(to_string(kind)), 0.0, 0.0};
        for (std::size_t s = 0; s < n; ++s) {
            const OracleLabel l = clf->label(data.features[s]);
            decisions[s][i] = l.target();
            if (l == data.labels[s]) (s < UciDataset::kTrain ? entry.train_accuracy : entry.test_accuracy) += 1.0;
        }
        entry.train_accuracy /= static_cast<double>(UciDataset::kTrain);
        entry.test_accuracy /= static_cast<double>(n - UciDataset::kTrain);
        result.classifiers.push_back(std::move(entry));
    }

    FusionConfig cfg = options.fusion_config;
    cfg.algorithm = options.fusion;
    FusionSession session(cfg, m);
    for (std::size_t s = 0; s < UciDataset::kTrain; ++s) {
        session.apply(static_cast<std::int64_t>(s), DecisionVector(decisions[s]), data.labels[s].target());
    }
    result.weights = session.weights();

    result.fused.name = std::string(to_string(options.fusion));
    for (std::size_t s = 0; s < n; ++s) {
        if (decide(predict(result.weights, DecisionVector(decisions[s]))) == data.labels[s]) {
            (s < UciDataset::kTrain ? result.fused.train_accuracy : result.fused.test_accuracy) += 1.0;
        }
    }
    result.fused.train_accuracy /= static_cast<double>(UciDataset::kTrain);
    result.fused.test_accuracy /= static_cast<double>(n - UciDataset::kTrain);
    return result;
}

json uci_result_to_json(const UciResult& r) {
    json subs = json::array();
    for (const auto& e : r.classifiers) {
        subs.push_back({{"name", e.name}, {"train_accuracy", e.train_accuracy}, {"test_accuracy", e.test_accuracy}});
    }
    return json{{"sub_classifiers", subs},
                {"fused",
                 {{"name", r.fused.name},
                  {"train_accuracy", r.fused.train_accuracy},
                  {"test_accuracy", r.fused.test_accuracy}}},
                {"weights", r.weights.as_vector()}};
}

}  // namespace eadf
