#include "eadf/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "eadf/error.hpp"

namespace eadf {

using nlohmann::json;

namespace {

void check_training_set(const std::vector<std::vector<double>>& features, const std::vector<OracleLabel>& labels) {
    if (features.size() != labels.size()) {
        throw DimensionError("feature and label counts differ");
    }
    if (features.empty()) throw ValidationError("training set is empty");
    const std::size_t d = features.front().size();
    if (d == 0) throw DimensionError("feature vectors are empty");
    for (const auto& f : features) {
        if (f.size() != d) throw DimensionError("training features have inconsistent length");
    }
    const bool has_pos = std::any_of(labels.begin(), labels.end(), [](OracleLabel l) { return l.is_positive(); });
    const bool has_neg = std::any_of(labels.begin(), labels.end(), [](OracleLabel l) { return !l.is_positive(); });
    if (!has_pos || !has_neg) throw ValidationError("training set needs at least one example per class");
}

double dot(std::span<const double> a, std::span<const double> b) {
    return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

double cosine(std::span<const double> a, std::span<const double> b) {
    const double na = std::sqrt(dot(a, a));
    const double nb = std::sqrt(dot(b, b));
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot(a, b) / (na * nb);
}

double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

// log(1 + exp(-m)) without overflow.
double logistic_loss(double margin) {
    return margin > 0.0 ? std::log1p(std::exp(-margin)) : -margin + std::log1p(std::exp(margin));
}

std::vector<int> labels_to_ints(const std::vector<OracleLabel>& labels) {
    std::vector<int> out;
    out.reserve(labels.size());
    for (auto l : labels) out.push_back(l.value());
    return out;
}

std::vector<OracleLabel> ints_to_labels(const std::vector<int>& v) {
    std::vector<OracleLabel> out;
    out.reserve(v.size());
    for (int x : v) out.push_back(OracleLabel::from_int(x));
    return out;
}

}  // namespace

Standardizer::Standardizer(std::vector<double> mean, std::vector<double> scale)
    : mean_(std::move(mean)), scale_(std::move(scale)) {
    if (mean_.size() != scale_.size()) throw DimensionError("standardizer mean/scale length mismatch");
    for (double s : scale_) {
        if (!(s > 0.0)) throw ValidationError("standardizer scale must be positive");
    }
}

Standardizer Standardizer::fit(const std::vector<std::vector<double>>& rows) {
    if (rows.empty()) throw ValidationError("cannot standardize an empty set");
    const std::size_t d = rows.front().size();
    std::vector<double> mean(d, 0.0);
    std::vector<double> var(d, 0.0);
    for (const auto& r : rows) {
        if (r.size() != d) throw DimensionError("rows have inconsistent length");
        for (std::size_t i = 0; i < d; ++i) mean[i] += r[i];
    }
    const double n = static_cast<double>(rows.size());
    for (double& m : mean) m /= n;
    for (const auto& r : rows) {
        for (std::size_t i = 0; i < d; ++i) var[i] += (r[i] - mean[i]) * (r[i] - mean[i]);
    }
    std::vector<double> scale(d);
    for (std::size_t i = 0; i < d; ++i) {
        const double s = std::sqrt(var[i] / n);
        scale[i] = s > 1e-12 ? s : 1.0;
    }
    return Standardizer(std::move(mean), std::move(scale));
}

std::vector<double> Standardizer::apply(std::span<const double> x) const {
    if (x.size() != mean_.size()) {
        throw DimensionError("expected " + std::to_string(mean_.size()) + " features, got " +
                             std::to_string(x.size()));
    }
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = (x[i] - mean_[i]) / scale_[i];
    return out;
}

OracleLabel PosteriorClassifier::label(std::span<const double> features) const {
    return posterior(features) > 0.5 ? OracleLabel::positive() : OracleLabel::negative();
}

std::vector<double> PosteriorClassifier::standardized(std::span<const double> features) const {
    return standardizer_.apply(features);
}

json PosteriorClassifier::base_json() const {
    return json{{"kind", kind()},
                {"dims", dims()},
                {"standardization", {{"mean", standardizer_.mean()}, {"std", standardizer_.scale()}}}};
}

std::string_view to_string(ClassifierKind k) noexcept {
    switch (k) {
        case ClassifierKind::LogisticRef: return "logistic";
        case ClassifierKind::KNN: return "knn";
        case ClassifierKind::NCC: return "ncc";
    }
    return "unknown";
}

ClassifierKind parse_classifier_kind(std::string_view name) {
    if (name == "logistic" || name == "LogisticRef") return ClassifierKind::LogisticRef;
    if (name == "knn" || name == "KNN") return ClassifierKind::KNN;
    if (name == "ncc" || name == "NCC") return ClassifierKind::NCC;
    throw ValidationError("unknown classifier kind '" + std::string(name) + "'");
}

std::string_view to_string(DistanceMetric m) noexcept {
    return m == DistanceMetric::Manhattan ? "manhattan" : "euclidean";
}

DistanceMetric parse_distance_metric(std::string_view name) {
    if (name == "manhattan" || name == "l1") return DistanceMetric::Manhattan;
    if (name == "euclidean" || name == "l2") return DistanceMetric::Euclidean;
    throw ValidationError("unknown distance metric '" + std::string(name) + "'");
}

// ---------------------------------------------------------------- logistic

LogisticRef::LogisticRef(Standardizer s, std::vector<double> weights, double bias)
    : PosteriorClassifier(std::move(s)), weights_(std::move(weights)), bias_(bias) {
    if (weights_.size() != dims()) throw DimensionError("logistic weight length mismatch");
}

LogisticRef LogisticRef::train(const std::vector<std::vector<double>>& features,
                               const std::vector<OracleLabel>& labels, const ClassifierParams& params) {
    check_training_set(features, labels);
    Standardizer s = Standardizer::fit(features);
    std::vector<std::vector<double>> x;
    x.reserve(features.size());
    for (const auto& f : features) x.push_back(s.apply(f));
    const std::size_t n = x.size();
    const std::size_t d = x.front().size();

    // Lipschitz bound of the gradient: 0.25 * trace(X~^T X~) / n + l2, X~ = [X 1].
    double trace = 0.0;
    for (const auto& r : x) trace += dot(r, r) + 1.0;
    const double step = 1.0 / (0.25 * trace / static_cast<double>(n) + params.l2);

    std::vector<double> w(d, 0.0);
    double b = 0.0;
    std::vector<double> history;
    auto loss = [&] {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) total += logistic_loss(labels[i].target() * (dot(w, x[i]) + b));
        return total / static_cast<double>(n) + 0.5 * params.l2 * dot(w, w);
    };

    std::vector<double> gw(d);
    for (int it = 0; it < params.max_iterations; ++it) {
        history.push_back(loss());
        std::fill(gw.begin(), gw.end(), 0.0);
        double gb = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double t = labels[i].target();
            const double coeff = -t * sigmoid(-t * (dot(w, x[i]) + b));
            for (std::size_t j = 0; j < d; ++j) gw[j] += coeff * x[i][j];
            gb += coeff;
        }
        double gnorm2 = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            gw[j] = gw[j] / static_cast<double>(n) + params.l2 * w[j];
            gnorm2 += gw[j] * gw[j];
        }
        gb /= static_cast<double>(n);
        gnorm2 += gb * gb;
        if (std::sqrt(gnorm2) <= params.tolerance) break;
        for (std::size_t j = 0; j < d; ++j) w[j] -= step * gw[j];
        b -= step * gb;
    }
    history.push_back(loss());

    LogisticRef model(std::move(s), std::move(w), b);
    model.loss_history_ = std::move(history);
    return model;
}

double LogisticRef::posterior(std::span<const double> features) const {
    const auto z = standardized(features);
    return sigmoid(dot(weights_, z) + bias_);
}

json LogisticRef::to_json() const {
    json j = base_json();
    j["parameters"] = {{"weights", weights_}, {"bias", bias_}};
    return j;
}

// ---------------------------------------------------------------- k-NN

KnnClassifier::KnnClassifier(Standardizer s, std::vector<std::vector<double>> train,
                             std::vector<OracleLabel> labels, int k, DistanceMetric metric)
    : PosteriorClassifier(std::move(s)), train_(std::move(train)), labels_(std::move(labels)), k_(k),
      metric_(metric) {
    if (k_ < 1) throw ValidationError("k must be >= 1");
    if (train_.size() != labels_.size() || train_.empty()) throw ValidationError("k-NN needs a labelled training set");
}

std::vector<std::size_t> KnnClassifier::neighbours(std::span<const double> features) const {
    const auto z = standardized(features);
    std::vector<std::pair<double, std::size_t>> dist;
    dist.reserve(train_.size());
    for (std::size_t i = 0; i < train_.size(); ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < z.size(); ++j) {
            const double diff = z[j] - train_[i][j];
            s += metric_ == DistanceMetric::Manhattan ? std::abs(diff) : diff * diff;
        }
        dist.emplace_back(s, i);
    }
    const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(k_), dist.size());
    std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());
    std::vector<std::size_t> out(k);
    for (std::size_t i = 0; i < k; ++i) out[i] = dist[i].second;
    return out;
}

double KnnClassifier::posterior(std::span<const double> features) const {
    const auto nn = neighbours(features);
    const auto pos = std::count_if(nn.begin(), nn.end(), [&](std::size_t i) { return labels_[i].is_positive(); });
    return static_cast<double>(pos) / static_cast<double>(nn.size());
}

OracleLabel KnnClassifier::label(std::span<const double> features) const {
    const auto nn = neighbours(features);
    int vote = 0;
    for (auto i : nn) vote += labels_[i].value();
    if (vote == 0) return labels_[nn.front()];
    return vote > 0 ? OracleLabel::positive() : OracleLabel::negative();
}

json KnnClassifier::to_json() const {
    json j = base_json();
    j["parameters"] = {{"k", k_}, {"metric", to_string(metric_)}, {"train", train_},
                       {"labels", labels_to_ints(labels_)}};
    return j;
}

// ---------------------------------------------------------------- NCC

NccClassifier::NccClassifier(Standardizer s, std::vector<double> positive_centroid,
                             std::vector<double> negative_centroid)
    : PosteriorClassifier(std::move(s)), positive_(std::move(positive_centroid)),
      negative_(std::move(negative_centroid)) {
    if (positive_.size() != dims() || negative_.size() != dims()) {
        throw DimensionError("NCC centroid length mismatch");
    }
}

double NccClassifier::posterior(std::span<const double> features) const {
    const auto z = standardized(features);
    return cosine(z, positive_) > cosine(z, negative_) ? 1.0 : 0.0;
}

json NccClassifier::to_json() const {
    json j = base_json();
    j["parameters"] = {{"positive_centroid", positive_}, {"negative_centroid", negative_}};
    return j;
}

// ---------------------------------------------------------------- factory

std::unique_ptr<PosteriorClassifier> train_classifier(ClassifierKind kind,
                                                      const std::vector<std::vector<double>>& features,
                                                      const std::vector<OracleLabel>& labels,
                                                      const ClassifierParams& params) {
    check_training_set(features, labels);
    switch (kind) {
        case ClassifierKind::LogisticRef:
            return std::make_unique<LogisticRef>(LogisticRef::train(features, labels, params));
        case ClassifierKind::KNN: {
            Standardizer s = Standardizer::fit(features);
            std::vector<std::vector<double>> train;
            train.reserve(features.size());
            for (const auto& f : features) train.push_back(s.apply(f));
            return std::make_unique<KnnClassifier>(std::move(s), std::move(train), labels, params.k, params.metric);
        }
        case ClassifierKind::NCC: {
            Standardizer s = Standardizer::fit(features);
            const std::size_t d = features.front().size();
            std::vector<double> pos(d, 0.0);
            std::vector<double> neg(d, 0.0);
            double np = 0.0;
            double nn = 0.0;
            for (std::size_t i = 0; i < features.size(); ++i) {
                const auto z = s.apply(features[i]);
                auto& acc = labels[i].is_positive() ? pos : neg;
                (labels[i].is_positive() ? np : nn) += 1.0;
                for (std::size_t j = 0; j < d; ++j) acc[j] += z[j];
            }
            for (auto& v : pos) v /= np;
            for (auto& v : neg) v /= nn;
            return std::make_unique<NccClassifier>(std::move(s), std::move(pos), std::move(neg));
        }
    }
    throw ValidationError("unknown classifier kind");
}

std::unique_ptr<PosteriorClassifier> classifier_from_json(const json& j) {
    try {
        const auto kind = parse_classifier_kind(j.at("kind").get<std::string>());
        const auto& st = j.at("standardization");
        Standardizer s(st.at("mean").get<std::vector<double>>(), st.at("std").get<std::vector<double>>());
        if (j.at("dims").get<std::size_t>() != s.dims()) throw DimensionError("dims disagrees with standardization");
        const auto& p = j.at("parameters");
        switch (kind) {
            case ClassifierKind::LogisticRef:
                return std::make_unique<LogisticRef>(std::move(s), p.at("weights").get<std::vector<double>>(),
                                                     p.at("bias").get<double>());
            case ClassifierKind::KNN:
                return std::make_unique<KnnClassifier>(
                    std::move(s), p.at("train").get<std::vector<std::vector<double>>>(),
                    ints_to_labels(p.at("labels").get<std::vector<int>>()), p.at("k").get<int>(),
                    parse_distance_metric(p.at("metric").get<std::string>()));
            case ClassifierKind::NCC:
                return std::make_unique<NccClassifier>(std::move(s),
                                                       p.at("positive_centroid").get<std::vector<double>>(),
                                                       p.at("negative_centroid").get<std::vector<double>>());
        }
    } catch (const json::exception& e) {
        throw ValidationError(std::string("invalid classifier model: ") + e.what());
    }
    throw ValidationError("unknown classifier kind");
}

void save_classifier(const PosteriorClassifier& c, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw ValidationError("cannot write '" + path.string() + "'");
    out << c.to_json().dump(2) << '\n';
}

std::unique_ptr<PosteriorClassifier> load_classifier(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open '" + path.string() + "'");
    try {
        return classifier_from_json(json::parse(in));
    } catch (const json::parse_error& e) {
        throw ValidationError(std::string("invalid classifier model JSON: ") + e.what());
    }
}

}  // namespace eadf
