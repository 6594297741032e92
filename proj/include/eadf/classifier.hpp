#pragma once

// Pluggable binary classifiers producing a posterior p = Pr(label = +1 | f).
// They stand in for the region-covariance sub-detector and for the
// ionosphere sub-classifiers.

#include <cstddef>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "eadf/fusion.hpp"
#include "json.hpp"

namespace eadf {

/// Per-dimension z-scoring fitted on a training set. Dimensions with zero
/// variance keep scale 1 so they map to a constant 0.
class Standardizer {
public:
    Standardizer() = default;
    Standardizer(std::vector<double> mean, std::vector<double> scale);

    static Standardizer fit(const std::vector<std::vector<double>>& rows);

    std::vector<double> apply(std::span<const double> x) const;
    std::size_t dims() const noexcept { return mean_.size(); }
    const std::vector<double>& mean() const noexcept { return mean_; }
    const std::vector<double>& scale() const noexcept { return scale_; }

private:
    std::vector<double> mean_;
    std::vector<double> scale_;
};

class PosteriorClassifier {
public:
    virtual ~PosteriorClassifier() = default;

    virtual std::string_view kind() const noexcept = 0;
    /// Posterior in [0, 1] for a raw (unstandardized) feature vector.
    virtual double posterior(std::span<const double> features) const = 0;
    /// Hard label: +1 when the posterior exceeds 0.5.
    virtual OracleLabel label(std::span<const double> features) const;
    virtual nlohmann::json to_json() const = 0;

    std::size_t dims() const noexcept { return standardizer_.dims(); }
    const Standardizer& standardizer() const noexcept { return standardizer_; }

protected:
    explicit PosteriorClassifier(Standardizer s) : standardizer_(std::move(s)) {}
    std::vector<double> standardized(std::span<const double> features) const;
    nlohmann::json base_json() const;

private:
    Standardizer standardizer_;
};

enum class ClassifierKind { LogisticRef, KNN, NCC };
enum class DistanceMetric { Manhattan, Euclidean };

std::string_view to_string(ClassifierKind k) noexcept;
ClassifierKind parse_classifier_kind(std::string_view name);
std::string_view to_string(DistanceMetric m) noexcept;
DistanceMetric parse_distance_metric(std::string_view name);

struct ClassifierParams {
    // k-NN
    int k = 4;
    DistanceMetric metric = DistanceMetric::Manhattan;
    // logistic
    double l2 = 1e-2;
    double tolerance = 1e-8;  // gradient-norm stopping threshold
    int max_iterations = 20000;
};

/// L2-regularised logistic regression fitted by gradient descent with a
/// fixed 1/L step, which makes the training loss non-increasing.
class LogisticRef final : public PosteriorClassifier {
public:
    LogisticRef(Standardizer s, std::vector<double> weights, double bias);

    static LogisticRef train(const std::vector<std::vector<double>>& features,
                             const std::vector<OracleLabel>& labels, const ClassifierParams& params);

    std::string_view kind() const noexcept override { return "logistic"; }
    double posterior(std::span<const double> features) const override;
    nlohmann::json to_json() const override;

    const std::vector<double>& loss_history() const noexcept { return loss_history_; }
    const std::vector<double>& weights() const noexcept { return weights_; }
    double bias() const noexcept { return bias_; }

private:
    std::vector<double> weights_;
    double bias_;
    std::vector<double> loss_history_;
};

/// k nearest neighbours over the standardized training set. The posterior is
/// the positive fraction among the k neighbours; a tied vote takes the label
/// of the single nearest neighbour.
class KnnClassifier final : public PosteriorClassifier {
public:
    KnnClassifier(Standardizer s, std::vector<std::vector<double>> train, std::vector<OracleLabel> labels,
                  int k, DistanceMetric metric);

    std::string_view kind() const noexcept override { return "knn"; }
    double posterior(std::span<const double> features) const override;
    OracleLabel label(std::span<const double> features) const override;
    nlohmann::json to_json() const override;

    int k() const noexcept { return k_; }

private:
    std::vector<std::size_t> neighbours(std::span<const double> features) const;

    std::vector<std::vector<double>> train_;
    std::vector<OracleLabel> labels_;
    int k_;
    DistanceMetric metric_;
};

/// Normalized cross-correlation (cosine similarity) against the two class
/// centroids of the standardized training set; p is 1 when the positive
/// centroid correlates more strongly, else 0.
class NccClassifier final : public PosteriorClassifier {
public:
    NccClassifier(Standardizer s, std::vector<double> positive_centroid, std::vector<double> negative_centroid);

    std::string_view kind() const noexcept override { return "ncc"; }
    double posterior(std::span<const double> features) const override;
    nlohmann::json to_json() const override;

    const std::vector<double>& positive_centroid() const noexcept { return positive_; }
    const std::vector<double>& negative_centroid() const noexcept { return negative_; }

private:
    std::vector<double> positive_;
    std::vector<double> negative_;
};

/// Throws ValidationError when the training set lacks one of the classes and
/// DimensionError on ragged rows.
std::unique_ptr<PosteriorClassifier> train_classifier(ClassifierKind kind,
                                                      const std::vector<std::vector<double>>& features,
                                                      const std::vector<OracleLabel>& labels,
                                                      const ClassifierParams& params = {});

std::unique_ptr<PosteriorClassifier> classifier_from_json(const nlohmann::json& j);
void save_classifier(const PosteriorClassifier& c, const std::filesystem::path& path);
std::unique_ptr<PosteriorClassifier> load_classifier(const std::filesystem::path& path);

}  // namespace eadf
