#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace statsformer::evalsim {

/// Fraction of positions where the two label vectors agree.
double accuracy(const Eigen::VectorXd& y_true, const Eigen::VectorXd& y_pred);

/// Probability that a random positive outranks a random negative, ties 0.5.
/// Throws DataError "AUROC undefined" unless both classes are present.
double auroc(const Eigen::VectorXd& y_true, const Eigen::VectorXd& scores);

double mse(const Eigen::VectorXd& y_true, const Eigen::VectorXd& y_pred);

/// Whether larger values of the metric are better (accuracy, auroc) or worse (mse).
bool higher_is_better(const std::string& metric);

/// Converts a metric value to an error: 1 - value, or the value itself for mse.
double metric_error(const std::string& metric, double value);

struct ExperimentRecord {
    std::string dataset;
    std::string method;
    double train_ratio = 0.0;
    std::uint64_t seed = 0;
    std::string metric;
    double value = 0.0;

    bool operator==(const ExperimentRecord&) const = default;
};

/// Paired comparison of `method` against `baseline` on one metric.
struct Summary {
    std::string method;
    std::string baseline;
    std::string metric;
    std::size_t pairs = 0;
    double mean_gain = 0.0;  ///< mean(baseline error - method error)
    double gain_lo = 0.0;
    double gain_hi = 0.0;
    double improvement_pct = 0.0;  ///< 100 mean_gain / mean(baseline error)
    double improvement_lo = 0.0;
    double improvement_hi = 0.0;
    double win_rate = 0.0;  ///< fraction of pairs with method error <= baseline error
    double win_lo = 0.0;
    double win_hi = 0.0;
};

/// Pairs records on (dataset, train_ratio, seed). Normal-approximation 95%
/// intervals; the win rate uses the Wald interval. Throws DataError when no
/// pairs exist.
Summary summarize(const std::vector<ExperimentRecord>& records, const std::string& baseline,
                  const std::string& method, const std::string& metric);

/// One summary per metric present for both methods, in first-appearance order.
std::vector<Summary> summarize_all(const std::vector<ExperimentRecord>& records, const std::string& baseline,
                                   const std::string& method);

void write_records_csv(std::ostream& out, const std::vector<ExperimentRecord>& records);
void write_records_csv(const std::filesystem::path& path, const std::vector<ExperimentRecord>& records);
std::vector<ExperimentRecord> read_records_csv(const std::filesystem::path& path);

void write_summary_csv(std::ostream& out, const std::vector<Summary>& summaries);
void write_summary_csv(const std::filesystem::path& path, const std::vector<Summary>& summaries);

}  // namespace statsformer::evalsim
