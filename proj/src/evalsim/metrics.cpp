#include "statsformer/evalsim/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <tuple>

#include <fmt/core.h>

#include "statsformer/core/dataset.hpp"
#include "statsformer/error.hpp"

namespace statsformer::evalsim {
namespace {

constexpr double kZ95 = 1.96;

void check_lengths(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    if (a.size() != b.size()) throw DataError(fmt::format("length mismatch: {} vs {}", a.size(), b.size()));
    if (a.size() == 0) throw DataError("metric on empty input");
}

struct MeanCi {
    double mean = 0.0;
    double half_width = 0.0;
};

MeanCi mean_ci(const std::vector<double>& x) {
    const auto m = static_cast<double>(x.size());
    const double mean = std::accumulate(x.begin(), x.end(), 0.0) / m;
    if (x.size() < 2) return {mean, 0.0};
    double ss = 0.0;
    for (double v : x) ss += (v - mean) * (v - mean);
    const double sd = std::sqrt(ss / (m - 1.0));
    return {mean, kZ95 * sd / std::sqrt(m)};
}

std::string format_double(double v) { return fmt::format("{:.17g}", v); }

}  // namespace

double accuracy(const Eigen::VectorXd& y_true, const Eigen::VectorXd& y_pred) {
    check_lengths(y_true, y_pred);
    return (y_true.array() == y_pred.array()).cast<double>().mean();
}

double auroc(const Eigen::VectorXd& y_true, const Eigen::VectorXd& scores) {
    check_lengths(y_true, scores);
    const Eigen::Index n = y_true.size();
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return scores(a) < scores(b); });
    // Mann-Whitney with midranks; twice the rank sum keeps ties exact.
    double rank_sum2 = 0.0;
    double positives = 0.0;
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j < order.size() && scores(order[j]) == scores(order[i])) ++j;
        const double midrank2 = static_cast<double>(i + 1 + j);
        for (std::size_t k = i; k < j; ++k) {
            if (y_true(order[k]) == 1.0) {
                rank_sum2 += midrank2;
                positives += 1.0;
            }
        }
        i = j;
    }
    const double negatives = static_cast<double>(n) - positives;
    if (positives == 0.0 || negatives == 0.0) throw DataError("AUROC undefined: both classes must be present");
    const double u2 = rank_sum2 - positives * (positives + 1.0);
    return u2 / (2.0 * positives * negatives);
}

double mse(const Eigen::VectorXd& y_true, const Eigen::VectorXd& y_pred) {
    check_lengths(y_true, y_pred);
    return (y_true - y_pred).squaredNorm() / static_cast<double>(y_true.size());
}

bool higher_is_better(const std::string& metric) { return metric != "mse"; }

double metric_error(const std::string& metric, double value) {
    return higher_is_better(metric) ? 1.0 - value : value;
}

Summary summarize(const std::vector<ExperimentRecord>& records, const std::string& baseline,
                  const std::string& method, const std::string& metric) {
    using Key = std::tuple<std::string, double, std::uint64_t>;
    std::map<Key, double> base;
    std::map<Key, double> other;
    for (const auto& r : records) {
        if (r.metric != metric) continue;
        if (r.method == baseline) base[{r.dataset, r.train_ratio, r.seed}] = r.value;
        if (r.method == method) other[{r.dataset, r.train_ratio, r.seed}] = r.value;
    }
    std::vector<double> gains;
    std::vector<double> base_errors;
    std::size_t wins = 0;
    for (const auto& [key, bv] : base) {
        const auto it = other.find(key);
        if (it == other.end()) continue;
        const double be = metric_error(metric, bv);
        const double me = metric_error(metric, it->second);
        gains.push_back(be - me);
        base_errors.push_back(be);
        if (me <= be) ++wins;
    }
    if (gains.empty()) {
        throw DataError(fmt::format("no paired records for {} vs {} on {}", method, baseline, metric));
    }
    Summary s;
    s.method = method;
    s.baseline = baseline;
    s.metric = metric;
    s.pairs = gains.size();
    const MeanCi gain = mean_ci(gains);
    s.mean_gain = gain.mean;
    s.gain_lo = gain.mean - gain.half_width;
    s.gain_hi = gain.mean + gain.half_width;
    const double base_mean = std::accumulate(base_errors.begin(), base_errors.end(), 0.0) /
                             static_cast<double>(base_errors.size());
    if (base_mean != 0.0) {
        s.improvement_pct = 100.0 * gain.mean / base_mean;
        s.improvement_lo = 100.0 * s.gain_lo / base_mean;
        s.improvement_hi = 100.0 * s.gain_hi / base_mean;
    }
    const auto m = static_cast<double>(s.pairs);
    s.win_rate = static_cast<double>(wins) / m;
    const double half = kZ95 * std::sqrt(s.win_rate * (1.0 - s.win_rate) / m);
    s.win_lo = s.win_rate - half;
    s.win_hi = s.win_rate + half;
    return s;
}

std::vector<Summary> summarize_all(const std::vector<ExperimentRecord>& records, const std::string& baseline,
                                   const std::string& method) {
    std::vector<std::string> metrics;
    for (const auto& r : records) {
        if ((r.method == method || r.method == baseline) &&
            std::find(metrics.begin(), metrics.end(), r.metric) == metrics.end()) {
            metrics.push_back(r.metric);
        }
    }
    std::vector<Summary> out;
    for (const auto& metric : metrics) out.push_back(summarize(records, baseline, method, metric));
    return out;
}

void write_records_csv(std::ostream& out, const std::vector<ExperimentRecord>& records) {
    out << "dataset,method,train_ratio,seed,metric,value\n";
    for (const auto& r : records) {
        out << csv_escape(r.dataset) << ',' << csv_escape(r.method) << ',' << format_double(r.train_ratio) << ','
            << r.seed << ',' << csv_escape(r.metric) << ',' << format_double(r.value) << '\n';
    }
}

void write_records_csv(const std::filesystem::path& path, const std::vector<ExperimentRecord>& records) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError(fmt::format("cannot write {}", path.string()));
    write_records_csv(out, records);
}

std::vector<ExperimentRecord> read_records_csv(const std::filesystem::path& path) {
    const CsvTable table = read_csv(path);
    const std::vector<std::string> expected{"dataset", "method", "train_ratio", "seed", "metric", "value"};
    if (table.header != expected) throw DataError(fmt::format("{} is not a records CSV", path.string()));
    std::vector<ExperimentRecord> out;
    for (const auto& row : table.rows) {
        if (row.size() != 6) throw DataError("records CSV row has wrong field count");
        out.push_back({row[0], row[1], std::stod(row[2]), std::stoull(row[3]), row[4], std::stod(row[5])});
    }
    return out;
}

void write_summary_csv(std::ostream& out, const std::vector<Summary>& summaries) {
    out << "method,baseline,metric,pairs,mean_gain,gain_ci_low,gain_ci_high,improvement_pct,"
           "improvement_ci_low,improvement_ci_high,win_rate,win_rate_ci_low,win_rate_ci_high\n";
    for (const auto& s : summaries) {
        out << csv_escape(s.method) << ',' << csv_escape(s.baseline) << ',' << csv_escape(s.metric) << ','
            << s.pairs << ',' << format_double(s.mean_gain) << ',' << format_double(s.gain_lo) << ','
            << format_double(s.gain_hi) << ',' << format_double(s.improvement_pct) << ','
            << format_double(s.improvement_lo) << ',' << format_double(s.improvement_hi) << ','
            << format_double(s.win_rate) << ',' << format_double(s.win_lo) << ',' << format_double(s.win_hi)
            << '\n';
    }
}

void write_summary_csv(const std::filesystem::path& path, const std::vector<Summary>& summaries) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError(fmt::format("cannot write {}", path.string()));
    write_summary_csv(out, summaries);
}

}  // namespace statsformer::evalsim
