#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace statsformer {

enum class TaskKind { binary, multiclass, regression };

struct Task {
    TaskKind kind = TaskKind::regression;
    int n_classes = 0;  ///< 0 for regression, 2 for binary, c >= 3 for multiclass

    static Task regression() { return {TaskKind::regression, 0}; }
    static Task binary() { return {TaskKind::binary, 2}; }
    static Task multiclass(int c) { return {TaskKind::multiclass, c}; }

    bool is_classification() const { return kind != TaskKind::regression; }
    /// Columns emitted by a base learner: 1 for regression and binary, c otherwise.
    int output_columns() const { return kind == TaskKind::multiclass ? n_classes : 1; }

    bool operator==(const Task&) const = default;
};

std::string to_string(TaskKind kind);
TaskKind parse_task_kind(const std::string& text);

/// Feature matrix, targets and names. Classification targets hold class
/// indices 0..c-1 stored as doubles; `class_labels[k]` is the original label.
///
/// The constructor validates every invariant and throws DataError otherwise,
/// so a Dataset value is always well formed.
class Dataset {
public:
    Dataset(Eigen::MatrixXd features, Eigen::VectorXd targets,
            std::vector<std::string> feature_names, Task task,
            std::vector<std::string> class_labels = {});

    const Eigen::MatrixXd& features() const { return features_; }
    const Eigen::VectorXd& targets() const { return targets_; }
    const std::vector<std::string>& feature_names() const { return feature_names_; }
    const std::vector<std::string>& class_labels() const { return class_labels_; }
    const Task& task() const { return task_; }

    std::size_t n() const { return static_cast<std::size_t>(features_.rows()); }
    std::size_t p() const { return static_cast<std::size_t>(features_.cols()); }

    /// Class index of row i (classification only).
    int label(std::size_t i) const { return static_cast<int>(targets_(static_cast<Eigen::Index>(i))); }

    /// Rows selected by `rows`, in that order. Classes absent from the subset
    /// are allowed; the class count is inherited from the parent.
    Dataset subset(const std::vector<std::size_t>& rows) const;

private:
    struct Unchecked {};
    Dataset(Unchecked, Eigen::MatrixXd features, Eigen::VectorXd targets,
            std::vector<std::string> feature_names, Task task,
            std::vector<std::string> class_labels);

    Eigen::MatrixXd features_;
    Eigen::VectorXd targets_;
    std::vector<std::string> feature_names_;
    Task task_;
    std::vector<std::string> class_labels_;
};

/// Reads a header-first CSV; `target_column` holds the response, all other
/// columns must be numeric. Classification labels are mapped to indices in
/// order of first appearance.
Dataset load_dataset(const std::filesystem::path& path, const std::string& target_column,
                     TaskKind task);

/// Parsed CSV table: header plus string cells, RFC-4180 quoting honored.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

CsvTable read_csv(const std::filesystem::path& path);
CsvTable parse_csv(const std::string& text);

/// Quotes a field if it contains a comma, quote, CR or LF.
std::string csv_escape(const std::string& field);

}  // namespace statsformer
