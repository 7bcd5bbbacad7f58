#include "statsformer/core/dataset.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <fmt/core.h>

#include "statsformer/error.hpp"

namespace statsformer {

std::string to_string(TaskKind kind) {
    switch (kind) {
        case TaskKind::binary: return "binary";
        case TaskKind::multiclass: return "multiclass";
        case TaskKind::regression: return "regression";
    }
    return "regression";
}

TaskKind parse_task_kind(const std::string& text) {
    if (text == "binary") return TaskKind::binary;
    if (text == "multiclass") return TaskKind::multiclass;
    if (text == "regression") return TaskKind::regression;
    throw UsageError(fmt::format("unknown task kind '{}' (expected binary, multiclass or regression)", text));
}

Dataset::Dataset(Eigen::MatrixXd features, Eigen::VectorXd targets,
                 std::vector<std::string> feature_names, Task task,
                 std::vector<std::string> class_labels)
    : Dataset(Unchecked{}, std::move(features), std::move(targets), std::move(feature_names), task,
              std::move(class_labels)) {
    const auto n = features_.rows();
    const auto p = features_.cols();
    if (n < 1) throw DataError("empty dataset: no rows");
    if (p < 1) throw DataError("empty dataset: no feature columns");
    if (targets_.size() != n) {
        throw DataError(fmt::format("target length {} does not match row count {}", targets_.size(), n));
    }
    if (static_cast<Eigen::Index>(feature_names_.size()) != p) {
        throw DataError(fmt::format("{} feature names for {} columns", feature_names_.size(), p));
    }
    std::unordered_set<std::string> seen;
    for (const auto& name : feature_names_) {
        if (name.empty()) throw DataError("empty feature name");
        if (!seen.insert(name).second) throw DataError(fmt::format("duplicate feature name '{}'", name));
    }
    for (Eigen::Index j = 0; j < p; ++j) {
        for (Eigen::Index i = 0; i < n; ++i) {
            if (!std::isfinite(features_(i, j))) {
                throw DataError(fmt::format("non-finite feature value at row {}, column {}", i, j));
            }
        }
    }
    if (task_.is_classification()) {
        const int c = task_.n_classes;
        if (c < 2) throw DataError("classification requires at least two classes");
        if (task_.kind == TaskKind::binary && c != 2) throw DataError("binary task must have exactly two classes");
        std::vector<int> counts(static_cast<std::size_t>(c), 0);
        for (Eigen::Index i = 0; i < n; ++i) {
            const double t = targets_(i);
            if (t != std::floor(t) || t < 0 || t >= c) {
                throw DataError(fmt::format("class index {} at row {} outside 0..{}", t, i, c - 1));
            }
            ++counts[static_cast<std::size_t>(t)];
        }
        for (int k = 0; k < c; ++k) {
            if (counts[static_cast<std::size_t>(k)] == 0) {
                throw DataError(fmt::format("class {} has no samples", k));
            }
        }
        if (!class_labels_.empty() && static_cast<int>(class_labels_.size()) != c) {
            throw DataError("class label count does not match class count");
        }
        if (class_labels_.empty()) {
            for (int k = 0; k < c; ++k) class_labels_.push_back(std::to_string(k));
        }
    } else {
        for (Eigen::Index i = 0; i < n; ++i) {
            if (!std::isfinite(targets_(i))) throw DataError(fmt::format("non-finite target at row {}", i));
        }
    }
}

Dataset::Dataset(Unchecked, Eigen::MatrixXd features, Eigen::VectorXd targets,
                 std::vector<std::string> feature_names, Task task,
                 std::vector<std::string> class_labels)
    : features_(std::move(features)),
      targets_(std::move(targets)),
      feature_names_(std::move(feature_names)),
      task_(task),
      class_labels_(std::move(class_labels)) {}

Dataset Dataset::subset(const std::vector<std::size_t>& rows) const {
    if (rows.empty()) throw DataError("empty row subset");
    Eigen::MatrixXd x(static_cast<Eigen::Index>(rows.size()), features_.cols());
    Eigen::VectorXd y(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const auto src = static_cast<Eigen::Index>(rows[r]);
        if (src >= features_.rows()) throw DataError("row subset index out of range");
        x.row(static_cast<Eigen::Index>(r)) = features_.row(src);
        y(static_cast<Eigen::Index>(r)) = targets_(src);
    }
    return Dataset(Unchecked{}, std::move(x), std::move(y), feature_names_, task_, class_labels_);
}

CsvTable parse_csv(const std::string& text) {
    CsvTable table;
    std::vector<std::vector<std::string>> records;
    std::vector<std::string> record;
    std::string field;
    bool in_quotes = false;
    bool field_started = false;
    std::size_t i = 0;
    if (text.size() >= 3 && text.compare(0, 3, "\xEF\xBB\xBF") == 0) i = 3;  // BOM
    auto end_field = [&] {
        record.push_back(std::move(field));
        field.clear();
        field_started = false;
    };
    auto end_record = [&] {
        end_field();
        if (!(record.size() == 1 && record[0].empty())) records.push_back(std::move(record));
        record.clear();
    };
    for (; i < text.size(); ++i) {
        const char c = text[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                field.push_back(c);
            }
            continue;
        }
        switch (c) {
            case '"':
                if (!field_started && field.empty()) {
                    in_quotes = true;
                    field_started = true;
                } else {
                    field.push_back(c);
                }
                break;
            case ',': end_field(); break;
            case '\r':
                if (i + 1 < text.size() && text[i + 1] == '\n') ++i;
                end_record();
                break;
            case '\n': end_record(); break;
            default:
                field.push_back(c);
                field_started = true;
        }
    }
    if (in_quotes) throw DataError("unterminated quoted CSV field");
    if (!field.empty() || !record.empty() || field_started) end_record();
    if (records.empty()) throw DataError("empty dataset: CSV has no header");
    table.header = std::move(records.front());
    for (std::size_t r = 1; r < records.size(); ++r) {
        if (records[r].size() != table.header.size()) {
            throw DataError(fmt::format("CSV row {} has {} fields, header has {}", r, records[r].size(),
                                        table.header.size()));
        }
        table.rows.push_back(std::move(records[r]));
    }
    return table;
}

CsvTable read_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError(fmt::format("cannot open file '{}'", path.string()));
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_csv(buffer.str());
}

std::string csv_escape(const std::string& field) {
    if (field.find_first_of(",\"\r\n") == std::string::npos) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

namespace {

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t");
    return s.substr(first, last - first + 1);
}

bool parse_double(const std::string& text, double& out) {
    const std::string t = trim(text);
    if (t.empty()) return false;
    const char* begin = t.data();
    const char* end = t.data() + t.size();
    if (*begin == '+') ++begin;
    auto [ptr, ec] = std::from_chars(begin, end, out);
    return ec == std::errc() && ptr == end;
}

}  // namespace

Dataset load_dataset(const std::filesystem::path& path, const std::string& target_column, TaskKind kind) {
    if (!std::filesystem::exists(path)) throw DataError(fmt::format("missing file '{}'", path.string()));
    const CsvTable table = read_csv(path);
    std::size_t target_index = table.header.size();
    for (std::size_t c = 0; c < table.header.size(); ++c) {
        if (table.header[c] == target_column) target_index = c;
    }
    if (target_index == table.header.size()) {
        throw DataError(fmt::format("target column '{}' not found in '{}'", target_column, path.string()));
    }
    if (table.rows.empty()) throw DataError(fmt::format("empty dataset: '{}' has no data rows", path.string()));

    const auto n = static_cast<Eigen::Index>(table.rows.size());
    const auto p = static_cast<Eigen::Index>(table.header.size() - 1);
    std::vector<std::string> names;
    for (std::size_t c = 0; c < table.header.size(); ++c) {
        if (c != target_index) names.push_back(table.header[c]);
    }
    Eigen::MatrixXd x(n, p);
    Eigen::VectorXd y(n);
    std::vector<std::string> labels;
    std::unordered_map<std::string, int> label_index;
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& row = table.rows[static_cast<std::size_t>(i)];
        Eigen::Index j = 0;
        for (std::size_t c = 0; c < row.size(); ++c) {
            if (c == target_index) continue;
            double value = 0.0;
            if (!parse_double(row[c], value)) {
                throw DataError(fmt::format("non-numeric feature value '{}' at row {}, column {}", row[c], i, j));
            }
            if (!std::isfinite(value)) {
                throw DataError(fmt::format("non-finite feature value at row {}, column {}", i, j));
            }
            x(i, j++) = value;
        }
        const std::string raw = trim(row[target_index]);
        if (kind == TaskKind::regression) {
            double value = 0.0;
            if (!parse_double(raw, value) || !std::isfinite(value)) {
                throw DataError(fmt::format("non-numeric regression target '{}' at row {}", raw, i));
            }
            y(i) = value;
        } else {
            auto [it, inserted] = label_index.try_emplace(raw, static_cast<int>(labels.size()));
            if (inserted) labels.push_back(raw);
            y(i) = it->second;
        }
    }
    Task task = Task::regression();
    if (kind != TaskKind::regression) {
        const int c = static_cast<int>(labels.size());
        if (c < 2) throw DataError("single-class classification target");
        if (kind == TaskKind::binary && c != 2) {
            throw DataError(fmt::format("binary task but target has {} distinct labels", c));
        }
        task = kind == TaskKind::binary ? Task::binary() : Task::multiclass(c);
    }
    return Dataset(std::move(x), std::move(y), std::move(names), task, std::move(labels));
}

}  // namespace statsformer
