#include "statsformer/cli/archive.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include <fmt/core.h>
#include <json.hpp>

#include "statsformer/error.hpp"

static_assert(std::endian::native == std::endian::little, "archive payload assumes a little-endian host");

namespace statsformer::cli {
namespace {

using json = nlohmann::ordered_json;
using learners::DecisionTree;
using learners::FittedLearner;

constexpr std::string_view kMagic = "STATSFORMER-MODEL\n";

class Writer {
public:
    template <typename T>
    void raw(T value) {
        char buf[sizeof(T)];
        std::memcpy(buf, &value, sizeof(T));
        out_.append(buf, sizeof(T));
    }
    void u64(std::uint64_t v) { raw(v); }
    void i64(std::int64_t v) { raw(v); }
    void f64(double v) { raw(v); }
    void vec(const Eigen::VectorXd& v) {
        i64(v.size());
        for (Eigen::Index i = 0; i < v.size(); ++i) f64(v(i));
    }
    void mat(const Eigen::MatrixXd& m) {
        i64(m.rows());
        i64(m.cols());
        for (Eigen::Index j = 0; j < m.cols(); ++j)
            for (Eigen::Index i = 0; i < m.rows(); ++i) f64(m(i, j));
    }
    void doubles(const std::vector<double>& v) {
        i64(static_cast<std::int64_t>(v.size()));
        for (double x : v) f64(x);
    }
    void ints(const std::vector<int>& v) {
        i64(static_cast<std::int64_t>(v.size()));
        for (int x : v) i64(x);
    }
    void task(const Task& t) {
        i64(static_cast<std::int64_t>(t.kind));
        i64(t.n_classes);
    }
    void tree(const DecisionTree& t) {
        i64(t.outputs);
        i64(static_cast<std::int64_t>(t.nodes.size()));
        for (const auto& n : t.nodes) {
            i64(n.feature);
            f64(n.threshold);
            i64(n.left);
            i64(n.right);
        }
        doubles(t.values);
    }
    void trees(const std::vector<DecisionTree>& ts) {
        i64(static_cast<std::int64_t>(ts.size()));
        for (const auto& t : ts) tree(t);
    }
    std::string& str() { return out_; }

private:
    std::string out_;
};

class Reader {
public:
    Reader(std::string_view data) : data_(data) {}

    template <typename T>
    T raw() {
        if (pos_ + sizeof(T) > data_.size()) throw DataError("model archive is truncated");
        T value;
        std::memcpy(&value, data_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return value;
    }
    std::uint64_t u64() { return raw<std::uint64_t>(); }
    std::int64_t i64() { return raw<std::int64_t>(); }
    double f64() { return raw<double>(); }
    std::int64_t count() {
        const std::int64_t n = i64();
        if (n < 0 || static_cast<std::uint64_t>(n) > (data_.size() - pos_)) throw DataError("model archive is corrupt");
        return n;
    }
    Eigen::VectorXd vec() {
        Eigen::VectorXd v(count());
        for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = f64();
        return v;
    }
    Eigen::MatrixXd mat() {
        const std::int64_t r = i64();
        const std::int64_t c = i64();
        if (r < 0 || c < 0 || (r > 0 && static_cast<std::uint64_t>(c) > (data_.size() - pos_) / 8 / static_cast<std::uint64_t>(r))) {
            throw DataError("model archive is corrupt");
        }
        Eigen::MatrixXd m(r, c);
        for (Eigen::Index j = 0; j < c; ++j)
            for (Eigen::Index i = 0; i < r; ++i) m(i, j) = f64();
        return m;
    }
    std::vector<double> doubles() {
        std::vector<double> v(static_cast<std::size_t>(count()));
        for (double& x : v) x = f64();
        return v;
    }
    std::vector<int> ints() {
        std::vector<int> v(static_cast<std::size_t>(count()));
        for (int& x : v) x = static_cast<int>(i64());
        return v;
    }
    Task task() {
        const auto kind = i64();
        const auto classes = i64();
        if (kind < 0 || kind > 2) throw DataError("model archive has an unknown task kind");
        return {static_cast<TaskKind>(kind), static_cast<int>(classes)};
    }
    DecisionTree tree() {
        DecisionTree t;
        t.outputs = static_cast<int>(i64());
        t.nodes.resize(static_cast<std::size_t>(count()));
        for (auto& n : t.nodes) {
            n.feature = static_cast<std::int32_t>(i64());
            n.threshold = f64();
            n.left = static_cast<std::int32_t>(i64());
            n.right = static_cast<std::int32_t>(i64());
        }
        t.values = doubles();
        if (t.outputs < 1 || t.values.size() != t.nodes.size() * static_cast<std::size_t>(t.outputs)) {
            throw DataError("model archive holds a malformed tree");
        }
        return t;
    }
    std::vector<DecisionTree> trees() {
        std::vector<DecisionTree> ts(static_cast<std::size_t>(count()));
        for (auto& t : ts) t = tree();
        return ts;
    }
    bool done() const { return pos_ == data_.size(); }

private:
    std::string_view data_;
    std::size_t pos_ = 0;
};

void write_learner(Writer& w, const FittedLearner& f) {
    w.i64(static_cast<std::int64_t>(f.kind()));
    w.task(f.task());
    w.i64(f.p());
    std::visit(
        [&](const auto& s) {
            using S = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<S, learners::LassoState>) {
                w.mat(s.coefficients);
                w.vec(s.intercepts);
                w.vec(s.lambdas);
                w.vec(s.penalty_factors);
                w.i64(static_cast<std::int64_t>(s.loss));
            } else if constexpr (std::is_same_v<S, learners::ForestState>) {
                w.trees(s.trees);
                w.vec(s.feature_probs);
                w.ints(s.candidate_columns);
                w.task(s.task);
                w.i64(s.p);
                w.u64(s.seed);
            } else if constexpr (std::is_same_v<S, learners::GbtState>) {
                w.trees(s.trees);
                w.vec(s.base_score);
                w.vec(s.feature_probs);
                w.f64(s.learning_rate);
                w.task(s.task);
                w.i64(s.p);
                w.u64(s.seed);
                w.doubles(s.train_loss);
            } else {
                w.i64(static_cast<std::int64_t>(s.machines.size()));
                for (const auto& m : s.machines) {
                    w.mat(m.support_vectors);
                    w.vec(m.dual_coefficients);
                    w.f64(m.bias);
                }
                w.f64(s.gamma);
                w.f64(s.C);
                w.vec(s.scales);
                w.task(s.task);
                w.i64(s.p);
            }
        },
        f.state());
}

FittedLearner read_learner(Reader& r) {
    const auto kind = r.i64();
    const Task task = r.task();
    const int p = static_cast<int>(r.i64());
    switch (static_cast<LearnerKind>(kind)) {
        case LearnerKind::lasso: {
            learners::LassoState s;
            s.coefficients = r.mat();
            s.intercepts = r.vec();
            s.lambdas = r.vec();
            s.penalty_factors = r.vec();
            s.loss = static_cast<learners::GlmLoss>(r.i64());
            return {std::move(s), task, p};
        }
        case LearnerKind::random_forest: {
            learners::ForestState s;
            s.trees = r.trees();
            s.feature_probs = r.vec();
            s.candidate_columns = r.ints();
            s.task = r.task();
            s.p = static_cast<int>(r.i64());
            s.seed = r.u64();
            return {std::move(s), task, p};
        }
        case LearnerKind::gbt: {
            learners::GbtState s;
            s.trees = r.trees();
            s.base_score = r.vec();
            s.feature_probs = r.vec();
            s.learning_rate = r.f64();
            s.task = r.task();
            s.p = static_cast<int>(r.i64());
            s.seed = r.u64();
            s.train_loss = r.doubles();
            return {std::move(s), task, p};
        }
        case LearnerKind::kernel_svm: {
            learners::KernelSvmState s;
            s.machines.resize(static_cast<std::size_t>(r.count()));
            for (auto& m : s.machines) {
                m.support_vectors = r.mat();
                m.dual_coefficients = r.vec();
                m.bias = r.f64();
            }
            s.gamma = r.f64();
            s.C = r.f64();
            s.scales = r.vec();
            s.task = r.task();
            s.p = static_cast<int>(r.i64());
            return {std::move(s), task, p};
        }
    }
    throw DataError("model archive holds an unknown learner kind");
}

template <typename Enum, std::size_t N>
Enum enum_from(const std::string& text, const Enum (&values)[N], const char* what) {
    for (Enum e : values) {
        if (to_string(e) == text) return e;
    }
    throw DataError(fmt::format("model archive has unknown {} \"{}\"", what, text));
}

constexpr AdapterKind kAdapters[] = {AdapterKind::penalty, AdapterKind::feature_scale, AdapterKind::feature_sample,
                                     AdapterKind::instance_weight};
constexpr TiltMode kTiltModes[] = {TiltMode::affine_blend, TiltMode::exact_tilt};
constexpr StandardizeScope kScopes[] = {StandardizeScope::global, StandardizeScope::per_fold};

json config_json(const LearnerConfig& c) {
    json adapters = json::array();
    for (AdapterKind a : c.adapters) adapters.push_back(to_string(a));
    json hyper = json::object();
    for (const auto& [k, v] : c.hyper) hyper[k] = v;
    return {{"learner", to_string(c.learner)}, {"adapters", adapters}, {"alpha", c.alpha}, {"beta", c.beta},
            {"hyper", hyper}};
}

LearnerConfig config_from(const json& j) {
    LearnerConfig c;
    c.learner = parse_learner_kind(j.at("learner").get<std::string>());
    for (const auto& a : j.at("adapters")) c.adapters.push_back(enum_from(a.get<std::string>(), kAdapters, "adapter"));
    c.alpha = j.at("alpha").get<double>();
    c.beta = j.at("beta").get<double>();
    for (const auto& [k, v] : j.at("hyper").items()) c.hyper[k] = v.get<double>();
    return c;
}

json run_config_json(const RunConfig& rc) {
    json learners = json::array();
    for (LearnerKind k : rc.learners) learners.push_back(to_string(k));
    return {{"k_folds", rc.k_folds},
            {"alpha_grid", rc.alpha_grid},
            {"beta_grid", rc.beta_grid},
            {"learners", learners},
            {"meta_reg_grid", rc.meta_reg_grid},
            {"seed", rc.seed},
            {"epsilon", rc.epsilon},
            {"q", rc.q},
            {"tilt_mode", to_string(rc.tilt_mode)},
            {"tilt_target_fraction", rc.tilt_target_fraction},
            {"standardize_scope", to_string(rc.standardize_scope)}};
}

RunConfig run_config_from(const json& j) {
    RunConfig rc;
    rc.k_folds = j.at("k_folds").get<int>();
    rc.alpha_grid = j.at("alpha_grid").get<std::vector<double>>();
    rc.beta_grid = j.at("beta_grid").get<std::vector<double>>();
    rc.learners.clear();
    for (const auto& k : j.at("learners")) rc.learners.push_back(parse_learner_kind(k.get<std::string>()));
    rc.meta_reg_grid = j.at("meta_reg_grid").get<std::vector<double>>();
    rc.seed = j.at("seed").get<std::uint64_t>();
    rc.epsilon = j.at("epsilon").get<double>();
    rc.q = j.at("q").get<int>();
    rc.tilt_mode = enum_from(j.at("tilt_mode").get<std::string>(), kTiltModes, "tilt mode");
    rc.tilt_target_fraction = j.at("tilt_target_fraction").get<double>();
    rc.standardize_scope = enum_from(j.at("standardize_scope").get<std::string>(), kScopes, "standardize scope");
    return rc;
}

json header_json(const stacking::StatsformerModel& m) {
    json dictionary = json::array();
    for (const auto& c : m.dictionary) dictionary.push_back(config_json(c));
    json weights = json::array();
    for (const auto& w : m.weights) {
        weights.push_back({{"pi", std::vector<double>(w.pi.data(), w.pi.data() + w.pi.size())},
                           {"intercept", w.intercept},
                           {"reg", w.reg},
                           {"cv_loss", w.cv_loss}});
    }
    return {{"format", kArchiveFormat},
            {"library_version", m.provenance.library_version},
            {"task", to_string(m.task.kind)},
            {"n_classes", m.task.n_classes},
            {"feature_names", m.feature_names},
            {"class_labels", m.class_labels},
            {"dictionary", dictionary},
            {"weights", weights},
            {"refit_index", m.refit_index},
            {"run_config", run_config_json(m.run_config)},
            {"provenance",
             {{"seed", m.provenance.seed},
              {"created_utc", m.provenance.created_utc},
              {"prior_fingerprint", m.provenance.prior_fingerprint},
              {"prior_inverted", m.provenance.prior_inverted}}}};
}

}  // namespace

std::string serialize_model(const stacking::StatsformerModel& model) {
    const std::string header = header_json(model).dump(1);
    Writer w;
    w.vec(model.standardizer.means);
    w.vec(model.standardizer.stds);
    w.i64(static_cast<std::int64_t>(model.refit_learners.size()));
    for (const auto& f : model.refit_learners) write_learner(w, f);
    std::string out(kMagic);
    out += fmt::format("format {}\nheader {}\n", kArchiveFormat, header.size());
    out += header;
    out += '\n';
    out += w.str();
    return out;
}

stacking::StatsformerModel deserialize_model(const std::string& bytes) {
    if (bytes.compare(0, kMagic.size(), kMagic) != 0) throw DataError("not a model archive");
    std::size_t pos = kMagic.size();
    auto line = [&]() {
        const std::size_t end = bytes.find('\n', pos);
        if (end == std::string::npos) throw DataError("model archive is truncated");
        std::string text = bytes.substr(pos, end - pos);
        pos = end + 1;
        return text;
    };
    int format = 0;
    std::size_t header_size = 0;
    if (std::sscanf(line().c_str(), "format %d", &format) != 1) throw DataError("model archive lacks a format line");
    if (format != kArchiveFormat) {
        throw DataError(fmt::format("model archive format {} is not supported (expected {})", format, kArchiveFormat));
    }
    if (std::sscanf(line().c_str(), "header %zu", &header_size) != 1) throw DataError("model archive lacks a header line");
    if (pos + header_size + 1 > bytes.size()) throw DataError("model archive is truncated");
    const json h = json::parse(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                               bytes.begin() + static_cast<std::ptrdiff_t>(pos + header_size), nullptr, false);
    if (h.is_discarded()) throw DataError("model archive header is not valid JSON");
    pos += header_size + 1;

    stacking::StatsformerModel m;
    try {
        m.task = {parse_task_kind(h.at("task").get<std::string>()), h.at("n_classes").get<int>()};
        m.feature_names = h.at("feature_names").get<std::vector<std::string>>();
        m.class_labels = h.at("class_labels").get<std::vector<std::string>>();
        for (const auto& c : h.at("dictionary")) m.dictionary.push_back(config_from(c));
        for (const auto& w : h.at("weights")) {
            stacking::MetaWeights mw;
            const auto pi = w.at("pi").get<std::vector<double>>();
            mw.pi = Eigen::Map<const Eigen::VectorXd>(pi.data(), static_cast<Eigen::Index>(pi.size()));
            mw.intercept = w.at("intercept").get<double>();
            mw.reg = w.at("reg").get<double>();
            mw.cv_loss = w.at("cv_loss").get<std::vector<double>>();
            m.weights.push_back(std::move(mw));
        }
        m.refit_index = h.at("refit_index").get<std::vector<std::size_t>>();
        m.run_config = run_config_from(h.at("run_config"));
        const auto& prov = h.at("provenance");
        m.provenance.seed = prov.at("seed").get<std::uint64_t>();
        m.provenance.created_utc = prov.at("created_utc").get<std::string>();
        m.provenance.prior_fingerprint = prov.at("prior_fingerprint").get<std::string>();
        m.provenance.prior_inverted = prov.at("prior_inverted").get<bool>();
        m.provenance.library_version = h.at("library_version").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw DataError(fmt::format("model archive header is malformed: {}", e.what()));
    }

    Reader r(std::string_view(bytes).substr(pos));
    m.standardizer.means = r.vec();
    m.standardizer.stds = r.vec();
    const std::int64_t count = r.count();
    for (std::int64_t i = 0; i < count; ++i) m.refit_learners.push_back(read_learner(r));
    if (!r.done()) throw DataError("model archive has trailing bytes");

    const auto p = static_cast<Eigen::Index>(m.feature_names.size());
    if (m.standardizer.means.size() != p || m.standardizer.stds.size() != p ||
        m.refit_learners.size() != m.refit_index.size() ||
        m.weights.size() != static_cast<std::size_t>(m.task.output_columns())) {
        throw DataError("model archive is internally inconsistent");
    }
    for (const auto& w : m.weights) {
        if (w.pi.size() != static_cast<Eigen::Index>(m.dictionary.size())) throw DataError("model archive is internally inconsistent");
    }
    for (std::size_t i = 0; i < m.refit_index.size(); ++i) {
        if (m.refit_index[i] >= m.dictionary.size() || m.refit_learners[i].p() != p) {
            throw DataError("model archive is internally inconsistent");
        }
    }
    return m;
}

void save_model(const std::filesystem::path& path, const stacking::StatsformerModel& model) {
    const std::string bytes = serialize_model(model);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError(fmt::format("cannot write {}", path.string()));
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError(fmt::format("cannot write {}", path.string()));
}

stacking::StatsformerModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError(fmt::format("cannot open model archive {}", path.string()));
    std::ostringstream buf;
    buf << in.rdbuf();
    return deserialize_model(buf.str());
}

}  // namespace statsformer::cli
