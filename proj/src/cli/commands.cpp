#include "statsformer/cli/commands.hpp"

#include <cmath>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <set>
#include <sstream>

#include <boost/algorithm/string.hpp>
#include <fmt/core.h>

#include "statsformer/cli/archive.hpp"
#include "statsformer/error.hpp"
#include "statsformer/evalsim/metrics.hpp"
#include "statsformer/evalsim/simulation.hpp"
#include "statsformer/priors/transforms.hpp"
#include "statsformer/random.hpp"
#include "statsformer/scores/client.hpp"
#include "statsformer/scores/http.hpp"
#include "statsformer/scores/parse.hpp"
#include "statsformer/scores/prompts.hpp"
#include "statsformer/stacking/model.hpp"

namespace statsformer::cli {
namespace {

double parse_number(const std::string& text, const std::string& what) {
    const std::string trimmed = boost::algorithm::trim_copy(text);
    char* end = nullptr;
    const double v = std::strtod(trimmed.c_str(), &end);
    if (trimmed.empty() || end != trimmed.c_str() + trimmed.size()) {
        throw UsageError(fmt::format("{} \"{}\" is not a number", what, text));
    }
    return v;
}

std::string utc_now() {
    const std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

void print_warnings(std::ostream& err, const std::vector<std::string>& warnings) {
    for (const auto& w : warnings) err << "warning: " << w << '\n';
}

Dataset load(const DataArgs& a) {
    if (a.dataset.empty()) throw UsageError("--dataset is required");
    if (a.target.empty()) throw UsageError("--target is required");
    return load_dataset(a.dataset, a.target, a.task);
}

FeaturePrior load_prior(const Dataset& d, const std::filesystem::path& scores, bool no_prior, std::ostream& err) {
    if (no_prior) return FeaturePrior::uniform(static_cast<Eigen::Index>(d.p()));
    if (scores.empty()) throw UsageError("pass --scores FILE or --no-prior");
    std::vector<std::string> warnings;
    FeaturePrior v = scores::load_scores_file(scores, d.feature_names(), &warnings);
    print_warnings(err, warnings);
    return v;
}

std::string fingerprint_text(const std::string& text) {
    return fmt::format("{:016x}", label_hash(text));
}

}  // namespace

RunConfig resolve_run_config(const RunArgs& args) {
    RunConfig rc = args.config.empty() ? RunConfig{} : load_run_config(args.config);
    if (args.seed) rc.seed = *args.seed;
    if (args.workers) rc.workers = *args.workers;
    rc.validate();
    return rc;
}

std::vector<double> parse_ratios(const std::string& text) {
    std::vector<double> out;
    if (text.find(':') != std::string::npos) {
        std::vector<std::string> parts;
        boost::split(parts, text, boost::is_any_of(":"));
        if (parts.size() < 2 || parts.size() > 3) throw UsageError(fmt::format("bad ratio range \"{}\"", text));
        const double lo = parse_number(parts[0], "ratio");
        const double hi = parse_number(parts[1], "ratio");
        const double step = parts.size() == 3 ? parse_number(parts[2], "ratio step") : 0.1;
        if (step <= 0.0 || hi < lo) throw UsageError(fmt::format("bad ratio range \"{}\"", text));
        const auto count = static_cast<int>(std::floor((hi - lo) / step + 1e-9));
        for (int i = 0; i <= count; ++i) out.push_back(std::round((lo + i * step) * 1e12) / 1e12);
    } else {
        std::vector<std::string> parts;
        boost::split(parts, text, boost::is_any_of(","));
        for (const auto& part : parts) out.push_back(parse_number(part, "ratio"));
    }
    for (double r : out) {
        if (!(r > 0.0 && r < 1.0)) throw UsageError(fmt::format("train ratio {} is outside (0, 1)", r));
    }
    return out;
}

SyntheticSetting parse_setting(const std::string& text) {
    std::vector<std::string> parts;
    boost::split(parts, text, boost::is_any_of(","));
    if (parts.size() != 4) throw UsageError(fmt::format("--setting expects n,p,phat,c but got \"{}\"", text));
    auto integer = [&](const std::string& s, const char* what) {
        const double v = parse_number(s, what);
        if (v != std::floor(v) || v < 1) throw UsageError(fmt::format("{} must be a positive integer", what));
        return static_cast<int>(v);
    };
    return {integer(parts[0], "n"), integer(parts[1], "p"), integer(parts[2], "phat"), parse_number(parts[3], "c")};
}

void cmd_scores(const ScoresArgs& args, std::ostream& out, std::ostream& err) {
    if (args.out.empty()) throw UsageError("--out is required");
    if (args.context.empty() || args.task_description.empty()) throw UsageError("--context and --task are required");
    const Dataset d = load(args.data);
    scores::PromptBundle prompts = scores::PromptBundle::defaults(
        boost::algorithm::trim_copy(scores::read_text_file(args.context)),
        boost::algorithm::trim_copy(scores::read_text_file(args.task_description)));
    if (!args.system_prompt.empty()) prompts.system_prompt = scores::read_text_file(args.system_prompt);
    if (!args.user_template.empty()) prompts.user_template = scores::read_text_file(args.user_template);
    prompts.validate();

    const int batch_size = args.sqrt_batches ? scores::sqrt_batch_size(d.p()) : args.batch_size;
    scores::ScoreRequestPlan plan = scores::plan_batches(d.feature_names(), batch_size);
    plan.trials = args.trials;
    plan.retries_per_batch = args.retries;
    plan.concurrency = args.concurrency;

    scores::ClientOptions options;
    options.model = args.model;
    options.temperature = args.temperature;
    options.cache_dir = args.cache_dir.empty() ? std::filesystem::path(args.out.string() + ".cache") : args.cache_dir;
    options.cache_only = args.from_cache;
    std::string identity;
    for (const auto& name : d.feature_names()) identity += name + '\n';
    identity += prompts.system_prompt + '\n' + prompts.user_template + '\n' + prompts.context + '\n' + prompts.task;
    options.dataset_fingerprint = fingerprint_text(identity);

    std::unique_ptr<scores::Transport> transport;
    if (!args.from_cache) {
        const char* key = std::getenv(args.api_key_env.c_str());
        if (key == nullptr || *key == '\0') {
            throw UsageError(fmt::format("environment variable {} is not set; export your API key there, or pass "
                                         "--from-cache to replay cached transcripts",
                                         args.api_key_env));
        }
        transport = std::make_unique<scores::HttpTransport>(args.endpoint, key, args.timeout_seconds);
    }

    const scores::FetchResult result = scores::fetch_scores(plan, prompts, options, transport.get());
    print_warnings(err, result.warnings);
    for (const auto& t : result.transcripts) {
        if (t.attempts.size() > 1 && !t.from_cache) {
            err << fmt::format("note: trial {} batch {} needed {} attempts\n", t.trial, t.batch, t.attempts.size());
        }
    }
    scores::write_scores_file(args.out, d.feature_names(), result.values);
    out << fmt::format("features: {}\nbatches: {} of up to {}\ntrials: {}\nrequests: {}\ncache: {}\nwrote {}\n", d.p(),
                       plan.batches.size(), batch_size, plan.trials, result.requests, options.cache_dir.string(),
                       args.out.string());
}

void cmd_fit(const FitArgs& args, std::ostream& out, std::ostream& err) {
    if (args.out.empty()) throw UsageError("--out is required");
    if (args.no_prior && !args.scores.empty()) throw UsageError("--scores and --no-prior are mutually exclusive");
    const RunConfig rc = resolve_run_config(args.run);
    const Dataset d = load(args.data);
    FeaturePrior v = load_prior(d, args.scores, args.no_prior, err);
    if (args.invert) v = priors::invert_prior(v);

    stacking::FitResult fit = stacking::fit_statsformer(d, v, rc);
    print_warnings(err, fit.warnings);
    fit.model.provenance.created_utc = utc_now();
    fit.model.provenance.prior_inverted = args.invert;
    save_model(args.out, fit.model);

    const auto& m = fit.model;
    out << fmt::format("samples: {}\nfeatures: {}\ntask: {}\ndictionary size L: {}\n", d.n(), d.p(),
                       to_string(d.task().kind), m.dictionary.size());
    out << fmt::format("prior fingerprint: {}{}\n", m.provenance.prior_fingerprint, args.invert ? " (inverted)" : "");
    for (std::size_t k = 0; k < m.weights.size(); ++k) {
        const auto& w = m.weights[k];
        const std::string prefix = m.weights.size() > 1 ? fmt::format("class {}: ", m.class_labels[k]) : "";
        out << fmt::format("{}selected reg: {:g}\n{}intercept: {:.6g}\n", prefix, w.reg, prefix, w.intercept);
        for (Eigen::Index l = 0; l < w.pi.size(); ++l) {
            if (w.pi(l) > stacking::kRefitThreshold) {
                out << fmt::format("{}  weight {:.6f}  {}\n", prefix, w.pi(l),
                                   m.dictionary[static_cast<std::size_t>(l)].label());
            }
        }
    }
    out << fmt::format("refit learners: {}\nwrote {}\n", m.refit_learners.size(), args.out.string());
}

void cmd_predict(const PredictArgs& args, std::ostream& out, std::ostream& err) {
    (void)err;
    if (args.model.empty() || args.input.empty() || args.out.empty()) {
        throw UsageError("--model, --input and --out are required");
    }
    const stacking::StatsformerModel m = load_model(args.model);
    const CsvTable table = read_csv(args.input);
    std::vector<std::size_t> source;
    std::vector<std::string> missing;
    for (const auto& name : m.feature_names) {
        const auto it = std::find(table.header.begin(), table.header.end(), name);
        if (it == table.header.end()) {
            missing.push_back(name);
        } else {
            source.push_back(static_cast<std::size_t>(it - table.header.begin()));
        }
    }
    if (!missing.empty()) {
        throw DataError(fmt::format("input lacks {} feature column(s): {}", missing.size(), boost::algorithm::join(missing, ", ")));
    }
    Eigen::MatrixXd x(static_cast<Eigen::Index>(table.rows.size()), static_cast<Eigen::Index>(source.size()));
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        const auto& row = table.rows[i];
        if (row.size() != table.header.size()) {
            throw DataError(fmt::format("row {} has {} fields, expected {}", i + 2, row.size(), table.header.size()));
        }
        for (std::size_t j = 0; j < source.size(); ++j) {
            const std::string& cell = row[source[j]];
            char* end = nullptr;
            const double v = std::strtod(cell.c_str(), &end);
            if (cell.empty() || end != cell.c_str() + cell.size() || !std::isfinite(v)) {
                throw DataError(fmt::format("row {} column \"{}\": \"{}\" is not a finite number", i + 2,
                                            m.feature_names[j], cell));
            }
            x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
        }
    }
    const stacking::ModelPrediction pred = stacking::predict_model(m, x);

    std::ofstream file(args.out, std::ios::binary);
    if (!file) throw DataError(fmt::format("cannot write {}", args.out.string()));
    auto num = [](double v) { return fmt::format("{:.17g}", v); };
    switch (m.task.kind) {
        case TaskKind::regression:
            file << "prediction\n";
            for (Eigen::Index i = 0; i < pred.values.size(); ++i) file << num(pred.values(i)) << '\n';
            break;
        case TaskKind::binary:
            file << csv_escape("prob_" + m.class_labels[1]) << ",label\n";
            for (Eigen::Index i = 0; i < pred.values.size(); ++i) {
                file << num(pred.values(i)) << ',' << csv_escape(m.class_labels[static_cast<std::size_t>(pred.labels[static_cast<std::size_t>(i)])]) << '\n';
            }
            break;
        case TaskKind::multiclass:
            for (const auto& label : m.class_labels) file << csv_escape("score_" + label) << ',';
            file << "label\n";
            for (Eigen::Index i = 0; i < pred.scores.rows(); ++i) {
                for (Eigen::Index k = 0; k < pred.scores.cols(); ++k) file << num(pred.scores(i, k)) << ',';
                file << csv_escape(m.class_labels[static_cast<std::size_t>(pred.labels[static_cast<std::size_t>(i)])]) << '\n';
            }
            break;
    }
    out << fmt::format("predicted {} rows\nwrote {}\n", x.rows(), args.out.string());
}

void cmd_evaluate(const EvaluateArgs& args, std::ostream& out, std::ostream& err) {
    if (args.records_out.empty()) throw UsageError("--out is required");
    if (args.seeds < 1) throw UsageError("--seeds must be >= 1");
    const std::set<std::string> known{evalsim::kMethodStatsformer, evalsim::kMethodNoPrior, evalsim::kMethodAdversarial};
    bool needs_prior = false;
    for (const auto& method : args.methods) {
        if (!known.count(method)) throw UsageError(fmt::format("unknown method \"{}\"", method));
        needs_prior = needs_prior || method != evalsim::kMethodNoPrior;
    }
    const RunConfig rc = resolve_run_config(args.run);
    const Dataset d = load(args.data);
    const FeaturePrior v = load_prior(d, args.scores, !needs_prior && args.scores.empty(), err);

    evalsim::SplitSpec spec;
    spec.train_ratios = args.ratios;
    spec.test_ratio = args.test_ratio;
    spec.seeds.clear();
    for (int s = 0; s < args.seeds; ++s) spec.seeds.push_back(static_cast<std::uint64_t>(s));
    std::vector<std::string> skipped;
    const auto records = evalsim::run_sweep(d, v, spec, args.methods, rc, args.data.dataset.stem().string(), &skipped);
    print_warnings(err, skipped);
    evalsim::write_records_csv(args.records_out, records);

    std::vector<evalsim::Summary> summaries;
    for (const auto& method : args.methods) {
        if (method == args.baseline) continue;
        auto s = evalsim::summarize_all(records, args.baseline, method);
        summaries.insert(summaries.end(), s.begin(), s.end());
    }
    const std::filesystem::path summary_path =
        args.summary_out.empty() ? std::filesystem::path(args.records_out).replace_extension(".summary.csv") : args.summary_out;
    evalsim::write_summary_csv(summary_path, summaries);
    out << fmt::format("records: {}\n", records.size());
    for (const auto& s : summaries) {
        out << fmt::format("{} vs {} [{}]: pairs {}, improvement {:.2f}% [{:.2f}, {:.2f}], win rate {:.3f}\n", s.method,
                           s.baseline, s.metric, s.pairs, s.improvement_pct, s.improvement_lo, s.improvement_hi,
                           s.win_rate);
    }
    out << fmt::format("wrote {} and {}\n", args.records_out.string(), summary_path.string());
}

void cmd_simulate(const SimulateArgs& args, std::ostream& out, std::ostream& err) {
    (void)err;
    if (args.records_out.empty()) throw UsageError("--out is required");
    if (args.replicates < 1) throw UsageError("--replicates must be >= 1");
    const RunConfig rc = resolve_run_config(args.run);
    const SyntheticSetting setting = parse_setting(args.setting);
    evalsim::SyntheticSpec spec{setting.n, setting.p, setting.p_hat, setting.c, args.seed};
    spec.validate();

    std::vector<evalsim::ExperimentRecord> records;
    std::string method;
    if (args.experiment == "oracle") {
        records = evalsim::run_oracle_experiment(spec, args.replicates, rc);
        method = evalsim::kMethodStatsformer;
    } else if (args.experiment == "adversarial") {
        records = evalsim::run_adversarial_oracle_experiment(spec, args.replicates, rc);
        method = evalsim::kMethodAdversarial;
    } else {
        throw UsageError(fmt::format("unknown experiment \"{}\"; use oracle or adversarial", args.experiment));
    }
    evalsim::write_records_csv(args.records_out, records);
    const auto summaries = evalsim::summarize_all(records, evalsim::kMethodNoPrior, method);
    const std::filesystem::path summary_path =
        args.summary_out.empty() ? std::filesystem::path(args.records_out).replace_extension(".summary.csv") : args.summary_out;
    evalsim::write_summary_csv(summary_path, summaries);
    out << fmt::format("{} experiment, {}, {} replicates\n", args.experiment, spec.name(), args.replicates);
    for (const auto& s : summaries) {
        out << fmt::format("{} [{}]: mean gain {:.4f} [{:.4f}, {:.4f}], win rate {:.3f}\n", s.method, s.metric,
                           s.mean_gain, s.gain_lo, s.gain_hi, s.win_rate);
    }
    out << fmt::format("wrote {} and {}\n", args.records_out.string(), summary_path.string());
}

}  // namespace statsformer::cli
