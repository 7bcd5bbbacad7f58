#include <iostream>

#include <CLI11.hpp>

#include "statsformer/cli/commands.hpp"
#include "statsformer/error.hpp"
#include "statsformer/version.hpp"

namespace {

using namespace statsformer;
using namespace statsformer::cli;

void add_data(CLI::App* cmd, DataArgs& a) {
    cmd->add_option("--dataset", a.dataset, "CSV file with a header row")->required();
    cmd->add_option("--target", a.target, "Response column")->required();
    cmd->add_option("--task", a.task, "binary, multiclass or regression")
        ->transform(CLI::CheckedTransformer(std::map<std::string, TaskKind>{{"binary", TaskKind::binary},
                                                                             {"multiclass", TaskKind::multiclass},
                                                                             {"regression", TaskKind::regression}}));
}

void add_run(CLI::App* cmd, RunArgs& a) {
    cmd->add_option("--config", a.config, "INI run configuration")->check(CLI::ExistingFile);
    cmd->add_option("--seed", a.seed, "Root seed for every random stream");
    cmd->add_option("--workers", a.workers, "Thread cap (0 = all cores)");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Prior-aware stacked ensembles driven by feature importance scores"};
    app.set_version_flag("--version", std::string(kVersion));
    app.require_subcommand(1);

    ScoresArgs scores_args;
    auto* scores = app.add_subcommand("scores", "Query a chat-completion endpoint for feature scores");
    scores->add_option("--dataset", scores_args.data.dataset)->required();
    scores->add_option("--target", scores_args.data.target)->required();
    scores->add_option("--context", scores_args.context, "Text file describing the data")->required();
    scores->add_option("--task", scores_args.task_description, "Text file naming the prediction task")->required();
    scores->add_option("--system-prompt", scores_args.system_prompt, "Replacement system prompt file");
    scores->add_option("--user-template", scores_args.user_template,
                       "Replacement user prompt with {{context}}, {{task}} and {{features}}");
    scores->add_option("--out", scores_args.out, "Scores JSON to write")->required();
    scores->add_option("--cache", scores_args.cache_dir, "Transcript cache directory (default <out>.cache)");
    scores->add_flag("--from-cache", scores_args.from_cache, "Replay cached transcripts without network access");
    scores->add_flag("--sqrt-batches", scores_args.sqrt_batches, "Use about sqrt(p) batches");
    scores->add_option("--batch-size", scores_args.batch_size)->check(CLI::PositiveNumber);
    scores->add_option("--trials", scores_args.trials)->check(CLI::PositiveNumber);
    scores->add_option("--retries", scores_args.retries, "Attempts per batch")->check(CLI::PositiveNumber);
    scores->add_option("--concurrency", scores_args.concurrency)->check(CLI::PositiveNumber);
    scores->add_option("--endpoint", scores_args.endpoint, "Chat-completions URL");
    scores->add_option("--model", scores_args.model);
    double temperature = 0.0;
    bool no_temperature = false;
    scores->add_option("--temperature", temperature);
    scores->add_flag("--no-temperature", no_temperature, "Omit temperature for endpoints that reject it");
    scores->add_option("--api-key-env", scores_args.api_key_env, "Environment variable holding the API key");
    scores->add_option("--timeout", scores_args.timeout_seconds, "Seconds per request")->check(CLI::PositiveNumber);

    FitArgs fit_args;
    auto* fit = app.add_subcommand("fit", "Fit the stacked ensemble and write a model archive");
    add_data(fit, fit_args.data);
    add_run(fit, fit_args.run);
    auto* scores_opt = fit->add_option("--scores", fit_args.scores, "Scores JSON")->check(CLI::ExistingFile);
    auto* no_prior_opt = fit->add_flag("--no-prior", fit_args.no_prior, "Use the uniform prior");
    scores_opt->excludes(no_prior_opt);
    fit->add_flag("--invert-prior", fit_args.invert, "Replace scores v with min + max - v");
    fit->add_option("--out", fit_args.out, "Model archive to write")->required();

    PredictArgs predict_args;
    auto* predict = app.add_subcommand("predict", "Predict with a model archive");
    predict->add_option("--model", predict_args.model)->required()->check(CLI::ExistingFile);
    predict->add_option("--input", predict_args.input, "CSV with the training feature columns")->required();
    predict->add_option("--out", predict_args.out, "Predictions CSV")->required();

    EvaluateArgs eval_args;
    std::string ratios;
    auto* evaluate = app.add_subcommand("evaluate", "Train-ratio sweep with paired method comparison");
    add_data(evaluate, eval_args.data);
    add_run(evaluate, eval_args.run);
    evaluate->add_option("--scores", eval_args.scores)->check(CLI::ExistingFile);
    evaluate->add_option("--ratios", ratios, "a:b, a:b:step or a comma list (default 0.1:0.8)");
    evaluate->add_option("--test-ratio", eval_args.test_ratio);
    evaluate->add_option("--seeds", eval_args.seeds, "Split seeds 0..N-1");
    evaluate->add_option("--methods", eval_args.methods, "statsformer, noprior, adversarial")->delimiter(',');
    evaluate->add_option("--baseline", eval_args.baseline);
    evaluate->add_option("--out", eval_args.records_out, "Records CSV")->required();
    evaluate->add_option("--summary", eval_args.summary_out, "Summary CSV (default <out>.summary.csv)");

    SimulateArgs sim_args;
    auto* simulate = app.add_subcommand("simulate", "Oracle-prior synthetic experiments");
    simulate->add_option("experiment", sim_args.experiment, "oracle or adversarial")
        ->check(CLI::IsMember({"oracle", "adversarial"}));
    simulate->add_option("--config", sim_args.run.config, "INI run configuration")->check(CLI::ExistingFile);
    simulate->add_option("--seed", sim_args.seed, "Seed of the first replicate; replicate r uses seed + r");
    simulate->add_option("--workers", sim_args.run.workers, "Thread cap (0 = all cores)");
    simulate->add_option("--setting", sim_args.setting, "n,p,phat,c");
    simulate->add_option("--replicates", sim_args.replicates);
    simulate->add_option("--out", sim_args.records_out, "Records CSV")->required();
    simulate->add_option("--summary", sim_args.summary_out, "Summary CSV (default <out>.summary.csv)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : static_cast<int>(ExitCode::usage);
    }

    try {
        if (scores->parsed()) {
            if (no_temperature) scores_args.temperature.reset();
            else scores_args.temperature = temperature;
            cmd_scores(scores_args, std::cout, std::cerr);
        } else if (fit->parsed()) {
            cmd_fit(fit_args, std::cout, std::cerr);
        } else if (predict->parsed()) {
            cmd_predict(predict_args, std::cout, std::cerr);
        } else if (evaluate->parsed()) {
            if (!ratios.empty()) eval_args.ratios = parse_ratios(ratios);
            cmd_evaluate(eval_args, std::cout, std::cerr);
        } else if (simulate->parsed()) {
            cmd_simulate(sim_args, std::cout, std::cerr);
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return static_cast<int>(e.code());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return static_cast<int>(ExitCode::data);
    }
    return 0;
}
