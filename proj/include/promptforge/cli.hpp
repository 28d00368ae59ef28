#pragma once

#include <cstdlib>
#include <iostream>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "promptforge/config.hpp"
#include "promptforge/evalharness.hpp"
#include "promptforge/kbforge.hpp"
#include "promptforge/promptgen.hpp"
#include "promptforge/provider_factory.hpp"
#include "promptforge/tempopt.hpp"

namespace promptforge::cli {

enum ExitCode : int {
    kOk = 0,
    kUsage = 2,
    kValidation = 3,
    kProvider = 4,
    kIo = 5,
};

namespace detail {

inline std::string read_description_source(const std::string& source) {
    if (source == "-") {
        std::ostringstream buffer;
        buffer << std::cin.rdbuf();
        return buffer.str();
    }
    return read_text_file(source);
}

inline void print_kb_summary(const KnowledgeBase& kb, std::ostream& out) {
    out << "clusters: " << kb.clusters.size() << "  k: " << kb.provenance.k
        << "  silhouette: " << format_double(kb.provenance.silhouette)
        << "  seed: " << kb.provenance.clustering_seed << "\n";
    out << "models: chat=" << kb.provenance.chat_model
        << " embedding=" << kb.provenance.embedding_model << "\n";
    for (const auto& cluster : kb.clusters) {
        out << "- " << cluster.cluster_id << " (" << cluster.member_task_names.size() << " tasks): ";
        if (const TechniqueSelection* s = kb.find_selection(cluster.cluster_id)) {
            for (std::size_t i = 0; i < s->technique_ids.size(); ++i) {
                if (i > 0) out << ", ";
                out << s->technique_ids[i];
            }
        }
        out << "\n";
    }
    if (!kb.provenance.fallback_cluster_ids.empty()) {
        out << "fallback selections: ";
        for (std::size_t i = 0; i < kb.provenance.fallback_cluster_ids.size(); ++i) {
            if (i > 0) out << ", ";
            out << kb.provenance.fallback_cluster_ids[i];
        }
        out << "\n";
    }
}

} // namespace detail

inline EnvMap snapshot_env() {
    EnvMap env;
    for (const char* name : {kApiKeyEnvVar, kConfigEnvVar}) {
        if (const char* value = std::getenv(name)) env[name] = value;
    }
    return env;
}

// Parses argv and routes to the kb / generate / eval / temp pipelines.
// Returns 0 on success and distinct codes for usage, validation, provider
// and I/O failures.
inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
               const EnvMap& env = snapshot_env()) {
    CLI::App app{"adaptive prompt generation toolkit"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::string> provider_override;
    std::optional<int> concurrency_override;
    app.add_option("--config", config_path, "configuration file (JSON)");
    app.add_option("--provider", provider_override, "provider kind override")
        ->check(CLI::IsMember({"mock", "live"}));
    app.add_option("--concurrency", concurrency_override, "max in-flight provider requests");

    // kb ------------------------------------------------------------------
    auto* kb_cmd = app.add_subcommand("kb", "knowledge base construction and inspection");
    kb_cmd->require_subcommand(1);

    struct {
        std::string tasks, catalog, out_path, checkpoint;
        std::uint64_t seed = 0;
    } kb_build_args;
    auto* kb_build = kb_cmd->add_subcommand("build", "build a knowledge base from a task list");
    kb_build->add_option("--tasks", kb_build_args.tasks, "tasks JSONL file")->required();
    kb_build->add_option("--catalog", kb_build_args.catalog, "technique catalog JSON")->required();
    kb_build->add_option("--out", kb_build_args.out_path, "output knowledge base file")->required();
    kb_build->add_option("--seed", kb_build_args.seed, "clustering seed");
    kb_build->add_option("--checkpoint", kb_build_args.checkpoint, "resumable checkpoint file");

    std::string kb_inspect_path;
    auto* kb_inspect = kb_cmd->add_subcommand("inspect", "print a knowledge base summary");
    kb_inspect->add_option("file", kb_inspect_path, "knowledge base file")->required();

    std::string kb_validate_path;
    auto* kb_validate = kb_cmd->add_subcommand("validate", "check a knowledge base");
    kb_validate->add_option("file", kb_validate_path, "knowledge base file")->required();

    // generate -------------------------------------------------------------
    struct {
        std::string kb, description, out_path;
        std::optional<double> temperature;
    } generate_args;
    auto* generate_cmd = app.add_subcommand("generate", "generate a prompt template");
    generate_cmd->add_option("--kb", generate_args.kb, "knowledge base file")->required();
    generate_cmd
        ->add_option("--task-description", generate_args.description,
                     "task description file, or - for stdin")
        ->required();
    generate_cmd->add_option("--out", generate_args.out_path, "output template JSON (default stdout)");
    generate_cmd->add_option("--temperature", generate_args.temperature, "generation temperature");

    // eval ------------------------------------------------------------------
    auto* eval_cmd = app.add_subcommand("eval", "run and score benchmark evaluations");
    eval_cmd->require_subcommand(1);

    struct {
        std::string task_dir, template_path, journal, answer_format, tag;
        double temperature = 0.0;
        int trials = 1;
        std::uint64_t seed = 0;
        int max_output_tokens = 8192;
    } eval_run_args;
    auto* eval_run = eval_cmd->add_subcommand("run", "run a template over a task directory");
    eval_run->add_option("--task-dir", eval_run_args.task_dir, "benchmark task directory")->required();
    eval_run->add_option("--template", eval_run_args.template_path, "template JSON file")->required();
    eval_run->add_option("--temperature", eval_run_args.temperature, "sampling temperature");
    eval_run->add_option("--trials", eval_run_args.trials, "number of independent trials");
    eval_run->add_option("--seed", eval_run_args.seed, "trial seed");
    eval_run->add_option("--journal", eval_run_args.journal, "JSONL record journal")->required();
    eval_run->add_option("--answer-format", eval_run_args.answer_format,
                         "file with the answer-format instruction (default: built-in)");
    eval_run->add_option("--template-tag", eval_run_args.tag, "generation tag recorded per record");
    eval_run->add_option("--max-output-tokens", eval_run_args.max_output_tokens, "output token cap");

    struct {
        std::string journal, mode = "corrected", format = "json", out_path;
    } eval_agg_args;
    auto* eval_aggregate = eval_cmd->add_subcommand("aggregate", "aggregate a journal into metrics");
    eval_aggregate->add_option("--journal", eval_agg_args.journal, "JSONL record journal")->required();
    eval_aggregate->add_option("--mode", eval_agg_args.mode, "scoring mode")
        ->check(CLI::IsMember({"corrected", "precorrection"}));
    eval_aggregate->add_option("--format", eval_agg_args.format, "output format")
        ->check(CLI::IsMember({"json", "csv"}));
    eval_aggregate->add_option("--out", eval_agg_args.out_path, "output file (default stdout)");

    // temp ------------------------------------------------------------------
    auto* temp_cmd = app.add_subcommand("temp", "temperature sweeps and reports");
    temp_cmd->require_subcommand(1);

    struct {
        std::string task_dir, template_path, plan, journal, tag;
        std::optional<std::uint64_t> seed;
    } temp_sweep_args;
    auto* temp_sweep = temp_cmd->add_subcommand("sweep", "sweep candidate temperatures");
    temp_sweep->add_option("--task-dir", temp_sweep_args.task_dir, "benchmark task directory")->required();
    temp_sweep->add_option("--template", temp_sweep_args.template_path, "template JSON file")->required();
    temp_sweep->add_option("--plan", temp_sweep_args.plan, "sweep plan JSON (default: config)");
    temp_sweep->add_option("--journal", temp_sweep_args.journal, "JSONL record journal")->required();
    temp_sweep->add_option("--seed", temp_sweep_args.seed, "sampling seed override");
    temp_sweep->add_option("--template-tag", temp_sweep_args.tag, "generation tag recorded per record");

    struct {
        std::string journal, format = "json", out_path;
    } temp_report_args;
    auto* temp_report = temp_cmd->add_subcommand("report", "per-task optimum and ANOVA");
    temp_report->add_option("--journal", temp_report_args.journal, "JSONL record journal")->required();
    temp_report->add_option("--format", temp_report_args.format, "output format")
        ->check(CLI::IsMember({"json", "csv"}));
    temp_report->add_option("--out", temp_report_args.out_path, "output file (default stdout)");

    std::vector<const char*> argv;
    argv.push_back("promptforge");
    for (const auto& arg : args) argv.push_back(arg.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n" << app.help();
        return kUsage;
    }

    try {
        std::string resolved_config = config_path;
        if (resolved_config.empty()) {
            if (auto it = env.find(kConfigEnvVar); it != env.end()) resolved_config = it->second;
        }
        AppConfig config = load_config(resolved_config, env);
        if (provider_override) config.provider_kind = parse_provider_kind(*provider_override);
        if (concurrency_override) config.concurrency = *concurrency_override;
        validate_config(config);

        if (kb_build->parsed()) {
            auto provider = make_provider(config);
            const std::vector<Task> tasks = load_tasks_jsonl(kb_build_args.tasks);
            const Catalog catalog = Catalog::load_file(kb_build_args.catalog);
            KbBuildOptions options;
            options.seed = kb_build_args.seed;
            options.chat_model = config.chat_model;
            options.embedding_model = config.embedding_model;
            options.checkpoint_path = kb_build_args.checkpoint;
            const KnowledgeBase kb = build_kb(tasks, catalog, *provider, options);
            save_kb(kb, kb_build_args.out_path);
            err << "kb build: " << kb.clusters.size() << " clusters, silhouette "
                << format_double(kb.provenance.silhouette) << ", written to "
                << kb_build_args.out_path << "\n";
            return kOk;
        }
        if (kb_inspect->parsed()) {
            detail::print_kb_summary(load_kb(kb_inspect_path), out);
            return kOk;
        }
        if (kb_validate->parsed()) {
            std::vector<std::string> violations;
            try {
                violations = validate_kb(load_kb(kb_validate_path));
            } catch (const ValidationError& e) {
                err << "invalid knowledge base: " << e.what() << "\n";
                return kValidation;
            }
            if (!violations.empty()) {
                for (const auto& v : violations) err << "violation: " << v << "\n";
                return kValidation;
            }
            out << "ok\n";
            return kOk;
        }
        if (generate_cmd->parsed()) {
            auto provider = make_provider(config);
            const KnowledgeBase kb = load_kb(generate_args.kb);
            const std::string description = detail::read_description_source(generate_args.description);
            GenerateOptions options;
            options.chat_model = config.chat_model;
            options.temperature = generate_args.temperature.value_or(config.generation_temperature);
            const GeneratedTemplate result = generate_for_description(description, kb, *provider, options);
            if (generate_args.out_path.empty()) {
                out << nlohmann::json(result).dump(2) << "\n";
            } else {
                save_template(result, generate_args.out_path);
                err << "generate: matched cluster " << result.source_cluster_id << " (similarity "
                    << format_double(result.similarity) << "), written to " << generate_args.out_path
                    << "\n";
            }
            return kOk;
        }
        if (eval_run->parsed()) {
            auto provider = make_provider(config);
            const EvalTask task = ingest_task_dir(eval_run_args.task_dir);
            const GeneratedTemplate template_value = load_template(eval_run_args.template_path);
            RunOptions options;
            options.chat_model = config.chat_model;
            options.temperature = eval_run_args.temperature;
            options.trials = eval_run_args.trials;
            options.seed = eval_run_args.seed;
            options.max_output_tokens = eval_run_args.max_output_tokens;
            options.journal_path = eval_run_args.journal;
            options.template_tag = eval_run_args.tag;
            if (!eval_run_args.answer_format.empty()) {
                options.answer_format = read_text_file(eval_run_args.answer_format);
            }
            const std::vector<EvalRecord> records = run_trials(task, template_value, *provider, options);
            err << "eval run: " << records.size() << " records in " << eval_run_args.journal << "\n";
            return kOk;
        }
        if (eval_aggregate->parsed()) {
            const std::vector<EvalRecord> records = records_from_journal(eval_agg_args.journal);
            const MetricsReport report = aggregate(records, parse_scoring_mode(eval_agg_args.mode));
            const ReportFormat format =
                eval_agg_args.format == "csv" ? ReportFormat::csv : ReportFormat::json;
            if (eval_agg_args.out_path.empty()) {
                out << (format == ReportFormat::csv ? report_to_csv(report)
                                                    : nlohmann::json(report).dump(2) + "\n");
            } else {
                emit_report(report, format, eval_agg_args.out_path);
            }
            return kOk;
        }
        if (temp_sweep->parsed()) {
            auto provider = make_provider(config);
            const EvalTask task = ingest_task_dir(temp_sweep_args.task_dir);
            const GeneratedTemplate template_value = load_template(temp_sweep_args.template_path);
            SweepPlan plan;
            plan.temperatures = config.sweep_temperatures;
            plan.sample_size = config.sample_size;
            plan.trials = config.trials;
            if (!temp_sweep_args.plan.empty()) plan = read_json_file(temp_sweep_args.plan).get<SweepPlan>();
            if (temp_sweep_args.seed) plan.sampling_seed = *temp_sweep_args.seed;
            RunOptions options;
            options.chat_model = config.chat_model;
            options.journal_path = temp_sweep_args.journal;
            options.template_tag = temp_sweep_args.tag;
            const SweepMatrix matrix = sweep(task, template_value, *provider, plan, options);
            const auto [best_temperature, best_mean] = pick_optimal(matrix);
            err << "temp sweep: optimal temperature " << format_double(best_temperature)
                << " with mean " << format_double(best_mean) << "\n";
            return kOk;
        }
        if (temp_report->parsed()) {
            const std::vector<EvalRecord> records = records_from_journal(temp_report_args.journal);
            const std::vector<TemperatureReportRow> rows = temperature_report(records);
            std::string rendered = temp_report_args.format == "csv"
                                       ? temperature_report_csv(rows)
                                       : nlohmann::json(rows).dump(2) + "\n";
            if (temp_report_args.out_path.empty()) {
                out << rendered;
            } else {
                write_text_file_atomic(temp_report_args.out_path, rendered);
            }
            return kOk;
        }
        err << app.help();
        return kUsage;
    } catch (const UsageError& e) {
        err << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const ProviderError& e) {
        err << "provider error: " << e.what() << "\n";
        return kProvider;
    } catch (const ValidationError& e) {
        err << "validation error: " << e.what() << "\n";
        return kValidation;
    } catch (const IoError& e) {
        err << "io error: " << e.what() << "\n";
        return kIo;
    }
}

inline int run(int argc, char** argv) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return run(args, std::cout, std::cerr);
}

} // namespace promptforge::cli
