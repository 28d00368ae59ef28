#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "promptforge/errors.hpp"
#include "promptforge/json_util.hpp"
#include "promptforge/promptgen.hpp"
#include "promptforge/provider.hpp"

namespace promptforge {

// Answer-format instruction substituted for {$FINAL_ANSWER_FORMAT}; ships
// verbatim as fixtures/final_answer_format.bbeh.txt.
inline constexpr std::string_view kFinalAnswerFormat =
    "Think step by step, and when you provide the final answer, please use the prefix "
    "\"The answer is:\" without any modification, and provide the answer directly, with no "
    "formatting, no bolding, and no markup. For instance: \"The answer is: 42\" or \"The answer "
    "is: yes\". If the question is multiple choice with a single correct answer, the final answer "
    "must only be the letter corresponding to the correct answer. For example, \"The answer is: "
    "(a)\".";

// Recognized final-answer prefixes, in fixture order; ships verbatim as
// fixtures/extraction_prefixes.json.
inline constexpr std::array<std::string_view, 4> kExtractionPrefixes = {
    "The answer is:",
    "The final answer is ",
    "The final answer is: ",
    "The answer is ",
};

struct EvalProblem {
    std::string input;
    std::string target;
};

struct EvalTask {
    std::string name;
    std::string description; // the task directory's README text
    std::vector<EvalProblem> problems;
};

// Reads one benchmark task directory: a README plus a problems file, either
// task.json carrying {"examples": [{"input", "target"}, ...]} (or a bare
// array of such records) or problems.jsonl with one record per line.
inline EvalTask ingest_task_dir(const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir.string());

    EvalTask task;
    task.name = dir.filename().string();
    if (task.name.empty()) task.name = dir.parent_path().filename().string();

    bool have_readme = false;
    for (const char* candidate : {"README.md", "README.txt", "README"}) {
        if (fs::exists(dir / candidate)) {
            task.description = read_text_file(dir / candidate);
            have_readme = true;
            break;
        }
    }
    if (!have_readme) throw ValidationError("task directory has no README: " + dir.string());

    auto push_problem = [&](const json& record) {
        EvalProblem problem;
        problem.input = record.at("input").get<std::string>();
        const json& target = record.at("target");
        problem.target = target.is_string() ? target.get<std::string>() : target.dump();
        if (problem.input.empty()) throw ValidationError("problem with empty input");
        task.problems.push_back(std::move(problem));
    };

    if (fs::exists(dir / "task.json")) {
        const json doc = read_json_file(dir / "task.json");
        const json& examples = doc.is_array() ? doc : doc.at("examples");
        if (!examples.is_array()) throw ValidationError("task.json has no examples array");
        for (const auto& record : examples) push_problem(record);
    } else if (fs::exists(dir / "problems.jsonl")) {
        JsonlLines lines = read_jsonl_file(dir / "problems.jsonl");
        if (lines.broken_tail) throw ValidationError("problems.jsonl has a malformed line");
        for (const auto& record : lines.records) push_problem(record);
    } else {
        throw ValidationError("task directory has no task.json or problems.jsonl: " + dir.string());
    }
    if (task.problems.empty()) throw ValidationError("task has no problems: " + dir.string());
    return task;
}

enum class NonComplianceReason { truncated, no_prefix, provider_error };

inline const char* to_string(NonComplianceReason reason) {
    switch (reason) {
    case NonComplianceReason::truncated: return "truncated";
    case NonComplianceReason::no_prefix: return "no_prefix";
    case NonComplianceReason::provider_error: return "provider_error";
    }
    return "unknown";
}

inline NonComplianceReason parse_noncompliance_reason(const std::string& text) {
    if (text == "truncated") return NonComplianceReason::truncated;
    if (text == "no_prefix") return NonComplianceReason::no_prefix;
    if (text == "provider_error") return NonComplianceReason::provider_error;
    throw ValidationError("unknown non-compliance reason: " + text);
}

struct ExtractionOutcome {
    bool compliant = false;
    std::string answer;                                        // set when compliant
    NonComplianceReason reason = NonComplianceReason::no_prefix; // set when not

    static ExtractionOutcome make_compliant(std::string answer) {
        ExtractionOutcome outcome;
        outcome.compliant = true;
        outcome.answer = std::move(answer);
        return outcome;
    }

    static ExtractionOutcome make_noncompliant(NonComplianceReason reason) {
        ExtractionOutcome outcome;
        outcome.compliant = false;
        outcome.reason = reason;
        return outcome;
    }
};

inline void to_json(nlohmann::json& j, const ExtractionOutcome& o) {
    if (o.compliant) {
        j = nlohmann::json{{"compliant", true}, {"answer", o.answer}};
    } else {
        j = nlohmann::json{{"compliant", false}, {"reason", to_string(o.reason)}};
    }
}

inline void from_json(const nlohmann::json& j, ExtractionOutcome& o) {
    o.compliant = j.at("compliant").get<bool>();
    if (o.compliant) {
        j.at("answer").get_to(o.answer);
    } else {
        o.reason = parse_noncompliance_reason(j.at("reason").get<std::string>());
    }
}

namespace detail {

inline std::string trim_answer(std::string text) {
    auto is_space = [](unsigned char c) { return std::isspace(c) != 0; };
    while (!text.empty() && is_space(static_cast<unsigned char>(text.front()))) text.erase(text.begin());
    for (;;) {
        while (!text.empty() && is_space(static_cast<unsigned char>(text.back()))) text.pop_back();
        if (!text.empty() && text.back() == '.') {
            text.pop_back();
            continue;
        }
        break;
    }
    return text;
}

} // namespace detail

// Scans the output for the four recognized prefixes and extracts the text
// after the match that starts latest (a final answer wins over earlier
// restatements). Truncated outputs are non-compliant regardless of content.
inline ExtractionOutcome extract_answer(const std::string& raw_output, bool truncated) {
    if (truncated) return ExtractionOutcome::make_noncompliant(NonComplianceReason::truncated);

    std::size_t best_start = std::string::npos;
    std::size_t best_len = 0;
    for (std::string_view prefix : kExtractionPrefixes) {
        for (std::size_t pos = raw_output.find(prefix); pos != std::string::npos;
             pos = raw_output.find(prefix, pos + 1)) {
            if (best_start == std::string::npos || pos > best_start) {
                best_start = pos;
                best_len = prefix.size();
            }
        }
    }
    if (best_start == std::string::npos) {
        return ExtractionOutcome::make_noncompliant(NonComplianceReason::no_prefix);
    }
    return ExtractionOutcome::make_compliant(
        detail::trim_answer(raw_output.substr(best_start + best_len)));
}

namespace detail {

// Case folding, whitespace/punctuation trimming, and multiple-choice letter
// unwrapping: "(a)", "a" and "A" all normalize to "a". A documented
// approximation of the benchmark's official grading script.
inline std::string normalize_for_judge(std::string text) {
    std::transform(text.begin(), text.end(), text.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    auto is_space = [](unsigned char c) { return std::isspace(c) != 0; };
    while (!text.empty() && is_space(static_cast<unsigned char>(text.front()))) text.erase(text.begin());
    const std::string punctuation = ".,;:!?";
    for (;;) {
        while (!text.empty() && is_space(static_cast<unsigned char>(text.back()))) text.pop_back();
        if (!text.empty() && punctuation.find(text.back()) != std::string::npos) {
            text.pop_back();
            continue;
        }
        break;
    }
    if (text.size() >= 3 && text.front() == '(' && text.back() == ')') {
        const std::string inner = text.substr(1, text.size() - 2);
        if (!inner.empty() &&
            std::all_of(inner.begin(), inner.end(),
                        [](unsigned char c) { return std::isalnum(c) != 0; })) {
            return inner;
        }
    }
    return text;
}

} // namespace detail

inline bool judge(const std::string& answer, const std::string& target) {
    return detail::normalize_for_judge(answer) == detail::normalize_for_judge(target);
}

struct EvalRecord {
    std::string task_name;
    std::string template_tag; // optional generation tag for pooled sweeps
    int problem_index = 0;
    int trial_index = 0;
    double temperature = 0.0;
    std::string raw_output;
    ExtractionOutcome outcome;
    bool correct = false; // false whenever non-compliant
};

inline void to_json(nlohmann::json& j, const EvalRecord& r) {
    j = nlohmann::json{{"task_name", r.task_name},
                       {"template_tag", r.template_tag},
                       {"problem_index", r.problem_index},
                       {"trial_index", r.trial_index},
                       {"temperature", r.temperature},
                       {"raw_output", r.raw_output},
                       {"outcome", r.outcome},
                       {"correct", r.correct}};
}

inline void from_json(const nlohmann::json& j, EvalRecord& r) {
    j.at("task_name").get_to(r.task_name);
    r.template_tag = j.value("template_tag", "");
    j.at("problem_index").get_to(r.problem_index);
    j.at("trial_index").get_to(r.trial_index);
    j.at("temperature").get_to(r.temperature);
    j.at("raw_output").get_to(r.raw_output);
    j.at("outcome").get_to(r.outcome);
    j.at("correct").get_to(r.correct);
}

inline std::vector<EvalRecord> records_from_journal(const std::filesystem::path& path) {
    JsonlLines lines = read_jsonl_file(path);
    std::vector<EvalRecord> records;
    records.reserve(lines.records.size());
    for (const auto& line : lines.records) records.push_back(line.get<EvalRecord>());
    return records;
}

struct RunOptions {
    std::string chat_model = "gemini-2.5-pro";
    double temperature = 0.0;
    int trials = 1;
    std::uint64_t seed = 0;
    int max_output_tokens = 8192;
    std::string answer_format{kFinalAnswerFormat};
    std::string journal_path; // empty runs without journaling
    std::string template_tag;
};

namespace detail {

inline std::string record_key(const std::string& task, const std::string& tag, int problem,
                              int trial, double temperature) {
    std::ostringstream key;
    key << task << '\x1f' << tag << '\x1f' << problem << '\x1f' << trial << '\x1f'
        << nlohmann::json(temperature).dump();
    return key.str();
}

} // namespace detail

// Runs trials x problems through the template at one temperature. Each
// finished record is appended to the journal immediately, and a rerun skips
// every (problem, trial) already journaled, so an interrupted run resumes to
// the same final record set.
inline std::vector<EvalRecord> run_trials(const EvalTask& task,
                                          const GeneratedTemplate& template_value,
                                          Provider& provider, const RunOptions& options) {
    if (options.trials < 1) throw ValidationError("trials must be >= 1");
    if (task.problems.empty()) throw ValidationError("task has no problems");

    std::map<std::string, EvalRecord> existing;
    if (!options.journal_path.empty()) {
        JsonlLines lines = read_jsonl_file(options.journal_path);
        for (const auto& line : lines.records) {
            EvalRecord record = line.get<EvalRecord>();
            existing[detail::record_key(record.task_name, record.template_tag,
                                        record.problem_index, record.trial_index,
                                        record.temperature)] = std::move(record);
        }
        if (lines.broken_tail) {
            // Interrupted mid-line: rewrite the intact prefix before appending.
            std::ostringstream content;
            for (const auto& line : lines.records) content << line.dump() << '\n';
            write_text_file_atomic(options.journal_path, content.str());
        }
    }

    std::ofstream journal;
    if (!options.journal_path.empty()) {
        journal.open(options.journal_path, std::ios::app);
        if (!journal) throw IoError("cannot open journal: " + options.journal_path);
    }

    std::vector<EvalRecord> records;
    records.reserve(task.problems.size() * static_cast<std::size_t>(options.trials));
    for (int trial = 0; trial < options.trials; ++trial) {
        for (std::size_t problem = 0; problem < task.problems.size(); ++problem) {
            const std::string key =
                detail::record_key(task.name, options.template_tag, static_cast<int>(problem),
                                   trial, options.temperature);
            if (auto it = existing.find(key); it != existing.end()) {
                records.push_back(it->second);
                continue;
            }

            EvalRecord record;
            record.task_name = task.name;
            record.template_tag = options.template_tag;
            record.problem_index = static_cast<int>(problem);
            record.trial_index = trial;
            record.temperature = options.temperature;

            ChatRequest request;
            request.model_name = options.chat_model;
            request.temperature = options.temperature;
            request.max_output_tokens = options.max_output_tokens;
            {
                std::ostringstream tag;
                tag << "eval:task=" << task.name << ";tag=" << options.template_tag
                    << ";problem=" << problem << ";trial=" << trial << ";seed=" << options.seed;
                request.request_tag = tag.str();
            }
            request.prompt_text = instantiate_template(template_value, task.problems[problem].input,
                                                       options.answer_format);
            try {
                const ChatResponse response = provider.complete(request);
                record.raw_output = response.text;
                record.outcome = extract_answer(response.text, response.truncated);
            } catch (const ProviderError&) {
                record.raw_output = "";
                record.outcome =
                    ExtractionOutcome::make_noncompliant(NonComplianceReason::provider_error);
            }
            record.correct = record.outcome.compliant &&
                             judge(record.outcome.answer, task.problems[problem].target);

            if (journal.is_open()) {
                journal << nlohmann::json(record).dump() << '\n';
                journal.flush();
            }
            records.push_back(std::move(record));
        }
    }
    return records;
}

enum class ScoringMode { corrected, precorrection };

inline const char* to_string(ScoringMode mode) {
    return mode == ScoringMode::corrected ? "corrected" : "precorrection";
}

inline ScoringMode parse_scoring_mode(const std::string& text) {
    if (text == "corrected") return ScoringMode::corrected;
    if (text == "precorrection") return ScoringMode::precorrection;
    throw ValidationError("unknown scoring mode: " + text);
}

// Cross-task reducers. Values are per-task means in percent.
inline double arithmetic_mean(const std::vector<double>& values) {
    if (values.empty()) throw ValidationError("mean of empty list");
    double sum = 0.0;
    for (double v : values) sum += v;
    return sum / static_cast<double>(values.size());
}

// Harmonic mean over (v + 1): n / sum(1 / (v_i + 1)). The +1 shift keeps
// zero-score tasks finite; no 1 is subtracted afterwards.
inline double harmonic_mean_plus_one(const std::vector<double>& values) {
    if (values.empty()) throw ValidationError("mean of empty list");
    double sum = 0.0;
    for (double v : values) sum += 1.0 / (v + 1.0);
    return static_cast<double>(values.size()) / sum;
}

struct MetricsReport {
    ScoringMode mode = ScoringMode::corrected;
    std::map<std::string, double> per_task_mean;      // percent
    double arithmetic_mean_across_tasks = 0.0;
    double harmonic_mean_across_tasks = 0.0;
    std::map<std::string, double> noncompliance_rate; // percent
};

inline void to_json(nlohmann::json& j, const MetricsReport& r) {
    j = nlohmann::json{{"mode", to_string(r.mode)},
                       {"per_task_mean", r.per_task_mean},
                       {"arithmetic_mean_across_tasks", r.arithmetic_mean_across_tasks},
                       {"harmonic_mean_across_tasks", r.harmonic_mean_across_tasks},
                       {"noncompliance_rate", r.noncompliance_rate}};
}

inline void from_json(const nlohmann::json& j, MetricsReport& r) {
    r.mode = parse_scoring_mode(j.at("mode").get<std::string>());
    j.at("per_task_mean").get_to(r.per_task_mean);
    j.at("arithmetic_mean_across_tasks").get_to(r.arithmetic_mean_across_tasks);
    j.at("harmonic_mean_across_tasks").get_to(r.harmonic_mean_across_tasks);
    j.at("noncompliance_rate").get_to(r.noncompliance_rate);
}

// Per-task mean = mean over trials of per-trial accuracy. Corrected mode
// drops non-compliant outputs from the denominator (a trial with no
// compliant output scores 0); precorrection counts them as wrong.
inline MetricsReport aggregate(const std::vector<EvalRecord>& records, ScoringMode mode) {
    if (records.empty()) throw ValidationError("no records to aggregate");

    struct TrialCounts {
        int total = 0;
        int correct = 0;
        int noncompliant = 0;
    };
    std::map<std::string, std::map<int, TrialCounts>> by_task;
    std::map<std::string, std::pair<int, int>> noncompliance; // task -> (noncompliant, total)
    for (const auto& record : records) {
        TrialCounts& counts = by_task[record.task_name][record.trial_index];
        ++counts.total;
        if (record.correct) ++counts.correct;
        if (!record.outcome.compliant) ++counts.noncompliant;
        auto& [bad, total] = noncompliance[record.task_name];
        if (!record.outcome.compliant) ++bad;
        ++total;
    }

    MetricsReport report;
    report.mode = mode;
    std::vector<double> task_means;
    for (const auto& [task, trials] : by_task) {
        double sum = 0.0;
        for (const auto& [trial, counts] : trials) {
            double accuracy = 0.0;
            if (mode == ScoringMode::corrected) {
                const int denominator = counts.total - counts.noncompliant;
                accuracy = denominator > 0
                               ? 100.0 * counts.correct / static_cast<double>(denominator)
                               : 0.0;
            } else {
                accuracy = 100.0 * counts.correct / static_cast<double>(counts.total);
            }
            sum += accuracy;
        }
        const double mean = sum / static_cast<double>(trials.size());
        report.per_task_mean[task] = mean;
        task_means.push_back(mean);
        const auto& [bad, total] = noncompliance[task];
        report.noncompliance_rate[task] = 100.0 * bad / static_cast<double>(total);
    }
    report.arithmetic_mean_across_tasks = arithmetic_mean(task_means);
    report.harmonic_mean_across_tasks = harmonic_mean_plus_one(task_means);
    return report;
}

inline std::string report_to_csv(const MetricsReport& report) {
    std::ostringstream out;
    out << "task,mean,noncompliance_rate\n";
    for (const auto& [task, mean] : report.per_task_mean) {
        out << task << ',' << format_double(mean) << ','
            << format_double(report.noncompliance_rate.at(task)) << '\n';
    }
    out << "arithmetic_mean_across_tasks," << format_double(report.arithmetic_mean_across_tasks)
        << ",\n";
    out << "harmonic_mean_across_tasks," << format_double(report.harmonic_mean_across_tasks)
        << ",\n";
    return out.str();
}

enum class ReportFormat { json, csv };

inline void emit_report(const MetricsReport& report, ReportFormat format,
                        const std::filesystem::path& path) {
    if (format == ReportFormat::json) {
        write_json_file_atomic(path, nlohmann::json(report));
    } else {
        write_text_file_atomic(path, report_to_csv(report));
    }
}

} // namespace promptforge
