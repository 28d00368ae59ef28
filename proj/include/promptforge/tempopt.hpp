#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "promptforge/errors.hpp"
#include "promptforge/evalharness.hpp"
#include "promptforge/rng.hpp"
#include "promptforge/stats.hpp"

namespace promptforge {

inline const std::vector<double>& default_sweep_temperatures() {
    static const std::vector<double> kTemps = {0.0, 0.2, 0.4, 0.6, 0.8, 1.0, 1.3};
    return kTemps;
}

struct SweepPlan {
    std::vector<double> temperatures = default_sweep_temperatures();
    int sample_size = 40;
    int trials = 10;
    std::uint64_t sampling_seed = 0;
};

inline void validate_plan(const SweepPlan& plan) {
    if (plan.temperatures.empty()) throw ValidationError("plan has no temperatures");
    std::set<double> seen;
    for (double t : plan.temperatures) {
        if (!(std::isfinite(t)) || t < 0.0) throw ValidationError("temperatures must be finite and >= 0");
        if (!seen.insert(t).second) throw ValidationError("temperatures must be distinct");
    }
    if (plan.sample_size < 1) throw ValidationError("sample_size must be positive");
    if (plan.trials < 1) throw ValidationError("trials must be positive");
}

inline void to_json(nlohmann::json& j, const SweepPlan& p) {
    j = nlohmann::json{{"temperatures", p.temperatures},
                       {"sample_size", p.sample_size},
                       {"trials", p.trials},
                       {"sampling_seed", p.sampling_seed}};
}

inline void from_json(const nlohmann::json& j, SweepPlan& p) {
    if (j.contains("temperatures")) j.at("temperatures").get_to(p.temperatures);
    p.sample_size = j.value("sample_size", 40);
    p.trials = j.value("trials", 10);
    p.sampling_seed = j.value("sampling_seed", std::uint64_t{0});
}

// Uniform sample of n problems without replacement, deterministic for a
// given seed; original problem order is preserved. Requests of n >= problem
// count return the task unchanged.
inline EvalTask sample_problems(const EvalTask& task, int n, std::uint64_t seed) {
    if (n < 1) throw ValidationError("sample size must be >= 1");
    if (static_cast<std::size_t>(n) >= task.problems.size()) return task;
    SplitMix64 rng(seed);
    const std::vector<std::size_t> indices =
        sample_indices(task.problems.size(), static_cast<std::size_t>(n), rng);
    EvalTask sampled;
    sampled.name = task.name;
    sampled.description = task.description;
    for (std::size_t index : indices) sampled.problems.push_back(task.problems[index]);
    return sampled;
}

// temperature -> per-trial accuracies (percent, corrected scoring).
using SweepMatrix = std::map<double, std::vector<double>>;

namespace detail {

inline std::vector<double> per_trial_accuracies(const std::vector<EvalRecord>& records,
                                                ScoringMode mode) {
    std::map<int, std::pair<int, int>> by_trial; // trial -> (correct, denominator)
    std::map<int, int> totals;
    for (const auto& record : records) {
        auto& [correct, denominator] = by_trial[record.trial_index];
        ++totals[record.trial_index];
        if (record.correct) ++correct;
        if (mode == ScoringMode::corrected) {
            if (record.outcome.compliant) ++denominator;
        } else {
            ++denominator;
        }
    }
    std::vector<double> accuracies;
    for (const auto& [trial, counts] : by_trial) {
        const auto& [correct, denominator] = counts;
        accuracies.push_back(denominator > 0 ? 100.0 * correct / static_cast<double>(denominator)
                                             : 0.0);
    }
    return accuracies;
}

} // namespace detail

// Runs the sampled task through every planned temperature. All records land
// in one journal (keys carry the temperature), so an interrupted sweep
// resumes exactly where it stopped.
inline SweepMatrix sweep(const EvalTask& task, const GeneratedTemplate& template_value,
                         Provider& provider, const SweepPlan& plan, RunOptions options) {
    validate_plan(plan);
    const EvalTask sampled = sample_problems(task, plan.sample_size, plan.sampling_seed);
    SweepMatrix matrix;
    options.trials = plan.trials;
    for (double temperature : plan.temperatures) {
        options.temperature = temperature;
        const std::vector<EvalRecord> records = run_trials(sampled, template_value, provider, options);
        matrix[temperature] = detail::per_trial_accuracies(records, ScoringMode::corrected);
    }
    return matrix;
}

// Temperature with the highest mean accuracy; ties go to the lowest
// temperature (the map iterates ascending, strict improvement required).
inline std::pair<double, double> pick_optimal(const SweepMatrix& matrix) {
    if (matrix.empty()) throw ValidationError("empty sweep matrix");
    double best_temperature = 0.0;
    double best_mean = -std::numeric_limits<double>::infinity();
    for (const auto& [temperature, accuracies] : matrix) {
        if (accuracies.empty()) throw ValidationError("temperature with no trials");
        const double mean = arithmetic_mean(accuracies);
        if (mean > best_mean) {
            best_mean = mean;
            best_temperature = temperature;
        }
    }
    return {best_temperature, best_mean};
}

struct AnovaResult {
    double f_statistic = 0.0;
    double p_value = 1.0;
    int df_between = 0;
    int df_within = 0;
};

inline void to_json(nlohmann::json& j, const AnovaResult& r) {
    j = nlohmann::json{{"f_statistic", std::isinf(r.f_statistic) ? nlohmann::json("inf")
                                                                 : nlohmann::json(r.f_statistic)},
                       {"p_value", r.p_value},
                       {"df_between", r.df_between},
                       {"df_within", r.df_within}};
}

// Classical one-way ANOVA: F = MS_between / MS_within, p from the upper tail
// of F(df_between, df_within). Zero within-group variance with distinct
// group means yields F = +inf with p floored at machine epsilon; all-equal
// data yields F = 0, p = 1.
inline AnovaResult one_way_anova(const std::vector<std::vector<double>>& groups) {
    if (groups.size() < 2) throw ValidationError("ANOVA requires at least 2 groups");
    int total_count = 0;
    double total_sum = 0.0;
    for (const auto& group : groups) {
        if (group.size() < 2) throw ValidationError("every group needs at least 2 observations");
        for (double v : group) {
            total_sum += v;
            ++total_count;
        }
    }
    const double grand_mean = total_sum / total_count;

    double ss_between = 0.0;
    double ss_within = 0.0;
    for (const auto& group : groups) {
        double group_sum = 0.0;
        for (double v : group) group_sum += v;
        const double group_mean = group_sum / static_cast<double>(group.size());
        ss_between += static_cast<double>(group.size()) * (group_mean - grand_mean) * (group_mean - grand_mean);
        for (double v : group) ss_within += (v - group_mean) * (v - group_mean);
    }

    AnovaResult result;
    result.df_between = static_cast<int>(groups.size()) - 1;
    result.df_within = total_count - static_cast<int>(groups.size());
    const double ms_between = ss_between / result.df_between;
    const double ms_within = ss_within / result.df_within;

    if (ms_within == 0.0) {
        if (ms_between == 0.0) {
            result.f_statistic = 0.0;
            result.p_value = 1.0;
        } else {
            result.f_statistic = std::numeric_limits<double>::infinity();
            result.p_value = std::numeric_limits<double>::epsilon();
        }
        return result;
    }
    result.f_statistic = ms_between / ms_within;
    result.p_value = std::max(stats::f_upper_tail(result.f_statistic, result.df_between, result.df_within),
                              std::numeric_limits<double>::epsilon());
    return result;
}

// One row of the temperature report: the per-task optimum plus significance.
struct TemperatureReportRow {
    std::string task_name;
    double optimal_temperature = 0.0;
    double optimal_mean = 0.0;
    AnovaResult anova;
};

inline void to_json(nlohmann::json& j, const TemperatureReportRow& row) {
    j = nlohmann::json{{"task_name", row.task_name},
                       {"optimal_temperature", row.optimal_temperature},
                       {"optimal_mean", row.optimal_mean},
                       {"f_statistic", std::isinf(row.anova.f_statistic)
                                           ? nlohmann::json("inf")
                                           : nlohmann::json(row.anova.f_statistic)},
                       {"p_value", row.anova.p_value},
                       {"df_between", row.anova.df_between},
                       {"df_within", row.anova.df_within}};
}

// Rebuilds the per-task sweep matrices from journaled records (pooling all
// template tags) and derives optimum + ANOVA per task.
inline std::vector<TemperatureReportRow> temperature_report(const std::vector<EvalRecord>& records) {
    if (records.empty()) throw ValidationError("no records to report on");
    std::map<std::string, std::map<double, std::vector<EvalRecord>>> by_task;
    for (const auto& record : records) {
        by_task[record.task_name][record.temperature].push_back(record);
    }
    std::vector<TemperatureReportRow> rows;
    for (const auto& [task, by_temperature] : by_task) {
        SweepMatrix matrix;
        for (const auto& [temperature, task_records] : by_temperature) {
            matrix[temperature] = detail::per_trial_accuracies(task_records, ScoringMode::corrected);
        }
        TemperatureReportRow row;
        row.task_name = task;
        const auto [temperature, mean] = pick_optimal(matrix);
        row.optimal_temperature = temperature;
        row.optimal_mean = mean;
        std::vector<std::vector<double>> groups;
        for (auto& [t, accuracies] : matrix) groups.push_back(accuracies);
        row.anova = one_way_anova(groups);
        rows.push_back(std::move(row));
    }
    return rows;
}

inline std::string temperature_report_csv(const std::vector<TemperatureReportRow>& rows) {
    std::ostringstream out;
    out << "task,optimal_temperature,optimal_mean,f_statistic,p_value\n";
    for (const auto& row : rows) {
        out << row.task_name << ',' << format_double(row.optimal_temperature) << ','
            << format_double(row.optimal_mean) << ','
            << (std::isinf(row.anova.f_statistic) ? std::string("inf")
                                                  : format_double(row.anova.f_statistic))
            << ',' << format_double(row.anova.p_value) << '\n';
    }
    return out.str();
}

} // namespace promptforge
