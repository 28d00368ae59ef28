#pragma once

#include <algorithm>
#include <filesystem>
#include <map>
#include <optional>
#include <regex>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "promptforge/catalog.hpp"
#include "promptforge/clustering.hpp"
#include "promptforge/errors.hpp"
#include "promptforge/instructions.hpp"
#include "promptforge/json_util.hpp"
#include "promptforge/provider.hpp"
#include "promptforge/vectors.hpp"

namespace promptforge {

struct Task {
    std::string name;
    std::string description;
};

inline void to_json(nlohmann::json& j, const Task& t) {
    j = nlohmann::json{{"name", t.name}, {"description", t.description}};
}

inline void from_json(const nlohmann::json& j, Task& t) {
    j.at("name").get_to(t.name);
    j.at("description").get_to(t.description);
}

struct TaskCluster {
    std::string cluster_id;
    std::string cluster_description;
    std::vector<std::string> member_task_names;
    EmbeddingVector description_vector;
};

inline void to_json(nlohmann::json& j, const TaskCluster& c) {
    j = nlohmann::json{{"cluster_id", c.cluster_id},
                       {"cluster_description", c.cluster_description},
                       {"member_task_names", c.member_task_names},
                       {"description_vector", c.description_vector}};
}

inline void from_json(const nlohmann::json& j, TaskCluster& c) {
    j.at("cluster_id").get_to(c.cluster_id);
    j.at("cluster_description").get_to(c.cluster_description);
    j.at("member_task_names").get_to(c.member_task_names);
    j.at("description_vector").get_to(c.description_vector);
}

struct KbProvenance {
    std::string chat_model;
    std::string embedding_model;
    std::uint64_t clustering_seed = 0;
    double silhouette = 0.0;
    int k = 0;
    std::vector<std::string> fallback_cluster_ids; // selections that hit the retry fallback
    std::string instructions_version{instructions::kVersion};
};

inline void to_json(nlohmann::json& j, const KbProvenance& p) {
    j = nlohmann::json{{"chat_model", p.chat_model},
                       {"embedding_model", p.embedding_model},
                       {"clustering_seed", p.clustering_seed},
                       {"silhouette", p.silhouette},
                       {"k", p.k},
                       {"fallback_cluster_ids", p.fallback_cluster_ids},
                       {"instructions_version", p.instructions_version}};
}

inline void from_json(const nlohmann::json& j, KbProvenance& p) {
    j.at("chat_model").get_to(p.chat_model);
    j.at("embedding_model").get_to(p.embedding_model);
    j.at("clustering_seed").get_to(p.clustering_seed);
    j.at("silhouette").get_to(p.silhouette);
    j.at("k").get_to(p.k);
    j.at("fallback_cluster_ids").get_to(p.fallback_cluster_ids);
    p.instructions_version = j.value("instructions_version", "");
}

// The persistent cluster -> technique mapping plus everything needed to use
// it standalone: the catalog snapshot the selections refer to, the cluster
// description vectors, and build provenance.
struct KnowledgeBase {
    static constexpr int kSchemaVersion = 1;

    Catalog catalog;
    std::vector<TaskCluster> clusters;
    std::vector<TechniqueSelection> selections; // aligned with clusters
    KbProvenance provenance;

    const TaskCluster* find_cluster(const std::string& cluster_id) const {
        for (const auto& c : clusters) {
            if (c.cluster_id == cluster_id) return &c;
        }
        return nullptr;
    }

    const TechniqueSelection* find_selection(const std::string& cluster_id) const {
        for (const auto& s : selections) {
            if (s.cluster_id == cluster_id) return &s;
        }
        return nullptr;
    }
};

inline nlohmann::json kb_to_json(const KnowledgeBase& kb) {
    nlohmann::json selections = nlohmann::json::object();
    for (const auto& s : kb.selections) selections[s.cluster_id] = s.technique_ids;
    return nlohmann::json{{"schema_version", KnowledgeBase::kSchemaVersion},
                          {"catalog", kb.catalog.to_json_doc()},
                          {"catalog_ref", kb.catalog.fingerprint()},
                          {"clusters", kb.clusters},
                          {"selections", selections},
                          {"provenance", kb.provenance}};
}

inline KnowledgeBase kb_from_json(const nlohmann::json& doc) {
    if (!doc.is_object()) throw ValidationError("knowledge base must be a JSON object");
    if (doc.value("schema_version", 0) != KnowledgeBase::kSchemaVersion) {
        throw ValidationError("unsupported knowledge base schema version");
    }
    KnowledgeBase kb;
    kb.catalog = Catalog::from_json(doc.at("catalog"));
    doc.at("clusters").get_to(kb.clusters);
    const auto& selections = doc.at("selections");
    for (const auto& cluster : kb.clusters) {
        TechniqueSelection s;
        s.cluster_id = cluster.cluster_id;
        if (selections.contains(cluster.cluster_id)) {
            selections.at(cluster.cluster_id).get_to(s.technique_ids);
        }
        kb.selections.push_back(std::move(s));
    }
    doc.at("provenance").get_to(kb.provenance);
    return kb;
}

inline void save_kb(const KnowledgeBase& kb, const std::filesystem::path& path) {
    write_json_file_atomic(path, kb_to_json(kb));
}

inline KnowledgeBase load_kb(const std::filesystem::path& path) {
    return kb_from_json(read_json_file(path));
}

// Standalone structural validator: cluster/selection bijection, constraint
// satisfaction against the embedded catalog, vector dim uniformity.
inline std::vector<std::string> validate_kb(const KnowledgeBase& kb) {
    std::vector<std::string> violations;
    if (kb.clusters.empty()) violations.push_back("knowledge base has no clusters");

    std::set<std::string> cluster_ids;
    for (const auto& c : kb.clusters) {
        if (c.cluster_id.empty()) violations.push_back("cluster with empty id");
        if (!cluster_ids.insert(c.cluster_id).second) {
            violations.push_back("duplicate cluster id '" + c.cluster_id + "'");
        }
        if (c.cluster_description.empty()) {
            violations.push_back("cluster '" + c.cluster_id + "' has empty description");
        }
        if (c.member_task_names.empty()) {
            violations.push_back("cluster '" + c.cluster_id + "' has no member tasks");
        }
        if (c.description_vector.empty()) {
            violations.push_back("cluster '" + c.cluster_id + "' has no description vector");
        } else if (c.description_vector.dim() != kb.clusters.front().description_vector.dim()) {
            violations.push_back("cluster '" + c.cluster_id + "' vector dim differs");
        }
    }

    std::set<std::string> selection_ids;
    for (const auto& s : kb.selections) {
        if (!selection_ids.insert(s.cluster_id).second) {
            violations.push_back("duplicate selection for cluster '" + s.cluster_id + "'");
        }
        if (!cluster_ids.count(s.cluster_id)) {
            violations.push_back("selection for unknown cluster '" + s.cluster_id + "'");
        }
        try {
            for (const auto& v : validate_selection(s, kb.catalog)) {
                violations.push_back("cluster '" + s.cluster_id + "': " + v);
            }
        } catch (const ValidationError& e) {
            violations.push_back("cluster '" + s.cluster_id + "': " + e.what());
        }
    }
    for (const auto& id : cluster_ids) {
        if (!selection_ids.count(id)) {
            violations.push_back("cluster '" + id + "' has no technique selection");
        }
    }
    return violations;
}

// --- input loading -----------------------------------------------------

inline std::vector<Task> load_tasks_jsonl(const std::filesystem::path& path) {
    JsonlLines lines = read_jsonl_file(path);
    if (lines.broken_tail) throw ValidationError("tasks file has a malformed line: " + path.string());
    std::vector<Task> tasks;
    std::set<std::string> names;
    for (const auto& line : lines.records) {
        Task task = line.get<Task>();
        if (task.name.empty()) throw ValidationError("task with empty name");
        if (task.description.empty()) throw ValidationError("task '" + task.name + "' has empty description");
        if (!names.insert(task.name).second) throw ValidationError("duplicate task name: " + task.name);
        tasks.push_back(std::move(task));
    }
    return tasks;
}

// --- build pipeline -----------------------------------------------------

struct KbBuildOptions {
    std::uint64_t seed = 0;
    int retry_cap = 3;
    std::string chat_model = "gemini-2.5-pro";
    std::string embedding_model = "gemini-embedding-exp-03-07";
    double chat_temperature = 0.0;
    int max_output_tokens = 8192;
    int k_min = 3;
    std::string checkpoint_path; // empty disables checkpoint/resume
    std::string labeling_instruction{instructions::kClusterLabeling};
    std::string mapping_instruction{instructions::kTechniqueMapping};
};

// Text representation fed to the embedding model: "name: description".
inline std::string task_embedding_text(const Task& task) {
    return task.name + ": " + task.description;
}

inline std::vector<std::pair<Task, EmbeddingVector>> vectorize_tasks(
    const std::vector<Task>& tasks, Provider& provider,
    const std::string& embedding_model = "gemini-embedding-exp-03-07") {
    if (tasks.size() < 4) {
        throw ValidationError("need at least 4 tasks to build a knowledge base, got " +
                              std::to_string(tasks.size()));
    }
    EmbeddingRequest request;
    request.model_name = embedding_model;
    for (const auto& task : tasks) request.texts.push_back(task_embedding_text(task));
    EmbeddingResponse response = provider.embed(request);
    if (response.vectors.size() != tasks.size()) {
        throw ProviderError(ProviderErrorKind::malformed, "embedding count mismatch");
    }
    std::vector<std::pair<Task, EmbeddingVector>> result;
    result.reserve(tasks.size());
    for (std::size_t i = 0; i < tasks.size(); ++i) {
        if (response.vectors[i].dim() != response.vectors[0].dim()) {
            throw ValidationError("embedding dim inconsistent across batch");
        }
        result.emplace_back(tasks[i], l2_normalize(response.vectors[i]));
    }
    return result;
}

inline ClusteringResult derive_clusters(const std::vector<EmbeddingVector>& task_vectors,
                                        std::uint64_t seed, int k_min = 3) {
    if (task_vectors.size() < 4) throw ValidationError("need at least 4 task vectors");
    const int k_max = static_cast<int>(task_vectors.size()) - 1;
    return select_k(task_vectors, k_min, k_max, seed);
}

inline const std::regex& cluster_slug_pattern() {
    static const std::regex pattern("^[a-z][a-z0-9_-]*$");
    return pattern;
}

inline std::string build_labeling_prompt(const std::string& instruction,
                                         const std::vector<Task>& member_tasks) {
    std::ostringstream prompt;
    prompt << instruction << "\nTasks:\n";
    for (const auto& task : member_tasks) {
        prompt << "- " << task.name << ": " << task.description << "\n";
    }
    return prompt.str();
}

// Asks the LLM to label one cluster from its member tasks. The reply must be
// a JSON object carrying a slug id and a non-empty description; invalid
// replies are retried up to the cap.
inline std::pair<std::string, std::string> label_cluster(const std::vector<Task>& member_tasks,
                                                         Provider& provider,
                                                         const KbBuildOptions& options = {}) {
    if (member_tasks.empty()) throw ValidationError("cannot label an empty cluster");
    ChatRequest request;
    request.model_name = options.chat_model;
    request.temperature = options.chat_temperature;
    request.max_output_tokens = options.max_output_tokens;
    request.request_tag = "label_cluster:" + member_tasks[0].name;
    request.prompt_text = build_labeling_prompt(options.labeling_instruction, member_tasks);

    std::string last_problem;
    for (int attempt = 0; attempt <= options.retry_cap; ++attempt) {
        if (attempt > 0) {
            request.prompt_text =
                build_labeling_prompt(options.labeling_instruction, member_tasks) +
                "\nYour previous reply was rejected (" + last_problem +
                "). Reply with exactly the JSON object described above.\n";
        }
        const ChatResponse response = provider.complete(request);
        const auto object = extract_first_json_object(response.text);
        if (!object) {
            last_problem = "no JSON object found";
            continue;
        }
        const std::string id = object->value("cluster_id", "");
        const std::string description = object->value("cluster_description", "");
        if (!std::regex_match(id, cluster_slug_pattern())) {
            last_problem = "cluster_id is not a lowercase slug";
            continue;
        }
        if (description.empty()) {
            last_problem = "cluster_description is empty";
            continue;
        }
        return {id, description};
    }
    throw ValidationError("cluster labeling failed after retries: " + last_problem);
}

inline std::vector<TaskCluster> embed_clusters(std::vector<TaskCluster> clusters,
                                               Provider& provider,
                                               const std::string& embedding_model) {
    EmbeddingRequest request;
    request.model_name = embedding_model;
    for (const auto& cluster : clusters) request.texts.push_back(cluster.cluster_description);
    EmbeddingResponse response = provider.embed(request);
    if (response.vectors.size() != clusters.size()) {
        throw ProviderError(ProviderErrorKind::malformed, "embedding count mismatch");
    }
    for (std::size_t i = 0; i < clusters.size(); ++i) {
        if (response.vectors[i].dim() != response.vectors[0].dim()) {
            throw ValidationError("embedding dim inconsistent across batch");
        }
        clusters[i].description_vector = l2_normalize(response.vectors[i]);
    }
    return clusters;
}

inline std::string build_mapping_prompt(const std::string& instruction, const TaskCluster& cluster,
                                        const Catalog& catalog) {
    std::ostringstream prompt;
    prompt << instruction << "\ncluster_id: " << cluster.cluster_id
           << "\ncluster_description: " << cluster.cluster_description
           << "\n\nAvailable techniques:\n";
    for (const auto& t : catalog.techniques()) {
        prompt << "- id=" << t.id << " category=" << to_string(t.category) << " name=" << t.name
               << "\n  description: " << t.description << "\n  application cases: "
               << t.application_cases << "\n";
    }
    return prompt.str();
}

// Deterministic selection used when the LLM keeps violating the constraints:
// the RoleAssignment technique plus the lexicographically first id of each
// required category, no optional technique.
inline TechniqueSelection fallback_selection(const std::string& cluster_id, const Catalog& catalog) {
    auto first_id = [](std::vector<const PromptingTechnique*> candidates) {
        std::string best;
        for (const auto* t : candidates) {
            if (best.empty() || t->id < best) best = t->id;
        }
        return best;
    };
    TechniqueSelection selection;
    selection.cluster_id = cluster_id;
    const std::string role = first_id(catalog.by_category(TechniqueCategory::RoleAssignment));
    const std::string emotional = first_id(catalog.by_category(TechniqueCategory::EmotionalStimulus));
    const std::string reasoning = first_id(catalog.by_category(TechniqueCategory::Reasoning));
    if (role.empty() || emotional.empty() || reasoning.empty()) {
        throw ValidationError("catalog lacks a technique in a required category");
    }
    selection.technique_ids = {role, emotional, reasoning};
    return selection;
}

struct MappingResult {
    TechniqueSelection selection;
    bool used_fallback = false;
    int attempts = 0;
};

// Asks the LLM for a constraint-satisfying technique selection. Violations
// are appended to the instruction and retried; after the cap the
// deterministic fallback is used so the pipeline always terminates.
inline MappingResult map_techniques(const TaskCluster& cluster, const Catalog& catalog,
                                    Provider& provider, const KbBuildOptions& options = {}) {
    ChatRequest request;
    request.model_name = options.chat_model;
    request.temperature = options.chat_temperature;
    request.max_output_tokens = options.max_output_tokens;
    request.request_tag = "map_techniques:" + cluster.cluster_id;
    const std::string base_prompt = build_mapping_prompt(options.mapping_instruction, cluster, catalog);
    request.prompt_text = base_prompt;

    MappingResult result;
    std::vector<std::string> violations;
    for (int attempt = 0; attempt <= options.retry_cap; ++attempt) {
        if (attempt > 0) {
            std::ostringstream retry_prompt;
            retry_prompt << base_prompt << "\nYour previous selection violated these constraints:\n";
            for (const auto& v : violations) retry_prompt << "- " << v << "\n";
            retry_prompt << "Reply again with a corrected JSON selection.\n";
            request.prompt_text = retry_prompt.str();
        }
        ++result.attempts;
        const ChatResponse response = provider.complete(request);
        const auto object = extract_first_json_object(response.text);
        if (!object || !object->contains("technique_ids") || !(*object)["technique_ids"].is_array()) {
            violations = {"reply was not a JSON object with a technique_ids array"};
            continue;
        }
        TechniqueSelection candidate;
        candidate.cluster_id = cluster.cluster_id;
        try {
            (*object)["technique_ids"].get_to(candidate.technique_ids);
            violations = validate_selection(candidate, catalog);
        } catch (const ValidationError& e) {
            violations = {e.what()};
            continue;
        }
        if (violations.empty()) {
            result.selection = std::move(candidate);
            return result;
        }
    }
    result.selection = fallback_selection(cluster.cluster_id, catalog);
    result.used_fallback = true;
    return result;
}

namespace detail {

inline std::string build_key(const std::vector<Task>& tasks, const Catalog& catalog,
                             const KbBuildOptions& options) {
    std::ostringstream material;
    for (const auto& task : tasks) material << task.name << '\x1f' << task.description << '\x1e';
    material << catalog.fingerprint() << '\x1e' << options.seed << '\x1e' << options.chat_model
             << '\x1e' << options.embedding_model << '\x1e' << options.k_min;
    char buffer[17];
    std::snprintf(buffer, sizeof(buffer), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(material.str())));
    return buffer;
}

class BuildCheckpoint {
public:
    BuildCheckpoint(std::string path, std::string key) : path_(std::move(path)), key_(std::move(key)) {
        if (path_.empty()) return;
        if (!std::filesystem::exists(path_)) return;
        nlohmann::json doc = read_json_file(path_);
        if (doc.value("key", "") == key_) state_ = std::move(doc);
    }

    bool has(const std::string& stage) const { return state_.contains(stage); }
    const nlohmann::json& get(const std::string& stage) const { return state_.at(stage); }

    void put(const std::string& stage, nlohmann::json value) {
        if (path_.empty()) return;
        state_["key"] = key_;
        state_[stage] = std::move(value);
        write_json_file_atomic(path_, state_);
    }

    void discard() {
        if (path_.empty()) return;
        std::error_code ec;
        std::filesystem::remove(path_, ec);
    }

private:
    std::string path_;
    std::string key_;
    nlohmann::json state_ = nlohmann::json::object();
};

} // namespace detail

// Full knowledge-base construction: vectorize tasks, pick K by silhouette,
// label and embed the clusters, map techniques under the category
// constraints. When a checkpoint path is configured, completed stages are
// persisted and a rerun resumes instead of repeating provider calls.
inline KnowledgeBase build_kb(const std::vector<Task>& tasks, const Catalog& catalog,
                              Provider& provider, const KbBuildOptions& options = {}) {
    std::set<std::string> names;
    for (const auto& task : tasks) {
        if (task.name.empty() || task.description.empty() || !names.insert(task.name).second) {
            throw ValidationError("tasks must have unique names and non-empty descriptions");
        }
    }

    detail::BuildCheckpoint checkpoint(options.checkpoint_path,
                                       detail::build_key(tasks, catalog, options));

    // Stage 1: task vectors.
    std::vector<EmbeddingVector> task_vectors;
    if (checkpoint.has("task_vectors")) {
        checkpoint.get("task_vectors").get_to(task_vectors);
    } else {
        for (auto& [task, vector] : vectorize_tasks(tasks, provider, options.embedding_model)) {
            task_vectors.push_back(std::move(vector));
        }
        checkpoint.put("task_vectors", task_vectors);
    }

    // Stage 2: clustering with silhouette-selected K.
    ClusteringResult clustering;
    if (checkpoint.has("clustering")) {
        checkpoint.get("clustering").get_to(clustering);
    } else {
        clustering = derive_clusters(task_vectors, options.seed, options.k_min);
        checkpoint.put("clustering", clustering);
    }

    std::vector<std::vector<Task>> members(static_cast<std::size_t>(clustering.k));
    for (std::size_t i = 0; i < tasks.size(); ++i) {
        members[static_cast<std::size_t>(clustering.assignments[i])].push_back(tasks[i]);
    }

    // Stage 3: LLM labels, de-duplicated by suffixing.
    std::vector<TaskCluster> clusters;
    nlohmann::json labels = checkpoint.has("labels") ? checkpoint.get("labels")
                                                     : nlohmann::json::array();
    std::set<std::string> used_ids;
    for (const auto& label : labels) used_ids.insert(label.at("cluster_id").get<std::string>());
    for (std::size_t c = labels.size(); c < members.size(); ++c) {
        auto [id, description] = label_cluster(members[c], provider, options);
        std::string unique_id = id;
        for (int suffix = 2; used_ids.count(unique_id); ++suffix) {
            unique_id = id + "-" + std::to_string(suffix);
        }
        used_ids.insert(unique_id);
        labels.push_back({{"cluster_id", unique_id}, {"cluster_description", description}});
        checkpoint.put("labels", labels);
    }
    for (std::size_t c = 0; c < members.size(); ++c) {
        TaskCluster cluster;
        cluster.cluster_id = labels[c].at("cluster_id").get<std::string>();
        cluster.cluster_description = labels[c].at("cluster_description").get<std::string>();
        for (const auto& task : members[c]) cluster.member_task_names.push_back(task.name);
        clusters.push_back(std::move(cluster));
    }

    // Stage 4: cluster description vectors.
    if (checkpoint.has("cluster_vectors")) {
        std::vector<EmbeddingVector> vectors;
        checkpoint.get("cluster_vectors").get_to(vectors);
        for (std::size_t c = 0; c < clusters.size(); ++c) clusters[c].description_vector = vectors[c];
    } else {
        clusters = embed_clusters(std::move(clusters), provider, options.embedding_model);
        std::vector<EmbeddingVector> vectors;
        for (const auto& cluster : clusters) vectors.push_back(cluster.description_vector);
        checkpoint.put("cluster_vectors", vectors);
    }

    // Stage 5: technique selections.
    KnowledgeBase kb;
    kb.catalog = catalog;
    kb.clusters = clusters;
    nlohmann::json selections = checkpoint.has("selections") ? checkpoint.get("selections")
                                                             : nlohmann::json::array();
    for (std::size_t c = selections.size(); c < clusters.size(); ++c) {
        MappingResult mapping = map_techniques(clusters[c], catalog, provider, options);
        selections.push_back({{"technique_ids", mapping.selection.technique_ids},
                              {"fallback", mapping.used_fallback}});
        checkpoint.put("selections", selections);
    }
    for (std::size_t c = 0; c < clusters.size(); ++c) {
        TechniqueSelection selection;
        selection.cluster_id = clusters[c].cluster_id;
        selections[c].at("technique_ids").get_to(selection.technique_ids);
        if (selections[c].value("fallback", false)) {
            kb.provenance.fallback_cluster_ids.push_back(selection.cluster_id);
        }
        kb.selections.push_back(std::move(selection));
    }

    kb.provenance.chat_model = options.chat_model;
    kb.provenance.embedding_model = options.embedding_model;
    kb.provenance.clustering_seed = options.seed;
    kb.provenance.silhouette = clustering.silhouette;
    kb.provenance.k = clustering.k;

    const std::vector<std::string> violations = validate_kb(kb);
    if (!violations.empty()) {
        std::ostringstream message;
        message << "built knowledge base failed validation:";
        for (const auto& v : violations) message << "\n- " << v;
        throw ValidationError(message.str());
    }
    checkpoint.discard();
    return kb;
}

} // namespace promptforge
