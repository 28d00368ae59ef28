#pragma once

#include <filesystem>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "promptforge/catalog.hpp"
#include "promptforge/errors.hpp"
#include "promptforge/instructions.hpp"
#include "promptforge/json_util.hpp"
#include "promptforge/kbforge.hpp"
#include "promptforge/provider.hpp"
#include "promptforge/vectors.hpp"

namespace promptforge {

// Placeholders every accepted template must contain exactly once.
inline constexpr std::string_view kInputPlaceholder = "{$INPUT}";
inline constexpr std::string_view kAnswerFormatPlaceholder = "{$FINAL_ANSWER_FORMAT}";

struct GenerationMetadata {
    std::string model;
    double temperature = 1.0;
    std::string timestamp;
};

inline void to_json(nlohmann::json& j, const GenerationMetadata& m) {
    j = nlohmann::json{{"model", m.model}, {"temperature", m.temperature}, {"timestamp", m.timestamp}};
}

inline void from_json(const nlohmann::json& j, GenerationMetadata& m) {
    j.at("model").get_to(m.model);
    j.at("temperature").get_to(m.temperature);
    j.at("timestamp").get_to(m.timestamp);
}

struct GeneratedTemplate {
    std::string template_text;
    std::string source_cluster_id;
    double similarity = 0.0;
    std::vector<std::string> technique_ids;
    GenerationMetadata generation_metadata;
};

inline void to_json(nlohmann::json& j, const GeneratedTemplate& t) {
    j = nlohmann::json{{"template_text", t.template_text},
                       {"source_cluster_id", t.source_cluster_id},
                       {"similarity", t.similarity},
                       {"technique_ids", t.technique_ids},
                       {"generation_metadata", t.generation_metadata}};
}

inline void from_json(const nlohmann::json& j, GeneratedTemplate& t) {
    j.at("template_text").get_to(t.template_text);
    j.at("source_cluster_id").get_to(t.source_cluster_id);
    j.at("similarity").get_to(t.similarity);
    j.at("technique_ids").get_to(t.technique_ids);
    j.at("generation_metadata").get_to(t.generation_metadata);
}

inline std::size_t count_occurrences(std::string_view text, std::string_view needle) {
    if (needle.empty()) return 0;
    std::size_t count = 0;
    for (std::size_t pos = text.find(needle); pos != std::string_view::npos;
         pos = text.find(needle, pos + needle.size())) {
        ++count;
    }
    return count;
}

// Empty result means the text satisfies the placeholder contract.
inline std::vector<std::string> validate_template_text(std::string_view text) {
    std::vector<std::string> violations;
    for (std::string_view placeholder : {kInputPlaceholder, kAnswerFormatPlaceholder}) {
        const std::size_t n = count_occurrences(text, placeholder);
        if (n != 1) {
            violations.push_back(std::string(placeholder) + " must appear exactly once, found " +
                                 std::to_string(n));
        }
    }
    return violations;
}

// Embeds the user description with the KB's embedding model and returns the
// index of the most similar cluster plus its cosine similarity. Ties go to
// the earlier cluster in KB order.
inline std::pair<std::size_t, double> match_cluster(const std::string& user_description,
                                                    const KnowledgeBase& kb, Provider& provider) {
    if (kb.clusters.empty()) throw ValidationError("knowledge base has no clusters");
    if (user_description.empty()) throw ValidationError("task description is empty");

    EmbeddingRequest request;
    request.model_name = kb.provenance.embedding_model;
    request.texts = {user_description};
    const EmbeddingResponse response = provider.embed(request);
    if (response.vectors.size() != 1) {
        throw ProviderError(ProviderErrorKind::malformed, "expected one embedding");
    }
    const EmbeddingVector user_vector = l2_normalize(response.vectors[0]);

    std::size_t best = 0;
    double best_similarity = -2.0;
    for (std::size_t i = 0; i < kb.clusters.size(); ++i) {
        const double s = cosine_similarity(user_vector, kb.clusters[i].description_vector);
        if (s > best_similarity) {
            best_similarity = s;
            best = i;
        }
    }
    return {best, best_similarity};
}

// Resolves the cluster's selected technique ids against the KB catalog,
// preserving selection order.
inline std::vector<PromptingTechnique> select_techniques(const TaskCluster& cluster,
                                                         const KnowledgeBase& kb) {
    const TechniqueSelection* selection = kb.find_selection(cluster.cluster_id);
    if (!selection) {
        throw ValidationError("no technique selection for cluster '" + cluster.cluster_id + "'");
    }
    std::vector<PromptingTechnique> techniques;
    for (const auto& id : selection->technique_ids) {
        const PromptingTechnique* technique = kb.catalog.find(id);
        if (!technique) throw ValidationError("technique id not in catalog: " + id);
        techniques.push_back(*technique);
    }
    return techniques;
}

struct GenerateOptions {
    std::string chat_model = "gemini-2.5-pro";
    double temperature = 1.0; // the generator's own sampling temperature
    int max_output_tokens = 8192;
    int retry_cap = 3;
    std::string instruction{instructions::kTemplateGeneration};
};

inline std::string build_generation_prompt(const std::string& instruction,
                                           const std::string& user_description,
                                           const std::vector<PromptingTechnique>& techniques) {
    std::ostringstream prompt;
    prompt << instruction << "\nTask description:\n" << user_description
           << "\n\nTechniques to apply:\n";
    for (const auto& t : techniques) {
        prompt << "- " << t.name << ": " << t.description;
        if (!t.application_cases.empty()) prompt << " (apply when: " << t.application_cases << ")";
        prompt << "\n";
    }
    return prompt.str();
}

// Asks the LLM for a template and enforces the placeholder contract,
// retrying invalid outputs up to the cap.
inline GeneratedTemplate generate_template(const std::string& user_description,
                                           const std::vector<PromptingTechnique>& techniques,
                                           Provider& provider, const GenerateOptions& options = {}) {
    if (techniques.empty()) throw ValidationError("technique list is empty");

    ChatRequest request;
    request.model_name = options.chat_model;
    request.temperature = options.temperature;
    request.max_output_tokens = options.max_output_tokens;
    request.request_tag = "generate_template";
    const std::string base_prompt =
        build_generation_prompt(options.instruction, user_description, techniques);
    request.prompt_text = base_prompt;

    std::vector<std::string> violations;
    for (int attempt = 0; attempt <= options.retry_cap; ++attempt) {
        if (attempt > 0) {
            std::ostringstream retry_prompt;
            retry_prompt << base_prompt << "\nYour previous template was rejected:\n";
            for (const auto& v : violations) retry_prompt << "- " << v << "\n";
            retry_prompt << "Produce the template again with both placeholders, each exactly once.\n";
            request.prompt_text = retry_prompt.str();
        }
        const ChatResponse response = provider.complete(request);
        violations = validate_template_text(response.text);
        if (violations.empty()) {
            GeneratedTemplate result;
            result.template_text = response.text;
            for (const auto& t : techniques) result.technique_ids.push_back(t.id);
            result.generation_metadata.model = options.chat_model;
            result.generation_metadata.temperature = options.temperature;
            result.generation_metadata.timestamp = provider.timestamp();
            return result;
        }
    }
    std::ostringstream message;
    message << "template generation failed after retries:";
    for (const auto& v : violations) message << "\n- " << v;
    throw ValidationError(message.str());
}

// The whole generation phase: match the description to a cluster, fetch its
// techniques, synthesize the template.
inline GeneratedTemplate generate_for_description(const std::string& user_description,
                                                  const KnowledgeBase& kb, Provider& provider,
                                                  const GenerateOptions& options = {}) {
    const auto [cluster_index, similarity] = match_cluster(user_description, kb, provider);
    const TaskCluster& cluster = kb.clusters[cluster_index];
    const std::vector<PromptingTechnique> techniques = select_techniques(cluster, kb);
    GeneratedTemplate result = generate_template(user_description, techniques, provider, options);
    result.source_cluster_id = cluster.cluster_id;
    result.similarity = similarity;
    return result;
}

// Single-pass literal substitution of both placeholders. Placeholder-shaped
// substrings arriving inside the problem text are inserted verbatim and
// never re-expanded.
inline std::string instantiate_template(const GeneratedTemplate& template_value,
                                        const std::string& problem_text,
                                        const std::string& answer_format_text) {
    const std::vector<std::string> violations = validate_template_text(template_value.template_text);
    if (!violations.empty()) throw ValidationError("template breaks placeholder contract: " + violations[0]);

    const std::string& text = template_value.template_text;
    struct Splice {
        std::size_t pos;
        std::size_t len;
        const std::string* replacement;
    };
    Splice splices[2] = {
        {text.find(kInputPlaceholder), kInputPlaceholder.size(), &problem_text},
        {text.find(kAnswerFormatPlaceholder), kAnswerFormatPlaceholder.size(), &answer_format_text},
    };
    if (splices[0].pos > splices[1].pos) std::swap(splices[0], splices[1]);

    std::string result;
    result.reserve(text.size() + problem_text.size() + answer_format_text.size());
    std::size_t cursor = 0;
    for (const auto& splice : splices) {
        result.append(text, cursor, splice.pos - cursor);
        result.append(*splice.replacement);
        cursor = splice.pos + splice.len;
    }
    result.append(text, cursor, std::string::npos);
    return result;
}

inline void save_template(const GeneratedTemplate& template_value, const std::filesystem::path& path) {
    write_json_file_atomic(path, nlohmann::json(template_value));
}

inline GeneratedTemplate load_template(const std::filesystem::path& path) {
    return read_json_file(path).get<GeneratedTemplate>();
}

} // namespace promptforge
