#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdio>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "promptforge/errors.hpp"
#include "promptforge/json_util.hpp"
#include "promptforge/rng.hpp"

namespace promptforge {

// Closed set of technique categories used by the selection constraints.
enum class TechniqueCategory {
    RoleAssignment,
    EmotionalStimulus,
    Reasoning,
    Others,
};

inline const char* to_string(TechniqueCategory c) {
    switch (c) {
    case TechniqueCategory::RoleAssignment: return "RoleAssignment";
    case TechniqueCategory::EmotionalStimulus: return "EmotionalStimulus";
    case TechniqueCategory::Reasoning: return "Reasoning";
    case TechniqueCategory::Others: return "Others";
    }
    return "unknown";
}

inline TechniqueCategory parse_category(const std::string& text) {
    if (text == "RoleAssignment") return TechniqueCategory::RoleAssignment;
    if (text == "EmotionalStimulus") return TechniqueCategory::EmotionalStimulus;
    if (text == "Reasoning") return TechniqueCategory::Reasoning;
    if (text == "Others") return TechniqueCategory::Others;
    throw ValidationError("unknown technique category: " + text);
}

struct PromptingTechnique {
    std::string id;
    std::string name;
    TechniqueCategory category = TechniqueCategory::Others;
    std::string description;
    std::string application_cases;
};

inline void to_json(nlohmann::json& j, const PromptingTechnique& t) {
    j = nlohmann::json{{"id", t.id},
                       {"name", t.name},
                       {"category", to_string(t.category)},
                       {"description", t.description},
                       {"application_cases", t.application_cases}};
}

inline void from_json(const nlohmann::json& j, PromptingTechnique& t) {
    j.at("id").get_to(t.id);
    j.at("name").get_to(t.name);
    t.category = parse_category(j.at("category").get<std::string>());
    j.at("description").get_to(t.description);
    t.application_cases = j.value("application_cases", "");
}

// Immutable technique catalog, loaded from a JSON array of technique objects.
class Catalog {
public:
    Catalog() = default;

    static Catalog from_json(const nlohmann::json& doc) {
        if (!doc.is_array()) throw ValidationError("catalog document must be a JSON array");
        if (doc.empty()) throw ValidationError("catalog is empty");
        Catalog catalog;
        for (const auto& entry : doc) {
            PromptingTechnique technique = entry.get<PromptingTechnique>();
            if (technique.id.empty()) throw ValidationError("technique with empty id");
            if (technique.description.empty()) {
                throw ValidationError("technique '" + technique.id + "' has empty description");
            }
            if (catalog.index_.count(technique.id)) {
                throw ValidationError("duplicate technique id: " + technique.id);
            }
            catalog.index_[technique.id] = catalog.techniques_.size();
            catalog.techniques_.push_back(std::move(technique));
        }
        return catalog;
    }

    static Catalog load_file(const std::filesystem::path& path) {
        return from_json(read_json_file(path));
    }

    const std::vector<PromptingTechnique>& techniques() const { return techniques_; }

    const PromptingTechnique* find(const std::string& id) const {
        auto it = index_.find(id);
        return it == index_.end() ? nullptr : &techniques_[it->second];
    }

    std::vector<const PromptingTechnique*> by_category(TechniqueCategory category) const {
        std::vector<const PromptingTechnique*> result;
        for (const auto& t : techniques_) {
            if (t.category == category) result.push_back(&t);
        }
        return result;
    }

    std::size_t count(TechniqueCategory category) const { return by_category(category).size(); }

    nlohmann::json to_json_doc() const { return nlohmann::json(techniques_); }

    // Stable identity of the catalog contents, recorded in KB provenance.
    std::string fingerprint() const {
        char buffer[17];
        std::snprintf(buffer, sizeof(buffer), "%016llx",
                      static_cast<unsigned long long>(fnv1a64(to_json_doc().dump())));
        return buffer;
    }

private:
    std::vector<PromptingTechnique> techniques_;
    std::unordered_map<std::string, std::size_t> index_;
};

// A cluster's chosen techniques; must satisfy the four category constraints.
struct TechniqueSelection {
    std::string cluster_id;
    std::vector<std::string> technique_ids;
};

// Checks a selection against the category constraints. Returns one entry per
// violated constraint; an empty list means the selection is valid. Ids that
// do not resolve in the catalog are an error, not a violation.
inline std::vector<std::string> validate_selection(const TechniqueSelection& selection,
                                                   const Catalog& catalog) {
    std::vector<std::string> violations;
    std::vector<std::string> seen;
    std::size_t role = 0, emotional = 0, reasoning = 0, others = 0;
    for (const auto& id : selection.technique_ids) {
        const PromptingTechnique* technique = catalog.find(id);
        if (!technique) throw ValidationError("technique id not in catalog: " + id);
        if (std::find(seen.begin(), seen.end(), id) != seen.end()) {
            violations.push_back("duplicate technique id '" + id + "'");
            continue;
        }
        seen.push_back(id);
        switch (technique->category) {
        case TechniqueCategory::RoleAssignment: ++role; break;
        case TechniqueCategory::EmotionalStimulus: ++emotional; break;
        case TechniqueCategory::Reasoning: ++reasoning; break;
        case TechniqueCategory::Others: ++others; break;
        }
    }
    if (role == 0) {
        violations.push_back("missing the RoleAssignment technique (must always be included)");
    } else if (role > 1) {
        violations.push_back("more than one RoleAssignment technique");
    }
    if (emotional != 1) {
        violations.push_back("exactly one EmotionalStimulus technique required, got " +
                             std::to_string(emotional));
    }
    if (reasoning != 1) {
        violations.push_back("exactly one Reasoning technique required, got " +
                             std::to_string(reasoning));
    }
    if (others > 1) {
        violations.push_back("at most one Others technique allowed, got " + std::to_string(others));
    }
    if (seen.size() < 3 || seen.size() > 4) {
        violations.push_back("selection size must be 3 or 4, got " + std::to_string(seen.size()));
    }
    return violations;
}

inline bool selection_ok(const TechniqueSelection& selection, const Catalog& catalog) {
    return validate_selection(selection, catalog).empty();
}

} // namespace promptforge
