#pragma once

#include <string_view>

// Instruction texts sent to the LLM by the knowledge-base and generation
// pipelines. These are versioned project fixtures: the same texts ship under
// fixtures/instructions/ and a test keeps file and constant in sync, so the
// exact wording driving any run is auditable.

namespace promptforge::instructions {

inline constexpr std::string_view kVersion = "v1";

inline constexpr std::string_view kClusterLabeling =
    R"(You are given a list of tasks that were grouped together because their descriptions are semantically similar. Identify what the tasks have in common: the shared characteristics, the capabilities they demand, and the kind of reasoning they reward.

Reply with a single JSON object and nothing else:
{"cluster_id": "<short lowercase slug, letters/digits/underscores>", "cluster_description": "<a few sentences describing the shared characteristics and required capabilities>"}
)";

inline constexpr std::string_view kTechniqueMapping =
    R"(You are selecting prompting techniques for a cluster of related tasks. Below you will find the cluster's identifier and description, followed by the full list of available techniques (id, category, name, description, application cases).

Pick the techniques that best fit the cluster, subject to these category rules:
1. The RoleAssignment technique is always included.
2. Exactly one EmotionalStimulus technique.
3. Exactly one Reasoning technique.
4. Zero or one Others technique.
The selection therefore contains three or four distinct technique ids.

Reply with a single JSON object and nothing else:
{"technique_ids": ["<id>", "..."]}
)";

inline constexpr std::string_view kTemplateGeneration =
    R"(Write a reusable prompt template for the task described below, applying the prompting techniques listed after it. Weave every technique into the template: set the persona, add the motivational framing, and structure the reasoning the way the techniques prescribe.

The template must contain these two placeholders, each exactly once:
- {$INPUT} where the concrete problem statement will be inserted.
- {$FINAL_ANSWER_FORMAT} where the answer-format instructions will be inserted.

Reply with the template text only. Do not substitute the placeholders yourself and do not add commentary around the template.
)";

} // namespace promptforge::instructions
