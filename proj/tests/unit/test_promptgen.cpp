#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "promptforge/evalharness.hpp"
#include "promptforge/mock_provider.hpp"
#include "promptforge/promptgen.hpp"
#include "support/test_util.hpp"

using namespace promptforge;

namespace {

KnowledgeBase staged_kb() {
    KnowledgeBase kb;
    kb.catalog = Catalog::load_file(test_util::fixtures_dir() / "technique_catalog.json");
    const char* ids[] = {"alpha", "beta", "gamma"};
    for (int i = 0; i < 3; ++i) {
        TaskCluster cluster;
        cluster.cluster_id = ids[i];
        cluster.cluster_description = std::string("cluster ") + ids[i];
        cluster.member_task_names = {std::string("task_") + ids[i]};
        std::vector<double> v(3, 0.0);
        v[static_cast<std::size_t>(i)] = 1.0;
        cluster.description_vector = EmbeddingVector(v);
        kb.clusters.push_back(std::move(cluster));

        TechniqueSelection selection;
        selection.cluster_id = ids[i];
        selection.technique_ids = {"role_playing", "stress_prompting", "plan_and_solve",
                                   "scratchpad"};
        kb.selections.push_back(std::move(selection));
    }
    kb.provenance.embedding_model = "mock-embed";
    kb.provenance.k = 3;
    return kb;
}

} // namespace

TEST_CASE("match_cluster finds the staged argmax") {
    KnowledgeBase kb = staged_kb();
    MockProvider provider(1);

    SECTION("exact self-match") {
        provider.stage_embedding("find beta", EmbeddingVector({0.0, 1.0, 0.0}));
        const auto [index, similarity] = match_cluster("find beta", kb, provider);
        CHECK(kb.clusters[index].cluster_id == "beta");
        CHECK(similarity == Catch::Approx(1.0).margin(1e-9));
    }

    SECTION("orthogonal to all but one") {
        provider.stage_embedding("find alpha", EmbeddingVector({0.9, 0.0, 0.0}));
        const auto [index, similarity] = match_cluster("find alpha", kb, provider);
        CHECK(kb.clusters[index].cluster_id == "alpha");
        CHECK(similarity == Catch::Approx(1.0).margin(1e-9)); // normalization removes magnitude
    }

    SECTION("known angles agree with exhaustive comparison") {
        const EmbeddingVector user({0.2, 0.5, 0.6});
        provider.stage_embedding("angled", user);
        const auto [index, similarity] = match_cluster("angled", kb, provider);

        std::size_t best = 0;
        double best_sim = -2.0;
        for (std::size_t i = 0; i < kb.clusters.size(); ++i) {
            const double s = cosine_similarity(user, kb.clusters[i].description_vector);
            if (s > best_sim) {
                best_sim = s;
                best = i;
            }
        }
        CHECK(index == best);
        CHECK(similarity == Catch::Approx(best_sim).margin(1e-9));
        CHECK(kb.clusters[index].cluster_id == "gamma");
    }

    SECTION("empty inputs are rejected") {
        CHECK_THROWS_AS(match_cluster("", kb, provider), ValidationError);
        KnowledgeBase empty;
        CHECK_THROWS_AS(match_cluster("x", empty, provider), ValidationError);
    }
}

TEST_CASE("ties break toward the earlier cluster in KB order") {
    KnowledgeBase kb = staged_kb();
    // make beta and gamma identical so a matching vector ties
    kb.clusters[2].description_vector = kb.clusters[1].description_vector;
    MockProvider provider(1);
    provider.stage_embedding("tied", EmbeddingVector({0.0, 1.0, 0.0}));
    const auto [index, similarity] = match_cluster("tied", kb, provider);
    CHECK(index == 1);
}

TEST_CASE("select_techniques resolves ids in order") {
    const KnowledgeBase kb = staged_kb();
    const auto techniques = select_techniques(kb.clusters[0], kb);
    REQUIRE(techniques.size() == 4);
    CHECK(techniques[0].id == "role_playing");
    CHECK(techniques[1].id == "stress_prompting");
    CHECK(techniques[2].id == "plan_and_solve");
    CHECK(techniques[3].id == "scratchpad");

    TaskCluster ghost;
    ghost.cluster_id = "missing";
    CHECK_THROWS_AS(select_techniques(ghost, kb), ValidationError);
}

TEST_CASE("generate_template enforces the placeholder contract") {
    const KnowledgeBase kb = staged_kb();
    const auto techniques = select_techniques(kb.clusters[0], kb);

    SECTION("mock default output is accepted") {
        MockProvider provider(2);
        const GeneratedTemplate result = generate_template("sort lists", techniques, provider);
        CHECK(count_occurrences(result.template_text, kInputPlaceholder) == 1);
        CHECK(count_occurrences(result.template_text, kAnswerFormatPlaceholder) == 1);
        CHECK(result.technique_ids.size() == 4);
        CHECK(result.generation_metadata.temperature == 1.0);
        CHECK(result.generation_metadata.timestamp == "1970-01-01T00:00:00Z");
    }

    SECTION("missing placeholder is retried, persistent failure errors") {
        MockProvider provider(2);
        MockRule bad;
        bad.tag = "generate_template";
        bad.response = "A template with only {$INPUT}";
        provider.add_rule(bad);
        CHECK_THROWS_AS(generate_template("sort lists", techniques, provider), ValidationError);
        CHECK(provider.chat_calls() == 4); // initial + 3 retries
    }

    SECTION("doubled placeholder is rejected then corrected") {
        MockProvider provider(2);
        MockRule corrected;
        corrected.pattern = "previous template was rejected";
        corrected.response = "fixed {$INPUT} then {$FINAL_ANSWER_FORMAT}";
        provider.add_rule(corrected);
        MockRule doubled;
        doubled.tag = "generate_template";
        doubled.response = "{$INPUT} {$INPUT} {$FINAL_ANSWER_FORMAT}";
        provider.add_rule(doubled);

        const GeneratedTemplate result = generate_template("sort lists", techniques, provider);
        CHECK(result.template_text == "fixed {$INPUT} then {$FINAL_ANSWER_FORMAT}");
        CHECK(provider.chat_calls() == 2);
    }

    SECTION("empty technique list is a precondition error") {
        MockProvider provider(2);
        CHECK_THROWS_AS(generate_template("x", {}, provider), ValidationError);
    }
}

TEST_CASE("generate_for_description stitches match, selection and generation") {
    const KnowledgeBase kb = staged_kb();
    MockProvider provider(3);
    provider.stage_embedding("solve logic puzzles", EmbeddingVector({0.0, 0.0, 1.0}));
    const GeneratedTemplate result = generate_for_description("solve logic puzzles", kb, provider);
    CHECK(result.source_cluster_id == "gamma");
    CHECK(result.similarity == Catch::Approx(1.0).margin(1e-9));
    CHECK(validate_template_text(result.template_text).empty());
}

TEST_CASE("instantiate_template performs single-pass literal substitution") {
    GeneratedTemplate t;
    t.template_text = "Q: {$INPUT}\n{$FINAL_ANSWER_FORMAT}";

    CHECK(instantiate_template(t, "2+2?", "Answer with a number.") ==
          "Q: 2+2?\nAnswer with a number.");

    // placeholder-shaped problem text is inserted verbatim, never re-expanded
    const std::string tricky = instantiate_template(t, "literal {$INPUT} inside", "fmt");
    CHECK(tricky == "Q: literal {$INPUT} inside\nfmt");

    // the shipped answer-format instruction embeds verbatim
    const std::string full = instantiate_template(t, "2+2?", std::string(kFinalAnswerFormat));
    CHECK(full.find(kFinalAnswerFormat) != std::string::npos);
    CHECK(full.find(kInputPlaceholder) == std::string::npos);
    CHECK(full.find(kAnswerFormatPlaceholder) == std::string::npos);
}

TEST_CASE("instantiation works with placeholders in either order") {
    GeneratedTemplate t;
    t.template_text = "{$FINAL_ANSWER_FORMAT} then {$INPUT} end";
    CHECK(instantiate_template(t, "problem", "format") == "format then problem end");
}

TEST_CASE("instantiate_template rejects contract-breaking templates") {
    GeneratedTemplate t;
    t.template_text = "only {$INPUT} here";
    CHECK_THROWS_AS(instantiate_template(t, "p", "f"), ValidationError);
}

TEST_CASE("templates round-trip through JSON files") {
    GeneratedTemplate t;
    t.template_text = "T {$INPUT} / {$FINAL_ANSWER_FORMAT}";
    t.source_cluster_id = "alpha";
    t.similarity = 0.875;
    t.technique_ids = {"role_playing", "cot"};
    t.generation_metadata = {"model-x", 1.0, "1970-01-01T00:00:00Z"};

    test_util::TempDir dir;
    save_template(t, dir.file("template.json"));
    const GeneratedTemplate loaded = load_template(dir.file("template.json"));
    CHECK(nlohmann::json(loaded) == nlohmann::json(t));
}

TEST_CASE("shipped template fixtures satisfy the placeholder contract") {
    const std::string passthrough =
        read_text_file(test_util::fixtures_dir() / "templates" / "passthrough.txt");
    CHECK(validate_template_text(passthrough).empty());

    const std::string example = read_text_file(test_util::fixtures_dir() / "templates" /
                                               "structured_reasoning_example.txt");
    CHECK(validate_template_text(example).empty());
}
