#include <doctest.h>

#include <fstream>
#include <regex>

#include "afacta/errors.hpp"
#include "afacta/prompts.hpp"
#include "builders.hpp"
#include "oracles.hpp"

using namespace afacta;
namespace fs = std::filesystem;

namespace {

SentenceRecord speech_record() {
    auto r = build::sentence("s1", 1, "Unemployment fell to 4 percent.");
    r.prev_text = "Thank you all.";
    r.next_text = "We did it together.";
    return r;
}

// Placeholders left after rendering, ignoring JSON-looking braces.
std::vector<std::string> leftover_placeholders(const std::string& text) {
    std::vector<std::string> out;
    std::regex re(R"(\{([a-z_]+)\})");
    for (std::sregex_iterator it(text.begin(), text.end(), re), end; it != end; ++it) {
        out.push_back((*it)[1]);
    }
    return out;
}

}  // namespace

TEST_CASE("render_template substitutes known names once and leaves the rest") {
    std::map<std::string, std::string, std::less<>> vars{{"a", "{b}"}, {"b", "B"}};
    CHECK(render_template("x{a}y{b}z{c}", vars) == "x{b}yBz{c}");
    CHECK(render_template("{", vars) == "{");
    CHECK(render_template("{\n  \"K\": 1\n}", vars) == "{\n  \"K\": 1\n}");
}

TEST_CASE("every built-in template renders without stray placeholders") {
    PromptEngine engine;
    auto sp = speech_record();
    auto tw = sp;
    tw.domain = Domain::SocialMedia;
    for (const auto& rec : {sp, tw}) {
        std::vector<PromptBundle> bundles = {
            engine.render_step1(rec),
            engine.render_step2(rec),
            engine.render_step3_argument(rec, ArgumentSide::Verifiable),
            engine.render_step3_argument(rec, ArgumentSide::Unverifiable),
            engine.render_step3_judge(rec, "arg one", "arg two"),
            engine.render_sc_cot(rec),
        };
        for (const auto& b : bundles) {
            CHECK(leftover_placeholders(b.user).empty());
            CHECK(b.user.find(rec.text) != std::string::npos);
            CHECK_FALSE(b.system.empty());
        }
    }
}

TEST_CASE("political speech prompts carry the neighbouring sentences as context") {
    PromptEngine engine;
    auto rec = speech_record();
    CHECK(render_context(rec) == "Thank you all. We did it together.");
    auto u = engine.render_step1(rec).user;
    CHECK(u.find("\"...Thank you all. We did it together....\"") != std::string::npos);
    CHECK(u.find("political speech") != std::string::npos);

    rec.prev_text.reset();
    CHECK(render_context(rec) == "We did it together.");
    rec.next_text.reset();
    CHECK(render_context(rec).empty());
}

TEST_CASE("Twitter prompts name the domain and omit context") {
    PromptEngine engine;
    auto rec = speech_record();
    rec.domain = Domain::SocialMedia;
    for (const auto& u : {engine.render_step1(rec).user, engine.render_step2(rec).user,
                          engine.render_step3_judge(rec, "a", "b").user}) {
        CHECK(u.find("Twitter") != std::string::npos);
        CHECK(u.find("political speech") == std::string::npos);
        CHECK(u.find("Thank you all.") == std::string::npos);
    }
}

TEST_CASE("judge prompt places the arguments in the requested slots") {
    PromptEngine engine;
    auto rec = speech_record();
    auto u = engine.render_step3_judge(rec, "FIRST-ARG", "SECOND-ARG").user;
    auto a = u.find("Assistant A's View: \"FIRST-ARG\"");
    auto b = u.find("Assistant B's View: \"SECOND-ARG\"");
    REQUIRE(a != std::string::npos);
    REQUIRE(b != std::string::npos);
    CHECK(a < b);
    CHECK(u.find("Lean towards A") != std::string::npos);
}

TEST_CASE("sentence text containing braces is inserted literally") {
    PromptEngine engine;
    auto rec = speech_record();
    rec.text = "The {context} of {sentence} is {assistant_a}.";
    auto u = engine.render_step3_judge(rec, "x", "y").user;
    CHECK(u.find("\"The {context} of {sentence} is {assistant_a}.\"") != std::string::npos);
}

TEST_CASE("decode settings per prompt family") {
    PromptEngine engine;
    auto rec = speech_record();
    auto d = engine.render_step2(rec).decode;
    CHECK(d.temperature == 0.0);
    CHECK(d.top_p == 1.0);
    CHECK(d.max_tokens == 3072);
    CHECK(d.seed == 42);
    auto s = engine.render_sc_cot(rec).decode;
    CHECK(s.temperature == 0.7);
    CHECK_FALSE(s.seed.has_value());
}

TEST_CASE("step 2 keeps the JSON answer scaffold with single braces") {
    PromptEngine engine;
    auto u = engine.render_step2(speech_record()).user;
    CHECK(u.find("{\n    \"ANALYSIS\"") != std::string::npos);
    CHECK(u.find("{{") == std::string::npos);
    for (auto key : {"FACT_PART", "VERIFIABLE_REASON", "VERIFIABILITY", "CATEGORY"}) {
        CHECK(u.find(key) != std::string::npos);
    }
}

TEST_CASE("templates load from a directory and the digest tracks edits") {
    testing_support::TempDir tmp;
    auto root = tmp / "v9";
    fs::copy(testing_support::source_dir() / "templates" / "v1", root, fs::copy_options::recursive);

    PromptEngine builtin;
    PromptEngine loaded(root);
    CHECK(loaded.version() == "v9");
    CHECK(loaded.digest() == builtin.digest());
    CHECK(loaded.render_step2(speech_record()).user == builtin.render_step2(speech_record()).user);

    {
        std::ofstream out(root / "twitter" / "step1.txt", std::ios::app);
        out << "edited\n";
    }
    CHECK(PromptEngine(root).digest() != builtin.digest());

    fs::remove(root / "political_speech" / "judge.txt");
    CHECK_THROWS_AS(PromptEngine{root}, ConfigError);
}

TEST_CASE("blank records are rejected before rendering") {
    PromptEngine engine;
    auto rec = speech_record();
    rec.text = "";
    CHECK_THROWS_AS(engine.render_step1(rec), ValidationError);
}
