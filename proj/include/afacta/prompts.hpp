#pragma once

// Prompt rendering from versioned template assets.
//
// Templates are plain UTF-8 text with named placeholders: {sentence},
// {context}, {assistant_a}, {assistant_b}. Substitution is single-pass, so
// braces inside substituted text (or inside the step-2 JSON scaffold) are
// never re-expanded. The v1 assets are compiled into the library; a
// directory with the same layout can be loaded at runtime instead.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>

#include "afacta/core.hpp"

namespace afacta {

struct DecodeSettings {
    double temperature = 0.0;
    double top_p = 1.0;
    int max_tokens = 3072;
    std::optional<std::int64_t> seed;

    friend bool operator==(const DecodeSettings&, const DecodeSettings&) = default;
};

// Greedy settings shared by all pipeline steps.
DecodeSettings afacta_decode();
// Sampling settings for the self-consistency baseline.
DecodeSettings sc_cot_decode();

struct PromptBundle {
    std::string system;
    std::string user;
    DecodeSettings decode;
};

enum class ArgumentSide { Verifiable, Unverifiable };
std::string_view to_string(ArgumentSide side) noexcept;

// Replaces each {name} in tmpl whose name is a key of vars. Unknown
// placeholders and stray braces are copied through.
std::string render_template(std::string_view tmpl,
                            const std::map<std::string, std::string, std::less<>>& vars);

// One domain's set of named templates: system, step1, step2,
// argue_verifiable, argue_unverifiable, judge, sc_cot.
class TemplateSet {
public:
    static constexpr std::string_view kDefaultVersion = "v1";

    static TemplateSet builtin(Domain domain, std::string_view version = kDefaultVersion);
    // dir is a version root holding political_speech/ and twitter/.
    static TemplateSet load(const std::filesystem::path& dir, Domain domain);

    const std::string& get(std::string_view name) const;
    const std::string& version() const noexcept { return version_; }
    Domain domain() const noexcept { return domain_; }
    const std::map<std::string, std::string, std::less<>>& all() const noexcept { return templates_; }

private:
    TemplateSet(std::string version, Domain domain, std::map<std::string, std::string, std::less<>> t)
        : version_(std::move(version)), domain_(domain), templates_(std::move(t)) {}

    std::string version_;
    Domain domain_;
    std::map<std::string, std::string, std::less<>> templates_;
};

std::string_view domain_directory(Domain domain) noexcept;

class PromptEngine {
public:
    // Built-in v1 templates for both domains.
    PromptEngine();
    explicit PromptEngine(const std::filesystem::path& template_root);
    PromptEngine(TemplateSet political, TemplateSet social);

    PromptBundle render_step1(const SentenceRecord& rec) const;
    PromptBundle render_step2(const SentenceRecord& rec) const;
    PromptBundle render_step3_argument(const SentenceRecord& rec, ArgumentSide side) const;
    PromptBundle render_step3_judge(const SentenceRecord& rec, std::string_view assistant_a,
                                    std::string_view assistant_b) const;
    PromptBundle render_sc_cot(const SentenceRecord& rec) const;

    const std::string& version() const noexcept { return political_.version(); }
    // SHA-256 over every template of both domains; changes with any edit.
    std::string digest() const;

private:
    const TemplateSet& set_for(const SentenceRecord& rec) const;
    PromptBundle render(const SentenceRecord& rec, std::string_view name, DecodeSettings decode,
                        std::map<std::string, std::string, std::less<>> extra = {}) const;

    TemplateSet political_;
    TemplateSet social_;
};

// The text substituted for {context}: the neighbouring sentences, without
// the target, joined by a space. Missing neighbours contribute nothing.
std::string render_context(const SentenceRecord& rec);

}  // namespace afacta
