#include "afacta/prompts.hpp"

#include <array>
#include <fstream>
#include <sstream>

#include "afacta/errors.hpp"
#include "afacta/hash.hpp"
#include "embedded_templates.hpp"

namespace afacta {

namespace {

constexpr std::array<std::string_view, 7> kTemplateNames = {
    "system", "step1", "step2", "argue_verifiable", "argue_unverifiable", "judge", "sc_cot"};

std::string strip_one_trailing_newline(std::string s) {
    if (!s.empty() && s.back() == '\n') s.pop_back();
    if (!s.empty() && s.back() == '\r') s.pop_back();
    return s;
}

}  // namespace

DecodeSettings afacta_decode() { return DecodeSettings{0.0, 1.0, 3072, 42}; }

DecodeSettings sc_cot_decode() { return DecodeSettings{0.7, 1.0, 3072, std::nullopt}; }

std::string_view to_string(ArgumentSide side) noexcept {
    return side == ArgumentSide::Verifiable ? "Verifiable" : "Unverifiable";
}

std::string render_template(std::string_view tmpl,
                            const std::map<std::string, std::string, std::less<>>& vars) {
    std::string out;
    out.reserve(tmpl.size() + 256);
    std::size_t i = 0;
    while (i < tmpl.size()) {
        if (tmpl[i] == '{') {
            auto close = tmpl.find('}', i + 1);
            if (close != std::string_view::npos) {
                auto name = tmpl.substr(i + 1, close - i - 1);
                if (auto it = vars.find(name); it != vars.end()) {
                    out += it->second;
                    i = close + 1;
                    continue;
                }
            }
        }
        out += tmpl[i++];
    }
    return out;
}

std::string_view domain_directory(Domain domain) noexcept {
    return domain == Domain::PoliticalSpeech ? "political_speech" : "twitter";
}

TemplateSet TemplateSet::builtin(Domain domain, std::string_view version) {
    std::map<std::string, std::string, std::less<>> t;
    const auto& assets = embedded_templates();
    for (auto name : kTemplateNames) {
        std::string key = std::string(version) + "/" + std::string(domain_directory(domain)) + "/" +
                          std::string(name);
        auto it = assets.find(key);
        if (it == assets.end()) throw ConfigError("no built-in template " + key);
        t.emplace(std::string(name), strip_one_trailing_newline(std::string(it->second)));
    }
    return TemplateSet(std::string(version), domain, std::move(t));
}

TemplateSet TemplateSet::load(const std::filesystem::path& dir, Domain domain) {
    std::map<std::string, std::string, std::less<>> t;
    for (auto name : kTemplateNames) {
        auto path = dir / domain_directory(domain) / (std::string(name) + ".txt");
        std::ifstream in(path, std::ios::binary);
        if (!in) throw ConfigError("cannot read template " + path.string());
        std::ostringstream ss;
        ss << in.rdbuf();
        t.emplace(std::string(name), strip_one_trailing_newline(ss.str()));
    }
    return TemplateSet(dir.filename().string(), domain, std::move(t));
}

const std::string& TemplateSet::get(std::string_view name) const {
    auto it = templates_.find(name);
    if (it == templates_.end()) throw ConfigError("template set has no '" + std::string(name) + "'");
    return it->second;
}

std::string render_context(const SentenceRecord& rec) {
    std::string ctx;
    if (rec.prev_text) ctx += *rec.prev_text;
    if (rec.next_text) {
        if (!ctx.empty()) ctx += ' ';
        ctx += *rec.next_text;
    }
    return ctx;
}

PromptEngine::PromptEngine()
    : PromptEngine(TemplateSet::builtin(Domain::PoliticalSpeech),
                   TemplateSet::builtin(Domain::SocialMedia)) {}

PromptEngine::PromptEngine(const std::filesystem::path& template_root)
    : PromptEngine(TemplateSet::load(template_root, Domain::PoliticalSpeech),
                   TemplateSet::load(template_root, Domain::SocialMedia)) {}

PromptEngine::PromptEngine(TemplateSet political, TemplateSet social)
    : political_(std::move(political)), social_(std::move(social)) {}

std::string PromptEngine::digest() const {
    std::string all;
    for (const auto* set : {&political_, &social_}) {
        for (const auto& [name, text] : set->all()) {
            all += std::string(domain_directory(set->domain())) + "/" + name + "\n" + text + "\n\x1e";
        }
    }
    return sha256_hex(all);
}

const TemplateSet& PromptEngine::set_for(const SentenceRecord& rec) const {
    return rec.domain == Domain::PoliticalSpeech ? political_ : social_;
}

PromptBundle PromptEngine::render(const SentenceRecord& rec, std::string_view name,
                                  DecodeSettings decode,
                                  std::map<std::string, std::string, std::less<>> extra) const {
    rec.validate();
    const auto& set = set_for(rec);
    extra.emplace("sentence", rec.text);
    // Social-media templates carry no {context} placeholder.
    extra.emplace("context", render_context(rec));
    return PromptBundle{set.get("system"), render_template(set.get(name), extra), decode};
}

PromptBundle PromptEngine::render_step1(const SentenceRecord& rec) const {
    return render(rec, "step1", afacta_decode());
}

PromptBundle PromptEngine::render_step2(const SentenceRecord& rec) const {
    return render(rec, "step2", afacta_decode());
}

PromptBundle PromptEngine::render_step3_argument(const SentenceRecord& rec,
                                                 ArgumentSide side) const {
    return render(rec, side == ArgumentSide::Verifiable ? "argue_verifiable" : "argue_unverifiable",
                  afacta_decode());
}

PromptBundle PromptEngine::render_step3_judge(const SentenceRecord& rec,
                                              std::string_view assistant_a,
                                              std::string_view assistant_b) const {
    return render(rec, "judge", afacta_decode(),
                  {{"assistant_a", std::string(assistant_a)},
                   {"assistant_b", std::string(assistant_b)}});
}

PromptBundle PromptEngine::render_sc_cot(const SentenceRecord& rec) const {
    return render(rec, "sc_cot", sc_cot_decode());
}

}  // namespace afacta
