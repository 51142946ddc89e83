#include "afacta/parser.hpp"

#include <algorithm>
#include <cctype>
#include <optional>
#include <regex>
#include <set>
#include <vector>

#include <json.hpp>

#include "afacta/errors.hpp"

namespace afacta {

using nlohmann::json;

std::string_view to_string(Confidence c) noexcept {
    switch (c) {
        case Confidence::Exact: return "Exact";
        case Confidence::Normalized: return "Normalized";
        case Confidence::Extracted: return "Extracted";
    }
    return "?";
}

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
bool is_alpha(char c) { return std::isalpha(static_cast<unsigned char>(c)) != 0; }

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
    while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
    return s;
}

// Quotes, asterisks and other decoration around a bare answer.
bool is_decoration(char c) {
    return is_space(c) || (std::ispunct(static_cast<unsigned char>(c)) != 0);
}

std::string_view strip_decoration(std::string_view s) {
    while (!s.empty() && is_decoration(s.front())) s.remove_prefix(1);
    while (!s.empty() && is_decoration(s.back())) s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> words(std::string_view s) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && !is_alpha(s[i])) ++i;
        std::size_t start = i;
        while (i < s.size() && is_alpha(s[i])) ++i;
        if (i > start) out.push_back(s.substr(start, i - start));
    }
    return out;
}

[[noreturn]] void fail(const std::string& why, std::string_view raw) {
    throw ParseError(why, std::string(raw));
}

}  // namespace

ParseOutcome parse_yes_no(std::string_view raw) {
    auto body = trim(raw);
    if (body.empty()) fail("empty reply", raw);

    auto core = strip_decoration(body);
    auto toks = words(core);
    if (!toks.empty()) {
        auto first = lower(toks.front());
        if (first == "yes" || first == "no") {
            ParseOutcome out{first == "yes" ? BinaryLabel::FactualClaim : BinaryLabel::NonClaim,
                             Confidence::Extracted, std::string(raw)};
            bool bare = toks.size() == 1 && core.size() == toks.front().size();
            if (bare) {
                bool canonical_case = toks.front() == "Yes" || toks.front() == "No";
                // Leading decoration (quotes) counts as normalization too.
                bool leading_clean = body.front() == core.front();
                out.confidence = (canonical_case && leading_clean) ? Confidence::Exact
                                                                   : Confidence::Normalized;
            }
            return out;
        }
    }

    bool saw_yes = false;
    bool saw_no = false;
    for (auto w : toks) {
        auto lw = lower(w);
        saw_yes = saw_yes || lw == "yes";
        saw_no = saw_no || lw == "no";
    }
    if (saw_yes == saw_no) {
        fail(saw_yes ? "reply contains both yes and no" : "reply contains neither yes nor no", raw);
    }
    return ParseOutcome{saw_yes ? BinaryLabel::FactualClaim : BinaryLabel::NonClaim,
                        Confidence::Extracted, std::string(raw)};
}

namespace {

// End index (inclusive) of the object opening at raw[open], or npos.
std::size_t balanced_end(std::string_view raw, std::size_t open) {
    int depth = 0;
    bool in_string = false;
    bool escaped = false;
    for (std::size_t i = open; i < raw.size(); ++i) {
        char c = raw[i];
        if (in_string) {
            if (escaped) {
                escaped = false;
            } else if (c == '\\') {
                escaped = true;
            } else if (c == '"') {
                in_string = false;
            }
            continue;
        }
        if (c == '"') {
            in_string = true;
        } else if (c == '{') {
            ++depth;
        } else if (c == '}') {
            if (--depth == 0) return i;
        }
    }
    return std::string_view::npos;
}

std::optional<json> first_json_object(std::string_view raw) {
    for (std::size_t pos = raw.find('{'); pos != std::string_view::npos;
         pos = raw.find('{', pos + 1)) {
        auto end = balanced_end(raw, pos);
        if (end == std::string_view::npos) continue;
        json j = json::parse(raw.substr(pos, end - pos + 1), nullptr, false);
        if (!j.is_discarded() && j.is_object()) return j;
    }
    return std::nullopt;
}

const json* find_key(const json& obj, std::string_view key) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        std::string k = it.key();
        std::transform(k.begin(), k.end(), k.begin(),
                       [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
        if (trim(k) == key) return &it.value();
    }
    return nullptr;
}

std::string text_field(const json& obj, std::string_view key, std::string_view raw) {
    const json* v = find_key(obj, key);
    if (!v) fail("fact-extraction reply is missing key " + std::string(key), raw);
    return v->is_string() ? v->get<std::string>() : v->dump();
}

}  // namespace

FactExtractionRecord parse_fact_extraction(std::string_view raw) {
    if (trim(raw).empty()) fail("empty reply", raw);
    auto obj = first_json_object(raw);
    if (!obj) fail("no balanced JSON object in fact-extraction reply", raw);

    FactExtractionRecord rec;
    rec.analysis = text_field(*obj, "ANALYSIS", raw);
    rec.fact_part = text_field(*obj, "FACT_PART", raw);
    rec.verifiable_reason = text_field(*obj, "VERIFIABLE_REASON", raw);

    const json* verif = find_key(*obj, "VERIFIABILITY");
    if (!verif) fail("fact-extraction reply is missing key VERIFIABILITY", raw);
    if (verif->is_boolean()) {
        rec.verifiability = verif->get<bool>();
    } else if (verif->is_string()) {
        auto v = lower(trim(verif->get<std::string>()));
        if (v == "true") {
            rec.verifiability = true;
        } else if (v == "false") {
            rec.verifiability = false;
        } else {
            fail("VERIFIABILITY is not a boolean: " + v, raw);
        }
    } else {
        fail("VERIFIABILITY is not a boolean", raw);
    }

    const json* cat = find_key(*obj, "CATEGORY");
    if (!cat) fail("fact-extraction reply is missing key CATEGORY", raw);
    if (!cat->is_string()) fail("CATEGORY is not a string", raw);
    std::string c(trim(cat->get<std::string>()));
    std::transform(c.begin(), c.end(), c.begin(),
                   [](unsigned char ch) { return static_cast<char>(std::toupper(ch)); });
    if (c.size() != 2 || c[0] != 'C' || c[1] < '0' || c[1] > '5') {
        fail("CATEGORY must be C0..C5, got '" + c + "'", raw);
    }
    rec.category = static_cast<Category>(c[1] - '0');
    return rec;
}

ParseOutcome parse_judge(std::string_view raw, ArgumentSide a_side) {
    auto body = trim(raw);
    if (body.empty()) fail("empty reply", raw);

    static const std::regex lean(R"(\bleans?\s+towards?\s+(?:assistant\s+)?["'*]?([ab])\b)",
                                 std::regex::icase);
    std::set<char> sides;
    std::string text(body);
    for (std::sregex_iterator it(text.begin(), text.end(), lean), end; it != end; ++it) {
        sides.insert(static_cast<char>(std::toupper(static_cast<unsigned char>((*it)[1].str()[0]))));
    }
    if (sides.size() != 1) {
        fail(sides.empty() ? "reply names no leaning" : "reply leans towards both A and B", raw);
    }
    bool leans_a = *sides.begin() == 'A';
    bool a_is_verifiable = a_side == ArgumentSide::Verifiable;
    BinaryLabel stance =
        (leans_a == a_is_verifiable) ? BinaryLabel::FactualClaim : BinaryLabel::NonClaim;

    auto core = body;
    while (!core.empty() && is_decoration(core.back())) core.remove_suffix(1);
    Confidence conf = Confidence::Extracted;
    if (core == "Lean towards A" || core == "Lean towards B") {
        conf = Confidence::Exact;
    } else {
        auto bare = strip_decoration(core);
        auto lb = lower(bare);
        if (lb == "lean towards a" || lb == "lean towards b") conf = Confidence::Normalized;
    }
    return ParseOutcome{stance, conf, std::string(raw)};
}

ParseOutcome parse_sc_cot(std::string_view raw) {
    if (trim(raw).empty()) fail("empty reply", raw);
    auto lowered = lower(raw);
    static constexpr std::string_view marker = "[answer]:";
    auto pos = lowered.rfind(marker);
    if (pos == std::string::npos) return parse_yes_no(raw);

    auto tail = raw.substr(pos + marker.size());
    ParseOutcome inner;
    try {
        inner = parse_yes_no(tail);
    } catch (const ParseError&) {
        fail("no yes/no after the [Answer]: marker", raw);
    }
    return ParseOutcome{inner.stance, inner.confidence, std::string(raw)};
}

}  // namespace afacta
