// Writes the bundled replay fixture: corpus.jsonl and cache.jsonl.
//
//   make_fixture <out_dir>
//
// Records 0-15 enumerate every stance pattern over (direct, fact extraction,
// judge order A, judge order B). The rest exercise unparseable replies (with
// re-ask replies recorded), a category conflict, prose-wrapped answers and
// the Twitter templates.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "afacta/dataset.hpp"
#include "afacta/gateway.hpp"
#include "afacta/pipeline.hpp"
#include "afacta/prompts.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace afacta;

namespace {

constexpr const char* kTimestamp = "2024-01-15T12:00:00Z";
constexpr const char* kModel = "gpt-4-0613";

struct Row {
    std::string corpus;
    std::string text;
    bool gold;
    std::string expert1;  // "A", "B/A", "B/B", "C"
    std::string expert2;
    std::string direct;
    std::string fact;
    std::string judge_a;
    std::string judge_b;
    // Replies to the first re-ask, by tag.
    std::map<std::string, std::string> reask{};
};

std::string fact_json(bool verifiable, const std::string& category, const std::string& fact_part) {
    json j{{"ANALYSIS", verifiable ? "The sentence reports something that happened or exists."
                                   : "The sentence expresses a view or intention."},
           {"FACT_PART", fact_part},
           {"VERIFIABLE_REASON", verifiable ? "Records or reporting could confirm it."
                                            : "Nothing in it could be checked against records."},
           {"VERIFIABILITY", verifiable},
           {"CATEGORY", category}};
    return j.dump(2);
}

std::string fact_yes(const std::string& part) { return fact_json(true, "C1", part); }
std::string fact_no() { return fact_json(false, "C0", "none"); }

// Judge reply leaning to the slot that holds the argument for `factual`.
std::string lean(bool factual, bool order_a) {
    bool slot_a = factual == order_a;
    return slot_a ? "Lean towards A." : "Lean towards B.";
}

std::vector<std::string> kSpeechA = {
    "Good evening, and thank you all for being here tonight.",
    "Last year our state added forty thousand manufacturing jobs.",
    "I believe we can build a fairer economy for every family.",
    "The bridge on Route 9 was closed for eleven months in 2019.",
    "We will never stop fighting for the people of this valley.",
    "My opponent voted against the school funding bill three times.",
    "Some people say the old ways are best, and maybe they are right.",
    "Unemployment in the county fell from 7 percent to 4 percent.",
    "Our children deserve schools that prepare them for the future.",
    "The new clinic opened in March and has treated two thousand patients.",
    "Frankly, the other side has run out of ideas.",
    "Taxes on small businesses are too high and everyone knows it.",
};

std::vector<std::string> kSpeechB = {
    "The federal deficit reached its highest level in a decade last spring.",
    "Together we can make this country strong again.",
    "Wages for nurses in this state rose by twelve percent since 2020.",
    "Is that really the best we can do for our veterans?",
    "The governor signed the water rights compact in June.",
    "A lot of folks tell me they feel forgotten.",
    "Three of the five largest employers here moved their headquarters overseas.",
    "Crime has gone up in every city that adopted that plan.",
    "The port handled more cargo in 2022 than in any year before.",
    "Since the plant reopened, the town has added two hundred households.",
};

std::vector<std::string> kTweets = {
    "City council approved a $3M budget for bike lanes on Tuesday.",
    "Can't believe how beautiful the sunset is tonight!!",
    "Heard the mayor might be thinking about running again, who knows.",
};

std::vector<Row> build_rows() {
    std::vector<Row> rows;
    std::vector<std::string> texts = kSpeechA;
    texts.insert(texts.end(), kSpeechB.begin(), kSpeechB.begin() + 4);

    // Varied surface forms for the direct answer.
    const std::vector<std::string> yes_forms = {"Yes", "Yes.", "yes", "\"Yes\""};
    const std::vector<std::string> no_forms = {"No", "No.", "no", "\"No\""};
    // Gold and expert answers per pattern index.
    const std::vector<bool> gold = {false, true, false, true,  false, true, false, true,
                                    false, true, false, false, true, false, true, false};
    for (int k = 0; k < 16; ++k) {
        const bool d = k & 8, f = k & 4, a = k & 2, b = k & 1;
        Row r;
        r.corpus = k < 12 ? "speech_a" : "speech_b";
        r.text = texts[static_cast<std::size_t>(k)];
        r.gold = gold[static_cast<std::size_t>(k)];
        r.expert1 = r.gold ? (k % 3 ? "A" : "B/A") : (k % 3 ? "C" : "B/B");
        // Expert 2 disagrees with gold on two records.
        bool e2 = (k == 5 || k == 10) ? !r.gold : r.gold;
        r.expert2 = e2 ? "A" : "C";
        r.direct = d ? yes_forms[k % 4] : no_forms[k % 4];
        r.fact = f ? fact_yes(r.text) : fact_no();
        r.judge_a = lean(a, true);
        r.judge_b = lean(b, false);
        rows.push_back(r);
    }

    auto speech_b = [&](std::size_t i) { return kSpeechB[i]; };

    // 16: direct reply unparseable, re-ask answers yes.
    rows.push_back({"speech_b", speech_b(4), true, "A", "A",
                    "It is hard to say without more context.", fact_yes(speech_b(4)),
                    lean(true, true), lean(true, false),
                    {{kTagDirect, "Yes"}}});
    // 17: fact-extraction reply truncated, re-ask returns a valid object.
    rows.push_back({"speech_b", speech_b(5), false, "C", "B/B", "No",
                    "{\"ANALYSIS\": \"The speaker reports what others", lean(false, true),
                    lean(false, false), {{kTagFactExtraction, fact_no()}}});
    // 18: order-A judge unparseable, re-ask leans to A.
    rows.push_back({"speech_b", speech_b(6), true, "A", "A", "Yes", fact_yes(speech_b(6)),
                    "Both assistants make fair points.", lean(true, false),
                    {{kTagJudgeOrderA, "Lean towards A."}}});
    // 19: order-B judge unparseable, and again on re-ask.
    rows.push_back({"speech_b", speech_b(7), true, "B/A", "A", "Yes", fact_yes(speech_b(7)),
                    lean(true, true), "I cannot lean towards either assistant.",
                    {{kTagJudgeOrderB, "Neither argument convinces me."}}});
    // 20: VERIFIABILITY true with category C0.
    rows.push_back({"speech_b", speech_b(8), true, "A", "A", "Yes",
                    fact_json(true, "C0", speech_b(8)), lean(true, true), lean(true, false)});
    // 21: answers wrapped in prose.
    rows.push_back({"speech_b", speech_b(9), true, "A", "A",
                    "Yes, it states a change in the number of households that records could confirm.",
                    "Here is my analysis:\n```json\n" + fact_yes(speech_b(9)) + "\n```\nDone.",
                    "After weighing both, I lean towards Assistant A because it cites the number.",
                    "Assistant B gives the stronger case, so I lean towards B."});
    // 22-24: Twitter.
    rows.push_back({"tweets", kTweets[0], true, "A", "A", "Yes", fact_yes(kTweets[0]),
                    lean(true, true), lean(true, false)});
    rows.push_back({"tweets", kTweets[1], false, "C", "C", "No", fact_no(), lean(false, true),
                    lean(false, false)});
    rows.push_back({"tweets", kTweets[2], false, "B/B", "C", "Yes", fact_no(), lean(true, true),
                    lean(false, false)});
    return rows;
}

json answer_json(const std::string& code) {
    if (code == "A") return {{"q1", "A_Yes"}};
    if (code == "C") return {{"q1", "C_No"}};
    if (code == "B/A") return {{"q1", "B_Maybe"}, {"q2", "A_LeansFact"}};
    return {{"q1", "B_Maybe"}, {"q2", "B_LeansOpinion"}};
}

std::string argument_text(const SentenceRecord& rec, bool verifiable) {
    return verifiable
               ? "The sentence \"" + rec.text +
                     "\" refers to concrete matters that public records, reporting or data "
                     "could confirm, so a fact-checker has something to look up."
               : "The sentence \"" + rec.text +
                     "\" does not give enough specific detail to check; it reads as framing or "
                     "judgement rather than a report of fact.";
}

TokenUsage usage_for(const ChatRequest& req, const std::string& reply) {
    TokenUsage u;
    u.prompt_tokens = (req.system.size() + req.user.size()) / 4 + 1;
    u.completion_tokens = reply.size() / 4 + 1;
    return u;
}

}  // namespace

int main(int argc, char** argv) {
    if (argc != 2) {
        std::cerr << "usage: make_fixture <out_dir>\n";
        return 1;
    }
    const fs::path out(argv[1]);
    fs::create_directories(out);
    const auto rows = build_rows();

    {
        std::ofstream corpus(out / "corpus.jsonl", std::ios::binary | std::ios::trunc);
        std::map<std::string, int> positions;
        for (std::size_t i = 0; i < rows.size(); ++i) {
            const auto& r = rows[i];
            char id[16];
            std::snprintf(id, sizeof id, "r%02zu", i);
            json j{{"record_id", id},
                   {"corpus_id", r.corpus},
                   {"position", positions[r.corpus]++},
                   {"text", r.text},
                   {"domain", r.corpus == "tweets" ? "SocialMedia" : "PoliticalSpeech"},
                   {"gold", r.gold ? "FactualClaim" : "NonClaim"},
                   {"expert_labels", {{"expert_1", answer_json(r.expert1)},
                                      {"expert_2", answer_json(r.expert2)}}}};
            corpus << j.dump() << '\n';
        }
    }

    const auto records = load_corpus(out / "corpus.jsonl");
    const PromptEngine prompts;
    fs::remove(out / "cache.jsonl");
    ResponseCache cache(out / "cache.jsonl");

    auto put = [&](const ChatRequest& req, const std::string& reply) {
        cache.store(req, ChatResponse{reply, usage_for(req, reply), json::object()}, kTimestamp);
    };

    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& row = rows[i];
        const auto& rec = records[i];
        const auto arg_v = argument_text(rec, true);
        const auto arg_u = argument_text(rec, false);

        const std::vector<std::pair<const char*, PromptBundle>> steps = {
            {kTagDirect, prompts.render_step1(rec)},
            {kTagFactExtraction, prompts.render_step2(rec)},
            {kTagJudgeOrderA, prompts.render_step3_judge(rec, arg_v, arg_u)},
            {kTagJudgeOrderB, prompts.render_step3_judge(rec, arg_u, arg_v)},
        };
        const std::map<std::string, std::string> first = {{kTagDirect, row.direct},
                                                          {kTagFactExtraction, row.fact},
                                                          {kTagJudgeOrderA, row.judge_a},
                                                          {kTagJudgeOrderB, row.judge_b}};
        for (const auto& [tag, bundle] : steps) {
            put(step_request(bundle, kModel, tag, 0), first.at(tag));
            if (auto it = row.reask.find(tag); it != row.reask.end()) {
                put(step_request(bundle, kModel, tag, 1), it->second);
            }
        }
        put(ChatRequest::from_bundle(prompts.render_step3_argument(rec, ArgumentSide::Verifiable),
                                     kModel, kTagArgueVerifiable),
            arg_v);
        put(ChatRequest::from_bundle(prompts.render_step3_argument(rec, ArgumentSide::Unverifiable),
                                     kModel, kTagArgueUnverifiable),
            arg_u);
    }
    std::cout << "wrote " << rows.size() << " records and " << cache.size() << " responses to "
              << out << '\n';
    return 0;
}
