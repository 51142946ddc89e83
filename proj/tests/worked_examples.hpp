#pragma once

// Model replies for one worked example sentence taken through all three
// reasoning paths, used as parser fixtures.

namespace worked {

inline constexpr const char* kTarget =
    "We are so thankful that we haven't suffered any loss of life, and it's always heartening to "
    "see and hear stories of Alaskans pitching in to help each other.";

inline constexpr const char* kStep2Reply = R"({
    "ANALYSIS": "The objective information in the statement is that there has been no loss of life due to the storms. The subjective information is the speaker's expression of gratitude and the heartening stories of Alaskans helping each other.",
    "FACT_PART": "There hasn't been any loss of life due to the storms.",
    "VERIFIABLE_REASON": "The fact that there hasn't been any loss of life due to the storms can be verified by checking official records and reports from relevant authorities such as emergency services, hospitals, and local government.",
    "VERIFIABILITY": true,
    "CATEGORY": "C1"
})";

inline constexpr const char* kArgumentVerifiable =
    "The sentence \"The storms have required state disaster declarations covering almost half of "
    "our boroughs and the communities they include\" does contain objective information. It "
    "provides specific details about the impact of the storms, stating that they have led to "
    "state disaster declarations in nearly half of the boroughs in the state. This is a factual "
    "claim that can be verified by checking the official records of disaster declarations.";

inline constexpr const char* kArgumentUnverifiable =
    "The sentence \"The storms have required state disaster declarations covering almost half of "
    "our boroughs and the communities they include\" does not contain objective information "
    "because it lacks specific details. It does not provide the exact number or names of the "
    "boroughs affected, the specific nature of the disaster declarations, or the precise extent "
    "of the damage. Without these details, the statement remains vague and subjective.";

// Given with the verifiable argument in slot A.
inline constexpr const char* kJudgeReply = "Lean towards A.";

}  // namespace worked
