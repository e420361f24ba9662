#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "proreg/prob.hpp"

namespace proreg {

enum class QuestionType { open_ended, closed_ended, unsupported };

enum class Route { mlm, itm };  // masked-language-model fill vs image-text matching

// Normalized question text plus the detected leading pattern tag
// ("how many", "what color", "aux:is", "any", ...; empty when nothing
// matched).
struct Question {
    std::string text;      // lowercased, whitespace-collapsed, no terminal ?/./!
    std::string type_tag;
};

struct Q2sOptions {
    std::string mask_token = "[MASK]";
};

// A declarative statement ready for a frozen scorer. MLM statements contain
// the mask token exactly once; mask_index is the whitespace-token position of
// the token containing it.
struct Statement {
    std::string text;
    Route route = Route::itm;
    std::optional<std::size_t> mask_index;
};

Question normalize_question(std::string_view raw);

// Open-ended: leading wh-word or "how". Closed-ended: leading auxiliary
// (is/are/was/were/do/does/did/any/can/could/has/have). Anything else is
// unsupported; this function never guesses.
QuestionType classify(const Question& q);

// Rule families, applied to the normalized text:
//   how many X are there      -> there are [MASK] X.        (MLM)
//   what color is the X       -> the color of the X is [MASK].  (MLM)
//   do/does/did X ...         -> X ... .   (auxiliary dropped, ITM)
//   any X ...                 -> some X ... .                (ITM)
//   aux det noun rest         -> det noun aux rest.          (ITM, aux in
//                                is/are/was/were/can/could/has/have)
// Questions outside these families yield std::nullopt, never a guess.
std::optional<Statement> to_statement(const Question& q, const Q2sOptions& options = {});

// ITM: "yes" when the match score reaches the threshold.
std::string route_answer_itm(double match_score, double threshold = 0.5);

// MLM: candidate with the highest probability; ties break to the lowest
// index. Throws on an empty candidate set or a length mismatch.
std::string route_answer_mlm(const std::vector<std::string>& candidates,
                             const ProbVector& candidate_probs);

}  // namespace proreg
