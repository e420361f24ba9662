#include "proreg/q2s.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace proreg {

namespace {

const std::vector<std::string>& wh_words() {
    static const std::vector<std::string> words{"what", "who",  "whom", "whose", "which",
                                                "where", "when", "why",  "how"};
    return words;
}

const std::vector<std::string>& auxiliaries() {
    static const std::vector<std::string> words{"is",  "are", "was", "were", "do",  "does",
                                                "did", "any", "can", "could", "has", "have"};
    return words;
}

// Auxiliaries that move behind the subject; do/does/did are dropped instead.
const std::vector<std::string>& reinversion_auxiliaries() {
    static const std::vector<std::string> words{"is",  "are",   "was", "were",
                                                "can", "could", "has", "have"};
    return words;
}

const std::vector<std::string>& determiners() {
    static const std::vector<std::string> words{"the",  "this", "that", "these", "those",
                                                "a",    "an",   "my",   "your",  "his",
                                                "her",  "its",  "our",  "their"};
    return words;
}

bool contains(const std::vector<std::string>& words, const std::string& token) {
    return std::find(words.begin(), words.end(), token) != words.end();
}

std::vector<std::string> tokens_of(const std::string& text) {
    std::vector<std::string> tokens;
    std::istringstream in(text);
    std::string tok;
    while (in >> tok) tokens.push_back(tok);
    return tokens;
}

std::string join(const std::vector<std::string>& tokens, std::size_t from, std::size_t to) {
    std::string out;
    for (std::size_t i = from; i < to; ++i) {
        if (!out.empty()) out += ' ';
        out += tokens[i];
    }
    return out;
}

Statement make_itm(std::string text) {
    Statement s;
    s.text = std::move(text);
    s.text += '.';
    s.route = Route::itm;
    return s;
}

Statement make_mlm(std::string text, const Q2sOptions& options) {
    Statement s;
    s.text = std::move(text);
    s.text += '.';
    s.route = Route::mlm;
    std::vector<std::string> toks = tokens_of(s.text);
    for (std::size_t i = 0; i < toks.size(); ++i) {
        if (toks[i].find(options.mask_token) != std::string::npos) {
            s.mask_index = i;
            break;
        }
    }
    return s;
}

}  // namespace

Question normalize_question(std::string_view raw) {
    Question q;
    std::string collapsed;
    bool in_space = true;
    for (char c : raw) {
        unsigned char uc = static_cast<unsigned char>(c);
        if (std::isspace(uc)) {
            if (!in_space) collapsed += ' ';
            in_space = true;
        } else {
            collapsed += static_cast<char>(std::tolower(uc));
            in_space = false;
        }
    }
    while (!collapsed.empty() &&
           (collapsed.back() == ' ' || collapsed.back() == '?' || collapsed.back() == '.' ||
            collapsed.back() == '!')) {
        collapsed.pop_back();
    }
    q.text = std::move(collapsed);

    std::vector<std::string> toks = tokens_of(q.text);
    if (!toks.empty()) {
        if (toks.size() >= 2 && toks[0] == "how" && toks[1] == "many") {
            q.type_tag = "how many";
        } else if (toks.size() >= 2 && toks[0] == "what" && toks[1] == "color") {
            q.type_tag = "what color";
        } else if (contains(wh_words(), toks[0])) {
            q.type_tag = toks[0];
        } else if (toks[0] == "any") {
            q.type_tag = "any";
        } else if (contains(auxiliaries(), toks[0])) {
            q.type_tag = "aux:" + toks[0];
        }
    }
    return q;
}

QuestionType classify(const Question& q) {
    std::vector<std::string> toks = tokens_of(q.text);
    if (toks.empty()) return QuestionType::unsupported;
    if (contains(wh_words(), toks[0])) return QuestionType::open_ended;
    if (contains(auxiliaries(), toks[0])) return QuestionType::closed_ended;
    return QuestionType::unsupported;
}

std::optional<Statement> to_statement(const Question& q, const Q2sOptions& options) {
    std::vector<std::string> toks = tokens_of(q.text);
    QuestionType type = classify(q);
    if (type == QuestionType::unsupported) return std::nullopt;

    if (type == QuestionType::open_ended) {
        // how many X are there -> there are [MASK] X.
        if (toks.size() >= 5 && toks[0] == "how" && toks[1] == "many" &&
            toks[toks.size() - 2] == "are" && toks.back() == "there") {
            std::string x = join(toks, 2, toks.size() - 2);
            return make_mlm("there are " + options.mask_token + " " + x, options);
        }
        // what color is the X -> the color of the X is [MASK].
        if (toks.size() >= 5 && toks[0] == "what" && toks[1] == "color" && toks[2] == "is" &&
            toks[3] == "the") {
            std::string x = join(toks, 4, toks.size());
            return make_mlm("the color of the " + x + " is " + options.mask_token, options);
        }
        return std::nullopt;
    }

    // closed-ended families
    const std::string& aux = toks[0];
    if (aux == "any" && toks.size() >= 2) {
        return make_itm("some " + join(toks, 1, toks.size()));
    }
    if ((aux == "do" || aux == "does" || aux == "did") && toks.size() >= 2) {
        return make_itm(join(toks, 1, toks.size()));
    }
    if (contains(reinversion_auxiliaries(), aux) && toks.size() >= 4 &&
        contains(determiners(), toks[1])) {
        // aux det noun rest -> det noun aux rest.
        return make_itm(toks[1] + " " + toks[2] + " " + aux + " " + join(toks, 3, toks.size()));
    }
    return std::nullopt;
}

std::string route_answer_itm(double match_score, double threshold) {
    if (!std::isfinite(match_score) || !std::isfinite(threshold)) {
        throw std::invalid_argument("route_answer_itm: non-finite score or threshold");
    }
    return match_score >= threshold ? "yes" : "no";
}

std::string route_answer_mlm(const std::vector<std::string>& candidates,
                             const ProbVector& candidate_probs) {
    if (candidates.empty()) throw std::invalid_argument("route_answer_mlm: empty candidate set");
    if (candidates.size() != candidate_probs.class_count()) {
        throw std::invalid_argument("route_answer_mlm: candidate/probability length mismatch");
    }
    std::size_t best = 0;
    for (std::size_t i = 1; i < candidates.size(); ++i) {
        if (candidate_probs[i] > candidate_probs[best]) best = i;
    }
    return candidates[best];
}

}  // namespace proreg
