#include <cctype>
#include <cmath>

#include "pacvd/errors.hpp"
#include "pacvd/eval.hpp"

namespace pacvd {

namespace {

bool word_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
}

std::vector<std::string> split_tokens(std::string_view code) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < code.size()) {
        const char c = code[i];
        if (std::isspace(static_cast<unsigned char>(c))) {
            ++i;
        } else if (word_char(c)) {
            std::size_t j = i;
            while (j < code.size() && word_char(code[j])) ++j;
            out.emplace_back(code.substr(i, j - i));
            i = j;
        } else {
            out.emplace_back(1, c);
            ++i;
        }
    }
    return out;
}

bool ident_like(const std::string& t) {
    return !t.empty() && (std::isalpha(static_cast<unsigned char>(t[0])) || t[0] == '_');
}

}  // namespace

std::vector<std::string> code_tokens(std::string_view code) {
    try {
        std::vector<std::string> out;
        for (auto& t : lex::tokenize(code))
            if (t.kind != lex::TokenKind::End) out.push_back(std::move(t.text));
        return out;
    } catch (const Error&) {
        return split_tokens(code);
    }
}

std::set<std::string> call_names(std::string_view code) {
    const auto toks = code_tokens(code);
    std::set<std::string> out;
    for (std::size_t i = 0; i + 1 < toks.size(); ++i)
        if (toks[i + 1] == "(" && ident_like(toks[i]) && !lex::is_keyword(toks[i]))
            out.insert(toks[i]);
    return out;
}

double jaccard(const std::set<std::string>& a, const std::set<std::string>& b) {
    if (a.empty() && b.empty()) return 1.0;
    std::size_t common = 0;
    for (const auto& x : a) common += b.count(x);
    return static_cast<double>(common) / static_cast<double>(a.size() + b.size() - common);
}

double edit_similarity(const std::vector<std::string>& a, const std::vector<std::string>& b) {
    const std::size_t longest = std::max(a.size(), b.size());
    if (longest == 0) return 1.0;
    return 1.0 - static_cast<double>(levenshtein(a, b)) / static_cast<double>(longest);
}

Bm25::Bm25(std::vector<std::vector<std::string>> documents, double k1, double b)
    : docs_(std::move(documents)), k1_(k1), b_(b) {
    double total = 0;
    for (const auto& d : docs_) {
        std::map<std::string, std::size_t> tf;
        for (const auto& t : d) ++tf[t];
        for (const auto& [t, n] : tf) ++df_[t];
        tf_.push_back(std::move(tf));
        lengths_.push_back(d.size());
        total += static_cast<double>(d.size());
    }
    avgdl_ = docs_.empty() ? 0 : total / static_cast<double>(docs_.size());
}

double Bm25::idf(const std::string& term) const {
    const auto it = df_.find(term);
    const double df = it == df_.end() ? 0 : static_cast<double>(it->second);
    const double n = static_cast<double>(docs_.size());
    return std::log((n - df + 0.5) / (df + 0.5) + 1.0);
}

double Bm25::score(const std::vector<std::string>& query, std::size_t doc) const {
    const std::set<std::string> terms(query.begin(), query.end());
    const auto& tf = tf_.at(doc);
    const double norm =
        avgdl_ > 0 ? 1 - b_ + b_ * static_cast<double>(lengths_[doc]) / avgdl_ : 1.0;
    double s = 0;
    for (const auto& t : terms) {
        const auto it = tf.find(t);
        if (it == tf.end()) continue;
        const double f = static_cast<double>(it->second);
        s += idf(t) * f * (k1_ + 1) / (f + k1_ * norm);
    }
    return s;
}

double SimilarityComponents::combined(const std::array<double, 4>& w) const {
    const double total = w[0] + w[1] + w[2] + w[3];
    if (total <= 0) return 0;
    return (w[0] * token_jaccard + w[1] * call_jaccard + w[2] * edit + w[3] * bm25) / total;
}

std::vector<SimilarityComponents> similarity_components(const std::string& target,
                                                        const std::vector<std::string>& callees) {
    const auto target_tokens = code_tokens(target);
    const std::set<std::string> target_set(target_tokens.begin(), target_tokens.end());
    const auto target_calls = call_names(target);

    std::vector<std::vector<std::string>> docs;
    for (const auto& c : callees) docs.push_back(code_tokens(c));
    const Bm25 bm25(docs);

    std::vector<SimilarityComponents> out(callees.size());
    std::vector<double> raw(callees.size());
    for (std::size_t i = 0; i < callees.size(); ++i) {
        const std::set<std::string> set(docs[i].begin(), docs[i].end());
        out[i].token_jaccard = jaccard(target_set, set);
        out[i].call_jaccard = jaccard(target_calls, call_names(callees[i]));
        out[i].edit = edit_similarity(target_tokens, docs[i]);
        raw[i] = bm25.score(target_tokens, i);
    }
    if (!raw.empty()) {
        const auto [lo, hi] = std::minmax_element(raw.begin(), raw.end());
        const double min = *lo, max = *hi;
        for (std::size_t i = 0; i < raw.size(); ++i)
            out[i].bm25 = max > min ? (raw[i] - min) / (max - min) : (max > 0 ? 1.0 : 0.0);
    }
    return out;
}

}  // namespace pacvd
