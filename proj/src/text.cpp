#include "sumstyle/text.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <stdexcept>

namespace sumstyle {

namespace {

bool is_ascii_punct(char c) {
    unsigned char u = static_cast<unsigned char>(c);
    return u < 128 && std::ispunct(u) != 0;
}

char to_lower_ascii(char c) {
    unsigned char u = static_cast<unsigned char>(c);
    return u < 128 ? static_cast<char>(std::tolower(u)) : c;
}

bool is_space(char c) {
    unsigned char u = static_cast<unsigned char>(c);
    return u < 128 && std::isspace(u) != 0;
}

// Words ending in '.' that do not terminate a sentence. Compared lowercased,
// including the trailing dot.
const std::array<const char*, 16> kAbbreviations = {
    "mr.", "mrs.", "ms.", "dr.", "prof.", "sr.", "jr.", "st.",
    "u.s.", "u.k.", "e.g.", "i.e.", "etc.", "vs.", "inc.", "no.",
};

bool is_abbreviation(const std::string& word) {
    std::string lower;
    lower.reserve(word.size());
    for (char c : word) lower.push_back(to_lower_ascii(c));
    return std::find_if(kAbbreviations.begin(), kAbbreviations.end(),
                        [&](const char* a) { return lower == a; }) != kAbbreviations.end();
}

void emit_piece(const std::string& piece, std::vector<Token>& out) {
    std::size_t begin = 0;
    std::size_t end = piece.size();
    while (begin < end && is_ascii_punct(piece[begin])) ++begin;
    while (end > begin && is_ascii_punct(piece[end - 1])) --end;

    for (std::size_t i = 0; i < begin; ++i) out.push_back(std::string(1, piece[i]));
    if (begin < end) out.push_back(piece.substr(begin, end - begin));
    for (std::size_t i = end; i < piece.size(); ++i) out.push_back(std::string(1, piece[i]));
}

}  // namespace

long long NGramMultiset::total() const {
    long long sum = 0;
    for (const auto& [gram, count] : counts) sum += count;
    return sum;
}

std::vector<Token> tokenize(const std::string& text) {
    std::vector<Token> out;
    std::string piece;
    auto flush = [&] {
        if (!piece.empty()) {
            emit_piece(piece, out);
            piece.clear();
        }
    };
    for (char c : text) {
        if (is_space(c)) {
            flush();
        } else {
            piece.push_back(to_lower_ascii(c));
        }
    }
    flush();
    return out;
}

std::vector<Sentence> split_sentences(const std::string& text) {
    std::vector<std::pair<std::size_t, std::size_t>> spans;  // [begin, end)
    std::size_t begin = 0;
    const std::size_t n = text.size();

    for (std::size_t i = 0; i < n; ++i) {
        char c = text[i];
        if (c != '.' && c != '!' && c != '?') continue;

        // Fold runs of terminators ("?!", "...") into one boundary candidate.
        std::size_t last = i;
        while (last + 1 < n &&
               (text[last + 1] == '.' || text[last + 1] == '!' || text[last + 1] == '?')) {
            ++last;
        }

        bool at_end = last + 1 >= n;
        bool boundary = at_end;
        if (!at_end && is_space(text[last + 1])) {
            std::size_t next = last + 1;
            while (next < n && is_space(text[next])) ++next;
            if (next >= n) {
                boundary = true;
            } else {
                unsigned char u = static_cast<unsigned char>(text[next]);
                boundary = u < 128 && std::isupper(u) != 0;
            }
        }

        if (boundary && c == '.' && last == i) {
            // The word ending at this dot may be an abbreviation.
            std::size_t word_begin = i;
            while (word_begin > begin && !is_space(text[word_begin - 1])) --word_begin;
            if (is_abbreviation(text.substr(word_begin, i - word_begin + 1))) boundary = false;
        }

        if (boundary) {
            spans.emplace_back(begin, last + 1);
            begin = last + 1;
        }
        i = last;
    }
    if (begin < n) spans.emplace_back(begin, n);

    std::vector<Sentence> out;
    for (const auto& [b, e] : spans) {
        std::vector<Token> tokens = tokenize(text.substr(b, e - b));
        if (tokens.empty()) continue;
        Sentence s;
        s.tokens = std::move(tokens);
        s.index = static_cast<int>(out.size()) + 1;
        out.push_back(std::move(s));
    }
    return out;
}

NGramMultiset ngrams(const Sentence& s, int n) {
    if (n < 1) throw std::invalid_argument("ngrams: order must be >= 1");
    NGramMultiset ms;
    ms.order = n;
    if (static_cast<int>(s.tokens.size()) < n) return ms;
    for (std::size_t i = 0; i + n <= s.tokens.size(); ++i) {
        std::vector<Token> gram(s.tokens.begin() + i, s.tokens.begin() + i + n);
        ++ms.counts[std::move(gram)];
    }
    return ms;
}

std::size_t lcs_length(const std::vector<Token>& a, const std::vector<Token>& b) {
    if (a.empty() || b.empty()) return 0;
    const std::size_t m = b.size();
    std::vector<std::size_t> prev(m + 1, 0), cur(m + 1, 0);
    for (std::size_t i = 1; i <= a.size(); ++i) {
        for (std::size_t j = 1; j <= m; ++j) {
            if (a[i - 1] == b[j - 1]) {
                cur[j] = prev[j - 1] + 1;
            } else {
                cur[j] = std::max(prev[j], cur[j - 1]);
            }
        }
        std::swap(prev, cur);
    }
    return prev[m];
}

double rouge_n_recall(const Sentence& ref, const Sentence& cand, int n) {
    if (n < 1) throw std::invalid_argument("rouge_n_recall: order must be >= 1");
    NGramMultiset ref_grams = ngrams(ref, n);
    long long total = ref_grams.total();
    if (total == 0) return 0.0;
    NGramMultiset cand_grams = ngrams(cand, n);
    long long overlap = 0;
    for (const auto& [gram, count] : ref_grams.counts) {
        auto it = cand_grams.counts.find(gram);
        if (it != cand_grams.counts.end()) overlap += std::min(count, it->second);
    }
    return static_cast<double>(overlap) / static_cast<double>(total);
}

double rouge_l_recall(const Sentence& ref, const Sentence& cand) {
    if (ref.tokens.empty()) return 0.0;
    return static_cast<double>(lcs_length(ref.tokens, cand.tokens)) /
           static_cast<double>(ref.tokens.size());
}

double match_score(const Sentence& ref, const Sentence& cand) {
    return (rouge_n_recall(ref, cand, 1) + rouge_n_recall(ref, cand, 2) +
            rouge_l_recall(ref, cand)) /
           3.0;
}

Sentence make_sentence(std::vector<Token> tokens, int index) {
    Sentence s;
    s.tokens = std::move(tokens);
    s.index = index;
    return s;
}

}  // namespace sumstyle
