#include "qwthn/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <unordered_map>

#include "qwthn/errors.hpp"

namespace qwthn {

namespace {

bool has_whitespace(const std::string& text) {
    for (unsigned char c : text) {
        if (std::isspace(c)) {
            return true;
        }
    }
    return false;
}

std::vector<std::string> split_utf8_chars(const std::string& text) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < text.size()) {
        const unsigned char lead = static_cast<unsigned char>(text[i]);
        std::size_t len = 1;
        if ((lead & 0xF8) == 0xF0) {
            len = 4;
        } else if ((lead & 0xF0) == 0xE0) {
            len = 3;
        } else if ((lead & 0xE0) == 0xC0) {
            len = 2;
        }
        len = std::min(len, text.size() - i);
        out.push_back(text.substr(i, len));
        i += len;
    }
    return out;
}

// n-grams keyed by joining tokens with a separator byte that cannot appear
// inside whitespace-split tokens
using NgramCounts = std::unordered_map<std::string, std::size_t>;

NgramCounts count_ngrams(const TokenSeq& seq, std::size_t n) {
    NgramCounts counts;
    if (seq.size() < n) {
        return counts;
    }
    for (std::size_t i = 0; i + n <= seq.size(); ++i) {
        std::string key = seq.tokens[i];
        for (std::size_t k = 1; k < n; ++k) {
            key.push_back('\x1f');
            key += seq.tokens[i + k];
        }
        ++counts[key];
    }
    return counts;
}

} // namespace

TokenSeq tokenize(const std::string& text) {
    TokenSeq seq;
    if (has_whitespace(text)) {
        std::string current;
        for (unsigned char c : text) {
            if (std::isspace(c)) {
                if (!current.empty()) {
                    seq.tokens.push_back(current);
                    current.clear();
                }
            } else {
                current.push_back(static_cast<char>(c));
            }
        }
        if (!current.empty()) {
            seq.tokens.push_back(current);
        }
    } else if (!text.empty()) {
        seq.tokens = split_utf8_chars(text);
    }
    return seq;
}

double bleu4(const TokenSeq& candidate, const std::vector<TokenSeq>& references) {
    if (candidate.empty()) {
        throw MetricError("bleu4: candidate must be non-empty");
    }
    if (references.empty()) {
        throw MetricError("bleu4: at least one reference required");
    }

    const std::size_t c = candidate.size();
    std::size_t r = references.front().size();
    for (const TokenSeq& ref : references) {
        const std::size_t len = ref.size();
        const auto dist = [&](std::size_t l) {
            return l > c ? l - c : c - l;
        };
        if (dist(len) < dist(r) || (dist(len) == dist(r) && len < r)) {
            r = len;
        }
    }

    double log_sum = 0.0;
    for (std::size_t n = 1; n <= 4; ++n) {
        const NgramCounts cand = count_ngrams(candidate, n);
        std::size_t total = c >= n ? c - n + 1 : 0;
        if (total == 0) {
            return 0.0;
        }
        NgramCounts ref_max;
        for (const TokenSeq& ref : references) {
            for (const auto& [key, count] : count_ngrams(ref, n)) {
                std::size_t& slot = ref_max[key];
                slot = std::max(slot, count);
            }
        }
        std::size_t clipped = 0;
        for (const auto& [key, count] : cand) {
            const auto it = ref_max.find(key);
            if (it != ref_max.end()) {
                clipped += std::min(count, it->second);
            }
        }
        if (clipped == 0) {
            return 0.0;
        }
        log_sum += 0.25 * std::log(static_cast<double>(clipped) /
                                   static_cast<double>(total));
    }

    const double bp =
        c > r ? 1.0
              : std::exp(1.0 - static_cast<double>(r) / static_cast<double>(c));
    return bp * std::exp(log_sum);
}

double rouge_n(const TokenSeq& candidate, const TokenSeq& reference, std::size_t n) {
    if (n == 0) {
        throw MetricError("rouge_n: n must be positive");
    }
    if (reference.size() < n) {
        throw MetricError("rouge_n: reference shorter than n");
    }
    const NgramCounts ref = count_ngrams(reference, n);
    const NgramCounts cand = count_ngrams(candidate, n);
    std::size_t matched = 0;
    std::size_t total = 0;
    for (const auto& [key, count] : ref) {
        total += count;
        const auto it = cand.find(key);
        if (it != cand.end()) {
            matched += std::min(count, it->second);
        }
    }
    return static_cast<double>(matched) / static_cast<double>(total);
}

double rouge_l(const TokenSeq& candidate, const TokenSeq& reference, double beta) {
    if (candidate.empty() || reference.empty()) {
        return 0.0;
    }
    const std::size_t m = reference.size();
    const std::size_t k = candidate.size();
    std::vector<std::size_t> prev(k + 1, 0), row(k + 1, 0);
    for (std::size_t i = 1; i <= m; ++i) {
        for (std::size_t j = 1; j <= k; ++j) {
            if (reference.tokens[i - 1] == candidate.tokens[j - 1]) {
                row[j] = prev[j - 1] + 1;
            } else {
                row[j] = std::max(prev[j], row[j - 1]);
            }
        }
        std::swap(prev, row);
    }
    const double lcs = static_cast<double>(prev[k]);
    if (lcs == 0.0) {
        return 0.0;
    }
    const double recall = lcs / static_cast<double>(m);
    const double precision = lcs / static_cast<double>(k);
    const double b2 = beta * beta;
    return (1.0 + b2) * recall * precision / (recall + b2 * precision);
}

AccuracyReport answer_accuracy(const std::vector<AnswerSample>& outputs,
                               const std::vector<std::string>& gold) {
    if (outputs.size() != gold.size()) {
        throw MetricError("answer_accuracy: outputs and gold lengths differ");
    }
    if (outputs.empty()) {
        throw MetricError("answer_accuracy: empty corpus");
    }
    std::size_t sa_hits = 0;
    std::size_t acc_hits = 0;
    for (std::size_t i = 0; i < outputs.size(); ++i) {
        if (outputs[i].answer_segment.find(gold[i]) != std::string::npos) {
            ++sa_hits;
        }
        if (outputs[i].full_text.find(gold[i]) != std::string::npos) {
            ++acc_hits;
        }
    }
    AccuracyReport report;
    report.sa = static_cast<double>(sa_hits) / static_cast<double>(outputs.size());
    report.accuracy = static_cast<double>(acc_hits) / static_cast<double>(outputs.size());
    return report;
}

} // namespace qwthn
