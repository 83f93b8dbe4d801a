#pragma once

#include <string>
#include <vector>

namespace qwthn {

struct TokenSeq {
    std::vector<std::string> tokens;

    bool empty() const { return tokens.empty(); }
    std::size_t size() const { return tokens.size(); }
};

// Whitespace split; text without any whitespace falls back to a UTF-8
// character split so unsegmented scripts still tokenize.
TokenSeq tokenize(const std::string& text);

// 4-gram precision with clipped counts and the brevity penalty
// BP = 1 if c > r else exp(1 - r/c), r = reference length closest to c
// (ties prefer the shorter reference). Any zero n-gram precision gives 0.
double bleu4(const TokenSeq& candidate, const std::vector<TokenSeq>& references);

// Recall-oriented: matched reference n-grams over total reference n-grams.
double rouge_n(const TokenSeq& candidate, const TokenSeq& reference, std::size_t n);

// LCS-based F-measure; beta weights recall against precision (1 = F1).
double rouge_l(const TokenSeq& candidate, const TokenSeq& reference, double beta = 1.0);

struct AnswerSample {
    std::string answer_segment;
    std::string full_text;
};

struct AccuracyReport {
    double sa = 0.0;       // gold string found inside the answer segment
    double accuracy = 0.0; // gold string found anywhere in the full text
};

AccuracyReport answer_accuracy(const std::vector<AnswerSample>& outputs,
                               const std::vector<std::string>& gold);

struct MetricReport {
    double bleu4 = 0.0;
    double rouge1 = 0.0;
    double rouge2 = 0.0;
    double rougeL = 0.0;
    double sa = 0.0;
    double accuracy = 0.0;
    bool has_accuracy = false;
};

} // namespace qwthn
