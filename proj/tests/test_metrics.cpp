#include "qwthn/metrics.hpp"

#include <cmath>

#include "qwthn/errors.hpp"
#include "qwthn/rng.hpp"
#include "helpers.hpp"

using namespace qwthn;
using test::check;
using test::check_close;
using test::check_throws;

namespace {

TokenSeq toks(const std::string& text) { return tokenize(text); }

void test_tokenize() {
    TokenSeq ws = tokenize("the  cat sat\n on mat");
    check(ws.tokens == std::vector<std::string>({"the", "cat", "sat", "on", "mat"}),
          "whitespace split collapses runs");
    TokenSeq chars = tokenize("abc");
    check(chars.tokens == std::vector<std::string>({"a", "b", "c"}),
          "no whitespace falls back to characters");
    TokenSeq utf8 = tokenize("\xe4\xbd\xa0\xe5\xa5\xbd"); // two CJK characters
    check(utf8.tokens.size() == 2, "utf-8 characters split whole");
    check(tokenize("").tokens.empty(), "empty text gives empty sequence");
    for (const std::string& t : ws.tokens) {
        check(!t.empty(), "no empty tokens");
    }
}

void test_bleu4_perfect_and_zero() {
    TokenSeq cand = toks("a b c d e");
    check_close(bleu4(cand, {cand}), 1.0, 1e-12, "identical text scores 1");

    TokenSeq other = toks("v w x y z");
    check_close(bleu4(cand, {other}), 0.0, 0.0, "disjoint text scores 0");
}

void test_bleu4_brevity_penalty() {
    // candidate is a contiguous 4-token slice of the reference: all clipped
    // precisions are 1, so the score is exactly the brevity penalty e^{1-2}
    TokenSeq ref = toks("a b c d e f g h");
    TokenSeq cand = toks("c d e f");
    check_close(bleu4(cand, {ref}), std::exp(1.0 - 2.0), 1e-9, "BP for c=4, r=8");
}

void test_bleu4_closest_reference_length() {
    TokenSeq cand = toks("a b c d");
    // lengths 3 and 5 are both at distance 1 from c = 4; the tie picks the
    // shorter, so r = 3 < c and BP = 1; every clipped precision is 1
    const double tied = bleu4(cand, {toks("a b c"), toks("a b c d e")});
    check_close(tied, 1.0, 1e-12, "length tie prefers the shorter reference");

    // with only the longer reference, r = 5 > c and BP = e^{1 - 5/4}
    const double longer = bleu4(cand, {toks("a b c d e")});
    check_close(longer, std::exp(1.0 - 5.0 / 4.0), 1e-9, "BP from a longer reference");
}

void test_bleu4_deletion_monotone() {
    TokenSeq ref = toks("a b c d e f g h i j");
    double prev = bleu4(ref, {ref});
    for (std::size_t keep = 9; keep >= 5; --keep) {
        TokenSeq cand;
        cand.tokens.assign(ref.tokens.begin(), ref.tokens.begin() + keep);
        const double score = bleu4(cand, {ref});
        check(score <= prev + 1e-12, "deleting tokens never raises the score");
        prev = score;
    }
}

void test_bleu4_errors() {
    check_throws<MetricError>([] { bleu4(toks("a b"), {}); },
                              "empty reference list must throw");
    TokenSeq empty;
    check_throws<MetricError>([&] { bleu4(empty, {toks("a")}); },
                              "empty candidate must throw");
}

void test_rouge_n_cases() {
    TokenSeq same = toks("x y z w");
    check_close(rouge_n(same, same, 1), 1.0, 0.0, "identical unigrams");
    check_close(rouge_n(same, same, 2), 1.0, 0.0, "identical bigrams");

    check_close(rouge_n(toks("p q r"), toks("x y z"), 1), 0.0, 0.0,
                "disjoint vocab scores 0");

    // ref bigrams {ab, bc, cd}; cand bigrams {ab, bx, xd} -> 1/3
    check_close(rouge_n(toks("a b x d"), toks("a b c d"), 2), 1.0 / 3.0, 1e-12,
                "hand bigram count");

    check_throws<MetricError>([] { rouge_n(toks("a b"), toks("a"), 2); },
                              "reference shorter than n must throw");
}

void test_rouge_l_cases() {
    TokenSeq same = toks("alpha beta gamma");
    check_close(rouge_l(same, same, 1.0), 1.0, 0.0, "identical text scores 1");
    for (double beta : {0.5, 1.0, 2.0}) {
        check_close(rouge_l(same, same, beta), 1.0, 1e-12, "rouge_l(x,x,beta)=1");
    }

    check_close(rouge_l(toks("p q"), toks("x y"), 1.0), 0.0, 0.0,
                "no common token scores 0");

    // LCS("the cat sat on mat", "the cat mat") = 3; R=3/5, P=1, F1=0.75
    check_close(rouge_l(toks("the cat mat"), toks("the cat sat on mat"), 1.0), 0.75,
                1e-12, "hand LCS case");
}

void test_answer_accuracy() {
    std::vector<AnswerSample> outputs = {
        {"the answer is 42", "reasoning... the answer is 42"},
        {"final: 7", "we try 42 first, then settle on final: 7"},
        {"no idea", "no idea at all"},
    };
    std::vector<std::string> gold = {"42", "42", "42"};
    const AccuracyReport report = answer_accuracy(outputs, gold);
    check_close(report.sa, 1.0 / 3.0, 1e-12, "SA counts answer-segment hits");
    check_close(report.accuracy, 2.0 / 3.0, 1e-12, "Accuracy counts full-text hits");

    check_throws<MetricError>([&] { answer_accuracy(outputs, {"42"}); },
                              "length mismatch must throw");
}

void test_sa_bounded_by_accuracy() {
    // random corpora where the answer segment is always part of the full text
    RngState rng(2024);
    for (int corpus = 0; corpus < 20; ++corpus) {
        std::vector<AnswerSample> outputs;
        std::vector<std::string> gold;
        const std::size_t size = 5 + rng.next_below(20);
        for (std::size_t i = 0; i < size; ++i) {
            const std::string answer = std::to_string(rng.next_below(50));
            const std::string segment =
                rng.next_below(2) ? "answer: " + answer : "answer: none";
            std::string reasoning = "consider " + std::to_string(rng.next_below(50));
            AnswerSample sample;
            sample.answer_segment = segment;
            sample.full_text = reasoning + " => " + segment;
            outputs.push_back(sample);
            gold.push_back(answer);
        }
        const AccuracyReport report = answer_accuracy(outputs, gold);
        check(report.sa <= report.accuracy + 1e-12, "SA never exceeds Accuracy");
    }
}

void test_metrics_depend_on_tokens_only() {
    // re-serializing with different whitespace must not change anything
    TokenSeq a = toks("one two three four five");
    TokenSeq b = toks("one\ttwo  three\nfour five");
    check(a.tokens == b.tokens, "token sequences agree");
    check_close(bleu4(a, {b}), 1.0, 1e-12, "bleu sees tokens, not bytes");
    check_close(rouge_l(a, b, 1.0), 1.0, 1e-12, "rouge sees tokens, not bytes");
}

} // namespace

int main() {
    test::run_test("tokenize", test_tokenize);
    test::run_test("bleu4 perfect and zero", test_bleu4_perfect_and_zero);
    test::run_test("bleu4 brevity penalty", test_bleu4_brevity_penalty);
    test::run_test("bleu4 closest reference", test_bleu4_closest_reference_length);
    test::run_test("bleu4 deletion monotone", test_bleu4_deletion_monotone);
    test::run_test("bleu4 errors", test_bleu4_errors);
    test::run_test("rouge_n cases", test_rouge_n_cases);
    test::run_test("rouge_l cases", test_rouge_l_cases);
    test::run_test("answer accuracy", test_answer_accuracy);
    test::run_test("sa bounded by accuracy", test_sa_bounded_by_accuracy);
    test::run_test("metrics depend on tokens only", test_metrics_depend_on_tokens_only);
    return test::finish();
}
