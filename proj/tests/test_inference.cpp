#include "propdet/inference.hpp"
#include "propdet/metrics.hpp"

#include <catch2/catch_amalgamated.hpp>

using namespace propdet;

namespace {

SentenceExample example_with_tokens(int count) {
    SentenceExample ex;
    ex.doc_id = "d1";
    ex.sent_begin = 0;
    std::int64_t offset = 0;
    for (int i = 0; i < count; ++i) {
        Token tok;
        tok.text = "t" + std::to_string(i);
        tok.begin = offset;
        tok.end = offset + 2;
        ex.tokens.push_back(tok);
        ex.token_labels.push_back(0);
        offset += 3;
    }
    ex.sent_end = offset;
    return ex;
}

ModelOutput random_output(Rng& rng, int t_len) {
    ModelOutput out;
    out.sentence_probs = Vec::Zero(kNumClasses);
    for (int c = 0; c < kNumClasses; ++c) out.sentence_probs(c) = rng.uniform();
    out.token_probs = Mat::Zero(t_len, kNumClasses);
    for (Eigen::Index t = 0; t < t_len; ++t) {
        double total = 0.0;
        for (int c = 0; c < kNumClasses; ++c) {
            out.token_probs(t, c) = rng.uniform(0.01, 1.0);
            total += out.token_probs(t, c);
        }
        out.token_probs.row(t) /= total;
    }
    return out;
}

}  // namespace

TEST_CASE("closed gates suppress every fragment") {
    Rng rng(3);
    for (int trial = 0; trial < 100; ++trial) {
        const int t_len = 1 + static_cast<int>(rng.below(6));
        ModelOutput out = random_output(rng, t_len);
        for (int c = 1; c < kNumClasses; ++c)
            out.sentence_probs(c) = rng.uniform() * 0.9;  // never above the gate
        const auto ex = example_with_tokens(t_len);
        const auto pred = decode(out, ex);
        REQUIRE(pred.fragments.empty());
        REQUIRE(pred.y_c.empty());
        REQUIRE(pred.y_t.empty());
        for (int cls : pred.token_classes) REQUIRE(cls == 0);
    }
}

TEST_CASE("zero thresholds reduce to unconstrained argmax") {
    Rng rng(4);
    for (int trial = 0; trial < 100; ++trial) {
        const int t_len = 1 + static_cast<int>(rng.below(6));
        const ModelOutput out = random_output(rng, t_len);
        const auto ex = example_with_tokens(t_len);
        const auto pred = decode(out, ex, DecodeThresholds{0.0, 0.0});
        REQUIRE(pred.slc);
        for (int t = 0; t < t_len; ++t)
            REQUIRE(pred.token_classes[static_cast<std::size_t>(t)] == row_argmax(out.token_probs, t));
    }
}

TEST_CASE("slc boundary is strict") {
    ModelOutput out;
    out.sentence_probs = Vec::Zero(kNumClasses);
    out.sentence_probs(0) = 0.7;
    out.token_probs = Mat::Constant(1, kNumClasses, 1.0 / kNumClasses);
    const auto ex = example_with_tokens(1);
    CHECK_FALSE(decode(out, ex).slc);
    out.sentence_probs(0) = 0.7 + 1e-9;
    CHECK(decode(out, ex).slc);
}

TEST_CASE("adjacent same-class tokens merge into one fragment") {
    ModelOutput out;
    out.sentence_probs = Vec::Zero(kNumClasses);
    out.sentence_probs(5) = 0.95;  // gate open for class 5 only
    out.token_probs = Mat::Zero(5, kNumClasses);
    // tokens 1..3 argmax class 5, others class 0
    for (Eigen::Index t = 0; t < 5; ++t) {
        if (t >= 1 && t <= 3) {
            out.token_probs(t, 5) = 0.8;
            out.token_probs(t, 0) = 0.2;
        } else {
            out.token_probs(t, 0) = 0.9;
            out.token_probs(t, 5) = 0.1;
        }
    }
    const auto ex = example_with_tokens(5);
    const auto pred = decode(out, ex);
    REQUIRE(pred.fragments.size() == 1);
    CHECK(pred.fragments[0].technique == 4);  // class 5 -> technique index 4
    CHECK(pred.fragments[0].begin == ex.tokens[1].begin);
    CHECK(pred.fragments[0].end == ex.tokens[3].end);
    CHECK(pred.y_c == std::set<int>{5});
    CHECK(pred.y_t == std::set<int>{5});
}

TEST_CASE("gated decoding is consistent by construction") {
    Rng rng(6);
    for (int trial = 0; trial < 200; ++trial) {
        const int t_len = 1 + static_cast<int>(rng.below(8));
        ModelOutput out = random_output(rng, t_len);
        // a few confident sentence classes
        for (int c = 1; c < kNumClasses; ++c)
            out.sentence_probs(c) = rng.uniform() < 0.3 ? 0.95 : rng.uniform() * 0.9;
        const auto ex = example_with_tokens(t_len);
        const auto pred = decode(out, ex);
        if (!pred.y_t.empty())
            REQUIRE(sentence_consistency(pred.y_c, pred.y_t) == 1.0);
        for (int cls : pred.y_t) REQUIRE(pred.y_c.count(cls) == 1);
    }
}

TEST_CASE("tokens past the encoded window default to class zero") {
    ModelOutput out;
    out.sentence_probs = Vec::Ones(kNumClasses);
    out.token_probs = Mat::Zero(2, kNumClasses);
    out.token_probs(0, 3) = 1.0;
    out.token_probs(1, 3) = 1.0;
    const auto ex = example_with_tokens(4);  // two tokens beyond the window
    const auto pred = decode(out, ex, DecodeThresholds{0.0, 0.0});
    REQUIRE(pred.token_classes.size() == 4);
    CHECK(pred.token_classes[0] == 3);
    CHECK(pred.token_classes[1] == 3);
    CHECK(pred.token_classes[2] == 0);
    CHECK(pred.token_classes[3] == 0);
    REQUIRE(pred.fragments.size() == 1);
    CHECK(pred.fragments[0].end == ex.tokens[1].end);
}

TEST_CASE("ungated sets") {
    ModelOutput out;
    out.sentence_probs = Vec::Zero(kNumClasses);
    out.sentence_probs(2) = 0.6;
    out.sentence_probs(9) = 0.5;  // exactly at threshold: excluded
    out.token_probs = Mat::Zero(2, kNumClasses);
    out.token_probs(0, 2) = 1.0;
    out.token_probs(1, 0) = 1.0;
    const auto sets = ungated_sets(out);
    CHECK(sets.y_c == std::set<int>{2});
    CHECK(sets.y_t == std::set<int>{2});
}
