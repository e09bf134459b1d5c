#include "propdet/metrics.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <set>

using namespace propdet;

namespace {

// Independent per-character oracle: walks every character of every fragment
// and tests membership in the other set directly.
Prf oracle_flc(const std::vector<Fragment>& predicted, const std::vector<Fragment>& gold,
               FlcMode mode) {
    auto covered_fraction = [&](const Fragment& frag, const std::vector<Fragment>& others) {
        std::int64_t covered = 0;
        for (std::int64_t ch = frag.begin; ch < frag.end; ++ch) {
            for (const auto& other : others) {
                if (other.doc_id != frag.doc_id) continue;
                if (mode == FlcMode::kFull && other.technique != frag.technique) continue;
                if (ch >= other.begin && ch < other.end) {
                    ++covered;
                    break;
                }
            }
        }
        return static_cast<double>(covered) / static_cast<double>(frag.end - frag.begin);
    };
    Prf prf;
    prf.empty_predictions = predicted.empty();
    prf.empty_gold = gold.empty();
    if (!predicted.empty()) {
        double credit = 0.0;
        for (const auto& frag : predicted) credit += covered_fraction(frag, gold);
        prf.precision = credit / static_cast<double>(predicted.size());
    }
    if (!gold.empty()) {
        double credit = 0.0;
        for (const auto& frag : gold) credit += covered_fraction(frag, predicted);
        prf.recall = credit / static_cast<double>(gold.size());
    }
    prf.f1 = harmonic_f1(prf.precision, prf.recall);
    return prf;
}

std::vector<Fragment> random_fragments(Rng& rng, int count) {
    std::vector<Fragment> frags;
    for (int i = 0; i < count; ++i) {
        Fragment f;
        f.doc_id = "d" + std::to_string(rng.below(3));
        f.begin = static_cast<std::int64_t>(rng.below(80));
        f.end = f.begin + 1 + static_cast<std::int64_t>(rng.below(20));
        f.technique = static_cast<int>(rng.below(kNumTechniques));
        frags.push_back(std::move(f));
    }
    return frags;
}

}  // namespace

TEST_CASE("flc hand values") {
    Fragment gold{"d1", 0, 10, 4};
    Fragment half{"d1", 0, 5, 4};

    // identical sets
    auto perfect = score_flc({gold}, {gold}, FlcMode::kFull);
    CHECK(perfect.precision == 1.0);
    CHECK(perfect.recall == 1.0);
    CHECK(perfect.f1 == 1.0);

    // predicted covers half the gold span with the right label
    auto partial = score_flc({half}, {gold}, FlcMode::kFull);
    CHECK(partial.precision == Catch::Approx(1.0));
    CHECK(partial.recall == Catch::Approx(0.5));
    CHECK(partial.f1 == Catch::Approx(2.0 / 3.0).epsilon(1e-9));

    // same span, wrong label: full gives zero, spans gives full credit
    Fragment relabeled{"d1", 0, 10, 7};
    auto full = score_flc({relabeled}, {gold}, FlcMode::kFull);
    CHECK(full.precision == 0.0);
    CHECK(full.recall == 0.0);
    CHECK(full.f1 == 0.0);
    auto spans = score_flc({relabeled}, {gold}, FlcMode::kSpans);
    CHECK(spans.precision == 1.0);
    CHECK(spans.recall == 1.0);

    // zero-denominator conventions: flagged zeros, never NaN
    auto empty_pred = score_flc({}, {gold}, FlcMode::kFull);
    CHECK(empty_pred.empty_predictions);
    CHECK(empty_pred.precision == 0.0);
    auto empty_gold = score_flc({half}, {}, FlcMode::kFull);
    CHECK(empty_gold.empty_gold);
    CHECK(empty_gold.recall == 0.0);
}

TEST_CASE("flc matches the per-character oracle on random sets") {
    Rng rng(2024);
    for (int trial = 0; trial < 200; ++trial) {
        const auto predicted = random_fragments(rng, 1 + static_cast<int>(rng.below(12)));
        const auto gold = random_fragments(rng, 1 + static_cast<int>(rng.below(12)));
        for (FlcMode mode : {FlcMode::kSpans, FlcMode::kFull}) {
            const Prf fast = score_flc(predicted, gold, mode);
            const Prf slow = oracle_flc(predicted, gold, mode);
            REQUIRE(fast.precision == Catch::Approx(slow.precision).margin(1e-9));
            REQUIRE(fast.recall == Catch::Approx(slow.recall).margin(1e-9));
            REQUIRE(fast.f1 == Catch::Approx(slow.f1).margin(1e-9));

            // swapping the sets swaps precision and recall exactly
            const Prf swapped = score_flc(gold, predicted, mode);
            REQUIRE(swapped.precision == Catch::Approx(fast.recall).margin(1e-12));
            REQUIRE(swapped.recall == Catch::Approx(fast.precision).margin(1e-12));

            // the label constraint can only remove credit
            if (mode == FlcMode::kFull) {
                const Prf loose = score_flc(predicted, gold, FlcMode::kSpans);
                REQUIRE(loose.precision >= fast.precision - 1e-12);
                REQUIRE(loose.recall >= fast.recall - 1e-12);
                REQUIRE(loose.f1 >= fast.f1 - 1e-12);
            }
        }
    }
}

TEST_CASE("slc scoring") {
    // perfect predictions
    std::vector<bool> gold{true, false, true, false};
    auto perfect = score_slc(gold, gold);
    CHECK(perfect.precision == 1.0);
    CHECK(perfect.recall == 1.0);
    CHECK(perfect.f1 == 1.0);

    // all-positive predictor: recall 1, precision = positive rate
    std::vector<bool> gold_rate(100, false);
    for (int i = 0; i < 30; ++i) gold_rate[static_cast<std::size_t>(i)] = true;
    std::vector<bool> all_pos(100, true);
    auto baseline = score_slc(all_pos, gold_rate);
    CHECK(baseline.recall == 1.0);
    CHECK(baseline.precision == Catch::Approx(0.3));

    // complement of balanced gold: everything is wrong
    std::vector<bool> complement;
    for (bool g : gold) complement.push_back(!g);
    auto inverted = score_slc(complement, gold);
    CHECK(inverted.precision == 0.0);
    CHECK(inverted.recall == 0.0);
    CHECK(inverted.f1 == 0.0);
}

TEST_CASE("consistency metric") {
    // Y_t subset of Y_c
    CHECK(sentence_consistency({1, 2, 3}, {1, 2}) == 1.0);
    // half the token classes are sentence-supported
    CHECK(sentence_consistency({1}, {1, 2}) == Catch::Approx(0.5));

    std::vector<std::set<int>> y_c{{1}, {2}, {1, 3}};
    std::vector<std::set<int>> y_t{{1, 2}, {}, {3}};
    const auto result = consistency_metric(y_c, y_t);
    CHECK(result.defined);
    CHECK(result.counted_sentences == 2);  // empty Y_t sentence skipped
    CHECK(result.m_c == Catch::Approx((0.5 + 1.0) / 2.0));

    // no sentence has token predictions: flagged zero, not NaN
    const auto nothing = consistency_metric({{1}}, {{}});
    CHECK_FALSE(nothing.defined);
    CHECK(nothing.m_c == 0.0);
}

TEST_CASE("confusion matrix") {
    std::vector<std::vector<int>> gold{{0, 3, 3}, {5, 0}};
    // perfect
    auto diag = confusion_matrix(gold, gold);
    std::int64_t off_diag = 0;
    for (int g = 0; g < kNumClasses; ++g)
        for (int p = 0; p < kNumClasses; ++p)
            if (g != p) off_diag += diag[static_cast<std::size_t>(g)][static_cast<std::size_t>(p)];
    CHECK(off_diag == 0);
    CHECK(diag[3][3] == 2);
    CHECK(diag[5][5] == 1);
    CHECK(diag[0][0] == 2);

    // all predicted "none": single nonzero column 0
    std::vector<std::vector<int>> all_o{{0, 0, 0}, {0, 0}};
    auto col0 = confusion_matrix(all_o, gold);
    CHECK(col0[3][0] == 2);
    CHECK(col0[5][0] == 1);
    CHECK(col0[0][0] == 2);
    for (int g = 0; g < kNumClasses; ++g)
        for (int p = 1; p < kNumClasses; ++p)
            CHECK(col0[static_cast<std::size_t>(g)][static_cast<std::size_t>(p)] == 0);

    // row sums equal gold token counts, checked against a direct loop
    Rng rng(5);
    std::vector<std::vector<int>> rand_gold, rand_pred;
    for (int s = 0; s < 10; ++s) {
        std::vector<int> g_row, p_row;
        const auto len = 1 + rng.below(8);
        for (std::uint64_t t = 0; t < len; ++t) {
            g_row.push_back(static_cast<int>(rng.below(kNumClasses)));
            p_row.push_back(static_cast<int>(rng.below(kNumClasses)));
        }
        rand_gold.push_back(g_row);
        rand_pred.push_back(p_row);
    }
    auto matrix = confusion_matrix(rand_pred, rand_gold);
    std::int64_t brute[kNumClasses][kNumClasses] = {};
    for (std::size_t s = 0; s < rand_gold.size(); ++s)
        for (std::size_t t = 0; t < rand_gold[s].size(); ++t)
            brute[rand_gold[s][t]][rand_pred[s][t]] += 1;
    for (int g = 0; g < kNumClasses; ++g)
        for (int p = 0; p < kNumClasses; ++p)
            REQUIRE(matrix[static_cast<std::size_t>(g)][static_cast<std::size_t>(p)] ==
                    brute[g][p]);
}
