#include "propdet/losses.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cmath>

using namespace propdet;

namespace {

Mat stochastic_rows(const std::vector<std::vector<double>>& rows) {
    Mat m(static_cast<Eigen::Index>(rows.size()), kNumClasses);
    for (std::size_t r = 0; r < rows.size(); ++r) {
        double total = 0.0;
        for (double v : rows[r]) total += v;
        for (int c = 0; c < kNumClasses; ++c) m(static_cast<Eigen::Index>(r), c) = rows[r][static_cast<std::size_t>(c)] / total;
    }
    return m;
}

Mat random_stochastic(Rng& rng, int t_len) {
    Mat m(t_len, kNumClasses);
    for (Eigen::Index t = 0; t < t_len; ++t) {
        double total = 0.0;
        for (int c = 0; c < kNumClasses; ++c) {
            m(t, c) = rng.uniform(0.05, 1.0);
            total += m(t, c);
        }
        m.row(t) /= total;
    }
    return m;
}

constexpr double kEps = 1e-7;

}  // namespace

TEST_CASE("sentence bce hand values") {
    std::array<int, kNumClasses> labels{};
    Vec probs = Vec::Constant(kNumClasses, 0.5);

    // all labels 0, probs 0.5: every head contributes ln 2
    CHECK(sentence_bce(probs, labels, kEps) == Catch::Approx(std::log(2.0)).epsilon(1e-12));

    // a single head at 0.5 against label 1 contributes ln 2 / 19
    labels[3] = 1;
    Vec exact = Vec::Constant(kNumClasses, kEps);
    exact(3) = 0.5;
    const double loss = sentence_bce(exact, labels, kEps);
    CHECK(loss == Catch::Approx((std::log(2.0) + 18.0 * -std::log(1.0 - kEps)) / 19.0).margin(1e-9));

    // probabilities equal to the labels cost (almost) nothing
    for (int i = 0; i < kNumClasses; ++i) exact(i) = labels[static_cast<std::size_t>(i)];
    CHECK(sentence_bce(exact, labels, kEps) == Catch::Approx(0.0).margin(1e-5));
}

TEST_CASE("sentence bce gradient matches finite differences") {
    Rng rng(11);
    std::array<int, kNumClasses> labels{};
    labels[0] = 1;
    labels[4] = 1;
    Vec probs(kNumClasses);
    for (int i = 0; i < kNumClasses; ++i) probs(i) = rng.uniform(0.05, 0.95);
    Vec grad;
    sentence_bce(probs, labels, kEps, &grad);
    const double h = 1e-6;
    for (int i = 0; i < kNumClasses; ++i) {
        Vec up = probs, down = probs;
        up(i) += h;
        down(i) -= h;
        const double fd =
            (sentence_bce(up, labels, kEps) - sentence_bce(down, labels, kEps)) / (2.0 * h);
        CHECK(grad(i) == Catch::Approx(fd).margin(1e-6));
    }
}

TEST_CASE("token focal hand values") {
    // p_true = 0.9 with focal gamma 2: -(0.1)^2 ln 0.9
    std::vector<std::vector<double>> rows{{std::vector<double>(kNumClasses, 0.1 / 18.0)}};
    rows[0][5] = 0.9;
    Mat probs(1, kNumClasses);
    probs.setConstant(0.1 / 18.0);
    probs(0, 5) = 0.9;
    const auto [loss, valid] = token_focal(probs, {5}, 2.0, kEps);
    CHECK(valid);
    CHECK(loss == Catch::Approx(-0.01 * std::log(0.9)).epsilon(1e-12));
    CHECK(loss == Catch::Approx(0.0010536051565782628).margin(1e-9));

    // p_true = 1 costs nothing
    Mat sure = Mat::Zero(1, kNumClasses);
    sure(0, 7) = 1.0;
    CHECK(token_focal(sure, {7}, 2.0, kEps).first == Catch::Approx(0.0).margin(1e-9));

    // no tokens: returns 0 with the flag cleared
    Mat empty(0, kNumClasses);
    const auto [zero, flag] = token_focal(empty, {}, 2.0, kEps);
    CHECK(zero == 0.0);
    CHECK_FALSE(flag);
}

TEST_CASE("focal with gamma 0 equals cross-entropy") {
    Rng rng(42);
    for (int trial = 0; trial < 1000; ++trial) {
        Mat probs = random_stochastic(rng, 3);
        std::vector<int> labels;
        for (int t = 0; t < 3; ++t) labels.push_back(static_cast<int>(rng.below(kNumClasses)));
        const auto [focal, valid] = token_focal(probs, labels, 0.0, kEps);
        REQUIRE(valid);
        double ce = 0.0;
        for (int t = 0; t < 3; ++t)
            ce += -std::log(clamp_prob(probs(t, labels[static_cast<std::size_t>(t)]), kEps));
        ce /= 3.0;
        REQUIRE(focal == Catch::Approx(ce).margin(1e-12));
    }
}

TEST_CASE("grounded token probability") {
    // uniform rows: ties break toward class 0, so no technique is grounded
    Mat uniform = Mat::Constant(4, kNumClasses, 1.0 / kNumClasses);
    for (int c = 1; c < kNumClasses; ++c) {
        const auto [g, token] = grounded_token_prob(uniform, c, LogicGrounding::kMasked);
        CHECK(g == 0.0);
        CHECK(token == -1);
    }

    // one token argmaxes class 5 at 0.8
    Mat probs = Mat::Constant(3, kNumClasses, 0.2 / 18.0);
    probs.row(0).setConstant((1.0 - 0.3) / 18.0);
    probs(0, 0) = 0.3;  // argmax 0
    probs.row(1).setConstant(0.2 / 18.0);
    probs(1, 5) = 1.0 - 0.2 / 18.0 * 17 - 0.05;
    probs(1, 0) = 0.05;
    probs.row(2).setConstant((1.0 - 0.4) / 18.0);
    probs(2, 0) = 0.4;
    {
        const auto [g, token] = grounded_token_prob(probs, 5, LogicGrounding::kMasked);
        CHECK(token == 1);
        CHECK(g == Catch::Approx(probs(1, 5)));
    }
    for (int c : {1, 2, 3, 4, 6}) {
        const auto [g, token] = grounded_token_prob(probs, c, LogicGrounding::kMasked);
        CHECK(g == 0.0);
        CHECK(token == -1);
    }

    // two tokens argmax class 5: max wins
    Mat two = Mat::Constant(2, kNumClasses, 0.1 / 18.0);
    two(0, 5) = 0.6;
    two(0, 0) = 1.0 - 0.6 - 0.1 / 18.0 * 17;
    two(1, 5) = 0.9;
    two(1, 0) = 1.0 - 0.9 - 0.1 / 18.0 * 17;
    {
        const auto [g, token] = grounded_token_prob(two, 5, LogicGrounding::kMasked);
        CHECK(g == Catch::Approx(0.9));
        CHECK(token == 1);
    }

    // plain grounding ignores the argmax restriction
    {
        const auto [g, token] = grounded_token_prob(uniform, 3, LogicGrounding::kPlain);
        CHECK(g == Catch::Approx(1.0 / kNumClasses));
        CHECK(token == 0);
    }
}

TEST_CASE("logic loss hand values") {
    // f_c = 1 and g_c = 1 for every technique: no penalty
    Vec sentence = Vec::Ones(kNumClasses);
    Mat tokens = Mat::Zero(kNumTechniques, kNumClasses);
    for (int c = 1; c < kNumClasses; ++c) tokens(c - 1, c) = 1.0;
    CHECK(logic_loss(sentence, tokens, kEps, LogicGrounding::kMasked) ==
          Catch::Approx(0.0).margin(1e-12));

    // single class with f = 0.9 against g = 0.2 contributes -ln 0.28
    Vec f = Vec::Zero(kNumClasses);
    f(5) = 0.9;
    Mat g = Mat::Zero(1, kNumClasses);
    g(0, 5) = 0.2;  // argmax is class 5 (0.2 > all zeros)
    const double loss = logic_loss(f, g, kEps, LogicGrounding::kMasked);
    CHECK(loss == Catch::Approx(-std::log(0.28) / kNumTechniques).epsilon(1e-12));
    CHECK(loss * kNumTechniques == Catch::Approx(1.2729656758128876).margin(1e-9));

    // f = g = 0.5: P = 0.75
    Vec f2 = Vec::Zero(kNumClasses);
    f2(3) = 0.5;
    Mat g2 = Mat::Zero(1, kNumClasses);
    g2(0, 3) = 0.5;
    const double loss2 = logic_loss(f2, g2, kEps, LogicGrounding::kMasked);
    CHECK(loss2 * kNumTechniques == Catch::Approx(-std::log(0.75)).epsilon(1e-12));
    CHECK(loss2 * kNumTechniques == Catch::Approx(0.2876820724517809).margin(1e-9));
}

TEST_CASE("logic loss is non-negative and zero only without violation") {
    Rng rng(7);
    for (int trial = 0; trial < 200; ++trial) {
        Vec f(kNumClasses);
        for (int c = 0; c < kNumClasses; ++c) f(c) = rng.uniform();
        Mat probs = random_stochastic(rng, 5);
        const double loss = logic_loss(f, probs, kEps, LogicGrounding::kMasked);
        REQUIRE(loss >= 0.0);
    }
    // f_c = 0 everywhere: no antecedent, no penalty
    Vec zero_f = Vec::Zero(kNumClasses);
    Mat probs = random_stochastic(rng, 5);
    CHECK(logic_loss(zero_f, probs, kEps, LogicGrounding::kMasked) ==
          Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("logic loss derivative signs") {
    // more token evidence can only lower the penalty, stronger unsupported
    // sentence claims can only raise it
    Rng rng(13);
    for (int trial = 0; trial < 50; ++trial) {
        Vec f = Vec::Zero(kNumClasses);
        const int c = 1 + static_cast<int>(rng.below(kNumTechniques));
        f(c) = rng.uniform(0.1, 0.9);
        Mat probs = Mat::Zero(1, kNumClasses);
        const double g = rng.uniform(0.3, 0.9);
        probs(0, c) = g;  // argmax c
        Vec d_f;
        Mat d_g;
        logic_loss(f, probs, kEps, LogicGrounding::kMasked, &d_f, &d_g);
        REQUIRE(d_f(c) >= 0.0);
        REQUIRE(d_g(0, c) <= 0.0);

        const double h = 1e-7;
        Vec f_up = f;
        f_up(c) += h;
        const double fd_f = (logic_loss(f_up, probs, kEps, LogicGrounding::kMasked) -
                             logic_loss(f, probs, kEps, LogicGrounding::kMasked)) /
                            h;
        REQUIRE(fd_f >= -1e-6);
        Mat g_up = probs;
        g_up(0, c) += h;
        const double fd_g = (logic_loss(f, g_up, kEps, LogicGrounding::kMasked) -
                             logic_loss(f, probs, kEps, LogicGrounding::kMasked)) /
                            h;
        REQUIRE(fd_g <= 1e-6);
    }
}

TEST_CASE("definition loss hand values") {
    // 3-4-5 triangle
    Mat w = Mat::Zero(1, 2);
    Mat d(1, 2);
    d << 3.0, 4.0;
    CHECK(definition_loss(w, d) == Catch::Approx(5.0).epsilon(1e-12));

    // equal representations cost nothing
    Mat same = Mat::Random(kNumTechniques, 8);
    CHECK(definition_loss(same, same) == Catch::Approx(0.0).margin(1e-12));

    // doubling one row's difference doubles that row's term
    Mat w2 = Mat::Zero(2, 3);
    Mat d2 = Mat::Zero(2, 3);
    d2(0, 0) = 1.5;
    d2(1, 2) = 2.0;
    const double base = definition_loss(w2, d2);
    d2(1, 2) = 4.0;
    CHECK(definition_loss(w2, d2) == Catch::Approx(base + 2.0).epsilon(1e-12));
}

TEST_CASE("definition loss gradient") {
    Rng rng(3);
    Mat w(4, 6), d(4, 6);
    for (Eigen::Index i = 0; i < w.size(); ++i) {
        w.data()[i] = rng.uniform(-1.0, 1.0);
        d.data()[i] = rng.uniform(-1.0, 1.0);
    }
    Mat dw, dd;
    definition_loss(w, d, &dw, &dd);
    const double h = 1e-6;
    for (Eigen::Index i = 0; i < w.size(); ++i) {
        Mat up = w, down = w;
        up.data()[i] += h;
        down.data()[i] -= h;
        const double fd = (definition_loss(up, d) - definition_loss(down, d)) / (2.0 * h);
        REQUIRE(dw.data()[i] == Catch::Approx(fd).margin(1e-6));
        REQUIRE(dd.data()[i] == Catch::Approx(-dw.data()[i]).margin(1e-12));
    }
}

TEST_CASE("joint loss weighted sum") {
    LossWeights w;  // alpha 0.8, beta 0.2, lambda 0.001, gamma 0.001
    CHECK(joint_loss(1.0, 1.0, 1.0, 1.0, w) == Catch::Approx(1.0012).margin(1e-9));
    CHECK(joint_loss(0.0, 0.0, 0.0, 0.0, w) == 0.0);

    LossWeights reduced = w;
    reduced.beta = 0.0;
    reduced.gamma = 0.0;
    CHECK(joint_loss(3.0, 5.0, 7.0, 11.0, reduced) == Catch::Approx(0.8 * 3.0).epsilon(1e-12));

    // linear in each component: evaluate at unit vectors
    CHECK(joint_loss(1.0, 0.0, 0.0, 0.0, w) == Catch::Approx(w.alpha).epsilon(1e-12));
    CHECK(joint_loss(0.0, 1.0, 0.0, 0.0, w) == Catch::Approx(w.beta).epsilon(1e-12));
    CHECK(joint_loss(0.0, 0.0, 1.0, 0.0, w) == Catch::Approx(w.beta * w.lambda).epsilon(1e-12));
    CHECK(joint_loss(0.0, 0.0, 0.0, 1.0, w) == Catch::Approx(w.gamma).epsilon(1e-12));
}
