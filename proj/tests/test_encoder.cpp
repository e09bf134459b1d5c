#include "propdet/encoder.hpp"

#include <catch2/catch_amalgamated.hpp>

using namespace propdet;

namespace {

std::vector<int> random_ids(Rng& rng, int vocab, int count) {
    std::vector<int> ids;
    for (int i = 0; i < count; ++i) ids.push_back(static_cast<int>(rng.below(static_cast<std::uint64_t>(vocab))));
    return ids;
}

}  // namespace

TEST_CASE("zero parameters give a zero summary") {
    EncoderParams params = EncoderParams::zeros(10, 8, 6);
    const auto enc = encode(params, {1, 2, 3});
    CHECK(enc.summary.norm() == 0.0);
    CHECK(enc.token_states.norm() == 0.0);
    CHECK(enc.token_states.rows() == 3);
}

TEST_CASE("encode is deterministic") {
    Rng rng(42);
    EncoderParams params = EncoderParams::init(10, 8, 6, rng);
    const auto a = encode(params, {1, 5, 2, 2});
    const auto b = encode(params, {1, 5, 2, 2});
    CHECK(a.summary == b.summary);
    CHECK(a.token_states == b.token_states);
}

TEST_CASE("encoder output depends on token order") {
    Rng rng(42);
    EncoderParams params = EncoderParams::init(10, 8, 6, rng);
    const std::vector<int> ids{1, 5, 2, 7};
    std::vector<int> reversed(ids.rbegin(), ids.rend());
    const auto fwd = encode(params, ids);
    const auto bwd = encode(params, reversed);
    CHECK((fwd.summary - bwd.summary).norm() > 1e-9);
}

TEST_CASE("input validation") {
    EncoderParams params = EncoderParams::zeros(10, 4, 6);
    CHECK_THROWS_AS(encode(params, {}), std::invalid_argument);
    CHECK_THROWS_AS(encode(params, {1, 2, 3, 4, 5}), std::invalid_argument);
    CHECK_THROWS_AS(encode(params, {10}), std::invalid_argument);
    CHECK_THROWS_AS(encode(params, {-1}), std::invalid_argument);
}

TEST_CASE("definition encoding is the summary of the same architecture") {
    Rng rng(9);
    EncoderParams params = EncoderParams::init(12, 8, 4, rng);
    const std::vector<int> ids{3, 1, 4};
    CHECK(encode_definition(params, ids) == encode(params, ids).summary);
    CHECK(encode_definition(params, ids) == encode_definition(params, ids));
}

TEST_CASE("perturbing one embedding row moves outputs like the Jacobian predicts") {
    // central-difference directional derivative of the summary w.r.t. one
    // embedding entry, compared against the analytic backward pass
    Rng rng(17);
    const int hidden = 5;
    EncoderParams params = EncoderParams::init(9, 8, hidden, rng);
    const std::vector<int> ids = random_ids(rng, 9, 4);

    for (int h = 0; h < hidden; ++h) {
        // analytic gradient of summary[h] w.r.t. all params
        EncoderCache cache;
        encode(params, ids, &cache);
        EncoderParams grads = EncoderParams::zeros(9, 8, hidden);
        Vec d_summary = Vec::Zero(hidden);
        d_summary(h) = 1.0;
        Mat d_states = Mat::Zero(static_cast<Eigen::Index>(ids.size()), hidden);
        encoder_backward(params, cache, d_states, d_summary, grads);

        const int row = ids[1];
        for (int col = 0; col < hidden; ++col) {
            const double eps = 1e-6;
            const double saved = params.embedding(row, col);
            params.embedding(row, col) = saved + eps;
            const double up = encode(params, ids).summary(h);
            params.embedding(row, col) = saved - eps;
            const double down = encode(params, ids).summary(h);
            params.embedding(row, col) = saved;
            const double fd = (up - down) / (2.0 * eps);
            REQUIRE(grads.embedding(row, col) == Catch::Approx(fd).margin(1e-6));
        }
    }
}

TEST_CASE("initialization is seeded and bounded") {
    Rng rng_a(42), rng_b(42), rng_c(43);
    EncoderParams a = EncoderParams::init(8, 8, 4, rng_a);
    EncoderParams b = EncoderParams::init(8, 8, 4, rng_b);
    EncoderParams c = EncoderParams::init(8, 8, 4, rng_c);
    CHECK(a.embedding == b.embedding);
    CHECK(a.wq == b.wq);
    CHECK(a.embedding != c.embedding);
    for (auto& tensor : a.tensors(""))
        for (std::size_t i = 0; i < tensor.size; ++i) {
            CHECK(tensor.data[i] <= 0.05);
            CHECK(tensor.data[i] >= -0.05);
        }
}
