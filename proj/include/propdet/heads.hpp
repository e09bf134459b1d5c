#pragma once

#include "propdet/common.hpp"
#include "propdet/encoder.hpp"

#include <vector>

namespace propdet {

// 19 binary sentence heads over the summary vector (row 0 = "any
// propaganda", rows 1..18 = techniques) and one 19-way token head. Sentence
// head weight row i (i >= 1) is the class representation W(c_i).
struct HeadParams {
    Mat sentence_w;  // 19 x H
    Vec sentence_b;  // 19
    Mat token_w;     // 19 x H
    Vec token_b;     // 19

    static HeadParams zeros(int hidden_dim) {
        HeadParams p;
        p.sentence_w = Mat::Zero(19, hidden_dim);
        p.sentence_b = Vec::Zero(19);
        p.token_w = Mat::Zero(19, hidden_dim);
        p.token_b = Vec::Zero(19);
        return p;
    }

    static HeadParams init(int hidden_dim, Rng& rng, double scale = 0.05) {
        HeadParams p = zeros(hidden_dim);
        for (auto& tensor : p.tensors(""))
            for (std::size_t i = 0; i < tensor.size; ++i)
                tensor.data[i] = rng.uniform(-scale, scale);
        return p;
    }

    std::vector<TensorRef> tensors(const std::string& prefix) {
        return {
            {prefix + "sentence_w", sentence_w.data(), static_cast<std::size_t>(sentence_w.size())},
            {prefix + "sentence_b", sentence_b.data(), static_cast<std::size_t>(sentence_b.size())},
            {prefix + "token_w", token_w.data(), static_cast<std::size_t>(token_w.size())},
            {prefix + "token_b", token_b.data(), static_cast<std::size_t>(token_b.size())},
        };
    }
};

struct ModelOutput {
    Vec sentence_probs;  // 19 sigmoid outputs
    Mat token_probs;     // T x 19, rows sum to 1
};

inline ModelOutput heads_forward(const HeadParams& p, const EncodedSentence& enc) {
    ModelOutput out;
    Vec logits = p.sentence_w * enc.summary + p.sentence_b;
    out.sentence_probs = (1.0 / (1.0 + (-logits.array()).exp())).matrix();

    out.token_probs = enc.token_states * p.token_w.transpose();
    out.token_probs.rowwise() += p.token_b.transpose();
    detail::softmax_rows(out.token_probs);
    return out;
}

// Converts dL/dprobs into parameter gradients plus gradients w.r.t. the
// encoded sentence (through the sigmoid / softmax Jacobians).
inline void heads_backward(const HeadParams& p, const EncodedSentence& enc, const ModelOutput& out,
                           const Vec& d_sentence_probs, const Mat& d_token_probs, HeadParams& grads,
                           Vec& d_summary, Mat& d_states) {
    Vec d_logits =
        d_sentence_probs.array() * out.sentence_probs.array() * (1.0 - out.sentence_probs.array());
    grads.sentence_w += d_logits * enc.summary.transpose();
    grads.sentence_b += d_logits;
    d_summary += p.sentence_w.transpose() * d_logits;

    Mat d_token_logits(out.token_probs.rows(), out.token_probs.cols());
    for (Eigen::Index t = 0; t < out.token_probs.rows(); ++t) {
        const double dot = out.token_probs.row(t).dot(d_token_probs.row(t));
        d_token_logits.row(t) =
            out.token_probs.row(t).array() * (d_token_probs.row(t).array() - dot);
    }
    grads.token_w += d_token_logits.transpose() * enc.token_states;
    grads.token_b += d_token_logits.colwise().sum().transpose();
    d_states += d_token_logits * p.token_w;
}

// Rows are W(c_1)..W(c_18); biases and the "any propaganda" head excluded.
inline Mat class_representations(const HeadParams& p) {
    return p.sentence_w.bottomRows(kNumTechniques);
}

}  // namespace propdet
