#pragma once

#include "propdet/common.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace propdet {

// A flat view over one parameter tensor, used by the optimizer and the
// gradient checker.
struct TensorRef {
    std::string name;
    double* data = nullptr;
    std::size_t size = 0;
};

// Small trainable encoder: token + positional embeddings, one softmax
// self-attention mixing layer with residual, a residual tanh feed-forward,
// and learned-query attention pooling for the summary vector. All gradients
// are derived by hand in encoder_backward.
struct EncoderParams {
    int vocab_size = 0;
    int max_seq_len = 0;
    int hidden_dim = 0;

    Mat embedding;   // vocab_size x H
    Mat positional;  // max_seq_len x H
    Mat wq, wk, wv, wo;  // H x H
    Vec bq, bk, bv, bo;  // H
    Mat w1, w2;          // H x H feed-forward
    Vec b1, b2;          // H
    Vec pool_query;      // H

    static EncoderParams zeros(int vocab_size, int max_seq_len, int hidden_dim) {
        EncoderParams p;
        p.vocab_size = vocab_size;
        p.max_seq_len = max_seq_len;
        p.hidden_dim = hidden_dim;
        p.embedding = Mat::Zero(vocab_size, hidden_dim);
        p.positional = Mat::Zero(max_seq_len, hidden_dim);
        p.wq = Mat::Zero(hidden_dim, hidden_dim);
        p.wk = Mat::Zero(hidden_dim, hidden_dim);
        p.wv = Mat::Zero(hidden_dim, hidden_dim);
        p.wo = Mat::Zero(hidden_dim, hidden_dim);
        p.bq = Vec::Zero(hidden_dim);
        p.bk = Vec::Zero(hidden_dim);
        p.bv = Vec::Zero(hidden_dim);
        p.bo = Vec::Zero(hidden_dim);
        p.w1 = Mat::Zero(hidden_dim, hidden_dim);
        p.w2 = Mat::Zero(hidden_dim, hidden_dim);
        p.b1 = Vec::Zero(hidden_dim);
        p.b2 = Vec::Zero(hidden_dim);
        p.pool_query = Vec::Zero(hidden_dim);
        return p;
    }

    static EncoderParams init(int vocab_size, int max_seq_len, int hidden_dim, Rng& rng,
                              double scale = 0.05) {
        EncoderParams p = zeros(vocab_size, max_seq_len, hidden_dim);
        for (auto& tensor : p.tensors("")) {
            for (std::size_t i = 0; i < tensor.size; ++i)
                tensor.data[i] = rng.uniform(-scale, scale);
        }
        return p;
    }

    // Fixed enumeration order; initialization, the optimizer state and the
    // checkpoint layout all depend on it.
    std::vector<TensorRef> tensors(const std::string& prefix) {
        auto sz = [](const Mat& m) { return static_cast<std::size_t>(m.size()); };
        return {
            {prefix + "embedding", embedding.data(), sz(embedding)},
            {prefix + "positional", positional.data(), sz(positional)},
            {prefix + "wq", wq.data(), sz(wq)},
            {prefix + "wk", wk.data(), sz(wk)},
            {prefix + "wv", wv.data(), sz(wv)},
            {prefix + "wo", wo.data(), sz(wo)},
            {prefix + "bq", bq.data(), static_cast<std::size_t>(bq.size())},
            {prefix + "bk", bk.data(), static_cast<std::size_t>(bk.size())},
            {prefix + "bv", bv.data(), static_cast<std::size_t>(bv.size())},
            {prefix + "bo", bo.data(), static_cast<std::size_t>(bo.size())},
            {prefix + "w1", w1.data(), sz(w1)},
            {prefix + "w2", w2.data(), sz(w2)},
            {prefix + "b1", b1.data(), static_cast<std::size_t>(b1.size())},
            {prefix + "b2", b2.data(), static_cast<std::size_t>(b2.size())},
            {prefix + "pool_query", pool_query.data(), static_cast<std::size_t>(pool_query.size())},
        };
    }
};

struct EncodedSentence {
    Vec summary;      // H, plays the role of the sentence summary state
    Mat token_states;  // T x H
};

// Forward intermediates kept for the backward pass.
struct EncoderCache {
    std::vector<int> ids;
    Mat x;       // T x H inputs (embedding + positional)
    Mat q, k, v;  // T x H
    Mat attn;    // T x T row-stochastic
    Mat ctx;     // T x H
    Mat mixed;   // T x H post-attention residual
    Mat act;     // T x H tanh activations
    Mat states;  // T x H final token states
    Vec pool_w;  // T pooling weights
};

namespace detail {

inline void softmax_rows(Mat& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        const double mx = m.row(r).maxCoeff();
        m.row(r) = (m.row(r).array() - mx).exp();
        m.row(r) /= m.row(r).sum();
    }
}

inline Vec softmax(const Vec& v) {
    Vec out = (v.array() - v.maxCoeff()).exp();
    out /= out.sum();
    return out;
}

}  // namespace detail

inline EncodedSentence encode(const EncoderParams& p, const std::vector<int>& token_ids,
                              EncoderCache* cache = nullptr) {
    const auto t_len = static_cast<Eigen::Index>(token_ids.size());
    if (t_len < 1 || t_len > p.max_seq_len)
        throw std::invalid_argument("encode: sequence length " + std::to_string(t_len) +
                                    " outside [1, " + std::to_string(p.max_seq_len) + "]");
    const int h = p.hidden_dim;

    Mat x(t_len, h);
    for (Eigen::Index t = 0; t < t_len; ++t) {
        const int id = token_ids[static_cast<std::size_t>(t)];
        if (id < 0 || id >= p.vocab_size)
            throw std::invalid_argument("encode: token id " + std::to_string(id) +
                                        " outside vocabulary");
        x.row(t) = p.embedding.row(id) + p.positional.row(t);
    }

    Mat q = x * p.wq.transpose();
    q.rowwise() += p.bq.transpose();
    Mat k = x * p.wk.transpose();
    k.rowwise() += p.bk.transpose();
    Mat v = x * p.wv.transpose();
    v.rowwise() += p.bv.transpose();

    Mat attn = q * k.transpose() / std::sqrt(static_cast<double>(h));
    detail::softmax_rows(attn);
    Mat ctx = attn * v;

    Mat mixed = x + ctx * p.wo.transpose();
    mixed.rowwise() += p.bo.transpose();

    Mat pre = mixed * p.w1.transpose();
    pre.rowwise() += p.b1.transpose();
    Mat act = pre.array().tanh();
    Mat states = mixed + act * p.w2.transpose();
    states.rowwise() += p.b2.transpose();

    Vec pool_w = detail::softmax(states * p.pool_query);
    EncodedSentence enc;
    enc.summary = states.transpose() * pool_w;
    enc.token_states = states;

    if (cache) {
        cache->ids = token_ids;
        cache->x = std::move(x);
        cache->q = std::move(q);
        cache->k = std::move(k);
        cache->v = std::move(v);
        cache->attn = std::move(attn);
        cache->ctx = std::move(ctx);
        cache->mixed = std::move(mixed);
        cache->act = std::move(act);
        cache->states = enc.token_states;
        cache->pool_w = pool_w;
    }
    return enc;
}

inline Vec encode_definition(const EncoderParams& p, const std::vector<int>& token_ids,
                             EncoderCache* cache = nullptr) {
    return encode(p, token_ids, cache).summary;
}

// Accumulates dL/dparams into grads given dL/dtoken_states and dL/dsummary.
inline void encoder_backward(const EncoderParams& p, const EncoderCache& c, const Mat& d_states_in,
                             const Vec& d_summary, EncoderParams& grads) {
    const auto t_len = c.states.rows();
    const double inv_sqrt_h = 1.0 / std::sqrt(static_cast<double>(p.hidden_dim));

    Mat d_states = d_states_in;

    // pooling: summary = states^T * pool_w, pool_w = softmax(states * pool_query)
    Vec d_pool_w = c.states * d_summary;
    d_states += c.pool_w * d_summary.transpose();
    const double dot = c.pool_w.dot(d_pool_w);
    Vec d_scores = c.pool_w.array() * (d_pool_w.array() - dot);
    grads.pool_query += c.states.transpose() * d_scores;
    d_states += d_scores * p.pool_query.transpose();

    // feed-forward: states = mixed + tanh(mixed * w1^T + b1) * w2^T + b2
    grads.b2 += d_states.colwise().sum().transpose();
    grads.w2 += d_states.transpose() * c.act;
    Mat d_act = d_states * p.w2;
    Mat d_pre = d_act.array() * (1.0 - c.act.array().square());
    grads.w1 += d_pre.transpose() * c.mixed;
    grads.b1 += d_pre.colwise().sum().transpose();
    Mat d_mixed = d_states + d_pre * p.w1;

    // attention mix: mixed = x + attn_out * wo^T + bo
    grads.bo += d_mixed.colwise().sum().transpose();
    grads.wo += d_mixed.transpose() * c.ctx;
    Mat d_ctx = d_mixed * p.wo;
    Mat d_x = d_mixed;

    // ctx = attn * v with row-softmax attention over scaled dot products
    Mat d_attn = d_ctx * c.v.transpose();
    Mat d_v = c.attn.transpose() * d_ctx;
    Mat d_scores_attn(t_len, t_len);
    for (Eigen::Index r = 0; r < t_len; ++r) {
        const double row_dot = c.attn.row(r).dot(d_attn.row(r));
        d_scores_attn.row(r) = c.attn.row(r).array() * (d_attn.row(r).array() - row_dot);
    }
    Mat d_q = d_scores_attn * c.k * inv_sqrt_h;
    Mat d_k = d_scores_attn.transpose() * c.q * inv_sqrt_h;

    grads.wq += d_q.transpose() * c.x;
    grads.bq += d_q.colwise().sum().transpose();
    d_x += d_q * p.wq;
    grads.wk += d_k.transpose() * c.x;
    grads.bk += d_k.colwise().sum().transpose();
    d_x += d_k * p.wk;
    grads.wv += d_v.transpose() * c.x;
    grads.bv += d_v.colwise().sum().transpose();
    d_x += d_v * p.wv;

    for (Eigen::Index t = 0; t < t_len; ++t) {
        grads.embedding.row(c.ids[static_cast<std::size_t>(t)]) += d_x.row(t);
        grads.positional.row(t) += d_x.row(t);
    }
}

}  // namespace propdet
