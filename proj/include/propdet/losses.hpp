#pragma once

#include "propdet/common.hpp"

#include <array>
#include <cmath>
#include <utility>
#include <vector>

namespace propdet {

enum class LogicGrounding {
    kMasked,  // only tokens whose argmax class is c contribute to g_c
    kPlain,   // g_c is the plain column max
};

struct LossWeights {
    double alpha = 0.8;
    double beta = 0.2;
    double lambda = 0.001;
    double gamma = 0.001;
    double focal_gamma = 2.0;
    double eps = 1e-7;
    LogicGrounding grounding = LogicGrounding::kMasked;
};

// Mean binary cross-entropy over the 19 sentence heads. Probabilities are
// clamped to [eps, 1-eps] before the log; gradients are zero inside the
// clamped region.
inline double sentence_bce(const Vec& sentence_probs, const std::array<int, kNumClasses>& labels,
                           double eps, Vec* d_probs = nullptr) {
    double total = 0.0;
    if (d_probs) *d_probs = Vec::Zero(kNumClasses);
    for (int i = 0; i < kNumClasses; ++i) {
        const double p = sentence_probs(i);
        const double pc = clamp_prob(p, eps);
        const double y = static_cast<double>(labels[static_cast<std::size_t>(i)]);
        total += -(y * std::log(pc) + (1.0 - y) * std::log(1.0 - pc));
        if (d_probs && p > eps && p < 1.0 - eps)
            (*d_probs)(i) = (-y / pc + (1.0 - y) / (1.0 - pc)) / kNumClasses;
    }
    return total / kNumClasses;
}

// Focal loss -(1-p)^g * log(p) of the true class, averaged over tokens.
// Returns {loss, valid}; valid is false when there are no tokens to average
// over (fully truncated input), in which case the loss is 0.
inline std::pair<double, bool> token_focal(const Mat& token_probs, const std::vector<int>& labels,
                                           double focal_gamma, double eps, Mat* d_probs = nullptr) {
    const auto t_len = token_probs.rows();
    if (d_probs) *d_probs = Mat::Zero(t_len, kNumClasses);
    if (t_len == 0) return {0.0, false};
    double total = 0.0;
    for (Eigen::Index t = 0; t < t_len; ++t) {
        const int k = labels[static_cast<std::size_t>(t)];
        const double p = token_probs(t, k);
        const double pc = clamp_prob(p, eps);
        const double miss = 1.0 - pc;
        total += -std::pow(miss, focal_gamma) * std::log(pc);
        if (d_probs && p > eps && p < 1.0 - eps) {
            double d = -std::pow(miss, focal_gamma) / pc;
            if (focal_gamma > 0.0)
                d += focal_gamma * std::pow(miss, focal_gamma - 1.0) * std::log(pc);
            (*d_probs)(t, k) = d / static_cast<double>(t_len);
        }
    }
    return {total / static_cast<double>(t_len), true};
}

// First index of the row maximum; ties resolve to the lowest class.
inline int row_argmax(const Mat& m, Eigen::Index row) {
    int best = 0;
    for (int c = 1; c < static_cast<int>(m.cols()); ++c)
        if (m(row, c) > m(row, best)) best = c;
    return best;
}

// Token-level evidence g_c for one class: the max-pooled probability of
// class c with unpredicted classes grounded to zero. Returns {g_c, token
// index holding the max} with index -1 when no token grounds the class.
inline std::pair<double, Eigen::Index> grounded_token_prob(const Mat& token_probs, int technique_class,
                                                           LogicGrounding grounding) {
    double best = 0.0;
    Eigen::Index best_t = -1;
    for (Eigen::Index t = 0; t < token_probs.rows(); ++t) {
        if (grounding == LogicGrounding::kMasked && row_argmax(token_probs, t) != technique_class)
            continue;
        const double p = token_probs(t, technique_class);
        if (best_t < 0 || p > best) {
            best = p;
            best_t = t;
        }
    }
    if (best_t < 0) return {0.0, -1};
    return {best, best_t};
}

// Product-semantics implication penalty, averaged over the 18 techniques:
//   P_c = f_c * (g_c - 1) + 1,  L = mean_c -log(clamp(P_c, eps, 1))
// The max inside g_c is treated as piecewise differentiable; gradients flow
// through the selected token only.
inline double logic_loss(const Vec& sentence_probs, const Mat& token_probs, double eps,
                         LogicGrounding grounding, Vec* d_sentence_probs = nullptr,
                         Mat* d_token_probs = nullptr) {
    if (d_sentence_probs) *d_sentence_probs = Vec::Zero(kNumClasses);
    if (d_token_probs) *d_token_probs = Mat::Zero(token_probs.rows(), kNumClasses);
    double total = 0.0;
    for (int c = 1; c < kNumClasses; ++c) {
        const double f = sentence_probs(c);
        const auto [g, token] = grounded_token_prob(token_probs, c, grounding);
        const double pf = f * (g - 1.0) + 1.0;
        const double pf_clamped = pf < eps ? eps : (pf > 1.0 ? 1.0 : pf);
        total += -std::log(pf_clamped);
        if (pf > eps && pf <= 1.0) {
            const double d_pf = -1.0 / pf_clamped / kNumTechniques;
            if (d_sentence_probs) (*d_sentence_probs)(c) += d_pf * (g - 1.0);
            if (d_token_probs && token >= 0) (*d_token_probs)(token, c) += d_pf * f;
        }
    }
    return total / kNumTechniques;
}

// Sum of Euclidean distances between class representations and definition
// vectors, one term per technique.
inline double definition_loss(const Mat& class_repr, const Mat& definition_repr, Mat* d_class = nullptr,
                              Mat* d_definition = nullptr) {
    if (d_class) *d_class = Mat::Zero(class_repr.rows(), class_repr.cols());
    if (d_definition) *d_definition = Mat::Zero(definition_repr.rows(), definition_repr.cols());
    double total = 0.0;
    for (Eigen::Index i = 0; i < class_repr.rows(); ++i) {
        const Vec diff = class_repr.row(i) - definition_repr.row(i);
        const double dist = diff.norm();
        total += dist;
        if (dist > 1e-12) {
            if (d_class) d_class->row(i) = diff.transpose() / dist;
            if (d_definition) d_definition->row(i) = -diff.transpose() / dist;
        }
    }
    return total;
}

// Weighted joint objective:
//   L_j = alpha * L_tok + beta * (L_sen + L_def * lambda) + gamma * L_logic
inline double joint_loss(double l_tok, double l_sen, double l_def, double l_logic,
                         const LossWeights& w) {
    return w.alpha * l_tok + w.beta * (l_sen + l_def * w.lambda) + w.gamma * l_logic;
}

}  // namespace propdet
