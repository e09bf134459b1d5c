#pragma once

#include "propdet/corpus.hpp"
#include "propdet/inference.hpp"
#include "propdet/metrics.hpp"
#include "propdet/model.hpp"
#include "propdet/optimizer.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace propdet {

enum class DefinitionEncoding {
    kPerEpoch,  // definitions encoded once per epoch and treated as constants
    kPerStep,   // re-encoded every step with full gradient flow
};

struct TrainConfig {
    int hidden_dim = 32;
    int max_seq_len = 256;
    DefEncoderMode def_mode = DefEncoderMode::kSeparate;
    int batch_size = 16;
    int max_epochs = 20;
    int early_stop_patience = 5;
    std::uint64_t seed = 42;
    // The from-scratch encoder needs larger steps than the 3e-5 used with a
    // pretrained backbone; that value remains reachable through config.
    OptimizerConfig optimizer{.learning_rate = 1e-3, .warmup_steps = 500};
    LossWeights weights;
    DefinitionEncoding definition_encoding = DefinitionEncoding::kPerEpoch;
    DecodeThresholds thresholds;
};

struct EpochStats {
    int epoch = 0;  // 1-based
    double l_tok = 0.0, l_sen = 0.0, l_def = 0.0, l_logic = 0.0, l_joint = 0.0;
    double spans_f1 = 0.0, full_f1 = 0.0, slc_f1 = 0.0;
    double m_c_ungated = 0.0, m_c_gated = 0.0;
    double dev_avg_f1 = 0.0;
};

struct TrainReport {
    std::vector<EpochStats> epochs;
    int best_epoch = 0;  // 0 = initial parameters
    std::string stop_reason;
};

struct TrainResult {
    Model model;  // parameters of the best epoch
    TrainReport report;
};

struct TrainAbort : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline std::vector<BatchItem> make_batch_items(const std::vector<SentenceExample>& sentences,
                                               const Vocabulary& vocab, int max_seq_len) {
    std::vector<BatchItem> items;
    items.reserve(sentences.size());
    for (const auto& ex : sentences) {
        BatchItem item;
        item.token_ids = vocab.encode(ex.tokens);
        item.token_labels = ex.token_labels;
        if (static_cast<int>(item.token_ids.size()) > max_seq_len) {
            // tokens past the window are excluded from the training loss
            item.token_ids.resize(static_cast<std::size_t>(max_seq_len));
            item.token_labels.resize(static_cast<std::size_t>(max_seq_len));
        }
        item.sentence_labels = ex.sentence_labels;
        items.push_back(std::move(item));
    }
    return items;
}

namespace detail {

inline void zero_grads(ModelGrads& grads) {
    for (auto& t : grads.tensors())
        std::fill(t.data, t.data + t.size, 0.0);
}

}  // namespace detail

// Mini-batch training with warmup, early stopping on the average of dev
// Spans and Full F1, and a best-epoch checkpoint. Fully deterministic for a
// fixed config: all randomness flows from config.seed and reductions run in
// a fixed order on a single thread.
inline TrainResult train(const std::vector<SentenceExample>& train_sentences,
                         const std::vector<SentenceExample>& dev_sentences,
                         const std::vector<Fragment>& dev_gold, const TechniqueCatalog& catalog,
                         const TrainConfig& config) {
    if (train_sentences.empty()) throw TrainAbort("training split is empty");

    Vocabulary vocab = Vocabulary::build(train_sentences);
    Model model = Model::init(std::move(vocab), config.hidden_dim, config.max_seq_len, config.seed,
                              config.def_mode);
    const auto def_ids = model.definition_ids(catalog);
    const auto items = make_batch_items(train_sentences, model.vocab, config.max_seq_len);

    AdamW optimizer(model.tensors(), config.optimizer);
    ModelGrads grads = ModelGrads::zeros(model);
    Rng shuffle_rng(config.seed ^ 0x9e3779b97f4a7c15ull);

    TrainResult result{model, {}};
    result.report.stop_reason = "max_epochs";
    double best_metric = -std::numeric_limits<double>::infinity();
    int stale_epochs = 0;

    std::vector<std::size_t> order(items.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
        Mat cached_defs;
        const bool per_epoch = config.definition_encoding == DefinitionEncoding::kPerEpoch;
        if (per_epoch) cached_defs = encode_definitions(model, def_ids);

        shuffle_rng.shuffle(order);
        EpochStats stats;
        stats.epoch = epoch;
        std::size_t steps = 0;
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
            std::vector<BatchItem> batch;
            for (std::size_t i = start;
                 i < order.size() && i < start + static_cast<std::size_t>(config.batch_size); ++i)
                batch.push_back(items[order[i]]);

            detail::zero_grads(grads);
            const LossBreakdown loss = compute_batch(model, batch, def_ids, config.weights, &grads,
                                                     per_epoch ? &cached_defs : nullptr);
            if (!std::isfinite(loss.l_joint)) {
                std::ostringstream msg;
                msg << "non-finite loss at epoch " << epoch << ", batch " << steps + 1
                    << ": l_tok=" << loss.l_tok << " l_sen=" << loss.l_sen
                    << " l_def=" << loss.l_def << " l_logic=" << loss.l_logic;
                throw TrainAbort(msg.str());
            }
            optimizer.step(grads.tensors());
            stats.l_tok += loss.l_tok;
            stats.l_sen += loss.l_sen;
            stats.l_def += loss.l_def;
            stats.l_logic += loss.l_logic;
            stats.l_joint += loss.l_joint;
            ++steps;
        }
        if (steps > 0) {
            const double inv = 1.0 / static_cast<double>(steps);
            stats.l_tok *= inv;
            stats.l_sen *= inv;
            stats.l_def *= inv;
            stats.l_logic *= inv;
            stats.l_joint *= inv;
        }

        if (!dev_sentences.empty()) {
            const ScoreReport dev = evaluate_model(model, dev_sentences, dev_gold, config.thresholds);
            stats.spans_f1 = dev.spans.f1;
            stats.full_f1 = dev.full.f1;
            stats.slc_f1 = dev.slc.f1;
            stats.m_c_ungated = dev.consistency_ungated.m_c;
            stats.m_c_gated = dev.consistency_gated.m_c;
            stats.dev_avg_f1 = 0.5 * (dev.spans.f1 + dev.full.f1);
        }
        result.report.epochs.push_back(stats);

        if (dev_sentences.empty()) {
            result.model = model;
            result.report.best_epoch = epoch;
            continue;
        }
        if (stats.dev_avg_f1 > best_metric) {
            best_metric = stats.dev_avg_f1;
            result.model = model;
            result.report.best_epoch = epoch;
            stale_epochs = 0;
        } else {
            ++stale_epochs;
            if (stale_epochs >= config.early_stop_patience) {
                result.report.stop_reason = "early_stop";
                break;
            }
        }
    }
    return result;
}

// ---------------------------------------------------------------------------
// gradient verification

struct TensorCheck {
    std::string name;
    double max_rel_err = 0.0;
    double max_abs_diff = 0.0;
    bool skipped = false;
};

struct GradCheckReport {
    std::vector<TensorCheck> tensors;
    double max_rel_err = 0.0;
    double tolerance = 0.0;
    bool passed = false;
};

inline ModelGrads analytic_gradients(const Model& model, const std::vector<BatchItem>& batch,
                                     const std::vector<std::vector<int>>& def_ids,
                                     const LossWeights& weights) {
    ModelGrads grads = ModelGrads::zeros(model);
    compute_batch(model, batch, def_ids, weights, &grads, nullptr);
    return grads;
}

// Compares supplied gradients against central finite differences of the
// joint loss. Definitions are re-encoded inside every evaluation so the
// definition encoder path is exercised; its tensors are skipped in frozen
// mode where they are not trainable parameters.
inline GradCheckReport gradient_check_against(Model& model, ModelGrads& grads,
                                              const std::vector<BatchItem>& batch,
                                              const std::vector<std::vector<int>>& def_ids,
                                              const LossWeights& weights, double tolerance = 1e-3,
                                              double fd_step = 1e-5) {
    GradCheckReport report;
    report.tolerance = tolerance;
    auto loss_fn = [&]() {
        return compute_batch(model, batch, def_ids, weights, nullptr, nullptr).l_joint;
    };
    auto param_tensors = model.tensors();
    auto grad_tensors = grads.tensors();
    for (std::size_t i = 0; i < param_tensors.size(); ++i) {
        TensorCheck check;
        check.name = param_tensors[i].name;
        if (model.def_mode == DefEncoderMode::kFrozen &&
            check.name.starts_with("def_encoder.")) {
            check.skipped = true;
            report.tensors.push_back(check);
            continue;
        }
        for (std::size_t j = 0; j < param_tensors[i].size; ++j) {
            double& theta = param_tensors[i].data[j];
            const double saved = theta;
            theta = saved + fd_step;
            const double up = loss_fn();
            theta = saved - fd_step;
            const double down = loss_fn();
            theta = saved;
            const double numeric = (up - down) / (2.0 * fd_step);
            const double analytic = grad_tensors[i].data[j];
            const double diff = std::abs(analytic - numeric);
            const double rel = diff / std::max({std::abs(analytic), std::abs(numeric), 1e-6});
            check.max_abs_diff = std::max(check.max_abs_diff, diff);
            check.max_rel_err = std::max(check.max_rel_err, rel);
        }
        report.max_rel_err = std::max(report.max_rel_err, check.max_rel_err);
        report.tensors.push_back(check);
    }
    report.passed = report.max_rel_err <= tolerance;
    return report;
}

inline GradCheckReport gradient_check(Model& model, const std::vector<BatchItem>& batch,
                                      const std::vector<std::vector<int>>& def_ids,
                                      const LossWeights& weights, double tolerance = 1e-3,
                                      double fd_step = 1e-5) {
    ModelGrads grads = analytic_gradients(model, batch, def_ids, weights);
    return gradient_check_against(model, grads, batch, def_ids, weights, tolerance, fd_step);
}

// ---------------------------------------------------------------------------
// consistency experiment: paired runs differing only in the logic weight

struct ConsistencyRun {
    std::uint64_t seed = 0;
    double m_c_gamma_zero = 0.0;
    double m_c_gamma_on = 0.0;
};

inline std::vector<ConsistencyRun> consistency_experiment(
    const std::vector<SentenceExample>& train_sentences,
    const std::vector<SentenceExample>& dev_sentences, const std::vector<Fragment>& dev_gold,
    const TechniqueCatalog& catalog, const TrainConfig& base_config,
    const std::vector<std::uint64_t>& seeds, double gamma_on) {
    if (seeds.size() < 2)
        throw std::invalid_argument("consistency experiment needs at least 2 seeds");
    std::vector<ConsistencyRun> runs;
    for (const auto seed : seeds) {
        ConsistencyRun run;
        run.seed = seed;
        for (const bool logic_on : {false, true}) {
            TrainConfig cfg = base_config;
            cfg.seed = seed;
            cfg.weights.gamma = logic_on ? gamma_on : 0.0;
            TrainResult result = train(train_sentences, dev_sentences, dev_gold, catalog, cfg);
            const ScoreReport dev =
                evaluate_model(result.model, dev_sentences, dev_gold, cfg.thresholds);
            (logic_on ? run.m_c_gamma_on : run.m_c_gamma_zero) = dev.consistency_ungated.m_c;
        }
        runs.push_back(run);
    }
    return runs;
}

}  // namespace propdet
