#pragma once

#include "propdet/config.hpp"
#include "propdet/metrics.hpp"
#include "propdet/trainer.hpp"

#include <iomanip>
#include <sstream>
#include <string>

namespace propdet {

inline Json to_json(const Prf& prf) {
    return Json{{"precision", prf.precision},
                {"recall", prf.recall},
                {"f1", prf.f1},
                {"empty_predictions", prf.empty_predictions},
                {"empty_gold", prf.empty_gold}};
}

inline Json to_json(const ScoreReport& report, const TechniqueCatalog& catalog) {
    Json per_technique = Json::object();
    for (int k = 0; k < kNumTechniques; ++k)
        per_technique[catalog.name(k)] = to_json(report.per_technique[static_cast<std::size_t>(k)]);
    Json confusion = Json::array();
    for (const auto& row : report.confusion) confusion.push_back(row);
    return Json{{"slc", to_json(report.slc)},
                {"spans", to_json(report.spans)},
                {"full", to_json(report.full)},
                {"per_technique", per_technique},
                {"consistency",
                 {{"ungated", report.consistency_ungated.m_c},
                  {"ungated_defined", report.consistency_ungated.defined},
                  {"gated", report.consistency_gated.m_c},
                  {"gated_defined", report.consistency_gated.defined}}},
                {"confusion_matrix", confusion}};
}

inline Json to_json(const TrainReport& report) {
    Json epochs = Json::array();
    for (const auto& e : report.epochs)
        epochs.push_back(Json{{"epoch", e.epoch},
                              {"l_tok", e.l_tok},
                              {"l_sen", e.l_sen},
                              {"l_def", e.l_def},
                              {"l_logic", e.l_logic},
                              {"l_joint", e.l_joint},
                              {"spans_f1", e.spans_f1},
                              {"full_f1", e.full_f1},
                              {"slc_f1", e.slc_f1},
                              {"m_c_ungated", e.m_c_ungated},
                              {"m_c_gated", e.m_c_gated},
                              {"dev_avg_f1", e.dev_avg_f1}});
    return Json{{"epochs", epochs},
                {"best_epoch", report.best_epoch},
                {"stop_reason", report.stop_reason}};
}

namespace detail {

inline std::string pct(double v) {
    std::ostringstream out;
    out << std::fixed << std::setprecision(2) << std::setw(6) << v * 100.0;
    return out.str();
}

}  // namespace detail

// Aligned text table with scores reported x100.
inline std::string render_score_table(const ScoreReport& report, const TechniqueCatalog& catalog,
                                      bool per_technique = true) {
    std::ostringstream out;
    out << "task        P       R       F1\n";
    out << "SLC    " << detail::pct(report.slc.precision) << "  " << detail::pct(report.slc.recall)
        << "  " << detail::pct(report.slc.f1) << "\n";
    out << "Spans  " << detail::pct(report.spans.precision) << "  "
        << detail::pct(report.spans.recall) << "  " << detail::pct(report.spans.f1) << "\n";
    out << "Full   " << detail::pct(report.full.precision) << "  "
        << detail::pct(report.full.recall) << "  " << detail::pct(report.full.f1) << "\n";
    out << "M_C    ungated " << detail::pct(report.consistency_ungated.m_c) << "   gated "
        << detail::pct(report.consistency_gated.m_c) << "\n";
    if (per_technique) {
        out << "\nper-technique (full task)\n";
        for (int k = 0; k < kNumTechniques; ++k) {
            const auto& prf = report.per_technique[static_cast<std::size_t>(k)];
            out << "  " << std::left << std::setw(44) << catalog.name(k) << std::right
                << detail::pct(prf.precision) << "  " << detail::pct(prf.recall) << "  "
                << detail::pct(prf.f1) << "\n";
        }
    }
    return out.str();
}

inline std::string render_stats_table(const CorpusStatistics& stats,
                                      const TechniqueCatalog& catalog) {
    std::ostringstream out;
    out << std::left << std::setw(44) << "technique" << std::right << std::setw(8) << "count"
        << "\n";
    for (int k = 0; k < kNumTechniques; ++k)
        out << std::left << std::setw(44) << catalog.name(k) << std::right << std::setw(8)
            << stats.counts[static_cast<std::size_t>(k)] << "\n";
    out << std::left << std::setw(44) << "Total" << std::right << std::setw(8) << stats.total
        << "\n";
    return out.str();
}

inline std::string render_confusion_csv(const ConfusionMatrix& matrix,
                                        const TechniqueCatalog& catalog) {
    std::ostringstream out;
    out << "gold\\pred,O";
    for (int k = 0; k < kNumTechniques; ++k) out << ",\"" << catalog.name(k) << "\"";
    out << "\n";
    for (int g = 0; g < kNumClasses; ++g) {
        if (g == 0)
            out << "O";
        else
            out << "\"" << catalog.name(g - 1) << "\"";
        for (int p = 0; p < kNumClasses; ++p)
            out << "," << matrix[static_cast<std::size_t>(g)][static_cast<std::size_t>(p)];
        out << "\n";
    }
    return out.str();
}

inline Json to_json(const GradCheckReport& report) {
    Json tensors = Json::array();
    for (const auto& t : report.tensors)
        tensors.push_back(Json{{"name", t.name},
                               {"max_rel_err", t.max_rel_err},
                               {"max_abs_diff", t.max_abs_diff},
                               {"skipped", t.skipped}});
    return Json{{"tensors", tensors},
                {"max_rel_err", report.max_rel_err},
                {"tolerance", report.tolerance},
                {"passed", report.passed}};
}

}  // namespace propdet
