#pragma once

#include "propdet/common.hpp"
#include "propdet/corpus.hpp"

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace propdet {

// Seeded synthetic corpus in the same on-disk formats as the real data.
// Each technique k gets a dedicated marker phrase of `marker_len` tokens;
// sentences are filler words with zero, one or two marker insertions whose
// character spans become the gold fragments. `marker_noise` replaces marker
// tokens with random fillers (the span stays annotated) to make the task
// imperfectly learnable.
struct SynthConfig {
    std::uint64_t seed = 42;
    int num_docs = 8;
    int sentences_per_doc = 8;
    int min_tokens = 6;
    int max_tokens = 12;
    int vocab_size = 50;
    int marker_len = 2;
    double technique_rate = 0.6;   // P(sentence carries at least one fragment)
    double second_marker_rate = 0.25;  // P(a marked sentence carries a second fragment)
    double marker_noise = 0.0;
    // P(a gold span additionally swallows the adjacent filler token, per
    // side): sloppy annotation noise that corrupts token-level supervision
    // while leaving the marker itself, and so the sentence-level evidence,
    // intact.
    double span_slop_rate = 0.0;
    // When set, the annotated span is a single token shared between the
    // techniques of a pair (2j and 2j+1) and an unlabeled per-technique cue
    // word is placed elsewhere in the sentence. Token-level evidence is then
    // ambiguous on the surface and must be resolved from context, while
    // sentence-level evidence stays unambiguous.
    bool ambiguous_pair_spans = false;
    // Technique whose spans carry no marker at all (plain fillers are
    // annotated): unlearnable by design, a controlled source of label noise.
    int noise_class = -1;
    std::vector<double> class_weights;  // defaults to a Table-1-like skew
};

struct SynthCorpus {
    std::vector<Document> documents;
    std::vector<Fragment> fragments;
    CorpusStatistics recorded;
};

inline std::string synth_marker_token(int technique, int part) {
    return "cue" + std::to_string(technique) + static_cast<char>('a' + part);
}

inline std::string synth_shared_span_token(int technique) {
    return "sh" + std::to_string(technique / 2) + "x";
}

inline SynthCorpus generate_synthetic_corpus(const SynthConfig& config) {
    Rng rng(config.seed);
    std::vector<double> weights = config.class_weights;
    if (weights.empty()) {
        weights.resize(kNumTechniques);
        for (int k = 0; k < kNumTechniques; ++k)
            weights[static_cast<std::size_t>(k)] = 1.0 / static_cast<double>(1 + k);
    }

    auto filler = [&]() {
        return "w" + std::to_string(rng.below(static_cast<std::uint64_t>(config.vocab_size)));
    };

    SynthCorpus corpus;
    for (int d = 0; d < config.num_docs; ++d) {
        Document doc;
        doc.id = std::to_string(9000 + d);
        for (int s = 0; s < config.sentences_per_doc; ++s) {
            const int n_fill = config.min_tokens +
                               static_cast<int>(rng.below(static_cast<std::uint64_t>(
                                   config.max_tokens - config.min_tokens + 1)));
            int n_markers = 0;
            if (rng.uniform() < config.technique_rate) {
                n_markers = 1;
                if (rng.uniform() < config.second_marker_rate && n_fill >= 1) n_markers = 2;
            }
            // insertion points into the filler sequence, separated so marker
            // spans never touch
            int pos1 = 0, pos2 = 0;
            int tech1 = 0, tech2 = 0;
            if (n_markers == 1) {
                pos1 = static_cast<int>(rng.below(static_cast<std::uint64_t>(n_fill + 1)));
                tech1 = static_cast<int>(rng.weighted(weights));
            } else if (n_markers == 2) {
                pos1 = static_cast<int>(rng.below(static_cast<std::uint64_t>(n_fill)));
                pos2 = pos1 + 1 +
                       static_cast<int>(rng.below(static_cast<std::uint64_t>(n_fill - pos1)));
                tech1 = static_cast<int>(rng.weighted(weights));
                tech2 = static_cast<int>(rng.weighted(weights));
            }

            // unlabeled context cue positions for the ambiguous-span mode,
            // drawn over filler slots independently of the span positions
            int ctx1 = -1, ctx2 = -1;
            if (config.ambiguous_pair_spans) {
                if (n_markers >= 1 && rng.uniform() >= config.marker_noise)
                    ctx1 = static_cast<int>(rng.below(static_cast<std::uint64_t>(n_fill + 1)));
                if (n_markers == 2 && rng.uniform() >= config.marker_noise)
                    ctx2 = static_cast<int>(rng.below(static_cast<std::uint64_t>(n_fill + 1)));
            }

            std::vector<std::pair<std::string, int>> tokens;  // text, fragment group (-1 none)
            auto emit_span = [&](int technique, int group) {
                if (technique == config.noise_class) {
                    for (int part = 0; part < config.marker_len; ++part)
                        tokens.emplace_back(filler(), group);
                    return;
                }
                if (config.ambiguous_pair_spans) {
                    tokens.emplace_back(synth_shared_span_token(technique), group);
                    return;
                }
                for (int part = 0; part < config.marker_len; ++part) {
                    const bool noisy = rng.uniform() < config.marker_noise;
                    tokens.emplace_back(noisy ? filler() : synth_marker_token(technique, part),
                                        group);
                }
            };
            for (int i = 0; i <= n_fill; ++i) {
                if (n_markers >= 1 && i == pos1) emit_span(tech1, 0);
                if (n_markers == 2 && i == pos2) emit_span(tech2, 1);
                if (i == ctx1) tokens.emplace_back(synth_marker_token(tech1, 0), -1);
                if (i == ctx2) tokens.emplace_back(synth_marker_token(tech2, 0), -1);
                if (i < n_fill) tokens.emplace_back(filler(), -1);
            }

            if (config.span_slop_rate > 0.0) {
                for (int g = 0; g < n_markers; ++g) {
                    std::ptrdiff_t first = -1, last = -1;
                    for (std::size_t i = 0; i < tokens.size(); ++i)
                        if (tokens[i].second == g) {
                            if (first < 0) first = static_cast<std::ptrdiff_t>(i);
                            last = static_cast<std::ptrdiff_t>(i);
                        }
                    if (first < 0) continue;
                    if (first > 0 && tokens[static_cast<std::size_t>(first - 1)].second == -1 &&
                        rng.uniform() < config.span_slop_rate)
                        tokens[static_cast<std::size_t>(first - 1)].second = g;
                    if (last + 1 < static_cast<std::ptrdiff_t>(tokens.size()) &&
                        tokens[static_cast<std::size_t>(last + 1)].second == -1 &&
                        rng.uniform() < config.span_slop_rate)
                        tokens[static_cast<std::size_t>(last + 1)].second = g;
                }
            }

            std::int64_t frag_begin[2] = {-1, -1};
            std::int64_t frag_end[2] = {-1, -1};
            auto offset = static_cast<std::int64_t>(doc.text.size());
            for (std::size_t i = 0; i < tokens.size(); ++i) {
                if (i > 0) {
                    doc.text += ' ';
                    ++offset;
                }
                const auto& [text, group] = tokens[i];
                if (group >= 0) {
                    if (frag_begin[group] < 0) frag_begin[group] = offset;
                    frag_end[group] = offset + static_cast<std::int64_t>(text.size());
                }
                doc.text += text;
                offset += static_cast<std::int64_t>(text.size());
            }
            doc.text += '\n';

            const int techniques[2] = {tech1, tech2};
            for (int g = 0; g < n_markers; ++g) {
                Fragment frag;
                frag.doc_id = doc.id;
                frag.begin = frag_begin[g];
                frag.end = frag_end[g];
                frag.technique = techniques[g];
                corpus.fragments.push_back(std::move(frag));
            }
        }
        corpus.documents.push_back(std::move(doc));
    }
    corpus.recorded = corpus_statistics(corpus.fragments);
    return corpus;
}

// Writes articles/, labels.tsv, catalog.tsv and counts.tsv under out_dir.
inline void write_synthetic_corpus(const SynthCorpus& corpus, const TechniqueCatalog& catalog,
                                   const std::filesystem::path& out_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir / "articles");
    for (const auto& doc : corpus.documents) {
        std::ofstream out(out_dir / "articles" / ("article" + doc.id + ".txt"), std::ios::binary);
        if (!out) throw CorpusError("cannot write article " + doc.id);
        out << doc.text;
    }
    save_labels(corpus.fragments, catalog, out_dir / "labels.tsv");
    save_catalog(catalog, out_dir / "catalog.tsv");
    std::ofstream counts(out_dir / "counts.tsv");
    if (!counts) throw CorpusError("cannot write counts.tsv");
    for (int k = 0; k < kNumTechniques; ++k)
        counts << catalog.name(k) << '\t' << corpus.recorded.counts[static_cast<std::size_t>(k)]
               << '\n';
    counts << "Total\t" << corpus.recorded.total << '\n';
}

// Flattens a corpus into aligned sentence examples (documents processed in
// order, sentences in document order).
inline std::vector<SentenceExample> split_corpus(const std::vector<Document>& documents,
                                                 const std::vector<Fragment>& fragments,
                                                 std::size_t* dropped = nullptr) {
    std::vector<SentenceExample> sentences;
    std::size_t dropped_total = 0;
    for (const auto& doc : documents) {
        auto split = sentence_split_and_align(doc, fragments);
        dropped_total += split.dropped_empty;
        for (auto& ex : split.sentences) sentences.push_back(std::move(ex));
    }
    if (dropped) *dropped = dropped_total;
    return sentences;
}

}  // namespace propdet
