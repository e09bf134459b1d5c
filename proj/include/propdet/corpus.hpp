#pragma once

#include "propdet/common.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace propdet {

struct CorpusError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Document {
    std::string id;
    std::string text;  // full article, character-indexed from 0
};

// A labeled character span. `technique` is 0-based (0..17); the
// corresponding token class is technique + 1.
struct Fragment {
    std::string doc_id;
    std::int64_t begin = 0;  // inclusive
    std::int64_t end = 0;    // exclusive
    int technique = 0;
};

struct Token {
    std::string text;
    std::int64_t begin = 0;  // offsets into the document, not the sentence
    std::int64_t end = 0;
};

struct SentenceExample {
    std::string doc_id;
    std::int64_t sent_begin = 0;
    std::int64_t sent_end = 0;
    std::vector<Token> tokens;
    // index 0 = any propaganda, 1..18 = per-technique presence
    std::array<int, kNumClasses> sentence_labels{};
    // per-token class in 0..18 (0 = none)
    std::vector<int> token_labels;
};

class TechniqueCatalog {
public:
    TechniqueCatalog() = default;

    TechniqueCatalog(std::vector<std::string> names, std::vector<std::string> definitions)
        : names_(std::move(names)), definitions_(std::move(definitions)) {
        if (names_.size() != kNumTechniques || definitions_.size() != kNumTechniques)
            throw CorpusError("catalog must hold exactly 18 techniques");
        for (std::size_t i = 0; i < names_.size(); ++i) {
            if (definitions_[i].empty())
                throw CorpusError("catalog definition for '" + names_[i] + "' is empty");
            auto key = normalize_name(names_[i]);
            if (!index_.emplace(key, static_cast<int>(i)).second)
                throw CorpusError("duplicate technique name '" + names_[i] + "'");
        }
    }

    int size() const { return static_cast<int>(names_.size()); }
    const std::string& name(int technique) const { return names_.at(technique); }
    const std::string& definition(int technique) const { return definitions_.at(technique); }

    // Returns the 0-based technique index, or nullopt for unknown names.
    // Underscores and spaces are interchangeable so on-disk label files may
    // use either convention.
    std::optional<int> resolve(std::string_view name) const {
        auto it = index_.find(normalize_name(name));
        if (it == index_.end()) return std::nullopt;
        return it->second;
    }

    static std::string normalize_name(std::string_view name) {
        std::string key(name);
        std::replace(key.begin(), key.end(), '_', ' ');
        return key;
    }

private:
    std::vector<std::string> names_;
    std::vector<std::string> definitions_;
    std::map<std::string, int> index_;
};

// The 18 techniques in canonical index order, with short working definitions.
inline TechniqueCatalog default_catalog() {
    return TechniqueCatalog(
        {
            "Loaded Language",
            "Name Calling,Labeling",
            "Repetition",
            "Doubt",
            "Exaggeration,Minimisation",
            "Flag-Waving",
            "Appeal to fear-prejudice",
            "Causal Oversimplification",
            "Slogans",
            "Black-and-White Fallacy",
            "Appeal to Authority",
            "Thought-terminating Cliches",
            "Whataboutism",
            "Reductio ad hitlerum",
            "Red Herring",
            "Straw Men",
            "Obfuscation,Intentional Vagueness,Confusion",
            "Bandwagon",
        },
        {
            "Using words and phrases with strong emotional charge to influence the reader.",
            "Attaching a label to the object of the argument to praise or smear it.",
            "Repeating the same message over and over so the audience accepts it.",
            "Questioning the credibility of someone or something without evidence.",
            "Representing something in an excessive manner or playing it down.",
            "Exploiting strong national or group feeling to justify or promote a position.",
            "Building support by instilling anxiety or panic about alternatives.",
            "Assuming a single cause for an outcome that has many causes.",
            "A brief and striking phrase that carries emotional appeal in place of argument.",
            "Presenting only two alternatives when more options exist.",
            "Citing a prominent figure as the sole support for a claim.",
            "A short phrase that discourages critical thought and ends discussion.",
            "Deflecting criticism by charging the critic with hypocrisy.",
            "Discrediting an idea by associating it with a despised group or regime.",
            "Introducing irrelevant material to divert attention from the point at issue.",
            "Refuting a distorted version of the opponent's actual position.",
            "Deliberately unclear or vague wording that lets the audience fill in meaning.",
            "Urging acceptance of a claim because everyone else supposedly accepts it.",
        });
}

// Catalog file: one technique per line, "name<TAB>definition", '#' comments.
inline TechniqueCatalog load_catalog(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw CorpusError("cannot open catalog file: " + file.string());
    std::vector<std::string> names, defs;
    std::string line;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        auto tab = line.find('\t');
        if (tab == std::string::npos)
            throw CorpusError("catalog row " + std::to_string(row) + ": expected name<TAB>definition");
        names.push_back(line.substr(0, tab));
        defs.push_back(line.substr(tab + 1));
    }
    return TechniqueCatalog(std::move(names), std::move(defs));
}

inline void save_catalog(const TechniqueCatalog& catalog, const std::filesystem::path& file) {
    std::ofstream out(file);
    if (!out) throw CorpusError("cannot write catalog file: " + file.string());
    for (int i = 0; i < catalog.size(); ++i)
        out << catalog.name(i) << '\t' << catalog.definition(i) << '\n';
}

// Articles live one per file as article<id>.txt, sorted by filename for a
// deterministic document order.
inline std::vector<Document> load_articles(const std::filesystem::path& articles_dir) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(articles_dir))
        throw CorpusError("articles directory does not exist: " + articles_dir.string());
    std::vector<Document> documents;
    std::map<std::string, std::size_t> by_id;
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(articles_dir)) {
        if (!entry.is_regular_file()) continue;
        const auto name = entry.path().filename().string();
        if (name.starts_with("article") && name.ends_with(".txt")) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& path : files) {
        const auto name = path.filename().string();
        Document doc;
        doc.id = name.substr(7, name.size() - 7 - 4);
        std::ifstream in(path, std::ios::binary);
        if (!in) throw CorpusError("cannot open article file: " + path.string());
        std::ostringstream buf;
        buf << in.rdbuf();
        doc.text = buf.str();
        if (doc.text.empty()) throw CorpusError("article file is empty: " + path.string());
        if (by_id.count(doc.id)) throw CorpusError("duplicate document id: " + doc.id);
        by_id[doc.id] = documents.size();
        documents.push_back(std::move(doc));
    }
    return documents;
}

// Labels are TSV rows of doc_id, technique_name, begin_offset, end_offset.
inline std::pair<std::vector<Document>, std::vector<Fragment>> load_corpus(
    const std::filesystem::path& articles_dir, const std::filesystem::path& labels_file,
    const TechniqueCatalog& catalog) {
    std::vector<Document> documents = load_articles(articles_dir);
    std::map<std::string, std::size_t> by_id;
    for (std::size_t i = 0; i < documents.size(); ++i) by_id[documents[i].id] = i;

    std::vector<Fragment> fragments;
    std::ifstream in(labels_file);
    if (!in) throw CorpusError("cannot open labels file: " + labels_file.string());
    std::string line;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> cols;
        std::size_t pos = 0;
        while (true) {
            auto tab = line.find('\t', pos);
            if (tab == std::string::npos) {
                cols.push_back(line.substr(pos));
                break;
            }
            cols.push_back(line.substr(pos, tab - pos));
            pos = tab + 1;
        }
        const std::string where = "labels row " + std::to_string(row);
        if (cols.size() != 4)
            throw CorpusError(where + ": expected 4 tab-separated columns, got " + std::to_string(cols.size()));
        Fragment frag;
        frag.doc_id = cols[0];
        auto doc_it = by_id.find(frag.doc_id);
        if (doc_it == by_id.end())
            throw CorpusError(where + ": missing article file for doc id '" + frag.doc_id + "'");
        auto technique = catalog.resolve(cols[1]);
        if (!technique)
            throw CorpusError(where + ": unknown technique name '" + cols[1] + "'");
        frag.technique = *technique;
        try {
            frag.begin = std::stoll(cols[2]);
            frag.end = std::stoll(cols[3]);
        } catch (const std::exception&) {
            throw CorpusError(where + ": offsets are not integers");
        }
        const auto len = static_cast<std::int64_t>(documents[doc_it->second].text.size());
        if (frag.begin < 0 || frag.end > len || frag.begin >= frag.end)
            throw CorpusError(where + ": offset range [" + std::to_string(frag.begin) + ", " +
                              std::to_string(frag.end) + ") invalid for document of length " +
                              std::to_string(len));
        fragments.push_back(std::move(frag));
    }
    return {std::move(documents), std::move(fragments)};
}

inline void save_labels(const std::vector<Fragment>& fragments, const TechniqueCatalog& catalog,
                        const std::filesystem::path& file) {
    std::ofstream out(file);
    if (!out) throw CorpusError("cannot write labels file: " + file.string());
    for (const auto& frag : fragments)
        out << frag.doc_id << '\t' << catalog.name(frag.technique) << '\t' << frag.begin << '\t'
            << frag.end << '\n';
}

namespace detail {

inline bool is_word_byte(unsigned char c) {
    // multi-byte UTF-8 sequences stay inside one token
    return std::isalnum(c) != 0 || c >= 0x80;
}

}  // namespace detail

// Maximal runs of alphanumerics plus single punctuation characters, with
// document-absolute offsets.
inline std::vector<Token> tokenize(std::string_view text, std::int64_t base_offset = 0) {
    std::vector<Token> tokens;
    std::size_t i = 0;
    while (i < text.size()) {
        const auto c = static_cast<unsigned char>(text[i]);
        if (std::isspace(c)) {
            ++i;
            continue;
        }
        std::size_t j = i + 1;
        if (detail::is_word_byte(c)) {
            while (j < text.size() && detail::is_word_byte(static_cast<unsigned char>(text[j]))) ++j;
        }
        tokens.push_back(Token{std::string(text.substr(i, j - i)),
                               base_offset + static_cast<std::int64_t>(i),
                               base_offset + static_cast<std::int64_t>(j)});
        i = j;
    }
    return tokens;
}

struct SplitResult {
    std::vector<SentenceExample> sentences;
    std::size_t dropped_empty = 0;  // zero-token sentences are not kept
};

// Newline-delimited sentence segmentation with character-exact alignment of
// gold fragments onto tokens. A token takes the technique of the overlapping
// fragment with the smallest begin, ties broken by smallest technique index.
inline SplitResult sentence_split_and_align(const Document& doc,
                                            const std::vector<Fragment>& fragments) {
    SplitResult result;
    const auto text_len = static_cast<std::int64_t>(doc.text.size());
    std::int64_t line_begin = 0;
    while (line_begin <= text_len) {
        auto nl = doc.text.find('\n', static_cast<std::size_t>(line_begin));
        const std::int64_t line_end =
            nl == std::string::npos ? text_len : static_cast<std::int64_t>(nl);
        if (line_begin >= text_len && line_begin == line_end) break;

        SentenceExample ex;
        ex.doc_id = doc.id;
        ex.sent_begin = line_begin;
        ex.sent_end = line_end;
        ex.tokens = tokenize(
            std::string_view(doc.text).substr(static_cast<std::size_t>(line_begin),
                                              static_cast<std::size_t>(line_end - line_begin)),
            line_begin);
        if (ex.tokens.empty()) {
            ++result.dropped_empty;
        } else {
            ex.token_labels.assign(ex.tokens.size(), 0);
            for (std::size_t t = 0; t < ex.tokens.size(); ++t) {
                const Fragment* best = nullptr;
                for (const auto& frag : fragments) {
                    if (frag.doc_id != doc.id) continue;
                    if (frag.begin < ex.tokens[t].end && ex.tokens[t].begin < frag.end) {
                        if (!best || frag.begin < best->begin ||
                            (frag.begin == best->begin && frag.technique < best->technique))
                            best = &frag;
                    }
                }
                if (best) ex.token_labels[t] = best->technique + 1;
            }
            ex.sentence_labels.fill(0);
            for (int label : ex.token_labels)
                if (label > 0) ex.sentence_labels[label] = 1;
            for (int k = 1; k < kNumClasses; ++k)
                if (ex.sentence_labels[k]) ex.sentence_labels[0] = 1;
            result.sentences.push_back(std::move(ex));
        }
        if (nl == std::string::npos) break;
        line_begin = line_end + 1;
    }
    return result;
}

struct CorpusStatistics {
    std::array<std::int64_t, kNumTechniques> counts{};
    std::int64_t total = 0;
};

inline CorpusStatistics corpus_statistics(const std::vector<Fragment>& fragments) {
    CorpusStatistics stats;
    for (const auto& frag : fragments) {
        stats.counts.at(static_cast<std::size_t>(frag.technique)) += 1;
        stats.total += 1;
    }
    return stats;
}

}  // namespace propdet
