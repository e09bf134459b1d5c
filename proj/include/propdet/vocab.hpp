#pragma once

#include "propdet/corpus.hpp"

#include <map>
#include <string>
#include <vector>

namespace propdet {

// Token-to-id mapping. Ids 0/1 are reserved for PAD/UNK; corpus tokens are
// assigned in lexicographic order so the mapping is deterministic.
class Vocabulary {
public:
    static constexpr int kPad = 0;
    static constexpr int kUnk = 1;

    Vocabulary() : tokens_{"<pad>", "<unk>"} {}

    static Vocabulary build(const std::vector<SentenceExample>& sentences) {
        std::map<std::string, int> seen;
        for (const auto& ex : sentences)
            for (const auto& tok : ex.tokens) seen[tok.text] += 1;
        Vocabulary vocab;
        for (const auto& [text, count] : seen) {
            (void)count;  // min frequency 1
            vocab.index_[text] = static_cast<int>(vocab.tokens_.size());
            vocab.tokens_.push_back(text);
        }
        return vocab;
    }

    int size() const { return static_cast<int>(tokens_.size()); }

    int id(const std::string& token) const {
        auto it = index_.find(token);
        return it == index_.end() ? kUnk : it->second;
    }

    const std::string& token(int id) const { return tokens_.at(static_cast<std::size_t>(id)); }

    std::vector<int> encode(const std::vector<Token>& tokens) const {
        std::vector<int> ids;
        ids.reserve(tokens.size());
        for (const auto& tok : tokens) ids.push_back(id(tok.text));
        return ids;
    }

    std::vector<int> encode_text(std::string_view text) const {
        std::vector<int> ids;
        for (const auto& tok : tokenize(text)) ids.push_back(id(tok.text));
        return ids;
    }

    // Rebuild from a token list (checkpoint loading). Ids follow list order.
    static Vocabulary from_tokens(std::vector<std::string> tokens) {
        Vocabulary vocab;
        vocab.tokens_ = std::move(tokens);
        vocab.index_.clear();
        for (std::size_t i = 2; i < vocab.tokens_.size(); ++i)
            vocab.index_[vocab.tokens_[i]] = static_cast<int>(i);
        return vocab;
    }

    const std::vector<std::string>& tokens() const { return tokens_; }

private:
    std::vector<std::string> tokens_;
    std::map<std::string, int> index_;
};

}  // namespace propdet
