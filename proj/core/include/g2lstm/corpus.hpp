#pragma once

#include "g2lstm/vocab.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace g2lstm {

enum class TokenizerKind { chars, words };

TokenizerKind parse_tokenizer_kind(const std::string& name);
std::string tokenizer_kind_name(TokenizerKind kind);

struct Corpus {
    std::vector<std::int32_t> train, valid, test;
    Vocabulary vocab;
    TokenizerKind tokenizer_kind = TokenizerKind::chars;
};

/// Splits UTF-8 text into one token per Unicode scalar.
/// Throws std::runtime_error on malformed UTF-8.
std::vector<std::string> tokenize_chars(const std::string& text);

/// Whitespace tokenization with an <eos> token closing every line.
std::vector<std::string> tokenize_words(const std::string& text);

/// Builds the vocabulary from the train split only. In word mode, train
/// tokens with frequency < min_freq map to <unk>. Unknown valid/test tokens
/// always map to <unk>.
Corpus build_corpus(const std::string& train_path, const std::string& valid_path,
                    const std::string& test_path, TokenizerKind kind, std::size_t min_freq);

/// Inverse mapping; in char mode reproduces the exact original text for
/// fully-known ids.
std::string detokenize(const std::vector<std::int32_t>& ids, const Vocabulary& vocab,
                       TokenizerKind kind);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

}  // namespace g2lstm
