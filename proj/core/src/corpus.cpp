#include "g2lstm/corpus.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

namespace g2lstm {

TokenizerKind parse_tokenizer_kind(const std::string& name) {
    if (name == "char") return TokenizerKind::chars;
    if (name == "word") return TokenizerKind::words;
    throw std::invalid_argument("unknown tokenizer '" + name + "' (expected char|word)");
}

std::string tokenizer_kind_name(TokenizerKind kind) {
    return kind == TokenizerKind::chars ? "char" : "word";
}

namespace {

std::size_t utf8_sequence_length(unsigned char lead) {
    if (lead < 0x80) return 1;
    if ((lead & 0xe0) == 0xc0) return 2;
    if ((lead & 0xf0) == 0xe0) return 3;
    if ((lead & 0xf8) == 0xf0) return 4;
    return 0;
}

}  // namespace

std::vector<std::string> tokenize_chars(const std::string& text) {
    std::vector<std::string> tokens;
    tokens.reserve(text.size());
    std::size_t i = 0;
    while (i < text.size()) {
        const std::size_t len = utf8_sequence_length(static_cast<unsigned char>(text[i]));
        if (len == 0 || i + len > text.size()) {
            throw std::runtime_error("malformed UTF-8 at byte offset " + std::to_string(i));
        }
        for (std::size_t k = 1; k < len; ++k) {
            if ((static_cast<unsigned char>(text[i + k]) & 0xc0) != 0x80) {
                throw std::runtime_error("malformed UTF-8 at byte offset " + std::to_string(i + k));
            }
        }
        tokens.emplace_back(text.substr(i, len));
        i += len;
    }
    return tokens;
}

std::vector<std::string> tokenize_words(const std::string& text) {
    std::vector<std::string> tokens;
    std::istringstream lines(text);
    std::string line;
    while (std::getline(lines, line)) {
        std::istringstream ws(line);
        std::string tok;
        while (ws >> tok) tokens.push_back(tok);
        tokens.push_back(Vocabulary::kEos);
    }
    return tokens;
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write file: " + path);
    out << text;
}

Corpus build_corpus(const std::string& train_path, const std::string& valid_path,
                    const std::string& test_path, TokenizerKind kind, std::size_t min_freq) {
    const std::string train_text = read_text_file(train_path);
    const std::string valid_text = read_text_file(valid_path);
    const std::string test_text = read_text_file(test_path);

    auto tokenize = [&](const std::string& text) {
        return kind == TokenizerKind::chars ? tokenize_chars(text) : tokenize_words(text);
    };
    const std::vector<std::string> train_tokens = tokenize(train_text);
    if (train_tokens.empty()) throw std::runtime_error("empty train split: " + train_path);

    std::vector<std::string> kept;
    if (kind == TokenizerKind::words && min_freq > 1) {
        std::unordered_map<std::string, std::size_t> freq;
        for (const auto& t : train_tokens) ++freq[t];
        for (const auto& t : train_tokens) {
            if (freq[t] >= min_freq) kept.push_back(t);
        }
    } else {
        kept = train_tokens;
    }

    Corpus corpus;
    corpus.tokenizer_kind = kind;
    corpus.vocab = Vocabulary::build(kept);

    auto to_ids = [&](const std::vector<std::string>& toks) {
        std::vector<std::int32_t> ids;
        ids.reserve(toks.size());
        for (const auto& t : toks) ids.push_back(corpus.vocab.lookup(t));
        return ids;
    };
    corpus.train = to_ids(train_tokens);
    corpus.valid = to_ids(tokenize(valid_text));
    corpus.test = to_ids(tokenize(test_text));
    return corpus;
}

std::string detokenize(const std::vector<std::int32_t>& ids, const Vocabulary& vocab,
                       TokenizerKind kind) {
    std::string out;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        const auto id = static_cast<std::size_t>(ids[i]);
        if (id >= vocab.size()) throw std::out_of_range("detokenize: id out of vocabulary");
        const std::string& tok = vocab.id_to_token[id];
        if (kind == TokenizerKind::chars) {
            out += tok;
        } else {
            if (tok == Vocabulary::kEos) {
                out += '\n';
            } else {
                if (!out.empty() && out.back() != '\n') out += ' ';
                out += tok;
            }
        }
    }
    return out;
}

}  // namespace g2lstm
