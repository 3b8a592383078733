#include "g2lstm/vocab.hpp"

#include <stdexcept>

namespace g2lstm {

Vocabulary Vocabulary::build(const std::vector<std::string>& tokens) {
    Vocabulary v;
    v.id_to_token = {kUnk, kEos};
    v.token_to_id = {{kUnk, 0}, {kEos, 1}};
    for (const std::string& tok : tokens) {
        if (v.token_to_id.emplace(tok, static_cast<std::int32_t>(v.id_to_token.size())).second) {
            v.id_to_token.push_back(tok);
        }
    }
    return v;
}

Vocabulary Vocabulary::from_token_list(std::vector<std::string> tokens) {
    if (tokens.size() < 2 || tokens[0] != kUnk || tokens[1] != kEos) {
        throw std::runtime_error("vocabulary: token list does not start with the specials");
    }
    Vocabulary v;
    v.id_to_token = std::move(tokens);
    for (std::size_t i = 0; i < v.id_to_token.size(); ++i) {
        if (!v.token_to_id.emplace(v.id_to_token[i], static_cast<std::int32_t>(i)).second) {
            throw std::runtime_error("vocabulary: duplicate token '" + v.id_to_token[i] + "'");
        }
    }
    return v;
}

std::int32_t Vocabulary::lookup(const std::string& token) const {
    const auto it = token_to_id.find(token);
    return it == token_to_id.end() ? unk_id : it->second;
}

}  // namespace g2lstm
