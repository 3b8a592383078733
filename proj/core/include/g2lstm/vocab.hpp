#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

namespace g2lstm {

/// Token table with dense ids. Ids 0 and 1 are the <unk> and <eos> specials.
struct Vocabulary {
    std::vector<std::string> id_to_token;
    std::unordered_map<std::string, std::int32_t> token_to_id;
    std::int32_t unk_id = 0;
    std::int32_t eos_id = 1;

    static constexpr const char* kUnk = "<unk>";
    static constexpr const char* kEos = "<eos>";

    /// Builds specials + the given tokens (duplicates of specials ignored).
    static Vocabulary build(const std::vector<std::string>& tokens);

    /// Reconstructs from a serialized token list (specials must be present).
    static Vocabulary from_token_list(std::vector<std::string> tokens);

    std::size_t size() const { return id_to_token.size(); }

    /// Id of token, or unk_id for unknown tokens.
    std::int32_t lookup(const std::string& token) const;

    bool operator==(const Vocabulary& other) const {
        return id_to_token == other.id_to_token;
    }
};

}  // namespace g2lstm
