#pragma once

#include "g2lstm/network.hpp"
#include "g2lstm/vocab.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace g2lstm {

/// Portable model container: "G2LM" magic, u32 version, header, vocabulary,
/// then every tensor in canonical order as little-endian f64. Loading bytes
/// produced by save is bit-exact.
std::vector<std::uint8_t> save_checkpoint(const Model& model, const Vocabulary& vocab);

struct LoadedCheckpoint {
    Model model;
    Vocabulary vocab;
};

/// Throws std::runtime_error naming the byte offset on bad magic, version,
/// shape, or a truncated payload.
LoadedCheckpoint load_checkpoint(const std::vector<std::uint8_t>& bytes);

void save_checkpoint_file(const std::string& path, const Model& model, const Vocabulary& vocab);
LoadedCheckpoint load_checkpoint_file(const std::string& path);

}  // namespace g2lstm
