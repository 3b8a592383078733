#pragma once

#include <cstdint>
#include <string>

namespace g2lstm {

/// Deterministic English-like filler text (simple grammar over a fixed
/// lexicon, Zipf-weighted word choice). Output is plain ASCII with sentence
/// and paragraph structure, at least approx_bytes long.
std::string generate_text(std::uint64_t seed, std::size_t approx_bytes);

}  // namespace g2lstm
