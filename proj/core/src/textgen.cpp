#include "g2lstm/textgen.hpp"

#include "g2lstm/rng.hpp"

#include <cctype>
#include <map>
#include <vector>

namespace g2lstm {

namespace {

const std::vector<std::string> kNouns = {
    "river",  "garden",  "mountain", "letter",  "window",  "harbor",   "winter",  "morning",
    "forest", "village", "journey",  "teacher", "stone",   "bridge",   "candle",  "meadow",
    "sailor", "market",  "evening",  "shadow",  "lantern", "orchard",  "valley",  "painter",
    "storm",  "harvest", "library",  "cottage", "traveler", "fiddler", "miller",  "shepherd",
    "wagon",  "chapel",  "tailor",   "baker",   "smith",    "weaver",  "hunter",  "farmer",
    "child",  "friend",  "neighbor", "stranger", "captain", "doctor",  "soldier", "merchant",
    "road",   "field",   "house",    "door",     "table",   "cloak",   "basket",  "bell",
};

const std::vector<std::string> kAdjectives = {
    "quiet", "old",    "bright", "narrow", "gentle", "distant", "golden", "heavy",
    "small", "green",  "cold",   "warm",   "silent", "broken",  "steady", "pale",
    "tall",  "young",  "weary",  "swift",  "plain",  "crooked", "tidy",   "brave",
};

const std::vector<std::string> kVerbsTrans = {
    "carried", "watched", "followed", "remembered", "crossed", "gathered", "painted",
    "opened",  "mended",  "counted",  "greeted",    "studied", "borrowed", "repaired",
    "visited", "traded",  "guarded",  "measured",   "lifted",  "sketched",
};

const std::vector<std::string> kVerbsIntrans = {
    "waited",   "slept",    "wandered", "rested",   "listened", "laughed",
    "returned", "vanished", "hesitated", "stumbled", "whistled", "paused",
};

const std::vector<std::string> kAdverbs = {
    "slowly", "quietly", "often",  "gladly",  "rarely",   "together",
    "alone",  "twice",   "gently", "finally", "suddenly", "carefully",
};

const std::vector<std::string> kPrepositions = {
    "near", "beyond", "under", "beside", "across", "behind", "toward", "within",
};

const std::vector<std::string> kConjunctions = {"and", "but", "while", "because", "until"};

const std::vector<std::string> kNames = {
    "anna", "peter", "maria", "henrik", "clara", "tomas", "ingrid", "oskar",
};

class ZipfPicker {
public:
    explicit ZipfPicker(std::size_t n) : cdf_(n) {
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            acc += 1.0 / static_cast<double>(i + 1);
            cdf_[i] = acc;
        }
        for (double& c : cdf_) c /= acc;
    }

    std::size_t pick(RngState& rng) const {
        const double u = rng.uniform();
        std::size_t lo = 0, hi = cdf_.size() - 1;
        while (lo < hi) {
            const std::size_t mid = (lo + hi) / 2;
            if (cdf_[mid] < u) {
                lo = mid + 1;
            } else {
                hi = mid;
            }
        }
        return lo;
    }

private:
    std::vector<double> cdf_;
};

const std::string& zipf_word(const std::vector<std::string>& words, RngState& rng) {
    static std::map<const void*, ZipfPicker> pickers;
    auto it = pickers.find(&words);
    if (it == pickers.end()) it = pickers.emplace(&words, ZipfPicker(words.size())).first;
    return words[it->second.pick(rng)];
}

std::string noun_phrase(RngState& rng) {
    std::string np;
    const double u = rng.uniform();
    if (u < 0.15) {
        np = zipf_word(kNames, rng);
    } else {
        np = u < 0.6 ? "the" : "a";
        np += ' ';
        if (rng.uniform() < 0.45) {
            np += zipf_word(kAdjectives, rng);
            np += ' ';
        }
        np += zipf_word(kNouns, rng);
    }
    return np;
}

std::string clause(RngState& rng) {
    std::string c = noun_phrase(rng);
    if (rng.uniform() < 0.6) {
        c += ' ';
        c += zipf_word(kVerbsTrans, rng);
        c += ' ';
        c += noun_phrase(rng);
    } else {
        c += ' ';
        c += zipf_word(kVerbsIntrans, rng);
        if (rng.uniform() < 0.4) {
            c += ' ';
            c += zipf_word(kAdverbs, rng);
        }
    }
    if (rng.uniform() < 0.35) {
        c += ' ';
        c += zipf_word(kPrepositions, rng);
        c += ' ';
        c += noun_phrase(rng);
    }
    return c;
}

std::string sentence(RngState& rng) {
    std::string s = clause(rng);
    while (rng.uniform() < 0.3) {
        if (rng.uniform() < 0.5) {
            s += ", ";
        } else {
            s += ' ';
            s += zipf_word(kConjunctions, rng);
            s += ' ';
        }
        s += clause(rng);
    }
    s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
    const double u = rng.uniform();
    s += u < 0.9 ? "." : (u < 0.96 ? "?" : "!");
    return s;
}

}  // namespace

std::string generate_text(std::uint64_t seed, std::size_t approx_bytes) {
    RngState rng(seed);
    std::string out;
    out.reserve(approx_bytes + 256);
    std::size_t sentences_in_paragraph = 0;
    while (out.size() < approx_bytes) {
        out += sentence(rng);
        ++sentences_in_paragraph;
        if (sentences_in_paragraph >= 5 && rng.uniform() < 0.3) {
            out += "\n\n";
            sentences_in_paragraph = 0;
        } else {
            out += ' ';
        }
    }
    out += '\n';
    return out;
}

}  // namespace g2lstm
