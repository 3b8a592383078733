#include "g2lstm/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace g2lstm {

namespace {

constexpr char kMagic[4] = {'G', '2', 'L', 'M'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    out.push_back(static_cast<std::uint8_t>(v >> 24));
}

void put_f64(std::vector<std::uint8_t>& out, double d) {
    const auto bits = std::bit_cast<std::uint64_t>(d);
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
}

class Reader {
public:
    explicit Reader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

    std::size_t offset() const { return pos_; }
    std::size_t remaining() const { return bytes_.size() - pos_; }

    void need(std::size_t n, const char* what) const {
        if (pos_ + n > bytes_.size()) {
            throw std::runtime_error("checkpoint truncated at offset " + std::to_string(pos_) +
                                     " while reading " + what);
        }
    }

    std::uint32_t u32(const char* what) {
        need(4, what);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
        pos_ += 4;
        return v;
    }

    double f64(const char* what) {
        need(8, what);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
        pos_ += 8;
        return std::bit_cast<double>(v);
    }

    std::string str(std::size_t n, const char* what) {
        need(n, what);
        std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
        pos_ += n;
        return s;
    }

    void f64_block(std::vector<double>& dst, const char* what) {
        need(dst.size() * 8, what);
        for (std::size_t i = 0; i < dst.size(); ++i) {
            std::uint64_t v = 0;
            for (int k = 0; k < 8; ++k)
                v |= static_cast<std::uint64_t>(bytes_[pos_ + 8 * i + k]) << (8 * k);
            dst[i] = std::bit_cast<double>(v);
        }
        pos_ += dst.size() * 8;
    }

private:
    const std::vector<std::uint8_t>& bytes_;
    std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> save_checkpoint(const Model& model, const Vocabulary& vocab) {
    const ModelConfig& cfg = model.config;
    if (vocab.size() != cfg.vocab_size) {
        throw std::invalid_argument("save_checkpoint: vocabulary size " +
                                    std::to_string(vocab.size()) + " != model vocab_size " +
                                    std::to_string(cfg.vocab_size));
    }

    std::vector<std::uint8_t> out;
    out.insert(out.end(), kMagic, kMagic + 4);
    put_u32(out, kVersion);
    put_u32(out, static_cast<std::uint32_t>(cfg.vocab_size));
    put_u32(out, static_cast<std::uint32_t>(cfg.embed_dim));
    put_u32(out, static_cast<std::uint32_t>(cfg.hidden_dim));
    put_u32(out, static_cast<std::uint32_t>(cfg.num_layers));
    put_u32(out, static_cast<std::uint32_t>(cfg.gate_mode.kind));
    put_f64(out, cfg.gate_mode.tau);
    put_u32(out, cfg.tie_embeddings ? 1 : 0);
    put_f64(out, cfg.dropout_p);

    put_u32(out, static_cast<std::uint32_t>(vocab.size()));
    for (const std::string& tok : vocab.id_to_token) {
        put_u32(out, static_cast<std::uint32_t>(tok.size()));
        out.insert(out.end(), tok.begin(), tok.end());
    }

    for_each_tensor(model, [&](const std::string&, const std::vector<double>& data) {
        for (double d : data) put_f64(out, d);
    });
    return out;
}

LoadedCheckpoint load_checkpoint(const std::vector<std::uint8_t>& bytes) {
    Reader r(bytes);
    r.need(4, "magic");
    if (std::memcmp(bytes.data(), kMagic, 4) != 0) {
        throw std::runtime_error("checkpoint: bad magic at offset 0");
    }
    const std::string _ = r.str(4, "magic");
    const std::uint32_t version = r.u32("version");
    if (version != kVersion) {
        throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version) +
                                 " at offset 4");
    }

    ModelConfig cfg;
    cfg.vocab_size = r.u32("vocab_size");
    cfg.embed_dim = r.u32("embed_dim");
    cfg.hidden_dim = r.u32("hidden_dim");
    cfg.num_layers = r.u32("num_layers");
    const std::size_t tag_off = r.offset();
    const std::uint32_t tag = r.u32("gate_mode tag");
    if (tag > 2) {
        throw std::runtime_error("checkpoint: unknown gate mode tag " + std::to_string(tag) +
                                 " at offset " + std::to_string(tag_off));
    }
    cfg.gate_mode.kind = static_cast<GateMode::Kind>(tag);
    cfg.gate_mode.tau = r.f64("tau");
    cfg.tie_embeddings = r.u32("tie flag") != 0;
    cfg.dropout_p = r.f64("dropout_p");
    try {
        cfg.validate();
    } catch (const std::exception& e) {
        throw std::runtime_error(std::string("checkpoint: invalid header: ") + e.what());
    }

    const std::size_t count_off = r.offset();
    const std::uint32_t vocab_count = r.u32("vocabulary count");
    if (vocab_count != cfg.vocab_size) {
        throw std::runtime_error("checkpoint: vocabulary count " + std::to_string(vocab_count) +
                                 " does not match header vocab_size " +
                                 std::to_string(cfg.vocab_size) + " at offset " +
                                 std::to_string(count_off));
    }
    std::vector<std::string> tokens;
    tokens.reserve(vocab_count);
    for (std::uint32_t i = 0; i < vocab_count; ++i) {
        const std::uint32_t len = r.u32("token length");
        tokens.push_back(r.str(len, "token bytes"));
    }

    LoadedCheckpoint out;
    out.vocab = Vocabulary::from_token_list(std::move(tokens));
    Model& m = out.model;
    m.config = cfg;
    m.embedding = Matrix(cfg.vocab_size, cfg.embed_dim);
    for (std::size_t l = 0; l < cfg.num_layers; ++l) {
        const std::size_t in = l == 0 ? cfg.embed_dim : cfg.hidden_dim;
        LayerParams p;
        p.w_xi = Matrix(cfg.hidden_dim, in);
        p.w_hi = Matrix(cfg.hidden_dim, cfg.hidden_dim);
        p.w_xf = Matrix(cfg.hidden_dim, in);
        p.w_hf = Matrix(cfg.hidden_dim, cfg.hidden_dim);
        p.w_xo = Matrix(cfg.hidden_dim, in);
        p.w_ho = Matrix(cfg.hidden_dim, cfg.hidden_dim);
        p.w_xg = Matrix(cfg.hidden_dim, in);
        p.w_hg = Matrix(cfg.hidden_dim, cfg.hidden_dim);
        p.b_i = Vector(cfg.hidden_dim);
        p.b_f = Vector(cfg.hidden_dim);
        p.b_o = Vector(cfg.hidden_dim);
        p.b_g = Vector(cfg.hidden_dim);
        m.layers.push_back(std::move(p));
    }
    m.out_w = Matrix(cfg.vocab_size, cfg.hidden_dim);
    m.out_b = Vector(cfg.vocab_size);

    for_each_tensor(m, [&](const std::string& name, std::vector<double>& data) {
        r.f64_block(data, name.c_str());
    });
    if (r.remaining() != 0) {
        throw std::runtime_error("checkpoint: " + std::to_string(r.remaining()) +
                                 " trailing bytes at offset " + std::to_string(r.offset()));
    }
    if (cfg.tie_embeddings && m.out_w.flat() != m.embedding.flat()) {
        throw std::runtime_error("checkpoint: tied model has diverged out_w mirror");
    }
    return out;
}

void save_checkpoint_file(const std::string& path, const Model& model, const Vocabulary& vocab) {
    const std::vector<std::uint8_t> bytes = save_checkpoint(model, vocab);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("short write to checkpoint: " + path);
}

LoadedCheckpoint load_checkpoint_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read checkpoint: " + path);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    return load_checkpoint(bytes);
}

}  // namespace g2lstm
