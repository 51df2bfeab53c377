#include "wganc/checkpoint.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "wganc/csvio.hpp"
#include "wganc/error.hpp"

namespace wganc::checkpoint {

namespace {

std::string hexfloat(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%a", v);
    return buf;
}

void write_tensor(std::ostream& os, const ad::Tensor& t) {
    for (size_t i = 0; i < t.numel(); ++i) {
        os << (i ? " " : "") << hexfloat(t.data[i]);
    }
    os << '\n';
}

void write_mlp_body(std::ostream& os, const nn::MlpParams& p) {
    os << "seed " << p.seed << '\n';
    os << "spec in " << p.spec.input_dim << " hidden";
    for (size_t h : p.spec.hidden_dims) os << ' ' << h;
    os << " out " << p.spec.output_dim << " act "
       << (p.spec.hidden_activation == nn::Activation::tanh ? "tanh" : "leaky_relu") << " slope "
       << hexfloat(p.spec.leaky_slope) << '\n';
    for (size_t l = 0; l < p.layer_count(); ++l) {
        os << "layer " << l << " weight " << p.weights[l].shape[0] << ' ' << p.weights[l].shape[1]
           << '\n';
        write_tensor(os, p.weights[l]);
        os << "layer " << l << " bias " << p.biases[l].shape[0] << '\n';
        write_tensor(os, p.biases[l]);
    }
}

class TokenReader {
public:
    explicit TokenReader(std::istream& in, std::string name) : in_(in), name_(std::move(name)) {}

    std::string next() {
        std::string tok;
        if (!(in_ >> tok)) throw IoError(name_ + ": unexpected end of checkpoint");
        return tok;
    }

    void expect(const std::string& want) {
        const std::string got = next();
        if (got != want) throw IoError(name_ + ": expected '" + want + "', found '" + got + "'");
    }

    uint64_t next_u64() { return std::stoull(next()); }
    size_t next_size() { return static_cast<size_t>(std::stoull(next())); }

    double next_double() {
        const std::string tok = next();
        char* end = nullptr;
        const double v = std::strtod(tok.c_str(), &end);
        if (end == tok.c_str() || *end != '\0') throw IoError(name_ + ": bad number '" + tok + "'");
        return v;
    }

private:
    std::istream& in_;
    std::string name_;
};

ad::Tensor read_tensor(TokenReader& r, std::vector<size_t> shape) {
    ad::Tensor t = ad::Tensor::zeros(std::move(shape));
    for (size_t i = 0; i < t.numel(); ++i) t.data[i] = r.next_double();
    return t;
}

nn::MlpParams read_mlp_body(TokenReader& r) {
    nn::MlpParams p;
    r.expect("seed");
    p.seed = r.next_u64();
    r.expect("spec");
    r.expect("in");
    p.spec.input_dim = r.next_size();
    r.expect("hidden");
    std::string tok = r.next();
    while (tok != "out") {
        p.spec.hidden_dims.push_back(std::stoull(tok));
        tok = r.next();
    }
    p.spec.output_dim = r.next_size();
    r.expect("act");
    const std::string act = r.next();
    p.spec.hidden_activation = act == "tanh" ? nn::Activation::tanh : nn::Activation::leaky_relu;
    r.expect("slope");
    p.spec.leaky_slope = r.next_double();
    const size_t layers = p.spec.hidden_dims.size() + 1;
    for (size_t l = 0; l < layers; ++l) {
        r.expect("layer");
        r.next_size();
        r.expect("weight");
        const size_t rows = r.next_size();
        const size_t cols = r.next_size();
        p.weights.push_back(read_tensor(r, {rows, cols}));
        r.expect("layer");
        r.next_size();
        r.expect("bias");
        p.biases.push_back(read_tensor(r, {r.next_size()}));
    }
    return p;
}

}  // namespace

void save_mlp(const std::filesystem::path& path, const nn::MlpParams& params) {
    std::ostringstream os;
    os << "wganc-mlp 1\n";
    write_mlp_body(os, params);
    os << "end\n";
    csvio::atomic_write_text(path, os.str());
}

nn::MlpParams load_mlp(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    TokenReader r(in, path.string());
    r.expect("wganc-mlp");
    r.expect("1");
    nn::MlpParams p = read_mlp_body(r);
    r.expect("end");
    return p;
}

void save_bank(const std::filesystem::path& path, const families::CriticBank& bank) {
    std::ostringstream os;
    os << "wganc-bank 1\n";
    os << "seq_len " << bank.seq_len << '\n';
    os << "image " << bank.image.width << ' ' << bank.image.height << ' ' << bank.image.channels
       << '\n';
    os << "critics " << bank.size() << '\n';
    for (const auto& c : bank.critics) {
        os << "transform "
           << (c.transform.kind == families::TransformKind::prefix ? "prefix" : "downsample") << ' '
           << c.transform.param << '\n';
        write_mlp_body(os, c.params);
    }
    os << "end\n";
    csvio::atomic_write_text(path, os.str());
}

families::CriticBank load_bank(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    TokenReader r(in, path.string());
    r.expect("wganc-bank");
    r.expect("1");
    families::CriticBank bank;
    r.expect("seq_len");
    bank.seq_len = r.next_size();
    r.expect("image");
    bank.image.width = r.next_size();
    bank.image.height = r.next_size();
    bank.image.channels = r.next_size();
    r.expect("critics");
    const size_t count = r.next_size();
    for (size_t i = 0; i < count; ++i) {
        r.expect("transform");
        const std::string kind = r.next();
        families::CriticEntry e;
        e.transform.kind = kind == "prefix" ? families::TransformKind::prefix
                                            : families::TransformKind::downsample;
        e.transform.param = r.next_size();
        e.params = read_mlp_body(r);
        bank.critics.push_back(std::move(e));
    }
    r.expect("end");
    return bank;
}

}  // namespace wganc::checkpoint
