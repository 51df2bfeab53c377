#include "wganc/families.hpp"

#include <string>

#include "wganc/error.hpp"
#include "wganc/rng.hpp"

namespace wganc::families {

ad::NodeId prefix(ad::Graph& g, ad::NodeId x, size_t i) {
    const size_t t = g.value(x).cols();
    if (i < 1 || i > t) {
        throw ValueError("prefix: length " + std::to_string(i) + " out of range for width " +
                         std::to_string(t));
    }
    if (i == t) return x;  // identity; no node needed
    return g.slice_cols(x, 0, i);
}

ad::NodeId downsample(ad::Graph& g, ad::NodeId x, size_t k) { return g.downsample(x, k); }

size_t transformed_dim(const CriticBank& bank, size_t idx) {
    const InputTransform& tr = bank.critics.at(idx).transform;
    if (tr.kind == TransformKind::prefix) return tr.param;
    const size_t w = bank.image.width / tr.param;
    const size_t h = bank.image.height / tr.param;
    return w * h * bank.image.channels;
}

ad::NodeId apply_transform(ad::Graph& g, const CriticBank& bank, size_t idx, ad::NodeId x) {
    if (idx >= bank.size()) throw ValueError("apply_transform: critic index out of range");
    const InputTransform& tr = bank.critics[idx].transform;
    if (tr.kind == TransformKind::prefix) return prefix(g, x, tr.param);
    ad::NodeId d = downsample(g, x, tr.param);
    const size_t batch = g.value(d).shape[0];
    return g.reshape(d, {batch, transformed_dim(bank, idx)});
}

void FamilySpec::validate() const {
    if (hidden < 1) throw ConfigError("family: hidden units must be >= 1");
    if (kind == Kind::seq_prefix) {
        if (lengths.empty()) throw ConfigError("family: no prefix lengths given");
        size_t prev = 0;
        for (size_t len : lengths) {
            if (len <= prev) throw ConfigError("family: prefix lengths must be strictly increasing");
            prev = len;
        }
        if (lengths.back() > seq_len) {
            throw ConfigError("family: prefix length " + std::to_string(lengths.back()) +
                              " exceeds sequence length " + std::to_string(seq_len));
        }
    } else {
        if (factors.empty()) throw ConfigError("family: no downsample factors given");
        if (image.width == 0 || image.height == 0 || image.channels == 0) {
            throw ConfigError("family: image shape not set");
        }
        size_t prev = SIZE_MAX;
        for (size_t k : factors) {
            if (k == 0 || k >= prev) {
                throw ConfigError("family: downsample factors must be strictly decreasing");
            }
            if (image.width % k != 0 || image.height % k != 0) {
                throw ConfigError("family: factor " + std::to_string(k) +
                                  " does not divide the image dimensions");
            }
            prev = k;
        }
    }
}

namespace {

nn::MlpParams make_critic(size_t input_dim, size_t hidden, uint64_t seed) {
    nn::MlpSpec spec;
    spec.input_dim = input_dim;
    spec.hidden_dims = {hidden};
    spec.output_dim = 1;
    spec.hidden_activation = nn::Activation::leaky_relu;
    return nn::init_mlp(spec, seed);
}

}  // namespace

CriticBank build_seq_bank(size_t seq_len, const std::vector<size_t>& lengths, size_t hidden,
                          uint64_t seed) {
    FamilySpec spec;
    spec.kind = FamilySpec::Kind::seq_prefix;
    spec.seq_len = seq_len;
    spec.lengths = lengths;
    spec.hidden = hidden;
    spec.validate();

    CriticBank bank;
    bank.seq_len = seq_len;
    for (size_t i = 0; i < lengths.size(); ++i) {
        CriticEntry e;
        e.transform = {TransformKind::prefix, lengths[i]};
        e.params = make_critic(lengths[i], hidden, mix_seed(seed, i));
        bank.critics.push_back(std::move(e));
    }
    return bank;
}

CriticBank build_image_bank(ImageShape image, const std::vector<size_t>& factors, size_t hidden,
                            uint64_t seed) {
    FamilySpec spec;
    spec.kind = FamilySpec::Kind::image_downsample;
    spec.image = image;
    spec.factors = factors;
    spec.hidden = hidden;
    spec.validate();

    CriticBank bank;
    bank.image = image;
    for (size_t i = 0; i < factors.size(); ++i) {
        CriticEntry e;
        e.transform = {TransformKind::downsample, factors[i]};
        const size_t dim = (image.width / factors[i]) * (image.height / factors[i]) * image.channels;
        e.params = make_critic(dim, hidden, mix_seed(seed, i));
        bank.critics.push_back(std::move(e));
    }
    return bank;
}

CriticBank build_bank(const FamilySpec& spec, uint64_t seed) {
    spec.validate();
    return spec.kind == FamilySpec::Kind::seq_prefix
               ? build_seq_bank(spec.seq_len, spec.lengths, spec.hidden, seed)
               : build_image_bank(spec.image, spec.factors, spec.hidden, seed);
}

void reinit_stage(CriticBank& bank, size_t stage_index, uint64_t seed) {
    if (stage_index >= bank.size()) throw ValueError("reinit_stage: index out of range");
    nn::MlpParams& p = bank.critics[stage_index].params;
    p = nn::init_mlp(p.spec, seed);
}

}  // namespace wganc::families
