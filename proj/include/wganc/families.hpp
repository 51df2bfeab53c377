#pragma once

#include <cstdint>
#include <vector>

#include "wganc/graph.hpp"
#include "wganc/nn.hpp"

namespace wganc::families {

// Nested critic classes are realized by input restriction: a critic over a
// prefix (or a coarser image) is a special case of one over the full input
// that ignores the rest, so F_i is contained in F_{i+1} by construction.
enum class TransformKind { prefix, downsample };

struct InputTransform {
    TransformKind kind = TransformKind::prefix;
    size_t param = 1;  // prefix length, or downsampling factor
};

struct ImageShape {
    size_t width = 0, height = 0, channels = 0;
};

struct CriticEntry {
    InputTransform transform;
    nn::MlpParams params;
};

// Ordered coarse-to-fine: prefix lengths strictly increase, downsample
// factors strictly decrease.
struct CriticBank {
    std::vector<CriticEntry> critics;
    size_t seq_len = 0;  // prefix banks
    ImageShape image;    // downsample banks

    size_t size() const { return critics.size(); }
};

// First i columns of [batch, T]; differentiable slice.
ad::NodeId prefix(ad::Graph& g, ad::NodeId x, size_t i);

// Block means of [batch, W, H, C]; wrapper over the graph primitive.
ad::NodeId downsample(ad::Graph& g, ad::NodeId x, size_t k);

// Applies critic idx's restriction; image outputs are flattened to
// [batch, (W/k)*(H/k)*C] for the MLP.
ad::NodeId apply_transform(ad::Graph& g, const CriticBank& bank, size_t idx, ad::NodeId x);

size_t transformed_dim(const CriticBank& bank, size_t idx);

struct FamilySpec {
    enum class Kind { seq_prefix, image_downsample };
    Kind kind = Kind::seq_prefix;
    size_t seq_len = 64;
    std::vector<size_t> lengths;  // strictly increasing, max <= seq_len
    ImageShape image;
    std::vector<size_t> factors;  // strictly decreasing, each divides width/height
    size_t hidden = 128;

    void validate() const;
};

CriticBank build_seq_bank(size_t seq_len, const std::vector<size_t>& lengths, size_t hidden,
                          uint64_t seed);
CriticBank build_image_bank(ImageShape image, const std::vector<size_t>& factors, size_t hidden,
                            uint64_t seed);
CriticBank build_bank(const FamilySpec& spec, uint64_t seed);

// Fresh init for one critic, others untouched. Deterministic per seed.
void reinit_stage(CriticBank& bank, size_t stage_index, uint64_t seed);

}  // namespace wganc::families
