#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dragwarp/core.hpp"

namespace dragwarp {

/// Cumulative noise-retention coefficients for a T-step DDIM run.
///
/// Built from the scaled-linear beta schedule (sqrt-space linspace from
/// 0.00085 to 0.012 over 1000 training steps) subsampled with "leading"
/// spacing and an offset of one, as latent-diffusion pipelines do. Index 0 is
/// the clean level and equals the first training coefficient (not 1).
class DiffusionSchedule {
public:
    static constexpr int kTrainSteps = 1000;
    static constexpr int kMaxSteps = kMaxInversionSteps;

    static DiffusionSchedule scaled_linear(int steps, double beta_start = 0.00085, double beta_end = 0.012);

    int steps() const { return static_cast<int>(alpha_bars_.size()) - 1; }
    /// t in [0, steps()].
    double alpha_bar(int t) const { return alpha_bars_.at(static_cast<std::size_t>(t)); }
    /// Training timestep index for t in [1, steps()].
    int timestep(int t) const { return timesteps_.at(static_cast<std::size_t>(t)); }

private:
    std::vector<double> alpha_bars_;
    std::vector<int> timesteps_;
};

/// Keys and values of one attention site: tokens x dim, row-major.
struct KeyValue {
    int tokens = 0;
    int dim = 0;
    std::vector<double> keys;
    std::vector<double> values;
};

/// softmax(Q K^T / sqrt(d)) V for row-major Q (n x d), K (m x d), V (m x dv).
std::vector<double> scaled_dot_product_attention(std::span<const double> q, std::span<const double> k,
                                                 std::span<const double> v, int n, int m, int d, int dv);

/// Softmax rows of Q K^T / sqrt(d), n x m.
std::vector<double> attention_weights(std::span<const double> q, std::span<const double> k, int n, int m, int d);

/// Per-step, per-site key/value store written during inversion and read
/// during sampling.
class AttentionKVCache {
public:
    /// Throws std::logic_error when (step, site) was already written.
    void store(int step, int site, KeyValue kv);
    const KeyValue* find(int step, int site) const;
    std::size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }

private:
    std::map<std::pair<int, int>, KeyValue> entries_;
};

class NoisePredictor {
public:
    virtual ~NoisePredictor() = default;

    virtual int attention_sites() const = 0;
    /// Noise estimate for latent `z` at training timestep `timestep`. When
    /// `injected` is given it supplies one KeyValue per attention site that
    /// replaces the site's own keys and values.
    virtual LatentGrid predict(const LatentGrid& z, int timestep, const std::vector<KeyValue>* injected = nullptr) const = 0;
    /// Keys and values each attention site would compute for `z`.
    virtual std::vector<KeyValue> key_values(const LatentGrid& z, int timestep) const = 0;
};

/// Predicts zero noise everywhere; has no attention sites.
class ZeroPredictor final : public NoisePredictor {
public:
    int attention_sites() const override { return 0; }
    LatentGrid predict(const LatentGrid& z, int timestep, const std::vector<KeyValue>* injected = nullptr) const override;
    std::vector<KeyValue> key_values(const LatentGrid& z, int timestep) const override;
};

/// Frozen weights of the toy predictor, stored as float32.
struct PredictorWeights {
    int channels = 0;
    int embed_dim = 0;
    std::uint64_t seed = 0;
    std::vector<float> in_proj;     // embed_dim x channels
    std::vector<float> in_bias;     // embed_dim
    std::vector<float> time_embed;  // embed_dim
    std::vector<float> query;       // embed_dim x embed_dim
    std::vector<float> key;         // embed_dim x embed_dim
    std::vector<float> value;       // embed_dim x embed_dim
    std::vector<float> out_proj;    // channels x embed_dim
    std::vector<float> out_bias;    // channels

    friend bool operator==(const PredictorWeights&, const PredictorWeights&) = default;
};

inline constexpr std::uint64_t kDefaultPredictorSeed = 20240527;
inline constexpr int kDefaultPredictorChannels = 3;
inline constexpr int kDefaultPredictorEmbedDim = 16;
/// Scale of the output projection. Small noise estimates keep the
/// recompute-at-a-different-latent error of a 10-step round trip near 5e-4.
inline constexpr double kPredictorOutputGain = 2.5e-4;

PredictorWeights generate_predictor_weights(int channels, int embed_dim, std::uint64_t seed);
const PredictorWeights& default_predictor_weights();

// Golden weights file: 8-byte magic "DWTOYNP1", uint32 LE table length n,
// n uint32 LE entries {channels, embed_dim, seed_lo, seed_hi}, then the
// tensors as little-endian float32 in declaration order.
std::vector<std::uint8_t> serialize_weights(const PredictorWeights& weights);
PredictorWeights deserialize_weights(std::span<const std::uint8_t> bytes);
void save_weights(const PredictorWeights& weights, const std::filesystem::path& path);
PredictorWeights load_weights(const std::filesystem::path& path);
/// CRC-32 of the serialized weights, as 8 lowercase hex digits.
std::string weights_checksum(const PredictorWeights& weights);

/// pool 2x -> embed (+ timestep) -> single-head self-attention (residual)
/// -> channel mix -> nearest 2x upsample.
class ToyNoisePredictor final : public NoisePredictor {
public:
    explicit ToyNoisePredictor(const PredictorWeights& weights);

    int attention_sites() const override { return 1; }
    LatentGrid predict(const LatentGrid& z, int timestep, const std::vector<KeyValue>* injected = nullptr) const override;
    std::vector<KeyValue> key_values(const LatentGrid& z, int timestep) const override;

    int channels() const { return channels_; }
    int embed_dim() const { return dim_; }

private:
    std::vector<double> embed(const LatentGrid& z, int timestep, int& tokens) const;
    void project(std::span<const double> tokens_in, int tokens, const std::vector<double>& weight,
                 std::vector<double>& out) const;

    int channels_;
    int dim_;
    std::vector<double> in_proj_, in_bias_, time_embed_, query_, key_, value_, out_proj_, out_bias_;
};

/// Block-mean encoder and bilinear decoder standing in for a VAE.
class ToyAutoencoder {
public:
    explicit ToyAutoencoder(int factor = 4);

    int factor() const { return factor_; }
    /// Edge-pads to a multiple of the factor, then averages each block.
    LatentGrid encode(const LatentGrid& image) const;
    /// Bilinear upsampling followed by a per-block offset so that each
    /// block's mean equals its latent cell; cropped to width x height.
    LatentGrid decode(const LatentGrid& latent, int width, int height) const;

private:
    int factor_;
};

struct InversionResult {
    std::vector<LatentGrid> trajectory;  // z_0 .. z_T
    AttentionKVCache cache;
};

/// Deterministic DDIM inversion of `z0` through every schedule step. After
/// step t the keys/values of z_t at timestep t are cached under (t, site),
/// which is exactly what sampling step t evaluates on an unmodified latent.
InversionResult invert(const LatentGrid& z0, const DiffusionSchedule& schedule, const NoisePredictor& predictor);

/// Continues inversion from `z` at step `from` up to step `to`. Returns
/// z_from .. z_to. Writes keys/values into `cache` when it is non-null.
std::vector<LatentGrid> invert_range(const LatentGrid& z, int from, int to, const DiffusionSchedule& schedule,
                                     const NoisePredictor& predictor, AttentionKVCache* cache);

struct SamplingOptions {
    bool cp_enabled = false;
    /// Substitution is active for sampling step indices >= this (0 = all).
    int cp_start_step = 0;
    double sigma = 0.0;
    std::uint64_t seed = 0;
};

/// DDIM sampling from `z_start` at step `start_step` down to z_0. With
/// consistency preservation active, every attention site uses the cached
/// keys/values of the matching inversion step.
LatentGrid sample(const LatentGrid& z_start, int start_step, const DiffusionSchedule& schedule,
                  const NoisePredictor& predictor, const AttentionKVCache* cache, const SamplingOptions& options);

/// Relative L2 distance |a - b| / |b|; absolute when |b| = 0.
double relative_l2(const LatentGrid& a, const LatentGrid& b);

}  // namespace dragwarp
