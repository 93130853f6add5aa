#include "dragwarp/diffusion.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <stdexcept>

namespace dragwarp {

DiffusionSchedule DiffusionSchedule::scaled_linear(int steps, double beta_start, double beta_end) {
    if (steps < 1 || steps > kMaxSteps) {
        throw ValidationError("schedule steps must lie in [1, " + std::to_string(kMaxSteps) + "]");
    }
    std::vector<double> cumulative(kTrainSteps);
    const double lo = std::sqrt(beta_start);
    const double hi = std::sqrt(beta_end);
    double product = 1.0;
    for (int i = 0; i < kTrainSteps; ++i) {
        const double root = lo + (hi - lo) * i / (kTrainSteps - 1);
        product *= 1.0 - root * root;
        cumulative[static_cast<std::size_t>(i)] = product;
    }

    DiffusionSchedule schedule;
    const int ratio = kTrainSteps / steps;
    schedule.alpha_bars_.push_back(cumulative.front());
    schedule.timesteps_.push_back(0);
    for (int t = 1; t <= steps; ++t) {
        const int index = (t - 1) * ratio + 1;
        schedule.timesteps_.push_back(index);
        schedule.alpha_bars_.push_back(cumulative[static_cast<std::size_t>(index)]);
    }
    return schedule;
}

std::vector<double> attention_weights(std::span<const double> q, std::span<const double> k, int n, int m, int d) {
    std::vector<double> weights(static_cast<std::size_t>(n) * m);
    const double scale = 1.0 / std::sqrt(static_cast<double>(d));
    for (int i = 0; i < n; ++i) {
        double* row = weights.data() + static_cast<std::size_t>(i) * m;
        const double* qi = q.data() + static_cast<std::size_t>(i) * d;
        double peak = -INFINITY;
        for (int j = 0; j < m; ++j) {
            const double* kj = k.data() + static_cast<std::size_t>(j) * d;
            double s = 0.0;
            for (int c = 0; c < d; ++c) s += qi[c] * kj[c];
            row[j] = s * scale;
            peak = std::max(peak, row[j]);
        }
        double total = 0.0;
        for (int j = 0; j < m; ++j) {
            row[j] = std::exp(row[j] - peak);
            total += row[j];
        }
        for (int j = 0; j < m; ++j) row[j] /= total;
    }
    return weights;
}

std::vector<double> scaled_dot_product_attention(std::span<const double> q, std::span<const double> k,
                                                 std::span<const double> v, int n, int m, int d, int dv) {
    if (q.size() != static_cast<std::size_t>(n) * d || k.size() != static_cast<std::size_t>(m) * d ||
        v.size() != static_cast<std::size_t>(m) * dv) {
        throw std::invalid_argument("attention operand shapes do not match");
    }
    const auto weights = attention_weights(q, k, n, m, d);
    std::vector<double> out(static_cast<std::size_t>(n) * dv, 0.0);
    for (int i = 0; i < n; ++i) {
        double* oi = out.data() + static_cast<std::size_t>(i) * dv;
        for (int j = 0; j < m; ++j) {
            const double w = weights[static_cast<std::size_t>(i) * m + j];
            const double* vj = v.data() + static_cast<std::size_t>(j) * dv;
            for (int c = 0; c < dv; ++c) oi[c] += w * vj[c];
        }
    }
    return out;
}

void AttentionKVCache::store(int step, int site, KeyValue kv) {
    if (!entries_.emplace(std::pair{step, site}, std::move(kv)).second) {
        throw std::logic_error("attention cache entry written twice");
    }
}

const KeyValue* AttentionKVCache::find(int step, int site) const {
    const auto it = entries_.find({step, site});
    return it == entries_.end() ? nullptr : &it->second;
}

LatentGrid ZeroPredictor::predict(const LatentGrid& z, int, const std::vector<KeyValue>*) const {
    return LatentGrid(z.width(), z.height(), z.channels(), 0.0);
}

std::vector<KeyValue> ZeroPredictor::key_values(const LatentGrid&, int) const { return {}; }

// ---------------------------------------------------------------------------
// Weights

namespace {

constexpr char kWeightsMagic[8] = {'D', 'W', 'T', 'O', 'Y', 'N', 'P', '1'};

std::vector<float> gaussian_tensor(GaussianStream& rng, std::size_t count, double scale) {
    std::vector<float> t(count);
    for (auto& v : t) v = static_cast<float>(rng.next() * scale);
    return t;
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(std::span<const std::uint8_t> bytes, std::size_t& pos) {
    if (pos + 4 > bytes.size()) throw std::runtime_error("weights file truncated");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes[pos + i]) << (8 * i);
    pos += 4;
    return v;
}

template <typename F>
void for_each_tensor(PredictorWeights& w, F&& f) {
    const auto c = static_cast<std::size_t>(w.channels);
    const auto d = static_cast<std::size_t>(w.embed_dim);
    f(w.in_proj, d * c);
    f(w.in_bias, d);
    f(w.time_embed, d);
    f(w.query, d * d);
    f(w.key, d * d);
    f(w.value, d * d);
    f(w.out_proj, c * d);
    f(w.out_bias, c);
}

std::vector<double> widen(const std::vector<float>& v) { return {v.begin(), v.end()}; }

}  // namespace

PredictorWeights generate_predictor_weights(int channels, int embed_dim, std::uint64_t seed) {
    if (channels < 1 || embed_dim < 1) {
        throw ValidationError("predictor dimensions must be positive");
    }
    PredictorWeights w;
    w.channels = channels;
    w.embed_dim = embed_dim;
    w.seed = seed;
    GaussianStream rng(seed);
    const auto c = static_cast<std::size_t>(channels);
    const auto d = static_cast<std::size_t>(embed_dim);
    w.in_proj = gaussian_tensor(rng, d * c, 1.0 / std::sqrt(static_cast<double>(c)));
    w.in_bias = gaussian_tensor(rng, d, 0.1);
    w.time_embed = gaussian_tensor(rng, d, 1.0);
    w.query = gaussian_tensor(rng, d * d, 1.0 / std::sqrt(static_cast<double>(d)));
    w.key = gaussian_tensor(rng, d * d, 1.0 / std::sqrt(static_cast<double>(d)));
    w.value = gaussian_tensor(rng, d * d, 1.0 / std::sqrt(static_cast<double>(d)));
    w.out_proj = gaussian_tensor(rng, c * d, kPredictorOutputGain / std::sqrt(static_cast<double>(d)));
    w.out_bias = gaussian_tensor(rng, c, 0.1 * kPredictorOutputGain);
    return w;
}

const PredictorWeights& default_predictor_weights() {
    static const PredictorWeights weights =
        generate_predictor_weights(kDefaultPredictorChannels, kDefaultPredictorEmbedDim, kDefaultPredictorSeed);
    return weights;
}

std::vector<std::uint8_t> serialize_weights(const PredictorWeights& weights) {
    std::vector<std::uint8_t> out(std::begin(kWeightsMagic), std::end(kWeightsMagic));
    put_u32(out, 4);
    put_u32(out, static_cast<std::uint32_t>(weights.channels));
    put_u32(out, static_cast<std::uint32_t>(weights.embed_dim));
    put_u32(out, static_cast<std::uint32_t>(weights.seed & 0xffffffffu));
    put_u32(out, static_cast<std::uint32_t>(weights.seed >> 32));
    auto copy = weights;
    for_each_tensor(copy, [&](std::vector<float>& t, std::size_t expected) {
        if (t.size() != expected) throw std::invalid_argument("predictor tensor has wrong size");
        for (float f : t) {
            std::uint32_t bits = 0;
            std::memcpy(&bits, &f, sizeof bits);
            put_u32(out, bits);
        }
    });
    return out;
}

PredictorWeights deserialize_weights(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < sizeof kWeightsMagic || !std::equal(std::begin(kWeightsMagic), std::end(kWeightsMagic), bytes.begin())) {
        throw std::runtime_error("not a predictor weights file (bad magic)");
    }
    std::size_t pos = sizeof kWeightsMagic;
    const auto table = get_u32(bytes, pos);
    if (table < 4) throw std::runtime_error("weights dimension table too short");
    std::vector<std::uint32_t> dims(table);
    for (auto& d : dims) d = get_u32(bytes, pos);

    PredictorWeights w;
    w.channels = static_cast<int>(dims[0]);
    w.embed_dim = static_cast<int>(dims[1]);
    w.seed = static_cast<std::uint64_t>(dims[2]) | (static_cast<std::uint64_t>(dims[3]) << 32);
    if (w.channels < 1 || w.embed_dim < 1 || w.channels > 4096 || w.embed_dim > 4096) {
        throw std::runtime_error("weights dimensions out of range");
    }
    for_each_tensor(w, [&](std::vector<float>& t, std::size_t count) {
        t.resize(count);
        for (auto& f : t) {
            const auto bits = get_u32(bytes, pos);
            std::memcpy(&f, &bits, sizeof f);
        }
    });
    if (pos != bytes.size()) throw std::runtime_error("trailing bytes in weights file");
    return w;
}

void save_weights(const PredictorWeights& weights, const std::filesystem::path& path) {
    const auto bytes = serialize_weights(weights);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

PredictorWeights load_weights(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return deserialize_weights(bytes);
}

std::string weights_checksum(const PredictorWeights& weights) {
    const auto bytes = serialize_weights(weights);
    const auto crc = crc32(0L, bytes.data(), static_cast<uInt>(bytes.size()));
    char buf[9];
    std::snprintf(buf, sizeof buf, "%08lx", static_cast<unsigned long>(crc));
    return buf;
}

// ---------------------------------------------------------------------------
// Toy predictor

ToyNoisePredictor::ToyNoisePredictor(const PredictorWeights& weights)
    : channels_(weights.channels),
      dim_(weights.embed_dim),
      in_proj_(widen(weights.in_proj)),
      in_bias_(widen(weights.in_bias)),
      time_embed_(widen(weights.time_embed)),
      query_(widen(weights.query)),
      key_(widen(weights.key)),
      value_(widen(weights.value)),
      out_proj_(widen(weights.out_proj)),
      out_bias_(widen(weights.out_bias)) {}

std::vector<double> ToyNoisePredictor::embed(const LatentGrid& z, int timestep, int& tokens) const {
    if (z.channels() != channels_) {
        throw ValidationError("latent has " + std::to_string(z.channels()) + " channels, predictor expects " +
                              std::to_string(channels_));
    }
    const int pw = (z.width() + 1) / 2;
    const int ph = (z.height() + 1) / 2;
    tokens = pw * ph;
    const double tau = static_cast<double>(timestep) / DiffusionSchedule::kTrainSteps;

    std::vector<double> embedded(static_cast<std::size_t>(tokens) * dim_);
    std::vector<double> pooled(static_cast<std::size_t>(channels_));
    for (int ty = 0; ty < ph; ++ty) {
        for (int tx = 0; tx < pw; ++tx) {
            std::fill(pooled.begin(), pooled.end(), 0.0);
            int count = 0;
            for (int y = 2 * ty; y < std::min(2 * ty + 2, z.height()); ++y) {
                for (int x = 2 * tx; x < std::min(2 * tx + 2, z.width()); ++x) {
                    const auto v = z.at(x, y);
                    for (int c = 0; c < channels_; ++c) pooled[c] += v[c];
                    ++count;
                }
            }
            for (auto& p : pooled) p /= count;
            double* e = embedded.data() + static_cast<std::size_t>(ty * pw + tx) * dim_;
            for (int i = 0; i < dim_; ++i) {
                double s = in_bias_[i] + tau * time_embed_[i];
                for (int c = 0; c < channels_; ++c) s += in_proj_[static_cast<std::size_t>(i) * channels_ + c] * pooled[c];
                e[i] = s;
            }
        }
    }
    return embedded;
}

void ToyNoisePredictor::project(std::span<const double> tokens_in, int tokens, const std::vector<double>& weight,
                                std::vector<double>& out) const {
    out.assign(static_cast<std::size_t>(tokens) * dim_, 0.0);
    for (int n = 0; n < tokens; ++n) {
        const double* in = tokens_in.data() + static_cast<std::size_t>(n) * dim_;
        double* o = out.data() + static_cast<std::size_t>(n) * dim_;
        for (int i = 0; i < dim_; ++i) {
            double s = 0.0;
            for (int j = 0; j < dim_; ++j) s += weight[static_cast<std::size_t>(i) * dim_ + j] * in[j];
            o[i] = s;
        }
    }
}

std::vector<KeyValue> ToyNoisePredictor::key_values(const LatentGrid& z, int timestep) const {
    int tokens = 0;
    const auto embedded = embed(z, timestep, tokens);
    KeyValue kv;
    kv.tokens = tokens;
    kv.dim = dim_;
    project(embedded, tokens, key_, kv.keys);
    project(embedded, tokens, value_, kv.values);
    return {std::move(kv)};
}

LatentGrid ToyNoisePredictor::predict(const LatentGrid& z, int timestep, const std::vector<KeyValue>* injected) const {
    int tokens = 0;
    const auto embedded = embed(z, timestep, tokens);

    std::vector<double> queries;
    project(embedded, tokens, query_, queries);

    KeyValue own;
    const KeyValue* kv = nullptr;
    if (injected != nullptr) {
        if (injected->size() != 1) throw std::invalid_argument("expected keys/values for exactly one attention site");
        kv = &injected->front();
        if (kv->dim != dim_ || kv->keys.size() != static_cast<std::size_t>(kv->tokens) * dim_ ||
            kv->values.size() != kv->keys.size()) {
            throw std::invalid_argument("injected keys/values have the wrong shape");
        }
    } else {
        own.tokens = tokens;
        own.dim = dim_;
        project(embedded, tokens, key_, own.keys);
        project(embedded, tokens, value_, own.values);
        kv = &own;
    }

    auto hidden = scaled_dot_product_attention(queries, kv->keys, kv->values, tokens, kv->tokens, dim_, dim_);
    for (std::size_t i = 0; i < hidden.size(); ++i) hidden[i] += embedded[i];

    const int pw = (z.width() + 1) / 2;
    LatentGrid eps(z.width(), z.height(), z.channels());
    std::vector<double> mixed(static_cast<std::size_t>(channels_));
    for (int n = 0; n < tokens; ++n) {
        const double* h = hidden.data() + static_cast<std::size_t>(n) * dim_;
        for (int c = 0; c < channels_; ++c) {
            double s = out_bias_[c];
            for (int i = 0; i < dim_; ++i) s += out_proj_[static_cast<std::size_t>(c) * dim_ + i] * h[i];
            mixed[c] = s;
        }
        const int tx = n % pw;
        const int ty = n / pw;
        for (int y = 2 * ty; y < std::min(2 * ty + 2, z.height()); ++y) {
            for (int x = 2 * tx; x < std::min(2 * tx + 2, z.width()); ++x) {
                eps.set(x, y, mixed);
            }
        }
    }
    return eps;
}

// ---------------------------------------------------------------------------
// Autoencoder

ToyAutoencoder::ToyAutoencoder(int factor) : factor_(factor) {
    if (factor < 1) throw ValidationError("autoencoder factor must be at least 1");
}

LatentGrid ToyAutoencoder::encode(const LatentGrid& image) const {
    const int f = factor_;
    const int lw = (image.width() + f - 1) / f;
    const int lh = (image.height() + f - 1) / f;
    LatentGrid latent(lw, lh, image.channels());
    const double inv = 1.0 / (f * f);
    for (int ly = 0; ly < lh; ++ly) {
        for (int lx = 0; lx < lw; ++lx) {
            auto cell = latent.at(lx, ly);
            for (int dy = 0; dy < f; ++dy) {
                const int y = std::min(ly * f + dy, image.height() - 1);
                for (int dx = 0; dx < f; ++dx) {
                    const int x = std::min(lx * f + dx, image.width() - 1);
                    const auto v = image.at(x, y);
                    for (std::size_t c = 0; c < cell.size(); ++c) cell[c] += v[c];
                }
            }
            for (auto& v : cell) v *= inv;
        }
    }
    return latent;
}

LatentGrid ToyAutoencoder::decode(const LatentGrid& latent, int width, int height) const {
    const int f = factor_;
    const int fw = latent.width() * f;
    const int fh = latent.height() * f;
    if (width < 1 || height < 1 || width > fw || height > fh) {
        throw ValidationError("decode size does not match latent size");
    }
    const int channels = latent.channels();
    LatentGrid full(fw, fh, channels);
    const auto sample_axis = [f](int pixel, int cells, int& i0, int& i1, double& frac) {
        // Latent cell i is centred on pixel (i + 0.5) f - 0.5.
        const double pos = std::clamp((pixel + 0.5) / f - 0.5, 0.0, static_cast<double>(cells - 1));
        i0 = static_cast<int>(std::floor(pos));
        i1 = std::min(i0 + 1, cells - 1);
        frac = pos - i0;
    };
    for (int y = 0; y < fh; ++y) {
        int y0, y1;
        double fy;
        sample_axis(y, latent.height(), y0, y1, fy);
        for (int x = 0; x < fw; ++x) {
            int x0, x1;
            double fx;
            sample_axis(x, latent.width(), x0, x1, fx);
            for (int c = 0; c < channels; ++c) {
                const double top = (1 - fx) * latent.at(x0, y0, c) + fx * latent.at(x1, y0, c);
                const double bottom = (1 - fx) * latent.at(x0, y1, c) + fx * latent.at(x1, y1, c);
                full.at(x, y, c) = (1 - fy) * top + fy * bottom;
            }
        }
    }

    LatentGrid out(width, height, channels);
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) out.set(x, y, full.at(x, y));
    }
    // Shift each block so its edge-padded mean reproduces the latent cell.
    const auto block_means = encode(out);
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            for (int c = 0; c < channels; ++c) {
                out.at(x, y, c) += latent.at(x / f, y / f, c) - block_means.at(x / f, y / f, c);
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Inversion and sampling

namespace {

void require_valued(const LatentGrid& z, const char* what) {
    if (z.null_count() != 0) throw ValidationError(std::string(what) + " must not contain null cells");
}

void cache_step(AttentionKVCache* cache, int step, const LatentGrid& z, int timestep, const NoisePredictor& predictor) {
    if (cache == nullptr || predictor.attention_sites() == 0) return;
    auto kvs = predictor.key_values(z, timestep);
    for (std::size_t site = 0; site < kvs.size(); ++site) {
        cache->store(step, static_cast<int>(site), std::move(kvs[site]));
    }
}

}  // namespace

std::vector<LatentGrid> invert_range(const LatentGrid& z, int from, int to, const DiffusionSchedule& schedule,
                                     const NoisePredictor& predictor, AttentionKVCache* cache) {
    require_valued(z, "inversion input");
    if (from < 0 || to > schedule.steps() || from > to) {
        throw std::out_of_range("inversion step range outside the schedule");
    }
    std::vector<LatentGrid> trajectory{z};
    trajectory.reserve(static_cast<std::size_t>(to - from + 1));
    for (int t = from + 1; t <= to; ++t) {
        const LatentGrid& prev = trajectory.back();
        const LatentGrid eps = predictor.predict(prev, schedule.timestep(t));
        if (!eps.same_shape(prev)) throw std::logic_error("predictor output shape differs from its input");

        const double a_prev = schedule.alpha_bar(t - 1);
        const double a_t = schedule.alpha_bar(t);
        const double scale = std::sqrt(a_t / a_prev);
        const double noise_prev = std::sqrt(1.0 - a_prev);
        const double noise_t = std::sqrt(1.0 - a_t);

        LatentGrid next(prev.width(), prev.height(), prev.channels());
        const auto in = prev.data();
        const auto e = eps.data();
        auto out = next.data();
        for (std::size_t i = 0; i < out.size(); ++i) {
            out[i] = scale * (in[i] - noise_prev * e[i]) + noise_t * e[i];
        }
        cache_step(cache, t, next, schedule.timestep(t), predictor);
        trajectory.push_back(std::move(next));
    }
    return trajectory;
}

InversionResult invert(const LatentGrid& z0, const DiffusionSchedule& schedule, const NoisePredictor& predictor) {
    InversionResult result;
    result.trajectory = invert_range(z0, 0, schedule.steps(), schedule, predictor, &result.cache);
    return result;
}

LatentGrid sample(const LatentGrid& z_start, int start_step, const DiffusionSchedule& schedule,
                  const NoisePredictor& predictor, const AttentionKVCache* cache, const SamplingOptions& options) {
    require_valued(z_start, "sampling input");
    if (start_step < 0 || start_step > schedule.steps()) {
        throw std::out_of_range("sampling start step outside the schedule");
    }
    const double var = options.sigma * options.sigma;
    for (int t = start_step; t >= 1; --t) {
        if (var > 1.0 - schedule.alpha_bar(t - 1)) {
            throw ValidationError("sigma^2 exceeds 1 - alpha_bar at step " + std::to_string(t - 1));
        }
    }

    GaussianStream noise(options.seed);
    LatentGrid z = z_start;
    std::vector<KeyValue> injected;
    for (int t = start_step, index = 0; t >= 1; --t, ++index) {
        const bool substitute = options.cp_enabled && index >= options.cp_start_step && predictor.attention_sites() > 0;
        if (substitute) {
            injected.clear();
            for (int site = 0; site < predictor.attention_sites(); ++site) {
                const KeyValue* kv = cache != nullptr ? cache->find(t, site) : nullptr;
                if (kv == nullptr) {
                    throw std::runtime_error("missing attention cache entry for step " + std::to_string(t) + ", site " +
                                             std::to_string(site));
                }
                injected.push_back(*kv);
            }
        }
        const LatentGrid eps = predictor.predict(z, schedule.timestep(t), substitute ? &injected : nullptr);

        const double a_t = schedule.alpha_bar(t);
        const double a_prev = schedule.alpha_bar(t - 1);
        const double sqrt_a_t = std::sqrt(a_t);
        const double noise_t = std::sqrt(1.0 - a_t);
        const double sqrt_a_prev = std::sqrt(a_prev);
        const double direction = std::sqrt(1.0 - a_prev - var);

        auto data = z.data();
        const auto e = eps.data();
        for (std::size_t i = 0; i < data.size(); ++i) {
            const double x0 = (data[i] - noise_t * e[i]) / sqrt_a_t;
            double next = sqrt_a_prev * x0 + direction * e[i];
            if (var > 0.0) next += var * noise.next();
            data[i] = next;
        }
    }
    return z;
}

double relative_l2(const LatentGrid& a, const LatentGrid& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("relative_l2 on grids of different shape");
    double diff = 0.0;
    double ref = 0.0;
    const auto x = a.data();
    const auto y = b.data();
    for (std::size_t i = 0; i < x.size(); ++i) {
        diff += (x[i] - y[i]) * (x[i] - y[i]);
        ref += y[i] * y[i];
    }
    return ref > 0.0 ? std::sqrt(diff / ref) : std::sqrt(diff);
}

}  // namespace dragwarp
