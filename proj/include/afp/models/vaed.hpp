#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "afp/core/errors.hpp"
#include "afp/models/vae_common.hpp"
#include "afp/nn/layers.hpp"
#include "afp/nn/params.hpp"
#include "afp/nn/tensor.hpp"

namespace afp::models {

struct ConvStage {
    int channels = 0;
    int kernel = 4;
    int stride = 2;
};

struct VaedConfig {
    int latent_dim = 10;
    double beta = 4.0;
    std::vector<ConvStage> conv_spec = {{32, 4, 2}, {64, 4, 2}, {128, 4, 2}, {256, 4, 2}};
    int image_h = 64;
    int image_w = 64;
    int n_affordances = 2;
    int fc_hidden = 256;
    double logvar_clamp = 10.0;

    void validate() const {
        if (latent_dim < 1) throw ConfigError("vaed: latent_dim must be >= 1");
        if (beta < 0.0) throw ConfigError("vaed: beta must be non-negative");
        if (conv_spec.size() != 4) throw ConfigError("vaed: exactly 4 conv stages required");
        if (image_h < 1 || image_w < 1) throw ConfigError("vaed: image size must be positive");
        if (n_affordances < 1) throw ConfigError("vaed: need at least one affordance channel");
        if (fc_hidden < 1) throw ConfigError("vaed: fc_hidden must be positive");
        if (logvar_clamp <= 0.0) throw ConfigError("vaed: logvar_clamp must be positive");
        for (const auto& s : conv_spec)
            if (s.channels < 1) throw ConfigError("vaed: conv channels must be positive");
    }

    nlohmann::json to_json() const;
    static VaedConfig from_json(const nlohmann::json& j);
};

// Hourglass encoder-decoder: 4 strided conv stages down to a Gaussian latent,
// 4 mirrored transposed stages back up to per-pixel affordance probabilities.
template <typename T>
class VaedNet {
public:
    explicit VaedNet(VaedConfig cfg) : cfg_(std::move(cfg)) {
        cfg_.validate();
        int c = 3, h = cfg_.image_h, w = cfg_.image_w;
        for (std::size_t i = 0; i < cfg_.conv_spec.size(); ++i) {
            const ConvStage& st = cfg_.conv_spec[i];
            nn::ConvGeom g = nn::conv_geom(c, h, w, st.channels, st.kernel, st.stride);
            enc_geom_.push_back(g);
            enc_w_.push_back(pack_.add("enc.conv" + std::to_string(i) + ".W",
                                       {st.channels, c * st.kernel * st.kernel}));
            enc_b_.push_back(pack_.add("enc.conv" + std::to_string(i) + ".b", {st.channels}));
            c = st.channels;
            h = g.hout;
            w = g.wout;
        }
        bottom_c_ = c;
        bottom_h_ = h;
        bottom_w_ = w;
        flat_ = c * h * w;
        fc_w_ = pack_.add("enc.fc.W", {cfg_.fc_hidden, flat_});
        fc_b_ = pack_.add("enc.fc.b", {cfg_.fc_hidden});
        mu_w_ = pack_.add("enc.mu.W", {cfg_.latent_dim, cfg_.fc_hidden});
        mu_b_ = pack_.add("enc.mu.b", {cfg_.latent_dim});
        lv_w_ = pack_.add("enc.logvar.W", {cfg_.latent_dim, cfg_.fc_hidden});
        lv_b_ = pack_.add("enc.logvar.b", {cfg_.latent_dim});

        dfc_w_ = pack_.add("dec.fc.W", {flat_, cfg_.latent_dim});
        dfc_b_ = pack_.add("dec.fc.b", {flat_});
        // Transposed stages mirror the conv stack; the last one emits the
        // affordance channels at full resolution.
        int ci = bottom_c_;
        int hh = bottom_h_, ww = bottom_w_;
        for (int i = static_cast<int>(cfg_.conv_spec.size()) - 1; i >= 0; --i) {
            const ConvStage& st = cfg_.conv_spec[static_cast<std::size_t>(i)];
            const int co = i > 0 ? cfg_.conv_spec[static_cast<std::size_t>(i - 1)].channels
                                 : cfg_.n_affordances;
            const int ho = hh * st.stride, wo = ww * st.stride;
            nn::ConvGeom g = nn::conv_geom(co, ho, wo, ci, st.kernel, st.stride);
            dec_geom_.push_back(g);
            const auto tag = std::to_string(cfg_.conv_spec.size() - 1 - i);
            dec_w_.push_back(pack_.add("dec.deconv" + tag + ".W",
                                       {ci, co * st.kernel * st.kernel}));
            dec_b_.push_back(pack_.add("dec.deconv" + tag + ".b", {co}));
            ci = co;
            hh = ho;
            ww = wo;
        }
        if (hh != cfg_.image_h || ww != cfg_.image_w)
            throw ConfigError("vaed: decoder does not restore the input resolution");
        pack_.finalize();
    }

    const VaedConfig& config() const { return cfg_; }
    nn::ParamPack<T>& pack() { return pack_; }
    const nn::ParamPack<T>& pack() const { return pack_; }

    struct Cache {
        std::vector<nn::Tensor3<T>> enc_in;   // input to each conv stage
        std::vector<nn::Tensor3<T>> enc_pre;  // pre-activation per stage
        nn::VecX<T> flat, fc_pre, fc_act;
        nn::VecX<T> mu, logvar_raw, logvar;
        nn::VecX<T> eps, z;
        nn::VecX<T> dfc_pre;
        std::vector<nn::Tensor3<T>> dec_in;   // input tensor to each transposed stage
        std::vector<nn::Tensor3<T>> dec_pre;  // pre-activation per stage
        nn::Tensor3<T> probs;
    };

    // image: 3 x H x W, values in [0,1].
    LatentDistribution<T> encode(const nn::Tensor3<T>& image, const nn::VecX<T>& params,
                                 Cache* cache = nullptr) const {
        if (image.c != 3 || image.h != cfg_.image_h || image.w != cfg_.image_w)
            throw InputError("vaed encode: image shape mismatch");
        nn::Tensor3<T> x = image;
        nn::MatX<T> cols;
        if (cache) {
            cache->enc_in.clear();
            cache->enc_pre.clear();
        }
        for (std::size_t i = 0; i < enc_geom_.size(); ++i) {
            if (cache) cache->enc_in.push_back(x);
            nn::Tensor3<T> y;
            nn::conv_forward(x, enc_geom_[i], pack_.mat(params, enc_w_[i]),
                             pack_.vec(params, enc_b_[i]), y, cols);
            if (cache) cache->enc_pre.push_back(y);
            for (T& v : y.data)
                if (v < T(0)) v *= slope_;
            x = std::move(y);
        }
        nn::VecX<T> flat = Eigen::Map<const nn::VecX<T>>(x.data.data(),
                                                         static_cast<std::ptrdiff_t>(x.data.size()));
        nn::VecX<T> fc = pack_.mat(params, fc_w_) * flat + pack_.vec(params, fc_b_);
        if (cache) {
            cache->flat = flat;
            cache->fc_pre = fc;
        }
        nn::leaky_relu_forward(fc, slope_);
        if (cache) cache->fc_act = fc;

        LatentDistribution<T> dist;
        dist.mu = pack_.mat(params, mu_w_) * fc + pack_.vec(params, mu_b_);
        nn::VecX<T> lv = pack_.mat(params, lv_w_) * fc + pack_.vec(params, lv_b_);
        if (cache) cache->logvar_raw = lv;
        const T cl = static_cast<T>(cfg_.logvar_clamp);
        for (std::ptrdiff_t i = 0; i < lv.size(); ++i) lv[i] = std::clamp(lv[i], -cl, cl);
        dist.logvar = lv;
        if (cache) {
            cache->mu = dist.mu;
            cache->logvar = dist.logvar;
        }
        return dist;
    }

    // z: latent vector. Returns C x H x W probabilities in (0,1).
    nn::Tensor3<T> decode(const nn::VecX<T>& z, const nn::VecX<T>& params,
                          Cache* cache = nullptr) const {
        if (z.size() != cfg_.latent_dim) throw InputError("vaed decode: latent length mismatch");
        nn::VecX<T> flat = pack_.mat(params, dfc_w_) * z + pack_.vec(params, dfc_b_);
        if (cache) {
            cache->z = z;
            cache->dfc_pre = flat;
        }
        nn::leaky_relu_forward(flat, slope_);
        nn::Tensor3<T> x(bottom_c_, bottom_h_, bottom_w_);
        Eigen::Map<nn::VecX<T>>(x.data.data(), flat.size()) = flat;
        if (cache) {
            cache->dec_in.clear();
            cache->dec_pre.clear();
        }
        for (std::size_t i = 0; i < dec_geom_.size(); ++i) {
            if (cache) cache->dec_in.push_back(x);
            nn::Tensor3<T> y;
            nn::deconv_forward(x, dec_geom_[i], pack_.mat(params, dec_w_[i]),
                               pack_.vec(params, dec_b_[i]), y);
            const bool last = i + 1 == dec_geom_.size();
            if (cache) cache->dec_pre.push_back(y);
            if (last) {
                for (T& v : y.data) v = nn::sigmoid(v);
            } else {
                for (T& v : y.data)
                    if (v < T(0)) v *= slope_;
            }
            x = std::move(y);
        }
        if (cache) cache->probs = x;
        return x;
    }

    struct LossParts {
        T total = T(0);
        T bce = T(0);  // mean over pixels and channels
        T kl = T(0);   // summed over latent dims
    };

    // Mean binary cross entropy with the probabilities clamped to
    // [eps, 1-eps], eps = 1e-7.
    static T bce_loss(const nn::Tensor3<T>& pred, const nn::Tensor3<T>& target) {
        if (pred.c != target.c || pred.h != target.h || pred.w != target.w)
            throw InputError("bce_loss: shape mismatch");
        const T eps = static_cast<T>(1e-7);
        T acc = T(0);
        for (std::size_t i = 0; i < pred.data.size(); ++i) {
            const T p = std::clamp(pred.data[i], eps, T(1) - eps);
            const T t = target.data[i];
            acc -= t * std::log(p) + (T(1) - t) * std::log(T(1) - p);
        }
        return acc / static_cast<T>(pred.data.size());
    }

    // total = bce_weight * mean-BCE + beta * KL. The unit-weight form is the
    // reference objective; the trainer passes bce_weight = pixel count so the
    // reconstruction term is summed over the image.
    LossParts loss(const nn::Tensor3<T>& image, const nn::Tensor3<T>& target,
                   const nn::VecX<T>& params, const nn::VecX<T>& eps_noise, T beta,
                   Cache* cache = nullptr, T bce_weight = T(1)) const {
        Cache local;
        Cache* c = cache ? cache : &local;
        LatentDistribution<T> dist = encode(image, params, c);
        c->eps = eps_noise;
        nn::VecX<T> z = reparameterize(dist.mu, dist.logvar, eps_noise);
        nn::Tensor3<T> probs = decode(z, params, c);
        LossParts parts;
        parts.bce = bce_loss(probs, target);
        parts.kl = kl_divergence(dist.mu, dist.logvar);
        parts.total = bce_weight * parts.bce + beta * parts.kl;
        return parts;
    }

    // Accumulates d(total)/dparams into grad for the loss() objective.
    // The cache must come from the matching loss() call; target is the same
    // binary map.
    void loss_backward(const Cache& cache, const nn::Tensor3<T>& target,
                       const nn::VecX<T>& params, T beta, nn::VecX<T>& grad,
                       T bce_weight = T(1)) const {
        const T eps = static_cast<T>(1e-7);
        const T n = static_cast<T>(cache.probs.data.size());

        // Sigmoid + clamped BCE collapses to (p - t)/n on the logit where the
        // clamp is inactive, zero where it saturates.
        nn::Tensor3<T> dlogits(cache.probs.c, cache.probs.h, cache.probs.w);
        for (std::size_t i = 0; i < cache.probs.data.size(); ++i) {
            const T p = cache.probs.data[i];
            dlogits.data[i] = (p > eps && p < T(1) - eps)
                                  ? bce_weight * (p - target.data[i]) / n
                                  : T(0);
        }

        nn::MatX<T> cols;
        nn::Tensor3<T> d = std::move(dlogits);
        for (int i = static_cast<int>(dec_geom_.size()) - 1; i >= 0; --i) {
            if (i + 1 < static_cast<int>(dec_geom_.size())) {
                const nn::Tensor3<T>& pre = cache.dec_pre[static_cast<std::size_t>(i)];
                for (std::size_t k = 0; k < d.data.size(); ++k)
                    if (pre.data[k] < T(0)) d.data[k] *= slope_;
            }
            nn::Tensor3<T> dx;
            nn::deconv_backward(cache.dec_in[static_cast<std::size_t>(i)], d,
                                dec_geom_[static_cast<std::size_t>(i)],
                                pack_.mat(params, dec_w_[static_cast<std::size_t>(i)]),
                                pack_.mat(grad, dec_w_[static_cast<std::size_t>(i)]),
                                pack_.vec(grad, dec_b_[static_cast<std::size_t>(i)]), dx, cols);
            d = std::move(dx);
        }

        nn::VecX<T> dflat = Eigen::Map<const nn::VecX<T>>(d.data.data(),
                                                          static_cast<std::ptrdiff_t>(d.data.size()));
        nn::leaky_relu_backward(cache.dfc_pre, dflat, slope_);
        pack_.mat(grad, dfc_w_).noalias() += dflat * cache.z.transpose();
        pack_.vec(grad, dfc_b_).noalias() += dflat;
        nn::VecX<T> dz = pack_.mat(params, dfc_w_).transpose() * dflat;

        nn::VecX<T> dmu = nn::VecX<T>::Zero(cfg_.latent_dim);
        nn::VecX<T> dlv = nn::VecX<T>::Zero(cfg_.latent_dim);
        reparameterize_backward(cache.logvar, cache.eps, dz, dmu, dlv);
        kl_backward(cache.mu, cache.logvar, beta, dmu, dlv);
        // Clamp gate on logvar.
        const T cl = static_cast<T>(cfg_.logvar_clamp);
        for (std::ptrdiff_t i = 0; i < dlv.size(); ++i)
            if (cache.logvar_raw[i] <= -cl || cache.logvar_raw[i] >= cl) dlv[i] = T(0);

        pack_.mat(grad, mu_w_).noalias() += dmu * cache.fc_act.transpose();
        pack_.vec(grad, mu_b_).noalias() += dmu;
        pack_.mat(grad, lv_w_).noalias() += dlv * cache.fc_act.transpose();
        pack_.vec(grad, lv_b_).noalias() += dlv;
        nn::VecX<T> dfc = pack_.mat(params, mu_w_).transpose() * dmu +
                          pack_.mat(params, lv_w_).transpose() * dlv;
        nn::leaky_relu_backward(cache.fc_pre, dfc, slope_);
        pack_.mat(grad, fc_w_).noalias() += dfc * cache.flat.transpose();
        pack_.vec(grad, fc_b_).noalias() += dfc;
        nn::VecX<T> dflat_enc = pack_.mat(params, fc_w_).transpose() * dfc;

        nn::Tensor3<T> de(bottom_c_, bottom_h_, bottom_w_);
        Eigen::Map<nn::VecX<T>>(de.data.data(), dflat_enc.size()) = dflat_enc;
        for (int i = static_cast<int>(enc_geom_.size()) - 1; i >= 0; --i) {
            const nn::Tensor3<T>& pre = cache.enc_pre[static_cast<std::size_t>(i)];
            for (std::size_t k = 0; k < de.data.size(); ++k)
                if (pre.data[k] < T(0)) de.data[k] *= slope_;
            nn::Tensor3<T> dx;
            nn::conv_backward(cache.enc_in[static_cast<std::size_t>(i)], de,
                              enc_geom_[static_cast<std::size_t>(i)],
                              pack_.mat(params, enc_w_[static_cast<std::size_t>(i)]),
                              pack_.mat(grad, enc_w_[static_cast<std::size_t>(i)]),
                              pack_.vec(grad, enc_b_[static_cast<std::size_t>(i)]), dx, cols);
            de = std::move(dx);
        }
    }

private:
    VaedConfig cfg_;
    nn::ParamPack<T> pack_;
    std::vector<nn::ConvGeom> enc_geom_, dec_geom_;
    std::vector<int> enc_w_, enc_b_, dec_w_, dec_b_;
    int fc_w_ = -1, fc_b_ = -1, mu_w_ = -1, mu_b_ = -1, lv_w_ = -1, lv_b_ = -1;
    int dfc_w_ = -1, dfc_b_ = -1;
    int bottom_c_ = 0, bottom_h_ = 0, bottom_w_ = 0, flat_ = 0;
    T slope_ = T(0.2);
};

struct VaedTrainConfig {
    int epochs = 40;
    int batch_size = 64;
    double learning_rate = 1e-3;
    double val_fraction = 0.1;
    std::uint64_t seed = 1;
    int workers = 1;
    // Scale the reconstruction term by the pixel count (summed BCE) so the
    // KL weight trades off against the whole-image evidence.
    bool sum_bce = true;
    bool log_to_stdout = false;
};

struct VaedEpochLog {
    int epoch = 0;
    double bce = 0.0;  // mean-over-pixels form, for comparability
    double kl = 0.0;
    double total = 0.0;
};

struct VaedTrainResult {
    nn::VecX<float> params;
    std::vector<VaedEpochLog> log;
    std::int64_t n_skipped = 0;
    double val_bce = 0.0;
};

VaedTrainResult train_vaed(const std::filesystem::path& dataset_dir, const VaedConfig& cfg,
                           const VaedTrainConfig& tc);

void save_vaed_checkpoint(const std::filesystem::path& path, const VaedConfig& cfg,
                          const nn::VecX<float>& params);
// Returns the config echoed from the checkpoint header and fills the net
// parameters (shape-checked against the directory).
VaedConfig load_vaed_checkpoint(const std::filesystem::path& path, nn::VecX<float>& params);

}  // namespace afp::models
