#include "afp/models/vaed.hpp"

#include <cstdio>
#include <utility>

#include "afp/core/rng.hpp"
#include "afp/nn/adam.hpp"
#include "afp/nn/checkpoint.hpp"
#include "afp/scenegen/dataset.hpp"

using nlohmann::json;

namespace afp::models {
namespace {

struct Item {
    ImageU8 rgb;
    std::vector<std::uint8_t> wrap, contain;
};

void item_to_tensors(const Item& it, int n_aff, nn::Tensor3<float>& img,
                     nn::Tensor3<float>& tgt) {
    const int h = it.rgb.height, w = it.rgb.width;
    img = nn::Tensor3<float>(3, h, w);
    tgt = nn::Tensor3<float>(n_aff, h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            for (int c = 0; c < 3; ++c)
                img.at(c, y, x) = static_cast<float>(it.rgb.at(x, y, c)) / 255.0f;
            const std::size_t k = static_cast<std::size_t>(y) * w + x;
            tgt.at(0, y, x) = it.wrap[k] ? 1.0f : 0.0f;
            if (n_aff > 1) tgt.at(1, y, x) = it.contain[k] ? 1.0f : 0.0f;
        }
}

template <typename T>
void fisher_yates(std::vector<T>& v, Rng& rng) {
    for (std::size_t i = v.size(); i > 1; --i)
        std::swap(v[i - 1], v[static_cast<std::size_t>(
                      rng.uniform_int(0, static_cast<std::int64_t>(i) - 1))]);
}

}  // namespace

json VaedConfig::to_json() const {
    json j;
    j["model"] = "vaed";
    j["latent_dim"] = latent_dim;
    j["beta"] = beta;
    json spec = json::array();
    for (const auto& s : conv_spec) spec.push_back({s.channels, s.kernel, s.stride});
    j["conv_spec"] = spec;
    j["image_h"] = image_h;
    j["image_w"] = image_w;
    j["n_affordances"] = n_affordances;
    j["fc_hidden"] = fc_hidden;
    j["logvar_clamp"] = logvar_clamp;
    return j;
}

VaedConfig VaedConfig::from_json(const json& j) {
    VaedConfig c;
    c.latent_dim = j.at("latent_dim").get<int>();
    c.beta = j.at("beta").get<double>();
    c.conv_spec.clear();
    for (const auto& s : j.at("conv_spec"))
        c.conv_spec.push_back({s.at(0).get<int>(), s.at(1).get<int>(), s.at(2).get<int>()});
    c.image_h = j.at("image_h").get<int>();
    c.image_w = j.at("image_w").get<int>();
    c.n_affordances = j.at("n_affordances").get<int>();
    c.fc_hidden = j.at("fc_hidden").get<int>();
    c.logvar_clamp = j.at("logvar_clamp").get<double>();
    c.validate();
    return c;
}

void save_vaed_checkpoint(const std::filesystem::path& path, const VaedConfig& cfg,
                          const nn::VecX<float>& params) {
    VaedNet<float> net(cfg);
    if (params.size() != net.pack().total())
        throw ConfigError("save_vaed_checkpoint: parameter count mismatch");
    net.pack().values() = params;
    nn::save_checkpoint(path, nn::pack_to_checkpoint(net.pack(), cfg.to_json()));
}

VaedConfig load_vaed_checkpoint(const std::filesystem::path& path, nn::VecX<float>& params) {
    nn::CheckpointData data = nn::load_checkpoint(path);
    if (data.config.value("model", "") != "vaed")
        throw ConfigError("checkpoint at " + path.string() + " is not an affordance model");
    VaedConfig cfg = VaedConfig::from_json(data.config);
    VaedNet<float> net(cfg);
    nn::checkpoint_to_pack(data, net.pack());
    params = net.pack().values();
    return cfg;
}

VaedTrainResult train_vaed(const std::filesystem::path& dataset_dir, const VaedConfig& cfg,
                           const VaedTrainConfig& tc) {
    cfg.validate();
    if (tc.epochs < 1) throw ConfigError("train_vaed: epochs must be >= 1");
    if (tc.batch_size < 1) throw ConfigError("train_vaed: batch_size must be >= 1");
    if (tc.val_fraction < 0.0 || tc.val_fraction >= 1.0)
        throw ConfigError("train_vaed: val_fraction must be in [0, 1)");

    const scenegen::DatasetManifest manifest = scenegen::DatasetManifest::load(dataset_dir);
    if (manifest.n < 1) throw InputError("train_vaed: dataset is empty");

    std::vector<Item> items;
    items.reserve(static_cast<std::size_t>(manifest.n));
    std::int64_t skipped = 0;
    for (std::int64_t i = 0; i < manifest.n; ++i) {
        try {
            scenegen::LoadedSample s = scenegen::load_sample(dataset_dir, i);
            if (s.rgb.width != cfg.image_w || s.rgb.height != cfg.image_h)
                throw InputError("sample size does not match model input size");
            Item it;
            it.rgb = std::move(s.rgb);
            it.wrap = std::move(s.labels.wrap_grasp);
            it.contain = std::move(s.labels.contain);
            items.push_back(std::move(it));
        } catch (const std::exception& e) {
            ++skipped;
            std::fprintf(stderr, "warning: skipping sample %lld: %s\n",
                         static_cast<long long>(i), e.what());
        }
    }
    if (skipped * 100 > manifest.n)
        throw InputError("train_vaed: more than 1% of dataset unreadable (" +
                         std::to_string(skipped) + " of " + std::to_string(manifest.n) + ")");
    if (items.empty()) throw InputError("train_vaed: no readable samples");

    VaedNet<float> net(cfg);
    Rng init_rng(mix_seed(tc.seed, 0xA0));
    net.pack().init_random(init_rng);
    nn::VecX<float>& params = net.pack().values();

    nn::Adam<float>::Options opts;
    opts.lr = static_cast<float>(tc.learning_rate);
    nn::Adam<float> adam(net.pack().total(), opts);

    std::vector<std::size_t> perm(items.size());
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
    Rng split_rng(mix_seed(tc.seed, 0xB0));
    fisher_yates(perm, split_rng);
    std::size_t n_val = static_cast<std::size_t>(tc.val_fraction *
                                                 static_cast<double>(items.size()));
    if (n_val >= items.size()) n_val = items.size() - 1;
    std::vector<std::size_t> train_idx(perm.begin(), perm.end() - static_cast<long>(n_val));
    std::vector<std::size_t> val_idx(perm.end() - static_cast<long>(n_val), perm.end());

    const float n_pix = static_cast<float>(std::size_t(cfg.n_affordances) * cfg.image_h *
                                           cfg.image_w);
    const float bce_weight = tc.sum_bce ? n_pix : 1.0f;
    const float beta = static_cast<float>(cfg.beta);

    Rng shuffle_rng(mix_seed(tc.seed, 0xC0));
    Rng noise_rng(mix_seed(tc.seed, 0xD0));

    VaedTrainResult result;
    nn::VecX<float> grad = net.pack().zeros_like();
    nn::Tensor3<float> img, tgt;
    typename VaedNet<float>::Cache cache;

    for (int epoch = 0; epoch < tc.epochs; ++epoch) {
        fisher_yates(train_idx, shuffle_rng);
        double sum_bce = 0.0, sum_kl = 0.0, sum_total = 0.0;
        for (std::size_t start = 0; start < train_idx.size();
             start += static_cast<std::size_t>(tc.batch_size)) {
            const std::size_t end =
                std::min(train_idx.size(), start + static_cast<std::size_t>(tc.batch_size));
            grad.setZero();
            for (std::size_t k = start; k < end; ++k) {
                item_to_tensors(items[train_idx[k]], cfg.n_affordances, img, tgt);
                nn::VecX<float> eps(cfg.latent_dim);
                for (int d = 0; d < cfg.latent_dim; ++d)
                    eps[d] = static_cast<float>(noise_rng.normal());
                auto parts = net.loss(img, tgt, params, eps, beta, &cache, bce_weight);
                net.loss_backward(cache, tgt, params, beta, grad, bce_weight);
                sum_bce += parts.bce;
                sum_kl += parts.kl;
                sum_total += parts.total;
            }
            grad /= static_cast<float>(end - start);
            adam.step(params, grad);
        }
        VaedEpochLog row;
        row.epoch = epoch;
        const double m = static_cast<double>(train_idx.size());
        row.bce = sum_bce / m;
        row.kl = sum_kl / m;
        row.total = sum_total / m;
        result.log.push_back(row);
        if (tc.log_to_stdout)
            std::printf("epoch %d bce %.6f kl %.4f total %.4f\n", epoch, row.bce, row.kl,
                        row.total);
    }

    // Validation reconstruction quality at the posterior mean.
    double val_bce = 0.0;
    for (std::size_t i : val_idx) {
        item_to_tensors(items[i], cfg.n_affordances, img, tgt);
        auto dist = net.encode(img, params);
        nn::Tensor3<float> probs = net.decode(dist.mu, params);
        val_bce += VaedNet<float>::bce_loss(probs, tgt);
    }
    result.val_bce = val_idx.empty() ? 0.0 : val_bce / static_cast<double>(val_idx.size());
    result.params = params;
    result.n_skipped = skipped;
    return result;
}

}  // namespace afp::models
