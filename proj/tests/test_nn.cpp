#include <doctest.h>

#include <cmath>

#include "afp/core/errors.hpp"
#include "afp/core/rng.hpp"
#include "afp/nn/adam.hpp"
#include "afp/nn/checkpoint.hpp"
#include "afp/nn/layers.hpp"
#include "afp/nn/params.hpp"
#include "test_util.hpp"

using namespace afp;
using namespace afp::nn;

namespace {

void fill_random(VecX<double>& v, Rng& rng, double scale = 0.5) {
    for (std::ptrdiff_t i = 0; i < v.size(); ++i) v[i] = rng.normal(0.0, scale);
}

}  // namespace

TEST_CASE("conv geometry validation") {
    CHECK_THROWS_AS(conv_geom(3, 8, 8, 4, 3, 2), ConfigError);   // stride 2 needs k=4
    CHECK_THROWS_AS(conv_geom(3, 7, 8, 4, 4, 2), ConfigError);   // odd input
    CHECK_THROWS_AS(conv_geom(3, 8, 8, 4, 4, 1), ConfigError);   // stride 1 needs odd k
    CHECK_THROWS_AS(conv_geom(3, 8, 8, 4, 3, 3), ConfigError);   // stride 3 unsupported
    ConvGeom g = conv_geom(3, 8, 8, 16, 4, 2);
    CHECK(g.hout == 4);
    CHECK(g.wout == 4);
    ConvGeom g1 = conv_geom(3, 8, 8, 16, 3, 1);
    CHECK(g1.hout == 8);
}

TEST_CASE("conv gradients match finite differences") {
    Rng rng(71);
    ConvGeom g = conv_geom(2, 6, 6, 3, 4, 2);
    ParamPack<double> pack;
    const int wi = pack.add("c.W", {g.cout, g.cin * g.k * g.k});
    const int bi = pack.add("c.b", {g.cout});
    pack.finalize();
    pack.init_random(rng);

    Tensor3<double> x(2, 6, 6);
    fill_random(x.data, rng);

    auto loss_of = [&](const VecX<double>& params, const Tensor3<double>& input) {
        Tensor3<double> y;
        MatX<double> cols;
        conv_forward(input, g, pack.mat(params, wi), pack.vec(params, bi), y, cols);
        return 0.5 * y.data.squaredNorm();
    };

    const VecX<double>& vals = pack.values();
    Tensor3<double> y;
    MatX<double> cols;
    conv_forward(x, g, pack.mat(vals, wi), pack.vec(vals, bi), y, cols);
    VecX<double> grad = pack.zeros_like();
    Tensor3<double> dx;
    conv_backward(x, y, g, pack.mat(vals, wi), pack.mat(grad, wi), pack.vec(grad, bi),
                  dx, cols);

    const double h = 1e-6;
    for (int trial = 0; trial < 25; ++trial) {
        const std::ptrdiff_t i = rng.uniform_int(0, pack.total() - 1);
        VecX<double> p = pack.values();
        p[i] += h;
        const double lp = loss_of(p, x);
        p[i] -= 2 * h;
        const double lm = loss_of(p, x);
        const double fd = (lp - lm) / (2 * h);
        CHECK(std::abs(grad[i] - fd) < 1e-4 * std::max(1.0, std::abs(fd)));
    }
    for (int trial = 0; trial < 25; ++trial) {
        const std::ptrdiff_t i = rng.uniform_int(0, x.data.size() - 1);
        Tensor3<double> xp = x, xm = x;
        xp.data[i] += h;
        xm.data[i] -= h;
        const double fd = (loss_of(pack.values(), xp) - loss_of(pack.values(), xm)) / (2 * h);
        CHECK(std::abs(dx.data[i] - fd) < 1e-4 * std::max(1.0, std::abs(fd)));
    }
}

TEST_CASE("transposed conv gradients match finite differences") {
    Rng rng(73);
    // maps (3, 3, 3) up to (2, 6, 6); g is the mirror conv geometry
    ConvGeom g = conv_geom(2, 6, 6, 3, 4, 2);
    ParamPack<double> pack;
    const int wi = pack.add("d.W", {g.cout, g.cin * g.k * g.k});
    const int bi = pack.add("d.b", {g.cin});
    pack.finalize();
    pack.init_random(rng);
    // init_random zeroes ".b" names only by suffix; keep bias nonzero here
    auto bset = pack.vec(bi);
    for (std::ptrdiff_t i = 0; i < bset.size(); ++i) bset[i] = rng.normal(0.0, 0.1);

    Tensor3<double> x(3, 3, 3);
    fill_random(x.data, rng);

    auto forward = [&](const VecX<double>& params, const Tensor3<double>& input) {
        Tensor3<double> y;
        deconv_forward(input, g, pack.mat(params, wi), pack.vec(params, bi), y);
        return y;
    };
    auto loss_of = [&](const VecX<double>& params, const Tensor3<double>& input) {
        return 0.5 * forward(params, input).data.squaredNorm();
    };

    Tensor3<double> y = forward(pack.values(), x);
    CHECK(y.c == 2);
    CHECK(y.h == 6);
    CHECK(y.w == 6);
    const VecX<double>& vals = pack.values();
    VecX<double> grad = pack.zeros_like();
    Tensor3<double> dx;
    MatX<double> cols;
    deconv_backward(x, y, g, pack.mat(vals, wi), pack.mat(grad, wi),
                    pack.vec(grad, bi), dx, cols);

    const double h = 1e-6;
    for (int trial = 0; trial < 25; ++trial) {
        const std::ptrdiff_t i = rng.uniform_int(0, pack.total() - 1);
        VecX<double> p = pack.values();
        p[i] += h;
        const double lp = loss_of(p, x);
        p[i] -= 2 * h;
        const double lm = loss_of(p, x);
        const double fd = (lp - lm) / (2 * h);
        CHECK(std::abs(grad[i] - fd) < 1e-4 * std::max(1.0, std::abs(fd)));
    }
    for (int trial = 0; trial < 25; ++trial) {
        const std::ptrdiff_t i = rng.uniform_int(0, x.data.size() - 1);
        Tensor3<double> xp = x, xm = x;
        xp.data[i] += h;
        xm.data[i] -= h;
        const double fd = (loss_of(pack.values(), xp) - loss_of(pack.values(), xm)) / (2 * h);
        CHECK(std::abs(dx.data[i] - fd) < 1e-4 * std::max(1.0, std::abs(fd)));
    }
}

TEST_CASE("mlp gradients match finite differences") {
    Rng rng(79);
    ParamPack<double> pack;
    Mlp<double> mlp;
    mlp.build(pack, "m", {4, 8, 6, 3});
    pack.finalize();
    pack.init_random(rng);

    VecX<double> x(4);
    fill_random(x, rng);
    VecX<double> target(3);
    fill_random(target, rng);

    auto loss_of = [&](const VecX<double>& params, const VecX<double>& input) {
        VecX<double> y = mlp.forward(pack, params, input);
        return 0.5 * (y - target).squaredNorm();
    };

    Mlp<double>::Cache cache;
    VecX<double> y = mlp.forward(pack, pack.values(), x, &cache);
    VecX<double> grad = pack.zeros_like();
    VecX<double> dx = mlp.backward(pack, pack.values(), cache, y - target, grad);

    const double h = 1e-6;
    for (int trial = 0; trial < 30; ++trial) {
        const std::ptrdiff_t i = rng.uniform_int(0, pack.total() - 1);
        VecX<double> p = pack.values();
        p[i] += h;
        const double lp = loss_of(p, x);
        p[i] -= 2 * h;
        const double lm = loss_of(p, x);
        const double fd = (lp - lm) / (2 * h);
        CHECK(std::abs(grad[i] - fd) < 1e-5 * std::max(1.0, std::abs(fd)));
    }
    for (std::ptrdiff_t i = 0; i < x.size(); ++i) {
        VecX<double> xp = x, xm = x;
        xp[i] += h;
        xm[i] -= h;
        const double fd = (loss_of(pack.values(), xp) - loss_of(pack.values(), xm)) / (2 * h);
        CHECK(std::abs(dx[i] - fd) < 1e-5 * std::max(1.0, std::abs(fd)));
    }
}

TEST_CASE("adam minimizes a quadratic") {
    ParamPack<double> pack;
    pack.add("q.W", {5});
    pack.finalize();
    auto v = pack.vec(0);
    for (int i = 0; i < 5; ++i) v[i] = 2.0 + i;
    Adam<double> adam(5, {.lr = 0.05});
    for (int it = 0; it < 2000; ++it) {
        VecX<double> grad = pack.values();
        adam.step(pack.values(), grad);
    }
    CHECK(pack.values().norm() < 1e-3);
}

TEST_CASE("checkpoints round-trip bit-exactly") {
    testutil::TempDir dir;
    Rng rng(83);
    ParamPack<float> pack;
    pack.add("a.W", {3, 4});
    pack.add("a.b", {3});
    pack.add("z.W", {2, 3});
    pack.finalize();
    for (std::ptrdiff_t i = 0; i < pack.total(); ++i)
        pack.values()[i] = static_cast<float>(rng.normal());

    nlohmann::json cfg = {{"model", "demo"}, {"note", 7}};
    const auto path = dir.path / "m.ckpt";
    save_checkpoint(path, pack_to_checkpoint(pack, cfg));

    CheckpointData back = load_checkpoint(path);
    CHECK(back.format_version == kCheckpointFormatVersion);
    CHECK(back.config == cfg);
    CHECK(back.parameter_count() == pack.total());
    REQUIRE(back.specs.size() == 3);
    CHECK(back.specs[0].name == "a.W");
    CHECK(back.specs[0].shape == std::vector<int>{3, 4});

    ParamPack<float> pack2;
    pack2.add("a.W", {3, 4});
    pack2.add("a.b", {3});
    pack2.add("z.W", {2, 3});
    pack2.finalize();
    checkpoint_to_pack(back, pack2);
    CHECK(pack2.values() == pack.values());

    // identical bytes across saves
    const auto path2 = dir.path / "m2.ckpt";
    save_checkpoint(path2, pack_to_checkpoint(pack, cfg));
    std::ifstream f1(path, std::ios::binary), f2(path2, std::ios::binary);
    std::string s1((std::istreambuf_iterator<char>(f1)), {});
    std::string s2((std::istreambuf_iterator<char>(f2)), {});
    CHECK(s1 == s2);
}

TEST_CASE("corrupt checkpoints fail with located errors") {
    testutil::TempDir dir;
    const auto path = dir.path / "bad.ckpt";
    testutil::write_file(path, "not a checkpoint at all");
    CHECK_THROWS_AS(load_checkpoint(path), IoError);

    ParamPack<float> pack;
    pack.add("a.W", {2, 2});
    pack.finalize();
    const auto good = dir.path / "good.ckpt";
    save_checkpoint(good, pack_to_checkpoint(pack, {}));
    // truncate the payload
    const auto size = std::filesystem::file_size(good);
    std::filesystem::resize_file(good, size - 4);
    CHECK_THROWS_AS(load_checkpoint(good), IoError);
}

TEST_CASE("mismatched checkpoints are rejected") {
    ParamPack<float> a;
    a.add("x.W", {2, 2});
    a.finalize();
    CheckpointData data = pack_to_checkpoint(a, {});

    ParamPack<float> b;
    b.add("y.W", {2, 2});
    b.finalize();
    CHECK_THROWS_AS(checkpoint_to_pack(data, b), ConfigError);

    ParamPack<float> c;
    c.add("x.W", {4, 2});
    c.finalize();
    CHECK_THROWS_AS(checkpoint_to_pack(data, c), ConfigError);
}
