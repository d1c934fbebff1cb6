#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "afp/core/errors.hpp"
#include "afp/nn/params.hpp"
#include "afp/nn/tensor.hpp"

namespace afp::nn {

// Convolution geometry. Supported configurations keep conv / transposed-conv
// shapes exactly mirrored: stride 2 requires kernel 4 (pad 1, halves even
// sizes), stride 1 requires an odd kernel (same-size output).
struct ConvGeom {
    int cin = 0, hin = 0, win = 0;
    int cout = 0, k = 0, s = 0, p = 0;
    int hout = 0, wout = 0;
};

inline ConvGeom conv_geom(int cin, int hin, int win, int cout, int k, int s) {
    ConvGeom g;
    g.cin = cin;
    g.hin = hin;
    g.win = win;
    g.cout = cout;
    g.k = k;
    g.s = s;
    if (s == 2) {
        if (k != 4) throw ConfigError("conv stage: stride 2 requires kernel 4");
        if (hin % 2 || win % 2) throw ConfigError("conv stage: stride 2 requires even input size");
        g.p = 1;
    } else if (s == 1) {
        if (k % 2 == 0) throw ConfigError("conv stage: stride 1 requires odd kernel");
        g.p = (k - 1) / 2;
    } else {
        throw ConfigError("conv stage: stride must be 1 or 2");
    }
    g.hout = (hin + 2 * g.p - k) / s + 1;
    g.wout = (win + 2 * g.p - k) / s + 1;
    if (g.hout < 1 || g.wout < 1) throw ConfigError("conv stage: output collapses to zero size");
    return g;
}

// cols: (cin*k*k) x (hout*wout), zero-padded borders.
template <typename T>
void im2col(const Tensor3<T>& x, const ConvGeom& g, MatX<T>& cols) {
    cols.setZero(std::ptrdiff_t(g.cin) * g.k * g.k, std::ptrdiff_t(g.hout) * g.wout);
    for (int c = 0; c < g.cin; ++c) {
        for (int ky = 0; ky < g.k; ++ky) {
            for (int kx = 0; kx < g.k; ++kx) {
                const std::ptrdiff_t row = (std::ptrdiff_t(c) * g.k + ky) * g.k + kx;
                for (int oy = 0; oy < g.hout; ++oy) {
                    const int iy = oy * g.s + ky - g.p;
                    if (iy < 0 || iy >= g.hin) continue;
                    for (int ox = 0; ox < g.wout; ++ox) {
                        const int ix = ox * g.s + kx - g.p;
                        if (ix < 0 || ix >= g.win) continue;
                        cols(row, std::ptrdiff_t(oy) * g.wout + ox) = x.at(c, iy, ix);
                    }
                }
            }
        }
    }
}

// Scatter-add transpose of im2col.
template <typename T>
void col2im_add(const MatX<T>& cols, const ConvGeom& g, Tensor3<T>& x) {
    for (int c = 0; c < g.cin; ++c) {
        for (int ky = 0; ky < g.k; ++ky) {
            for (int kx = 0; kx < g.k; ++kx) {
                const std::ptrdiff_t row = (std::ptrdiff_t(c) * g.k + ky) * g.k + kx;
                for (int oy = 0; oy < g.hout; ++oy) {
                    const int iy = oy * g.s + ky - g.p;
                    if (iy < 0 || iy >= g.hin) continue;
                    for (int ox = 0; ox < g.wout; ++ox) {
                        const int ix = ox * g.s + kx - g.p;
                        if (ix < 0 || ix >= g.win) continue;
                        x.at(c, iy, ix) += cols(row, std::ptrdiff_t(oy) * g.wout + ox);
                    }
                }
            }
        }
    }
}

// y = W * im2col(x) + b, with W (cout x cin*k*k).
template <typename T>
void conv_forward(const Tensor3<T>& x, const ConvGeom& g,
                  const Eigen::Map<const MatX<T>>& w, const Eigen::Map<const VecX<T>>& b,
                  Tensor3<T>& y, MatX<T>& cols_scratch) {
    im2col(x, g, cols_scratch);
    y = Tensor3<T>(g.cout, g.hout, g.wout);
    y.as_matrix().noalias() = w * cols_scratch;
    y.as_matrix().colwise() += b;
}

// Accumulates dW/db and returns dx. x is the cached forward input.
template <typename T>
void conv_backward(const Tensor3<T>& x, const Tensor3<T>& dy, const ConvGeom& g,
                   const Eigen::Map<const MatX<T>>& w, Eigen::Map<MatX<T>> dw,
                   Eigen::Map<VecX<T>> db, Tensor3<T>& dx, MatX<T>& cols_scratch) {
    im2col(x, g, cols_scratch);
    auto dy_m = dy.as_matrix();
    dw.noalias() += dy_m * cols_scratch.transpose();
    db.noalias() += dy_m.rowwise().sum();
    MatX<T> dcols(cols_scratch.rows(), cols_scratch.cols());
    dcols.noalias() = w.transpose() * dy_m;
    dx = Tensor3<T>(g.cin, g.hin, g.win);
    col2im_add(dcols, g, dx);
}

// Transposed convolution from (cin, hi, wi) to (cout, ho, wo) with
// W (cin x cout*k*k). `g` is the geometry of the mirror convolution, i.e.
// conv_geom(cout, ho, wo, cin, k, s).
template <typename T>
void deconv_forward(const Tensor3<T>& x, const ConvGeom& g,
                    const Eigen::Map<const MatX<T>>& w, const Eigen::Map<const VecX<T>>& b,
                    Tensor3<T>& y) {
    MatX<T> cols(std::ptrdiff_t(g.cin) * g.k * g.k, std::ptrdiff_t(g.hout) * g.wout);
    cols.noalias() = w.transpose() * x.as_matrix();
    y = Tensor3<T>(g.cin, g.hin, g.win);
    col2im_add(cols, g, y);
    y.as_matrix().colwise() += b;
}

template <typename T>
void deconv_backward(const Tensor3<T>& x, const Tensor3<T>& dy, const ConvGeom& g,
                     const Eigen::Map<const MatX<T>>& w, Eigen::Map<MatX<T>> dw,
                     Eigen::Map<VecX<T>> db, Tensor3<T>& dx, MatX<T>& cols_scratch) {
    im2col(dy, g, cols_scratch);
    dw.noalias() += x.as_matrix() * cols_scratch.transpose();
    db.noalias() += dy.as_matrix().rowwise().sum();
    dx = Tensor3<T>(g.cout, g.hout, g.wout);
    dx.as_matrix().noalias() = w * cols_scratch;
}

template <typename T>
void leaky_relu_forward(VecX<T>& v, T slope) {
    for (std::ptrdiff_t i = 0; i < v.size(); ++i)
        if (v[i] < T(0)) v[i] *= slope;
}

// pre is the pre-activation value cached from the forward pass.
template <typename T>
void leaky_relu_backward(const VecX<T>& pre, VecX<T>& grad, T slope) {
    for (std::ptrdiff_t i = 0; i < grad.size(); ++i)
        if (pre[i] < T(0)) grad[i] *= slope;
}

template <typename T>
T sigmoid(T x) {
    return x >= T(0) ? T(1) / (T(1) + std::exp(-x)) : std::exp(x) / (T(1) + std::exp(x));
}

// Plain fully connected stack with leaky-rectifier hidden activations and a
// linear output layer. Parameter names: <prefix>.fc<i>.W / .b.
template <typename T>
struct Mlp {
    std::vector<int> widths;  // input, hidden..., output
    std::vector<int> w_idx, b_idx;
    T slope = T(0.2);
    bool activate_output = false;  // apply the nonlinearity after the last layer too

    void build(ParamPack<T>& pack, const std::string& prefix, std::vector<int> layer_widths) {
        widths = std::move(layer_widths);
        if (widths.size() < 2) throw ConfigError("Mlp: need at least input and output widths");
        for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
            w_idx.push_back(pack.add(prefix + ".fc" + std::to_string(i) + ".W",
                                     {widths[i + 1], widths[i]}));
            b_idx.push_back(pack.add(prefix + ".fc" + std::to_string(i) + ".b", {widths[i + 1]}));
        }
    }

    int n_layers() const { return static_cast<int>(w_idx.size()); }

    struct Cache {
        std::vector<VecX<T>> inputs;  // input to each layer
        std::vector<VecX<T>> pre;     // pre-activation of each layer
    };

    VecX<T> forward(const ParamPack<T>& pack, const VecX<T>& params, const VecX<T>& x,
                    Cache* cache = nullptr) const {
        VecX<T> h = x;
        if (cache) {
            cache->inputs.assign(n_layers(), VecX<T>());
            cache->pre.assign(n_layers(), VecX<T>());
        }
        for (int i = 0; i < n_layers(); ++i) {
            if (cache) cache->inputs[i] = h;
            VecX<T> z = pack.mat(params, w_idx[i]) * h + pack.vec(params, b_idx[i]);
            if (cache) cache->pre[i] = z;
            if (i + 1 < n_layers() || activate_output) leaky_relu_forward(z, slope);
            h = std::move(z);
        }
        return h;
    }

    // Accumulates parameter gradients into `grad`, returns dL/dx.
    VecX<T> backward(const ParamPack<T>& pack, const VecX<T>& params, const Cache& cache,
                     const VecX<T>& dout, VecX<T>& grad) const {
        VecX<T> d = dout;
        for (int i = n_layers() - 1; i >= 0; --i) {
            if (i + 1 < n_layers() || activate_output) leaky_relu_backward(cache.pre[i], d, slope);
            pack.mat(grad, w_idx[i]).noalias() += d * cache.inputs[i].transpose();
            pack.vec(grad, b_idx[i]).noalias() += d;
            d = (pack.mat(params, w_idx[i]).transpose() * d).eval();
        }
        return d;
    }
};

}  // namespace afp::nn
