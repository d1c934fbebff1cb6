#pragma once

#include <Eigen/Dense>
#include <vector>

namespace afp::nn {

template <typename T>
using VecX = Eigen::Matrix<T, Eigen::Dynamic, 1>;
template <typename T>
using MatX = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
template <typename T>
using MatXRM = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Channel-major feature map: index (c, y, x) = (c*H + y)*W + x.
template <typename T>
struct Tensor3 {
    int c = 0, h = 0, w = 0;
    VecX<T> data;

    Tensor3() = default;
    Tensor3(int c_, int h_, int w_) : c(c_), h(h_), w(w_), data(VecX<T>::Zero(std::ptrdiff_t(c_) * h_ * w_)) {}

    std::ptrdiff_t size() const { return data.size(); }
    T& at(int ci, int y, int x) { return data[(std::ptrdiff_t(ci) * h + y) * w + x]; }
    T at(int ci, int y, int x) const { return data[(std::ptrdiff_t(ci) * h + y) * w + x]; }

    // View as channels x (h*w) matrix over the same storage.
    Eigen::Map<MatXRM<T>> as_matrix() { return {data.data(), c, std::ptrdiff_t(h) * w}; }
    Eigen::Map<const MatXRM<T>> as_matrix() const { return {data.data(), c, std::ptrdiff_t(h) * w}; }

    void set_zero() { data.setZero(); }
};

}  // namespace afp::nn
