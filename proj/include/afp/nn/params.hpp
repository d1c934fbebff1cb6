#pragma once

#include <string>
#include <vector>

#include "afp/core/errors.hpp"
#include "afp/core/rng.hpp"
#include "afp/nn/tensor.hpp"

namespace afp::nn {

struct TensorSpec {
    std::string name;
    std::vector<int> shape;
    std::ptrdiff_t offset = 0;  // element offset into the flat vector
    std::ptrdiff_t size = 0;
};

// Flat parameter storage with a named-tensor directory. Keeping everything
// in one contiguous vector makes the optimizer, finite-difference checks,
// and checkpoint serialization trivial: gradients live in a parallel vector
// addressed through the same directory.
template <typename T>
class ParamPack {
public:
    int add(std::string name, std::vector<int> shape) {
        if (finalized_) throw ConfigError("ParamPack: add() after finalize()");
        TensorSpec spec;
        spec.name = std::move(name);
        spec.shape = std::move(shape);
        spec.size = 1;
        for (int d : spec.shape) spec.size *= d;
        spec.offset = total_;
        total_ += spec.size;
        specs_.push_back(std::move(spec));
        return static_cast<int>(specs_.size()) - 1;
    }

    void finalize() {
        values_ = VecX<T>::Zero(total_);
        finalized_ = true;
    }

    bool finalized() const { return finalized_; }
    std::ptrdiff_t total() const { return total_; }
    const std::vector<TensorSpec>& specs() const { return specs_; }

    VecX<T>& values() { return values_; }
    const VecX<T>& values() const { return values_; }

    VecX<T> zeros_like() const { return VecX<T>::Zero(total_); }

    int find(const std::string& name) const {
        for (std::size_t i = 0; i < specs_.size(); ++i)
            if (specs_[i].name == name) return static_cast<int>(i);
        throw ConfigError("ParamPack: no tensor named " + name);
    }

    // Matrix view of tensor idx in an arbitrary flat buffer with the pack's
    // layout (rows = shape[0], cols = product of the rest).
    Eigen::Map<MatX<T>> mat(VecX<T>& buf, int idx) const {
        const TensorSpec& s = specs_.at(idx);
        const std::ptrdiff_t rows = s.shape.at(0);
        return {buf.data() + s.offset, rows, s.size / rows};
    }
    Eigen::Map<const MatX<T>> mat(const VecX<T>& buf, int idx) const {
        const TensorSpec& s = specs_.at(idx);
        const std::ptrdiff_t rows = s.shape.at(0);
        return {buf.data() + s.offset, rows, s.size / rows};
    }
    Eigen::Map<VecX<T>> vec(VecX<T>& buf, int idx) const {
        const TensorSpec& s = specs_.at(idx);
        return {buf.data() + s.offset, s.size};
    }
    Eigen::Map<const VecX<T>> vec(const VecX<T>& buf, int idx) const {
        const TensorSpec& s = specs_.at(idx);
        return {buf.data() + s.offset, s.size};
    }

    Eigen::Map<MatX<T>> mat(int idx) { return mat(values_, idx); }
    Eigen::Map<const MatX<T>> mat(int idx) const { return mat(values_, idx); }
    Eigen::Map<VecX<T>> vec(int idx) { return vec(values_, idx); }
    Eigen::Map<const VecX<T>> vec(int idx) const { return vec(values_, idx); }

    // He-style init for weight matrices, zero biases (names ending ".b").
    void init_random(Rng& rng) {
        for (std::size_t i = 0; i < specs_.size(); ++i) {
            const TensorSpec& s = specs_[i];
            auto v = vec(static_cast<int>(i));
            if (s.name.size() >= 2 && s.name.compare(s.name.size() - 2, 2, ".b") == 0) {
                v.setZero();
            } else {
                const std::ptrdiff_t fan_in = s.size / s.shape.at(0);
                const double std = std::sqrt(2.0 / static_cast<double>(fan_in));
                for (std::ptrdiff_t k = 0; k < s.size; ++k)
                    v[k] = static_cast<T>(rng.normal(0.0, std));
            }
        }
    }

private:
    std::vector<TensorSpec> specs_;
    VecX<T> values_;
    std::ptrdiff_t total_ = 0;
    bool finalized_ = false;
};

}  // namespace afp::nn
