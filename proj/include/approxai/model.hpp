#pragma once
// Minimal feed-forward network evaluated in double precision, with analytic
// gradients of any output with respect to the input.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "approxai/error.hpp"
#include "approxai/matrix.hpp"

namespace approxai {

enum class LayerKind { dense, conv2d, flatten, relu, softmax, identity };
enum class Activation { identity, relu, softmax };

using Shape = std::vector<std::size_t>;

[[nodiscard]] inline std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

[[nodiscard]] inline std::string shape_string(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

/// dense:  weights is out x in, bias has `out` entries.
/// conv2d: weights is the kernel (kh x kw), bias has one entry; single
///         channel, stride 1, zero "same" padding (cross-correlation form).
/// flatten/relu/softmax/identity carry no parameters.
struct Layer {
  LayerKind kind = LayerKind::identity;
  Matrix<double> weights;
  std::vector<double> bias;
  Activation activation = Activation::identity;
  int stride = 1;

  friend bool operator==(const Layer&, const Layer&) = default;
};

class TinyModel {
 public:
  TinyModel() = default;
  TinyModel(Shape input_shape, std::vector<Layer> layers)
      : input_shape_(std::move(input_shape)), layers_(std::move(layers)) {
    validate();
  }

  [[nodiscard]] const Shape& input_shape() const noexcept { return input_shape_; }
  [[nodiscard]] std::size_t input_size() const { return shape_size(input_shape_); }
  [[nodiscard]] const std::vector<Layer>& layers() const noexcept { return layers_; }
  [[nodiscard]] std::size_t output_dim() const noexcept { return output_dim_; }

  [[nodiscard]] std::vector<double> forward(std::span<const double> x) const {
    check_input(x);
    std::vector<double> value(x.begin(), x.end());
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      std::vector<double> pre = apply_linear(layers_[i], shapes_[i], value);
      value = apply_activation(effective_activation(layers_[i]), std::move(pre));
    }
    return value;
  }

  /// d output[class_index] / d x by reverse-mode differentiation. At a relu
  /// kink the derivative is taken as zero.
  [[nodiscard]] std::vector<double> input_gradient(std::span<const double> x,
                                                   std::size_t class_index) const {
    check_input(x);
    if (class_index >= output_dim_) {
      throw Error(Errc::out_of_range, "class index " + std::to_string(class_index) +
                                          " but model has " + std::to_string(output_dim_) +
                                          " outputs");
    }
    std::vector<std::vector<double>> pre(layers_.size());
    std::vector<std::vector<double>> post(layers_.size());
    std::vector<double> value(x.begin(), x.end());
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      pre[i] = apply_linear(layers_[i], shapes_[i], value);
      post[i] = apply_activation(effective_activation(layers_[i]), pre[i]);
      value = post[i];
    }

    std::vector<double> grad(output_dim_, 0.0);
    grad[class_index] = 1.0;
    for (std::size_t i = layers_.size(); i-- > 0;) {
      grad = activation_backward(effective_activation(layers_[i]), pre[i], post[i], std::move(grad));
      grad = linear_backward(layers_[i], shapes_[i], std::move(grad));
    }
    return grad;
  }

  /// Values entering each layer's activation, for kink checks.
  [[nodiscard]] std::vector<std::vector<double>> preactivations(std::span<const double> x) const {
    check_input(x);
    std::vector<std::vector<double>> pre(layers_.size());
    std::vector<double> value(x.begin(), x.end());
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      pre[i] = apply_linear(layers_[i], shapes_[i], value);
      value = apply_activation(effective_activation(layers_[i]), pre[i]);
    }
    return pre;
  }

  /// Shape entering layer i; index layers().size() gives the output shape.
  [[nodiscard]] const Shape& shape_before(std::size_t i) const { return shapes_.at(i); }

  friend bool operator==(const TinyModel& a, const TinyModel& b) {
    return a.input_shape_ == b.input_shape_ && a.layers_ == b.layers_;
  }

 private:
  static Activation effective_activation(const Layer& layer) {
    switch (layer.kind) {
      case LayerKind::relu: return Activation::relu;
      case LayerKind::softmax: return Activation::softmax;
      case LayerKind::identity:
      case LayerKind::flatten: return Activation::identity;
      case LayerKind::dense:
      case LayerKind::conv2d: return layer.activation;
    }
    return Activation::identity;
  }

  void validate() {
    if (input_shape_.empty() || shape_size(input_shape_) == 0) {
      throw Error(Errc::shape_mismatch, "input_shape must be non-empty with positive extents");
    }
    shapes_.assign(1, input_shape_);
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      const Layer& layer = layers_[i];
      const Shape& in = shapes_.back();
      const std::string where = "layer " + std::to_string(i) + ": ";
      for (double w : layer.weights.data()) {
        if (!std::isfinite(w)) throw Error(Errc::non_finite_weights, where + "non-finite weight");
      }
      for (double b : layer.bias) {
        if (!std::isfinite(b)) throw Error(Errc::non_finite_weights, where + "non-finite bias");
      }
      Shape out = in;
      switch (layer.kind) {
        case LayerKind::dense:
          if (in.size() != 1 || layer.weights.cols() != in[0] || layer.weights.rows() == 0) {
            throw Error(Errc::shape_mismatch, where + "dense expects a flat input of " +
                                                  std::to_string(layer.weights.cols()) +
                                                  " values, got " + shape_string(in));
          }
          if (layer.bias.size() != layer.weights.rows()) {
            throw Error(Errc::shape_mismatch, where + "dense bias length differs from output size");
          }
          out = {layer.weights.rows()};
          break;
        case LayerKind::conv2d:
          if (in.size() != 2) {
            throw Error(Errc::shape_mismatch, where + "conv2d expects a 2-D input, got " + shape_string(in));
          }
          if (layer.weights.empty()) throw Error(Errc::shape_mismatch, where + "conv2d kernel is empty");
          if (layer.bias.size() != 1) {
            throw Error(Errc::shape_mismatch, where + "conv2d takes exactly one bias value");
          }
          if (layer.stride != 1) {
            throw Error(Errc::invalid_argument, where + "conv2d supports stride 1 only");
          }
          break;
        case LayerKind::flatten:
          out = {shape_size(in)};
          break;
        case LayerKind::relu:
        case LayerKind::softmax:
        case LayerKind::identity:
          break;
      }
      if (effective_activation(layer) == Activation::softmax && out.size() != 1) {
        throw Error(Errc::shape_mismatch, where + "softmax needs a flat input");
      }
      shapes_.push_back(std::move(out));
    }
    output_dim_ = shape_size(shapes_.back());
  }

  void check_input(std::span<const double> x) const {
    if (x.size() != input_size()) {
      throw Error(Errc::shape_mismatch, "input has " + std::to_string(x.size()) +
                                            " values, model expects " +
                                            std::to_string(input_size()) + " " +
                                            shape_string(input_shape_));
    }
  }

  static std::vector<double> apply_linear(const Layer& layer, const Shape& in_shape,
                                          const std::vector<double>& in) {
    switch (layer.kind) {
      case LayerKind::dense: {
        const auto& w = layer.weights;
        std::vector<double> out(w.rows());
        for (std::size_t r = 0; r < w.rows(); ++r) {
          double acc = layer.bias[r];
          for (std::size_t c = 0; c < w.cols(); ++c) acc += w(r, c) * in[c];
          out[r] = acc;
        }
        return out;
      }
      case LayerKind::conv2d: {
        const std::size_t h = in_shape[0], wd = in_shape[1];
        const auto& k = layer.weights;
        const auto ph = static_cast<std::ptrdiff_t>((k.rows() - 1) / 2);
        const auto pw = static_cast<std::ptrdiff_t>((k.cols() - 1) / 2);
        std::vector<double> out(h * wd, layer.bias[0]);
        for (std::size_t i = 0; i < h; ++i) {
          for (std::size_t j = 0; j < wd; ++j) {
            double acc = layer.bias[0];
            for (std::size_t u = 0; u < k.rows(); ++u) {
              const auto si = static_cast<std::ptrdiff_t>(i + u) - ph;
              if (si < 0 || si >= static_cast<std::ptrdiff_t>(h)) continue;
              for (std::size_t v = 0; v < k.cols(); ++v) {
                const auto sj = static_cast<std::ptrdiff_t>(j + v) - pw;
                if (sj < 0 || sj >= static_cast<std::ptrdiff_t>(wd)) continue;
                acc += k(u, v) * in[static_cast<std::size_t>(si) * wd + static_cast<std::size_t>(sj)];
              }
            }
            out[i * wd + j] = acc;
          }
        }
        return out;
      }
      default:
        return in;
    }
  }

  static std::vector<double> linear_backward(const Layer& layer, const Shape& in_shape,
                                             std::vector<double> grad) {
    switch (layer.kind) {
      case LayerKind::dense: {
        const auto& w = layer.weights;
        std::vector<double> out(w.cols(), 0.0);
        for (std::size_t r = 0; r < w.rows(); ++r)
          for (std::size_t c = 0; c < w.cols(); ++c) out[c] += w(r, c) * grad[r];
        return out;
      }
      case LayerKind::conv2d: {
        const std::size_t h = in_shape[0], wd = in_shape[1];
        const auto& k = layer.weights;
        const auto ph = static_cast<std::ptrdiff_t>((k.rows() - 1) / 2);
        const auto pw = static_cast<std::ptrdiff_t>((k.cols() - 1) / 2);
        std::vector<double> out(h * wd, 0.0);
        for (std::size_t i = 0; i < h; ++i) {
          for (std::size_t j = 0; j < wd; ++j) {
            const double g = grad[i * wd + j];
            for (std::size_t u = 0; u < k.rows(); ++u) {
              const auto si = static_cast<std::ptrdiff_t>(i + u) - ph;
              if (si < 0 || si >= static_cast<std::ptrdiff_t>(h)) continue;
              for (std::size_t v = 0; v < k.cols(); ++v) {
                const auto sj = static_cast<std::ptrdiff_t>(j + v) - pw;
                if (sj < 0 || sj >= static_cast<std::ptrdiff_t>(wd)) continue;
                out[static_cast<std::size_t>(si) * wd + static_cast<std::size_t>(sj)] += k(u, v) * g;
              }
            }
          }
        }
        return out;
      }
      default:
        return grad;
    }
  }

  static std::vector<double> apply_activation(Activation act, std::vector<double> z) {
    switch (act) {
      case Activation::identity:
        return z;
      case Activation::relu:
        for (double& v : z) v = v > 0.0 ? v : 0.0;
        return z;
      case Activation::softmax: {
        const double top = *std::max_element(z.begin(), z.end());
        double sum = 0.0;
        for (double& v : z) {
          v = std::exp(v - top);
          sum += v;
        }
        for (double& v : z) v /= sum;
        return z;
      }
    }
    return z;
  }

  static std::vector<double> activation_backward(Activation act, const std::vector<double>& pre,
                                                 const std::vector<double>& post,
                                                 std::vector<double> grad) {
    switch (act) {
      case Activation::identity:
        return grad;
      case Activation::relu:
        for (std::size_t i = 0; i < grad.size(); ++i) {
          if (!(pre[i] > 0.0)) grad[i] = 0.0;
        }
        return grad;
      case Activation::softmax: {
        double dot = 0.0;
        for (std::size_t i = 0; i < grad.size(); ++i) dot += grad[i] * post[i];
        for (std::size_t i = 0; i < grad.size(); ++i) grad[i] = post[i] * (grad[i] - dot);
        return grad;
      }
    }
    return grad;
  }

  Shape input_shape_;
  std::vector<Layer> layers_;
  std::vector<Shape> shapes_;
  std::size_t output_dim_ = 0;
};

}  // namespace approxai
