#pragma once

// Bidirectional stacked LSTM encoder with a two-layer classification head,
// softmax cross-entropy, and hand-written reverse-mode gradients.
//
// Layout conventions:
//   * gate order inside every 4h block is (input, forget, cell, output);
//   * a batch of B windows of length L is a [k_in x L*B] matrix whose column
//     t*B + b holds timestep t of window b;
//   * layer l > 0 consumes [forward_h ; backward_h] of layer l - 1 (2h rows);
//   * the window summary is z = [forward_h at t = L ; backward_h at t = 1].
//
// Everything is templated on the scalar type: double for gradient checking,
// float for training throughput. Explicit instantiations live in model.cpp.

#include <Eigen/Core>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gazetrait/random.hpp"

namespace gazetrait::model {

template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

struct ModelDims {
  std::size_t input_dim = 12;
  std::size_t hidden_size = 64;
  std::size_t num_layers = 2;
  std::size_t head_hidden = 64;
  std::size_t num_classes = 3;
  double dropout = 0.3;

  void validate() const;
  friend bool operator==(const ModelDims&, const ModelDims&) = default;
};

template <typename Scalar>
struct LstmLayerParams {
  Mat<Scalar> input_weights;      // [4h x k_in]
  Mat<Scalar> recurrent_weights;  // [4h x h]
  Mat<Scalar> bias;               // [4h x 1]
};

template <typename Scalar>
struct ModelParams {
  ModelDims dims;
  std::vector<LstmLayerParams<Scalar>> forward_layers;
  std::vector<LstmLayerParams<Scalar>> backward_layers;
  Mat<Scalar> head_w1;  // [head_hidden x 2h]
  Mat<Scalar> head_b1;  // [head_hidden x 1]
  Mat<Scalar> head_w2;  // [C x head_hidden]
  Mat<Scalar> head_b2;  // [C x 1]

  static ModelParams zeros(const ModelDims& dims);

  /// Visits every tensor as f(name, matrix) in a fixed order.
  template <typename F>
  void for_each(F&& f);
  template <typename F>
  void for_each(F&& f) const;

  std::size_t parameter_count() const;
  void set_zero();
  bool all_finite() const;

  template <typename To>
  ModelParams<To> cast() const;
};

/// Gradient buffers share the parameter layout.
template <typename Scalar>
using GradientTape = ModelParams<Scalar>;

/// Orthogonal gate blocks for LSTM weights, Xavier-uniform head weights,
/// zero biases except forget-gate bias = 1. Deterministic given the seed.
ModelParams<double> init_params(std::uint64_t seed, const ModelDims& dims);

/// Single LSTM step on one vector; the scalar reference for the batched code.
template <typename Scalar>
std::pair<Vec<Scalar>, Vec<Scalar>> lstm_cell(const Vec<Scalar>& x, const Vec<Scalar>& h_prev,
                                              const Vec<Scalar>& c_prev,
                                              const LstmLayerParams<Scalar>& layer);

template <typename Scalar>
struct Batch {
  Mat<Scalar> inputs;  // [k_in x L*B]
  std::size_t length = 0;
  std::size_t size = 0;
  std::vector<int> labels;  // class indices 0..C-1, may be empty for inference

  /// Builds a batch from per-window [k_in x L] matrices.
  static Batch from_windows(std::span<const Mat<Scalar>> windows, std::vector<int> labels = {});
};

/// Inverted-dropout multipliers (0 or 1/(1-p)). Empty means dropout disabled.
template <typename Scalar>
struct DropoutMasks {
  std::vector<Mat<Scalar>> between_layers;  // num_layers - 1 masks of [2h x L*B]
  Mat<Scalar> head;                         // [head_hidden x B]

  bool enabled() const { return head.size() > 0; }
};

template <typename Scalar>
DropoutMasks<Scalar> sample_dropout_masks(const ModelDims& dims, std::size_t length,
                                          std::size_t batch_size, Rng& rng);

template <typename Scalar>
struct DirectionCache {
  Mat<Scalar> gates;   // activated gates [4h x L*B]
  Mat<Scalar> cell;    // [h x L*B]
  Mat<Scalar> tanh_c;  // [h x L*B]
  Mat<Scalar> hidden;  // [h x L*B]
};

template <typename Scalar>
struct ForwardCache {
  std::vector<Mat<Scalar>> layer_inputs;  // input of each layer (after dropout)
  std::vector<DirectionCache<Scalar>> forward_dir;
  std::vector<DirectionCache<Scalar>> backward_dir;
  Mat<Scalar> z;          // [2h x B]
  Mat<Scalar> head_pre;   // [head_hidden x B]
  Mat<Scalar> head_act;   // relu (and dropout) output
  Mat<Scalar> logits;     // [C x B]
  Mat<Scalar> probs;      // [C x B]
  DropoutMasks<Scalar> masks;
  std::size_t length = 0;
  std::size_t batch_size = 0;
};

/// Runs the encoder and head. Pass empty masks for evaluation mode.
template <typename Scalar>
ForwardCache<Scalar> forward(const ModelParams<Scalar>& params, const Batch<Scalar>& batch,
                             DropoutMasks<Scalar> masks = {});

/// Window summaries z for a batch: [2h x B].
template <typename Scalar>
Mat<Scalar> encode(const ModelParams<Scalar>& params, const Batch<Scalar>& batch,
                   const DropoutMasks<Scalar>& masks = {});

/// Summary z = [forward_h_L ; backward_h_1] for one window given as [k_in x L].
/// With dropout enabled, masks are drawn from `rng`.
template <typename Scalar>
Vec<Scalar> encode_window(const Mat<Scalar>& frames, const ModelParams<Scalar>& params,
                          bool dropout_enabled, Rng& rng);

/// Numerically stable softmax of each column.
template <typename Scalar>
Mat<Scalar> softmax(const Mat<Scalar>& logits);

/// Head applied to summaries z [2h x B] in evaluation mode: probabilities [C x B].
template <typename Scalar>
Mat<Scalar> classify(const Mat<Scalar>& z, const ModelParams<Scalar>& params);

inline constexpr double kProbabilityFloor = 1e-12;

/// -log(max(p_y, 1e-12)) with y a 0-based class index.
template <typename Scalar>
Scalar cross_entropy(const Vec<Scalar>& probs, int y);

template <typename Scalar>
Scalar mean_loss(const ForwardCache<Scalar>& cache, std::span<const int> labels);

/// Exact gradient of the mean batch loss; overwrites `grads`. Reuses the
/// dropout masks stored in the cache. Returns the mean loss.
template <typename Scalar>
Scalar backward(const ModelParams<Scalar>& params, const Batch<Scalar>& batch,
                const ForwardCache<Scalar>& cache, GradientTape<Scalar>& grads);

// ---------------------------------------------------------------------------

template <typename Scalar>
template <typename F>
void ModelParams<Scalar>::for_each(F&& f) {
  for (std::size_t l = 0; l < forward_layers.size(); ++l) {
    for (int dir = 0; dir < 2; ++dir) {
      auto& layer = dir == 0 ? forward_layers[l] : backward_layers[l];
      const std::string prefix =
          std::string("lstm.") + (dir == 0 ? "fwd." : "bwd.") + std::to_string(l) + ".";
      f(prefix + "input_weights", layer.input_weights);
      f(prefix + "recurrent_weights", layer.recurrent_weights);
      f(prefix + "bias", layer.bias);
    }
  }
  f(std::string("head.w1"), head_w1);
  f(std::string("head.b1"), head_b1);
  f(std::string("head.w2"), head_w2);
  f(std::string("head.b2"), head_b2);
}

template <typename Scalar>
template <typename F>
void ModelParams<Scalar>::for_each(F&& f) const {
  const_cast<ModelParams*>(this)->for_each(
      [&f](const std::string& name, Mat<Scalar>& m) { f(name, static_cast<const Mat<Scalar>&>(m)); });
}

template <typename Scalar>
template <typename To>
ModelParams<To> ModelParams<Scalar>::cast() const {
  ModelParams<To> out = ModelParams<To>::zeros(dims);
  std::vector<const Mat<Scalar>*> src;
  for_each([&src](const std::string&, const Mat<Scalar>& m) { src.push_back(&m); });
  std::size_t i = 0;
  out.for_each([&](const std::string&, Mat<To>& m) { m = src[i++]->template cast<To>(); });
  return out;
}

}  // namespace gazetrait::model
