#include "gazetrait/model.hpp"

#include <Eigen/QR>
#include <algorithm>
#include <cmath>

#include "gazetrait/error.hpp"

namespace gazetrait::model {

void ModelDims::validate() const {
  if (input_dim == 0 || hidden_size == 0 || num_layers == 0 || head_hidden == 0 ||
      num_classes < 2) {
    throw Error(ErrorCode::InvalidArgument, "model dimensions must be positive");
  }
  if (!(dropout >= 0.0 && dropout < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "dropout must be in [0, 1)");
  }
}

template <typename Scalar>
ModelParams<Scalar> ModelParams<Scalar>::zeros(const ModelDims& dims) {
  dims.validate();
  const auto h = static_cast<Eigen::Index>(dims.hidden_size);
  ModelParams p;
  p.dims = dims;
  for (std::size_t l = 0; l < dims.num_layers; ++l) {
    const auto k_in = static_cast<Eigen::Index>(l == 0 ? dims.input_dim : 2 * dims.hidden_size);
    LstmLayerParams<Scalar> layer{Mat<Scalar>::Zero(4 * h, k_in), Mat<Scalar>::Zero(4 * h, h),
                                  Mat<Scalar>::Zero(4 * h, 1)};
    p.forward_layers.push_back(layer);
    p.backward_layers.push_back(layer);
  }
  const auto hc = static_cast<Eigen::Index>(dims.head_hidden);
  const auto c = static_cast<Eigen::Index>(dims.num_classes);
  p.head_w1 = Mat<Scalar>::Zero(hc, 2 * h);
  p.head_b1 = Mat<Scalar>::Zero(hc, 1);
  p.head_w2 = Mat<Scalar>::Zero(c, hc);
  p.head_b2 = Mat<Scalar>::Zero(c, 1);
  return p;
}

template <typename Scalar>
std::size_t ModelParams<Scalar>::parameter_count() const {
  std::size_t n = 0;
  for_each([&n](const std::string&, const Mat<Scalar>& m) { n += static_cast<std::size_t>(m.size()); });
  return n;
}

template <typename Scalar>
void ModelParams<Scalar>::set_zero() {
  for_each([](const std::string&, Mat<Scalar>& m) { m.setZero(); });
}

template <typename Scalar>
bool ModelParams<Scalar>::all_finite() const {
  bool ok = true;
  for_each([&ok](const std::string&, const Mat<Scalar>& m) { ok = ok && m.allFinite(); });
  return ok;
}

namespace {

Mat<double> gaussian(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Mat<double> m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = normal(rng);
  }
  return m;
}

// Orthonormal rows (rows <= cols) or columns (rows > cols).
Mat<double> orthogonal(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  const bool transpose = rows < cols;
  const Eigen::Index r = transpose ? cols : rows;
  const Eigen::Index c = transpose ? rows : cols;
  Mat<double> a = gaussian(r, c, rng);
  Eigen::HouseholderQR<Mat<double>> qr(a);
  Mat<double> q = qr.householderQ() * Mat<double>::Identity(r, c);
  const Mat<double> rmat = qr.matrixQR().topRows(c).template triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < c; ++j) {
    if (rmat(j, j) < 0) q.col(j) *= -1.0;
  }
  if (transpose) return q.transpose();
  return q;
}

Mat<double> xavier_uniform(Eigen::Index fan_out, Eigen::Index fan_in, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> uni(-bound, bound);
  Mat<double> m(fan_out, fan_in);
  for (Eigen::Index j = 0; j < fan_in; ++j) {
    for (Eigen::Index i = 0; i < fan_out; ++i) m(i, j) = uni(rng);
  }
  return m;
}

void init_layer(LstmLayerParams<double>& layer, Eigen::Index h, Rng& rng) {
  const Eigen::Index k_in = layer.input_weights.cols();
  for (Eigen::Index g = 0; g < 4; ++g) {
    layer.input_weights.middleRows(g * h, h) = orthogonal(h, k_in, rng);
    layer.recurrent_weights.middleRows(g * h, h) = orthogonal(h, h, rng);
  }
  layer.bias.setZero();
  layer.bias.middleRows(h, h).setOnes();
}

}  // namespace

ModelParams<double> init_params(std::uint64_t seed, const ModelDims& dims) {
  ModelParams<double> p = ModelParams<double>::zeros(dims);
  Rng rng = make_rng({seed, key(Stream::ModelInit)});
  const auto h = static_cast<Eigen::Index>(dims.hidden_size);
  for (std::size_t l = 0; l < dims.num_layers; ++l) {
    init_layer(p.forward_layers[l], h, rng);
    init_layer(p.backward_layers[l], h, rng);
  }
  p.head_w1 = xavier_uniform(p.head_w1.rows(), p.head_w1.cols(), rng);
  p.head_w2 = xavier_uniform(p.head_w2.rows(), p.head_w2.cols(), rng);
  return p;
}

namespace {

template <typename Scalar>
Scalar sigmoid(Scalar x) {
  return Scalar(1) / (Scalar(1) + std::exp(-x));
}

}  // namespace

template <typename Scalar>
std::pair<Vec<Scalar>, Vec<Scalar>> lstm_cell(const Vec<Scalar>& x, const Vec<Scalar>& h_prev,
                                              const Vec<Scalar>& c_prev,
                                              const LstmLayerParams<Scalar>& layer) {
  const Eigen::Index h = layer.recurrent_weights.cols();
  if (x.size() != layer.input_weights.cols() || h_prev.size() != h || c_prev.size() != h) {
    throw Error(ErrorCode::ShapeMismatch, "lstm_cell input shapes do not match the layer");
  }
  const Vec<Scalar> pre = layer.input_weights * x + layer.recurrent_weights * h_prev + layer.bias;
  const auto i = pre.segment(0, h).unaryExpr([](Scalar v) { return sigmoid(v); }).eval();
  const auto f = pre.segment(h, h).unaryExpr([](Scalar v) { return sigmoid(v); }).eval();
  const auto g = pre.segment(2 * h, h).array().tanh().matrix().eval();
  const auto o = pre.segment(3 * h, h).unaryExpr([](Scalar v) { return sigmoid(v); }).eval();
  Vec<Scalar> c = f.cwiseProduct(c_prev) + i.cwiseProduct(g);
  Vec<Scalar> hn = o.cwiseProduct(c.array().tanh().matrix());
  if (!c.allFinite() || !hn.allFinite()) {
    throw Error(ErrorCode::NonFiniteActivation, "LSTM state became non-finite");
  }
  return {std::move(hn), std::move(c)};
}

template <typename Scalar>
Batch<Scalar> Batch<Scalar>::from_windows(std::span<const Mat<Scalar>> windows,
                                          std::vector<int> labels) {
  if (windows.empty()) throw Error(ErrorCode::InvalidArgument, "empty batch");
  Batch b;
  b.size = windows.size();
  b.length = static_cast<std::size_t>(windows[0].cols());
  const auto k = windows[0].rows();
  const auto B = static_cast<Eigen::Index>(b.size);
  b.inputs.resize(k, static_cast<Eigen::Index>(b.length) * B);
  for (Eigen::Index w = 0; w < B; ++w) {
    const auto& m = windows[static_cast<std::size_t>(w)];
    if (m.rows() != k || static_cast<std::size_t>(m.cols()) != b.length) {
      throw Error(ErrorCode::ShapeMismatch, "windows in a batch must share shape");
    }
    for (Eigen::Index t = 0; t < m.cols(); ++t) b.inputs.col(t * B + w) = m.col(t);
  }
  if (!labels.empty() && labels.size() != b.size) {
    throw Error(ErrorCode::ShapeMismatch, "label count does not match batch size");
  }
  b.labels = std::move(labels);
  return b;
}

template <typename Scalar>
DropoutMasks<Scalar> sample_dropout_masks(const ModelDims& dims, std::size_t length,
                                          std::size_t batch_size, Rng& rng) {
  DropoutMasks<Scalar> masks;
  const double keep = 1.0 - dims.dropout;
  const Scalar scale = static_cast<Scalar>(1.0 / keep);
  std::bernoulli_distribution bern(keep);
  auto draw = [&](Eigen::Index rows, Eigen::Index cols) {
    Mat<Scalar> m(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j) {
      for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = bern(rng) ? scale : Scalar(0);
    }
    return m;
  };
  const auto cols = static_cast<Eigen::Index>(length * batch_size);
  for (std::size_t l = 1; l < dims.num_layers; ++l) {
    masks.between_layers.push_back(draw(static_cast<Eigen::Index>(2 * dims.hidden_size), cols));
  }
  masks.head = draw(static_cast<Eigen::Index>(dims.head_hidden),
                    static_cast<Eigen::Index>(batch_size));
  return masks;
}

namespace {

template <typename Scalar>
void run_direction(const LstmLayerParams<Scalar>& layer, const Mat<Scalar>& x, Eigen::Index L,
                   Eigen::Index B, bool reverse, DirectionCache<Scalar>& out) {
  const Eigen::Index h = layer.recurrent_weights.cols();
  out.gates.resize(4 * h, L * B);
  out.gates.noalias() = layer.input_weights * x;
  out.gates.colwise() += layer.bias.col(0);
  out.cell.resize(h, L * B);
  out.tanh_c.resize(h, L * B);
  out.hidden.resize(h, L * B);

  for (Eigen::Index s = 0; s < L; ++s) {
    const Eigen::Index t = reverse ? L - 1 - s : s;
    const Eigen::Index col = t * B;
    auto g = out.gates.middleCols(col, B);
    if (s > 0) {
      const Eigen::Index prev = (reverse ? t + 1 : t - 1) * B;
      g.noalias() += layer.recurrent_weights * out.hidden.middleCols(prev, B);
    }
    g.topRows(2 * h) = g.topRows(2 * h).array().logistic();
    g.middleRows(2 * h, h) = g.middleRows(2 * h, h).array().tanh();
    g.bottomRows(h) = g.bottomRows(h).array().logistic();

    auto c = out.cell.middleCols(col, B);
    c = g.topRows(h).cwiseProduct(g.middleRows(2 * h, h));
    if (s > 0) {
      const Eigen::Index prev = (reverse ? t + 1 : t - 1) * B;
      c += g.middleRows(h, h).cwiseProduct(out.cell.middleCols(prev, B));
    }
    auto tc = out.tanh_c.middleCols(col, B);
    tc = c.array().tanh();
    out.hidden.middleCols(col, B) = g.bottomRows(h).cwiseProduct(tc);
  }
  if (!out.cell.allFinite() || !out.hidden.allFinite()) {
    throw Error(ErrorCode::NonFiniteActivation, "LSTM state became non-finite");
  }
}

// Accumulates parameter gradients for one direction and adds the input
// gradient into dx. `dh` holds dLoss/dh_t for every column.
template <typename Scalar>
void backward_direction(const LstmLayerParams<Scalar>& layer, const Mat<Scalar>& x,
                        const DirectionCache<Scalar>& cache, const Mat<Scalar>& dh, Eigen::Index L,
                        Eigen::Index B, bool reverse, LstmLayerParams<Scalar>& grad,
                        Mat<Scalar>* dx) {
  const Eigen::Index h = layer.recurrent_weights.cols();
  Mat<Scalar> d_gates(4 * h, L * B);
  Mat<Scalar> dh_next = Mat<Scalar>::Zero(h, B);
  Mat<Scalar> dc_next = Mat<Scalar>::Zero(h, B);
  Mat<Scalar> dc(h, B);
  Mat<Scalar> dh_t(h, B);

  for (Eigen::Index s = L - 1; s >= 0; --s) {
    const Eigen::Index t = reverse ? L - 1 - s : s;
    const Eigen::Index col = t * B;
    const auto gates = cache.gates.middleCols(col, B);
    const auto i = gates.topRows(h).array();
    const auto f = gates.middleRows(h, h).array();
    const auto g = gates.middleRows(2 * h, h).array();
    const auto o = gates.bottomRows(h).array();
    const auto tc = cache.tanh_c.middleCols(col, B).array();

    dh_t = dh.middleCols(col, B) + dh_next;
    dc.array() = dh_t.array() * o * (Scalar(1) - tc.square()) + dc_next.array();

    auto dg = d_gates.middleCols(col, B);
    dg.topRows(h).array() = dc.array() * g * i * (Scalar(1) - i);
    if (s > 0) {
      const Eigen::Index prev = (reverse ? t + 1 : t - 1) * B;
      dg.middleRows(h, h).array() =
          dc.array() * cache.cell.middleCols(prev, B).array() * f * (Scalar(1) - f);
    } else {
      dg.middleRows(h, h).setZero();
    }
    dg.middleRows(2 * h, h).array() = dc.array() * i * (Scalar(1) - g.square());
    dg.bottomRows(h).array() = dh_t.array() * tc * o * (Scalar(1) - o);

    dc_next.array() = dc.array() * f;
    dh_next.noalias() = layer.recurrent_weights.transpose() * dg;
  }

  // Previous hidden state for each column in processing order; zero at the start.
  Mat<Scalar> h_prev = Mat<Scalar>::Zero(h, L * B);
  if (L > 1) {
    if (reverse) {
      h_prev.leftCols((L - 1) * B) = cache.hidden.rightCols((L - 1) * B);
    } else {
      h_prev.rightCols((L - 1) * B) = cache.hidden.leftCols((L - 1) * B);
    }
  }
  grad.input_weights.noalias() += d_gates * x.transpose();
  grad.recurrent_weights.noalias() += d_gates * h_prev.transpose();
  grad.bias += d_gates.rowwise().sum();
  if (dx) dx->noalias() += layer.input_weights.transpose() * d_gates;
}

template <typename Scalar>
void check_batch(const ModelParams<Scalar>& params, const Batch<Scalar>& batch) {
  if (batch.length == 0 || batch.size == 0) {
    throw Error(ErrorCode::InvalidArgument, "batch must contain at least one timestep");
  }
  if (static_cast<std::size_t>(batch.inputs.rows()) != params.dims.input_dim ||
      static_cast<std::size_t>(batch.inputs.cols()) != batch.length * batch.size) {
    throw Error(ErrorCode::ShapeMismatch, "batch input shape does not match the model");
  }
}

// Encoder layers only; fills layer_inputs and direction caches.
template <typename Scalar>
void forward_encoder(const ModelParams<Scalar>& params, const Batch<Scalar>& batch,
                     const DropoutMasks<Scalar>& masks, ForwardCache<Scalar>& cache) {
  check_batch(params, batch);
  const auto L = static_cast<Eigen::Index>(batch.length);
  const auto B = static_cast<Eigen::Index>(batch.size);
  const auto h = static_cast<Eigen::Index>(params.dims.hidden_size);
  const std::size_t layers = params.dims.num_layers;
  cache.length = batch.length;
  cache.batch_size = batch.size;
  cache.layer_inputs.resize(layers);
  cache.forward_dir.resize(layers);
  cache.backward_dir.resize(layers);
  for (std::size_t l = 0; l < layers; ++l) {
    if (l == 0) {
      cache.layer_inputs[0] = batch.inputs;
    } else {
      auto& in = cache.layer_inputs[l];
      in.resize(2 * h, L * B);
      in.topRows(h) = cache.forward_dir[l - 1].hidden;
      in.bottomRows(h) = cache.backward_dir[l - 1].hidden;
      if (masks.enabled()) in.array() *= masks.between_layers[l - 1].array();
    }
    run_direction(params.forward_layers[l], cache.layer_inputs[l], L, B, false,
                  cache.forward_dir[l]);
    run_direction(params.backward_layers[l], cache.layer_inputs[l], L, B, true,
                  cache.backward_dir[l]);
  }
  cache.z.resize(2 * h, B);
  cache.z.topRows(h) = cache.forward_dir[layers - 1].hidden.middleCols((L - 1) * B, B);
  cache.z.bottomRows(h) = cache.backward_dir[layers - 1].hidden.leftCols(B);
}

}  // namespace

template <typename Scalar>
Mat<Scalar> softmax(const Mat<Scalar>& logits) {
  Mat<Scalar> out(logits.rows(), logits.cols());
  for (Eigen::Index j = 0; j < logits.cols(); ++j) {
    const Scalar m = logits.col(j).maxCoeff();
    out.col(j) = (logits.col(j).array() - m).exp().matrix();
    out.col(j) /= out.col(j).sum();
  }
  return out;
}

template <typename Scalar>
ForwardCache<Scalar> forward(const ModelParams<Scalar>& params, const Batch<Scalar>& batch,
                             DropoutMasks<Scalar> masks) {
  ForwardCache<Scalar> cache;
  forward_encoder(params, batch, masks, cache);
  cache.head_pre = params.head_w1 * cache.z;
  cache.head_pre.colwise() += params.head_b1.col(0);
  cache.head_act = cache.head_pre.cwiseMax(Scalar(0));
  if (masks.enabled()) cache.head_act.array() *= masks.head.array();
  cache.logits = params.head_w2 * cache.head_act;
  cache.logits.colwise() += params.head_b2.col(0);
  cache.probs = softmax(cache.logits);
  cache.masks = std::move(masks);
  return cache;
}

template <typename Scalar>
Mat<Scalar> encode(const ModelParams<Scalar>& params, const Batch<Scalar>& batch,
                   const DropoutMasks<Scalar>& masks) {
  ForwardCache<Scalar> cache;
  forward_encoder(params, batch, masks, cache);
  return cache.z;
}

template <typename Scalar>
Vec<Scalar> encode_window(const Mat<Scalar>& frames, const ModelParams<Scalar>& params,
                          bool dropout_enabled, Rng& rng) {
  std::vector<Mat<Scalar>> one{frames};
  const auto batch = Batch<Scalar>::from_windows(one);
  DropoutMasks<Scalar> masks;
  if (dropout_enabled) {
    masks = sample_dropout_masks<Scalar>(params.dims, batch.length, 1, rng);
  }
  return encode(params, batch, masks).col(0);
}

template <typename Scalar>
Mat<Scalar> classify(const Mat<Scalar>& z, const ModelParams<Scalar>& params) {
  if (z.rows() != params.head_w1.cols()) {
    throw Error(ErrorCode::ShapeMismatch, "summary dimension does not match the head");
  }
  Mat<Scalar> a = params.head_w1 * z;
  a.colwise() += params.head_b1.col(0);
  a = a.cwiseMax(Scalar(0));
  Mat<Scalar> logits = params.head_w2 * a;
  logits.colwise() += params.head_b2.col(0);
  return softmax(logits);
}

template <typename Scalar>
Scalar cross_entropy(const Vec<Scalar>& probs, int y) {
  if (y < 0 || y >= probs.size()) throw Error(ErrorCode::InvalidArgument, "label out of range");
  const Scalar p = std::max(probs(y), static_cast<Scalar>(kProbabilityFloor));
  return -std::log(p);
}

template <typename Scalar>
Scalar mean_loss(const ForwardCache<Scalar>& cache, std::span<const int> labels) {
  if (labels.size() != cache.batch_size) {
    throw Error(ErrorCode::ShapeMismatch, "label count does not match batch size");
  }
  Scalar total = 0;
  for (std::size_t b = 0; b < labels.size(); ++b) {
    total += cross_entropy<Scalar>(cache.probs.col(static_cast<Eigen::Index>(b)), labels[b]);
  }
  return total / static_cast<Scalar>(labels.size());
}

template <typename Scalar>
Scalar backward(const ModelParams<Scalar>& params, const Batch<Scalar>& batch,
                const ForwardCache<Scalar>& cache, GradientTape<Scalar>& grads) {
  if (batch.labels.size() != batch.size) {
    throw Error(ErrorCode::InvalidArgument, "backward requires a label per window");
  }
  if (grads.dims != params.dims || grads.forward_layers.size() != params.forward_layers.size()) {
    grads = GradientTape<Scalar>::zeros(params.dims);
  } else {
    grads.set_zero();
  }
  const auto L = static_cast<Eigen::Index>(cache.length);
  const auto B = static_cast<Eigen::Index>(cache.batch_size);
  const auto h = static_cast<Eigen::Index>(params.dims.hidden_size);
  const std::size_t layers = params.dims.num_layers;
  const Scalar inv_b = Scalar(1) / static_cast<Scalar>(B);

  // Softmax cross-entropy; the clamp makes the gradient vanish below the floor.
  Mat<Scalar> d_logits = cache.probs;
  for (Eigen::Index b = 0; b < B; ++b) {
    const int y = batch.labels[static_cast<std::size_t>(b)];
    if (cache.probs(y, b) < static_cast<Scalar>(kProbabilityFloor)) {
      d_logits.col(b).setZero();
    } else {
      d_logits(y, b) -= Scalar(1);
    }
  }
  d_logits *= inv_b;

  grads.head_w2.noalias() = d_logits * cache.head_act.transpose();
  grads.head_b2 = d_logits.rowwise().sum();
  Mat<Scalar> d_act = params.head_w2.transpose() * d_logits;
  if (cache.masks.enabled()) d_act.array() *= cache.masks.head.array();
  d_act.array() *= (cache.head_pre.array() > Scalar(0)).template cast<Scalar>();
  grads.head_w1.noalias() = d_act * cache.z.transpose();
  grads.head_b1 = d_act.rowwise().sum();
  const Mat<Scalar> dz = params.head_w1.transpose() * d_act;

  // Upstream gradients w.r.t. each direction's hidden states of the top layer.
  Mat<Scalar> dh_fwd = Mat<Scalar>::Zero(h, L * B);
  Mat<Scalar> dh_bwd = Mat<Scalar>::Zero(h, L * B);
  dh_fwd.middleCols((L - 1) * B, B) = dz.topRows(h);
  dh_bwd.leftCols(B) = dz.bottomRows(h);

  for (std::size_t li = layers; li-- > 0;) {
    const Mat<Scalar>& x = cache.layer_inputs[li];
    Mat<Scalar> dx;
    Mat<Scalar>* dx_ptr = nullptr;
    if (li > 0) {
      dx = Mat<Scalar>::Zero(x.rows(), x.cols());
      dx_ptr = &dx;
    }
    backward_direction(params.forward_layers[li], x, cache.forward_dir[li], dh_fwd, L, B, false,
                       grads.forward_layers[li], dx_ptr);
    backward_direction(params.backward_layers[li], x, cache.backward_dir[li], dh_bwd, L, B, true,
                       grads.backward_layers[li], dx_ptr);
    if (li > 0) {
      if (cache.masks.enabled()) dx.array() *= cache.masks.between_layers[li - 1].array();
      dh_fwd = dx.topRows(h);
      dh_bwd = dx.bottomRows(h);
    }
  }

  if (!grads.all_finite()) throw Error(ErrorCode::NonFiniteGradient, "gradient became non-finite");
  return mean_loss(cache, batch.labels);
}

#define GAZETRAIT_INSTANTIATE(S)                                                                 \
  template struct ModelParams<S>;                                                                \
  template std::pair<Vec<S>, Vec<S>> lstm_cell<S>(const Vec<S>&, const Vec<S>&, const Vec<S>&,  \
                                                  const LstmLayerParams<S>&);                    \
  template struct Batch<S>;                                                                      \
  template DropoutMasks<S> sample_dropout_masks<S>(const ModelDims&, std::size_t, std::size_t,  \
                                                   Rng&);                                        \
  template ForwardCache<S> forward<S>(const ModelParams<S>&, const Batch<S>&, DropoutMasks<S>); \
  template Mat<S> encode<S>(const ModelParams<S>&, const Batch<S>&, const DropoutMasks<S>&);    \
  template Vec<S> encode_window<S>(const Mat<S>&, const ModelParams<S>&, bool, Rng&);           \
  template Mat<S> softmax<S>(const Mat<S>&);                                                     \
  template Mat<S> classify<S>(const Mat<S>&, const ModelParams<S>&);                             \
  template S cross_entropy<S>(const Vec<S>&, int);                                               \
  template S mean_loss<S>(const ForwardCache<S>&, std::span<const int>);                         \
  template S backward<S>(const ModelParams<S>&, const Batch<S>&, const ForwardCache<S>&,        \
                         GradientTape<S>&);

GAZETRAIT_INSTANTIATE(float)
GAZETRAIT_INSTANTIATE(double)

#undef GAZETRAIT_INSTANTIATE

}  // namespace gazetrait::model
