#include "gazetrait/train.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "gazetrait/error.hpp"
#include "gazetrait/eval.hpp"
#include "gazetrait/io.hpp"

namespace gazetrait::train {

void TrainConfig::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0)) throw Error(ErrorCode::InvalidArgument, std::string(name) + " must be positive");
  };
  positive(lr, "lr");
  positive(clip_norm, "clip_norm");
  positive(adam_eps, "adam_eps");
  if (weight_decay < 0.0) throw Error(ErrorCode::InvalidArgument, "weight_decay must be >= 0");
  if (max_epochs < 1 || early_stop_patience < 1 || plateau_patience < 1) {
    throw Error(ErrorCode::InvalidArgument, "epoch counts and patience values must be >= 1");
  }
  if (!(plateau_factor > 0.0 && plateau_factor < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "plateau_factor must be in (0, 1)");
  }
  if (batch_size == 0) throw Error(ErrorCode::InvalidArgument, "batch_size must be positive");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0 && adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "Adam betas must be in [0, 1)");
  }
  if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "validation_fraction must be in (0, 1)");
  }
}

template <typename Scalar>
AdamState<Scalar> AdamState<Scalar>::zeros(const ModelDims& dims) {
  return AdamState{ModelParams<Scalar>::zeros(dims), ModelParams<Scalar>::zeros(dims), 0};
}

namespace {

template <typename Scalar, typename F>
void zip3(ModelParams<Scalar>& a, const ModelParams<Scalar>& b, ModelParams<Scalar>& c,
          ModelParams<Scalar>& d, F&& f) {
  std::vector<Mat<Scalar>*> pa, pc, pd;
  std::vector<const Mat<Scalar>*> pb;
  a.for_each([&](const std::string&, Mat<Scalar>& m) { pa.push_back(&m); });
  b.for_each([&](const std::string&, const Mat<Scalar>& m) { pb.push_back(&m); });
  c.for_each([&](const std::string&, Mat<Scalar>& m) { pc.push_back(&m); });
  d.for_each([&](const std::string&, Mat<Scalar>& m) { pd.push_back(&m); });
  if (pa.size() != pb.size() || pa.size() != pc.size() || pa.size() != pd.size()) {
    throw Error(ErrorCode::ShapeMismatch, "parameter layouts differ");
  }
  for (std::size_t i = 0; i < pa.size(); ++i) {
    if (pa[i]->rows() != pb[i]->rows() || pa[i]->cols() != pb[i]->cols()) {
      throw Error(ErrorCode::ShapeMismatch, "parameter and gradient shapes differ");
    }
    f(*pa[i], *pb[i], *pc[i], *pd[i]);
  }
}

}  // namespace

template <typename Scalar>
void adam_step(ModelParams<Scalar>& params, const ModelParams<Scalar>& grads,
               AdamState<Scalar>& state, const TrainConfig& config, double lr) {
  if (state.m.forward_layers.size() != params.forward_layers.size()) {
    state = AdamState<Scalar>::zeros(params.dims);
  }
  ++state.step;
  const double b1 = config.adam_beta1, b2 = config.adam_beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  const auto decay = static_cast<Scalar>(1.0 - lr * config.weight_decay);
  const auto step_size = static_cast<Scalar>(lr / c1);
  const auto inv_sqrt_c2 = static_cast<Scalar>(1.0 / std::sqrt(c2));
  const auto eps = static_cast<Scalar>(config.adam_eps);
  const auto sb1 = static_cast<Scalar>(b1), sb2 = static_cast<Scalar>(b2);
  bool finite = true;
  zip3(params, grads, state.m, state.v,
       [&](Mat<Scalar>& p, const Mat<Scalar>& g, Mat<Scalar>& m, Mat<Scalar>& v) {
         p *= decay;
         m = sb1 * m + (Scalar(1) - sb1) * g;
         v = sb2 * v + (Scalar(1) - sb2) * g.cwiseAbs2();
         p.array() -= step_size * m.array() / (v.array().sqrt() * inv_sqrt_c2 + eps);
         finite = finite && p.allFinite();
       });
  if (!finite) throw Error(ErrorCode::NonFiniteUpdate, "parameter update produced a non-finite value");
}

template <typename Scalar>
double global_norm(const ModelParams<Scalar>& grads) {
  double sq = 0.0;
  grads.for_each([&sq](const std::string&, const Mat<Scalar>& m) {
    sq += m.template cast<double>().squaredNorm();
  });
  return std::sqrt(sq);
}

template <typename Scalar>
double clip_gradients(ModelParams<Scalar>& grads, double clip_norm) {
  const double norm = global_norm(grads);
  if (norm > clip_norm) {
    const auto scale = static_cast<Scalar>(clip_norm / norm);
    grads.for_each([scale](const std::string&, Mat<Scalar>& m) { m *= scale; });
  }
  return norm;
}

PlateauScheduler::PlateauScheduler(double lr, const TrainConfig& config)
    : lr_(lr),
      factor_(config.plateau_factor),
      min_lr_(config.min_lr),
      min_delta_(config.min_delta),
      patience_(config.plateau_patience),
      best_(std::numeric_limits<double>::infinity()) {}

double PlateauScheduler::update(double val_loss) {
  if (val_loss < best_ - min_delta_) {
    best_ = val_loss;
    counter_ = 0;
  } else if (++counter_ >= patience_) {
    lr_ = std::max(lr_ * factor_, min_lr_);
    counter_ = 0;
  }
  return lr_;
}

double plateau_schedule(std::span<const double> history, double initial_lr,
                        const TrainConfig& config) {
  if (history.empty()) throw Error(ErrorCode::InvalidArgument, "empty validation history");
  PlateauScheduler s(initial_lr, config);
  for (double v : history) s.update(v);
  return s.lr();
}

void WindowSet::push_back(Mat<float> x, int label, int fold) {
  inputs.push_back(std::move(x));
  labels.push_back(label);
  folds.push_back(fold);
}

model::Batch<float> gather_batch(const WindowSet& set, std::span<const std::size_t> indices) {
  if (indices.empty()) throw Error(ErrorCode::InvalidArgument, "empty batch");
  model::Batch<float> b;
  const auto& first = set.inputs[indices[0]];
  b.size = indices.size();
  b.length = static_cast<std::size_t>(first.cols());
  const auto B = static_cast<Eigen::Index>(b.size);
  b.inputs.resize(first.rows(), first.cols() * B);
  b.labels.reserve(b.size);
  for (Eigen::Index w = 0; w < B; ++w) {
    const std::size_t idx = indices[static_cast<std::size_t>(w)];
    const auto& m = set.inputs[idx];
    if (m.rows() != first.rows() || m.cols() != first.cols()) {
      throw Error(ErrorCode::ShapeMismatch, "windows in a batch must share shape");
    }
    for (Eigen::Index t = 0; t < m.cols(); ++t) b.inputs.col(t * B + w) = m.col(t);
    if (!set.labels.empty()) b.labels.push_back(set.labels[idx]);
  }
  return b;
}

double train_step(ModelParams<float>& params, AdamState<float>& state,
                  const model::Batch<float>& batch, const TrainConfig& config, double lr,
                  Rng* dropout_rng) {
  model::DropoutMasks<float> masks;
  if (dropout_rng && params.dims.dropout > 0.0) {
    masks = model::sample_dropout_masks<float>(params.dims, batch.length, batch.size, *dropout_rng);
  }
  const auto cache = model::forward(params, batch, std::move(masks));
  thread_local ModelParams<float> grads;
  const double loss = model::backward(params, batch, cache, grads);
  if (!std::isfinite(loss)) throw Error(ErrorCode::NonFiniteGradient, "non-finite batch loss");
  clip_gradients(grads, config.clip_norm);
  adam_step(params, grads, state, config, lr);
  return loss;
}

Mat<float> predict_proba(const ModelParams<float>& params, const WindowSet& set,
                         std::size_t batch_size) {
  Mat<float> out(static_cast<Eigen::Index>(params.dims.num_classes),
                 static_cast<Eigen::Index>(set.size()));
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < set.size(); start += batch_size) {
    const std::size_t end = std::min(set.size(), start + batch_size);
    idx.resize(end - start);
    std::iota(idx.begin(), idx.end(), start);
    const auto batch = gather_batch(set, idx);
    const auto cache = model::forward(params, batch);
    out.middleCols(static_cast<Eigen::Index>(start), static_cast<Eigen::Index>(end - start)) =
        cache.probs;
  }
  return out;
}

namespace {

double loss_from_probs(const Mat<float>& probs, std::span<const int> labels) {
  double total = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    total += model::cross_entropy<float>(probs.col(static_cast<Eigen::Index>(i)), labels[i]);
  }
  return labels.empty() ? 0.0 : total / static_cast<double>(labels.size());
}

double macro_f1_from_probs(const Mat<float>& probs, std::span<const int> labels) {
  eval::ConfusionMatrix cm;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    Eigen::Index pred = 0;
    probs.col(static_cast<Eigen::Index>(i)).maxCoeff(&pred);
    cm.add(static_cast<std::size_t>(labels[i]), static_cast<std::size_t>(pred));
  }
  return eval::macro_f1(cm);
}

void check_provenance(const WindowSet& set, int test_fold, const char* what) {
  for (int f : set.folds) {
    if (f == test_fold) {
      throw Error(ErrorCode::LeakageViolation,
                  std::string(what) + " window from test fold " + std::to_string(test_fold));
    }
  }
}

}  // namespace

double evaluate_loss(const ModelParams<float>& params, const WindowSet& set,
                     std::size_t batch_size) {
  return loss_from_probs(predict_proba(params, set, batch_size), set.labels);
}

FitResult fit(const WindowSet& train, const WindowSet& validation, int test_fold,
              const ModelDims& dims, const TrainConfig& config, const FitHooks& hooks) {
  config.validate();
  dims.validate();
  if (train.size() == 0) throw Error(ErrorCode::EmptyTrainingSet, "no training windows");
  check_provenance(train, test_fold, "training");
  check_provenance(validation, test_fold, "validation");

  FitResult result;
  ModelParams<float> params = model::init_params(config.seed, dims).cast<float>();
  result.params = params;
  AdamState<float> state = AdamState<float>::zeros(dims);
  Rng shuffle_rng = make_rng({config.seed, key(Stream::Shuffle)});
  Rng dropout_rng = make_rng({config.seed, key(Stream::Dropout)});
  PlateauScheduler scheduler(config.lr, config);

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  int since_best = 0;
  int bad_batches = 0;

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const double lr = scheduler.lr();
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double loss_sum = 0.0;
    std::size_t seen = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      const auto batch = gather_batch(
          train, std::span<const std::size_t>(order.data() + start, end - start));
      double loss = std::numeric_limits<double>::quiet_NaN();
      try {
        loss = train_step(params, state, batch, config, lr, &dropout_rng);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::NonFiniteActivation &&
            e.code() != ErrorCode::NonFiniteGradient) {
          throw;
        }
      }
      if (!std::isfinite(loss)) {
        if (++bad_batches >= 2) {
          throw Error(ErrorCode::DivergedTraining,
                      "two consecutive non-finite batch losses at epoch " + std::to_string(epoch));
        }
        continue;
      }
      bad_batches = 0;
      loss_sum += loss * static_cast<double>(end - start);
      seen += end - start;
      ++result.steps;
    }

    EpochLog entry;
    entry.epoch = epoch;
    entry.lr = lr;
    entry.train_loss = seen ? loss_sum / static_cast<double>(seen) : 0.0;
    double criterion = 0.0;
    if (validation.size() > 0) {
      const Mat<float> probs = predict_proba(params, validation);
      entry.val_loss = loss_from_probs(probs, validation.labels);
      criterion = config.stop_on_macro_f1 ? 1.0 - macro_f1_from_probs(probs, validation.labels)
                                          : entry.val_loss;
    } else {
      entry.val_loss = entry.train_loss;
      criterion = entry.val_loss;
    }
    if (hooks.val_loss_override) {
      entry.val_loss = hooks.val_loss_override(epoch, entry.val_loss);
      criterion = entry.val_loss;
    }

    if (criterion < best - config.min_delta) {
      best = criterion;
      since_best = 0;
      result.best_epoch = epoch;
      result.params = params;
    } else {
      ++since_best;
    }
    scheduler.update(criterion);
    entry.stopped = since_best >= config.early_stop_patience || epoch == config.max_epochs;
    result.log.push_back(entry);
    if (hooks.on_epoch) hooks.on_epoch(entry);
    if (since_best >= config.early_stop_patience) break;
  }
  return result;
}

std::string format_training_log(std::span<const EpochLog> log) {
  std::ostringstream out;
  out << "epoch,train_loss,val_loss,lr,stopped\n";
  for (const auto& e : log) {
    out << e.epoch << ',' << io::format_double(e.train_loss) << ','
        << io::format_double(e.val_loss) << ',' << io::format_double(e.lr) << ','
        << (e.stopped ? 1 : 0) << '\n';
  }
  return out.str();
}

template struct AdamState<float>;
template struct AdamState<double>;
template void adam_step<float>(ModelParams<float>&, const ModelParams<float>&, AdamState<float>&,
                               const TrainConfig&, double);
template void adam_step<double>(ModelParams<double>&, const ModelParams<double>&,
                                AdamState<double>&, const TrainConfig&, double);
template double global_norm<float>(const ModelParams<float>&);
template double global_norm<double>(const ModelParams<double>&);
template double clip_gradients<float>(ModelParams<float>&, double);
template double clip_gradients<double>(ModelParams<double>&, double);

}  // namespace gazetrait::train
