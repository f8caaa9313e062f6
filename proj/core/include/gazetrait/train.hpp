#pragma once

// Optimization loop for the sequence models: Adam with decoupled weight
// decay, global-norm clipping, a plateau learning-rate schedule, and early
// stopping with best-epoch restore.

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "gazetrait/model.hpp"
#include "gazetrait/random.hpp"

namespace gazetrait::train {

using model::Mat;
using model::ModelDims;
using model::ModelParams;

struct TrainConfig {
  double lr = 1e-3;
  double weight_decay = 1e-5;
  double clip_norm = 1.0;
  int max_epochs = 100;
  int early_stop_patience = 15;
  int plateau_patience = 10;
  double plateau_factor = 0.5;
  double min_lr = 1e-6;
  /// Improvement threshold shared by the plateau schedule and early stopping.
  double min_delta = 1e-6;
  std::size_t batch_size = 64;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double validation_fraction = 0.2;
  /// Select the best epoch by validation macro-F1 instead of validation loss.
  bool stop_on_macro_f1 = false;
  std::uint64_t seed = 0;

  void validate() const;
};

template <typename Scalar>
struct AdamState {
  ModelParams<Scalar> m;
  ModelParams<Scalar> v;
  std::uint64_t step = 0;

  static AdamState zeros(const ModelDims& dims);
};

/// theta <- theta - lr * wd * theta, then one bias-corrected Adam update.
/// Throws NonFiniteUpdate if any parameter becomes non-finite.
template <typename Scalar>
void adam_step(ModelParams<Scalar>& params, const ModelParams<Scalar>& grads,
               AdamState<Scalar>& state, const TrainConfig& config, double lr);

template <typename Scalar>
double global_norm(const ModelParams<Scalar>& grads);

/// Rescales to `clip_norm` when the global L2 norm exceeds it. Returns the
/// norm before clipping.
template <typename Scalar>
double clip_gradients(ModelParams<Scalar>& grads, double clip_norm);

class PlateauScheduler {
 public:
  PlateauScheduler(double lr, const TrainConfig& config);
  /// Feeds one validation loss and returns the learning rate for the next epoch.
  double update(double val_loss);
  double lr() const noexcept { return lr_; }

 private:
  double lr_;
  double factor_;
  double min_lr_;
  double min_delta_;
  int patience_;
  double best_;
  int counter_ = 0;
};

/// Replays the whole history through a fresh scheduler.
double plateau_schedule(std::span<const double> history, double initial_lr,
                        const TrainConfig& config);

/// Float windows ready for the model plus per-window provenance.
struct WindowSet {
  std::vector<Mat<float>> inputs;  // each [k x L]
  std::vector<int> labels;         // class indices 0..2
  std::vector<int> folds;          // fold each window came from

  std::size_t size() const noexcept { return inputs.size(); }
  void push_back(Mat<float> x, int label, int fold);
};

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double lr = 0.0;
  bool stopped = false;
};

struct FitHooks {
  /// Replaces the measured validation loss (used to test the stopping rules).
  std::function<double(int epoch, double measured)> val_loss_override;
  std::function<void(const EpochLog&)> on_epoch;
};

struct FitResult {
  ModelParams<float> params;  // parameters from the best validation epoch
  std::vector<EpochLog> log;
  int best_epoch = 0;
  std::uint64_t steps = 0;
};

/// Trains one model. Every training and validation window must come from a
/// fold other than `test_fold` (LeakageViolation otherwise). An empty
/// validation set falls back to the training loss for model selection.
FitResult fit(const WindowSet& train, const WindowSet& validation, int test_fold,
              const ModelDims& dims, const TrainConfig& config, const FitHooks& hooks = {});

/// Mini-batch of the given window indices in the model's column layout.
model::Batch<float> gather_batch(const WindowSet& set, std::span<const std::size_t> indices);

/// One optimizer step on a batch; returns the pre-update mean loss.
double train_step(ModelParams<float>& params, AdamState<float>& state,
                  const model::Batch<float>& batch, const TrainConfig& config, double lr,
                  Rng* dropout_rng);

/// Evaluation-mode class probabilities, [C x N].
Mat<float> predict_proba(const ModelParams<float>& params, const WindowSet& set,
                         std::size_t batch_size = 256);

/// Mean cross-entropy in evaluation mode.
double evaluate_loss(const ModelParams<float>& params, const WindowSet& set,
                     std::size_t batch_size = 256);

/// epoch,train_loss,val_loss,lr,stopped
std::string format_training_log(std::span<const EpochLog> log);

}  // namespace gazetrait::train
