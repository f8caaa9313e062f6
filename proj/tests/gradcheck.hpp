#pragma once

// Central finite-difference check of model::backward on a double model.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "gazetrait/model.hpp"

namespace testing {

struct GradCheckReport {
  std::size_t checked = 0;
  std::size_t failed = 0;
  double worst_abs = 0.0;
  std::string worst_name;
};

struct GradCheckOptions {
  gazetrait::model::ModelDims dims;
  std::size_t length = 6;
  std::size_t batch = 3;
  double step = 1e-4;
  double rel_tol = 1e-4;
  double abs_tol = 1e-6;
  bool dropout = true;
};

inline GradCheckReport gradient_check(std::uint64_t seed, const GradCheckOptions& opt) {
  using namespace gazetrait;
  using namespace gazetrait::model;
  auto params = init_params(seed, opt.dims);
  // Move every bias off zero so each gradient path is exercised.
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::normal_distribution<double> n01(0.0, 1.0);
  params.for_each([&](const std::string& name, Mat<double>& m) {
    if (name.ends_with("bias") || name.starts_with("head.b")) {
      for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] += 0.3 * n01(rng);
    }
  });

  Batch<double> batch;
  batch.length = opt.length;
  batch.size = opt.batch;
  batch.inputs = Mat<double>(opt.dims.input_dim, opt.length * opt.batch);
  for (Eigen::Index i = 0; i < batch.inputs.size(); ++i) batch.inputs.data()[i] = n01(rng);
  for (std::size_t b = 0; b < opt.batch; ++b) {
    batch.labels.push_back(static_cast<int>(b % opt.dims.num_classes));
  }

  Rng mask_rng = make_rng({seed, 99});
  DropoutMasks<double> masks;
  if (opt.dropout) masks = sample_dropout_masks<double>(opt.dims, opt.length, opt.batch, mask_rng);

  const auto cache = forward(params, batch, masks);
  GradientTape<double> grads = GradientTape<double>::zeros(opt.dims);
  backward(params, batch, cache, grads);

  auto loss_at = [&](const ModelParams<double>& p) {
    const auto c = forward(p, batch, masks);
    return mean_loss(c, batch.labels);
  };

  std::vector<Mat<double>*> analytic;
  grads.for_each([&](const std::string&, Mat<double>& m) { analytic.push_back(&m); });

  GradCheckReport report;
  std::size_t tensor = 0;
  ModelParams<double> probe = params;
  probe.for_each([&](const std::string& name, Mat<double>& m) {
    const Mat<double>& g = *analytic[tensor++];
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      const double orig = m.data()[i];
      m.data()[i] = orig + opt.step;
      const double up = loss_at(probe);
      m.data()[i] = orig - opt.step;
      const double down = loss_at(probe);
      m.data()[i] = orig;
      const double numeric = (up - down) / (2.0 * opt.step);
      const double a = g.data()[i];
      const double diff = std::abs(a - numeric);
      const double tol = std::max(opt.rel_tol * std::max(std::abs(a), std::abs(numeric)), opt.abs_tol);
      ++report.checked;
      if (diff > tol) ++report.failed;
      if (diff > report.worst_abs) {
        report.worst_abs = diff;
        report.worst_name = name + "[" + std::to_string(i) + "]";
      }
    }
  });
  return report;
}

}  // namespace testing
