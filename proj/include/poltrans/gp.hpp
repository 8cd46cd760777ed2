#pragma once

// Exact Gaussian Process regression with a squared-exponential kernel.
//
// All output dimensions share one set of hyperparameters, so the Gram matrix
// is factorized once and the cross-covariance row k(x*, X) is reused for every
// output. The prior mean is fixed at zero: far from the data the mean decays to
// zero and the variance returns to the signal variance.

#include <cstdint>
#include <vector>

#include <Eigen/Cholesky>

#include "poltrans/types.hpp"

namespace poltrans {

struct KernelParams {
  double signal_variance = 1.0;
  double lengthscale = 1.0;
  double noise_variance = 1e-8;
};

/// Noise variance never drops below this fraction of the signal variance.
inline constexpr double kNoiseFloorRatio = 1e-8;
/// Jitter escalation stops at this fraction of the signal variance.
inline constexpr double kMaxJitterRatio = 1e-4;

double kernel_se(const Vector& xi, const Vector& xj, const KernelParams& params);

struct GPConfig {
  KernelParams init;
  bool optimize = true;
  /// Total number of optimizer starts (the first one is `init`).
  int restarts = 5;
  std::uint64_t seed = 0;
  /// Upper bound on noise_variance / signal_variance while optimizing.
  double max_noise_ratio = 1e-1;
  /// Objective evaluations allowed per start.
  int max_evaluations = 150;
};

/// Gradient of the posterior mean (d_out x d_in) and the covariance of the
/// gradient of a single output (d_in x d_in, shared by all outputs).
struct DerivativePrediction {
  Matrix jacobian;
  Matrix covariance;
};

class GPModel {
 public:
  GPModel() = default;
  /// Factorizes K + noise I, escalating jitter x10 up to kMaxJitterRatio of
  /// the signal variance. Throws std::runtime_error("non-PD Gram matrix") if
  /// the factorization still fails.
  GPModel(Matrix inputs, Matrix outputs, KernelParams params);

  const Matrix& inputs() const { return inputs_; }
  const Matrix& outputs() const { return outputs_; }
  /// Hyperparameters actually used, including any jitter added to the noise.
  const KernelParams& params() const { return params_; }
  /// (K + noise I)^-1 y, one column per output dimension.
  const Matrix& alpha() const { return alpha_; }
  int input_dim() const { return static_cast<int>(inputs_.cols()); }
  int output_dim() const { return static_cast<int>(outputs_.cols()); }
  std::size_t size() const { return static_cast<std::size_t>(inputs_.rows()); }

  /// Row vector k(x*, X).
  Eigen::RowVectorXd cross_covariance(const Vector& query) const;

  Vector predict_mean(const Vector& query) const;
  std::vector<Vector> predict_mean(const std::vector<Vector>& queries) const;

  /// Posterior variance, clamped at zero. Shared by all output dimensions.
  double predict_variance(const Vector& query) const;
  std::vector<double> predict_variance(const std::vector<Vector>& queries) const;
  /// Posterior variance before clamping.
  double predict_variance_unclamped(const Vector& query) const;

  DerivativePrediction predict_derivative(const Vector& query) const;
  std::vector<DerivativePrediction> predict_derivative(const std::vector<Vector>& queries) const;

  double log_marginal_likelihood() const;

 private:
  void check_query(const Vector& query) const;

  Matrix inputs_;
  Matrix outputs_;
  KernelParams params_;
  Eigen::LLT<Matrix> chol_;
  Matrix alpha_;
};

/// Log marginal likelihood summed over output dimensions. Returns -infinity
/// when the Gram matrix cannot be factorized.
double log_marginal_likelihood(const Matrix& inputs, const Matrix& outputs, const KernelParams& params);

/// Data-driven starting point: signal variance from the output second moment,
/// lengthscale a quarter of the input diameter, noise at 1e-6 of the signal.
KernelParams default_kernel_params(const Matrix& inputs, const Matrix& outputs);

/// Fits a model. With `optimize`, maximizes the log marginal likelihood over
/// (lengthscale, noise ratio) in log-space with the signal variance profiled
/// out, using Nelder-Mead from `restarts` seeded starting points. The returned
/// model never has a lower likelihood than `init`.
GPModel fit_gp(const Matrix& inputs, const Matrix& outputs, const GPConfig& config);

/// Largest |mean(x_i) - y_i| over the training set.
double max_training_residual(const GPModel& model);

/// Makes the posterior mean reproduce the training outputs within
/// `tolerance`: first divides the noise variance by 100 down to the floor,
/// then halves the lengthscale (at most 30 times). Returns the last model
/// tried if the tolerance is still not met.
GPModel enforce_interpolation(const GPModel& model, double tolerance);

}  // namespace poltrans
