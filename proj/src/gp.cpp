#include "poltrans/gp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>

#include <gsl/gsl_errno.h>
#include <gsl/gsl_multimin.h>

namespace poltrans {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

Matrix squared_distances(const Matrix& x) {
  const Eigen::Index n = x.rows();
  Matrix d2(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    d2(i, i) = 0.0;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double v = (x.row(i) - x.row(j)).squaredNorm();
      d2(i, j) = v;
      d2(j, i) = v;
    }
  }
  return d2;
}

double input_diameter(const Matrix& x) {
  const Matrix d2 = squared_distances(x);
  return x.rows() > 0 ? std::sqrt(d2.maxCoeff()) : 0.0;
}

double output_scale(const Matrix& y) {
  return y.size() > 0 ? y.squaredNorm() / static_cast<double>(y.size()) : 0.0;
}

// Correlation matrix exp(-d2 / (2 l^2)) plus `ratio` on the diagonal.
Matrix scaled_gram(const Matrix& d2, double lengthscale, double ratio) {
  const double inv = -0.5 / (lengthscale * lengthscale);
  Matrix k = (d2.array() * inv).exp().matrix();
  k.diagonal().array() += ratio;
  return k;
}

struct Bounds {
  double log_l_lo, log_l_hi;
  double log_r_lo, log_r_hi;
  double sp_lo, sp_hi;
};

struct ProfileObjective {
  const Matrix* d2;
  const Matrix* y;
  Bounds bounds;

  double clamp_log_l(double v) const { return std::clamp(v, bounds.log_l_lo, bounds.log_l_hi); }
  double clamp_log_r(double v) const { return std::clamp(v, bounds.log_r_lo, bounds.log_r_hi); }

  // Returns the profiled log likelihood and the optimal signal variance.
  std::pair<double, double> evaluate(double log_l, double log_r) const {
    const double l = std::exp(clamp_log_l(log_l));
    const double r = std::exp(clamp_log_r(log_r));
    const Eigen::Index n = d2->rows();
    const double nd = static_cast<double>(n * y->cols());
    Eigen::LLT<Matrix> llt(scaled_gram(*d2, l, r));
    if (llt.info() != Eigen::Success) return {kNegInf, 0.0};
    const Matrix a = llt.solve(*y);
    const double quad = (y->array() * a.array()).sum();
    const double sp = std::clamp(quad / nd, bounds.sp_lo, bounds.sp_hi);
    double logdet = 0.0;
    const Matrix& lm = llt.matrixLLT();
    for (Eigen::Index i = 0; i < n; ++i) logdet += std::log(lm(i, i));
    const double lml = -0.5 * quad / sp - 0.5 * nd * std::log(sp) -
                       static_cast<double>(y->cols()) * logdet -
                       0.5 * nd * std::log(2.0 * std::numbers::pi);
    if (!std::isfinite(lml)) return {kNegInf, 0.0};
    return {lml, sp};
  }
};

double gsl_objective(const gsl_vector* v, void* params) {
  const auto* obj = static_cast<const ProfileObjective*>(params);
  const double lml = obj->evaluate(gsl_vector_get(v, 0), gsl_vector_get(v, 1)).first;
  return std::isfinite(lml) ? -lml : 1e300;
}

// Minimizes -lml from (log_l, log_r) with the GSL simplex method.
std::pair<double, double> simplex_search(const ProfileObjective& obj, double log_l, double log_r,
                                         int max_evaluations) {
  static const bool handler_off = [] {
    gsl_set_error_handler_off();
    return true;
  }();
  (void)handler_off;
  gsl_multimin_function fn{&gsl_objective, 2, const_cast<ProfileObjective*>(&obj)};
  gsl_vector* x = gsl_vector_alloc(2);
  gsl_vector* step = gsl_vector_alloc(2);
  gsl_vector_set(x, 0, log_l);
  gsl_vector_set(x, 1, log_r);
  gsl_vector_set(step, 0, 0.5);
  gsl_vector_set(step, 1, 1.0);
  gsl_multimin_fminimizer* s = gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, 2);
  gsl_multimin_fminimizer_set(s, &fn, x, step);
  for (int it = 0; it < max_evaluations; ++it) {
    if (gsl_multimin_fminimizer_iterate(s) != GSL_SUCCESS) break;
    if (gsl_multimin_test_size(gsl_multimin_fminimizer_size(s), 1e-5) == GSL_SUCCESS) break;
  }
  const std::pair<double, double> best{obj.clamp_log_l(gsl_vector_get(s->x, 0)),
                                       obj.clamp_log_r(gsl_vector_get(s->x, 1))};
  gsl_multimin_fminimizer_free(s);
  gsl_vector_free(step);
  gsl_vector_free(x);
  return best;
}

}  // namespace

double kernel_se(const Vector& xi, const Vector& xj, const KernelParams& params) {
  const double d2 = (xi - xj).squaredNorm();
  return params.signal_variance * std::exp(-d2 / (2.0 * params.lengthscale * params.lengthscale));
}

GPModel::GPModel(Matrix inputs, Matrix outputs, KernelParams params)
    : inputs_(std::move(inputs)), outputs_(std::move(outputs)), params_(params) {
  if (inputs_.rows() < 1) throw std::invalid_argument("GP needs at least one training point");
  if (inputs_.rows() != outputs_.rows()) throw std::invalid_argument("GP inputs and outputs differ in count");
  if (!(params_.signal_variance > 0.0) || !(params_.lengthscale > 0.0) || !(params_.noise_variance >= 0.0) ||
      !std::isfinite(params_.signal_variance) || !std::isfinite(params_.lengthscale) ||
      !std::isfinite(params_.noise_variance)) {
    throw std::invalid_argument("invalid kernel hyperparameters");
  }
  const double floor = kNoiseFloorRatio * params_.signal_variance;
  params_.noise_variance = std::max(params_.noise_variance, floor);

  const Matrix d2 = squared_distances(inputs_);
  const double inv = -0.5 / (params_.lengthscale * params_.lengthscale);
  const Matrix k = params_.signal_variance * (d2.array() * inv).exp().matrix();
  // LLT does not flag NaN entries.
  if (!k.allFinite()) throw std::runtime_error("non-PD Gram matrix");

  const double max_jitter = std::max(kMaxJitterRatio * params_.signal_variance, params_.noise_variance);
  double noise = params_.noise_variance;
  while (true) {
    Matrix kn = k;
    kn.diagonal().array() += noise;
    chol_.compute(kn);
    if (chol_.info() == Eigen::Success) break;
    if (noise >= max_jitter) throw std::runtime_error("non-PD Gram matrix");
    noise = std::min(noise * 10.0, max_jitter);
  }
  params_.noise_variance = noise;
  alpha_ = chol_.solve(outputs_);
}

void GPModel::check_query(const Vector& query) const {
  if (query.size() != inputs_.cols()) throw std::invalid_argument("query dimension does not match GP inputs");
}

Eigen::RowVectorXd GPModel::cross_covariance(const Vector& query) const {
  check_query(query);
  const double inv = -0.5 / (params_.lengthscale * params_.lengthscale);
  const Eigen::ArrayXd d2 = (inputs_.rowwise() - query.transpose()).rowwise().squaredNorm().array();
  return (params_.signal_variance * (d2 * inv).exp()).matrix().transpose();
}

Vector GPModel::predict_mean(const Vector& query) const {
  return (cross_covariance(query) * alpha_).transpose();
}

std::vector<Vector> GPModel::predict_mean(const std::vector<Vector>& queries) const {
  std::vector<Vector> out;
  out.reserve(queries.size());
  for (const auto& q : queries) out.push_back(predict_mean(q));
  return out;
}

double GPModel::predict_variance_unclamped(const Vector& query) const {
  const Vector k = cross_covariance(query).transpose();
  const Vector v = chol_.matrixL().solve(k);
  return params_.signal_variance - v.squaredNorm();
}

double GPModel::predict_variance(const Vector& query) const {
  return std::max(0.0, predict_variance_unclamped(query));
}

std::vector<double> GPModel::predict_variance(const std::vector<Vector>& queries) const {
  std::vector<double> out;
  out.reserve(queries.size());
  for (const auto& q : queries) out.push_back(predict_variance(q));
  return out;
}

DerivativePrediction GPModel::predict_derivative(const Vector& query) const {
  const Eigen::RowVectorXd k = cross_covariance(query);
  const double l2 = params_.lengthscale * params_.lengthscale;
  // Row b: d k(x*, x_j) / d x*_b = -(x*_b - x_jb) / l^2 * k_j.
  const Matrix diff = (inputs_.rowwise() - query.transpose()).transpose();  // d_in x N, x_j - x*
  const Matrix k10 = (diff.array().rowwise() * (k.array() / l2)).matrix();

  DerivativePrediction out;
  out.jacobian = (k10 * alpha_).transpose();
  const Matrix v = chol_.matrixL().solve(k10.transpose());  // N x d_in
  const int d = input_dim();
  Matrix cov = (params_.signal_variance / l2) * Matrix::Identity(d, d) - v.transpose() * v;
  cov = 0.5 * (cov + cov.transpose());
  for (int i = 0; i < d; ++i) cov(i, i) = std::max(0.0, cov(i, i));
  out.covariance = std::move(cov);
  return out;
}

std::vector<DerivativePrediction> GPModel::predict_derivative(const std::vector<Vector>& queries) const {
  std::vector<DerivativePrediction> out;
  out.reserve(queries.size());
  for (const auto& q : queries) out.push_back(predict_derivative(q));
  return out;
}

double GPModel::log_marginal_likelihood() const {
  const Eigen::Index n = inputs_.rows();
  const double nd = static_cast<double>(n * outputs_.cols());
  double logdet = 0.0;
  const Matrix& lm = chol_.matrixLLT();
  for (Eigen::Index i = 0; i < n; ++i) logdet += std::log(lm(i, i));
  const double quad = (outputs_.array() * alpha_.array()).sum();
  return -0.5 * quad - static_cast<double>(outputs_.cols()) * logdet - 0.5 * nd * std::log(2.0 * std::numbers::pi);
}

double log_marginal_likelihood(const Matrix& inputs, const Matrix& outputs, const KernelParams& params) {
  try {
    return GPModel(inputs, outputs, params).log_marginal_likelihood();
  } catch (const std::runtime_error&) {
    return kNegInf;
  }
}

KernelParams default_kernel_params(const Matrix& inputs, const Matrix& outputs) {
  KernelParams p;
  const double scale = output_scale(outputs);
  p.signal_variance = scale > 1e-20 ? scale : 1e-20;
  const double diam = input_diameter(inputs);
  p.lengthscale = diam > 0.0 ? 0.25 * diam : 1.0;
  p.noise_variance = 1e-6 * p.signal_variance;
  return p;
}

GPModel fit_gp(const Matrix& inputs, const Matrix& outputs, const GPConfig& config) {
  if (inputs.rows() < 1) throw std::invalid_argument("GP needs at least one training point");
  if (inputs.rows() != outputs.rows()) throw std::invalid_argument("GP inputs and outputs differ in count");
  const KernelParams init = config.init;
  if (!config.optimize) return GPModel(inputs, outputs, init);

  const Matrix d2 = squared_distances(inputs);
  const double diam = std::sqrt(d2.maxCoeff());
  const double scale = std::max(output_scale(outputs), 1e-20);
  const double l_ref = diam > 0.0 ? diam / std::sqrt(static_cast<double>(inputs.cols())) : init.lengthscale;
  const double max_ratio = std::max(config.max_noise_ratio, kNoiseFloorRatio);

  Bounds b{std::log(1e-3 * l_ref), std::log(1e3 * l_ref), std::log(kNoiseFloorRatio), std::log(max_ratio),
           1e-6 * scale, 1e6 * scale};
  if (diam <= 0.0) {
    // Lengthscale is unidentifiable without spread in the inputs.
    b.log_l_lo = b.log_l_hi = std::log(init.lengthscale);
  }
  ProfileObjective obj{&d2, &outputs, b};

  std::mt19937_64 rng(config.seed);
  std::uniform_real_distribution<double> ul(b.log_l_lo, b.log_l_hi);
  std::uniform_real_distribution<double> ur(b.log_r_lo, b.log_r_hi);

  const double init_ratio = init.noise_variance / init.signal_variance;
  double best_lml = kNegInf;
  double best_l = obj.clamp_log_l(std::log(init.lengthscale));
  double best_r = obj.clamp_log_r(std::log(std::max(init_ratio, kNoiseFloorRatio)));
  const int starts = std::max(1, config.restarts);
  for (int s = 0; s < starts; ++s) {
    double l0 = obj.clamp_log_l(std::log(init.lengthscale));
    double r0 = obj.clamp_log_r(std::log(std::max(init_ratio, kNoiseFloorRatio)));
    if (s > 0) {
      l0 = ul(rng);
      r0 = ur(rng);
    }
    const auto [l, r] = simplex_search(obj, l0, r0, config.max_evaluations);
    const double lml = obj.evaluate(l, r).first;
    if (lml > best_lml) {
      best_lml = lml;
      best_l = l;
      best_r = r;
    }
  }

  KernelParams best = init;
  if (std::isfinite(best_lml)) {
    const double sp = obj.evaluate(best_l, best_r).second;
    best.signal_variance = sp;
    best.lengthscale = std::exp(best_l);
    best.noise_variance = std::exp(best_r) * sp;
  }
  GPModel fitted(inputs, outputs, best);
  const double init_lml = log_marginal_likelihood(inputs, outputs, init);
  if (init_lml > fitted.log_marginal_likelihood()) return GPModel(inputs, outputs, init);
  return fitted;
}

double max_training_residual(const GPModel& model) {
  const Matrix& x = model.inputs();
  double worst = 0.0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const Vector xi = x.row(i).transpose();
    worst = std::max(worst, (model.predict_mean(xi) - model.outputs().row(i).transpose()).cwiseAbs().maxCoeff());
  }
  return worst;
}

GPModel enforce_interpolation(const GPModel& model, double tolerance) {
  GPModel out = model;
  int halvings = 0;
  while (max_training_residual(out) > tolerance) {
    KernelParams p = out.params();
    const double floor = kNoiseFloorRatio * p.signal_variance;
    if (p.noise_variance > floor * (1.0 + 1e-12)) {
      p.noise_variance = std::max(floor, p.noise_variance * 1e-2);
    } else if (halvings++ < 30) {
      // At the floor an overly long lengthscale still smooths the data away.
      p.lengthscale *= 0.5;
      p.noise_variance = floor;
    } else {
      break;
    }
    out = GPModel(out.inputs(), out.outputs(), p);
  }
  return out;
}

}  // namespace poltrans
