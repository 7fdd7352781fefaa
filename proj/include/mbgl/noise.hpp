#pragma once

#include <Eigen/Dense>
#include <gsl/gsl_errno.h>
#include <gsl/gsl_multimin.h>

#include <cmath>
#include <cstddef>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mbgl/error.hpp"
#include "mbgl/parallel.hpp"
#include "mbgl/types.hpp"

namespace mbgl {

/// Diagonal precision Q_ll = a exp(b l) (levels l = 1..L) plus error variance.
struct NoiseParams {
  double a = 1.0;
  double b = 0.0;
  double tau_sq = 1.0;
};

struct NoiseFitConfig {
  /// Starting point; when empty, a = 1, b = 0 and tau^2 = half the mean
  /// per-location variance of the data.
  std::optional<NoiseParams> param_init;
  double optimizer_tolerance = 1e-8;
  std::size_t max_evals = 2000;
};

struct NoiseFit {
  NoiseParams params;
  double objective = 0.0;
  double initial_objective = 0.0;
  std::size_t evaluations = 0;
  /// tau^2 reached the 1e-10 floor: the data carry no resolvable noise.
  bool boundary_hit = false;
};

inline constexpr double kTauSqFloor = 1e-10;

/// Projected summaries of one variable's data under an orthonormal basis:
/// level energies (1/m) sum_i (phi_l^T y_i)^2 and tr(S) = (1/m) sum_i |y_i|^2.
struct NoiseSummary {
  std::size_t n = 0;
  Vector level_energy;
  double trace_s = 0.0;
};

inline NoiseSummary summarize_variable(const Matrix& var_data, const BasisMatrix& basis) {
  require(var_data.rows() == idx(basis.n_locations()), ErrorCode::DimensionMismatch,
          "variable data has " + std::to_string(var_data.rows()) + " locations, basis has " +
              std::to_string(basis.n_locations()));
  require(var_data.cols() >= 1, ErrorCode::DimensionMismatch, "need at least one realization");
  require(var_data.allFinite(), ErrorCode::DegenerateData, "variable data must be finite");
  const double m = double(var_data.cols());
  NoiseSummary out;
  out.n = std::size_t(var_data.rows());
  out.level_energy = (basis.phi.transpose() * var_data).rowwise().squaredNorm() / m;
  out.trace_s = var_data.squaredNorm() / m;
  require(out.trace_s > 0.0, ErrorCode::DegenerateData, "variable data are identically zero");
  return out;
}

/// Single-variable likelihood with diagonal Q and orthonormal basis:
///   sum_l [log(q_l + 1/tau^2) - log q_l - tau^-4 e_l / (q_l + 1/tau^2)]
///     + n log tau^2 + tr(S) / tau^2
inline double noise_objective(const NoiseSummary& summary, const NoiseParams& params) {
  const double tau_sq = std::max(params.tau_sq, kTauSqFloor);
  const double t = 1.0 / tau_sq;
  double f = double(summary.n) * std::log(tau_sq) + t * summary.trace_s;
  for (Eigen::Index l = 0; l < summary.level_energy.size(); ++l) {
    const double q = params.a * std::exp(params.b * double(l + 1));
    if (!(q > 0.0) || !std::isfinite(q)) return std::numeric_limits<double>::infinity();
    f += std::log(q + t) - std::log(q) - t * t * summary.level_energy(l) / (q + t);
  }
  return f;
}

namespace detail {

struct NoiseObjectiveContext {
  const NoiseSummary* summary;
  std::size_t evaluations = 0;
};

inline NoiseParams unpack_noise(const gsl_vector* v) {
  return NoiseParams{std::exp(gsl_vector_get(v, 0)), gsl_vector_get(v, 1),
                     std::exp(std::max(gsl_vector_get(v, 2), std::log(kTauSqFloor)))};
}

inline double gsl_noise_objective(const gsl_vector* v, void* raw) {
  auto* ctx = static_cast<NoiseObjectiveContext*>(raw);
  ++ctx->evaluations;
  const double f = noise_objective(*ctx->summary, unpack_noise(v));
  // The simplex search needs finite values; steer it away from overflow.
  return std::isfinite(f) ? f : std::numeric_limits<double>::max() / 4.0;
}

struct GslVectorDeleter {
  void operator()(gsl_vector* v) const { gsl_vector_free(v); }
};
struct GslMinimizerDeleter {
  void operator()(gsl_multimin_fminimizer* s) const { gsl_multimin_fminimizer_free(s); }
};

}  // namespace detail

/// Error variance of one variable (n x m data), fitted jointly with a
/// two-parameter diagonal precision by Nelder-Mead on (log a, b, log tau^2).
inline NoiseFit estimate_noise_variance(const Matrix& var_data, const BasisMatrix& basis,
                                        const NoiseFitConfig& config = {}) {
  const NoiseSummary summary = summarize_variable(var_data, basis);
  NoiseParams start = config.param_init.value_or(
      NoiseParams{1.0, 0.0, 0.5 * summary.trace_s / double(summary.n)});
  require(start.a > 0.0 && start.tau_sq > 0.0 && std::isfinite(start.b), ErrorCode::InvalidArgument,
          "noise fit starting point needs a > 0 and tau^2 > 0");

  gsl_set_error_handler_off();
  detail::NoiseObjectiveContext ctx{&summary};
  gsl_multimin_function fn{&detail::gsl_noise_objective, 3, &ctx};

  NoiseFit fit;
  fit.initial_objective = noise_objective(summary, start);

  std::unique_ptr<gsl_vector, detail::GslVectorDeleter> x(gsl_vector_alloc(3));
  std::unique_ptr<gsl_vector, detail::GslVectorDeleter> step(gsl_vector_alloc(3));
  gsl_vector_set(x.get(), 0, std::log(start.a));
  gsl_vector_set(x.get(), 1, start.b);
  gsl_vector_set(x.get(), 2, std::log(start.tau_sq));

  // Two passes: the second restarts the simplex at the first optimum, which
  // guards against premature collapse of Nelder-Mead.
  double best = fit.initial_objective;
  for (int pass = 0; pass < 2; ++pass) {
    gsl_vector_set(step.get(), 0, 0.5);
    gsl_vector_set(step.get(), 1, 0.05);
    gsl_vector_set(step.get(), 2, 0.5);
    std::unique_ptr<gsl_multimin_fminimizer, detail::GslMinimizerDeleter> solver(
        gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, 3));
    gsl_multimin_fminimizer_set(solver.get(), &fn, x.get(), step.get());
    while (ctx.evaluations < config.max_evals) {
      if (gsl_multimin_fminimizer_iterate(solver.get()) != GSL_SUCCESS) break;
      const double size = gsl_multimin_fminimizer_size(solver.get());
      if (gsl_multimin_test_size(size, config.optimizer_tolerance) == GSL_SUCCESS) break;
    }
    if (solver->fval <= best) {
      best = solver->fval;
      gsl_vector_memcpy(x.get(), solver->x);
    }
  }

  fit.params = detail::unpack_noise(x.get());
  fit.objective = noise_objective(summary, fit.params);
  fit.evaluations = ctx.evaluations;
  if (!std::isfinite(fit.objective) || !std::isfinite(fit.params.tau_sq) ||
      !std::isfinite(fit.params.a) || !std::isfinite(fit.params.b)) {
    fail(ErrorCode::OptimizerDiverged, "noise variance search produced non-finite parameters");
  }
  fit.boundary_hit = fit.params.tau_sq <= kTauSqFloor * (1.0 + 1e-6);
  return fit;
}

struct NoiseEstimate {
  NoiseModel noise;
  std::vector<NoiseFit> fits;
};

/// Fits each variable's error variance independently.
inline NoiseEstimate estimate_all_noise(const Dataset& data, const BasisMatrix& basis,
                                        const NoiseFitConfig& config = {}) {
  const auto p = data.n_vars();
  std::vector<NoiseFit> fits(p);
  parallel_for(p, [&](std::size_t v) {
    try {
      fits[v] = estimate_noise_variance(data.variable(v), basis, config);
    } catch (const Error& e) {
      throw Error(e.code(), "variable '" + data.variable_names()[v] + "': " + e.what());
    }
  });
  Vector tau_sq(idx(p));
  for (std::size_t v = 0; v < p; ++v) tau_sq(idx(v)) = fits[v].params.tau_sq;
  return NoiseEstimate{NoiseModel(tau_sq), std::move(fits)};
}

}  // namespace mbgl
