#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "seemlab/envs.hpp"
#include "seemlab/linalg.hpp"
#include "seemlab/net.hpp"
#include "seemlab/train.hpp"

namespace seemlab {

// ---- SEEM ----------------------------------------------------------------

struct SeemReport {
  std::size_t step = 0;
  /// gamma G(X*, X) - G(X, X), M x M.
  Mat a;
  Mat gram_xx;
  double seem_raw = 0.0;
  /// seem_raw / (trace G(X,X) / M); 0 when the trace is 0.
  double seem_norm = 0.0;
  double gram_trace = 0.0;
  std::optional<std::vector<double>> dominant;
};

/// A = gamma Phi(X*)^T Phi(X) - Phi(X)^T Phi(X).
Mat seem_matrix(const GradientFeatures& at_inputs, const GradientFeatures& at_next, double gamma);

/// SEEM for explicit X and X*. Throws CrashError on non-finite params and
/// ConvergenceError if the eigensolver does not converge.
SeemReport seem_at(const Network& net, std::span<const double> theta, const Mat& inputs,
                   const Mat& next_inputs, double gamma, bool with_eigenvector = false);

/// Builds X* by exhaustive argmax, then calls seem_at.
SeemReport seem(const MLPSpec& spec, const Params& params, const Dataset& d, double gamma,
                bool with_eigenvector = false);

// ---- Critical point --------------------------------------------------------

struct CriticalPointThresholds {
  double ntk_cos = 0.99;
  double action_cos = 0.999;
  std::size_t consecutive = 5;
};

struct CriticalPoint {
  std::optional<std::size_t> t0;
  /// Index into trace.records of the record at t0.
  std::optional<std::size_t> record_index;
  double ntk_cos = 0.0;
  double action_cos = 0.0;

  bool reached() const noexcept { return t0.has_value(); }
};

/// t0 is the last record of the first run of `consecutive` kernel records
/// (those carrying an NTK cosine) whose NTK and action cosines both clear
/// the thresholds.
CriticalPoint detect_critical_point(const TrainTrace& trace, CriticalPointThresholds th = {});

// ---- Divergence laws -------------------------------------------------------

struct FitWindow {
  std::optional<std::size_t> t_start;
  std::optional<std::size_t> t_end;
  /// Fraction of the eligible records kept, counted back from the end.
  double tail_fraction = 0.2;
  /// The tail never keeps fewer records than this; a window holding fewer is
  /// a FitError.
  std::size_t min_points = 10;
};

struct CrashFit {
  std::size_t t_start = 0;
  std::size_t t_end = 0;
  std::size_t points = 0;
  /// y = ||u||^(-exponent) is linear in t; exponent = (2L-2)/L.
  double exponent = 1.0;
  LineFit fit;
  double predicted_t = 0.0;
};

double crash_law_exponent(std::size_t layers);

/// Fits the SGD terminal-time law on explicit samples. Throws FitError when
/// the fitted slope is not negative.
CrashFit fit_crash_law(std::span<const double> steps, std::span<const double> u_norms,
                       std::size_t layers);

/// Same fit over the uncrashed records of a trace inside `window`.
CrashFit predict_crash_sgd(const TrainTrace& trace, std::size_t layers, FitWindow window = {});

struct AdamGrowthReport {
  std::size_t t_start = 0;
  std::size_t t_end = 0;
  double theta_slope = 0.0;
  double theta_slope_expected = 0.0;
  double q_loglog_slope = 0.0;
  double q_slope_expected = 0.0;
  LineFit theta_fit;
  LineFit q_fit;
};

/// Fits ||theta_t|| against t and log|Q| against log t. With `t0` given, a
/// window starting before it is a FitError.
AdamGrowthReport adam_growth_check(const TrainTrace& trace, double eta, std::size_t param_count,
                                   std::size_t layers, FitWindow window = {},
                                   std::optional<std::size_t> t0 = std::nullopt);

// ---- Homogeneity -----------------------------------------------------------

struct HomogeneityRow {
  double lambda = 1.0;
  /// <f_l, f> / <f, f> over the batch.
  double output_ratio = 1.0;
  /// ||Phi_l||_F / ||Phi||_F.
  double grad_scale = 1.0;
  /// ||G_l||_F / ||G||_F.
  double ntk_scale = 1.0;
  /// cosine(vec Phi_l, vec Phi).
  double ntk_cos = 1.0;
  /// max_i |f_l(x_i) / f(x_i) - lambda^L| / lambda^L.
  double max_output_deviation = 0.0;
};

std::vector<HomogeneityRow> homogeneity_check(const MLPSpec& spec, const Params& params,
                                              const Mat& inputs, std::span<const double> lambdas);
void write_homogeneity_csv(std::ostream& out, std::span<const HomogeneityRow> rows);

// ---- NTK map ---------------------------------------------------------------

struct GridSpec {
  double lo = -4.0;
  double hi = 4.0;
  std::size_t points = 81;
};

struct NtkMap {
  std::vector<double> x0;
  std::vector<double> axis;
  /// values[iy * axis.size() + ix] = k(x0, (axis[ix], axis[iy])) / scale.
  std::vector<double> values;
  double scale = 1.0;
  double self_value = 0.0;

  double at(std::size_t ix, std::size_t iy) const { return values[iy * axis.size() + ix]; }
};

/// Kernel k(x0, .) over a square grid, divided by its max magnitude. Requires
/// a 2-D input network (DimensionError otherwise).
NtkMap ntk_map(const MLPSpec& spec, const Params& params, std::span<const double> x0,
               GridSpec grid = {});
/// CSV `x,y,value`, x varying fastest.
void write_ntk_map_csv(std::ostream& out, const NtkMap& map);

// ---- Linear dynamics -------------------------------------------------------

struct Rollout {
  /// u_0 .. u_steps.
  std::vector<std::vector<double>> u;
  std::vector<double> norms;
  /// |cos(u_t, v)| for the dominant eigenvector v; empty when v is complex.
  std::vector<double> alignment;
};

/// Iterates u <- (I + eta A) u.
Rollout linearized_rollout(const Mat& a, std::span<const double> u0, double eta, std::size_t steps);

struct LinearizationCheck {
  /// ||u' - (u + eta_eff A u)|| / (eta_eff ||A u||).
  double residual = 0.0;
  bool argmax_unchanged = true;
  double eta_effective = 0.0;
};

/// One full-batch SGD step of size `eta` from theta, compared with the
/// first-order prediction. Under the 0.5 * mean loss the effective step in
/// the evolving equation is eta / M.
LinearizationCheck linearization_check(const Network& net, std::span<const double> theta,
                                       const Dataset& d, double gamma, double eta);

}  // namespace seemlab
