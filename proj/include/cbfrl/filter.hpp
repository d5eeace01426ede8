#pragma once

#include <vector>

#include "cbfrl/barrier.hpp"

namespace cbfrl {

struct FilterParams {
  double alpha = 1.0;  // 1/s, strictly positive
  double dt = 0.05;    // s, strictly positive

  double decay() const { return 1.0 - dt * alpha; }
  // Theorem precondition for the geometric bound: (1 - dt*alpha) in [0, 1).
  bool bound_precondition_holds() const { return decay() >= 0.0 && decay() < 1.0; }
};

// Result of the closed-form halfspace projection of a proposed velocity onto
// { v : a^T v >= b } with a = grad h(q), b = -alpha h(q).
struct FilterOutcome {
  Vec2 v_safe = Vec2::Zero();
  Vec2 intervention = Vec2::Zero();  // v_safe - v_policy
  double margin = 0.0;               // a^T v_policy - b
  bool activated = false;
  bool degenerate = false;  // propagated from the barrier eval; pass-through
};

// Closed-form solution of the CBF-QP for a single linear constraint:
// v_safe = v_policy when a^T v_policy >= b, otherwise
// v_safe = v_policy + ((b - a^T v_policy) / |a|^2) a.
// Degenerate evals pass the action through unmodified.
FilterOutcome filter_action(const BarrierEval& eval, const FilterParams& params,
                            const Vec2& v_policy);

// Independent optimality check for the CBF-QP minimizer: feasibility plus
// either "unchanged" or active-constraint stationarity (candidate - v_policy
// parallel to a with nonnegative multiplier) and complementary slackness.
bool kkt_oracle_check(const BarrierEval& eval, const FilterParams& params, const Vec2& v_policy,
                      const Vec2& candidate, double tol);

// Per-step comparison of an h trace against the geometric DTCBF lower bound
// (1 - dt a)^k h0 - mu / (dt a).
struct CertificateReport {
  struct Entry {
    int step = 0;
    double h = 0.0;
    double bound = 0.0;
    double slack = 0.0;  // h - bound
  };
  std::vector<Entry> entries;
  double mu = 0.0;
  double alpha = 0.0;
  double dt = 0.0;
  bool pass = false;  // true iff every slack >= -1e-9
};

CertificateReport certify_dtcbf_bound(const std::vector<double>& h_trace, double h0,
                                      const FilterParams& params, double mu);

}  // namespace cbfrl
