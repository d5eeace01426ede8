#include "cbfrl/filter.hpp"

#include <cmath>
#include <stdexcept>

namespace cbfrl {

FilterOutcome filter_action(const BarrierEval& eval, const FilterParams& params,
                            const Vec2& v_policy) {
  FilterOutcome out;
  if (eval.degenerate) {
    out.v_safe = v_policy;
    out.degenerate = true;
    return out;
  }
  const Vec2& a = eval.gradient;
  double a2 = a.squaredNorm();
  if (a2 <= 0.0) throw std::invalid_argument("filter_action: zero barrier gradient");
  double b = -params.alpha * eval.value;
  out.margin = a.dot(v_policy) - b;
  if (out.margin >= 0.0) {
    out.v_safe = v_policy;
    return out;
  }
  out.activated = true;
  out.intervention = (-out.margin / a2) * a;
  out.v_safe = v_policy + out.intervention;
  return out;
}

bool kkt_oracle_check(const BarrierEval& eval, const FilterParams& params, const Vec2& v_policy,
                      const Vec2& candidate, double tol) {
  const Vec2& a = eval.gradient;
  double a2 = a.squaredNorm();
  if (a2 <= 0.0) throw std::invalid_argument("kkt_oracle_check: zero barrier gradient");
  double b = -params.alpha * eval.value;

  // (i) feasibility
  if (a.dot(candidate) < b - tol) return false;

  // (ii) inactive case: candidate coincides with the proposal
  Vec2 diff = candidate - v_policy;
  if (diff.norm() <= tol) return true;

  // (ii) active case: stationarity (diff = lambda a, lambda >= 0) and
  // complementary slackness (constraint tight).
  double lambda = a.dot(diff) / a2;
  if (lambda < -tol) return false;
  if ((diff - lambda * a).norm() > tol) return false;
  if (std::abs(a.dot(candidate) - b) > tol) return false;
  return true;
}

CertificateReport certify_dtcbf_bound(const std::vector<double>& h_trace, double h0,
                                      const FilterParams& params, double mu) {
  if (h_trace.empty()) throw std::invalid_argument("certify_dtcbf_bound: empty trace");
  if (mu < 0.0) throw std::invalid_argument("certify_dtcbf_bound: mu must be >= 0");
  if (!params.bound_precondition_holds())
    throw std::invalid_argument("certify_dtcbf_bound: requires (1 - dt*alpha) in [0, 1)");

  CertificateReport report;
  report.mu = mu;
  report.alpha = params.alpha;
  report.dt = params.dt;
  report.pass = true;
  report.entries.reserve(h_trace.size());

  const double rho = params.decay();
  const double offset = mu / (params.dt * params.alpha);
  for (std::size_t k = 0; k < h_trace.size(); ++k) {
    CertificateReport::Entry e;
    e.step = static_cast<int>(k);
    e.h = h_trace[k];
    e.bound = std::pow(rho, static_cast<double>(k)) * h0 - offset;
    e.slack = e.h - e.bound;
    if (e.slack < -1e-9) report.pass = false;
    report.entries.push_back(e);
  }
  return report;
}

}  // namespace cbfrl
