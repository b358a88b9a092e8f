#ifndef STAGECCD_OPTIM_COBYLA_HPP
#define STAGECCD_OPTIM_COBYLA_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "stageccd/errors.hpp"

namespace stageccd {

using ScalarFunction = std::function<double(const Eigen::VectorXd&)>;

/// Componentwise box lower <= x <= upper. Infinite entries are unbounded.
struct BoxBounds {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  static BoxBounds unbounded(Eigen::Index n) {
    const double inf = std::numeric_limits<double>::infinity();
    return {Eigen::VectorXd::Constant(n, -inf), Eigen::VectorXd::Constant(n, inf)};
  }

  Eigen::Index size() const { return lower.size(); }

  void validate(Eigen::Index n) const {
    if (lower.size() != n || upper.size() != n) {
      throw InvalidArgument("BoxBounds: dimension does not match the variable vector");
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      if (std::isnan(lower[i]) || std::isnan(upper[i]) || lower[i] > upper[i]) {
        std::ostringstream os;
        os << "BoxBounds: component " << i << " has lower " << lower[i] << " > upper " << upper[i];
        throw InvalidArgument(os.str());
      }
    }
  }

  bool contains(const Eigen::VectorXd& x) const {
    return (x.array() >= lower.array()).all() && (x.array() <= upper.array()).all();
  }

  Eigen::VectorXd clamp(const Eigen::VectorXd& x) const { return x.cwiseMax(lower).cwiseMin(upper); }
};

struct CobylaSettings {
  double rho_begin{0.1};
  double rho_end{1e-4};
  int max_evaluations{400};
  /// Constraint values >= -feasibility_tolerance count as satisfied when
  /// ranking evaluated points.
  double feasibility_tolerance{0.0};

  void validate(Eigen::Index dimension) const {
    if (!(rho_end > 0 && rho_end < rho_begin)) {
      throw InvalidArgument("CobylaSettings: require 0 < rho_end < rho_begin");
    }
    if (max_evaluations < dimension + 2) {
      throw InvalidArgument("CobylaSettings: max_evaluations must be at least dimension + 2");
    }
    if (!(feasibility_tolerance >= 0)) {
      throw InvalidArgument("CobylaSettings: feasibility_tolerance must be >= 0");
    }
  }
};

/// One function evaluation.
struct EvaluationRecord {
  Eigen::VectorXd point;
  double objective{0.0};
  /// User constraints only (box constraints are folded into max_violation).
  Eigen::VectorXd constraints;
  double max_violation{0.0};
};

struct OptimizationResult {
  Eigen::VectorXd best_point;
  double best_objective{0.0};
  Eigen::VectorXd constraint_values;
  double max_violation{0.0};
  bool feasible{false};
  int evaluations_used{0};
  bool converged{false};
  std::string message;
  std::vector<EvaluationRecord> history;
};

/// Ranking of evaluated points: a feasible point beats an infeasible one;
/// two feasible points compare by objective; two infeasible points by their
/// maximum violation. Returns true when `a` is strictly better than `b`.
inline bool merit_better(double objective_a, double violation_a, double objective_b,
                         double violation_b, double feasibility_tolerance = 0.0) {
  const bool fa = violation_a <= feasibility_tolerance;
  const bool fb = violation_b <= feasibility_tolerance;
  if (fa != fb) return fa;
  if (fa) return objective_a < objective_b;
  return violation_a < violation_b;
}

inline bool merit_better(const EvaluationRecord& a, const EvaluationRecord& b,
                         double feasibility_tolerance = 0.0) {
  return merit_better(a.objective, a.max_violation, b.objective, b.max_violation, feasibility_tolerance);
}

namespace detail {

/// Powell's COBYLA. Every array carries an unused leading row/column so the
/// indices below follow the published Fortran.
class CobylaSolver {
 public:
  using Eval = std::function<double(const Eigen::VectorXd&, Eigen::VectorXd&)>;

  CobylaSolver(int n, int m, Eval eval) : n_(n), m_(m), eval_(std::move(eval)) {}

  enum class Status { kNormal, kMaxEvaluations, kRoundingErrors };

  /// `x` is 1-based (x[0] unused). Returns with `evaluations` set.
  Status run(Eigen::VectorXd& x, double rhobeg, double rhoend, int maxfun);

  int evaluations{0};

 private:
  void trstlp(const Eigen::MatrixXd& a, const Eigen::VectorXd& b, double rho, Eigen::VectorXd& dx,
              int& ifull);

  int n_;
  int m_;
  Eval eval_;
};

inline void CobylaSolver::trstlp(const Eigen::MatrixXd& a, const Eigen::VectorXd& b, double rho,
                                 Eigen::VectorXd& dx, int& ifull) {
  const int n = n_;
  const int m = m_;
  Eigen::MatrixXd z = Eigen::MatrixXd::Zero(n + 1, n + 1);
  Eigen::VectorXd zdota = Eigen::VectorXd::Zero(n + 2);
  Eigen::VectorXd vmultc = Eigen::VectorXd::Zero(m + 2);
  Eigen::VectorXd vmultd = Eigen::VectorXd::Zero(m + 2);
  Eigen::VectorXd sdirn = Eigen::VectorXd::Zero(n + 1);
  Eigen::VectorXd dxnew = Eigen::VectorXd::Zero(n + 1);
  std::vector<int> iact(static_cast<std::size_t>(m + 2), 0);
  auto ia = [&](int k) -> int& { return iact[static_cast<std::size_t>(k)]; };

  int mcon = 0, nact = 0, icon = 0, i = 0, k = 0, nactx = 0, isave = 0, kk = 0, kw = 0, kp = 0,
      kl = 0, iout = 0, icount = 0;
  double resmax = 0, optold = 0, optnew = 0, tot = 0, temp = 0, alpha = 0, beta = 0, sp = 0,
         spabs = 0, acca = 0, accb = 0, ratio = 0, zdotv = 0, zdvabs = 0, vsave = 0, dd = 0, ss = 0,
         sd = 0, stpful = 0, step = 0, zdotw = 0, zdwabs = 0, resold = 0, sumabs = 0, sum = 0,
         tempa = 0;

  ifull = 1;
  mcon = m;
  nact = 0;
  resmax = 0.0;
  icon = 0;
  for (i = 1; i <= n; ++i) {
    z(i, i) = 1.0;
    dx[i] = 0.0;
  }
  if (m >= 1) {
    for (k = 1; k <= m; ++k) {
      if (b[k] > resmax) {
        resmax = b[k];
        icon = k;
      }
    }
    for (k = 1; k <= m; ++k) {
      ia(k) = k;
      vmultc[k] = resmax - b[k];
    }
  }
  if (resmax == 0.0) goto L480;
  for (i = 1; i <= n; ++i) sdirn[i] = 0.0;

  // End a stage after 3 consecutive iterations that neither reduce the best
  // value nor enlarge the active set.
L60:
  optold = 0.0;
  icount = 0;
L70:
  if (mcon == m) {
    optnew = resmax;
  } else {
    optnew = 0.0;
    for (i = 1; i <= n; ++i) optnew -= dx[i] * a(i, mcon);
  }
  if (icount == 0 || optnew < optold) {
    optold = optnew;
    nactx = nact;
    icount = 3;
  } else if (nact > nactx) {
    nactx = nact;
    icount = 3;
  } else {
    --icount;
    if (icount == 0) goto L490;
  }

  // Add constraint IACT(ICON) to the active set with Givens rotations.
  if (icon <= nact) goto L260;
  kk = ia(icon);
  for (i = 1; i <= n; ++i) dxnew[i] = a(i, kk);
  tot = 0.0;
  k = n;
  while (k > nact) {
    sp = 0.0;
    spabs = 0.0;
    for (i = 1; i <= n; ++i) {
      temp = z(i, k) * dxnew[i];
      sp += temp;
      spabs += std::abs(temp);
    }
    acca = spabs + 0.1 * std::abs(sp);
    accb = spabs + 0.2 * std::abs(sp);
    if (spabs >= acca || acca >= accb) sp = 0.0;
    if (tot == 0.0) {
      tot = sp;
    } else {
      kp = k + 1;
      temp = std::sqrt(sp * sp + tot * tot);
      alpha = sp / temp;
      beta = tot / temp;
      tot = temp;
      for (i = 1; i <= n; ++i) {
        temp = alpha * z(i, k) + beta * z(i, kp);
        z(i, kp) = alpha * z(i, kp) - beta * z(i, k);
        z(i, k) = temp;
      }
    }
    --k;
  }

  if (tot != 0.0) {
    ++nact;
    zdota[nact] = tot;
    vmultc[icon] = vmultc[nact];
    vmultc[nact] = 0.0;
    goto L210;
  }

  // The new gradient is a combination of the active ones: find the active
  // constraint IOUT to delete.
  ratio = -1.0;
  k = nact;
  do {
    zdotv = 0.0;
    zdvabs = 0.0;
    for (i = 1; i <= n; ++i) {
      temp = z(i, k) * dxnew[i];
      zdotv += temp;
      zdvabs += std::abs(temp);
    }
    acca = zdvabs + 0.1 * std::abs(zdotv);
    accb = zdvabs + 0.2 * std::abs(zdotv);
    if (zdvabs < acca && acca < accb) {
      temp = zdotv / zdota[k];
      if (temp > 0.0 && ia(k) <= m) {
        tempa = vmultc[k] / temp;
        if (ratio < 0.0 || tempa < ratio) {
          ratio = tempa;
          iout = k;
        }
      }
      if (k >= 2) {
        kw = ia(k);
        for (i = 1; i <= n; ++i) dxnew[i] -= temp * a(i, kw);
      }
      vmultd[k] = temp;
    } else {
      vmultd[k] = 0.0;
    }
    --k;
  } while (k > 0);
  if (ratio < 0.0) goto L490;

  // Revise the multipliers and move constraint IOUT to the end of the active
  // list.
  for (k = 1; k <= nact; ++k) vmultc[k] = std::max(0.0, vmultc[k] - ratio * vmultd[k]);
  if (iout < nact) {
    isave = ia(iout);
    vsave = vmultc[iout];
    k = iout;
    do {
      kp = k + 1;
      kw = ia(kp);
      sp = 0.0;
      for (i = 1; i <= n; ++i) sp += z(i, k) * a(i, kw);
      temp = std::sqrt(sp * sp + zdota[kp] * zdota[kp]);
      alpha = zdota[kp] / temp;
      beta = sp / temp;
      zdota[kp] = alpha * zdota[k];
      zdota[k] = temp;
      for (i = 1; i <= n; ++i) {
        temp = alpha * z(i, kp) + beta * z(i, k);
        z(i, kp) = alpha * z(i, k) - beta * z(i, kp);
        z(i, k) = temp;
      }
      ia(k) = kw;
      vmultc[k] = vmultc[kp];
      k = kp;
    } while (k < nact);
    ia(k) = isave;
    vmultc[k] = vsave;
  }
  temp = 0.0;
  for (i = 1; i <= n; ++i) temp += z(i, nact) * a(i, kk);
  if (temp == 0.0) goto L490;
  zdota[nact] = temp;
  vmultc[icon] = 0.0;
  vmultc[nact] = ratio;

  // Keep the objective as the last active constraint in stage two.
L210:
  ia(icon) = ia(nact);
  ia(nact) = kk;
  if (mcon > m && kk != mcon) {
    k = nact - 1;
    sp = 0.0;
    for (i = 1; i <= n; ++i) sp += z(i, k) * a(i, kk);
    temp = std::sqrt(sp * sp + zdota[nact] * zdota[nact]);
    alpha = zdota[nact] / temp;
    beta = sp / temp;
    zdota[nact] = alpha * zdota[k];
    zdota[k] = temp;
    for (i = 1; i <= n; ++i) {
      temp = alpha * z(i, nact) + beta * z(i, k);
      z(i, nact) = alpha * z(i, k) - beta * z(i, nact);
      z(i, k) = temp;
    }
    ia(nact) = ia(k);
    ia(k) = kk;
    temp = vmultc[k];
    vmultc[k] = vmultc[nact];
    vmultc[nact] = temp;
  }

  if (mcon > m) goto L320;
  kk = ia(nact);
  temp = 0.0;
  for (i = 1; i <= n; ++i) temp += sdirn[i] * a(i, kk);
  temp -= 1.0;
  temp /= zdota[nact];
  for (i = 1; i <= n; ++i) sdirn[i] -= temp * z(i, nact);
  goto L340;

  // Delete constraint IACT(ICON) from the active set.
L260:
  if (icon < nact) {
    isave = ia(icon);
    vsave = vmultc[icon];
    k = icon;
    do {
      kp = k + 1;
      kk = ia(kp);
      sp = 0.0;
      for (i = 1; i <= n; ++i) sp += z(i, k) * a(i, kk);
      temp = std::sqrt(sp * sp + zdota[kp] * zdota[kp]);
      alpha = zdota[kp] / temp;
      beta = sp / temp;
      zdota[kp] = alpha * zdota[k];
      zdota[k] = temp;
      for (i = 1; i <= n; ++i) {
        temp = alpha * z(i, kp) + beta * z(i, k);
        z(i, kp) = alpha * z(i, k) - beta * z(i, kp);
        z(i, k) = temp;
      }
      ia(k) = kk;
      vmultc[k] = vmultc[kp];
      k = kp;
    } while (k < nact);
    ia(k) = isave;
    vmultc[k] = vsave;
  }
  --nact;

  if (mcon > m) goto L320;
  temp = 0.0;
  for (i = 1; i <= n; ++i) temp += sdirn[i] * z(i, nact + 1);
  for (i = 1; i <= n; ++i) sdirn[i] -= temp * z(i, nact + 1);
  goto L340;

L320:
  temp = 1.0 / zdota[nact];
  for (i = 1; i <= n; ++i) sdirn[i] = temp * z(i, nact);

  // Step to the trust-region boundary, or the step that zeroes RESMAX.
L340:
  dd = rho * rho;
  sd = 0.0;
  ss = 0.0;
  for (i = 1; i <= n; ++i) {
    if (std::abs(dx[i]) >= 1.0e-6 * rho) dd -= dx[i] * dx[i];
    sd += dx[i] * sdirn[i];
    ss += sdirn[i] * sdirn[i];
  }
  if (dd <= 0.0) goto L490;
  temp = std::sqrt(ss * dd);
  if (std::abs(sd) >= 1.0e-6 * temp) temp = std::sqrt(ss * dd + sd * sd);
  stpful = dd / (temp + sd);
  step = stpful;
  if (mcon == m) {
    acca = step + 0.1 * resmax;
    accb = step + 0.2 * resmax;
    if (step >= acca || acca >= accb) goto L480;
    step = std::min(step, resmax);
  }

  for (i = 1; i <= n; ++i) dxnew[i] = dx[i] + step * sdirn[i];
  if (mcon == m) {
    resold = resmax;
    resmax = 0.0;
    for (k = 1; k <= nact; ++k) {
      kk = ia(k);
      temp = b[kk];
      for (i = 1; i <= n; ++i) temp -= a(i, kk) * dxnew[i];
      resmax = std::max(resmax, temp);
    }
  }

  // Multipliers that would hold at DXNEW.
  k = nact;
  for (;;) {
    zdotw = 0.0;
    zdwabs = 0.0;
    for (i = 1; i <= n; ++i) {
      temp = z(i, k) * dxnew[i];
      zdotw += temp;
      zdwabs += std::abs(temp);
    }
    acca = zdwabs + 0.1 * std::abs(zdotw);
    accb = zdwabs + 0.2 * std::abs(zdotw);
    if (zdwabs >= acca || acca >= accb) zdotw = 0.0;
    vmultd[k] = zdotw / zdota[k];
    if (k < 2) break;
    kk = ia(k);
    for (i = 1; i <= n; ++i) dxnew[i] -= vmultd[k] * a(i, kk);
    --k;
  }
  if (mcon > m) vmultd[nact] = std::max(0.0, vmultd[nact]);

  for (i = 1; i <= n; ++i) dxnew[i] = dx[i] + step * sdirn[i];
  if (mcon > nact) {
    kl = nact + 1;
    for (k = kl; k <= mcon; ++k) {
      kk = ia(k);
      sum = resmax - b[kk];
      sumabs = resmax + std::abs(b[kk]);
      for (i = 1; i <= n; ++i) {
        temp = a(i, kk) * dxnew[i];
        sum += temp;
        sumabs += std::abs(temp);
      }
      acca = sumabs + 0.1 * std::abs(sum);
      accb = sumabs + 0.2 * std::abs(sum);
      if (sumabs >= acca || acca >= accb) sum = 0.0;
      vmultd[k] = sum;
    }
  }

  ratio = 1.0;
  icon = 0;
  for (k = 1; k <= mcon; ++k) {
    if (vmultd[k] < 0.0) {
      temp = vmultc[k] / (vmultc[k] - vmultd[k]);
      if (temp < ratio) {
        ratio = temp;
        icon = k;
      }
    }
  }

  temp = 1.0 - ratio;
  for (i = 1; i <= n; ++i) dx[i] = temp * dx[i] + ratio * dxnew[i];
  for (k = 1; k <= mcon; ++k) vmultc[k] = std::max(0.0, temp * vmultc[k] + ratio * vmultd[k]);
  if (mcon == m) resmax = resold + ratio * (resmax - resold);

  if (icon > 0) goto L70;
  if (step == stpful) return;
L480:
  mcon = m + 1;
  icon = mcon;
  ia(mcon) = mcon;
  vmultc[mcon] = 0.0;
  goto L60;

L490:
  if (mcon == m) goto L480;
  ifull = 0;
}

inline CobylaSolver::Status CobylaSolver::run(Eigen::VectorXd& x, double rhobeg, double rhoend,
                                              int maxfun) {
  const int n = n_;
  const int m = m_;
  const int np = n + 1;
  const int mp = m + 1;
  const int mpp = m + 2;
  constexpr double kAlpha = 0.25;
  constexpr double kBeta = 2.1;
  constexpr double kGamma = 0.5;
  constexpr double kDelta = 1.1;

  Eigen::MatrixXd sim = Eigen::MatrixXd::Zero(n + 1, n + 2);
  Eigen::MatrixXd simi = Eigen::MatrixXd::Zero(n + 1, n + 1);
  Eigen::MatrixXd datmat = Eigen::MatrixXd::Zero(mpp + 1, n + 2);
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n + 1, mp + 1);
  Eigen::VectorXd con = Eigen::VectorXd::Zero(mpp + 1);
  Eigen::VectorXd vsig = Eigen::VectorXd::Zero(n + 1);
  Eigen::VectorXd veta = Eigen::VectorXd::Zero(n + 1);
  Eigen::VectorXd sigbar = Eigen::VectorXd::Zero(n + 1);
  Eigen::VectorXd dx = Eigen::VectorXd::Zero(n + 1);
  Eigen::VectorXd w = Eigen::VectorXd::Zero(n + 1);
  Eigen::VectorXd cvals(m);
  Eigen::VectorXd xv(n);

  int i = 0, j = 0, k = 0, nbest = 0, l = 0, iflag = 0, ifull = 0, jdrop = 0, ibrnch = 0;
  double resmax = 0, phimin = 0, tempa = 0, error = 0, parsig = 0, pareta = 0, wsig = 0, weta = 0,
         cvmaxp = 0, cvmaxm = 0, sum = 0, dxsign = 0, resnew = 0, barmu = 0, phi = 0, prerec = 0,
         prerem = 0, vmold = 0, vmnew = 0, trured = 0, ratio = 0, edgmax = 0, denom = 0, cmin = 0,
         cmax = 0, f = 0, temp = 0;
  double rho = rhobeg;
  double parmu = 0.0;
  Status status = Status::kNormal;

  evaluations = 0;
  temp = 1.0 / rho;
  for (i = 1; i <= n; ++i) {
    sim(i, np) = x[i];
    sim(i, i) = rho;
    simi(i, i) = temp;
  }
  jdrop = np;
  ibrnch = 0;

L40:
  if (evaluations >= maxfun && evaluations > 0) {
    status = Status::kMaxEvaluations;
    goto L600;
  }
  ++evaluations;
  for (i = 1; i <= n; ++i) xv[i - 1] = x[i];
  f = eval_(xv, cvals);
  resmax = 0.0;
  for (k = 1; k <= m; ++k) {
    con[k] = cvals[k - 1];
    resmax = std::max(resmax, -con[k]);
  }
  con[mp] = f;
  con[mpp] = resmax;
  if (ibrnch == 1) goto L440;

  for (k = 1; k <= mpp; ++k) datmat(k, jdrop) = con[k];
  if (evaluations > np) goto L130;

  // Build the initial simplex, keeping the best vertex in pole position.
  if (jdrop <= n) {
    if (datmat(mp, np) <= f) {
      x[jdrop] = sim(jdrop, np);
    } else {
      sim(jdrop, np) = x[jdrop];
      for (k = 1; k <= mpp; ++k) {
        datmat(k, jdrop) = datmat(k, np);
        datmat(k, np) = con[k];
      }
      for (k = 1; k <= jdrop; ++k) {
        sim(jdrop, k) = -rho;
        temp = 0.0;
        for (i = k; i <= jdrop; ++i) temp -= simi(i, k);
        simi(jdrop, k) = temp;
      }
    }
  }
  if (evaluations <= n) {
    jdrop = evaluations;
    x[jdrop] += rho;
    goto L40;
  }
L130:
  ibrnch = 1;

L140:
  phimin = datmat(mp, np) + parmu * datmat(mpp, np);
  nbest = np;
  for (j = 1; j <= n; ++j) {
    temp = datmat(mp, j) + parmu * datmat(mpp, j);
    if (temp < phimin) {
      nbest = j;
      phimin = temp;
    } else if (temp == phimin && parmu == 0.0) {
      if (datmat(mpp, j) < datmat(mpp, nbest)) nbest = j;
    }
  }

  if (nbest <= n) {
    for (i = 1; i <= mpp; ++i) {
      temp = datmat(i, np);
      datmat(i, np) = datmat(i, nbest);
      datmat(i, nbest) = temp;
    }
    for (i = 1; i <= n; ++i) {
      temp = sim(i, nbest);
      sim(i, nbest) = 0.0;
      sim(i, np) += temp;
      tempa = 0.0;
      for (k = 1; k <= n; ++k) {
        sim(i, k) -= temp;
        tempa -= simi(k, i);
      }
      simi(nbest, i) = tempa;
    }
  }

  // SIMI must remain a good inverse of the simplex edge matrix.
  error = 0.0;
  for (i = 1; i <= n; ++i) {
    for (j = 1; j <= n; ++j) {
      temp = (i == j) ? -1.0 : 0.0;
      for (k = 1; k <= n; ++k) temp += simi(i, k) * sim(k, j);
      error = std::max(error, std::abs(temp));
    }
  }
  if (error > 0.1) {
    status = Status::kRoundingErrors;
    goto L600;
  }

  // Linear models; minus the objective gradient goes in column MP.
  for (k = 1; k <= mp; ++k) {
    con[k] = -datmat(k, np);
    for (j = 1; j <= n; ++j) w[j] = datmat(k, j) + con[k];
    for (i = 1; i <= n; ++i) {
      temp = 0.0;
      for (j = 1; j <= n; ++j) temp += w[j] * simi(j, i);
      if (k == mp) temp = -temp;
      a(i, k) = temp;
    }
  }

  iflag = 1;
  parsig = kAlpha * rho;
  pareta = kBeta * rho;
  for (j = 1; j <= n; ++j) {
    wsig = 0.0;
    weta = 0.0;
    for (i = 1; i <= n; ++i) {
      wsig += simi(j, i) * simi(j, i);
      weta += sim(i, j) * sim(i, j);
    }
    vsig[j] = 1.0 / std::sqrt(wsig);
    veta[j] = std::sqrt(weta);
    if (vsig[j] < parsig || veta[j] > pareta) iflag = 0;
  }

  if (ibrnch == 1 || iflag == 1) goto L370;
  jdrop = 0;
  temp = pareta;
  for (j = 1; j <= n; ++j) {
    if (veta[j] > temp) {
      jdrop = j;
      temp = veta[j];
    }
  }
  if (jdrop == 0) {
    for (j = 1; j <= n; ++j) {
      if (vsig[j] < temp) {
        jdrop = j;
        temp = vsig[j];
      }
    }
  }

  // Geometry step that restores an acceptable simplex.
  temp = kGamma * rho * vsig[jdrop];
  for (i = 1; i <= n; ++i) dx[i] = temp * simi(jdrop, i);
  cvmaxp = 0.0;
  cvmaxm = 0.0;
  sum = 0.0;
  for (k = 1; k <= mp; ++k) {
    sum = 0.0;
    for (i = 1; i <= n; ++i) sum += a(i, k) * dx[i];
    if (k < mp) {
      temp = datmat(k, np);
      cvmaxp = std::max(cvmaxp, -sum - temp);
      cvmaxm = std::max(cvmaxm, sum - temp);
    }
  }
  dxsign = 1.0;
  if (parmu * (cvmaxp - cvmaxm) > sum + sum) dxsign = -1.0;

  temp = 0.0;
  for (i = 1; i <= n; ++i) {
    dx[i] *= dxsign;
    sim(i, jdrop) = dx[i];
    temp += simi(jdrop, i) * dx[i];
  }
  for (i = 1; i <= n; ++i) simi(jdrop, i) /= temp;
  for (j = 1; j <= n; ++j) {
    if (j != jdrop) {
      temp = 0.0;
      for (i = 1; i <= n; ++i) temp += simi(j, i) * dx[i];
      for (i = 1; i <= n; ++i) simi(j, i) -= temp * simi(jdrop, i);
    }
    x[j] = sim(j, np) + dx[j];
  }
  goto L40;

L370:
  ifull = 0;
  trstlp(a, con, rho, dx, ifull);
  if (ifull == 0) {
    temp = 0.0;
    for (i = 1; i <= n; ++i) temp += dx[i] * dx[i];
    if (temp < 0.25 * rho * rho) {
      ibrnch = 1;
      goto L550;
    }
  }

  // Predicted change of F and of the maximum violation.
  resnew = 0.0;
  con[mp] = 0.0;
  for (k = 1; k <= mp; ++k) {
    sum = con[k];
    for (i = 1; i <= n; ++i) sum -= a(i, k) * dx[i];
    if (k < mp) resnew = std::max(resnew, sum);
  }

  barmu = 0.0;
  prerec = datmat(mpp, np) - resnew;
  if (prerec > 0.0) barmu = sum / prerec;
  if (parmu < 1.5 * barmu) {
    parmu = 2.0 * barmu;
    phi = datmat(mp, np) + parmu * datmat(mpp, np);
    for (j = 1; j <= n; ++j) {
      temp = datmat(mp, j) + parmu * datmat(mpp, j);
      if (temp < phi) goto L140;
      if (temp == phi && parmu == 0.0) {
        if (datmat(mpp, j) < datmat(mpp, np)) goto L140;
      }
    }
  }
  prerem = parmu * prerec - sum;

  for (i = 1; i <= n; ++i) x[i] = sim(i, np) + dx[i];
  ibrnch = 1;
  goto L40;

L440:
  vmold = datmat(mp, np) + parmu * datmat(mpp, np);
  vmnew = f + parmu * resmax;
  trured = vmold - vmnew;
  if (parmu == 0.0 && f == datmat(mp, np)) {
    prerem = prerec;
    trured = datmat(mpp, np) - resmax;
  }

  ratio = 0.0;
  if (trured <= 0.0) ratio = 1.0;
  jdrop = 0;
  for (j = 1; j <= n; ++j) {
    temp = 0.0;
    for (i = 1; i <= n; ++i) temp += simi(j, i) * dx[i];
    temp = std::abs(temp);
    if (temp > ratio) {
      jdrop = j;
      ratio = temp;
    }
    sigbar[j] = temp * vsig[j];
  }

  edgmax = kDelta * rho;
  l = 0;
  for (j = 1; j <= n; ++j) {
    if (sigbar[j] >= parsig || sigbar[j] >= vsig[j]) {
      temp = veta[j];
      if (trured > 0.0) {
        temp = 0.0;
        for (i = 1; i <= n; ++i) temp += (dx[i] - sim(i, j)) * (dx[i] - sim(i, j));
        temp = std::sqrt(temp);
      }
      if (temp > edgmax) {
        l = j;
        edgmax = temp;
      }
    }
  }
  if (l > 0) jdrop = l;
  if (jdrop == 0) goto L550;

  temp = 0.0;
  for (i = 1; i <= n; ++i) {
    sim(i, jdrop) = dx[i];
    temp += simi(jdrop, i) * dx[i];
  }
  for (i = 1; i <= n; ++i) simi(jdrop, i) /= temp;
  for (j = 1; j <= n; ++j) {
    if (j != jdrop) {
      temp = 0.0;
      for (i = 1; i <= n; ++i) temp += simi(j, i) * dx[i];
      for (i = 1; i <= n; ++i) simi(j, i) -= temp * simi(jdrop, i);
    }
  }
  for (k = 1; k <= mpp; ++k) datmat(k, jdrop) = con[k];

  if (trured > 0.0 && trured >= 0.1 * prerem) goto L140;
L550:
  if (iflag == 0) {
    ibrnch = 0;
    goto L140;
  }

  if (rho > rhoend) {
    rho *= 0.5;
    if (rho <= 1.5 * rhoend) rho = rhoend;
    if (parmu > 0.0) {
      denom = 0.0;
      for (k = 1; k <= mp; ++k) {
        cmin = datmat(k, np);
        cmax = cmin;
        for (i = 1; i <= n; ++i) {
          cmin = std::min(cmin, datmat(k, i));
          cmax = std::max(cmax, datmat(k, i));
        }
        if (k <= m && cmin < 0.5 * cmax) {
          temp = std::max(cmax, 0.0) - cmin;
          denom = (denom <= 0.0) ? temp : std::min(denom, temp);
        }
      }
      if (denom == 0.0) {
        parmu = 0.0;
      } else if (cmax - cmin < parmu * denom) {
        parmu = (cmax - cmin) / denom;
      }
    }
    goto L140;
  }

  if (ifull == 1) return status;
L600:
  for (i = 1; i <= n; ++i) x[i] = sim(i, np);
  return status;
}

}  // namespace detail

/// Minimizes `objective` subject to `constraints[k](x) >= 0` and the box.
///
/// Box bounds enter as additional linear constraints; user functions are
/// always evaluated at the box projection of the trial point, so they need
/// only be defined on the box. Components with equal lower and upper bounds
/// are held fixed. The returned point is the best evaluated point under
/// merit_better, which can differ from the final simplex vertex.
inline OptimizationResult cobyla_minimize(const ScalarFunction& objective,
                                          const std::vector<ScalarFunction>& constraints,
                                          const Eigen::VectorXd& x0, const BoxBounds& bounds,
                                          const CobylaSettings& settings = {}) {
  const Eigen::Index dim = x0.size();
  if (dim == 0) throw InvalidArgument("cobyla_minimize: empty variable vector");
  bounds.validate(dim);
  settings.validate(dim);
  if (!x0.allFinite() || !bounds.contains(x0)) {
    throw InvalidArgument("cobyla_minimize: x0 must be finite and inside the bounds");
  }

  std::vector<Eigen::Index> free;
  for (Eigen::Index i = 0; i < dim; ++i) {
    if (bounds.lower[i] < bounds.upper[i]) free.push_back(i);
  }
  std::vector<std::pair<Eigen::Index, double>> box_rows;  // (free slot, sign)
  for (std::size_t s = 0; s < free.size(); ++s) {
    if (std::isfinite(bounds.lower[free[s]])) box_rows.emplace_back(static_cast<Eigen::Index>(s), 1.0);
    if (std::isfinite(bounds.upper[free[s]])) box_rows.emplace_back(static_cast<Eigen::Index>(s), -1.0);
  }
  const int nfree = static_cast<int>(free.size());
  const int nuser = static_cast<int>(constraints.size());
  const int mtot = nuser + static_cast<int>(box_rows.size());

  OptimizationResult result;
  auto full_point = [&](const Eigen::VectorXd& xr) {
    Eigen::VectorXd x = x0;
    for (int s = 0; s < nfree; ++s) x[free[static_cast<std::size_t>(s)]] = xr[s];
    return x;
  };

  auto record = [&](const Eigen::VectorXd& x) {
    EvaluationRecord rec;
    rec.point = x;
    const Eigen::VectorXd xc = bounds.clamp(x);
    rec.objective = objective(xc);
    rec.constraints.resize(nuser);
    double viol = 0.0;
    for (int k = 0; k < nuser; ++k) {
      rec.constraints[k] = constraints[static_cast<std::size_t>(k)](xc);
      viol = std::max(viol, -rec.constraints[k]);
    }
    viol = std::max(viol, (bounds.lower - x).maxCoeff());
    viol = std::max(viol, (x - bounds.upper).maxCoeff());
    rec.max_violation = std::max(0.0, viol);
    if (!std::isfinite(rec.objective) || !rec.constraints.allFinite()) {
      std::ostringstream os;
      os << "cobyla_minimize: non-finite objective or constraint at evaluation "
         << result.history.size() + 1;
      throw SolverError(os.str());
    }
    result.history.push_back(rec);
    return rec;
  };

  detail::CobylaSolver::Status status = detail::CobylaSolver::Status::kNormal;
  if (nfree == 0) {
    record(x0);
  } else {
    auto eval = [&](const Eigen::VectorXd& xr, Eigen::VectorXd& c) {
      const Eigen::VectorXd x = full_point(xr);
      const EvaluationRecord rec = record(x);
      for (int k = 0; k < nuser; ++k) c[k] = rec.constraints[k];
      for (std::size_t r = 0; r < box_rows.size(); ++r) {
        const auto [s, sign] = box_rows[r];
        const Eigen::Index i = free[static_cast<std::size_t>(s)];
        c[nuser + static_cast<Eigen::Index>(r)] =
            sign > 0 ? xr[s] - bounds.lower[i] : bounds.upper[i] - xr[s];
      }
      return rec.objective;
    };
    detail::CobylaSolver solver(nfree, mtot, eval);
    Eigen::VectorXd x(nfree + 1);
    x[0] = 0.0;
    for (int s = 0; s < nfree; ++s) x[s + 1] = x0[free[static_cast<std::size_t>(s)]];
    status = solver.run(x, settings.rho_begin, settings.rho_end, settings.max_evaluations);
  }

  if (status == detail::CobylaSolver::Status::kRoundingErrors) {
    std::ostringstream os;
    os << "cobyla_minimize: simplex became degenerate (rounding errors) after "
       << result.history.size() << " evaluations";
    throw SolverError(os.str());
  }

  std::size_t best = 0;
  for (std::size_t e = 1; e < result.history.size(); ++e) {
    if (merit_better(result.history[e], result.history[best], settings.feasibility_tolerance)) best = e;
  }
  const EvaluationRecord& b = result.history[best];
  result.best_point = b.point;
  result.best_objective = b.objective;
  result.constraint_values = b.constraints;
  result.max_violation = b.max_violation;
  result.feasible = b.max_violation <= settings.feasibility_tolerance;
  result.evaluations_used = static_cast<int>(result.history.size());
  result.converged = status == detail::CobylaSolver::Status::kNormal;
  result.message = result.converged ? "trust region reduced to rho_end"
                                    : "evaluation budget exhausted before rho_end";
  return result;
}

}  // namespace stageccd

#endif  // STAGECCD_OPTIM_COBYLA_HPP
