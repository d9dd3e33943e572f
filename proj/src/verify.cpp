#include "rrapsp/verify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <utility>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <fmt/format.h>

#include "rrapsp/error.hpp"
#include "rrapsp/tolerances.hpp"

namespace rrapsp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Index commonRank(const PhiMap& phi) { return std::min(phi.sPrev.rank(), phi.sNext.rank()); }

Matrix leadingDifference(const PhiMap& phi) {
  const Index dc = commonRank(phi);
  return phi.sNext.columns().leftCols(dc) - phi.sPrev.columns().leftCols(dc);
}

/// Constraint ⟨y, Qs⟩ ≤ beta on y ∈ R(S) describing H ∩ R(S).
struct Sliced {
  Vector qs;
  double beta = 0.0;
};

Sliced slice(const HalfSpace& h, const BasisMatrix& s) {
  return {projectSubspace(h.normal, s), h.anchor.dot(h.normal) - h.offset};
}

bool slicedEmpty(const Sliced& sl) {
  const double nn = sl.qs.squaredNorm();
  return nn == 0.0 && sl.beta < 0.0;
}

Vector randomVector(Index n, Rng& rng) {
  Vector v(n);
  for (Index i = 0; i < n; ++i) v(i) = rng.normal();
  return v;
}

}  // namespace

// ---------------------------------------------------------------------------

Vector applyPhi(const PhiMap& phi, const Vector& x) {
  const Vector z = phi.sPrev.reduce(x);
  Vector carried = Vector::Zero(phi.sNext.rank());
  const Index keep = std::min(z.size(), carried.size());
  carried.head(keep) = z.head(keep);
  return phi.sNext.lift(carried);
}

Matrix phiMatrix(const PhiMap& phi) {
  const Index dc = commonRank(phi);
  return phi.sNext.columns().leftCols(dc) * phi.sPrev.columns().leftCols(dc).transpose();
}

bool sameBasis(const PhiMap& phi, double tol) {
  if (phi.sPrev.ambientDim() != phi.sNext.ambientDim()) return false;
  return leadingDifference(phi).cwiseAbs().maxCoeff() <= tol;
}

FixedPointSpace fixedPointSet(const PhiMap& phi, double tol) {
  if (phi.sPrev.ambientDim() != phi.sNext.ambientDim()) {
    throw DimensionError("fixedPointSet: bases live in different spaces");
  }
  const Index dc = commonRank(phi);
  const Matrix diff = leadingDifference(phi);
  Eigen::JacobiSVD<Matrix> svd(diff, Eigen::ComputeFullV);
  const Vector& sv = svd.singularValues();
  std::vector<Index> nullCols;
  for (Index j = 0; j < dc; ++j) {
    const double sigma = j < sv.size() ? sv(j) : 0.0;
    if (sigma <= tol) nullCols.push_back(j);
  }
  FixedPointSpace out;
  out.reduced = Matrix(phi.sPrev.rank(), static_cast<Index>(nullCols.size()));
  out.reduced.setZero();
  for (std::size_t c = 0; c < nullCols.size(); ++c) {
    out.reduced.col(static_cast<Index>(c)).head(dc) = svd.matrixV().col(nullCols[c]);
  }
  out.full = phi.sPrev.columns() * out.reduced;
  for (Index c = 0; c < out.full.cols(); ++c) {
    const Vector v = out.full.col(c);
    const double phiResidual = (applyPhi(phi, v) - v).norm();
    const double basisResidual = (diff * out.reduced.col(c).head(dc)).norm();
    out.maxResidual = std::max({out.maxResidual, phiResidual, basisResidual});
  }
  return out;
}

AttractingReport attractingCheck(const PhiMap& phi, int trials, Rng& rng) {
  AttractingReport rep;
  rep.trials = trials;
  const Index n = phi.sPrev.ambientDim();
  rep.sameBasis = sameBasis(phi, tol::kFixedPointEig);
  if (rep.sameBasis) {
    const FixedPointSpace fix = fixedPointSet(phi);
    for (int t = 0; t < trials; ++t) {
      const Vector x = randomVector(n, rng);
      const Vector f = fix.full * randomVector(fix.dim(), rng);
      const Vector px = applyPhi(phi, x);
      const double lhs = (x - px).squaredNorm();
      const double rhs = (x - f).squaredNorm() - (px - f).squaredNorm();
      const double scale = std::max(1.0, (x - f).squaredNorm());
      rep.maxViolation = std::max(rep.maxViolation, std::abs(lhs - rhs) / scale);
    }
    rep.passed = rep.maxViolation <= 1e-9;
    return rep;
  }
  const Index dc = commonRank(phi);
  const Matrix diff = leadingDifference(phi);
  Eigen::JacobiSVD<Matrix> svd(diff, Eigen::ComputeFullV);
  if (!(svd.singularValues()(0) > tol::kFixedPointEig)) {
    throw NumericalError("attractingCheck: bases differ but no witness direction exists");
  }
  Vector zt = Vector::Zero(phi.sPrev.rank());
  zt.head(dc) = svd.matrixV().col(0);
  rep.witness = phi.sPrev.lift(zt);
  const Vector image = applyPhi(phi, rep.witness);
  // ‖Φz* − 0‖ = ‖z* − 0‖ with 0 ∈ Fix, while z* itself is moved.
  const double normGap = std::abs(image.norm() - rep.witness.norm());
  const double moved = (image - rep.witness).norm();
  rep.maxViolation = normGap;
  rep.passed = normGap <= 1e-10 && moved > tol::kFixedPointEig;
  return rep;
}

// ---------------------------------------------------------------------------

ThetaInstance makeThetaInstance(const BasisMatrix& basis, const Vector& anchor,
                                std::span<const Vector> regressors, std::span<const double> targets,
                                int q, int r, double rho, std::span<const double> weights) {
  const int available = static_cast<int>(std::min(regressors.size(), targets.size()));
  if (available == 0) throw ConfigError("makeThetaInstance: no data");
  if (q < 1 || r < 1) throw ConfigError("makeThetaInstance: q and r must be >= 1");
  const int rr = std::min(r, available);
  const int qq = std::min(q, available - rr + 1);

  ThetaInstance inst{{}, basis, {}, anchor};
  if (weights.empty()) {
    inst.weights.assign(static_cast<std::size_t>(qq), 1.0 / qq);
  } else {
    double sum = 0.0;
    for (int t = 0; t < qq; ++t) sum += weights[static_cast<std::size_t>(t)];
    for (int t = 0; t < qq; ++t) inst.weights.push_back(weights[static_cast<std::size_t>(t)] / sum);
  }
  for (int t = 0; t < qq; ++t) {
    Vector e(rr);
    Vector normal = Vector::Zero(anchor.size());
    for (int i = 0; i < rr; ++i) {
      const auto j = static_cast<std::size_t>(t + i);
      e(i) = regressors[j].dot(anchor) - targets[j];
    }
    for (int i = 0; i < rr; ++i) normal += 2.0 * e(i) * regressors[static_cast<std::size_t>(t + i)];
    inst.halfSpaces.push_back(HalfSpace{normal, e.squaredNorm() - rho, anchor});
  }
  return inst;
}

ConstrainedProjection projectOntoSliced(const Vector& x, const HalfSpace& h, const BasisMatrix& s) {
  // C ⊂ R(S), so P_C(x) = P_C(SSᵀx).
  ConstrainedProjection out;
  const Sliced sl = slice(h, s);
  const Vector y = projectSubspace(x, s);
  const double nn = sl.qs.squaredNorm();
  if (nn == 0.0) {
    out.empty = sl.beta < 0.0;
    out.point = y;
    out.certified = !out.empty;
    return out;
  }
  const double excess = y.dot(sl.qs) - sl.beta;
  out.point = excess <= 0.0 ? y : Vector(y - (excess / nn) * sl.qs);
  out.certified = true;
  return out;
}

ConstrainedProjection dykstraProjection(const Vector& x, const HalfSpace& h, const BasisMatrix& s,
                                        double tolerance, int maxIterations) {
  ConstrainedProjection out;
  const Sliced sl = slice(h, s);
  if (slicedEmpty(sl)) {
    out.empty = true;
    out.point = projectSubspace(x, s);
    return out;
  }
  Vector cur = x;
  Vector p = Vector::Zero(x.size());
  Vector qcorr = Vector::Zero(x.size());
  const double scale = 1.0 + x.norm();
  int it = 0;
  for (; it < maxIterations; ++it) {
    const Vector y = projectHalfSpace(cur + p, h);
    p = cur + p - y;
    const Vector next = projectSubspace(y + qcorr, s);
    qcorr = y + qcorr - next;
    const double change = (next - cur).norm();
    cur = next;
    if (change <= 1e-3 * tolerance * scale && it > 0) break;
  }
  out.iterations = it;
  out.point = cur;

  // Optimality: P ∈ R(S) ∩ H, Q(x − P) = μ Qs with μ ≥ 0 and μ·(⟨P,Qs⟩ − β) = 0.
  const double inSubspace = (cur - projectSubspace(cur, s)).norm();
  const double excess = cur.dot(sl.qs) - sl.beta;
  const Vector residual = projectSubspace(x - cur, s);
  const double nn = sl.qs.squaredNorm();
  const double mu = nn > 0.0 ? residual.dot(sl.qs) / nn : 0.0;
  const double normalGap = (residual - mu * sl.qs).norm();
  const double sNorm = std::sqrt(nn);
  const double tolAbs = tolerance * scale;
  out.certified = inSubspace <= tolAbs && excess <= tolAbs * std::max(1.0, sNorm) &&
                  normalGap <= tolAbs && mu >= -tolAbs &&
                  std::abs(mu * excess) <= tolAbs * std::max(1.0, sNorm);
  return out;
}

double slicedDistance(const Vector& x, const HalfSpace& h, const BasisMatrix& s) {
  const ConstrainedProjection p = projectOntoSliced(x, h, s);
  if (p.empty) return kInf;
  return (x - p.point).norm();
}

namespace {

bool inRange(const Vector& x, const BasisMatrix& s) {
  return (x - projectSubspace(x, s)).norm() <= 1e-9 * std::max(1.0, x.norm());
}

double slicedDistanceAny(const Vector& x, const HalfSpace& h, const BasisMatrix& s) {
  if (inRange(x, s)) return slicedDistance(x, h, s);
  const ConstrainedProjection p = dykstraProjection(x, h, s);
  if (p.empty) return kInf;
  if (!p.certified) throw NumericalError("thetaValue: projection oracle did not certify");
  return (x - p.point).norm();
}

}  // namespace

double thetaValue(const ThetaInstance& inst, const Vector& h) {
  double l = 0.0;
  double acc = 0.0;
  for (std::size_t i = 0; i < inst.halfSpaces.size(); ++i) {
    const double dk = slicedDistance(inst.anchor, inst.halfSpaces[i], inst.basis);
    if (!std::isfinite(dk) || dk == 0.0) continue;
    const double dh = slicedDistanceAny(h, inst.halfSpaces[i], inst.basis);
    l += inst.weights[i] * dk;
    acc += inst.weights[i] * dk * dh;
  }
  return l == 0.0 ? 0.0 : acc / l;
}

Vector thetaSubgradient(const ThetaInstance& inst) {
  Vector g = Vector::Zero(inst.anchor.size());
  double l = 0.0;
  for (std::size_t i = 0; i < inst.halfSpaces.size(); ++i) {
    const ConstrainedProjection p = projectOntoSliced(inst.anchor, inst.halfSpaces[i], inst.basis);
    if (p.empty) continue;
    const double dk = (inst.anchor - p.point).norm();
    if (dk == 0.0) continue;
    l += inst.weights[i] * dk;
    g += inst.weights[i] * (inst.anchor - p.point);
  }
  if (l == 0.0) return g;
  return g / l;
}

Vector rapsmStep(const Vector& h, const ThetaInstance& inst, const PhiMap& phi, double lambda) {
  if (!(lambda >= 0.0 && lambda <= 2.0)) throw ConfigError("rapsmStep: lambda must lie in [0, 2]");
  Vector f = Vector::Zero(h.size());
  double ellSum = 0.0;
  double weighted = 0.0;
  bool any = false;
  for (std::size_t i = 0; i < inst.halfSpaces.size(); ++i) {
    const HalfSpace& hs = inst.halfSpaces[i];
    if (hs.value(h) <= 0.0) continue;  // g_ι(h) ≤ 0: already in H⁻_ι
    const Vector qs = projectSubspace(hs.normal, inst.basis);
    const double nn = qs.squaredNorm();
    if (nn == 0.0) continue;  // empty slice: no projection exists
    // Projection of h ∈ R(S) onto H⁻ ∩ R(S): h − g/‖Qs‖²·Qs.
    const Vector proj = h - (hs.value(h) / nn) * qs;
    const double w = inst.weights[i];
    const double dist2 = (proj - h).squaredNorm();
    f += w * (proj - h);
    ellSum += w * dist2;
    weighted += w * w * dist2;
    any = true;
  }
  if (!any) return applyPhi(phi, h);
  const double fNorm2 = f.squaredNorm();
  if (!(fNorm2 > tol::kCancellation * weighted)) return applyPhi(phi, h);
  const double m = ellSum / fNorm2;
  return applyPhi(phi, Vector(h + lambda * m * f));
}

Vector directReducedUpdate(const Vector& hTilde, std::span<const Matrix> reducedBlocks,
                           std::span<const Vector> targetBlocks, double rho, double lambda,
                           std::span<const double> weights) {
  if (reducedBlocks.size() != targetBlocks.size() || reducedBlocks.size() != weights.size()) {
    throw DimensionError("directReducedUpdate: block counts disagree");
  }
  Vector f = Vector::Zero(hTilde.size());
  double num = 0.0;
  double weighted = 0.0;
  for (std::size_t i = 0; i < reducedBlocks.size(); ++i) {
    const Matrix& u = reducedBlocks[i];
    const Vector e = u.transpose() * hTilde - targetBlocks[i];
    const double g = e.squaredNorm() - rho;
    if (g <= 0.0) continue;
    const HalfSpace hs{2.0 * u * e, g, hTilde};
    if (hs.normal.squaredNorm() == 0.0) continue;
    const Vector p = projectHalfSpace(hTilde, hs);
    f += weights[i] * (p - hTilde);
    num += weights[i] * (p - hTilde).squaredNorm();
    weighted += weights[i] * weights[i] * (p - hTilde).squaredNorm();
  }
  const double fNorm2 = f.squaredNorm();
  if (num == 0.0 || !(fNorm2 > tol::kCancellation * weighted)) return hTilde;
  return hTilde + lambda * (num / fNorm2) * f;
}

// ---------------------------------------------------------------------------

std::optional<Vector> findFeasiblePoint(std::span<const HalfSpace> halfSpaces, const Matrix& span,
                                        const Vector& start, int maxSweeps) {
  const Index dim = span.cols();
  const Index n = start.size();
  const auto feasible = [&](const Vector& x) {
    for (const HalfSpace& h : halfSpaces) {
      if (h.value(x) > 0.0) return false;
    }
    return true;
  };
  if (dim == 0) {
    Vector zero = Vector::Zero(n);
    if (feasible(zero)) return zero;
    return std::nullopt;
  }
  // Constraint ⟨x̃, n_i⟩ ≤ b_i in span coordinates, tightened by a margin so
  // the point found is strictly inside in full-space arithmetic.
  std::vector<Vector> normals;
  std::vector<double> bounds;
  for (const HalfSpace& h : halfSpaces) {
    Vector ni = span.transpose() * h.normal;
    const double bi = h.anchor.dot(h.normal) - h.offset;
    if (ni.norm() <= 1e-14 * std::max(1.0, h.normal.norm())) {
      if (bi < 0.0) return std::nullopt;
      continue;
    }
    normals.push_back(std::move(ni));
    bounds.push_back(bi - 1e-9 * std::max(1.0, std::abs(bi)));
  }
  Vector x = span.transpose() * start;
  // Few constraints: try each subset as equalities (least-norm move from the
  // start). Correlated regressors make cyclic projections crawl, this does not.
  const std::size_t nc = normals.size();
  if (nc > 0 && nc <= 10) {
    for (unsigned mask = 1; mask < (1U << nc); ++mask) {
      std::vector<std::size_t> active;
      for (std::size_t i = 0; i < nc; ++i) {
        if ((mask >> i) & 1U) active.push_back(i);
      }
      if (static_cast<Index>(active.size()) > dim) continue;
      Matrix a(static_cast<Index>(active.size()), dim);
      Vector rhs(a.rows());
      for (Index r = 0; r < a.rows(); ++r) {
        const std::size_t i = active[static_cast<std::size_t>(r)];
        a.row(r) = normals[i].transpose();
        rhs(r) = bounds[i] - normals[i].dot(x);
      }
      const Vector step = a.completeOrthogonalDecomposition().solve(rhs);
      if ((a * step - rhs).norm() > 1e-10 * (1.0 + rhs.norm())) continue;
      const Vector full = span * (x + step);
      if (feasible(full)) return full;
    }
  }
  for (int sweep = 0; sweep < maxSweeps; ++sweep) {
    double moved = 0.0;
    for (std::size_t i = 0; i < normals.size(); ++i) {
      const double excess = x.dot(normals[i]) - bounds[i];
      if (excess > 0.0) {
        const Vector delta = (excess / normals[i].squaredNorm()) * normals[i];
        x -= delta;
        moved = std::max(moved, delta.norm());
      }
    }
    const Vector full = span * x;
    if (feasible(full)) return full;
    if (moved <= tol::kOracleFixedPoint * (1.0 + x.norm())) break;
  }
  return std::nullopt;
}

TheoremProbe monotoneProbe(std::span<const ProbeStep> trajectory) {
  TheoremProbe probe;
  probe.eps1 = kInf;
  probe.eps2 = kInf;
  for (const ProbeStep& st : trajectory) {
    ++probe.steps;
    probe.eps1 = std::min(probe.eps1, st.lambda);
    probe.eps2 = std::min(probe.eps2, 2.0 - st.lambda);
    const double theta = thetaValue(st.inst, st.h);
    probe.thetaValues.push_back(theta);
    probe.subgradientNorms.push_back(thetaSubgradient(st.inst).norm());

    const FixedPointSpace fix = fixedPointSet(st.phi);
    const std::optional<Vector> f = findFeasiblePoint(st.inst.halfSpaces, fix.full, st.h);
    if (!f) {
      ++probe.unchecked;
      continue;
    }
    ++probe.certified;
    probe.feasiblePoint = f;
    const double before = (st.h - *f).norm();
    const double after = (st.hNext - *f).norm();
    probe.distances.push_back(before);
    probe.maxIncrease = std::max(probe.maxIncrease, after - before);
    if (after > before + tol::kMonotone) ++probe.violations;
    if (theta > 0.0 && st.lambda > 0.0 && st.lambda < 2.0) {
      ++probe.strictEligible;
      if (after < before) ++probe.strictDecreases;
    }
  }
  if (probe.steps == 0) probe.eps1 = probe.eps2 = 0.0;
  return probe;
}

ProbeRun recordTrajectory(KrrApsp& filter, const std::function<StreamSample()>& next,
                          int activeSteps, int maxWarmup) {
  ProbeRun run;
  const KrrParams& prm = filter.params();
  while (static_cast<int>(run.steps.size()) < activeSteps) {
    const StreamSample s = next();
    if (!filter.active()) {
      if (run.warmupSteps >= maxWarmup) throw NumericalError("recordTrajectory: basis never formed");
      filter.step(s.u, s.d);
      ++run.warmupSteps;
      continue;
    }
    BasisMatrix before = *filter.basis();
    const Vector h = before.lift(filter.hTilde());
    filter.step(s.u, s.d);
    const std::vector<Vector> regs(filter.regressors().begin(), filter.regressors().end());
    const std::vector<double> ds(filter.targets().begin(), filter.targets().end());
    ThetaInstance inst = makeThetaInstance(before, h, regs, ds, prm.q, prm.r, prm.rho, prm.weights);
    run.steps.push_back(ProbeStep{h, filter.fullCoefficients(), std::move(inst),
                                  PhiMap{std::move(before), *filter.basis()}, prm.lambda});
  }
  return run;
}

TheoremProbe runMonotoneExperiment(const MonotoneSetup& setup) {
  SysIdConfig cfg;
  cfg.n = setup.n;
  cfg.snrDb = setup.snrDb;
  cfg.seed = setup.seed;
  SysIdStream stream(cfg);
  KrrParams prm;
  prm.rank = setup.rank;
  prm.q = setup.q;
  prm.r = setup.r;
  prm.rho = setup.rho;
  prm.lambda = setup.lambda;
  prm.refreshPeriod = setup.refreshPeriod;
  KrrApsp filter(prm, setup.n);
  const ProbeRun run = recordTrajectory(filter, [&] { return stream.next(); }, setup.steps);
  return monotoneProbe(run.steps);
}

// ---------------------------------------------------------------------------

CgBoundReport cgBoundCheck(const SymMatrix& r, const Vector& p, const Vector& hStar, Index rank,
                           double sigmaD2) {
  CgBoundReport rep;
  const Matrix rd = r.dense();
  Eigen::SelfAdjointEigenSolver<Matrix> eig(rd, Eigen::EigenvaluesOnly);
  const double lmin = eig.eigenvalues().minCoeff();
  const double lmax = eig.eigenvalues().maxCoeff();
  if (!(lmin > 0.0)) throw NumericalError("cgBoundCheck: R is not positive definite");
  rep.kappa = lmax / lmin;
  rep.alpha = (std::sqrt(rep.kappa) - 1.0) / (std::sqrt(rep.kappa) + 1.0);

  const BasisMatrix s = buildKrylovBasis(r, p, rank);
  const Matrix& sc = s.columns();
  const Matrix gram = sc.transpose() * rd * sc;
  const Vector coef = gram.ldlt().solve(sc.transpose() * p);
  const Vector best = sc * coef;  // P^{(R)}_{K_D}(h*)

  const auto rn2 = [&](const Vector& x) { return x.dot(rd * x); };
  const double hr2 = rn2(hStar);
  rep.mse = rn2(best - hStar) - hr2 + sigmaD2;
  rep.bound = (4.0 * std::pow(rep.alpha, 2.0 * static_cast<double>(rank)) - 1.0) * hr2 + sigmaD2;

  const Vector euclid = projectSubspace(hStar, s);
  rep.chain[0] = (euclid - best).norm();
  rep.chain[1] = (hStar - best).norm();
  rep.chain[2] = std::sqrt(std::max(rn2(hStar - best), 0.0)) / std::sqrt(lmin);
  rep.chain[3] = 2.0 * std::sqrt(hr2) * std::pow(rep.alpha, static_cast<double>(rank)) / std::sqrt(lmin);

  const double scale = 1e-10 * (1.0 + std::abs(sigmaD2) + hr2 + hStar.squaredNorm() / lmin);
  rep.minSlack = rep.bound - rep.mse;
  for (int i = 0; i < 3; ++i) rep.minSlack = std::min(rep.minSlack, rep.chain[i + 1] - rep.chain[i]);
  rep.passed = rep.minSlack >= -scale;
  return rep;
}

SubgradientReport subgradientProjectionCheck(const Matrix& s, const Matrix& u, const Vector& d,
                                             double rho, const Vector& point, int samples, Rng& rng) {
  SubgradientReport rep;
  const Matrix ut = u.transpose() * s;  // Uᵀ S
  const auto g = [&](const Vector& x) { return (ut * x - d).squaredNorm() - rho; };
  const auto grad = [&](const Vector& x) { return Vector(2.0 * ut.transpose() * (ut * x - d)); };
  const Index dim = s.cols();
  for (int t = 0; t < samples; ++t) {
    const Vector x = point + randomVector(dim, rng);
    const Vector y = point + randomVector(dim, rng);
    const double gap = (x - y).dot(grad(y)) + g(y) - g(x);
    const double scale = 1.0 + std::abs(g(x)) + std::abs(g(y));
    rep.maxViolation = std::max(rep.maxViolation, gap / scale);
  }
  const double gp = g(point);
  const Vector sg = grad(point);
  if (gp > 0.0) {
    if (sg.squaredNorm() > 0.0) {
      const Vector t = point - (gp / sg.squaredNorm()) * sg;
      // T lands on the boundary of {x : ⟨x − point, g'⟩ + g ≤ 0}.
      rep.boundaryResidual = std::abs((t - point).dot(sg) + gp) / (1.0 + gp);
    }
  } else {
    rep.noOpAtFeasible = true;  // T(x) = x when g(x) ≤ 0
  }
  rep.passed = rep.maxViolation <= 1e-10 && rep.boundaryResidual <= 1e-10 && rep.noOpAtFeasible;
  return rep;
}

// ---------------------------------------------------------------------------

Matrix randomOrthonormal(Index n, Index cols, Rng& rng) {
  Matrix a(n, cols);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < cols; ++j) a(i, j) = rng.normal();
  }
  return orthonormalize(a);
}

Matrix randomSpd(Index n, Rng& rng, double shift) {
  Matrix a(n, n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) a(i, j) = rng.normal();
  }
  Matrix r = a.transpose() * a / static_cast<double>(n);
  r.diagonal().array() += shift;
  return r;
}

bool VerifyReport::allPassed() const {
  return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed; });
}

std::string VerifyReport::format() const {
  std::string out;
  for (const CheckResult& c : checks) {
    out += fmt::format("{:<34} {:<4} max-violation={:.3e} tolerance={:.1e}", c.name,
                       c.passed ? "PASS" : "FAIL", c.maxViolation, c.tolerance);
    if (!c.detail.empty()) out += "  " + c.detail;
    out += '\n';
  }
  return out;
}

namespace {

struct RandomApspInstance {
  BasisMatrix basis;
  Vector hTilde;
  std::vector<Vector> regressors;  // newest first, N-dimensional
  std::vector<double> targets;
  int q = 1;
  int r = 1;
  double rho = 0.0;
  double lambda = 1.0;
  std::vector<double> weights;
};

RandomApspInstance randomApspInstance(Rng& rng) {
  RandomApspInstance ins;
  const Index n = 2 + static_cast<Index>(rng.below(11));  // 2..12
  const Index d = 1 + static_cast<Index>(rng.below(static_cast<std::uint64_t>(std::min<Index>(4, n))));
  ins.q = 1 + static_cast<int>(rng.below(3));
  ins.r = 1 + static_cast<int>(rng.below(2));
  const Matrix r = randomSpd(n, rng);
  ins.basis = buildKrylovBasis(SymMatrix::fromUpper(r), randomVector(n, rng), d);
  ins.hTilde = randomVector(ins.basis.rank(), rng);
  const int cols = ins.q + ins.r - 1;
  for (int j = 0; j < cols; ++j) {
    ins.regressors.push_back(randomVector(n, rng));
    ins.targets.push_back(rng.normal());
  }
  ins.rho = rng.uniform() * 0.5;
  ins.lambda = 0.05 + 1.9 * rng.uniform();
  double sum = 0.0;
  for (int t = 0; t < ins.q; ++t) {
    ins.weights.push_back(0.1 + rng.uniform());
    sum += ins.weights.back();
  }
  for (double& w : ins.weights) w /= sum;
  return ins;
}

struct EquivalenceStats {
  double tableVsDirect = 0.0;
  double eq23VsTable = 0.0;
  double minRelaxation = kInf;
  int firing = 0;
};

EquivalenceStats runEquivalence(int instances, Rng& rng) {
  EquivalenceStats st;
  for (int i = 0; i < instances; ++i) {
    const RandomApspInstance ins = randomApspInstance(rng);
    std::vector<Vector> reduced;
    for (const Vector& u : ins.regressors) reduced.push_back(ins.basis.reduce(u));
    const ApspSettings settings{ins.q, ins.r, ins.rho, ins.lambda, std::span<const double>(ins.weights)};
    const ApspResult table = apspUpdate(ins.hTilde, reduced, ins.targets, settings);

    std::vector<Matrix> blocks;
    std::vector<Vector> dBlocks;
    for (int t = 0; t < ins.q; ++t) {
      Matrix u(ins.basis.rank(), ins.r);
      Vector dv(ins.r);
      for (int c = 0; c < ins.r; ++c) {
        u.col(c) = reduced[static_cast<std::size_t>(t + c)];
        dv(c) = ins.targets[static_cast<std::size_t>(t + c)];
      }
      blocks.push_back(u);
      dBlocks.push_back(dv);
    }
    const Vector direct = directReducedUpdate(ins.hTilde, blocks, dBlocks, ins.rho, ins.lambda, ins.weights);

    const Vector h = ins.basis.lift(ins.hTilde);
    const ThetaInstance inst = makeThetaInstance(ins.basis, h, ins.regressors, ins.targets, ins.q,
                                                 ins.r, ins.rho, ins.weights);
    const Vector full = rapsmStep(h, inst, PhiMap{ins.basis, ins.basis}, ins.lambda);
    const Vector viaEq23 = ins.basis.reduce(full);

    const double scale = std::max(1.0, table.hNext.norm());
    st.tableVsDirect = std::max(st.tableVsDirect, (table.hNext - direct).norm() / scale);
    st.eq23VsTable = std::max(st.eq23VsTable, (viaEq23 - table.hNext).norm() / scale);
    if (table.moved) {
      ++st.firing;
      st.minRelaxation = std::min(st.minRelaxation, table.relaxation);
    }
  }
  return st;
}

/// Pairs (S_k, S_{k+1}) mixing identical, perturbed-data and unrelated bases.
std::vector<PhiMap> randomBasisPairs(int count, Rng& rng) {
  std::vector<PhiMap> pairs;
  for (int i = 0; i < count; ++i) {
    const Index n = 3 + static_cast<Index>(rng.below(10));
    const Index d = 1 + static_cast<Index>(rng.below(static_cast<std::uint64_t>(std::min<Index>(4, n - 1))));
    const Matrix r = randomSpd(n, rng);
    const Vector p = randomVector(n, rng);
    const BasisMatrix a = buildKrylovBasis(SymMatrix::fromUpper(r), p, d);
    switch (i % 4) {
      case 0:
        pairs.push_back({a, a});
        break;
      case 1: {
        Matrix r2 = r;
        r2 += 0.01 * randomSpd(n, rng, 0.0);
        pairs.push_back({a, buildKrylovBasis(SymMatrix::fromUpper(r2), p, d)});
        break;
      }
      case 2: {
        // Share the first column, rotate the rest.
        Matrix cols = a.columns();
        if (cols.cols() > 1) {
          Matrix rest = randomOrthonormal(n, n, rng);
          Matrix m(n, cols.cols());
          m.col(0) = cols.col(0);
          for (Index j = 1; j < cols.cols(); ++j) m.col(j) = rest.col(j);
          cols = orthonormalize(m);
          if (cols.col(0).dot(a.columns().col(0)) < 0) cols.col(0) *= -1.0;
        }
        pairs.push_back({a, BasisMatrix(cols, d)});
        break;
      }
      default:
        pairs.push_back({a, buildKrylovBasis(SymMatrix::fromUpper(randomSpd(n, rng)), randomVector(n, rng), d)});
        break;
    }
  }
  return pairs;
}

}  // namespace

VerifyReport runVerificationSuite(const VerifyOptions& options) {
  VerifyReport rep;

  // Orthonormality of Krylov bases from both random SPD and streamed estimates.
  if (options.enabled(VerifyGroup::Orthonormality)) {
    Rng rng(deriveSeed(options.seed, 0, 7));
    double worst = 0.0;
    for (int i = 0; i < 50; ++i) {
      const Index n = 2 + static_cast<Index>(rng.below(30));
      const Index d = 1 + static_cast<Index>(rng.below(static_cast<std::uint64_t>(std::min<Index>(8, n))));
      const BasisMatrix s = buildKrylovBasis(SymMatrix::fromUpper(randomSpd(n, rng)), randomVector(n, rng), d);
      worst = std::max(worst, orthonormalityError(s.columns()));
    }
    SysIdConfig cfg;
    cfg.seed = options.seed;
    SysIdStream stream(cfg);
    StatEstimates est(EstimateMode::Toeplitz, cfg.n, 0.999);
    for (int k = 0; k < 400; ++k) {
      const StreamSample s = stream.next();
      est.update(s.u, s.d);
      if (k >= 60 && k % 20 == 0) {
        const BasisMatrix b = buildKrylovBasis(est.snapshotR(), est.snapshotP(), 8);
        worst = std::max(worst, orthonormalityError(b.columns()));
      }
    }
    rep.checks.push_back({"basis-orthonormality", worst <= tol::kOrthonormality, worst, tol::kOrthonormality, ""});
  }

  // Table form vs direct projections vs the full-space step.
  if (options.enabled(VerifyGroup::Equivalence)) {
    Rng rng(deriveSeed(options.seed, 1, 7));
    const EquivalenceStats st = runEquivalence(options.equivalenceInstances, rng);
    rep.checks.push_back({"table-vs-direct-projection", st.tableVsDirect <= 1e-11, st.tableVsDirect, 1e-11,
                          fmt::format("instances={}", options.equivalenceInstances)});
    rep.checks.push_back({"full-space-vs-table", st.eq23VsTable <= 1e-11, st.eq23VsTable, 1e-11, ""});
    const double mViol = st.firing == 0 ? 0.0 : std::max(0.0, 1.0 - st.minRelaxation);
    rep.checks.push_back({"relaxation-at-least-one", mViol <= 1e-12, mViol, 1e-12,
                          fmt::format("firing={} min-M={:.6g}", st.firing, st.minRelaxation)});
  }

  // Φ_k structure.
  if (options.enabled(VerifyGroup::Phi)) {
    Rng rng(deriveSeed(options.seed, 2, 7));
    const std::vector<PhiMap> pairs = randomBasisPairs(options.basisPairs, rng);
    double nonexp = 0.0;
    double zero = 0.0;
    double inRanges = 0.0;
    double characterization = 0.0;
    double sameProj = 0.0;
    double attract = 0.0;
    int witnesses = 0;
    int differing = 0;
    bool attractOk = true;
    for (const PhiMap& phi : pairs) {
      const Index n = phi.sPrev.ambientDim();
      for (int t = 0; t < 10; ++t) {
        const Vector x = randomVector(n, rng);
        nonexp = std::max(nonexp, (applyPhi(phi, x).norm() - x.norm()) / x.norm());
      }
      zero = std::max(zero, applyPhi(phi, Vector::Zero(n)).norm());
      const FixedPointSpace fix = fixedPointSet(phi);
      characterization = std::max(characterization, fix.maxResidual);
      for (Index c = 0; c < fix.dim(); ++c) {
        const Vector v = fix.full.col(c);
        inRanges = std::max({inRanges, (v - projectSubspace(v, phi.sPrev)).norm(),
                             (v - projectSubspace(v, phi.sNext)).norm()});
      }
      if (sameBasis(phi, tol::kFixedPointEig)) {
        for (int t = 0; t < 5; ++t) {
          const Vector x = randomVector(n, rng);
          sameProj = std::max(sameProj, (applyPhi(phi, x) - projectSubspace(x, phi.sPrev)).norm());
        }
        if (fix.dim() != phi.sPrev.rank()) sameProj = std::max(sameProj, 1.0);
      } else {
        ++differing;
      }
      const AttractingReport ar = attractingCheck(phi, 10, rng);
      attract = std::max(attract, ar.maxViolation);
      attractOk = attractOk && ar.passed;
      if (!ar.sameBasis && ar.passed) ++witnesses;
    }
    rep.checks.push_back({"phi-nonexpansive", nonexp <= 1e-12, std::max(nonexp, 0.0), 1e-12, ""});
    rep.checks.push_back({"phi-zero-fixed", zero == 0.0, zero, 0.0, ""});
    rep.checks.push_back({"fix-in-both-ranges", inRanges <= tol::kFixedPointEig, inRanges, tol::kFixedPointEig, ""});
    rep.checks.push_back({"fix-characterization", characterization <= tol::kFixedPointEig, characterization,
                          tol::kFixedPointEig, ""});
    rep.checks.push_back({"phi-same-basis-projection", sameProj <= 1e-12, sameProj, 1e-12, ""});
    rep.checks.push_back({"phi-attracting-structure", attractOk && witnesses == differing, attract, 1e-9,
                          fmt::format("witnesses={}/{}", witnesses, differing)});
  }

  // Monotone approximation along a filter trajectory.
  if (options.enabled(VerifyGroup::Monotone)) {
    MonotoneSetup setup;
    setup.seed = options.seed;
    setup.steps = options.monotoneSteps;
    const TheoremProbe probe = runMonotoneExperiment(setup);
    const double frac = probe.certifiedFraction();
    rep.checks.push_back({"monotone-approximation", probe.violations == 0 && frac >= 0.9,
                          std::max(probe.maxIncrease, 0.0), tol::kMonotone,
                          fmt::format("certified={}/{} strict={}/{}", probe.certified, probe.steps,
                                      probe.strictDecreases, probe.strictEligible)});
  }

  // CG bound and the Euclidean identifiability chain.
  if (options.enabled(VerifyGroup::CgBound)) {
    Rng rng(deriveSeed(options.seed, 4, 7));
    double worst = 0.0;
    for (int i = 0; i < options.cgInstances; ++i) {
      const Index n = 1 + static_cast<Index>(rng.below(10));
      const Matrix r = randomSpd(n, rng);
      const Vector hs = randomVector(n, rng);
      const SymMatrix rs = SymMatrix::fromUpper(r);
      const double noise = 0.1 * rng.uniform();
      for (Index d = 1; d <= n; ++d) {
        const CgBoundReport cg = cgBoundCheck(rs, rs.apply(hs), hs, d, hs.dot(r * hs) + noise);
        if (!cg.passed) worst = std::max(worst, -cg.minSlack);
      }
    }
    rep.checks.push_back({"cg-bound-and-identifiability", worst == 0.0, worst, 0.0,
                          fmt::format("instances={}", options.cgInstances)});
  }

  // Subgradient inequality and projection of g.
  if (options.enabled(VerifyGroup::Subgradient)) {
    Rng rng(deriveSeed(options.seed, 5, 7));
    double worst = 0.0;
    bool ok = true;
    for (int i = 0; i < 30; ++i) {
      const Index n = 2 + static_cast<Index>(rng.below(10));
      const Index d = 1 + static_cast<Index>(rng.below(static_cast<std::uint64_t>(n)));
      const Index r = 1 + static_cast<Index>(rng.below(3));
      const Matrix s = randomOrthonormal(n, d, rng);
      Matrix u(n, r);
      for (Index a = 0; a < n; ++a) {
        for (Index b = 0; b < r; ++b) u(a, b) = rng.normal();
      }
      const SubgradientReport sr = subgradientProjectionCheck(s, u, randomVector(r, rng), rng.uniform(),
                                                              randomVector(d, rng), 20, rng);
      worst = std::max({worst, sr.maxViolation, sr.boundaryResidual});
      ok = ok && sr.passed;
    }
    rep.checks.push_back({"subgradient-projection", ok, worst, 1e-10, ""});
  }

  // NLMS as the q = 1, r = 1, ρ = 0 reduction.
  if (options.enabled(VerifyGroup::NlmsReduction)) {
    SysIdConfig cfg;
    cfg.n = 10;
    cfg.seed = options.seed;
    SysIdStream stream(cfg);
    KrrParams prm;
    prm.rank = 4;
    prm.refreshPeriod = 1000000;
    prm.lambda = 0.6;
    KrrApsp filter(prm, cfg.n);
    double worst = 0.0;
    for (int k = 0; k < 600; ++k) {
      const StreamSample s = stream.next();
      if (!filter.active()) {
        filter.step(s.u, s.d);
        continue;
      }
      const Vector ht = filter.hTilde();
      const Vector ut = filter.basis()->reduce(s.u);
      const double err = s.d - ht.dot(ut);
      const Vector expected = ut.squaredNorm() > 0.0 ? Vector(ht + (prm.lambda / 2.0) * err * ut / ut.squaredNorm()) : ht;
      filter.step(s.u, s.d);
      worst = std::max(worst, (filter.hTilde() - expected).norm());
    }
    rep.checks.push_back({"nlms-reduction", worst <= 1e-12, worst, 1e-12, ""});
  }

  // Asymptotic optimality diagnostic: static, noiseless, consistent, S frozen.
  if (options.enabled(VerifyGroup::Asymptotic)) {
    SysIdConfig cfg;
    cfg.n = 8;
    cfg.noiseless = true;
    cfg.seed = options.seed;
    SysIdStream stream(cfg);
    KrrParams prm;
    prm.rank = 8;
    prm.q = 3;
    prm.lambda = 1.0;
    prm.refreshPeriod = 1000000000;
    prm.mode = EstimateMode::FullSymmetric;
    KrrApsp filter(prm, cfg.n);
    const ProbeRun run = recordTrajectory(filter, [&] { return stream.next(); }, 3000);
    std::vector<double> theta;
    for (const ProbeStep& st : run.steps) theta.push_back(thetaValue(st.inst, st.h));
    const double initial = *std::max_element(theta.begin(), theta.begin() + 10);
    const auto tail = theta.begin() + static_cast<std::ptrdiff_t>(theta.size() * 9 / 10);
    const double tailMin = *std::min_element(tail, theta.end());
    const double ratio = initial > 0.0 ? tailMin / initial : 0.0;
    double maxNorm = 0.0;
    for (const ProbeStep& st : run.steps) maxNorm = std::max(maxNorm, st.h.norm());
    rep.checks.push_back({"asymptotic-optimality-diagnostic", ratio <= 1e-6, ratio, 1e-6,
                          fmt::format("max|h|={:.4g}", maxNorm)});
  }
  return rep;
}

}  // namespace rrapsp
