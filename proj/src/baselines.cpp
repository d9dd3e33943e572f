#include <string>
#include <utility>

#include <fmt/format.h>

#include "rrapsp/error.hpp"
#include "rrapsp/filters.hpp"

namespace rrapsp {

Nlms::Nlms(Index n, double stepSize, Vector h0) : mu_(stepSize) {
  if (n < 1) throw ConfigError("NLMS: filter length must be positive");
  h_ = h0.size() == 0 ? Vector::Zero(n) : std::move(h0);
  if (h_.size() != n) throw ConfigError("NLMS: initial vector has the wrong length");
}

std::string Nlms::name() const { return fmt::format("nlms(lambda={})", mu_); }

StepOutput Nlms::step(const Vector& u, double d) {
  if (u.size() != h_.size()) throw DimensionError("NLMS: regressor length mismatch");
  const auto un = static_cast<std::uint64_t>(h_.size());
  StepOutput out;
  out.y = h_.dot(u);
  const double energy = u.squaredNorm();
  const double err = d - out.y;
  out.breakdown.update = 2 * un;
  if (energy > 0.0) {
    const double gain = (mu_ * err) / energy;
    h_ += gain * u;
    out.breakdown.update += un + 2;
  }
  out.updated = err != 0.0 && energy > 0.0;
  out.hFull = h_;
  out.mults = out.breakdown.total();
  return out;
}

Rls::Rls(Index n, double forgetting, double delta, Vector h0) : lambda_(forgetting), delta_(delta) {
  if (n < 1) throw ConfigError("RLS: filter length must be positive");
  if (!(forgetting > 0.0 && forgetting <= 1.0)) throw ConfigError("RLS: forgetting factor must lie in (0, 1]");
  if (!(delta > 0.0)) throw ConfigError("RLS: regularization delta must be positive");
  h_ = h0.size() == 0 ? Vector::Zero(n) : std::move(h0);
  if (h_.size() != n) throw ConfigError("RLS: initial vector has the wrong length");
  p_ = Matrix::Identity(n, n) / delta;
}

std::string Rls::name() const { return fmt::format("rls(gamma={},delta={})", lambda_, delta_); }

StepOutput Rls::step(const Vector& u, double d) {
  if (u.size() != h_.size()) throw DimensionError("RLS: regressor length mismatch");
  const auto un = static_cast<std::uint64_t>(h_.size());
  StepOutput out;
  const Vector pi = p_ * u;
  const double denom = lambda_ + u.dot(pi);
  const Vector gain = pi / denom;
  out.y = h_.dot(u);
  const double xi = d - out.y;
  h_ += gain * xi;
  p_ = (p_ - gain * pi.transpose()) / lambda_;
  p_ = 0.5 * (p_ + p_.transpose()).eval();
  // P u, k πᵀ, λ⁻¹ scaling and symmetrization: 4N²; uᵀπ, π/denom, hᵀu, k ξ: 4N
  out.breakdown.update = 4 * un * un + 4 * un + 1;
  out.updated = true;
  out.hFull = h_;
  out.mults = out.breakdown.total();
  return out;
}

}  // namespace rrapsp
