#include "rrapsp/scenarios.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <utility>

#include <fmt/format.h>

#include "rrapsp/error.hpp"

namespace rrapsp {

namespace {

constexpr std::uint64_t kSystemStream = 0;
constexpr std::uint64_t kInputStream = 1;
constexpr std::uint64_t kNoiseStream = 2;
constexpr std::uint64_t kBitStream = 3;
constexpr std::uint64_t kCodeStream = 4;

Vector unitGaussian(Rng& rng, Index n) {
  Vector v(n);
  for (Index i = 0; i < n; ++i) v(i) = rng.normal();
  const double norm = v.norm();
  return norm > 0.0 ? Vector(v / norm) : v;
}

std::vector<int> mSequence(unsigned taps) {
  // Fibonacci LFSR over GF(2) of degree 5: a_{n+5} = Σ c_i a_{n+i}.
  std::vector<int> bits{0, 0, 0, 0, 1};
  bits.reserve(31 + 5);
  while (bits.size() < 31 + 5) {
    const std::size_t n = bits.size() - 5;
    int next = 0;
    for (unsigned i = 0; i < 5; ++i) {
      if ((taps >> i) & 1U) next ^= bits[n + i];
    }
    bits.push_back(next);
  }
  bits.resize(31);
  return bits;
}

std::vector<int> toBipolar(const std::vector<int>& bits) {
  std::vector<int> out(bits.size());
  std::transform(bits.begin(), bits.end(), out.begin(), [](int b) { return b == 0 ? 1 : -1; });
  return out;
}

Vector mmseReceiver(const Matrix& sig, const Vector& amp, double noiseVar) {
  const Index n = sig.rows();
  Matrix r = noiseVar * Matrix::Identity(n, n);
  for (Index j = 0; j < sig.cols(); ++j) r += amp(j) * amp(j) * sig.col(j) * sig.col(j).transpose();
  const Vector p = amp(0) * sig.col(0);
  return r.completeOrthogonalDecomposition().solve(p);
}

}  // namespace

// ---------------------------------------------------------------------------

std::string SysIdConfig::describe() const {
  return fmt::format("scenario=sysid N={} snr_db={} noiseless={} change_at={} fir_length={} "
                     "fir_normalization={}",
                     n, snrDb, noiseless ? 1 : 0, changeAt ? std::to_string(*changeAt) : "none",
                     firLength, unitEnergyFir ? "unit_energy" : "raw");
}

SysIdStream::SysIdStream(SysIdConfig config)
    : inputRng_(deriveSeed(config.seed, config.trial, kInputStream)),
      noiseRng_(deriveSeed(config.seed, config.trial, kNoiseStream)) {
  if (config.n < 1) throw ConfigError("sysid: N must be >= 1");
  if (config.firLength < 1) throw ConfigError("sysid: FIR length must be >= 1");
  if (!config.noiseless && !std::isfinite(config.snrDb)) throw ConfigError("sysid: SNR must be finite");
  scenario_.config = config;
  Rng sys(deriveSeed(config.seed, config.trial, kSystemStream));
  scenario_.hStar = unitGaussian(sys, config.n);
  scenario_.coloringFir = unitGaussian(sys, config.firLength);
  if (!config.unitEnergyFir) scenario_.coloringFir *= std::sqrt(static_cast<double>(config.firLength));
  scenario_.hStarPost = unitGaussian(sys, config.n);

  whiteHistory_.assign(static_cast<std::size_t>(config.firLength), 0.0);
  delayLine_ = Vector::Zero(config.n);
  // Fill the FIR state and the tap-delay line, then calibrate over 10·N samples.
  const Index fill = config.n + config.firLength;
  for (Index i = 0; i < fill; ++i) nextColored();
  const Index calib = 10 * config.n;
  double zz = 0.0;
  double xx = 0.0;
  for (Index i = 0; i < calib; ++i) {
    const double x = nextColored();
    const double z = delayLine_.dot(scenario_.hStar);
    zz += z * z;
    xx += x * x;
  }
  scenario_.signalPower = zz / static_cast<double>(calib);
  inputPower_ = xx / static_cast<double>(calib);
  scenario_.noiseVariance =
      config.noiseless ? 0.0 : scenario_.signalPower / std::pow(10.0, config.snrDb / 10.0);
}

double SysIdStream::nextColored() {
  std::rotate(whiteHistory_.rbegin(), whiteHistory_.rbegin() + 1, whiteHistory_.rend());
  whiteHistory_[0] = inputRng_.normal();
  double x = 0.0;
  for (std::size_t i = 0; i < whiteHistory_.size(); ++i) x += scenario_.coloringFir(static_cast<Index>(i)) * whiteHistory_[i];
  const Index n = delayLine_.size();
  for (Index i = n - 1; i > 0; --i) delayLine_(i) = delayLine_(i - 1);
  delayLine_(0) = x;
  return x;
}

StreamSample SysIdStream::next() {
  nextColored();
  StreamSample s;
  s.k = k_;
  s.u = delayLine_;
  const bool post = scenario_.config.changeAt && k_ >= *scenario_.config.changeAt;
  s.truthH = post ? scenario_.hStarPost : scenario_.hStar;
  const double noise = scenario_.config.noiseless ? 0.0 : std::sqrt(scenario_.noiseVariance) * noiseRng_.normal();
  s.d = s.u.dot(s.truthH) + noise;
  ++k_;
  return s;
}

// ---------------------------------------------------------------------------

std::vector<std::vector<int>> goldFamily() {
  // Tap masks: bit i set when a_{n+i} enters the recurrence.
  // x⁵+x²+1        → a_{n+5} = a_{n+2} ⊕ a_n
  // x⁵+x⁴+x³+x²+1  → a_{n+5} = a_{n+4} ⊕ a_{n+3} ⊕ a_{n+2} ⊕ a_n
  const std::vector<int> m1 = mSequence(0b00101);
  const std::vector<int> m2 = mSequence(0b11101);
  std::vector<std::vector<int>> family;
  family.reserve(33);
  family.push_back(toBipolar(m1));
  family.push_back(toBipolar(m2));
  for (std::size_t shift = 0; shift < 31; ++shift) {
    std::vector<int> g(31);
    for (std::size_t i = 0; i < 31; ++i) g[i] = m1[i] ^ m2[(i + shift) % 31];
    family.push_back(toBipolar(g));
  }
  return family;
}

int periodicCorrelation(const std::vector<int>& a, const std::vector<int>& b, int lag) {
  if (a.size() != b.size()) throw DimensionError("periodicCorrelation: length mismatch");
  const auto len = static_cast<int>(a.size());
  int acc = 0;
  for (int i = 0; i < len; ++i) acc += a[static_cast<std::size_t>(i)] * b[static_cast<std::size_t>(((i + lag) % len + len) % len)];
  return acc;
}

std::string CdmaConfig::describe() const {
  return fmt::format("scenario=cdma N=31 users={} snr_db={} noiseless={} interferer_amplitude={} "
                     "change_at={} users_post={} asynchrony=random_cyclic_shift gold_pair=45,75",
                     users, snrDb, noiseless ? 1 : 0, interfererAmplitude,
                     changeAt ? std::to_string(*changeAt) : "none", usersPost);
}

CdmaStream::CdmaStream(CdmaConfig config)
    : bitRng_(deriveSeed(config.seed, config.trial, kBitStream)),
      noiseRng_(deriveSeed(config.seed, config.trial, kNoiseStream)) {
  const auto family = goldFamily();
  const int familySize = static_cast<int>(family.size());
  const int needed = config.users + (config.changeAt ? std::max(config.usersPost - 1, 0) : 0);
  if (config.users < 1 || config.usersPost < 1) throw ConfigError("cdma: user counts must be >= 1");
  if (needed > familySize) {
    throw ConfigError(fmt::format("cdma: {} distinct codes requested, Gold family has {}", needed,
                                  familySize));
  }
  if (!config.noiseless && !std::isfinite(config.snrDb)) throw ConfigError("cdma: SNR must be finite");
  scenario_.config = config;

  Rng codes(deriveSeed(config.seed, config.trial, kCodeStream));
  std::vector<int> order(static_cast<std::size_t>(familySize));
  std::iota(order.begin(), order.end(), 0);
  for (int i = familySize - 1; i > 0; --i) {
    const auto j = static_cast<int>(codes.below(static_cast<std::uint64_t>(i + 1)));
    std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
  }
  const Index n = CdmaScenario::kChips;
  const double chipScale = 1.0 / std::sqrt(static_cast<double>(n));
  auto signature = [&](int code, int shift) {
    Vector s(n);
    const auto& seq = family[static_cast<std::size_t>(code)];
    for (Index i = 0; i < n; ++i) s(i) = chipScale * seq[static_cast<std::size_t>((i + shift) % n)];
    return s;
  };

  std::size_t next = 0;
  scenario_.signatures.resize(n, config.users);
  scenario_.amplitudes.resize(config.users);
  for (int j = 0; j < config.users; ++j) {
    const int shift = j == 0 ? 0 : static_cast<int>(codes.below(static_cast<std::uint64_t>(n)));
    scenario_.signatures.col(j) = signature(order[next++], shift);
    scenario_.amplitudes(j) = j == 0 ? 1.0 : config.interfererAmplitude;
  }
  if (config.changeAt) {
    scenario_.signaturesPost.resize(n, config.usersPost);
    scenario_.amplitudesPost.resize(config.usersPost);
    scenario_.signaturesPost.col(0) = scenario_.signatures.col(0);
    scenario_.amplitudesPost(0) = 1.0;
    for (int j = 1; j < config.usersPost; ++j) {
      const int shift = static_cast<int>(codes.below(static_cast<std::uint64_t>(n)));
      scenario_.signaturesPost.col(j) = signature(order[next++], shift);
      scenario_.amplitudesPost(j) = config.interfererAmplitude;
    }
  } else {
    scenario_.signaturesPost = scenario_.signatures;
    scenario_.amplitudesPost = scenario_.amplitudes;
  }
  scenario_.noiseVariance = config.noiseless ? 0.0 : 1.0 / std::pow(10.0, config.snrDb / 10.0);
  scenario_.mmse = mmseReceiver(scenario_.signatures, scenario_.amplitudes, scenario_.noiseVariance);
  scenario_.mmsePost =
      mmseReceiver(scenario_.signaturesPost, scenario_.amplitudesPost, scenario_.noiseVariance);
}

Vector CdmaStream::desiredSignature() const { return scenario_.signatures.col(0); }

StreamSample CdmaStream::next() {
  const bool post = scenario_.config.changeAt && k_ >= *scenario_.config.changeAt;
  const Matrix& sig = post ? scenario_.signaturesPost : scenario_.signatures;
  const Vector& amp = post ? scenario_.amplitudesPost : scenario_.amplitudes;
  StreamSample s;
  s.k = k_;
  s.u = Vector::Zero(CdmaScenario::kChips);
  for (Index j = 0; j < sig.cols(); ++j) {
    const int bit = bitRng_.sign();
    if (j == 0) s.truthBit = bit;
    s.u += (amp(j) * bit) * sig.col(j);
  }
  if (!scenario_.config.noiseless) {
    const double sigma = std::sqrt(scenario_.noiseVariance);
    for (Index i = 0; i < s.u.size(); ++i) s.u(i) += sigma * noiseRng_.normal();
  }
  s.d = static_cast<double>(s.truthBit);
  s.truthH = post ? scenario_.mmsePost : scenario_.mmse;
  ++k_;
  return s;
}

}  // namespace rrapsp
