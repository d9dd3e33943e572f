#include "rrapsp/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>
#include <utility>

#include <fmt/format.h>

#include "rrapsp/error.hpp"
#include "rrapsp/scenarios.hpp"

namespace rrapsp {

std::string kindName(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::SysId: return "sysid";
    case ExperimentKind::Cdma: return "cdma";
    case ExperimentKind::Verify: return "verify";
  }
  return "?";
}

FilterKind parseFilterKind(const std::string& s) {
  if (s == "krr" || s == "krr-apsp") return FilterKind::Krr;
  if (s == "cgrrf") return FilterKind::Cgrrf;
  if (s == "nlms") return FilterKind::Nlms;
  if (s == "rls") return FilterKind::Rls;
  throw ConfigError("unknown filter '" + s + "' (expected krr, cgrrf, nlms or rls)");
}

ExperimentConfig ExperimentConfig::sysidDefaults() { return ExperimentConfig{}; }

ExperimentConfig ExperimentConfig::cdmaDefaults() {
  ExperimentConfig c;
  c.kind = ExperimentKind::Cdma;
  c.n = CdmaScenario::kChips;
  c.ranks = {5};
  c.qs = {5};
  c.rho = 0.01;
  c.lambda = 0.02;
  c.snrDb = 15.0;
  return c;
}

void ExperimentConfig::validate() const {
  if (kind == ExperimentKind::Verify) return;
  if (runs < 1) throw ConfigError("runs must be >= 1");
  if (iters < 1) throw ConfigError("iters must be >= 1");
  if (filters.empty()) throw ConfigError("at least one filter is required");
  if (ranks.empty() || qs.empty()) throw ConfigError("at least one D and one q are required");
  if (!std::isfinite(snrDb)) throw ConfigError("snr-db must be finite");
  if (changeAt && *changeAt < 0) throw ConfigError("change-at must be >= 0");
  if (kind == ExperimentKind::Cdma) {
    if (n != CdmaScenario::kChips) throw ConfigError("CDMA filter length is fixed at 31");
    if (users < 1 || users > 33) throw ConfigError("users must lie in [1, 33]");
    if (usersPost < 1 || usersPost > 33) throw ConfigError("users-post must lie in [1, 33]");
    if (users + usersPost - 1 > 33) throw ConfigError("not enough Gold codes for the user change");
  } else if (n < 1) {
    throw ConfigError("N must be >= 1");
  }
  // Surface filter/scenario incompatibilities (e.g. D > N) before any trial.
  const std::optional<Vector> init =
      kind == ExperimentKind::Cdma ? std::optional<Vector>(Vector::Ones(n) / std::sqrt(double(n))) : std::nullopt;
  for (const FilterSpec& spec : expandFilters()) (void)makeFilter(*this, spec, init);
}

std::vector<FilterSpec> ExperimentConfig::expandFilters() const {
  std::vector<FilterSpec> out;
  for (FilterKind f : filters) {
    switch (f) {
      case FilterKind::Krr:
        for (Index d : ranks) {
          for (int q : qs) out.push_back({f, d, q, fmt::format("krr-apsp:D={}:q={}", d, q)});
        }
        break;
      case FilterKind::Cgrrf:
        for (Index d : ranks) out.push_back({f, d, 1, fmt::format("cgrrf:D={}", d)});
        break;
      case FilterKind::Nlms:
        out.push_back({f, n, 1, fmt::format("nlms:mu={}", lambda)});
        break;
      case FilterKind::Rls:
        out.push_back({f, n, 1, fmt::format("rls:gamma={}", gamma)});
        break;
    }
  }
  return out;
}

std::vector<std::string> ExperimentConfig::describe() const {
  std::vector<std::string> lines;
  lines.push_back(fmt::format("library=rrapsp version={}", kLibraryVersion));
  lines.push_back(fmt::format("subcommand={}", kindName(kind)));
  std::string fl;
  for (const FilterSpec& s : expandFilters()) fl += (fl.empty() ? "" : ";") + s.label;
  lines.push_back("filters=" + fl);
  lines.push_back(fmt::format("N={} r={} rho={} m={} lambda={} gamma={}", n, r, rho, m, lambda, gamma));
  lines.push_back(fmt::format("snr_db={} runs={} iters={} seed={} change_at={}", snrDb, runs, iters, seed,
                              changeAt ? std::to_string(*changeAt) : std::string("none")));
  if (kind == ExperimentKind::Cdma) {
    lines.push_back(fmt::format("users={} users_post={} interferer_amplitude={} code_asynchrony=random-cyclic-shift "
                                "gold_pair=45,75 estimates=full-symmetric init=desired-signature",
                                users, usersPost, interfererAmplitude));
  } else {
    lines.push_back("fir_length=30 fir_taps=raw-gaussian estimates=toeplitz init=zero");
  }
  lines.push_back("mse=a-priori (d_k - y_k)^2 ensemble mean; mismatch uses coefficients in force at k");
  return lines;
}

std::unique_ptr<AdaptiveFilter> makeFilter(const ExperimentConfig& cfg, const FilterSpec& spec,
                                           const std::optional<Vector>& init) {
  const EstimateMode mode = cfg.kind == ExperimentKind::Cdma ? EstimateMode::FullSymmetric : EstimateMode::Toeplitz;
  switch (spec.kind) {
    case FilterKind::Krr: {
      KrrParams p;
      p.rank = spec.rank;
      p.q = spec.q;
      p.r = cfg.r;
      p.rho = cfg.rho;
      p.refreshPeriod = cfg.m;
      p.lambda = cfg.lambda;
      p.gamma = cfg.gamma;
      p.mode = mode;
      if (init) return std::make_unique<KrrApsp>(p, cfg.n, InitMode::Vector, init);
      return std::make_unique<KrrApsp>(p, cfg.n);
    }
    case FilterKind::Cgrrf: {
      CgrrfParams p;
      p.rank = spec.rank;
      p.refreshPeriod = cfg.m;
      p.gamma = cfg.gamma;
      p.mode = mode;
      return std::make_unique<Cgrrf>(p, cfg.n, init);
    }
    case FilterKind::Nlms:
      if (!(cfg.lambda > 0.0 && cfg.lambda < 2.0)) throw ConfigError("NLMS step size must lie in (0, 2)");
      return std::make_unique<Nlms>(cfg.n, cfg.lambda, init.value_or(Vector()));
    case FilterKind::Rls:
      return std::make_unique<Rls>(cfg.n, cfg.gamma, 1e-2, init.value_or(Vector()));
  }
  throw ConfigError("unknown filter kind");
}

namespace {

/// Per-filter, per-iteration traces of one trial.
struct TrialTrace {
  std::vector<std::vector<double>> err2;
  std::vector<std::vector<double>> mismatch;
  std::vector<std::vector<std::uint8_t>> updated;
  std::vector<std::vector<double>> mults;
};

class SampleSource {
 public:
  SampleSource(const ExperimentConfig& cfg, std::uint64_t trial) {
    if (cfg.kind == ExperimentKind::Cdma) {
      CdmaConfig c;
      c.users = cfg.users;
      c.usersPost = cfg.usersPost;
      c.snrDb = cfg.snrDb;
      c.interfererAmplitude = cfg.interfererAmplitude;
      c.changeAt = cfg.changeAt;
      c.seed = cfg.seed;
      c.trial = trial;
      cdma_.emplace(c);
    } else {
      SysIdConfig c;
      c.n = cfg.n;
      c.snrDb = cfg.snrDb;
      c.changeAt = cfg.changeAt;
      c.seed = cfg.seed;
      c.trial = trial;
      sysid_.emplace(c);
    }
  }
  StreamSample next() { return cdma_ ? cdma_->next() : sysid_->next(); }
  std::optional<Vector> init() const {
    if (cdma_) return cdma_->desiredSignature();
    return std::nullopt;
  }

 private:
  std::optional<SysIdStream> sysid_;
  std::optional<CdmaStream> cdma_;
};

TrialTrace runTrial(const ExperimentConfig& cfg, const std::vector<FilterSpec>& specs, std::uint64_t trial) {
  const std::size_t nf = specs.size();
  const auto iters = static_cast<std::size_t>(cfg.iters);
  TrialTrace tr;
  tr.err2.assign(nf, std::vector<double>(iters));
  tr.mismatch.assign(nf, std::vector<double>(iters));
  tr.updated.assign(nf, std::vector<std::uint8_t>(iters));
  tr.mults.assign(nf, std::vector<double>(iters));

  SampleSource src(cfg, trial);
  const std::optional<Vector> init = src.init();
  std::vector<std::unique_ptr<AdaptiveFilter>> filters;
  std::vector<Vector> current;
  for (const FilterSpec& s : specs) {
    filters.push_back(makeFilter(cfg, s, init));
    current.push_back(filters.back()->fullCoefficients());
  }
  for (std::size_t k = 0; k < iters; ++k) {
    const StreamSample smp = src.next();
    const double truthEnergy = smp.truthH.squaredNorm();
    for (std::size_t f = 0; f < nf; ++f) {
      const double mis = (smp.truthH - current[f]).squaredNorm();
      tr.mismatch[f][k] = truthEnergy > 0.0 ? mis / truthEnergy : mis;
      StepOutput out = filters[f]->step(smp.u, smp.d);
      const double e = smp.d - out.y;
      tr.err2[f][k] = e * e;
      tr.updated[f][k] = out.updated ? 1 : 0;
      tr.mults[f][k] = static_cast<double>(out.mults);
      current[f] = std::move(out.hFull);
    }
  }
  return tr;
}

double toDb(double x) { return 10.0 * std::log10(std::max(x, 1e-300)); }

}  // namespace

ExperimentResult runExperiment(const ExperimentConfig& config) {
  if (config.kind == ExperimentKind::Verify) throw ConfigError("runExperiment: use the verify suite");
  config.validate();
  ExperimentResult res;
  res.config = config;
  res.filters = config.expandFilters();
  const std::size_t nf = res.filters.size();
  const auto runs = static_cast<std::size_t>(config.runs);
  const auto iters = static_cast<std::size_t>(config.iters);

  std::vector<std::optional<TrialTrace>> traces(runs);
  unsigned threads = config.threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : config.threads;
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, runs));
  std::atomic<std::size_t> nextTrial{0};
  std::vector<std::exception_ptr> errors(threads);
  const auto worker = [&](unsigned id) {
    try {
      for (std::size_t t = nextTrial++; t < runs; t = nextTrial++) {
        traces[t] = runTrial(config, res.filters, t);
      }
    } catch (...) {
      errors[id] = std::current_exception();
      nextTrial = runs;
    }
  };
  if (threads <= 1) {
    worker(0);
  } else {
    std::vector<std::thread> pool;
    for (unsigned i = 0; i < threads; ++i) pool.emplace_back(worker, i);
    for (std::thread& th : pool) th.join();
  }
  for (const std::exception_ptr& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  // Reduction in trial order.
  std::vector<std::vector<double>> err2(nf, std::vector<double>(iters, 0.0));
  std::vector<std::vector<double>> mis(nf, std::vector<double>(iters, 0.0));
  std::vector<std::vector<double>> upd(nf, std::vector<double>(iters, 0.0));
  std::vector<std::vector<double>> mul(nf, std::vector<double>(iters, 0.0));
  for (std::size_t t = 0; t < runs; ++t) {
    const TrialTrace& tr = *traces[t];
    for (std::size_t f = 0; f < nf; ++f) {
      for (std::size_t k = 0; k < iters; ++k) {
        err2[f][k] += tr.err2[f][k];
        mis[f][k] += tr.mismatch[f][k];
        upd[f][k] += tr.updated[f][k];
        mul[f][k] += tr.mults[f][k];
      }
    }
  }
  const double inv = 1.0 / static_cast<double>(runs);
  for (std::size_t k = 0; k < iters; ++k) {
    for (std::size_t f = 0; f < nf; ++f) {
      res.records.push_back({static_cast<std::int64_t>(k), res.filters[f].label, toDb(err2[f][k] * inv),
                             toDb(mis[f][k] * inv), upd[f][k] * inv, mul[f][k] * inv});
    }
  }
  for (std::size_t f = 0; f < nf; ++f) {
    const FilterSpec& s = res.filters[f];
    ComplexityParams cp{config.n, s.rank, s.q, config.r, config.m};
    Algorithm a = Algorithm::Nlms;
    switch (s.kind) {
      case FilterKind::Krr: a = Algorithm::KrrApspSingle; break;
      case FilterKind::Cgrrf: a = Algorithm::Cgrrf; break;
      case FilterKind::Nlms: a = Algorithm::Nlms; break;
      case FilterKind::Rls: a = Algorithm::Rls; break;
    }
    double total = 0.0;
    for (double v : mul[f]) total += v;
    res.complexity.push_back({s.label, complexityCount(a, cp).value(), total * inv / static_cast<double>(iters)});
  }
  return res;
}

std::vector<MetricsRecord> ExperimentResult::series(const std::string& label) const {
  std::vector<MetricsRecord> out;
  for (const MetricsRecord& r : records) {
    if (r.algorithm == label) out.push_back(r);
  }
  if (out.empty()) throw ConfigError("no records for filter '" + label + "'");
  return out;
}

double ExperimentResult::averageDb(const std::string& label, std::int64_t from, std::int64_t to,
                                   bool mismatch) const {
  double acc = 0.0;
  int count = 0;
  for (const MetricsRecord& r : series(label)) {
    if (r.k < from || r.k >= to) continue;
    acc += std::pow(10.0, (mismatch ? r.mismatchDb : r.mseDb) / 10.0);
    ++count;
  }
  if (count == 0) throw ConfigError("averageDb: empty iteration window");
  return toDb(acc / count);
}

double ExperimentResult::averageUpdateRate(const std::string& label, std::int64_t from, std::int64_t to) const {
  double acc = 0.0;
  int count = 0;
  for (const MetricsRecord& r : series(label)) {
    if (r.k < from || r.k >= to) continue;
    acc += r.updateRate;
    ++count;
  }
  if (count == 0) throw ConfigError("averageUpdateRate: empty iteration window");
  return acc / count;
}

std::vector<std::string> csvHeader(const ExperimentResult& result) {
  std::vector<std::string> lines = result.config.describe();
  if (result.config.countMults) {
    for (const ComplexityLine& c : result.complexity) {
      lines.push_back(fmt::format("complexity algorithm={} closed_form={:.2f} measured={:.2f}", c.algorithm,
                                  c.closedForm, c.measured));
    }
  }
  return lines;
}

std::string formatCsv(const ExperimentResult& result) {
  std::string out;
  for (const std::string& line : csvHeader(result)) out += "# " + line + "\n";
  out += "k,algorithm,mse_db,mismatch_db,update_rate,mults\n";
  for (const MetricsRecord& r : result.records) {
    out += fmt::format("{},{},{:.6f},{:.6f},{:.4f},{:.2f}\n", r.k, r.algorithm, r.mseDb, r.mismatchDb,
                       r.updateRate, r.mults);
  }
  return out;
}

void writeTextAtomically(const std::string& text, const std::string& path) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw Error("cannot write '" + path + "'");
    os << text;
    os.flush();
    if (!os) {
      os.close();
      std::error_code ec;
      fs::remove(tmp, ec);
      throw Error("write to '" + path + "' failed");
    }
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    std::error_code ignore;
    fs::remove(tmp, ignore);
    throw Error("cannot write '" + path + "': " + ec.message());
  }
}

void emitCsv(const ExperimentResult& result, const std::string& path) {
  writeTextAtomically(formatCsv(result), path);
}

ParsedCsv parseCsv(const std::string& text) {
  ParsedCsv out;
  std::istringstream is(text);
  std::string line;
  bool sawColumns = false;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      out.header.push_back(line.size() > 2 ? line.substr(2) : std::string());
      continue;
    }
    if (!sawColumns) {
      if (line != "k,algorithm,mse_db,mismatch_db,update_rate,mults") throw Error("parseCsv: unexpected columns");
      sawColumns = true;
      continue;
    }
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (cells.size() != 6) throw Error("parseCsv: expected 6 columns in '" + line + "'");
    out.records.push_back({std::stoll(cells[0]), cells[1], std::stod(cells[2]), std::stod(cells[3]),
                           std::stod(cells[4]), std::stod(cells[5])});
  }
  if (!sawColumns) throw Error("parseCsv: missing column line");
  return out;
}

}  // namespace rrapsp
