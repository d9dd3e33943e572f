#include <doctest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "rrapsp/complexity.hpp"
#include "rrapsp/error.hpp"
#include "rrapsp/experiment.hpp"
#include "rrapsp/filters.hpp"
#include "rrapsp/rng.hpp"
#include "rrapsp/scenarios.hpp"

using namespace rrapsp;
namespace fs = std::filesystem;

namespace {

std::string readFile(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

ExperimentConfig tinySysid() {
  ExperimentConfig c = ExperimentConfig::sysidDefaults();
  c.n = 12;
  c.filters = {FilterKind::Krr, FilterKind::Cgrrf, FilterKind::Nlms, FilterKind::Rls};
  c.ranks = {3};
  c.qs = {2};
  c.runs = 4;
  c.iters = 60;
  c.seed = 7;
  return c;
}

int runCli(const std::string& args) {
  const std::string cmd = std::string(RRAPSP_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path scratchDir() {
  fs::path d = fs::temp_directory_path() / ("rrapsp-test-" + std::to_string(::getpid()));
  fs::create_directories(d);
  return d;
}

}  // namespace

TEST_CASE("worked complexity values") {
  for (std::int64_t n : {31, 50, 100}) {
    const ComplexityParams p{n, 5, 5, 1, 10};
    CHECK(krrUpdateShare(p) == Fraction(7 * n + 152));
    CHECK(krrParallelUpdateShare(p) == Fraction(5 * n + 40));
    CHECK(complexityCount(Algorithm::Nlms, p) == Fraction(3 * n + 2));
    CHECK(complexityCount(Algorithm::Rls, p) == Fraction(4 * n * n + 4 * n + 1));
    // (D−1)N²/m + [(5D−4)/m + 4]N + 2(D−1) at D = 5, m = 10.
    const Fraction cg = complexityCount(Algorithm::Cgrrf, p);
    CHECK(cg == Fraction(40 * n * n + 610 * n + 800, 100));
    CHECK(complexityCount(Algorithm::KrrApspSingle, p) == Fraction(40 * n * n + 610 * n + 800 + 100 * (7 * n + 152), 100));
    CHECK(complexityCount(Algorithm::KrrApspParallel, p) == Fraction(40 * n * n + 610 * n + 800 + 100 * (5 * n + 40), 100));
  }
  CHECK(complexityCount(Algorithm::Nlms, ComplexityParams{50, 5, 1, 1, 10}).value() == 152.0);
}

TEST_CASE("alpha and beta by hand expansion") {
  Rng rng(77);
  for (int t = 0; t < 20; ++t) {
    const auto q = static_cast<std::int64_t>(1 + rng.below(10));
    const auto r = static_cast<std::int64_t>(1 + rng.below(5));
    const auto m = static_cast<std::int64_t>(1 + rng.below(100));
    const Fraction a = alphaFactor(q, r, m);
    const Fraction b = betaFactor(r, m);
    CHECK(a.num * m == (q + r + m - 2) * a.den);
    CHECK(b.num * m == (r + m - 1) * b.den);
    CHECK(a.value() >= 1.0);
    CHECK(b.value() >= 1.0);
  }
}

TEST_CASE("NLMS counter matches 3N + 2 exactly") {
  SysIdConfig sc;
  sc.n = 50;
  SysIdStream s(sc);
  Nlms f(50, 0.1);
  for (int k = 0; k < 20; ++k) {
    const StreamSample x = s.next();
    CHECK(f.step(x.u, x.d).mults == 152);
  }
}

TEST_CASE("skipping updates costs less than the closed form") {
  SysIdConfig sc;
  sc.n = 30;
  sc.seed = 3;
  SysIdStream s(sc);
  KrrParams p;
  p.rank = 5;
  p.q = 5;
  p.rho = 1e6;  // nothing ever violates
  KrrApsp f(p, 30);
  std::uint64_t total = 0;
  int steps = 0;
  for (int k = 0; k < 300; ++k) {
    const StreamSample x = s.next();
    const StepOutput out = f.step(x.u, x.d);
    if (k < 100) continue;
    CHECK_FALSE(out.updated);
    total += out.breakdown.estimation + out.breakdown.update;
    ++steps;
  }
  const double closed = 4.0 * 30 + krrUpdateShare(ComplexityParams{30, 5, 5, 1, 10}).value();
  CHECK(static_cast<double>(total) / steps < closed);
}

TEST_CASE("empty record list gives a header-only CSV") {
  ExperimentResult r;
  r.config = tinySysid();
  const std::string csv = formatCsv(r);
  const ParsedCsv parsed = parseCsv(csv);
  CHECK(parsed.records.empty());
  CHECK_FALSE(parsed.header.empty());
  CHECK(csv.find("k,algorithm,mse_db,mismatch_db,update_rate,mults\n") != std::string::npos);
  CHECK(csv.ends_with("\nk,algorithm,mse_db,mismatch_db,update_rate,mults\n"));
}

TEST_CASE("CSV round trip") {
  const ExperimentResult r = runExperiment(tinySysid());
  CHECK(r.records.size() == static_cast<std::size_t>(60 * 4));
  const ParsedCsv parsed = parseCsv(formatCsv(r));
  REQUIRE(parsed.records.size() == r.records.size());
  for (std::size_t i = 0; i < r.records.size(); ++i) {
    CHECK(parsed.records[i].k == r.records[i].k);
    CHECK(parsed.records[i].algorithm == r.records[i].algorithm);
    CHECK(parsed.records[i].mseDb == doctest::Approx(r.records[i].mseDb).epsilon(1e-5));
    CHECK(parsed.records[i].updateRate == doctest::Approx(r.records[i].updateRate).epsilon(1e-3));
  }
  bool sawVersion = false;
  for (const std::string& h : parsed.header) sawVersion = sawVersion || h.find(kLibraryVersion) != std::string::npos;
  CHECK(sawVersion);
}

TEST_CASE("output does not depend on the thread count") {
  ExperimentConfig a = tinySysid();
  a.threads = 1;
  ExperimentConfig b = a;
  b.threads = 3;
  CHECK(formatCsv(runExperiment(a)) == formatCsv(runExperiment(b)));

  ExperimentConfig c = ExperimentConfig::cdmaDefaults();
  c.filters = {FilterKind::Krr, FilterKind::Cgrrf};
  c.runs = 3;
  c.iters = 80;
  c.users = 4;
  c.changeAt = 40;
  c.threads = 1;
  ExperimentConfig d = c;
  d.threads = 2;
  CHECK(formatCsv(runExperiment(c)) == formatCsv(runExperiment(d)));
}

TEST_CASE("golden trace for a pinned seed") {
  const std::string csv = formatCsv(runExperiment(tinySysid()));
  const fs::path golden = fs::path(RRAPSP_GOLDEN_DIR) / "sysid_tiny.csv";
  REQUIRE(fs::exists(golden));
  CHECK(csv == readFile(golden));
}

TEST_CASE("configuration errors surface before any trial") {
  ExperimentConfig c = tinySysid();
  c.ranks = {13};
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = tinySysid();
  c.runs = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = ExperimentConfig::cdmaDefaults();
  c.users = 40;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  CHECK_THROWS_AS(parseFilterKind("lms"), ConfigError);
}

TEST_CASE("unwritable output path leaves nothing behind") {
  const ExperimentResult r = runExperiment(tinySysid());
  const fs::path bad = scratchDir() / "missing-dir" / "out.csv";
  CHECK_THROWS_AS(emitCsv(r, bad.string()), Error);
  CHECK_FALSE(fs::exists(bad));
  CHECK_FALSE(fs::exists(bad.string() + ".tmp"));
}

TEST_CASE("CLI exit codes") {
  const fs::path dir = scratchDir();
  const fs::path out = dir / "ok.csv";
  CHECK(runCli("sysid --N 12 --D 3 --q 2 --runs 2 --iters 30 --out " + out.string()) == 0);
  CHECK(fs::exists(out));
  CHECK(parseCsv(readFile(out)).records.size() == 30);

  CHECK(runCli("sysid --users 4 --runs 1 --iters 10") == 2);
  CHECK(runCli("sysid --N 12 --D 20 --runs 1 --iters 10") == 2);
  CHECK(runCli("cdma --filter bogus --runs 1 --iters 10") == 2);
  CHECK(runCli("sysid --runs 0") == 2);

  const fs::path bad = dir / "missing-dir" / "x.csv";
  CHECK(runCli("sysid --N 12 --D 3 --runs 1 --iters 10 --out " + bad.string()) == 2);
  CHECK_FALSE(fs::exists(bad));
  CHECK_FALSE(fs::exists(bad.string() + ".tmp"));

  const fs::path report = dir / "verify.txt";
  CHECK(runCli("verify --out " + report.string()) == 0);
  CHECK(readFile(report).find("FAIL") == std::string::npos);
  fs::remove_all(dir);
}
