// rrapsp: Monte-Carlo experiments and the verification suite.
//
//   rrapsp sysid --filter krr,cgrrf --D 3,5,8 --q 4 --runs 100 --out fig.csv
//   rrapsp cdma --filter krr,cgrrf --users 4 --users-post 2 --change-at 1000
//   rrapsp verify --seed 7

#include <cstdint>
#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "rrapsp/error.hpp"
#include "rrapsp/experiment.hpp"
#include "rrapsp/verify.hpp"

namespace {

constexpr int kExitInvariant = 1;
constexpr int kExitConfig = 2;

struct Flags {
  std::vector<std::string> filters;
  long n = 0;
  std::vector<long> ranks;
  std::vector<int> qs;
  int r = 0;
  double rho = 0;
  int m = 0;
  double lambda = 0;
  double gamma = 0;
  double snrDb = 0;
  int runs = 0;
  int iters = 0;
  std::int64_t changeAt = 0;
  int users = 0;
  int usersPost = 0;
  double interfererAmplitude = 0;
  std::uint64_t seed = 1;
  std::string out;
  bool countMults = false;
  unsigned threads = 0;
};

void addExperimentFlags(CLI::App* sub, Flags& f, bool cdma) {
  sub->add_option("--filter", f.filters, "krr, cgrrf, nlms, rls (repeat or comma-separate)")->delimiter(',');
  if (!cdma) sub->add_option("--N", f.n, "filter length");
  sub->add_option("--D", f.ranks, "Krylov rank(s)")->delimiter(',');
  sub->add_option("--q", f.qs, "parallel projections per step")->delimiter(',');
  sub->add_option("--r", f.r, "error-vector dimension");
  sub->add_option("--rho", f.rho, "error bound");
  sub->add_option("--m", f.m, "basis refresh period");
  sub->add_option("--lambda", f.lambda, "relaxation (also the NLMS step size)");
  sub->add_option("--gamma", f.gamma, "forgetting factor");
  sub->add_option("--snr-db", f.snrDb, "SNR in dB");
  sub->add_option("--runs", f.runs, "Monte-Carlo runs");
  sub->add_option("--iters", f.iters, "iterations per run");
  sub->add_option("--change-at", f.changeAt, "iteration of the environment change");
  if (cdma) {
    sub->add_option("--users", f.users, "active users K");
    sub->add_option("--users-post", f.usersPost, "users after the change");
    sub->add_option("--interferer-amplitude", f.interfererAmplitude, "interferer amplitude relative to the desired user");
  }
  sub->add_option("--seed", f.seed, "base seed");
  sub->add_option("--out", f.out, "CSV output path (stdout when omitted)");
  sub->add_flag("--count-mults", f.countMults, "add closed-form vs measured multiplication counts to the header");
  sub->add_option("--threads", f.threads, "worker threads (0: all cores)");
}

rrapsp::ExperimentConfig buildConfig(const CLI::App* sub, const Flags& f, bool cdma) {
  using rrapsp::ExperimentConfig;
  ExperimentConfig c = cdma ? ExperimentConfig::cdmaDefaults() : ExperimentConfig::sysidDefaults();
  const auto given = [&](const char* name) { return sub->count(name) > 0; };
  if (given("--filter")) {
    c.filters.clear();
    for (const std::string& s : f.filters) c.filters.push_back(rrapsp::parseFilterKind(s));
  }
  if (!cdma && given("--N")) c.n = f.n;
  if (given("--D")) c.ranks.assign(f.ranks.begin(), f.ranks.end());
  if (given("--q")) c.qs = f.qs;
  if (given("--r")) c.r = f.r;
  if (given("--rho")) c.rho = f.rho;
  if (given("--m")) c.m = f.m;
  if (given("--lambda")) c.lambda = f.lambda;
  if (given("--gamma")) c.gamma = f.gamma;
  if (given("--snr-db")) c.snrDb = f.snrDb;
  if (given("--runs")) c.runs = f.runs;
  if (given("--iters")) c.iters = f.iters;
  if (given("--change-at")) c.changeAt = f.changeAt;
  if (cdma && given("--users")) c.users = f.users;
  if (cdma && given("--users-post")) c.usersPost = f.usersPost;
  if (cdma && given("--interferer-amplitude")) c.interfererAmplitude = f.interfererAmplitude;
  c.seed = f.seed;
  c.outPath = f.out;
  c.countMults = f.countMults;
  c.threads = f.threads;
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Krylov reduced-rank adaptive parallel subgradient projection experiments"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(rrapsp::kLibraryVersion));

  Flags sysidFlags;
  Flags cdmaFlags;
  std::uint64_t verifySeed = 1;
  std::string verifyOut;
  CLI::App* sysid = app.add_subcommand("sysid", "system identification with colored input");
  CLI::App* cdma = app.add_subcommand("cdma", "CDMA interference suppression");
  CLI::App* verify = app.add_subcommand("verify", "numerical checks of the convergence analysis");
  addExperimentFlags(sysid, sysidFlags, false);
  addExperimentFlags(cdma, cdmaFlags, true);
  verify->add_option("--seed", verifySeed, "base seed");
  verify->add_option("--out", verifyOut, "report path (stdout when omitted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }

  try {
    if (verify->parsed()) {
      rrapsp::VerifyOptions opt;
      opt.seed = verifySeed;
      const rrapsp::VerifyReport rep = rrapsp::runVerificationSuite(opt);
      const std::string text = rep.format();
      if (verifyOut.empty()) {
        std::cout << text;
      } else {
        rrapsp::writeTextAtomically(text, verifyOut);
      }
      return rep.allPassed() ? 0 : kExitInvariant;
    }
    const bool isCdma = cdma->parsed();
    const rrapsp::ExperimentConfig config =
        buildConfig(isCdma ? cdma : sysid, isCdma ? cdmaFlags : sysidFlags, isCdma);
    config.validate();
    if (!config.outPath.empty()) {
      // Fail on an unwritable destination before spending time on trials.
      rrapsp::writeTextAtomically("", config.outPath + ".probe");
      std::remove((config.outPath + ".probe").c_str());
    }
    const rrapsp::ExperimentResult result = rrapsp::runExperiment(config);
    if (config.outPath.empty()) {
      std::cout << rrapsp::formatCsv(result);
    } else {
      rrapsp::emitCsv(result, config.outPath);
    }
    return 0;
  } catch (const rrapsp::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const rrapsp::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitInvariant;
  } catch (const rrapsp::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
}
