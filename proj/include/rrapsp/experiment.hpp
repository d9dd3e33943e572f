#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "rrapsp/complexity.hpp"
#include "rrapsp/filters.hpp"

namespace rrapsp {

inline constexpr const char* kLibraryVersion = "0.1.0";

enum class ExperimentKind { SysId, Cdma, Verify };

std::string kindName(ExperimentKind k);

enum class FilterKind { Krr, Cgrrf, Nlms, Rls };

/// Parses krr | cgrrf | nlms | rls; throws ConfigError otherwise.
FilterKind parseFilterKind(const std::string& s);

/// One filter instance of an experiment: KRR-APSP expands over ranks × qs,
/// CGRRF over ranks.
struct FilterSpec {
  FilterKind kind = FilterKind::Krr;
  Index rank = 5;
  int q = 1;
  std::string label;
};

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::SysId;
  std::vector<FilterKind> filters{FilterKind::Krr};
  std::vector<Index> ranks{5};
  std::vector<int> qs{4};
  int r = 1;
  double rho = 0.15;
  int m = 10;
  double lambda = 0.03;
  double gamma = 0.999;
  double snrDb = 15.0;
  int runs = 100;
  int iters = 2000;
  std::optional<std::int64_t> changeAt;
  int users = 8;
  int usersPost = 2;
  double interfererAmplitude = 1.0;
  std::uint64_t seed = 1;
  std::string outPath;
  bool countMults = false;
  Index n = 50;
  unsigned threads = 0;  // 0: hardware concurrency

  /// Defaults of the system-identification experiment (N = 50).
  static ExperimentConfig sysidDefaults();
  /// Defaults of the CDMA experiment (N = 31, K = 8).
  static ExperimentConfig cdmaDefaults();

  /// Throws ConfigError on invalid ranges or filter/scenario incompatibility.
  void validate() const;
  std::vector<FilterSpec> expandFilters() const;
  /// key=value lines echoed into the CSV header (threads excluded).
  std::vector<std::string> describe() const;
};

/// Build the filter of `spec` for this configuration; `init` is the desired
/// signature in the CDMA case.
std::unique_ptr<AdaptiveFilter> makeFilter(const ExperimentConfig& cfg, const FilterSpec& spec,
                                           const std::optional<Vector>& init);

struct MetricsRecord {
  std::int64_t k = 0;
  std::string algorithm;
  double mseDb = 0.0;       // 10log10 of mean (d_k − y_k)²
  double mismatchDb = 0.0;  // 10log10 of mean ‖h* − h_k‖²/‖h*‖²
  double updateRate = 0.0;  // fraction of runs that updated at k
  double mults = 0.0;       // mean multiplications at k
};

struct ComplexityLine {
  std::string algorithm;
  double closedForm = 0.0;
  double measured = 0.0;  // average over all runs and iterations
};

struct ExperimentResult {
  ExperimentConfig config;
  std::vector<FilterSpec> filters;
  std::vector<MetricsRecord> records;  // iteration-major, filters in spec order
  std::vector<ComplexityLine> complexity;

  /// Records of one filter in iteration order.
  std::vector<MetricsRecord> series(const std::string& label) const;
  /// Mean of 10^(x/10) over k ∈ [from, to), returned in dB.
  double averageDb(const std::string& label, std::int64_t from, std::int64_t to, bool mismatch = false) const;
  double averageUpdateRate(const std::string& label, std::int64_t from, std::int64_t to) const;
};

/// Monte-Carlo run; trials run on a worker pool and are reduced in trial
/// order, so the result does not depend on the thread count.
ExperimentResult runExperiment(const ExperimentConfig& config);

std::vector<std::string> csvHeader(const ExperimentResult& result);
std::string formatCsv(const ExperimentResult& result);
/// Writes through a temporary file and a rename; throws Error when the path
/// is not writable, leaving nothing behind.
void emitCsv(const ExperimentResult& result, const std::string& path);
void writeTextAtomically(const std::string& text, const std::string& path);

struct ParsedCsv {
  std::vector<std::string> header;  // without the leading '#'
  std::vector<MetricsRecord> records;
};
ParsedCsv parseCsv(const std::string& text);

}  // namespace rrapsp
