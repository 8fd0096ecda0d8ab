#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "widthlab/metric.hpp"
#include "widthlab/subspace.hpp"
#include "widthlab/systems.hpp"
#include "widthlab/widths.hpp"

namespace widthlab {

inline constexpr const char* kVersion = "0.1.0";

enum class ExperimentKind {
  L1Rigidity,
  L0Rigidity,
  RandomMatrixL0,
  Lacunary,
  GluskinP12,
  SparseP,
  WalshApprox,
  DftApprox,
  TrigWidth
};

std::string to_string(ExperimentKind kind);
ExperimentKind experiment_kind_from_string(const std::string& name);

// Flat key=value experiment description. `params` holds the kind-specific
// knobs; `validate()` checks presence and ranges and throws
// std::invalid_argument naming the kind and the offending key.
struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::L1Rigidity;
  std::map<std::string, std::string> params;
  std::uint64_t seed = 0;
  int trials = 1;
  std::string output_path;

  bool has(const std::string& key) const;
  std::string get_string(const std::string& key) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  long long get_int(const std::string& key) const;
  long long get_int(const std::string& key, long long fallback) const;
  double get_real(const std::string& key) const;
  double get_real(const std::string& key, double fallback) const;
  // Comma-separated list of reals.
  std::vector<double> get_real_list(const std::string& key) const;
  void validate() const;
};

// key = value lines, # comments, optional double quotes around values. The
// reserved keys kind/seed/trials/output fill the struct fields; everything
// else lands in params.
ExperimentConfig parse_experiment_config(const std::string& text);
ExperimentConfig load_experiment_config(const std::string& path);
std::string serialize_experiment_config(const ExperimentConfig& config);

struct TrialRow {
  long long trial = 0;
  std::uint64_t seed = 0;  // per-trial substream key
  double value = 0.0;
  std::vector<double> aux;
};

struct RunSummary {
  double mean = 0.0;
  double stderr_value = 0.0;  // sample stddev of the mean, 0 for one trial
  double min = 0.0;
  double max = 0.0;
  std::map<std::string, double> extra;  // kind-specific scalars
};

struct RunRecord {
  ExperimentConfig config;
  std::vector<std::string> aux_names;  // meaning of aux1.. in row order
  std::vector<TrialRow> rows;
  RunSummary summary;
  double wall_seconds = 0.0;
  std::string version = kVersion;

  // Header is fixed: trial,seed,value,aux1..; floats are shortest
  // round-trip decimals, so equal runs produce byte-identical text.
  std::string csv() const;
  std::string summary_json() const;
};

// Dispatches on config.kind. Per-trial work runs on RNG substreams keyed by
// (seed, trial), so rows are bit-identical across runs and worker counts.
RunRecord run(const ExperimentConfig& config);
// Re-runs record.config and throws std::runtime_error unless every row
// reproduces bit-for-bit.
RunRecord replay(const RunRecord& record);

// Smallest Ky-Fan norm of (samples - c) over a 257-point grid of centers c
// spanning the sample range: the empirical separation of the law.
double empirical_l0_separation(const std::vector<double>& samples);

// Separation segment (a, b) for the empirical law: quantiles q_-, q_+ at mass
// eps/3, split [q_-, q_+] into ceil(1/tau) equal segments and return the one
// with the least mass, ties resolved toward the middle. All four clauses
// (end masses >= eps/3, middle mass <= tau, length >= tau*eps/2) are
// re-verified on the empirical measure; violations throw.
std::pair<double, double> quantile_separation(std::vector<double> samples,
                                              double eps, double tau);

// Normalized ell_1 distances rho(xi, Q)/N per trial: `value` against the
// strategy subspace (AltMin/SVDInit train one adversary on a sample of the
// model; RandomSubspace draws per trial), aux1 against a fresh Haar subspace,
// aux2 flags solver degradation.
RunRecord l1_rigidity_experiment(const RandomVectorModel& model, Eigen::Index n,
                                 int trials, SubspaceStrategy strategy,
                                 std::uint64_t seed);

// Ky-Fan distances against a trained adversary and fresh Haar subspaces, with
// hit indicators {rho <= delta}; the summary carries the empirical hit rates
// next to the 2 exp(-delta N) bound. The coordinate law must pass the
// empirical separation check first.
RunRecord l0_rigidity_experiment(const RandomVectorModel& model, Eigen::Index n,
                                 double delta, int trials, std::uint64_t seed);

// Random sign matrices vs altmin low-rank search at rank round(c N): achieved
// Ky-Fan errors per trial (upper bounds on the rigidity minimum) and the raw
// observed floor in the summary.
RunRecord random_matrix_l0_experiment(Eigen::Index dim, double rank_fraction,
                                      int trials, std::uint64_t seed);

// Dilation systems phi(k_j x) for each lambda in the sweep: mean distances to
// Haar subspaces per trial plus the trained-adversary values per lambda, in
// the requested metric and its companion (L_1 <-> Ky-Fan).
RunRecord lacunary_experiment(const std::string& profile,
                              const std::vector<double>& lambdas, int count,
                              Eigen::Index n, const MetricSpec& metric,
                              int trials, std::uint64_t seed);

// Lower-bound certificates for ell_p distances (1 < p <= 2) of model draws to
// Haar subspaces, normalized by N^{1/p}; summary carries empirical quantiles.
RunRecord gluskin_experiment(const RandomVectorModel& model, double p,
                             Eigen::Index n, int trials, std::uint64_t seed);
RunRecord gluskin_experiment(const FunctionSystem& x, double p, Eigen::Index n,
                             int trials, std::uint64_t seed);

}  // namespace widthlab
