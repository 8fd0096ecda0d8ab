#include "widthlab/experiments.hpp"

#include <json.hpp>

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "widthlab/constructions.hpp"
#include "widthlab/io.hpp"
#include "widthlab/parallel.hpp"
#include "widthlab/rng.hpp"

namespace widthlab {
namespace {

constexpr std::pair<ExperimentKind, const char*> kKindNames[] = {
    {ExperimentKind::L1Rigidity, "l1_rigidity"},
    {ExperimentKind::L0Rigidity, "l0_rigidity"},
    {ExperimentKind::RandomMatrixL0, "random_matrix_l0"},
    {ExperimentKind::Lacunary, "lacunary"},
    {ExperimentKind::GluskinP12, "gluskin_p12"},
    {ExperimentKind::SparseP, "sparse_p"},
    {ExperimentKind::WalshApprox, "walsh_approx"},
    {ExperimentKind::DftApprox, "dft_approx"},
    {ExperimentKind::TrigWidth, "trig_width"},
};

std::string trim(const std::string& s) {
  std::size_t lo = 0;
  std::size_t hi = s.size();
  while (lo < hi && std::isspace(static_cast<unsigned char>(s[lo]))) ++lo;
  while (hi > lo && std::isspace(static_cast<unsigned char>(s[hi - 1]))) --hi;
  return s.substr(lo, hi - lo);
}

[[noreturn]] void bad_param(const ExperimentConfig& cfg, const std::string& key,
                            const std::string& why) {
  throw std::invalid_argument(to_string(cfg.kind) + ": param '" + key + "' " + why);
}

long long parse_int_strict(const ExperimentConfig& cfg, const std::string& key,
                           const std::string& raw) {
  const std::string s = trim(raw);
  if (s.empty()) bad_param(cfg, key, "must be an integer, got an empty value");
  char* end = nullptr;
  const long long v = std::strtoll(s.c_str(), &end, 10);
  if (end != s.c_str() + s.size())
    bad_param(cfg, key, "must be an integer, got '" + s + "'");
  return v;
}

double parse_real_strict(const ExperimentConfig& cfg, const std::string& key,
                         const std::string& raw) {
  const std::string s = trim(raw);
  if (s.empty()) bad_param(cfg, key, "must be a number, got an empty value");
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size())
    bad_param(cfg, key, "must be a number, got '" + s + "'");
  return v;
}

// ---------------------------------------------------------------------------
// Shared engine pieces.

struct EngineOutput {
  std::vector<TrialRow> rows;
  std::vector<std::string> aux_names;
  std::map<std::string, double> extra;
};

std::uint64_t trial_key(std::uint64_t seed, std::uint64_t tag, std::uint64_t t) {
  return Rng::stream(seed, tag, t).next_u64();
}

RandomVectorModel make_model(const ExperimentConfig& cfg, const std::string& name,
                             Eigen::Index dim) {
  if (name == "rademacher") return RandomVectorModel::random_signs(dim);
  if (name == "gaussian")
    return RandomVectorModel::independent(dim, {OneDimLaw::gaussian(0.0, 1.0)});
  if (name == "uniform")
    return RandomVectorModel::independent(dim, {OneDimLaw::uniform(-1.0, 1.0)});
  if (name == "signs_scaled")
    return RandomVectorModel::independent(
        dim, {OneDimLaw::three_point(1.0, 1.0 / std::sqrt(static_cast<double>(dim)))});
  bad_param(cfg, "model",
            "'" + name + "' cannot be rebuilt from a config; known names are "
            "rademacher/gaussian/uniform/signs_scaled (pass the model to the "
            "experiment entry point directly instead)");
}

// Canonical name when the model matches a config-buildable form, else
// "custom" (such a record cannot be replayed from its config alone).
std::string describe_model(const RandomVectorModel& model) {
  using Kind = RandomVectorModel::Kind;
  if (model.kind == Kind::RandomSigns) return "rademacher";
  if (model.kind == Kind::IndependentComponents && model.laws.size() == 1) {
    const OneDimLaw& law = model.laws.front();
    if (law.kind == OneDimLaw::Kind::Gaussian && law.a == 0.0 && law.b == 1.0)
      return "gaussian";
    if (law.kind == OneDimLaw::Kind::Uniform && law.a == -1.0 && law.b == 1.0)
      return "uniform";
    if (law.kind == OneDimLaw::Kind::ThreePoint && law.a == 1.0 &&
        law.b == 1.0 / std::sqrt(static_cast<double>(model.dim)))
      return "signs_scaled";
  }
  return "custom";
}

SubspaceStrategy parse_strategy(const ExperimentConfig& cfg, const std::string& name) {
  if (name == "altmin") return SubspaceStrategy::AltMin;
  if (name == "svd") return SubspaceStrategy::SVDInit;
  if (name == "random") return SubspaceStrategy::RandomSubspace;
  bad_param(cfg, "strategy", "must be one of altmin/svd/random, got '" + name + "'");
}

const char* strategy_name(SubspaceStrategy s) {
  switch (s) {
    case SubspaceStrategy::AltMin: return "altmin";
    case SubspaceStrategy::SVDInit: return "svd";
    case SubspaceStrategy::RandomSubspace: return "random";
  }
  return "altmin";
}

// Loosened tolerances for adversary training; measured trials keep the
// default contract.
SolverOptions loose_options(std::uint64_t seed) {
  SolverOptions o;
  o.gap_tol_rel = 1e-4;
  o.max_stages = 6;
  o.max_inner = 24;
  o.multistart = 2;
  o.seed = seed;
  return o;
}

Subspace full_space(Eigen::Index dim) {
  return Subspace::from_orthonormal(Eigen::MatrixXd::Identity(dim, dim));
}

// One adversarial subspace against the model: low-rank search (or a plain
// SVD) over a training sample drawn outside the measured trial streams.
Subspace trained_adversary(const ExperimentConfig& cfg, const RandomVectorModel& model,
                           Eigen::Index n, const MetricSpec& m,
                           SubspaceStrategy strategy) {
  const Eigen::Index dim = model.dim;
  if (n <= 0) return Subspace::zero(dim);
  if (n >= dim) return full_space(dim);
  const long long train_cols =
      cfg.get_int("train_columns", std::min<long long>(2 * dim, 160));
  const long long train_sweeps = cfg.get_int("train_sweeps", 2);
  if (train_cols < 1) bad_param(cfg, "train_columns", "must be positive");
  if (train_sweeps < 1) bad_param(cfg, "train_sweeps", "must be positive");
  const Eigen::MatrixXd train =
      sample(model, static_cast<int>(train_cols), cfg.seed ^ 0x7E57C01Dull)
          .transpose();
  if (strategy == SubspaceStrategy::SVDInit) {
    const SpectralDecomposition sd = spectral_decomposition(train);
    const Eigen::Index take = std::min<Eigen::Index>(n, sd.left_basis.cols());
    return Subspace::from_columns(sd.left_basis.leftCols(take));
  }
  const LowRankApprox lr =
      altmin_lowrank(train, n, m, 1, static_cast<int>(train_sweeps),
                     cfg.seed ^ 0xAD7E55Aull, loose_options(cfg.seed));
  const Subspace q = Subspace::from_columns(lr.left);
  return q.dim() > 0 ? q : Subspace::zero(dim);
}

double raw_min(const std::vector<TrialRow>& rows) {
  double m = std::numeric_limits<double>::infinity();
  for (const TrialRow& r : rows) m = std::min(m, r.value);
  return m;
}

// ---------------------------------------------------------------------------
// Per-kind engines. Every random draw comes from a substream keyed by the
// config seed, a fixed tag, and the trial index, so rows do not depend on the
// worker count.

EngineOutput run_l1_rigidity(const ExperimentConfig& cfg,
                             const RandomVectorModel* model_override) {
  const Eigen::Index dim = static_cast<Eigen::Index>(cfg.get_int("dim"));
  const Eigen::Index n = static_cast<Eigen::Index>(cfg.get_int("n"));
  const RandomVectorModel model =
      model_override ? *model_override
                     : make_model(cfg, cfg.get_string("model", "rademacher"), dim);
  const SubspaceStrategy strategy =
      parse_strategy(cfg, cfg.get_string("strategy", "altmin"));
  const MetricSpec m = MetricSpec::lp(1.0);

  Subspace adversary;
  if (strategy != SubspaceStrategy::RandomSubspace)
    adversary = trained_adversary(cfg, model, n, m, strategy);

  EngineOutput out;
  out.aux_names = {"haar_value", "solver_degraded"};
  out.rows.resize(static_cast<std::size_t>(cfg.trials));
  parallel_for(static_cast<std::size_t>(cfg.trials), [&](std::size_t t) {
    TrialRow& row = out.rows[t];
    row.trial = static_cast<long long>(t);
    row.seed = trial_key(cfg.seed, 0x11A1ull, t);
    const Eigen::VectorXd xi = sample_one(model, cfg.seed, t);
    SolverOptions opts;
    opts.seed = row.seed;
    Subspace drawn;
    if (strategy == SubspaceStrategy::RandomSubspace) {
      Rng sub_rng = Rng::stream(cfg.seed, 0xADC1ull, t);
      drawn = random_subspace(dim, n, sub_rng);
    }
    const Subspace& qa =
        strategy == SubspaceStrategy::RandomSubspace ? drawn : adversary;
    const DistanceResult da = distance(xi, qa, m, Eigen::VectorXd(), opts);
    SolverOptions opts2;
    opts2.seed = row.seed ^ 0x9E3779B97F4A7C15ull;
    Rng haar_rng = Rng::stream(cfg.seed, 0xBA5Eull, t);
    const Subspace qr = random_subspace(dim, n, haar_rng);
    const DistanceResult dr = distance(xi, qr, m, Eigen::VectorXd(), opts2);
    const bool degraded = da.status == DistanceStatus::HeuristicUpperBound ||
                          dr.status == DistanceStatus::HeuristicUpperBound;
    row.value = da.value;
    row.aux = {dr.value, degraded ? 1.0 : 0.0};
  });

  long double haar = 0.0L;
  for (const TrialRow& r : out.rows) haar += r.aux[0];
  out.extra["haar_mean"] = static_cast<double>(haar / std::max(1, cfg.trials));
  out.extra["dim"] = static_cast<double>(dim);
  out.extra["n"] = static_cast<double>(n);
  out.extra["floor"] = raw_min(out.rows);
  return out;
}

EngineOutput run_l0_rigidity(const ExperimentConfig& cfg,
                             const RandomVectorModel* model_override) {
  const Eigen::Index dim = static_cast<Eigen::Index>(cfg.get_int("dim"));
  const Eigen::Index n = static_cast<Eigen::Index>(cfg.get_int("n"));
  const double delta = cfg.get_real("delta");
  const RandomVectorModel model =
      model_override ? *model_override
                     : make_model(cfg, cfg.get_string("model", "rademacher"), dim);
  const SubspaceStrategy strategy =
      parse_strategy(cfg, cfg.get_string("strategy", "altmin"));

  // Separation precondition on the coordinate law, checked on a pooled
  // coordinate sample.
  const int pool_draws = static_cast<int>((4096 + dim - 1) / dim);
  const Eigen::MatrixXd pool = sample(model, pool_draws, cfg.seed ^ 0x5E9A4ull);
  std::vector<double> coord;
  coord.reserve(4096);
  for (Eigen::Index i = 0; i < pool.rows() && coord.size() < 4096; ++i)
    for (Eigen::Index j = 0; j < pool.cols() && coord.size() < 4096; ++j)
      coord.push_back(pool(i, j));
  const double eps = cfg.get_real("eps", empirical_l0_separation(coord));
  const double tau =
      cfg.get_real("tau", delta > 0.0 ? std::min(1.0, 5.0 * delta / eps) : 1.0);
  const auto [sep_a, sep_b] = quantile_separation(coord, eps, tau);

  const MetricSpec m = MetricSpec::ky_fan_l0();
  Subspace adversary;
  if (strategy != SubspaceStrategy::RandomSubspace)
    adversary = trained_adversary(cfg, model, n, MetricSpec::ky_fan_l0(1e-9), strategy);

  EngineOutput out;
  out.aux_names = {"haar_value", "hit_adversarial", "hit_random"};
  out.rows.resize(static_cast<std::size_t>(cfg.trials));
  parallel_for(static_cast<std::size_t>(cfg.trials), [&](std::size_t t) {
    TrialRow& row = out.rows[t];
    row.trial = static_cast<long long>(t);
    row.seed = trial_key(cfg.seed, 0x10A1ull, t);
    const Eigen::VectorXd xi = sample_one(model, cfg.seed, t);
    SolverOptions opts;
    opts.seed = row.seed;
    Subspace drawn;
    if (strategy == SubspaceStrategy::RandomSubspace) {
      Rng sub_rng = Rng::stream(cfg.seed, 0xADC1ull, t);
      drawn = random_subspace(dim, n, sub_rng);
    }
    const Subspace& qa =
        strategy == SubspaceStrategy::RandomSubspace ? drawn : adversary;
    const double va = distance(xi, qa, m, Eigen::VectorXd(), opts).value;
    SolverOptions opts2;
    opts2.seed = row.seed ^ 0x9E3779B97F4A7C15ull;
    Rng haar_rng = Rng::stream(cfg.seed, 0xBA5Eull, t);
    const Subspace qr = random_subspace(dim, n, haar_rng);
    const double vr = distance(xi, qr, m, Eigen::VectorXd(), opts2).value;
    row.value = va;
    row.aux = {vr, va <= delta ? 1.0 : 0.0, vr <= delta ? 1.0 : 0.0};
  });

  long double hits_a = 0.0L, hits_r = 0.0L;
  for (const TrialRow& r : out.rows) {
    hits_a += r.aux[1];
    hits_r += r.aux[2];
  }
  const double trials = static_cast<double>(std::max(1, cfg.trials));
  out.extra["hit_rate_adversarial"] = static_cast<double>(hits_a) / trials;
  out.extra["hit_rate_random"] = static_cast<double>(hits_r) / trials;
  out.extra["bound_2exp"] = 2.0 * std::exp(-delta * static_cast<double>(dim));
  out.extra["eps_used"] = eps;
  out.extra["tau_used"] = tau;
  out.extra["separation_a"] = sep_a;
  out.extra["separation_b"] = sep_b;
  out.extra["delta"] = delta;
  out.extra["floor_adversarial"] = raw_min(out.rows);
  return out;
}

EngineOutput run_random_matrix_l0(const ExperimentConfig& cfg) {
  const Eigen::Index dim = static_cast<Eigen::Index>(cfg.get_int("dim"));
  const double fraction = cfg.get_real("rank_fraction");
  const Eigen::Index n =
      static_cast<Eigen::Index>(std::llround(fraction * static_cast<double>(dim)));
  const int restarts = static_cast<int>(cfg.get_int("restarts", 2));
  const int max_sweeps = static_cast<int>(cfg.get_int("max_sweeps", 8));
  const MetricSpec m = MetricSpec::ky_fan_l0(1e-9);

  EngineOutput out;
  out.aux_names = {"hamming_error", "sweeps", "iteration_capped"};
  out.rows.resize(static_cast<std::size_t>(cfg.trials));
  parallel_for(static_cast<std::size_t>(cfg.trials), [&](std::size_t t) {
    TrialRow& row = out.rows[t];
    row.trial = static_cast<long long>(t);
    row.seed = trial_key(cfg.seed, 0x51C4ull, t);
    Rng rng = Rng::stream(cfg.seed, 0x5160ull, t);
    Eigen::MatrixXd a(dim, dim);
    for (Eigen::Index i = 0; i < dim; ++i)
      for (Eigen::Index j = 0; j < dim; ++j) a(i, j) = rng.next_sign();
    const LowRankApprox lr =
        altmin_lowrank(a, n, m, restarts, max_sweeps, row.seed);
    row.value = lr.error;
    row.aux = {matrix_distance(a, lr.approximant(), MetricSpec::hamming(1e-9)),
               static_cast<double>(lr.sweeps), lr.hit_iteration_cap ? 1.0 : 0.0};
  });

  out.extra["error_floor"] = raw_min(out.rows);
  out.extra["rank"] = static_cast<double>(n);
  out.extra["bound_2exp"] =
      2.0 * std::exp(-fraction * static_cast<double>(dim) * static_cast<double>(dim));
  return out;
}

std::int64_t lacunary_top_frequency(double lambda, int count) {
  std::int64_t k = 1;
  for (int j = 1; j < count; ++j) {
    if (k > kMaxMaterializedEntries) return k;  // already past any usable grid
    const std::int64_t next_lac =
        static_cast<std::int64_t>(std::ceil(lambda * static_cast<double>(k) - 1e-12));
    k = std::max(k + 1, next_lac);
  }
  return k;
}

MetricSpec lacunary_metric(const ExperimentConfig& cfg, const std::string& name) {
  if (name == "l1") return MetricSpec::lp(1.0);
  if (name == "l2") return MetricSpec::lp(2.0);
  if (name == "kyfan") return MetricSpec::ky_fan_l0();
  bad_param(cfg, "metric", "must be one of l1/l2/kyfan, got '" + name + "'");
}

EngineOutput run_lacunary(const ExperimentConfig& cfg) {
  const std::string profile = cfg.get_string("profile", "cos");
  const std::vector<double> lambdas = cfg.get_real_list("lambda");
  const int count = static_cast<int>(cfg.get_int("count"));
  const Eigen::Index n = static_cast<Eigen::Index>(cfg.get_int("n"));
  const MetricSpec metric = lacunary_metric(cfg, cfg.get_string("metric", "l1"));
  const MetricSpec companion = metric.kind == MetricKind::KyFanL0
                                   ? MetricSpec::lp(1.0)
                                   : MetricSpec::ky_fan_l0();
  const long long grid_override = cfg.get_int("grid", 0);
  const long long sweeps = cfg.get_int("train_sweeps", 2);

  EngineOutput out;
  out.aux_names = {"lambda", "haar_companion", "adversarial_value",
                   "adversarial_companion", "solver_degraded"};
  out.rows.resize(lambdas.size() * static_cast<std::size_t>(cfg.trials));
  double adv_floor = std::numeric_limits<double>::infinity();

  for (std::size_t li = 0; li < lambdas.size(); ++li) {
    const double lambda = lambdas[li];
    const std::int64_t top = lacunary_top_frequency(lambda, count);
    const long long grid = std::max<long long>({64, 4 * top, grid_override});
    if (grid > kMaxMaterializedEntries / count)
      bad_param(cfg, "lambda",
                "needs a profile grid of " + std::to_string(grid) +
                    " points for lambda " + format_double(lambda) +
                    "; the materialization cap is 2^26 entries");
    Eigen::VectorXd samples(grid);
    if (profile == "cos") {
      const double pi = 3.14159265358979323846;
      for (long long i = 0; i < grid; ++i)
        samples[i] = std::cos(2.0 * pi * static_cast<double>(i) /
                              static_cast<double>(grid));
    } else {
      bad_param(cfg, "profile", "must be 'cos', got '" + profile + "'");
    }
    const FunctionSystem sys = lacunary_system(samples, lambda, count);

    Subspace adversary;
    if (n <= 0) {
      adversary = Subspace::zero(grid);
    } else if (n >= grid) {
      adversary = full_space(grid);
    } else {
      const LowRankApprox lr =
          altmin_lowrank(sys.samples, n, metric, 1, static_cast<int>(sweeps),
                         cfg.seed ^ 0x1AC0ull, loose_options(cfg.seed));
      adversary = Subspace::from_columns(lr.left);
      if (adversary.dim() == 0) adversary = Subspace::zero(grid);
    }
    SolverOptions adv_opts;
    adv_opts.seed = cfg.seed ^ 0x1AC1ull;
    const double adv_value = mean_distance(sys, adversary, metric, 1.0, adv_opts).value;
    const double adv_comp =
        mean_distance(sys, adversary, companion, 1.0, adv_opts).value;
    adv_floor = std::min(adv_floor, adv_value);
    out.extra["adversarial[" + format_double(lambda) + "]"] = adv_value;
    out.extra["adversarial_companion[" + format_double(lambda) + "]"] = adv_comp;

    parallel_for(static_cast<std::size_t>(cfg.trials), [&](std::size_t t) {
      const std::size_t idx = li * static_cast<std::size_t>(cfg.trials) + t;
      TrialRow& row = out.rows[idx];
      row.trial = static_cast<long long>(idx);
      row.seed = trial_key(cfg.seed, 0x1ACAull, idx);
      Rng haar_rng = Rng::stream(cfg.seed, 0xBA5Eull, idx);
      const Subspace qr =
          random_subspace(grid, std::min<Eigen::Index>(n, grid), haar_rng);
      SolverOptions opts;
      opts.seed = row.seed;
      const MeanDistanceResult v = mean_distance(sys, qr, metric, 1.0, opts);
      SolverOptions opts2;
      opts2.seed = row.seed ^ 0x9E3779B97F4A7C15ull;
      const MeanDistanceResult w = mean_distance(sys, qr, companion, 1.0, opts2);
      row.value = v.value;
      row.aux = {lambda, w.value, adv_value, adv_comp,
                 v.upper_bound_only ? 1.0 : 0.0};
    });
  }
  out.extra["floor_adversarial"] = adv_floor;
  out.extra["floor_random"] = raw_min(out.rows);
  return out;
}

EngineOutput run_gluskin(const ExperimentConfig& cfg,
                         const RandomVectorModel* model_override,
                         const FunctionSystem* system_override) {
  const Eigen::Index dim = static_cast<Eigen::Index>(cfg.get_int("dim"));
  const Eigen::Index n = static_cast<Eigen::Index>(cfg.get_int("n"));
  const double p = cfg.get_real("p");
  RandomVectorModel model;
  if (model_override) {
    model = *model_override;
  } else if (system_override) {
    model = RandomVectorModel::uniform_from_columns(system_override->samples);
  } else {
    model = make_model(cfg, cfg.get_string("model", "signs_scaled"), dim);
  }
  if (model.dim != dim) bad_param(cfg, "dim", "does not match the model dimension");
  const double scale = std::pow(static_cast<double>(dim), 1.0 / p);

  EngineOutput out;
  out.aux_names = {"certificate"};
  out.rows.resize(static_cast<std::size_t>(cfg.trials));
  parallel_for(static_cast<std::size_t>(cfg.trials), [&](std::size_t t) {
    TrialRow& row = out.rows[t];
    row.trial = static_cast<long long>(t);
    row.seed = trial_key(cfg.seed, 0x61A5ull, t);
    const Eigen::VectorXd xi = sample_one(model, cfg.seed, t);
    Rng haar_rng = Rng::stream(cfg.seed, 0x61A0ull, t);
    const Subspace q = random_subspace(dim, n, haar_rng);
    const double cert = gluskin_certificate(xi, q, p);
    row.value = cert / scale;
    row.aux = {cert};
  });

  std::vector<double> sorted;
  sorted.reserve(out.rows.size());
  for (const TrialRow& r : out.rows) sorted.push_back(r.value);
  std::sort(sorted.begin(), sorted.end());
  const auto quantile = [&](double frac) {
    const std::size_t last = sorted.size() - 1;
    const std::size_t idx = static_cast<std::size_t>(
        std::llround(frac * static_cast<double>(last)));
    return sorted[std::min(idx, last)];
  };
  out.extra["q10"] = quantile(0.10);
  out.extra["q25"] = quantile(0.25);
  out.extra["q50"] = quantile(0.50);
  out.extra["q75"] = quantile(0.75);
  out.extra["q90"] = quantile(0.90);
  return out;
}

EngineOutput run_sparse(const ExperimentConfig& cfg) {
  const Eigen::Index dim = static_cast<Eigen::Index>(cfg.get_int("dim"));
  const double p = cfg.get_real("p");
  const double eps = cfg.get_real("eps");
  Eigen::Index n = 0;
  if (cfg.has("n")) {
    n = static_cast<Eigen::Index>(cfg.get_int("n"));
  } else {
    const double expn = cfg.get_real("n_exponent");
    n = static_cast<Eigen::Index>(
        std::llround(std::pow(static_cast<double>(dim), expn)));
  }
  const SparseSimResult sim =
      sparse_nonrigidity_sim(p, dim, n, eps, cfg.trials, cfg.seed);

  EngineOutput out;
  out.rows.resize(sim.trial_values.size());
  for (std::size_t t = 0; t < sim.trial_values.size(); ++t) {
    TrialRow& row = out.rows[t];
    row.trial = static_cast<long long>(t);
    row.seed = trial_key(cfg.seed, 0x59A7ull, t);
    row.value = sim.trial_values[t];
  }
  out.extra["magnitude"] = sim.magnitude;
  out.extra["all_zero_events"] = static_cast<double>(sim.all_zero_events);
  out.extra["single_events"] = static_cast<double>(sim.single_events);
  out.extra["multi_events"] = static_cast<double>(sim.multi_events);
  out.extra["subspace_dim"] = static_cast<double>(n);
  return out;
}

double clamp_to_double(long double v) {
  const long double cap = static_cast<long double>(std::numeric_limits<double>::max());
  return static_cast<double>(std::min(v, cap));
}

EngineOutput run_walsh(const ExperimentConfig& cfg) {
  const int k = static_cast<int>(cfg.get_int("k"));
  const double lambda = cfg.get_real("lambda", 1.0);
  const bool exhaustive = cfg.get_int("exhaustive", 2 * k <= 20 ? 1 : 0) != 0;

  EngineOutput out;
  out.aux_names = {"core_row_error", "stderr"};
  WalshLowRankReport first;
  if (exhaustive) {
    const WalshLowRank w = walsh_lowrank(k, lambda);
    first = w.report();
    TrialRow row;
    row.trial = 0;
    row.seed = cfg.seed;
    row.value = first.measured_error;
    row.aux = {first.measured_core_row_error, 0.0};
    out.rows.push_back(row);
  } else {
    const long long samples = cfg.get_int("samples", 200000);
    out.rows.resize(static_cast<std::size_t>(cfg.trials));
    std::vector<WalshLowRankReport> reports(out.rows.size());
    parallel_for(out.rows.size(), [&](std::size_t t) {
      TrialRow& row = out.rows[t];
      row.trial = static_cast<long long>(t);
      row.seed = trial_key(cfg.seed, 0x3A15ull, t);
      const WalshLowRank w = walsh_lowrank(k, lambda, samples, row.seed);
      reports[t] = w.report();
      row.value = reports[t].measured_error;
      row.aux = {reports[t].measured_core_row_error,
                 reports[t].stderr_value.value_or(0.0)};
    });
    first = reports.front();
  }
  out.extra["predicted_error"] = first.predicted_error;
  out.extra["predicted_row_error"] = first.predicted_row_error;
  out.extra["degree"] = static_cast<double>(first.degree);
  out.extra["window_lo"] = static_cast<double>(first.window_lo);
  out.extra["window_hi"] = static_cast<double>(first.window_hi);
  out.extra["entries_checked"] = static_cast<double>(first.entries_checked);
  out.extra["rank_bound_core"] = clamp_to_double(first.rank_bound_core);
  out.extra["rank_bound_total"] = clamp_to_double(first.rank_bound_total);
  out.extra["hypothesis_satisfied"] = first.hypothesis_satisfied ? 1.0 : 0.0;
  return out;
}

EngineOutput run_dft(const ExperimentConfig& cfg) {
  const int k = static_cast<int>(cfg.get_int("k"));
  const double lambda = cfg.get_real("lambda", 1.0);
  const int s0 = static_cast<int>(cfg.get_int("s0"));
  const long long samples = cfg.get_int("samples", 200000);

  DftLowRank base(k, lambda, s0);
  if (2 * k <= 20) base.verify_tail_bound_exhaustive();
  const DftLowRankReport& head = base.report();

  EngineOutput out;
  out.aux_names = {"offwindow_fraction"};
  out.rows.resize(static_cast<std::size_t>(cfg.trials));
  // Sampling copies the construction per trial; the loop stays serial because
  // each measurement is already a bulk pass.
  for (std::size_t t = 0; t < out.rows.size(); ++t) {
    TrialRow& row = out.rows[t];
    row.trial = static_cast<long long>(t);
    row.seed = trial_key(cfg.seed, 0xD377ull, t);
    DftLowRank probe = base;
    probe.measure_sampled(samples, row.seed);
    row.value = probe.report().sampled_l0_error;
    row.aux = {probe.report().sampled_offwindow_fraction};
  }
  out.extra["uniform_tail_bound"] = head.uniform_tail_bound;
  out.extra["max_tail_error_checked"] = head.max_tail_error_checked;
  out.extra["tail_entries_checked"] = static_cast<double>(head.tail_entries_checked);
  out.extra["tail_bound_violated"] = head.tail_bound_violated ? 1.0 : 0.0;
  out.extra["rank_bound"] = clamp_to_double(head.rank_bound);
  out.extra["s0"] = static_cast<double>(s0);
  return out;
}

EngineOutput run_trig(const ExperimentConfig& cfg) {
  const std::int64_t dim = cfg.get_int("dim");
  const int m = static_cast<int>(cfg.get_int("m"));
  const double p = cfg.get_real("p", 0.5);
  const int kernel_m = static_cast<int>(cfg.get_int("kernel_m", m));

  const StepCoverSet cover = lambda_set(dim, m, cfg.seed ^ 0xC07Eull);
  const FejerKernel kern =
      fejer_kernel(kernel_m, std::max(64, 8 * kernel_m));

  EngineOutput out;
  out.aux_names = {"frequency", "substitution_residual", "spectrum_size", "step"};
  out.rows.resize(static_cast<std::size_t>(cfg.trials));
  parallel_for(out.rows.size(), [&](std::size_t t) {
    TrialRow& row = out.rows[t];
    row.trial = static_cast<long long>(t);
    row.seed = trial_key(cfg.seed, 0x7B16ull, t);
    const std::int64_t freq = static_cast<std::int64_t>(
        Rng::stream(cfg.seed, 0x7B17ull, t).next_u64() %
        static_cast<std::uint64_t>(dim));
    const TrigApprox ta = trig_approx(freq, cover, kern.polynomial, dim, p);
    row.value = ta.error;
    row.aux = {static_cast<double>(freq), ta.substitution_residual,
               static_cast<double>(ta.spectrum.size()),
               static_cast<double>(ta.step)};
  });
  out.extra["tau"] = cover.tau;
  out.extra["lambda_size"] = static_cast<double>(cover.lambda.size());
  out.extra["bound_3tau_n"] = 3.0 * cover.tau * static_cast<double>(dim);
  out.extra["step_budget"] = static_cast<double>(cover.s);
  out.extra["retries"] = static_cast<double>(cover.retries_used);
  return out;
}

EngineOutput dispatch(const ExperimentConfig& cfg,
                      const RandomVectorModel* model_override,
                      const FunctionSystem* system_override) {
  switch (cfg.kind) {
    case ExperimentKind::L1Rigidity: return run_l1_rigidity(cfg, model_override);
    case ExperimentKind::L0Rigidity: return run_l0_rigidity(cfg, model_override);
    case ExperimentKind::RandomMatrixL0: return run_random_matrix_l0(cfg);
    case ExperimentKind::Lacunary: return run_lacunary(cfg);
    case ExperimentKind::GluskinP12:
      return run_gluskin(cfg, model_override, system_override);
    case ExperimentKind::SparseP: return run_sparse(cfg);
    case ExperimentKind::WalshApprox: return run_walsh(cfg);
    case ExperimentKind::DftApprox: return run_dft(cfg);
    case ExperimentKind::TrigWidth: return run_trig(cfg);
  }
  throw std::logic_error("run: unreachable experiment kind");
}

RunRecord run_with(const ExperimentConfig& cfg,
                   const RandomVectorModel* model_override,
                   const FunctionSystem* system_override) {
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();
  EngineOutput eo = dispatch(cfg, model_override, system_override);
  const auto t1 = std::chrono::steady_clock::now();

  RunRecord rec;
  rec.config = cfg;
  rec.aux_names = std::move(eo.aux_names);
  rec.rows = std::move(eo.rows);
  rec.wall_seconds = std::chrono::duration<double>(t1 - t0).count();
  rec.version = kVersion;

  long double mean = 0.0L;
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (const TrialRow& r : rec.rows) {
    mean += r.value;
    lo = std::min(lo, r.value);
    hi = std::max(hi, r.value);
  }
  const std::size_t count = rec.rows.size();
  rec.summary.mean = count > 0 ? static_cast<double>(mean / count) : 0.0;
  long double var = 0.0L;
  for (const TrialRow& r : rec.rows)
    var += (r.value - rec.summary.mean) * (r.value - rec.summary.mean);
  rec.summary.stderr_value =
      count > 1 ? std::sqrt(static_cast<double>(var) /
                            (static_cast<double>(count - 1) *
                             static_cast<double>(count)))
                : 0.0;
  rec.summary.min = count > 0 ? lo : 0.0;
  rec.summary.max = count > 0 ? hi : 0.0;
  rec.summary.extra = std::move(eo.extra);
  return rec;
}

void require_params(const ExperimentConfig& cfg,
                    std::initializer_list<const char*> keys) {
  for (const char* key : keys)
    if (!cfg.has(key))
      throw std::invalid_argument(to_string(cfg.kind) +
                                  ": missing required param '" + std::string(key) +
                                  "'");
}

}  // namespace

// ---------------------------------------------------------------------------
// Config surface.

std::string to_string(ExperimentKind kind) {
  for (const auto& [k, name] : kKindNames)
    if (k == kind) return name;
  throw std::logic_error("to_string: unknown experiment kind");
}

ExperimentKind experiment_kind_from_string(const std::string& name) {
  for (const auto& [k, kname] : kKindNames)
    if (name == kname) return k;
  throw std::invalid_argument("unknown experiment kind '" + name + "'");
}

bool ExperimentConfig::has(const std::string& key) const {
  return params.find(key) != params.end();
}

std::string ExperimentConfig::get_string(const std::string& key) const {
  const auto it = params.find(key);
  if (it == params.end())
    throw std::invalid_argument(to_string(kind) + ": missing required param '" +
                                key + "'");
  return it->second;
}

std::string ExperimentConfig::get_string(const std::string& key,
                                         const std::string& fallback) const {
  const auto it = params.find(key);
  return it == params.end() ? fallback : it->second;
}

long long ExperimentConfig::get_int(const std::string& key) const {
  return parse_int_strict(*this, key, get_string(key));
}

long long ExperimentConfig::get_int(const std::string& key, long long fallback) const {
  const auto it = params.find(key);
  return it == params.end() ? fallback : parse_int_strict(*this, key, it->second);
}

double ExperimentConfig::get_real(const std::string& key) const {
  return parse_real_strict(*this, key, get_string(key));
}

double ExperimentConfig::get_real(const std::string& key, double fallback) const {
  const auto it = params.find(key);
  return it == params.end() ? fallback : parse_real_strict(*this, key, it->second);
}

std::vector<double> ExperimentConfig::get_real_list(const std::string& key) const {
  const std::string raw = get_string(key);
  std::vector<double> out;
  std::size_t start = 0;
  while (start <= raw.size()) {
    const std::size_t comma = raw.find(',', start);
    const std::string piece =
        raw.substr(start, comma == std::string::npos ? std::string::npos
                                                     : comma - start);
    if (!trim(piece).empty()) out.push_back(parse_real_strict(*this, key, piece));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  if (out.empty()) bad_param(*this, key, "must hold at least one number");
  return out;
}

void ExperimentConfig::validate() const {
  if (trials < 1)
    throw std::invalid_argument(to_string(kind) + ": trials must be >= 1");
  switch (kind) {
    case ExperimentKind::L1Rigidity:
    case ExperimentKind::L0Rigidity: {
      require_params(*this, {"dim", "n"});
      const long long dim = get_int("dim");
      const long long n = get_int("n");
      if (dim < 1) bad_param(*this, "dim", "must be >= 1");
      if (n < 0 || n > dim) bad_param(*this, "n", "must lie in [0, dim]");
      parse_strategy(*this, get_string("strategy", "altmin"));
      if (kind == ExperimentKind::L0Rigidity) {
        require_params(*this, {"delta"});
        if (get_real("delta") < 0.0) bad_param(*this, "delta", "must be >= 0");
        if (has("eps")) {
          const double eps = get_real("eps");
          if (!(eps > 0.0 && eps <= 1.0)) bad_param(*this, "eps", "must be in (0, 1]");
        }
        if (has("tau")) {
          const double tau = get_real("tau");
          if (!(tau > 0.0 && tau <= 1.0)) bad_param(*this, "tau", "must be in (0, 1]");
        }
      }
      break;
    }
    case ExperimentKind::RandomMatrixL0: {
      require_params(*this, {"dim", "rank_fraction"});
      if (get_int("dim") < 1) bad_param(*this, "dim", "must be >= 1");
      const double c = get_real("rank_fraction");
      if (!(c >= 0.0 && c <= 1.0)) bad_param(*this, "rank_fraction", "must be in [0, 1]");
      break;
    }
    case ExperimentKind::Lacunary: {
      require_params(*this, {"lambda", "count", "n"});
      const std::vector<double> lambdas = get_real_list("lambda");
      const long long count = get_int("count");
      if (count < 1 || count > kMaxMaterializedEntries / 64)
        bad_param(*this, "count", "must lie in [1, 2^20]");
      if (get_int("n") < 0) bad_param(*this, "n", "must be >= 0");
      lacunary_metric(*this, get_string("metric", "l1"));
      const std::string profile = get_string("profile", "cos");
      if (profile != "cos") bad_param(*this, "profile", "must be 'cos'");
      for (const double lambda : lambdas) {
        if (!(lambda > 1.0)) bad_param(*this, "lambda", "entries must be > 1");
        const std::int64_t top = lacunary_top_frequency(lambda, static_cast<int>(count));
        if (top > kMaxMaterializedEntries / (4 * count))
          bad_param(*this, "lambda",
                    "lambda " + format_double(lambda) + " with count " +
                        std::to_string(count) +
                        " needs a profile grid past the 2^26 entry cap");
      }
      break;
    }
    case ExperimentKind::GluskinP12: {
      require_params(*this, {"dim", "n", "p"});
      const long long dim = get_int("dim");
      const long long n = get_int("n");
      if (dim < 1) bad_param(*this, "dim", "must be >= 1");
      if (n < 0 || n > dim) bad_param(*this, "n", "must lie in [0, dim]");
      const double p = get_real("p");
      if (!(p > 1.0 && p <= 2.0)) bad_param(*this, "p", "must lie in (1, 2]");
      break;
    }
    case ExperimentKind::SparseP: {
      require_params(*this, {"dim", "p", "eps"});
      const long long dim = get_int("dim");
      if (dim < 1) bad_param(*this, "dim", "must be >= 1");
      if (!(get_real("p") > 2.0)) bad_param(*this, "p", "must be > 2");
      const double eps = get_real("eps");
      if (!(eps >= 0.0 && eps <= 1.0)) bad_param(*this, "eps", "must be in [0, 1]");
      if (!has("n") && !has("n_exponent"))
        throw std::invalid_argument(
            to_string(kind) + ": missing required param 'n' (or 'n_exponent')");
      const long long n =
          has("n") ? get_int("n")
                   : std::llround(std::pow(static_cast<double>(dim),
                                           get_real("n_exponent")));
      if (n < 0 || n >= dim) bad_param(*this, "n", "must lie in [0, dim)");
      break;
    }
    case ExperimentKind::WalshApprox: {
      require_params(*this, {"k"});
      const long long k = get_int("k");
      if (k < 1 || k > 62) bad_param(*this, "k", "must lie in [1, 62]");
      if (!(get_real("lambda", 1.0) > 0.0)) bad_param(*this, "lambda", "must be > 0");
      if (get_int("samples", 200000) < 1) bad_param(*this, "samples", "must be >= 1");
      const bool exhaustive = get_int("exhaustive", 2 * k <= 20 ? 1 : 0) != 0;
      if (exhaustive && 2 * k > 26)
        bad_param(*this, "exhaustive", "needs 2^(2k) <= 2^26; sample instead");
      if (exhaustive && trials != 1)
        bad_param(*this, "exhaustive", "mode computes one exact row; set trials = 1");
      break;
    }
    case ExperimentKind::DftApprox: {
      require_params(*this, {"k", "s0"});
      const long long k = get_int("k");
      if (k < 1 || k > 30) bad_param(*this, "k", "must lie in [1, 30]");
      const long long s0 = get_int("s0");
      if (s0 < 1 || s0 > k) bad_param(*this, "s0", "must lie in [1, k]");
      if (!(get_real("lambda", 1.0) > 0.0)) bad_param(*this, "lambda", "must be > 0");
      if (get_int("samples", 200000) < 1) bad_param(*this, "samples", "must be >= 1");
      break;
    }
    case ExperimentKind::TrigWidth: {
      require_params(*this, {"dim", "m"});
      const long long m = get_int("m");
      if (m < 1) bad_param(*this, "m", "must be >= 1");
      const long long dim = get_int("dim");
      if (dim < 16 * m * m * m * m)
        bad_param(*this, "dim", "must be >= 16 m^4");
      if (!(get_real("p", 0.5) > 0.0)) bad_param(*this, "p", "must be > 0");
      const long long kernel_m = get_int("kernel_m", m);
      if (kernel_m < 1 || kernel_m - 1 > m)
        bad_param(*this, "kernel_m",
                  "must satisfy 1 <= kernel_m <= m + 1 so the spectrum fits the cover");
      break;
    }
  }
}

ExperimentConfig parse_experiment_config(const std::string& text) {
  ExperimentConfig cfg;
  bool have_kind = false;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    // Strip a comment that starts outside quotes.
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
      if (line[i] == '"') quoted = !quoted;
      if (line[i] == '#' && !quoted) {
        line.resize(i);
        break;
      }
    }
    const std::string stripped = trim(line);
    if (stripped.empty()) continue;
    const std::size_t eq = stripped.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(line_no) +
                                  ": expected key = value");
    const std::string key = trim(stripped.substr(0, eq));
    std::string value = trim(stripped.substr(eq + 1));
    if (key.empty())
      throw std::invalid_argument("config line " + std::to_string(line_no) +
                                  ": empty key");
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"')
      value = value.substr(1, value.size() - 2);
    if (key == "kind") {
      cfg.kind = experiment_kind_from_string(value);
      have_kind = true;
    } else if (key == "seed") {
      char* end = nullptr;
      cfg.seed = std::strtoull(value.c_str(), &end, 10);
      if (end != value.c_str() + value.size())
        throw std::invalid_argument("config: seed must be an unsigned integer");
    } else if (key == "trials") {
      char* end = nullptr;
      const long long t = std::strtoll(value.c_str(), &end, 10);
      if (end != value.c_str() + value.size() || t < 1 ||
          t > std::numeric_limits<int>::max())
        throw std::invalid_argument("config: trials must be a positive integer");
      cfg.trials = static_cast<int>(t);
    } else if (key == "output") {
      cfg.output_path = value;
    } else {
      cfg.params[key] = value;
    }
  }
  if (!have_kind) throw std::invalid_argument("config: missing required key 'kind'");
  return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open config file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_experiment_config(buf.str());
}

std::string serialize_experiment_config(const ExperimentConfig& config) {
  std::ostringstream out;
  const auto emit = [&out](const std::string& key, const std::string& value) {
    const bool quote =
        value.empty() || value.find_first_of(" \t#\"") != std::string::npos;
    out << key << " = ";
    if (quote)
      out << '"' << value << '"';
    else
      out << value;
    out << '\n';
  };
  emit("kind", to_string(config.kind));
  out << "seed = " << config.seed << '\n';
  out << "trials = " << config.trials << '\n';
  if (!config.output_path.empty()) emit("output", config.output_path);
  for (const auto& [key, value] : config.params) emit(key, value);
  return out.str();
}

// ---------------------------------------------------------------------------
// Records.

std::string RunRecord::csv() const {
  std::size_t aux_count = aux_names.size();
  for (const TrialRow& r : rows) aux_count = std::max(aux_count, r.aux.size());
  std::ostringstream out;
  out << "trial,seed,value";
  for (std::size_t i = 0; i < aux_count; ++i) out << ",aux" << (i + 1);
  out << '\n';
  for (const TrialRow& r : rows) {
    out << r.trial << ',' << r.seed << ',' << format_double(r.value);
    for (std::size_t i = 0; i < aux_count; ++i)
      out << ',' << format_double(i < r.aux.size() ? r.aux[i] : 0.0);
    out << '\n';
  }
  return out.str();
}

std::string RunRecord::summary_json() const {
  nlohmann::json j;
  j["kind"] = to_string(config.kind);
  j["version"] = version;
  j["seed"] = config.seed;
  j["trials"] = config.trials;
  if (!config.output_path.empty()) j["output"] = config.output_path;
  j["params"] = config.params;
  j["aux_names"] = aux_names;
  j["rows"] = rows.size();
  j["summary"]["mean"] = summary.mean;
  j["summary"]["stderr"] = summary.stderr_value;
  j["summary"]["min"] = summary.min;
  j["summary"]["max"] = summary.max;
  if (!summary.extra.empty()) j["summary"]["extra"] = summary.extra;
  j["wall_seconds"] = wall_seconds;
  return j.dump(2) + "\n";
}

RunRecord run(const ExperimentConfig& config) {
  return run_with(config, nullptr, nullptr);
}

RunRecord replay(const RunRecord& record) {
  RunRecord fresh = run(record.config);
  if (fresh.rows.size() != record.rows.size())
    throw std::runtime_error("replay mismatch: row count " +
                             std::to_string(fresh.rows.size()) + " vs " +
                             std::to_string(record.rows.size()));
  const auto bits = [](double v) { return std::bit_cast<std::uint64_t>(v); };
  for (std::size_t i = 0; i < fresh.rows.size(); ++i) {
    const TrialRow& a = fresh.rows[i];
    const TrialRow& b = record.rows[i];
    bool same = a.trial == b.trial && a.seed == b.seed &&
                bits(a.value) == bits(b.value) && a.aux.size() == b.aux.size();
    for (std::size_t k = 0; same && k < a.aux.size(); ++k)
      same = bits(a.aux[k]) == bits(b.aux[k]);
    if (!same)
      throw std::runtime_error("replay mismatch at trial " + std::to_string(i));
  }
  return fresh;
}

// ---------------------------------------------------------------------------
// Separation helpers.

double empirical_l0_separation(const std::vector<double>& samples) {
  if (samples.empty())
    throw std::invalid_argument("empirical_l0_separation: empty sample");
  const auto [lo_it, hi_it] = std::minmax_element(samples.begin(), samples.end());
  const double lo = *lo_it;
  const double hi = *hi_it;
  Eigen::VectorXd entries(static_cast<Eigen::Index>(samples.size()));
  const MetricSpec m = MetricSpec::ky_fan_l0();
  double best = std::numeric_limits<double>::infinity();
  for (int g = 0; g < 257; ++g) {
    const double c = lo + (hi - lo) * static_cast<double>(g) / 256.0;
    for (std::size_t i = 0; i < samples.size(); ++i)
      entries[static_cast<Eigen::Index>(i)] = samples[i] - c;
    best = std::min(best, norm(WeightedVector::uniform(entries), m));
    if (hi == lo) break;
  }
  return best;
}

std::pair<double, double> quantile_separation(std::vector<double> samples,
                                              double eps, double tau) {
  if (samples.empty())
    throw std::invalid_argument("quantile_separation: empty sample");
  if (!(eps > 0.0 && eps <= 1.0))
    throw std::invalid_argument("quantile_separation: eps must be in (0, 1]");
  if (!(tau > 0.0 && tau <= 1.0))
    throw std::invalid_argument("quantile_separation: tau must be in (0, 1]");
  const double separation = empirical_l0_separation(samples);
  if (separation + 1e-12 < eps)
    throw std::domain_error(
        "quantile_separation: separation hypothesis fails: empirical value " +
        format_double(separation) + " < eps " + format_double(eps));

  std::sort(samples.begin(), samples.end());
  const std::size_t count = samples.size();
  const std::size_t tail = std::max<std::size_t>(
      1, static_cast<std::size_t>(
             std::ceil(static_cast<double>(count) * eps / 3.0 - 1e-12)));
  const double q_lo = samples[tail - 1];
  const double q_hi = samples[count - tail];
  if (!(q_hi > q_lo))
    throw std::domain_error("quantile_separation: quantile span is degenerate");

  const int segments = static_cast<int>(std::ceil(1.0 / tau - 1e-12));
  const double span = q_hi - q_lo;
  const double mid = 0.5 * (q_lo + q_hi);
  double best_a = q_lo, best_b = q_hi;
  double best_mass = std::numeric_limits<double>::infinity();
  double best_dist = std::numeric_limits<double>::infinity();
  for (int i = 0; i < segments; ++i) {
    const double a = q_lo + span * static_cast<double>(i) / segments;
    const double b = q_lo + span * static_cast<double>(i + 1) / segments;
    const auto first = std::upper_bound(samples.begin(), samples.end(), a);
    const auto last = std::lower_bound(samples.begin(), samples.end(), b);
    const double mass =
        static_cast<double>(std::max<std::ptrdiff_t>(0, last - first)) /
        static_cast<double>(count);
    const double dist = std::abs(0.5 * (a + b) - mid);
    if (mass < best_mass || (mass == best_mass && dist < best_dist)) {
      best_mass = mass;
      best_dist = dist;
      best_a = a;
      best_b = b;
    }
  }

  // All four clauses, re-checked on the empirical measure.
  const double p_le_a =
      static_cast<double>(std::upper_bound(samples.begin(), samples.end(), best_a) -
                          samples.begin()) /
      static_cast<double>(count);
  const double p_ge_b =
      static_cast<double>(samples.end() -
                          std::lower_bound(samples.begin(), samples.end(), best_b)) /
      static_cast<double>(count);
  if (p_le_a + 1e-12 < eps / 3.0 || p_ge_b + 1e-12 < eps / 3.0 ||
      best_mass > tau + 1e-12 || best_b - best_a + 1e-12 < tau * eps / 2.0)
    throw std::logic_error("quantile_separation: clause re-check failed");
  return {best_a, best_b};
}

// ---------------------------------------------------------------------------
// Direct entry points.

RunRecord l1_rigidity_experiment(const RandomVectorModel& model, Eigen::Index n,
                                 int trials, SubspaceStrategy strategy,
                                 std::uint64_t seed) {
  ExperimentConfig cfg;
  cfg.kind = ExperimentKind::L1Rigidity;
  cfg.seed = seed;
  cfg.trials = trials;
  cfg.params["dim"] = std::to_string(model.dim);
  cfg.params["n"] = std::to_string(n);
  cfg.params["model"] = describe_model(model);
  cfg.params["strategy"] = strategy_name(strategy);
  return run_with(cfg, &model, nullptr);
}

RunRecord l0_rigidity_experiment(const RandomVectorModel& model, Eigen::Index n,
                                 double delta, int trials, std::uint64_t seed) {
  ExperimentConfig cfg;
  cfg.kind = ExperimentKind::L0Rigidity;
  cfg.seed = seed;
  cfg.trials = trials;
  cfg.params["dim"] = std::to_string(model.dim);
  cfg.params["n"] = std::to_string(n);
  cfg.params["delta"] = format_double(delta);
  cfg.params["model"] = describe_model(model);
  return run_with(cfg, &model, nullptr);
}

RunRecord random_matrix_l0_experiment(Eigen::Index dim, double rank_fraction,
                                      int trials, std::uint64_t seed) {
  ExperimentConfig cfg;
  cfg.kind = ExperimentKind::RandomMatrixL0;
  cfg.seed = seed;
  cfg.trials = trials;
  cfg.params["dim"] = std::to_string(dim);
  cfg.params["rank_fraction"] = format_double(rank_fraction);
  return run_with(cfg, nullptr, nullptr);
}

RunRecord lacunary_experiment(const std::string& profile,
                              const std::vector<double>& lambdas, int count,
                              Eigen::Index n, const MetricSpec& metric,
                              int trials, std::uint64_t seed) {
  ExperimentConfig cfg;
  cfg.kind = ExperimentKind::Lacunary;
  cfg.seed = seed;
  cfg.trials = trials;
  cfg.params["profile"] = profile;
  std::string joined;
  for (const double lambda : lambdas) {
    if (!joined.empty()) joined += ',';
    joined += format_double(lambda);
  }
  cfg.params["lambda"] = joined;
  cfg.params["count"] = std::to_string(count);
  cfg.params["n"] = std::to_string(n);
  if (metric.kind == MetricKind::Lp && metric.p == 1.0)
    cfg.params["metric"] = "l1";
  else if (metric.kind == MetricKind::Lp && metric.p == 2.0)
    cfg.params["metric"] = "l2";
  else if (metric.kind == MetricKind::KyFanL0)
    cfg.params["metric"] = "kyfan";
  else
    throw std::invalid_argument("lacunary: metric must be L_1, L_2 or Ky-Fan");
  return run_with(cfg, nullptr, nullptr);
}

RunRecord gluskin_experiment(const RandomVectorModel& model, double p,
                             Eigen::Index n, int trials, std::uint64_t seed) {
  ExperimentConfig cfg;
  cfg.kind = ExperimentKind::GluskinP12;
  cfg.seed = seed;
  cfg.trials = trials;
  cfg.params["dim"] = std::to_string(model.dim);
  cfg.params["n"] = std::to_string(n);
  cfg.params["p"] = format_double(p);
  cfg.params["model"] = describe_model(model);
  return run_with(cfg, &model, nullptr);
}

RunRecord gluskin_experiment(const FunctionSystem& x, double p, Eigen::Index n,
                             int trials, std::uint64_t seed) {
  ExperimentConfig cfg;
  cfg.kind = ExperimentKind::GluskinP12;
  cfg.seed = seed;
  cfg.trials = trials;
  cfg.params["dim"] = std::to_string(x.points());
  cfg.params["n"] = std::to_string(n);
  cfg.params["p"] = format_double(p);
  cfg.params["model"] = "system_columns";
  return run_with(cfg, nullptr, &x);
}

}  // namespace widthlab
