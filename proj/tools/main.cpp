// widthlab: command-line front end over the core library. Subcommands
// generate systems, compute distances and widths, run the explicit low-rank
// constructions, drive experiment configs, and format results. Every run
// that writes an artifact also writes `<artifact>.manifest.json` echoing the
// fully resolved parameters, so any result file can be traced to its inputs.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "widthlab/constructions.hpp"
#include "widthlab/experiments.hpp"
#include "widthlab/io.hpp"
#include "widthlab/metric.hpp"
#include "widthlab/parallel.hpp"
#include "widthlab/subspace.hpp"
#include "widthlab/systems.hpp"
#include "widthlab/widths.hpp"

namespace {

using widthlab::format_double;
using ordered_json = nlohmann::ordered_json;

struct CommonArgs {
  std::uint64_t seed = 0;
  int threads = 0;
  std::string out;
  std::string format = "csv";
};

void add_common(CLI::App* cmd, CommonArgs& args, bool with_format = false) {
  cmd->add_option("--seed", args.seed, "RNG seed (u64)")->capture_default_str();
  cmd->add_option("--threads", args.threads, "worker cap, 0 = all hardware threads")
      ->capture_default_str();
  cmd->add_option("--out", args.out, "output path; results print to stdout without it");
  if (with_format)
    cmd->add_option("--format", args.format, "output format")
        ->check(CLI::IsMember({"csv", "json", "svg"}))
        ->capture_default_str();
}

struct MetricArgs {
  std::string name = "l2";
  double p = 0.0;
  bool counting = false;
  bool was_set = false;
};

void add_metric(CLI::App* cmd, MetricArgs& args) {
  cmd->add_option("--metric", args.name, "metric: l1, l2, lp, linf, l0, hamming")
      ->check(CLI::IsMember({"l1", "l2", "lp", "linf", "l0", "hamming"}))
      ->capture_default_str();
  cmd->add_option("--p", args.p, "exponent for --metric lp");
  cmd->add_flag("--counting", args.counting, "plain ell_p sums instead of normalized L_p");
}

widthlab::MetricSpec make_metric(const MetricArgs& args) {
  using widthlab::MetricSpec;
  if (args.name == "linf") return MetricSpec::linf();
  if (args.name == "l0") return MetricSpec::ky_fan_l0(1e-12);
  if (args.name == "hamming") return MetricSpec::hamming(1e-12);
  double p = 2.0;
  if (args.name == "l1") p = 1.0;
  if (args.name == "lp") {
    if (args.p <= 0.0)
      throw std::invalid_argument("--metric lp needs --p with a positive exponent");
    p = args.p;
  }
  return args.counting ? MetricSpec::lp_counting(p) : MetricSpec::lp(p);
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << text;
  if (!out) throw std::runtime_error("short write to '" + path + "'");
}

void write_manifest(const std::string& artifact, const std::string& subcommand,
                    const ordered_json& params, const CommonArgs& common) {
  ordered_json m;
  m["tool"] = "widthlab";
  m["version"] = widthlab::kVersion;
  m["subcommand"] = subcommand;
  m["parameters"] = params;
  m["seed"] = common.seed;
  m["threads"] = common.threads;
  m["artifact"] = artifact;
  write_text(artifact + ".manifest.json", m.dump(2) + "\n");
}

// Emit either the bare value on stdout or, with --out, a JSON report plus its
// manifest.
void emit_result(const std::string& subcommand, const CommonArgs& common,
                 const ordered_json& params, const ordered_json& report,
                 double headline) {
  if (common.out.empty()) {
    std::cout << format_double(headline) << "\n";
    return;
  }
  write_text(common.out, report.dump(2) + "\n");
  write_manifest(common.out, subcommand, params, common);
  std::cout << "wrote " << common.out << "\n";
}

const char* status_name(widthlab::DistanceStatus s) {
  switch (s) {
    case widthlab::DistanceStatus::Exact: return "exact";
    case widthlab::DistanceStatus::ConvexConverged: return "convex_converged";
    case widthlab::DistanceStatus::HeuristicUpperBound: return "heuristic_upper_bound";
  }
  return "unknown";
}

widthlab::RandomVectorModel named_model(const std::string& name, Eigen::Index dim) {
  using widthlab::OneDimLaw;
  using widthlab::RandomVectorModel;
  if (name == "rademacher") return RandomVectorModel::random_signs(dim);
  if (name == "gaussian")
    return RandomVectorModel::independent(dim, {OneDimLaw::gaussian(0.0, 1.0)});
  if (name == "uniform")
    return RandomVectorModel::independent(dim, {OneDimLaw::uniform(-1.0, 1.0)});
  if (name == "signs_scaled")
    return RandomVectorModel::independent(
        dim, {OneDimLaw::three_point(1.0, 1.0 / std::sqrt(static_cast<double>(dim)))});
  throw std::invalid_argument("unknown model '" + name +
                              "'; expected rademacher/gaussian/uniform/signs_scaled");
}

widthlab::FunctionSystem load_system(const std::string& path) {
  const widthlab::LoadedMatrix m = widthlab::load_wlab(path);
  if (m.is_complex())
    throw std::invalid_argument("'" + path + "' holds complex data; this command needs a real system");
  return widthlab::FunctionSystem::from_samples(m.real);
}

// ---------------------------------------------------------------------------
// CSV helpers shared by `experiment replay` and `report --format svg`.

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      cells.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  cells.push_back(cur);
  return cells;
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

CsvTable parse_csv(const std::string& text) {
  CsvTable t;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    if (t.header.empty())
      t.header = split_csv_line(line);
    else
      t.rows.push_back(split_csv_line(line));
  }
  if (t.header.empty()) throw std::invalid_argument("CSV input has no header row");
  return t;
}

double cell_to_double(const std::string& s, const std::string& what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw std::invalid_argument("CSV " + what + " is not a number: '" + s + "'");
  }
}

// ---------------------------------------------------------------------------
// gen: draw a random system or materialize a structured one.

struct GenArgs {
  CommonArgs common;
  std::string model = "rademacher";
  Eigen::Index dim = 0;
  Eigen::Index count = 0;
  int k = 0;
};

int run_gen(const GenArgs& a) {
  if (a.common.out.empty()) throw std::invalid_argument("gen needs --out");
  ordered_json params;
  params["model"] = a.model;
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
  if (a.model == "walsh") {
    if (a.k < 1) throw std::invalid_argument("gen --model walsh needs --k >= 1");
    const widthlab::FunctionSystem sys = widthlab::walsh_system(a.k);
    widthlab::save_wlab(a.common.out, sys.samples, /*as_int8=*/true);
    params["k"] = a.k;
    rows = sys.points();
    cols = sys.size();
  } else if (a.model == "dft") {
    if (a.dim < 1) throw std::invalid_argument("gen --model dft needs --dim >= 1");
    const widthlab::ComplexFunctionSystem sys = widthlab::dft_system(a.dim);
    widthlab::save_wlab(a.common.out, sys.samples);
    params["dim"] = a.dim;
    rows = sys.points();
    cols = sys.size();
  } else {
    if (a.dim < 1 || a.count < 1)
      throw std::invalid_argument("gen needs --dim and --count for random models");
    const widthlab::RandomVectorModel model = named_model(a.model, a.dim);
    // Draw t is substream (seed, t): column order is reproducible and
    // independent of --threads.
    const Eigen::MatrixXd draws =
        widthlab::sample(model, static_cast<int>(a.count), a.common.seed);
    const Eigen::MatrixXd columns = draws.transpose();
    widthlab::save_wlab(a.common.out, columns);
    params["dim"] = a.dim;
    params["count"] = a.count;
    rows = a.dim;
    cols = a.count;
  }
  write_manifest(a.common.out, "gen", params, a.common);
  std::cout << "wrote " << a.common.out << " (" << rows << "x" << cols << ")\n";
  return 0;
}

// ---------------------------------------------------------------------------
// dist: distance from one system column (or a model draw) to a subspace.

struct DistArgs {
  CommonArgs common;
  MetricArgs metric;
  std::string input;
  std::string model;
  std::string subspace_path;
  Eigen::Index dim = 0;
  Eigen::Index index = 0;
  Eigen::Index n = -1;
  bool mean = false;
  double power = 1.0;
};

int run_dist(const DistArgs& a) {
  const widthlab::MetricSpec metric = make_metric(a.metric);
  std::optional<widthlab::FunctionSystem> sys;
  Eigen::VectorXd x;
  if (!a.input.empty()) {
    sys = load_system(a.input);
    if (a.index < 0 || a.index >= sys->size())
      throw std::invalid_argument("--index out of range for '" + a.input + "'");
    x = sys->samples.col(a.index);
  } else if (!a.model.empty()) {
    if (a.dim < 1) throw std::invalid_argument("dist --model needs --dim");
    x = widthlab::sample_one(named_model(a.model, a.dim), a.common.seed, 0);
  } else {
    throw std::invalid_argument("dist needs --input or --model");
  }

  widthlab::Subspace q;
  if (!a.subspace_path.empty()) {
    const widthlab::LoadedMatrix m = widthlab::load_wlab(a.subspace_path);
    if (m.is_complex()) throw std::invalid_argument("subspace file must be real");
    q = widthlab::Subspace::from_columns(m.real);
  } else if (a.n >= 0) {
    q = widthlab::random_subspace(x.size(), a.n, widthlab::Rng::stream(a.common.seed, 0x5B5BULL).next_u64());
  } else {
    throw std::invalid_argument("dist needs --subspace or --n");
  }
  if (q.ambient_dim() != x.size())
    throw std::invalid_argument("subspace ambient dimension does not match the data");

  widthlab::SolverOptions opts;
  opts.seed = a.common.seed;

  ordered_json params;
  params["metric"] = metric.describe();
  params["input"] = a.input;
  params["model"] = a.model;
  params["index"] = a.index;
  params["subspace"] = a.subspace_path.empty() ? ("haar:" + std::to_string(q.dim()))
                                               : a.subspace_path;
  params["mean"] = a.mean;

  ordered_json report;
  report["metric"] = metric.describe();
  report["ambient_dim"] = q.ambient_dim();
  report["subspace_dim"] = q.dim();
  double headline = 0.0;
  if (a.mean) {
    if (!sys) throw std::invalid_argument("--mean needs --input (a whole system)");
    params["power"] = a.power;
    const widthlab::MeanDistanceResult r =
        widthlab::mean_distance(*sys, q, metric, a.power, opts);
    headline = r.value;
    report["value"] = r.value;
    report["power"] = a.power;
    report["upper_bound_only"] = r.upper_bound_only;
  } else {
    const widthlab::DistanceResult r = widthlab::distance(x, q, metric, {}, opts);
    headline = r.value;
    report["value"] = r.value;
    report["status"] = status_name(r.status);
    report["gap"] = r.gap;
    if (r.certificate) report["dual_lower_bound"] = r.value - r.gap;
  }
  emit_result("dist", a.common, params, report, headline);
  return 0;
}

// ---------------------------------------------------------------------------
// width: average widths of a system or a model law.

struct WidthArgs {
  CommonArgs common;
  MetricArgs metric;
  std::string method;
  std::string input;
  std::string model;
  Eigen::Index dim = 0;
  Eigen::Index count = 0;
  Eigen::Index n = -1;
  Eigen::Index sweep = -1;
  int trials = 16;
};

widthlab::WidthResult width_once(const WidthArgs& a, const widthlab::MetricSpec& metric,
                                 const std::optional<widthlab::FunctionSystem>& sys,
                                 Eigen::Index n) {
  using widthlab::SubspaceStrategy;
  if (a.method == "exact-l2") {
    if (!sys) throw std::invalid_argument("width exact-l2 needs --input");
    return widthlab::exact_l2_avg_width(*sys, n);
  }
  SubspaceStrategy strategy = SubspaceStrategy::RandomSubspace;
  if (a.method == "altmin") strategy = SubspaceStrategy::AltMin;
  if (a.method == "svd") strategy = SubspaceStrategy::SVDInit;
  if (sys)
    return widthlab::mc_avg_width_upper(*sys, n, metric, strategy, a.trials, a.common.seed);
  if (a.model.empty()) throw std::invalid_argument("width needs --input or --model");
  if (a.dim < 1) throw std::invalid_argument("width --model needs --dim");
  return widthlab::mc_avg_width_upper(named_model(a.model, a.dim), n, metric, strategy,
                                      a.trials, a.common.seed);
}

int run_width(const WidthArgs& a) {
  const widthlab::MetricSpec metric = make_metric(a.metric);
  if (a.method == "exact-l2" && a.metric.was_set && metric.describe() != "L2")
    throw std::invalid_argument("width exact-l2 is an L2 law; drop --metric or use mc/altmin/svd");
  std::optional<widthlab::FunctionSystem> sys;
  if (!a.input.empty()) sys = load_system(a.input);
  if (a.n < 0 && a.sweep < 0) throw std::invalid_argument("width needs --n or --sweep");

  ordered_json params;
  params["method"] = a.method;
  params["metric"] = metric.describe();
  params["input"] = a.input;
  params["model"] = a.model;
  if (a.dim > 0) params["dim"] = a.dim;
  params["trials"] = a.trials;

  if (a.sweep >= 0) {
    if (a.common.out.empty()) throw std::invalid_argument("width --sweep needs --out");
    params["sweep"] = a.sweep;
    std::string csv = "n,value,stderr\n";
    for (Eigen::Index n = 0; n <= a.sweep; ++n) {
      const widthlab::WidthResult r = width_once(a, metric, sys, n);
      csv += std::to_string(n);
      csv += ',';
      csv += format_double(r.value);
      csv += ',';
      csv += format_double(r.stderr_value.value_or(0.0));
      csv += '\n';
    }
    write_text(a.common.out, csv);
    write_manifest(a.common.out, "width", params, a.common);
    std::cout << "wrote " << a.common.out << "\n";
    return 0;
  }

  params["n"] = a.n;
  const widthlab::WidthResult r = width_once(a, metric, sys, a.n);
  ordered_json report;
  report["n"] = a.n;
  report["value"] = r.value;
  report["certainty"] = widthlab::describe(r.certainty);
  if (r.stderr_value) report["stderr"] = *r.stderr_value;
  report["metric"] = r.metric.describe();
  report["provenance"] = r.provenance;
  emit_result("width", a.common, params, report, r.value);
  return 0;
}

// ---------------------------------------------------------------------------
// lowrank: entrywise-metric low-rank approximation of a stored matrix.

struct LowrankArgs {
  CommonArgs common;
  MetricArgs metric;
  std::string method = "altmin";
  std::string input;
  std::string factors;
  Eigen::Index rank = 0;
  int restarts = 3;
  int sweeps = 30;
};

int run_lowrank(const LowrankArgs& a) {
  if (a.input.empty()) throw std::invalid_argument("lowrank needs --input");
  const widthlab::LoadedMatrix m = widthlab::load_wlab(a.input);
  if (m.is_complex()) throw std::invalid_argument("lowrank needs a real matrix");
  const widthlab::MetricSpec metric = make_metric(a.metric);

  widthlab::LowRankApprox approx;
  if (a.method == "svd") {
    approx = widthlab::eckart_young_truncation(m.real, a.rank);
  } else {
    approx = widthlab::altmin_lowrank(m.real, a.rank, metric, a.restarts, a.sweeps,
                                      a.common.seed);
  }

  ordered_json params;
  params["method"] = a.method;
  params["input"] = a.input;
  params["rank"] = a.rank;
  params["metric"] = a.method == "svd" ? "frobenius" : metric.describe();
  params["restarts"] = a.restarts;
  params["sweeps"] = a.sweeps;

  ordered_json report;
  report["method"] = a.method;
  report["rank"] = approx.rank();
  report["error"] = approx.error;
  report["metric"] = params["metric"];
  report["certainty"] = widthlab::describe(approx.certainty);
  report["sweeps_used"] = approx.sweeps;
  report["hit_iteration_cap"] = approx.hit_iteration_cap;
  report["sweep_errors"] = approx.sweep_errors;

  if (!a.factors.empty()) {
    widthlab::save_wlab(a.factors + ".left.wlab", approx.left);
    widthlab::save_wlab(a.factors + ".right.wlab", approx.right);
    report["factors"] = {a.factors + ".left.wlab", a.factors + ".right.wlab"};
  }
  emit_result("lowrank", a.common, params, report, approx.error);
  return 0;
}

// ---------------------------------------------------------------------------
// construct: the explicit low-rank constructions with their reports.

struct ConstructArgs {
  CommonArgs common;
  std::string kind;
  int k = 0;
  double lambda = 1.0;
  int s0 = 0;
  std::int64_t samples = 0;
  Eigen::Index dim = 0;
  int m = 0;
  int kernel_m = 0;
};

ordered_json walsh_report_json(const widthlab::WalshLowRankReport& r) {
  ordered_json j;
  j["k"] = r.k;
  j["lambda"] = r.lambda;
  j["hypothesis_satisfied"] = r.hypothesis_satisfied;
  j["window"] = {r.window_lo, r.window_hi};
  j["degree"] = r.degree;
  j["predicted_error"] = r.predicted_error;
  j["predicted_row_error"] = r.predicted_row_error;
  j["measured_error"] = r.measured_error;
  j["measured_core_row_error"] = r.measured_core_row_error;
  if (r.stderr_value) j["stderr"] = *r.stderr_value;
  j["entries_checked"] = r.entries_checked;
  j["rank_bound_core"] = static_cast<double>(r.rank_bound_core);
  j["rank_bound_total"] = static_cast<double>(r.rank_bound_total);
  j["sampled_numerical_rank"] = r.sampled_numerical_rank;
  j["sampled_submatrix_size"] = r.sampled_submatrix_size;
  return j;
}

ordered_json dft_report_json(const widthlab::DftLowRankReport& r) {
  ordered_json j;
  j["k"] = r.k;
  j["lambda"] = r.lambda;
  j["s0"] = r.s0;
  j["hypothesis_satisfied"] = r.hypothesis_satisfied;
  j["uniform_tail_bound"] = r.uniform_tail_bound;
  j["max_tail_error_checked"] = r.max_tail_error_checked;
  j["tail_entries_checked"] = r.tail_entries_checked;
  j["tail_bound_violated"] = r.tail_bound_violated;
  j["sampled_offwindow_fraction"] = r.sampled_offwindow_fraction;
  j["sampled_l0_error"] = r.sampled_l0_error;
  if (r.stderr_value) j["stderr"] = *r.stderr_value;
  j["entries_checked"] = r.entries_checked;
  j["factor_degrees"] = r.factor_degrees;
  j["rank_bound"] = static_cast<double>(r.rank_bound);
  return j;
}

int run_construct(const ConstructArgs& a) {
  ordered_json params;
  params["kind"] = a.kind;
  ordered_json report;

  if (a.kind == "walsh") {
    if (a.k < 1) throw std::invalid_argument("construct walsh needs --k >= 1");
    params["k"] = a.k;
    params["lambda"] = a.lambda;
    const bool exhaustive_fits = 2 * a.k <= 26;
    std::int64_t samples = a.samples;
    if (samples <= 0 && !exhaustive_fits) samples = 1'000'000;
    params["samples"] = samples;  // 0: exhaustive
    const widthlab::WalshLowRank w =
        samples > 0 ? widthlab::walsh_lowrank(a.k, a.lambda, samples, a.common.seed)
                    : widthlab::walsh_lowrank(a.k, a.lambda);
    report = walsh_report_json(w.report());
  } else if (a.kind == "dft") {
    if (a.k < 1 || a.s0 < 1)
      throw std::invalid_argument("construct dft needs --k and --s0 (both >= 1)");
    params["k"] = a.k;
    params["lambda"] = a.lambda;
    params["s0"] = a.s0;
    widthlab::DftLowRank d = widthlab::dft_lowrank(a.k, a.lambda, a.s0);
    if (2 * a.k <= 26) d.verify_tail_bound_exhaustive();
    std::int64_t samples = a.samples;
    if (samples <= 0 && 2 * a.k > 26) samples = 1'000'000;
    if (samples > 0) d.measure_sampled(samples, a.common.seed);
    params["samples"] = samples;
    report = dft_report_json(d.report());
  } else if (a.kind == "trig") {
    if (a.dim < 4 || a.m < 1)
      throw std::invalid_argument("construct trig needs --dim >= 4 and --m >= 1");
    const int kernel_m = a.kernel_m > 0 ? a.kernel_m : a.m + 1;
    params["dim"] = a.dim;
    params["m"] = a.m;
    params["kernel_m"] = kernel_m;
    const widthlab::StepCoverSet cover = widthlab::lambda_set(a.dim, a.m, a.common.seed);
    const widthlab::FejerKernel kernel = widthlab::fejer_kernel(kernel_m, 8 * kernel_m);
    double sup_violation = 0.0;
    for (Eigen::Index i = 0; i < kernel.grid.size(); ++i) {
      const double x = kernel.grid[i];
      const double dist = std::min(x - std::floor(x), std::ceil(x) - x);
      const double envelope = dist == 0.0
                                  ? static_cast<double>(kernel_m)
                                  : std::min(static_cast<double>(kernel_m),
                                             1.0 / (4.0 * kernel_m * dist * dist));
      sup_violation = std::max(sup_violation, std::abs(kernel.samples[i]) - envelope);
    }
    // A few witnessed frequencies; the one-term approximant must keep its
    // off-k spectrum inside the cover set, so its polynomial is capped at the
    // cover reach regardless of the inspected kernel order.
    const widthlab::FejerKernel witness_kernel =
        kernel_m == a.m + 1 ? kernel : widthlab::fejer_kernel(a.m + 1, 8 * (a.m + 1));
    widthlab::Rng freq_rng = widthlab::Rng::stream(a.common.seed, 0x7F19ULL);
    double max_error = 0.0;
    double max_residual = 0.0;
    ordered_json freqs = ordered_json::array();
    for (int rep = 0; rep < 8; ++rep) {
      const std::int64_t k =
          static_cast<std::int64_t>(freq_rng.next_u64() % static_cast<std::uint64_t>(a.dim));
      const widthlab::TrigApprox approx =
          widthlab::trig_approx(k, cover, witness_kernel.polynomial, a.dim, 2.0);
      freqs.push_back(k);
      max_error = std::max(max_error, approx.error);
      max_residual = std::max(max_residual, approx.substitution_residual);
    }
    report["dim"] = a.dim;
    report["m"] = a.m;
    report["kernel_m"] = kernel_m;
    report["tau"] = cover.tau;
    report["lambda_size"] = static_cast<std::int64_t>(cover.lambda.size());
    report["size_bound"] = 3.0 * cover.tau * static_cast<double>(a.dim);
    report["witnesses_ok"] = cover.verify();
    report["kernel_sup_violation"] = sup_violation;
    report["frequencies"] = freqs;
    report["max_one_term_error"] = max_error;
    report["max_substitution_residual"] = max_residual;
  } else {
    throw std::invalid_argument("construct kind must be walsh, dft, or trig");
  }

  if (a.common.out.empty()) {
    std::cout << report.dump(2) << "\n";
    return 0;
  }
  write_text(a.common.out, report.dump(2) + "\n");
  write_manifest(a.common.out, "construct", params, a.common);
  std::cout << "wrote " << a.common.out << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// experiment: run a config, or replay one against a stored CSV.

struct ExperimentArgs {
  CommonArgs common;
  std::string action;
  std::string config_path;
  std::string csv_path;
  int trials = 0;
  bool seed_set = false;
  bool trials_set = false;
};

widthlab::RunRecord record_from_csv(const widthlab::ExperimentConfig& config,
                                    const std::string& csv_text) {
  const CsvTable t = parse_csv(csv_text);
  if (t.header.size() < 3 || t.header[0] != "trial" || t.header[1] != "seed" ||
      t.header[2] != "value")
    throw std::invalid_argument("CSV header must start with trial,seed,value");
  widthlab::RunRecord rec;
  rec.config = config;
  for (std::size_t i = 3; i < t.header.size(); ++i) rec.aux_names.push_back(t.header[i]);
  for (const auto& cells : t.rows) {
    if (cells.size() != t.header.size())
      throw std::invalid_argument("CSV row width does not match the header");
    widthlab::TrialRow row;
    row.trial = std::stoll(cells[0]);
    row.seed = std::stoull(cells[1]);
    row.value = cell_to_double(cells[2], "value");
    for (std::size_t i = 3; i < cells.size(); ++i)
      row.aux.push_back(cell_to_double(cells[i], t.header[i]));
    rec.rows.push_back(std::move(row));
  }
  return rec;
}

int run_experiment(const ExperimentArgs& a) {
  widthlab::ExperimentConfig cfg = widthlab::load_experiment_config(a.config_path);
  if (a.seed_set) cfg.seed = a.common.seed;
  if (a.trials_set) cfg.trials = a.trials;
  if (!a.common.out.empty()) cfg.output_path = a.common.out;

  if (a.action == "replay") {
    if (a.csv_path.empty()) throw std::invalid_argument("experiment replay needs --csv");
    const widthlab::RunRecord stored = record_from_csv(cfg, read_text(a.csv_path));
    widthlab::replay(stored);  // throws on any bit mismatch
    std::cout << "replay ok: " << stored.rows.size() << " rows bit-identical\n";
    return 0;
  }
  if (a.action != "run")
    throw std::invalid_argument("experiment action must be run or replay");

  const widthlab::RunRecord rec = widthlab::run(cfg);
  if (rec.config.output_path.empty()) {
    std::cout << rec.csv();
    return 0;
  }
  const std::string& path = rec.config.output_path;
  write_text(path, rec.csv());
  write_text(path + ".summary.json", rec.summary_json());
  ordered_json params;
  params["kind"] = widthlab::to_string(rec.config.kind);
  params["config"] = a.config_path;
  params["trials"] = rec.config.trials;
  params["config_seed"] = rec.config.seed;
  for (const auto& [key, value] : rec.config.params) params[key] = value;
  write_manifest(path, "experiment", params, a.common);
  std::cout << "wrote " << path << " (" << rec.rows.size() << " trials, mean "
            << format_double(rec.summary.mean) << ")\n";
  return 0;
}

// ---------------------------------------------------------------------------
// report: manifest echo, or a Pareto SVG over CSV rows.

struct ReportArgs {
  CommonArgs common;
  std::string input;
  std::string x_col;
  std::string y_col;
};

std::string svg_from_csv(const CsvTable& t, const std::string& x_name,
                         const std::string& y_name) {
  std::size_t xi = 0;
  std::size_t yi = t.header.size() > 1 ? 1 : 0;
  for (std::size_t i = 0; i < t.header.size(); ++i) {
    if (!x_name.empty() && t.header[i] == x_name) xi = i;
    if (!y_name.empty() && t.header[i] == y_name) yi = i;
  }
  if (!x_name.empty() && t.header[xi] != x_name)
    throw std::invalid_argument("CSV has no column '" + x_name + "'");
  if (!y_name.empty() && t.header[yi] != y_name)
    throw std::invalid_argument("CSV has no column '" + y_name + "'");
  if (t.rows.empty()) throw std::invalid_argument("CSV has no data rows");

  std::vector<std::pair<double, double>> pts;
  pts.reserve(t.rows.size());
  for (const auto& row : t.rows)
    pts.emplace_back(cell_to_double(row[xi], t.header[xi]),
                     cell_to_double(row[yi], t.header[yi]));
  std::sort(pts.begin(), pts.end());

  double x_lo = pts.front().first, x_hi = pts.back().first;
  double y_lo = pts.front().second, y_hi = pts.front().second;
  for (const auto& [x, y] : pts) {
    y_lo = std::min(y_lo, y);
    y_hi = std::max(y_hi, y);
  }
  if (x_hi == x_lo) x_hi = x_lo + 1.0;
  if (y_hi == y_lo) y_hi = y_lo + 1.0;

  const double w = 640.0, h = 420.0, ml = 64.0, mr = 16.0, mt = 16.0, mb = 48.0;
  const auto sx = [&](double x) { return ml + (x - x_lo) / (x_hi - x_lo) * (w - ml - mr); };
  const auto sy = [&](double y) { return h - mb - (y - y_lo) / (y_hi - y_lo) * (h - mt - mb); };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
      << "\" viewBox=\"0 0 " << w << " " << h << "\">\n"
      << "  <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "  <line x1=\"" << ml << "\" y1=\"" << h - mb << "\" x2=\"" << w - mr << "\" y2=\""
      << h - mb << "\" stroke=\"black\"/>\n"
      << "  <line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\"" << h - mb
      << "\" stroke=\"black\"/>\n";
  for (int tick = 0; tick <= 4; ++tick) {
    const double fx = x_lo + (x_hi - x_lo) * tick / 4.0;
    const double fy = y_lo + (y_hi - y_lo) * tick / 4.0;
    svg << "  <text x=\"" << sx(fx) << "\" y=\"" << h - mb + 18
        << "\" font-size=\"11\" text-anchor=\"middle\">" << format_double(fx) << "</text>\n"
        << "  <text x=\"" << ml - 6 << "\" y=\"" << sy(fy) + 4
        << "\" font-size=\"11\" text-anchor=\"end\">" << format_double(fy) << "</text>\n";
  }
  svg << "  <text x=\"" << (ml + w - mr) / 2 << "\" y=\"" << h - 10
      << "\" font-size=\"13\" text-anchor=\"middle\">" << t.header[xi] << "</text>\n"
      << "  <text x=\"14\" y=\"" << (mt + h - mb) / 2
      << "\" font-size=\"13\" text-anchor=\"middle\" transform=\"rotate(-90 14 "
      << (mt + h - mb) / 2 << ")\">" << t.header[yi] << "</text>\n  <polyline fill=\"none\" "
      << "stroke=\"#1f6f8b\" stroke-width=\"1.5\" points=\"";
  for (const auto& [x, y] : pts) svg << sx(x) << "," << sy(y) << " ";
  svg << "\"/>\n";
  for (const auto& [x, y] : pts)
    svg << "  <circle cx=\"" << sx(x) << "\" cy=\"" << sy(y)
        << "\" r=\"2.5\" fill=\"#13334c\"/>\n";
  svg << "</svg>\n";
  return svg.str();
}

int run_report(const ReportArgs& a) {
  const bool want_svg =
      a.common.format == "svg" ||
      (a.input.size() > 4 && a.input.substr(a.input.size() - 4) == ".csv");
  if (want_svg) {
    const std::string svg = svg_from_csv(parse_csv(read_text(a.input)), a.x_col, a.y_col);
    if (a.common.out.empty()) {
      std::cout << svg;
    } else {
      write_text(a.common.out, svg);
      std::cout << "wrote " << a.common.out << "\n";
    }
    return 0;
  }
  // Manifest (or any JSON artifact) round-trip: parse and re-emit with the
  // same writer settings, so the output is exactly what `widthlab` wrote.
  const ordered_json j = ordered_json::parse(read_text(a.input));
  std::cout << j.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"widthlab: widths, distances, and low-rank constructions for finite "
               "function systems"};
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);

  GenArgs gen;
  CLI::App* gen_cmd = app.add_subcommand(
      "gen", "generate a system and store it as a WLAB1 matrix");
  add_common(gen_cmd, gen.common);
  gen_cmd->add_option("--model", gen.model,
                      "rademacher, gaussian, uniform, signs_scaled, walsh, dft")
      ->capture_default_str();
  gen_cmd->add_option("--dim", gen.dim, "ambient dimension (points per function)");
  gen_cmd->add_option("--count", gen.count, "number of functions to draw");
  gen_cmd->add_option("--k", gen.k, "cube exponent for --model walsh");

  DistArgs dist;
  CLI::App* dist_cmd =
      app.add_subcommand("dist", "distance from a function to a subspace");
  add_common(dist_cmd, dist.common);
  add_metric(dist_cmd, dist.metric);
  dist_cmd->add_option("--input", dist.input, "WLAB1 system file");
  dist_cmd->add_option("--index", dist.index, "column of --input to use")
      ->capture_default_str();
  dist_cmd->add_option("--model", dist.model, "draw the target from a named model");
  dist_cmd->add_option("--dim", dist.dim, "dimension for --model");
  dist_cmd->add_option("--n", dist.n, "random subspace dimension");
  dist_cmd->add_option("--subspace", dist.subspace_path, "WLAB1 file spanning the subspace");
  dist_cmd->add_flag("--mean", dist.mean, "mean distance over all system columns");
  dist_cmd->add_option("--power", dist.power, "mean power for --mean")->capture_default_str();

  WidthArgs width;
  CLI::App* width_cmd = app.add_subcommand("width", "average width of a system or model");
  add_common(width_cmd, width.common);
  add_metric(width_cmd, width.metric);
  width_cmd->add_option("method", width.method, "exact-l2, mc, altmin, or svd")
      ->required()
      ->check(CLI::IsMember({"exact-l2", "mc", "altmin", "svd"}));
  width_cmd->add_option("--input", width.input, "WLAB1 system file");
  width_cmd->add_option("--model", width.model, "named model instead of --input");
  width_cmd->add_option("--dim", width.dim, "dimension for --model");
  width_cmd->add_option("--n", width.n, "subspace dimension");
  width_cmd->add_option("--sweep", width.sweep, "emit CSV rows for n = 0..SWEEP");
  width_cmd->add_option("--trials", width.trials, "subspace draws / restarts")
      ->capture_default_str();

  LowrankArgs lowrank;
  CLI::App* lowrank_cmd =
      app.add_subcommand("lowrank", "low-rank approximation under an entrywise metric");
  add_common(lowrank_cmd, lowrank.common);
  add_metric(lowrank_cmd, lowrank.metric);
  lowrank_cmd->add_option("--method", lowrank.method, "altmin or svd")
      ->check(CLI::IsMember({"altmin", "svd"}))
      ->capture_default_str();
  lowrank_cmd->add_option("--input", lowrank.input, "WLAB1 matrix file");
  lowrank_cmd->add_option("--rank", lowrank.rank, "target rank")->required();
  lowrank_cmd->add_option("--restarts", lowrank.restarts, "altmin restarts")
      ->capture_default_str();
  lowrank_cmd->add_option("--sweeps", lowrank.sweeps, "altmin sweep cap")
      ->capture_default_str();
  lowrank_cmd->add_option("--factors", lowrank.factors,
                          "prefix for .left.wlab / .right.wlab factor dumps");

  ConstructArgs construct;
  CLI::App* construct_cmd =
      app.add_subcommand("construct", "explicit low-rank constructions with reports");
  add_common(construct_cmd, construct.common);
  construct_cmd->add_option("kind", construct.kind, "walsh, dft, or trig")
      ->required()
      ->check(CLI::IsMember({"walsh", "dft", "trig"}));
  construct_cmd->add_option("--k", construct.k, "cube exponent / bit width");
  construct_cmd->add_option("--lambda", construct.lambda, "window half-width multiplier")
      ->capture_default_str();
  construct_cmd->add_option("--s0", construct.s0, "carry truncation depth (dft)");
  construct_cmd->add_option("--samples", construct.samples,
                            "Monte Carlo entries; 0 = exhaustive when it fits");
  construct_cmd->add_option("--dim", construct.dim, "group size (trig)");
  construct_cmd->add_option("--m", construct.m, "progression half-length (trig)");
  construct_cmd->add_option("--kernel-m", construct.kernel_m,
                            "Fejer kernel order (trig, default m + 1)");

  ExperimentArgs experiment;
  CLI::App* experiment_cmd =
      app.add_subcommand("experiment", "run or replay an experiment config");
  add_common(experiment_cmd, experiment.common);
  experiment_cmd->add_option("action", experiment.action, "run or replay")
      ->required()
      ->check(CLI::IsMember({"run", "replay"}));
  experiment_cmd->add_option("config", experiment.config_path, "key=value config file")
      ->required();
  experiment_cmd->add_option("--csv", experiment.csv_path, "stored CSV for replay");
  experiment_cmd->add_option("--trials", experiment.trials, "override config trials");

  ReportArgs report;
  CLI::App* report_cmd =
      app.add_subcommand("report", "echo a manifest, or render CSV rows as SVG");
  add_common(report_cmd, report.common, /*with_format=*/true);
  report_cmd->add_option("input", report.input, "manifest JSON or CSV file")->required();
  report_cmd->add_option("--x", report.x_col, "CSV column for the x axis");
  report_cmd->add_option("--y", report.y_col, "CSV column for the y axis");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    const CommonArgs* common = nullptr;
    if (gen_cmd->parsed()) common = &gen.common;
    if (dist_cmd->parsed()) common = &dist.common;
    if (width_cmd->parsed()) {
      common = &width.common;
      width.metric.was_set = width_cmd->count("--metric") > 0;
    }
    if (lowrank_cmd->parsed()) common = &lowrank.common;
    if (construct_cmd->parsed()) common = &construct.common;
    if (experiment_cmd->parsed()) {
      common = &experiment.common;
      experiment.seed_set = experiment_cmd->count("--seed") > 0;
      experiment.trials_set = experiment_cmd->count("--trials") > 0;
    }
    if (report_cmd->parsed()) common = &report.common;
    if (common && common->threads > 0) widthlab::set_global_thread_cap(common->threads);

    if (gen_cmd->parsed()) return run_gen(gen);
    if (dist_cmd->parsed()) return run_dist(dist);
    if (width_cmd->parsed()) return run_width(width);
    if (lowrank_cmd->parsed()) return run_lowrank(lowrank);
    if (construct_cmd->parsed()) return run_construct(construct);
    if (experiment_cmd->parsed()) return run_experiment(experiment);
    if (report_cmd->parsed()) return run_report(report);
    std::cerr << "error: no subcommand\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::domain_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
