#include "sdelab/experiments.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "sdelab/edit.hpp"
#include "sdelab/error.hpp"
#include "sdelab/image.hpp"
#include "sdelab/invert.hpp"
#include "sdelab/metrics.hpp"
#include "sdelab/parallel.hpp"
#include "sdelab/sampler.hpp"

namespace sdelab {

using nlohmann::ordered_json;

std::string_view to_string(Experiment experiment) {
  switch (experiment) {
    case Experiment::toy1d: return "toy1d";
    case Experiment::theorem_suite: return "theorems";
    case Experiment::reconstruct: return "reconstruct";
    case Experiment::drag_bench: return "drag_bench";
    case Experiment::inpaint_bench: return "inpaint_bench";
    case Experiment::translate_bench: return "translate_bench";
  }
  return "unknown";
}

Experiment parse_experiment(std::string_view name) {
  for (auto e : {Experiment::toy1d, Experiment::theorem_suite, Experiment::reconstruct,
                 Experiment::drag_bench, Experiment::inpaint_bench, Experiment::translate_bench})
    if (to_string(e) == name) return e;
  if (name == "theorem_suite") return Experiment::theorem_suite;
  throw FormatError("unknown experiment '" + std::string(name) + "'");
}

// ---------------------------------------------------------------------------

ExperimentConfig ExperimentConfig::defaults(Experiment experiment) {
  ExperimentConfig c;
  c.experiment_ = experiment;
  auto& v = c.values_;
  v["seed"] = "0";
  v["workers"] = "1";
  v["schedule"] = "cosine";
  switch (experiment) {
    case Experiment::toy1d:
      v["mu"] = "0.5";
      v["sigma"] = "0.2";
      v["steps"] = "1000";
      v["particles"] = "100000";
      v["priors"] = "normal:0,1;normal:2,4;uniform:-2,2";
      v["bins"] = "200";
      v["range_lo"] = "-10";
      v["range_hi"] = "10";
      v["matched_kl_max"] = "0.02";
      v["sde_kl_max"] = "0.05";
      v["ode_ratio_min"] = "10";
      break;
    case Experiment::theorem_suite:
      v["data_mean"] = "0.5";
      v["data_variance"] = "0.25";
      v["prior_mean"] = "2";
      v["prior_variance"] = "4";
      v["steps"] = "2000";
      v["refine_ratio_min"] = "3";
      v["mixture_mu"] = "0.5";
      v["mixture_sigma"] = "0.2";
      v["mc_particles"] = "100000";
      v["mc_steps"] = "1000";
      v["transport_trajectories"] = "10000";
      v["transport_steps"] = "2000";
      v["t3_priors"] = "normal:2,4;uniform:-2,2;normal:0,0.25";
      v["t3_particles"] = "100000";
      v["t3_repetitions"] = "100";
      v["t3_required"] = "95";
      v["t3_steps"] = "50";
      v["t3_t0"] = "0.6";
      v["lsi_data_mean"] = "0";
      v["lsi_data_variance"] = "1";
      v["lsi_pairs"] = "2000";
      v["lsi_slack"] = "1e-6";
      break;
    case Experiment::reconstruct:
      v["images"] = "20";
      v["steps_list"] = "25,50,100";
      v["t0"] = "0.6";
      v["guidance_scale"] = "3";
      break;
    case Experiment::drag_bench:
      v["seeds"] = "100";
      v["distances"] = "2,4";
      v["radius"] = "2";
      v["steps"] = "60";
      v["t0"] = "0.6";
      v["alpha"] = "1.1";
      v["beta"] = "0.3";
      v["margin_min"] = "0.10";
      v["identity_rate_min"] = "0.99";
      break;
    case Experiment::inpaint_bench:
      v["seeds"] = "100";
      v["steps_list"] = "25,50,100";
      v["t0"] = "1";
      break;
    case Experiment::translate_bench:
      v["seeds"] = "50";
      v["steps"] = "100";
      v["t0"] = "1";
      v["guidance_scale"] = "0";
      break;
  }
  return c;
}

void ExperimentConfig::set(const std::string& key, const std::string& value) {
  auto it = values_.find(key);
  if (it == values_.end())
    throw FormatError("unknown key '" + key + "' for experiment " + std::string(to_string(experiment_)));
  it->second = value;
}

void ExperimentConfig::load_text(std::string_view text, std::string_view origin) {
  std::istringstream is{std::string(text)};
  std::string line;
  int line_no = 0;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return std::string();
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  };
  while (std::getline(is, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw FormatError(std::string(origin) + ":" + std::to_string(line_no) + ": expected key = value");
    set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
}

void ExperimentConfig::load_file(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw FormatError("cannot open config " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  load_text(ss.str(), path.string());
}

const std::string& ExperimentConfig::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw FormatError("missing config key '" + key + "'");
  return it->second;
}

namespace {

std::string trimmed(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t") - b + 1);
}

template <typename T>
T parse_number(const std::string& raw, const std::string& key) {
  const std::string text = trimmed(raw);
  T v{};
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size())
    throw FormatError("config key '" + key + "': bad number '" + text + "'");
  return v;
}

}  // namespace

double ExperimentConfig::get_double(const std::string& key) const {
  return parse_number<double>(get(key), key);
}
std::int64_t ExperimentConfig::get_int(const std::string& key) const {
  return parse_number<std::int64_t>(get(key), key);
}
std::uint64_t ExperimentConfig::get_u64(const std::string& key) const {
  return parse_number<std::uint64_t>(get(key), key);
}

std::vector<double> ExperimentConfig::get_list(const std::string& key) const {
  std::vector<double> out;
  std::stringstream ss(get(key));
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_number<double>(item, key));
  if (out.empty()) throw FormatError("config key '" + key + "': empty list");
  return out;
}

std::vector<std::string> ExperimentConfig::get_strings(const std::string& key) const {
  std::vector<std::string> out;
  std::stringstream ss(get(key));
  std::string item;
  while (std::getline(ss, item, ';'))
    if (item = trimmed(item); !item.empty()) out.push_back(item);
  return out;
}

ordered_json ExperimentConfig::to_json() const {
  ordered_json j = ordered_json::object();
  j["experiment"] = std::string(to_string(experiment_));
  for (const auto& [k, v] : values_) j[k] = v;
  return j;
}

// ---------------------------------------------------------------------------

namespace {

using Clock = std::chrono::steady_clock;

std::string fmt(double v) { return format_double(v); }

struct Runner {
  const ExperimentConfig& config;
  std::filesystem::path out_dir;
  Clock::time_point start = Clock::now();
  ExperimentOutcome outcome;

  Runner(const ExperimentConfig& c, std::filesystem::path dir) : config(c), out_dir(std::move(dir)) {
    std::filesystem::create_directories(out_dir);
    outcome.passed = true;
    outcome.summary["checks"] = ordered_json::array();
  }

  void write(const std::string& name, const std::string& content) {
    const auto path = out_dir / name;
    std::ofstream os(path, std::ios::binary);
    if (!os) throw FormatError("cannot write " + path.string());
    os << content;
    outcome.files.push_back(path);
  }

  void check(const std::string& name, bool passed, ordered_json details = ordered_json::object()) {
    details = ordered_json{{"name", name}, {"passed", passed}, {"details", std::move(details)}};
    outcome.summary["checks"].push_back(std::move(details));
    outcome.passed = outcome.passed && passed;
  }

  ExperimentOutcome finish() {
    const double wall = std::chrono::duration<double>(Clock::now() - start).count();
    ordered_json manifest;
    manifest["experiment"] = std::string(to_string(config.experiment()));
    manifest["config"] = config.to_json();
    manifest["seed"] = config.get_u64("seed");
    manifest["wall_time_seconds"] = wall;
    manifest["passed"] = outcome.passed;
    manifest["summary"] = outcome.summary;
    ordered_json files = ordered_json::array();
    for (const auto& f : outcome.files) files.push_back(f.filename().string());
    manifest["files"] = files;
    const std::string name = std::string(to_string(config.experiment())) + "_manifest.json";
    std::ofstream os(out_dir / name);
    os << manifest.dump(2) << '\n';
    outcome.files.push_back(out_dir / name);
    return outcome;
  }
};

NoiseSchedule schedule_of(const ExperimentConfig& c) {
  return NoiseSchedule::make(parse_schedule_kind(c.get("schedule")));
}

std::size_t workers_of(const ExperimentConfig& c) {
  return static_cast<std::size_t>(std::max<std::int64_t>(1, c.get_int("workers")));
}

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

double mean(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double rate(const std::vector<int>& v) {
  return v.empty() ? 0.0 : static_cast<double>(std::accumulate(v.begin(), v.end(), 0)) / static_cast<double>(v.size());
}

}  // namespace

// ---------------------------------------------------------------------------

ExperimentOutcome run_toy1d(const ExperimentConfig& config, const std::filesystem::path& out_dir) {
  Runner run(config, out_dir);
  const auto schedule = schedule_of(config);
  const GaussianMixture1D mixture{config.get_double("mu"), config.get_double("sigma")};
  const GaussianMixture1DModel model(mixture, schedule);
  const auto steps = static_cast<std::size_t>(config.get_int("steps"));
  const auto particles = static_cast<std::size_t>(config.get_int("particles"));
  HistogramOptions hist;
  hist.bins = static_cast<std::size_t>(config.get_int("bins"));
  hist.lo = config.get_double("range_lo");
  hist.hi = config.get_double("range_hi");
  const double matched_max = config.get_double("matched_kl_max");
  const double sde_max = config.get_double("sde_kl_max");
  const double ratio_min = config.get_double("ode_ratio_min");
  const auto log_q0 = [&](double x) { return gm1d_log_density(mixture, schedule, x, 0.0); };

  std::string kl_csv = "prior,sampler,kl\n";
  std::string hist_csv = "prior,sampler,bin_center,density\n";
  const double width = (hist.hi - hist.lo) / static_cast<double>(hist.bins);
  ordered_json results = ordered_json::array();
  for (const auto& spec : config.get_strings("priors")) {
    const Prior prior = Prior::parse(spec);
    double kl[2] = {0.0, 0.0};
    for (int eta = 1; eta >= 0; --eta) {
      SamplerConfig sc;
      sc.eta = eta;
      sc.grid = make_time_grid(schedule, steps, schedule.horizon());
      sc.seed = config.get_u64("seed");
      SampleOptions so;
      so.workers = workers_of(config);
      const auto result = sample(model, sc, prior, particles, so);
      const char* name = eta ? "sde" : "ode";
      kl[eta] = kl_histogram_to_density(result.states, log_q0, hist);
      kl_csv += prior.describe() + ',' + name + ',' + fmt(kl[eta]) + '\n';
      const auto p = histogram_probabilities(result.states, hist);
      for (std::size_t b = 0; b < hist.bins; ++b)
        hist_csv += prior.describe() + ',' + name + ',' + fmt(hist.lo + (b + 0.5) * width) + ',' +
                    fmt(p[b] / width) + '\n';
    }
    const bool matched = prior.kind() == Prior::Kind::standard_normal ||
                         (prior.kind() == Prior::Kind::normal && prior.mean() == 0.0 && prior.variance() == 1.0);
    ordered_json details{{"prior", prior.describe()}, {"kl_sde", kl[1]}, {"kl_ode", kl[0]}};
    if (matched) {
      run.check("toy1d matched " + prior.describe(), kl[1] < matched_max && kl[0] < matched_max, details);
    } else {
      run.check("toy1d mismatched " + prior.describe(), kl[1] < sde_max && kl[0] >= ratio_min * kl[1],
                details);
    }
    results.push_back(details);
  }
  std::string q0_csv = "x,density\n";
  for (int k = 0; k <= 800; ++k) {
    const double x = -2.0 + 4.0 * k / 800.0;
    q0_csv += fmt(x) + ',' + fmt(std::exp(log_q0(x))) + '\n';
  }
  run.write("toy1d_kl.csv", kl_csv);
  run.write("toy1d_hist.csv", hist_csv);
  run.write("toy1d_q0.csv", q0_csv);
  run.outcome.summary["results"] = results;
  return run.finish();
}

// ---------------------------------------------------------------------------

namespace {

ordered_json check_json(const CheckResult& r) {
  return {{"trivial_zero", r.trivial_zero}, {"residual", r.residual}, {"tolerance", r.tolerance},
          {"diagnostics", r.diagnostics}};
}

}  // namespace

ExperimentOutcome run_theorem_suite(const ExperimentConfig& config,
                                    const std::filesystem::path& out_dir) {
  Runner run(config, out_dir);
  const auto schedule = schedule_of(config);
  const double T = schedule.horizon();
  const GaussianData data{config.get_double("data_mean"), config.get_double("data_variance")};
  const double pm = config.get_double("prior_mean");
  const double pv = config.get_double("prior_variance");
  const auto steps = static_cast<std::size_t>(config.get_int("steps"));
  const auto grid = make_time_grid(schedule, steps, T);
  const auto fine = make_time_grid(schedule, 2 * steps, T);
  const std::uint64_t seed = config.get_u64("seed");

  auto emit = [&](const CheckResult& r, const std::string& file) {
    run.write(file, r.report.to_csv());
    run.check(r.name, r.passed, check_json(r));
  };

  // contraction along the reverse SDE
  const auto t1 = theorem1_check_exact(data, schedule, pm, pv, grid);
  emit(t1, "theorems_theorem1_exact.csv");
  const auto t1_fine = theorem1_check_exact(data, schedule, pm, pv, fine);
  const double ratio = t1.residual / t1_fine.residual;
  run.check("theorem1_refinement", ratio >= config.get_double("refine_ratio_min"),
            {{"residual", t1.residual}, {"residual_refined", t1_fine.residual}, {"ratio", ratio}});
  const auto marginal_top = gaussian_marginal(data, schedule, T);
  const auto t1_matched = theorem1_check_exact(data, schedule, marginal_top.mean, marginal_top.variance, grid);
  run.check("theorem1_matched_prior_trivial_zero", t1_matched.trivial_zero && t1_matched.passed,
            check_json(t1_matched));

  const GaussianMixture1D mixture{config.get_double("mixture_mu"), config.get_double("mixture_sigma")};
  MixtureCheckOptions mc;
  mc.particles = static_cast<std::size_t>(config.get_int("mc_particles"));
  mc.seed = seed;
  const auto t1_mc = theorem1_check_mc(
      mixture, schedule, pm, pv,
      make_time_grid(schedule, static_cast<std::size_t>(config.get_int("mc_steps")), T), mc);
  emit(t1_mc, "theorems_theorem1_mc.csv");

  // invariance along the probability-flow ODE
  emit(theorem2_check_exact(data, schedule, pm, pv, grid), "theorems_theorem2_exact.csv");
  emit(theorem2_check_transport(
           mixture, schedule, pm, pv,
           make_time_grid(schedule, static_cast<std::size_t>(config.get_int("transport_steps")), T),
           static_cast<std::size_t>(config.get_int("transport_trajectories")), seed),
       "theorems_theorem2_transport.csv");

  // Cycle-SDE channel
  std::vector<Prior> priors;
  for (const auto& s : config.get_strings("t3_priors")) priors.push_back(Prior::parse(s));
  Theorem3Options t3;
  t3.particles = static_cast<std::size_t>(config.get_int("t3_particles"));
  t3.repetitions = static_cast<std::size_t>(config.get_int("t3_repetitions"));
  t3.required = static_cast<std::size_t>(config.get_int("t3_required"));
  t3.seed = seed;
  t3.workers = workers_of(config);
  const auto t3_grid = make_time_grid(schedule, static_cast<std::size_t>(config.get_int("t3_steps")),
                                      config.get_double("t3_t0"));
  const auto t3_results = theorem3_check(mixture, schedule, priors, t3_grid, t3);
  for (std::size_t p = 0; p < t3_results.size(); ++p)
    emit(t3_results[p], "theorems_theorem3_" + std::to_string(p) + ".csv");

  // log-Sobolev rate
  const GaussianData lsi_data{config.get_double("lsi_data_mean"), config.get_double("lsi_data_variance")};
  emit(lsi_rate_check(lsi_data, schedule, pm, pv, grid, std::nullopt,
                      static_cast<std::size_t>(config.get_int("lsi_pairs")), config.get_double("lsi_slack")),
       "theorems_lsi.csv");
  return run.finish();
}

// ---------------------------------------------------------------------------

namespace {

struct Testbed {
  BumpDataset bumps;
  std::shared_ptr<const EmpiricalDataset> dataset;
  std::unique_ptr<EmpiricalScoreModel> model;
  std::size_t height = 0, width = 0;

  explicit Testbed(const NoiseSchedule& schedule) : bumps(generate_bump_dataset()) {
    dataset = bumps.as_dataset();
    model = std::make_unique<EmpiricalScoreModel>(dataset, schedule);
    height = width = bumps.params.size;
  }
  [[nodiscard]] LatentImage image(std::size_t i) const { return bumps.images[i]; }
};

std::optional<GuidanceSchedule> constant_guidance(double scale, double t0) {
  if (scale == 0.0) return std::nullopt;
  return GuidanceSchedule{scale, scale, t0};
}

}  // namespace

ExperimentOutcome run_reconstruct(const ExperimentConfig& config, const std::filesystem::path& out_dir) {
  Runner run(config, out_dir);
  const auto schedule = schedule_of(config);
  const Testbed tb(schedule);
  const auto count = static_cast<std::size_t>(config.get_int("images"));
  const double t0 = config.get_double("t0");
  const double gscale = config.get_double("guidance_scale");
  const std::uint64_t seed = config.get_u64("seed");
  const std::size_t stride = std::max<std::size_t>(1, tb.bumps.images.size() / std::max<std::size_t>(1, count));

  std::string csv = "steps,guidance,method,image,max_abs_error\n";
  ordered_json table = ordered_json::array();
  std::vector<double> ddim_mean;
  bool cycle_ok = true, ordering_ok = true;
  for (double nd : config.get_list("steps_list")) {
    const auto n = static_cast<std::size_t>(nd);
    const auto grid = make_time_grid(schedule, n, t0);
    ordered_json row{{"steps", n}};
    for (int guided = 0; guided <= 1; ++guided) {
      if (guided && gscale == 0.0) continue;
      std::vector<double> cyc(count), ddim(count);
      parallel_for(count, workers_of(config), [&](std::size_t b, std::size_t e) {
        for (std::size_t k = b; k < e; ++k) {
          const std::size_t idx = (k * stride) % tb.bumps.images.size();
          const auto& x0 = tb.bumps.images[idx].values;
          Conditioning cond;
          if (guided) {
            cond.label = tb.bumps.labels[idx];
            cond.guidance = constant_guidance(gscale, t0);
          }
          const auto rec = cycle_record(*tb.model, x0, grid, CounterRng(seed, k), cond);
          cyc[k] = max_abs_diff(cycle_replay(rec, rec.latent_at_t0, *tb.model), x0);
          Trajectory inv;
          const auto top = ddim_invert(*tb.model, x0, grid, cond, &inv);
          ddim[k] = max_abs_diff(ddim_sample(*tb.model, top, inv.times, cond), x0);
        }
      });
      for (std::size_t k = 0; k < count; ++k) {
        csv += std::to_string(n) + ',' + (guided ? fmt(gscale) : "0") + ",cycle_sde," + std::to_string(k) + ',' + fmt(cyc[k]) + '\n';
        csv += std::to_string(n) + ',' + (guided ? fmt(gscale) : "0") + ",ddim," + std::to_string(k) + ',' + fmt(ddim[k]) + '\n';
      }
      const double cyc_max = *std::max_element(cyc.begin(), cyc.end());
      const double ddim_avg = mean(ddim);
      const double ddim_min = *std::min_element(ddim.begin(), ddim.end());
      const std::string key = guided ? "guided" : "unguided";
      row[key] = {{"cycle_sde_max", cyc_max}, {"ddim_mean", ddim_avg}, {"ddim_min", ddim_min},
                  {"ddim_max", *std::max_element(ddim.begin(), ddim.end())}};
      cycle_ok = cycle_ok && cyc_max <= (guided ? 1e-6 : 1e-8);
      ordering_ok = ordering_ok && cyc_max < ddim_min;
      if (!guided) ddim_mean.push_back(ddim_avg);
    }
    table.push_back(row);
  }
  bool decreasing = true;
  for (std::size_t i = 1; i < ddim_mean.size(); ++i) decreasing = decreasing && ddim_mean[i] < ddim_mean[i - 1];
  run.check("cycle_sde_round_trip", cycle_ok);
  run.check("ddim_error_decreasing_in_n", decreasing);
  run.check("cycle_sde_below_ddim", ordering_ok);
  run.outcome.summary["table"] = table;
  run.write("reconstruct.csv", csv);
  return run.finish();
}

// ---------------------------------------------------------------------------

namespace {

const Pixel kDirections[4] = {{0, 1}, {0, -1}, {1, 0}, {-1, 0}};

// Source bump and drag direction for one seeded trial; the target bump lies on
// the lattice.
DragPair drag_trial(const BumpDataset& bumps, int distance, const CounterRng& rng) {
  const auto dir = kDirections[std::min(3, static_cast<int>(rng.uniform(StreamKind::aux, 0) * 4.0))];
  std::vector<DragPair> options;
  for (const auto& c : bumps.centers) {
    const Pixel t{c.row + distance * dir.row, c.col + distance * dir.col};
    if (bumps.find(t) != static_cast<std::size_t>(-1)) options.push_back({c, t});
  }
  const auto pick = static_cast<std::size_t>(rng.uniform(StreamKind::aux, 1) * static_cast<double>(options.size()));
  return options[std::min(pick, options.size() - 1)];
}

}  // namespace

ExperimentOutcome run_drag_bench(const ExperimentConfig& config, const std::filesystem::path& out_dir) {
  Runner run(config, out_dir);
  const auto schedule = schedule_of(config);
  const Testbed tb(schedule);
  const auto seeds = static_cast<std::size_t>(config.get_int("seeds"));
  const std::uint64_t seed = config.get_u64("seed");
  DragSpec base;
  base.radius = static_cast<int>(config.get_int("radius"));
  base.n = static_cast<std::size_t>(config.get_int("steps"));
  base.t0 = config.get_double("t0");
  base.alpha = config.get_double("alpha");
  base.beta = config.get_double("beta");

  std::string csv = "distance,seed,source_row,source_col,target_row,target_col,method,success,nearest_index,nearest_distance\n";
  std::vector<int> sde_all, ode_all;
  ordered_json per_distance = ordered_json::array();
  std::vector<double> sde_rates, ode_rates;
  std::vector<double> distances = config.get_list("distances");
  for (double dd : distances) {
    const int d = static_cast<int>(dd);
    std::vector<int> sde_ok(seeds), ode_ok(seeds);
    std::vector<DragPair> trials(seeds);
    std::vector<NearestResult> sde_nn(seeds), ode_nn(seeds);
    parallel_for(seeds, workers_of(config), [&](std::size_t b, std::size_t e) {
      for (std::size_t k = b; k < e; ++k) {
        const CounterRng rng = CounterRng(seed, k).derive(static_cast<std::uint64_t>(d));
        trials[k] = drag_trial(tb.bumps, d, rng);
        DragSpec spec = base;
        spec.pairs = {trials[k]};
        const auto x0 = tb.image(tb.bumps.find(trials[k].source));
        const std::size_t want = tb.bumps.find(trials[k].target);
        sde_nn[k] = nearest_dataset_distance(sde_drag(x0, *tb.model, spec, rng).values, *tb.dataset);
        ode_nn[k] = nearest_dataset_distance(ode_drag(x0, *tb.model, spec, rng).values, *tb.dataset);
        sde_ok[k] = sde_nn[k].index == want;
        ode_ok[k] = ode_nn[k].index == want;
      }
    });
    for (std::size_t k = 0; k < seeds; ++k) {
      const auto& t = trials[k];
      const std::string prefix = std::to_string(d) + ',' + std::to_string(k) + ',' + std::to_string(t.source.row) + ',' +
                                 std::to_string(t.source.col) + ',' + std::to_string(t.target.row) + ',' +
                                 std::to_string(t.target.col) + ',';
      csv += prefix + "sde," + std::to_string(sde_ok[k]) + ',' + std::to_string(sde_nn[k].index) + ',' + fmt(sde_nn[k].distance) + '\n';
      csv += prefix + "ode," + std::to_string(ode_ok[k]) + ',' + std::to_string(ode_nn[k].index) + ',' + fmt(ode_nn[k].distance) + '\n';
    }
    sde_all.insert(sde_all.end(), sde_ok.begin(), sde_ok.end());
    ode_all.insert(ode_all.end(), ode_ok.begin(), ode_ok.end());
    sde_rates.push_back(rate(sde_ok));
    ode_rates.push_back(rate(ode_ok));
    per_distance.push_back({{"distance", d}, {"sde_success", rate(sde_ok)}, {"ode_success", rate(ode_ok)}});
  }

  // identity drags: a_s = a_t, alpha = beta = 1, m = 1
  std::vector<int> id_sde(seeds), id_ode(seeds);
  parallel_for(seeds, workers_of(config), [&](std::size_t b, std::size_t e) {
    for (std::size_t k = b; k < e; ++k) {
      const CounterRng rng = CounterRng(seed, k).derive(0);
      const auto idx = static_cast<std::size_t>(rng.uniform(StreamKind::aux, 0) * static_cast<double>(tb.bumps.images.size()));
      const auto c = tb.bumps.centers[std::min(idx, tb.bumps.centers.size() - 1)];
      DragSpec spec = base;
      spec.pairs = {{c, c}};
      spec.alpha = 1.0;
      spec.beta = 1.0;
      spec.m = 1;
      const auto x0 = tb.image(tb.bumps.find(c));
      id_sde[k] = nearest_dataset_distance(sde_drag(x0, *tb.model, spec, rng).values, *tb.dataset).index == tb.bumps.find(c);
      id_ode[k] = nearest_dataset_distance(ode_drag(x0, *tb.model, spec, rng).values, *tb.dataset).index == tb.bumps.find(c);
    }
  });
  for (std::size_t k = 0; k < seeds; ++k) {
    csv += "0," + std::to_string(k) + ",,,,,sde_identity," + std::to_string(id_sde[k]) + ",,\n";
    csv += "0," + std::to_string(k) + ",,,,,ode_identity," + std::to_string(id_ode[k]) + ",,\n";
  }

  const double margin = rate(sde_all) - rate(ode_all);
  run.check("sde_beats_ode_pooled", margin >= config.get_double("margin_min"),
            {{"sde_success", rate(sde_all)}, {"ode_success", rate(ode_all)}, {"margin", margin}});
  const double id_min = config.get_double("identity_rate_min");
  run.check("identity_drags", rate(id_sde) >= id_min && rate(id_ode) >= id_min,
            {{"sde_identity", rate(id_sde)}, {"ode_identity", rate(id_ode)}});
  bool monotone = true;
  for (std::size_t i = 1; i < distances.size(); ++i)
    if (distances[i] > distances[i - 1])
      monotone = monotone && sde_rates[i] <= sde_rates[i - 1] && ode_rates[i] <= ode_rates[i - 1];
  run.check("success_non_increasing_in_distance", monotone);
  run.outcome.summary["per_distance"] = per_distance;
  run.write("drag_bench.csv", csv);
  return run.finish();
}

// ---------------------------------------------------------------------------

ExperimentOutcome run_inpaint_bench(const ExperimentConfig& config, const std::filesystem::path& out_dir) {
  Runner run(config, out_dir);
  const auto schedule = schedule_of(config);
  const Testbed tb(schedule);
  const auto seeds = static_cast<std::size_t>(config.get_int("seeds"));
  const std::uint64_t seed = config.get_u64("seed");
  const double t0 = config.get_double("t0");
  std::vector<std::size_t> right;
  for (std::size_t i = 0; i < tb.bumps.labels.size(); ++i)
    if (tb.bumps.labels[i] == kRight) right.push_back(i);
  // synthesize the right half; the left half is observed
  BinaryMask mask(tb.height, tb.width);
  for (std::size_t r = 0; r < tb.height; ++r)
    for (std::size_t c = tb.width / 2; c < tb.width; ++c) mask.values[r * tb.width + c] = 1;

  std::string csv = "steps,seed,image,method,nearest_index,nearest_distance\n";
  ordered_json table = ordered_json::array();
  std::vector<double> steps_list = config.get_list("steps_list");
  std::vector<double> sde_mean, ode_mean;
  bool zero_mask_exact = true;
  for (double nd : steps_list) {
    const auto n = static_cast<std::size_t>(nd);
    const auto grid = make_time_grid(schedule, n, t0);
    std::vector<NearestResult> sde(seeds), ode(seeds);
    std::vector<std::size_t> image(seeds);
    parallel_for(seeds, workers_of(config), [&](std::size_t b, std::size_t e) {
      for (std::size_t k = b; k < e; ++k) {
        const CounterRng rng(seed, k);
        const auto pick = static_cast<std::size_t>(rng.uniform(StreamKind::aux, 0) * static_cast<double>(right.size()));
        image[k] = right[std::min(pick, right.size() - 1)];
        const auto observed = tb.image(image[k]);
        sde[k] = nearest_dataset_distance(inpaint(observed, mask, *tb.model, 1.0, grid, rng).values, *tb.dataset);
        ode[k] = nearest_dataset_distance(inpaint(observed, mask, *tb.model, 0.0, grid, rng).values, *tb.dataset);
      }
    });
    std::vector<double> sd, od;
    for (std::size_t k = 0; k < seeds; ++k) {
      sd.push_back(sde[k].distance);
      od.push_back(ode[k].distance);
      const std::string prefix = std::to_string(n) + ',' + std::to_string(k) + ',' + std::to_string(image[k]) + ',';
      csv += prefix + "sde," + std::to_string(sde[k].index) + ',' + fmt(sde[k].distance) + '\n';
      csv += prefix + "ode," + std::to_string(ode[k].index) + ',' + fmt(ode[k].distance) + '\n';
    }
    sde_mean.push_back(mean(sd));
    ode_mean.push_back(mean(od));
    table.push_back({{"steps", n}, {"sde_mean_distance", sde_mean.back()}, {"ode_mean_distance", ode_mean.back()}});

    const auto observed = tb.image(right.front());
    zero_mask_exact = zero_mask_exact &&
                      inpaint(observed, BinaryMask(tb.height, tb.width), *tb.model, 1.0, grid, CounterRng(seed, 0)) == observed;
  }
  bool each = true;
  for (std::size_t i = 0; i < steps_list.size(); ++i) each = each && sde_mean[i] <= ode_mean[i];
  run.check("sde_le_ode_each_n", each);
  const auto lo = std::min_element(steps_list.begin(), steps_list.end()) - steps_list.begin();
  const auto hi = std::max_element(steps_list.begin(), steps_list.end()) - steps_list.begin();
  run.check("sde_fewest_steps_le_ode_most_steps", sde_mean[lo] <= ode_mean[hi],
            {{"sde", sde_mean[lo]}, {"ode", ode_mean[hi]}});
  run.check("zero_mask_returns_input", zero_mask_exact);
  run.outcome.summary["table"] = table;
  run.write("inpaint_bench.csv", csv);
  return run.finish();
}

// ---------------------------------------------------------------------------

ExperimentOutcome run_translate_bench(const ExperimentConfig& config, const std::filesystem::path& out_dir) {
  Runner run(config, out_dir);
  const auto schedule = schedule_of(config);
  const Testbed tb(schedule);
  const auto seeds = static_cast<std::size_t>(config.get_int("seeds"));
  const std::uint64_t seed = config.get_u64("seed");
  const double t0 = config.get_double("t0");
  const auto grid = make_time_grid(schedule, static_cast<std::size_t>(config.get_int("steps")), t0);
  const auto guidance = constant_guidance(config.get_double("guidance_scale"), t0);

  struct Trial {
    std::size_t image = 0;
    Label source, target;
    NearestResult sde_any, ode_any, sde_target, ode_target;
  };
  std::vector<Trial> trials(seeds);
  parallel_for(seeds, workers_of(config), [&](std::size_t b, std::size_t e) {
    for (std::size_t k = b; k < e; ++k) {
      auto& tr = trials[k];
      const CounterRng rng(seed, k);
      tr.source = k % 2 == 0 ? kLeft : kRight;
      tr.target = k % 2 == 0 ? kRight : kLeft;
      const auto members = tb.dataset->members(tr.source);
      const auto pick = static_cast<std::size_t>(rng.uniform(StreamKind::aux, 0) * static_cast<double>(members.size()));
      tr.image = members[std::min(pick, members.size() - 1)];
      const auto x0 = tb.image(tr.image);
      const auto sde = domain_transfer(x0, *tb.model, tr.source, tr.target, TransferMode::cycle_sde, grid, rng, guidance);
      const auto ode = domain_transfer(x0, *tb.model, tr.source, tr.target, TransferMode::ode, grid, rng, guidance);
      tr.sde_any = nearest_dataset_distance(sde.values, *tb.dataset);
      tr.ode_any = nearest_dataset_distance(ode.values, *tb.dataset);
      tr.sde_target = nearest_dataset_distance(sde.values, *tb.dataset, tr.target);
      tr.ode_target = nearest_dataset_distance(ode.values, *tb.dataset, tr.target);
    }
  });
  std::string csv = "seed,image,source_label,target_label,method,success,nearest_index,target_class_distance\n";
  std::vector<int> sde_ok, ode_ok;
  std::vector<double> sde_d, ode_d;
  for (std::size_t k = 0; k < seeds; ++k) {
    const auto& tr = trials[k];
    const int s_ok = tb.dataset->label(tr.sde_any.index) == tr.target;
    const int o_ok = tb.dataset->label(tr.ode_any.index) == tr.target;
    sde_ok.push_back(s_ok);
    ode_ok.push_back(o_ok);
    sde_d.push_back(tr.sde_target.distance);
    ode_d.push_back(tr.ode_target.distance);
    const std::string prefix = std::to_string(k) + ',' + std::to_string(tr.image) + ',' +
                               std::to_string(tr.source.value) + ',' + std::to_string(tr.target.value) + ',';
    csv += prefix + "cycle_sde," + std::to_string(s_ok) + ',' + std::to_string(tr.sde_any.index) + ',' + fmt(tr.sde_target.distance) + '\n';
    csv += prefix + "ode," + std::to_string(o_ok) + ',' + std::to_string(tr.ode_any.index) + ',' + fmt(tr.ode_target.distance) + '\n';
  }
  const ordered_json details{{"sde_success", rate(sde_ok)}, {"ode_success", rate(ode_ok)},
                             {"sde_mean_target_distance", mean(sde_d)}, {"ode_mean_target_distance", mean(ode_d)}};
  run.check("cycle_sde_success_ge_ode", rate(sde_ok) >= rate(ode_ok), details);
  run.check("cycle_sde_distance_le_ode", mean(sde_d) <= mean(ode_d), details);
  run.write("translate_bench.csv", csv);
  return run.finish();
}

ExperimentOutcome run_experiment(const ExperimentConfig& config, const std::filesystem::path& out_dir) {
  switch (config.experiment()) {
    case Experiment::toy1d: return run_toy1d(config, out_dir);
    case Experiment::theorem_suite: return run_theorem_suite(config, out_dir);
    case Experiment::reconstruct: return run_reconstruct(config, out_dir);
    case Experiment::drag_bench: return run_drag_bench(config, out_dir);
    case Experiment::inpaint_bench: return run_inpaint_bench(config, out_dir);
    case Experiment::translate_bench: return run_translate_bench(config, out_dir);
  }
  throw FormatError("unknown experiment");
}

}  // namespace sdelab
