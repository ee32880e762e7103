// Command-line front end: experiments, single edits, sampling, dataset files.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "sdelab/edit.hpp"
#include "sdelab/error.hpp"
#include "sdelab/experiments.hpp"
#include "sdelab/image.hpp"
#include "sdelab/invert.hpp"
#include "sdelab/metrics.hpp"
#include "sdelab/sampler.hpp"

namespace fs = std::filesystem;
using namespace sdelab;
using nlohmann::ordered_json;

namespace {

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = "out";
  std::optional<int> workers;
};

struct ModelChoice {
  std::string dataset_dir;  // empty = generated bump testbed
  std::string schedule = "cosine";
};

std::shared_ptr<const EmpiricalDataset> load_dataset(const ModelChoice& mc) {
  return mc.dataset_dir.empty() ? generate_bump_dataset().as_dataset() : read_dataset(mc.dataset_dir);
}

void write_manifest(const fs::path& path, ordered_json body, double wall) {
  body["wall_time_seconds"] = wall;
  std::ofstream os(path);
  if (!os) throw FormatError("cannot write " + path.string());
  os << body.dump(2) << '\n';
}

double seconds_since(std::chrono::steady_clock::time_point t) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t).count();
}

int run_named(Experiment e, const Globals& g, const std::vector<std::string>& sets) {
  auto config = ExperimentConfig::defaults(e);
  if (!g.config.empty()) config.load_file(g.config);
  for (const auto& kv : sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw FormatError("--set expects key=value, got '" + kv + "'");
    config.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (g.seed) config.set("seed", std::to_string(*g.seed));
  if (g.workers) config.set("workers", std::to_string(*g.workers));
  const auto outcome = run_experiment(config, g.out);
  for (const auto& check : outcome.summary["checks"])
    std::cout << (check["passed"].get<bool>() ? "PASS " : "FAIL ") << check["name"].get<std::string>()
              << ' ' << check["details"].dump() << '\n';
  std::cout << (outcome.passed ? "all checks passed" : "some checks failed") << '\n';
  return outcome.passed ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Diffusion editing and SDE/ODE sampler laboratory"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config, "key = value experiment config file");
  app.add_option("--seed", g.seed, "master seed");
  app.add_option("--out", g.out, "output directory (or file for single edits)");
  app.add_option("--workers", g.workers, "worker threads");

  // experiments
  std::vector<std::string> sets;
  struct Named {
    const char* name;
    Experiment experiment;
    const char* help;
  };
  const Named named[] = {
      {"toy1d", Experiment::toy1d, "1D mixture: SDE vs ODE under mismatched priors"},
      {"theorems", Experiment::theorem_suite, "numerical checks of the contraction/invariance results"},
      {"drag-bench", Experiment::drag_bench, "SDE-Drag vs ODE-Drag on the bump testbed"},
      {"inpaint-bench", Experiment::inpaint_bench, "SDE vs ODE inpainting on the bump testbed"},
      {"translate-bench", Experiment::translate_bench, "Cycle-SDE vs ODE label transfer"},
  };
  std::vector<std::pair<CLI::App*, Experiment>> experiment_cmds;
  for (const auto& n : named) {
    auto* cmd = app.add_subcommand(n.name, n.help);
    cmd->add_option("--set", sets, "override a config key (key=value)");
    experiment_cmds.emplace_back(cmd, n.experiment);
  }

  // reconstruct: experiment, or record/replay of one image when --image is given
  auto* recon = app.add_subcommand("reconstruct", "round-trip errors (experiment) or one image's record/replay");
  recon->add_option("--set", sets, "override a config key (key=value)");
  std::string recon_image, recon_record, recon_replay;
  std::size_t recon_steps = 60;
  double recon_t0 = 0.6;
  ModelChoice recon_model;
  recon->add_option("--image", recon_image, "grid file to record");
  recon->add_option("--record", recon_record, "record file to write");
  recon->add_option("--replay", recon_replay, "record file to replay instead of recording");
  recon->add_option("--steps", recon_steps);
  recon->add_option("--t0", recon_t0);
  recon->add_option("--dataset", recon_model.dataset_dir, "dataset directory (default: bump testbed)");
  recon->add_option("--schedule", recon_model.schedule)->check(CLI::IsMember({"cosine", "linear"}));

  // gen-dataset
  auto* gen = app.add_subcommand("gen-dataset", "write the bump testbed as grid files");
  BumpParams bump;
  gen->add_option("--size", bump.size);
  gen->add_option("--scale", bump.scale);
  gen->add_option("--peak", bump.peak);

  // sample
  auto* samp = app.add_subcommand("sample", "ensemble sampling from a prior");
  std::string samp_model = "gm1d", samp_prior = "std";
  double samp_eta = 1.0, samp_t0 = 1.0;
  std::size_t samp_steps = 1000, samp_particles = 1000;
  ModelChoice samp_mc;
  double gauss_mean = 0.0, gauss_var = 1.0;
  samp->add_option("--model", samp_model)->check(CLI::IsMember({"gm1d", "gauss", "dataset"}));
  samp->add_option("--prior", samp_prior, "std | normal:m,v | uniform:lo,hi | point:x");
  samp->add_option("--eta", samp_eta)->check(CLI::Range(0.0, 1.0));
  samp->add_option("--steps", samp_steps);
  samp->add_option("--t0", samp_t0);
  samp->add_option("--particles", samp_particles);
  samp->add_option("--gauss-mean", gauss_mean);
  samp->add_option("--gauss-variance", gauss_var);
  samp->add_option("--dataset", samp_mc.dataset_dir);
  samp->add_option("--schedule", samp_mc.schedule)->check(CLI::IsMember({"cosine", "linear"}));

  // drag
  auto* drag_cmd = app.add_subcommand("drag", "drag points in one image");
  std::string drag_image, drag_points, drag_mask, drag_mode = "sde", drag_m = "auto";
  DragSpec spec;
  ModelChoice drag_mc;
  drag_cmd->add_option("--image", drag_image)->required();
  drag_cmd->add_option("--points", drag_points, "y1s,x1s:y1t,x1t[;...]")->required();
  drag_cmd->add_option("--mask", drag_mask);
  drag_cmd->add_option("--mode", drag_mode)->check(CLI::IsMember({"sde", "ode"}));
  drag_cmd->add_option("--r", spec.radius);
  drag_cmd->add_option("--alpha", spec.alpha);
  drag_cmd->add_option("--beta", spec.beta);
  drag_cmd->add_option("--m", drag_m);
  drag_cmd->add_option("--t0", spec.t0);
  drag_cmd->add_option("--steps", spec.n);
  drag_cmd->add_option("--dataset", drag_mc.dataset_dir);
  drag_cmd->add_option("--schedule", drag_mc.schedule)->check(CLI::IsMember({"cosine", "linear"}));

  // inpaint
  auto* inp = app.add_subcommand("inpaint", "fill the masked region of one image");
  std::string inp_image, inp_mask;
  double inp_eta = 1.0, inp_t0 = 1.0;
  std::size_t inp_steps = 50;
  ModelChoice inp_mc;
  inp->add_option("--image", inp_image)->required();
  inp->add_option("--mask", inp_mask, "grid file; nonzero = synthesize")->required();
  inp->add_option("--eta", inp_eta)->check(CLI::Range(0.0, 1.0));
  inp->add_option("--steps", inp_steps);
  inp->add_option("--t0", inp_t0);
  inp->add_option("--dataset", inp_mc.dataset_dir);
  inp->add_option("--schedule", inp_mc.schedule)->check(CLI::IsMember({"cosine", "linear"}));

  // translate
  auto* tr = app.add_subcommand("translate", "regenerate one image under another label");
  std::string tr_image, tr_mode = "cycle_sde";
  int tr_source = 0, tr_target = 1;
  double tr_t0 = 1.0, tr_guidance = 0.0;
  std::size_t tr_steps = 100;
  ModelChoice tr_mc;
  tr->add_option("--image", tr_image)->required();
  tr->add_option("--source", tr_source);
  tr->add_option("--target", tr_target);
  tr->add_option("--mode", tr_mode)->check(CLI::IsMember({"ode", "cycle_sde"}));
  tr->add_option("--steps", tr_steps);
  tr->add_option("--t0", tr_t0);
  tr->add_option("--guidance", tr_guidance, "constant guidance scale (0 = off)");
  tr->add_option("--dataset", tr_mc.dataset_dir);
  tr->add_option("--schedule", tr_mc.schedule)->check(CLI::IsMember({"cosine", "linear"}));

  CLI11_PARSE(app, argc, argv);

  try {
    const auto start = std::chrono::steady_clock::now();
    const std::uint64_t seed = g.seed.value_or(0);
    for (const auto& [cmd, e] : experiment_cmds)
      if (cmd->parsed()) return run_named(e, g, sets);

    if (recon->parsed()) {
      if (recon_image.empty() && recon_replay.empty()) return run_named(Experiment::reconstruct, g, sets);
      const EmpiricalScoreModel model(load_dataset(recon_model), NoiseSchedule::make(parse_schedule_kind(recon_model.schedule)));
      LatentImage image;
      CycleNoiseRecord record;
      if (!recon_replay.empty()) {
        record = read_record(recon_replay, model);
        const auto side = static_cast<std::size_t>(std::lround(std::sqrt(static_cast<double>(record.dimension()))));
        image = LatentImage(side, side);
      } else {
        image = read_grid(recon_image);
        record = cycle_record(model, image.values, make_time_grid(model.schedule(), recon_steps, recon_t0), CounterRng(seed, 0));
        if (!recon_record.empty()) write_record(record, recon_record);
      }
      const LatentImage out(image.height, image.width, cycle_replay(record, record.latent_at_t0, model));
      write_grid(out, g.out);
      if (!recon_image.empty())
        std::cout << "max-abs round-trip error " << format_double(
            [&] { double m = 0; for (std::size_t i = 0; i < out.values.size(); ++i) m = std::max(m, std::abs(out.values[i] - image.values[i])); return m; }()) << '\n';
      return 0;
    }

    if (gen->parsed()) {
      write_bump_dataset(generate_bump_dataset(bump), g.out);
      std::cout << "wrote dataset to " << g.out << '\n';
      return 0;
    }

    if (samp->parsed()) {
      const auto schedule = NoiseSchedule::make(parse_schedule_kind(samp_mc.schedule));
      std::unique_ptr<ScoreModel> model;
      if (samp_model == "gm1d") model = std::make_unique<GaussianMixture1DModel>(GaussianMixture1D{}, schedule);
      else if (samp_model == "gauss") model = std::make_unique<GaussianDataModel>(GaussianData{gauss_mean, gauss_var}, schedule);
      else model = std::make_unique<EmpiricalScoreModel>(load_dataset(samp_mc), schedule);
      SamplerConfig sc;
      sc.eta = samp_eta;
      sc.grid = make_time_grid(schedule, samp_steps, samp_t0);
      sc.seed = seed;
      SampleOptions so;
      so.workers = static_cast<std::size_t>(g.workers.value_or(1));
      const auto result = sample(*model, sc, Prior::parse(samp_prior), samp_particles, so);
      fs::path out = g.out;
      if (out.has_parent_path()) fs::create_directories(out.parent_path());
      std::ofstream os(out);
      if (!os) throw FormatError("cannot write " + out.string());
      os << "particle,dim,value\n";
      for (std::size_t p = 0; p < result.particles; ++p)
        for (std::size_t d = 0; d < result.dimension; ++d)
          os << p << ',' << d << ',' << format_double(result.state(p)[d]) << '\n';
      write_manifest(out.string() + ".manifest.json",
                     {{"command", "sample"}, {"model", samp_model}, {"prior", samp_prior}, {"eta", samp_eta},
                      {"steps", samp_steps}, {"t0", samp_t0}, {"grid", "uniform"}, {"particles", samp_particles},
                      {"schedule", samp_mc.schedule}, {"seed", seed}},
                     seconds_since(start));
      return 0;
    }

    if (drag_cmd->parsed()) {
      const auto image = read_grid(drag_image);
      spec.pairs = parse_drag_points(drag_points);
      if (drag_m != "auto") spec.m = std::stoi(drag_m);
      if (!drag_mask.empty()) spec.mask = BinaryMask::from_image(read_grid(drag_mask));
      const EmpiricalScoreModel model(load_dataset(drag_mc), NoiseSchedule::make(parse_schedule_kind(drag_mc.schedule)));
      const CounterRng rng(seed, 0);
      const auto out = drag_mode == "sde" ? sde_drag(image, model, spec, rng) : ode_drag(image, model, spec, rng);
      write_grid(out, g.out);
      std::cout << "m = " << resolve_drag_steps(spec) << "; wrote " << g.out << '\n';
      return 0;
    }

    if (inp->parsed()) {
      const auto image = read_grid(inp_image);
      const auto mask = BinaryMask::from_image(read_grid(inp_mask));
      const EmpiricalScoreModel model(load_dataset(inp_mc), NoiseSchedule::make(parse_schedule_kind(inp_mc.schedule)));
      write_grid(inpaint(image, mask, model, inp_eta, make_time_grid(model.schedule(), inp_steps, inp_t0), CounterRng(seed, 0)), g.out);
      return 0;
    }

    if (tr->parsed()) {
      const auto image = read_grid(tr_image);
      const EmpiricalScoreModel model(load_dataset(tr_mc), NoiseSchedule::make(parse_schedule_kind(tr_mc.schedule)));
      std::optional<GuidanceSchedule> guidance;
      if (tr_guidance != 0.0) guidance = GuidanceSchedule{tr_guidance, tr_guidance, tr_t0};
      write_grid(domain_transfer(image, model, Label{tr_source}, Label{tr_target}, parse_transfer_mode(tr_mode),
                                 make_time_grid(model.schedule(), tr_steps, tr_t0), CounterRng(seed, 0), guidance),
                 g.out);
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
