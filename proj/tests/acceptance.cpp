// Acceptance run: one line per criterion, each timed against its budget.
// Usage: sdelab_acceptance <unit-test-binary> <scratch-dir>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "sdelab/experiments.hpp"
#include "sdelab/metrics.hpp"

using namespace sdelab;

namespace {

struct Verdict {
  bool passed = false;
  std::string detail;
};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

// Failed check names with their details; headline numbers otherwise.
Verdict from_outcome(const ExperimentOutcome& o) {
  Verdict v{o.passed, {}};
  for (const auto& c : o.summary["checks"]) {
    if (c["passed"].get<bool>()) continue;
    v.detail += (v.detail.empty() ? "failed: " : "; ") + c["name"].get<std::string>();
    if (!c["details"].empty()) v.detail += " " + c["details"].dump();
  }
  return v;
}

ExperimentOutcome run_default(Experiment e, const std::filesystem::path& dir) {
  return run_experiment(ExperimentConfig::defaults(e), dir / std::string(to_string(e)));
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 3) {
    std::fprintf(stderr, "usage: %s <unit-test-binary> <scratch-dir>\n", argv[0]);
    return 2;
  }
  const std::string unit_binary = argv[1];
  const std::filesystem::path dir = argv[2];
  std::filesystem::create_directories(dir);

  const auto schedule = NoiseSchedule::cosine();
  const GaussianData data{0.5, 0.25};
  const auto grid = make_time_grid(schedule, 2000, 1.0);

  struct Criterion {
    int id;
    std::string name;
    double budget_s;
    std::function<Verdict()> run;
  };
  const std::vector<Criterion> criteria = {
      {1, "toy 1D: SDE recovers the data under mismatched priors, ODE does not", 120,
       [&] { return from_outcome(run_default(Experiment::toy1d, dir)); }},
      {2, "KL contraction along the reverse SDE (exact)", 10,
       [&] {
         const auto r = theorem1_check_exact(data, schedule, 2.0, 4.0, grid);
         const auto fine = theorem1_check_exact(data, schedule, 2.0, 4.0, make_time_grid(schedule, 4000, 1.0));
         bool strict = true;
         for (std::size_t i = 1; i < r.report.kl.size(); ++i) strict = strict && r.report.kl[i] < r.report.kl[i - 1];
         const double ratio = r.residual / fine.residual;
         return Verdict{r.passed && strict && r.residual < 1e-3 && ratio >= 3.0,
                        "residual " + num(r.residual) + ", refinement ratio " + num(ratio)};
       }},
      {3, "KL invariance along the probability-flow ODE", 60,
       [&] {
         const auto exact = theorem2_check_exact(data, schedule, 2.0, 4.0, grid);
         double drift = 0.0;
         for (double kl : exact.report.kl) drift = std::max(drift, std::abs(kl - exact.report.kl.front()));
         const auto mc = theorem2_check_transport({0.5, 0.2}, schedule, 2.0, 4.0, grid, 10000, 0);
         return Verdict{exact.passed && drift < 1e-6 && mc.passed,
                        "max drift " + num(drift) + "; transport: " + mc.diagnostics};
       }},
      {4, "KL contraction through the Cycle-SDE channel, three priors", 180,
       [&] {
         const std::vector<Prior> priors = {Prior::normal(2, 4), Prior::uniform(-2, 2), Prior::normal(0, 0.25)};
         const auto results = theorem3_check({0.5, 0.2}, schedule, priors, make_time_grid(schedule, 50, 0.6));
         Verdict v{true, {}};
         for (const auto& r : results) {
           v.passed = v.passed && r.passed;
           v.detail += (v.detail.empty() ? "" : "; ") + r.diagnostics;
         }
         return v;
       }},
      {5, "log-Sobolev exponential rate bound", 10,
       [&] {
         const auto r = lsi_rate_check({0.0, 1.0}, schedule, 2.0, 4.0, grid);
         return Verdict{r.passed, r.diagnostics};
       }},
      {6, "reconstruction: Cycle-SDE exact, DDIM error ordered", 600,
       [&] { return from_outcome(run_default(Experiment::reconstruct, dir)); }},
      {7, "drag: SDE-Drag success beats ODE-Drag by 10 points", 600,
       [&] { return from_outcome(run_default(Experiment::drag_bench, dir)); }},
      {8, "inpainting: SDE no worse than ODE at every step count", 300,
       [&] { return from_outcome(run_default(Experiment::inpaint_bench, dir)); }},
      {9, "translation: Cycle-SDE transfer no worse than ODE transfer", 300,
       [&] { return from_outcome(run_default(Experiment::translate_bench, dir)); }},
      {10, "unit and property suites", 120,
       [&] {
         const std::string cmd = "\"" + unit_binary + "\" --minimal > \"" + (dir / "unit.log").string() + "\" 2>&1";
         const int rc = std::system(cmd.c_str());
         return Verdict{rc == 0, rc == 0 ? "" : "see " + (dir / "unit.log").string()};
       }},
  };

  int failed = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = c.run();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = secs <= c.budget_s;
    const bool ok = v.passed && in_time;
    failed += !ok;
    std::printf("criterion %2d %s  %s  [%.1f s / %.0f s%s]%s%s\n", c.id, ok ? "PASS" : "FAIL", c.name.c_str(),
                secs, c.budget_s, in_time ? "" : ", over budget", v.detail.empty() ? "" : "  ", v.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
