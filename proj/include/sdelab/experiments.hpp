#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace sdelab {

enum class Experiment { toy1d, theorem_suite, reconstruct, drag_bench, inpaint_bench, translate_bench };

std::string_view to_string(Experiment experiment);
Experiment parse_experiment(std::string_view name);

// Flat key = value parameters. The set of keys is fixed per experiment;
// setting an unknown key throws FormatError.
class ExperimentConfig {
 public:
  static ExperimentConfig defaults(Experiment experiment);

  // Lines "key = value"; '#' starts a comment. Later values win.
  void load_file(const std::filesystem::path& path);
  void load_text(std::string_view text, std::string_view origin = "config");
  void set(const std::string& key, const std::string& value);
  [[nodiscard]] bool has(const std::string& key) const { return values_.contains(key); }

  [[nodiscard]] Experiment experiment() const noexcept { return experiment_; }
  [[nodiscard]] const std::string& get(const std::string& key) const;
  [[nodiscard]] double get_double(const std::string& key) const;
  [[nodiscard]] std::int64_t get_int(const std::string& key) const;
  [[nodiscard]] std::uint64_t get_u64(const std::string& key) const;
  [[nodiscard]] std::vector<double> get_list(const std::string& key) const;
  [[nodiscard]] std::vector<std::string> get_strings(const std::string& key) const;  // ';'-separated

  [[nodiscard]] nlohmann::ordered_json to_json() const;

 private:
  Experiment experiment_ = Experiment::toy1d;
  std::map<std::string, std::string> values_;
};

struct ExperimentOutcome {
  bool passed = false;
  nlohmann::ordered_json summary;  // per-check results and headline numbers
  std::vector<std::filesystem::path> files;
};

// Every runner writes its CSV files and <name>_manifest.json into `out_dir`.
ExperimentOutcome run_toy1d(const ExperimentConfig& config, const std::filesystem::path& out_dir);
ExperimentOutcome run_theorem_suite(const ExperimentConfig& config,
                                    const std::filesystem::path& out_dir);
ExperimentOutcome run_reconstruct(const ExperimentConfig& config,
                                  const std::filesystem::path& out_dir);
ExperimentOutcome run_drag_bench(const ExperimentConfig& config, const std::filesystem::path& out_dir);
ExperimentOutcome run_inpaint_bench(const ExperimentConfig& config,
                                    const std::filesystem::path& out_dir);
ExperimentOutcome run_translate_bench(const ExperimentConfig& config,
                                      const std::filesystem::path& out_dir);

ExperimentOutcome run_experiment(const ExperimentConfig& config, const std::filesystem::path& out_dir);

}  // namespace sdelab
