#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "wdro/experiments.hpp"
#include "wdro/losses.hpp"
#include "wdro/reg_dual.hpp"
#include "wdro/space.hpp"

namespace wdro {

struct FamilySpec {
  LossKind kind = LossKind::linear;
  std::vector<Interval> theta_box;
  int theta_grid_resolution = 1;
  int kmeans_clusters = 1;
  std::string tables_csv;

  friend bool operator==(const FamilySpec&, const FamilySpec&) = default;
};

struct ExperimentConfig {
  SampleSpace space;
  TransportCost cost;
  FamilySpec family;
  std::optional<ReferenceKernel> kernel;
  std::optional<RegParams> reg;
  GroundTruth ground_truth;
  double tol = 1e-8;
  bool refine = true;
  double tie_tol = -1.0;         // negative: automatic
  double degeneracy_tol = -1.0;  // negative: 1e-6 (1 + sup norm)
  std::vector<double> rho_list;  // "rho" parses into a one-element list
  std::vector<int> n_list;       // likewise for "n"
  int trials = 200;
  double delta = 0.05;
  std::uint64_t master_seed = 0;
  std::string output_dir = "out";
  std::vector<double> lambda_grid;
  double target_coverage = 0.9;
  int mu_points = 16;

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

/// Reads and validates a JSON config; relative file references resolve
/// against the config's directory. Throws ConfigError naming the field path.
ExperimentConfig parse_config(const std::string& path);
ExperimentConfig parse_config_json(const nlohmann::json& j, const std::string& base_dir = ".");
nlohmann::json to_json(const ExperimentConfig& config);

LossFamily build_family(const ExperimentConfig& config);
/// Experiment setup with dataset rows loaded.
ExperimentSetup build_setup(const ExperimentConfig& config, int workers);

}  // namespace wdro
