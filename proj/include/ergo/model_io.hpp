#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ergo/chain.hpp"

namespace ergo {

/// Parsed model file: a named chain plus named observables, potentials,
/// boundary sets and initial laws. All cross-references are resolved at parse
/// time.
struct ModelFile {
  std::vector<std::string> states;
  Matrix matrix;
  std::map<std::string, Vector> observables;
  std::map<std::string, Vector> potentials;
  std::map<std::string, std::vector<std::string>> boundaries;
  std::map<std::string, Vector> initial_laws;
  std::string digest;

  StochasticChain chain() const;
  Observable observable(const std::string& name) const;
  Observable potential(const std::string& name) const;
  Distribution initial_law(const std::string& name) const;
  std::vector<Eigen::Index> boundary(const std::string& name) const;
};

ModelFile parse_model(const std::string& path);
ModelFile parse_model_text(const std::string& text);

/// Serialized model document; parse_model_text(emit_model(m)) reproduces m.
std::string emit_model(const ModelFile& model);

/// FNV-1a 64 over raw bytes, hex-encoded; identifies the exact input file.
std::string digest_bytes(const std::string& bytes);

enum class Command { analyze, couple, limits, ldp, poisson };

struct Flags {
  // shared
  std::uint64_t seed = 0;
  // analyze
  int n_max = 100;
  int n0 = 1;
  // couple
  std::string from;
  std::string to;
  bool vaserstein = false;
  std::size_t paths = 100000;
  // limits
  std::string observable;
  std::string mode = "mean";
  long n = 10000;
  std::size_t replicas = 10000;
  // ldp
  double beta_min = -3.0;
  double beta_max = 3.0;
  int grid = 61;
  std::optional<double> epsilon;
  long denominator = 1000;
  double delta0 = 1e-3;
  // poisson
  std::string boundary;
  std::string boundary_data;
  std::string potential;
  std::string method = "linear";
  std::size_t mc_paths = 10000;
};

/// Finished command output: a machine-first JSON report plus optional CSV
/// plot rows. Reports with identical inputs and seeds serialize to identical
/// bytes.
struct Report {
  std::string json_text;
  std::vector<std::string> csv_rows;
};

Report run(Command command, const ModelFile& model, const Flags& flags);

Command parse_command(const std::string& name);

/// Process exit status for an error, per the documented code table.
int exit_code_for(const std::exception& error);

}  // namespace ergo
