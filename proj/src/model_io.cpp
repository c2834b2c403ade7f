#include "ergo/model_io.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "ergo/coupling.hpp"
#include "ergo/deviations.hpp"
#include "ergo/ergodicity.hpp"
#include "ergo/limits.hpp"
#include "ergo/poisson.hpp"

namespace ergo {

using nlohmann::json;

namespace {

json to_json(const Vector& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

json to_json(const std::vector<double>& v) {
  json out = json::array();
  for (double x : v) out.push_back(x);
  return out;
}

json to_json(const Matrix& m) {
  json out = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    out.push_back(to_json(Vector(m.row(i).transpose())));
  }
  return out;
}

Vector vector_from(const json& arr, const std::string& what) {
  if (!arr.is_array() || arr.empty()) {
    throw ParseError(what + " must be a non-empty array");
  }
  Vector v(static_cast<Eigen::Index>(arr.size()));
  Eigen::Index i = 0;
  for (const auto& x : arr) {
    if (!x.is_number()) {
      throw ParseError(what + " must contain numbers only");
    }
    v(i++) = x.get<double>();
  }
  return v;
}

std::string csv_number(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

std::string digest_bytes(const std::string& bytes) {
  std::uint64_t hash = 1469598103934665603ull;
  for (unsigned char c : bytes) {
    hash ^= c;
    hash *= 1099511628211ull;
  }
  std::ostringstream os;
  os << "fnv1a64:" << std::hex << hash;
  return os.str();
}

StochasticChain ModelFile::chain() const {
  return StochasticChain::validate(matrix, states);
}

Observable ModelFile::observable(const std::string& name) const {
  auto it = observables.find(name);
  if (it == observables.end()) {
    throw UnknownReferenceError("observable '" + name + "'");
  }
  return Observable(it->second);
}

Observable ModelFile::potential(const std::string& name) const {
  auto it = potentials.find(name);
  if (it == potentials.end()) {
    throw UnknownReferenceError("potential '" + name + "'");
  }
  return Observable(it->second);
}

Distribution ModelFile::initial_law(const std::string& name) const {
  auto it = initial_laws.find(name);
  if (it == initial_laws.end()) {
    throw UnknownReferenceError("initial law '" + name + "'");
  }
  return Distribution(it->second, 1e-9);
}

std::vector<Eigen::Index> ModelFile::boundary(const std::string& name) const {
  auto it = boundaries.find(name);
  if (it == boundaries.end()) {
    throw UnknownReferenceError("boundary '" + name + "'");
  }
  const StochasticChain c = chain();
  std::vector<Eigen::Index> out;
  out.reserve(it->second.size());
  for (const std::string& label : it->second) {
    out.push_back(c.index_of(label));
  }
  return out;
}

ModelFile parse_model_text(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("model file: ") + e.what());
  }
  if (!doc.is_object()) {
    throw ParseError("model file: top level must be an object");
  }

  ModelFile model;
  model.digest = digest_bytes(text);

  if (!doc.contains("states") || !doc["states"].is_array() ||
      doc["states"].empty()) {
    throw ParseError("model file: 'states' must be a non-empty array");
  }
  for (const auto& s : doc["states"]) {
    if (!s.is_string()) {
      throw ParseError("model file: state labels must be strings");
    }
    model.states.push_back(s.get<std::string>());
  }
  const Eigen::Index n = static_cast<Eigen::Index>(model.states.size());

  if (!doc.contains("matrix") || !doc["matrix"].is_array() ||
      static_cast<Eigen::Index>(doc["matrix"].size()) != n) {
    throw ParseError("model file: 'matrix' must have one row per state");
  }
  model.matrix.resize(n, n);
  Eigen::Index row = 0;
  for (const auto& r : doc["matrix"]) {
    const Vector v = vector_from(r, "matrix row");
    if (v.size() != n) {
      throw ParseError("model file: matrix rows must have one entry per state");
    }
    model.matrix.row(row++) = v.transpose();
  }

  auto read_named_vectors = [&](const char* key,
                                std::map<std::string, Vector>& out) {
    if (!doc.contains(key)) return;
    if (!doc[key].is_object()) {
      throw ParseError(std::string("model file: '") + key +
                       "' must be an object of named arrays");
    }
    for (const auto& [name, arr] : doc[key].items()) {
      const Vector v = vector_from(arr, std::string(key) + "." + name);
      if (v.size() != n) {
        throw ParseError(std::string(key) + "." + name +
                         " must have one entry per state");
      }
      out.emplace(name, v);
    }
  };
  read_named_vectors("observables", model.observables);
  read_named_vectors("potentials", model.potentials);
  read_named_vectors("initial_laws", model.initial_laws);

  if (doc.contains("boundaries")) {
    if (!doc["boundaries"].is_object()) {
      throw ParseError("model file: 'boundaries' must be an object");
    }
    for (const auto& [name, arr] : doc["boundaries"].items()) {
      if (!arr.is_array() || arr.empty()) {
        throw ParseError("boundaries." + name + " must be a non-empty array");
      }
      std::vector<std::string> labels;
      for (const auto& s : arr) {
        if (!s.is_string()) {
          throw ParseError("boundaries." + name + " must contain state labels");
        }
        labels.push_back(s.get<std::string>());
      }
      model.boundaries.emplace(name, std::move(labels));
    }
  }

  // Cross-validation: the matrix must pass chain validation, every boundary
  // label must resolve, every initial law must be a distribution.
  const StochasticChain chain = model.chain();
  for (const auto& [name, labels] : model.boundaries) {
    for (const std::string& label : labels) {
      chain.index_of(label);
    }
  }
  for (const auto& [name, w] : model.initial_laws) {
    Distribution check(w, 1e-9);
    (void)check;
  }
  return model;
}

ModelFile parse_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw ParseError("cannot open model file: " + path);
  }
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_model_text(buffer.str());
}

std::string emit_model(const ModelFile& model) {
  json doc;
  doc["states"] = model.states;
  doc["matrix"] = to_json(model.matrix);
  doc["observables"] = json::object();
  for (const auto& [name, v] : model.observables) {
    doc["observables"][name] = to_json(v);
  }
  doc["potentials"] = json::object();
  for (const auto& [name, v] : model.potentials) {
    doc["potentials"][name] = to_json(v);
  }
  doc["boundaries"] = json::object();
  for (const auto& [name, labels] : model.boundaries) {
    doc["boundaries"][name] = labels;
  }
  doc["initial_laws"] = json::object();
  for (const auto& [name, v] : model.initial_laws) {
    doc["initial_laws"][name] = to_json(v);
  }
  return doc.dump(2);
}

Command parse_command(const std::string& name) {
  if (name == "analyze") return Command::analyze;
  if (name == "couple") return Command::couple;
  if (name == "limits") return Command::limits;
  if (name == "ldp") return Command::ldp;
  if (name == "poisson") return Command::poisson;
  throw BadArgumentsError("unknown command: " + name);
}

namespace {

json run_analyze(const ModelFile& model, const Flags& flags, json& diagnostics,
                 std::vector<std::string>& csv) {
  const StochasticChain chain = model.chain();
  const ContractionReport contraction = contraction_report(chain, flags.n0);
  const InvariantResult inv_linear =
      invariant_measure(chain, InvariantMethod::linear_solve);
  const InvariantResult inv_cesaro =
      invariant_measure(chain, InvariantMethod::cesaro);
  const double agreement =
      (inv_linear.mu.weights() - inv_cesaro.mu.weights()).cwiseAbs().sum();
  const ConvergenceEnvelope envelope =
      convergence_envelope(chain, flags.n_max);

  if (inv_linear.non_unique_warning) {
    diagnostics["warnings"].push_back(
        "NonUniqueWarning: kappa_{n0} = 0 for all n0 <= N; the invariant "
        "measure need not be unique and the Cesaro result depends on the "
        "start state");
  }
  if (envelope.vacuous) {
    diagnostics["warnings"].push_back(
        "VacuousBound: kappa = 0, the contraction envelope certifies nothing");
  }

  json results;
  results["kappa"] = contraction.kappa;
  results["kappa0"] = contraction.kappa0;
  results["kappa_n0"] = contraction.kappa_n0;
  results["n0"] = contraction.n0;
  results["pairwise_md"] = to_json(contraction.pairwise);
  results["invariant_measure"] = to_json(inv_linear.mu.weights());
  results["invariant_residual_l1"] = inv_linear.residual;
  results["cesaro_agreement_l1"] = agreement;
  results["envelope"] = {{"worst_tv", to_json(envelope.worst_tv)},
                         {"bound", to_json(envelope.bound)},
                         {"vacuous", envelope.vacuous}};

  double r_v = std::nan("");
  if (chain.size() <= 64) {
    const SpectralResult spectral = operator_v_spectral(chain);
    r_v = spectral.radius;
    results["coupling_spectral"] = {{"r_v", spectral.radius},
                                    {"iterations", spectral.iterations},
                                    {"converged", spectral.converged},
                                    {"norm_bound", 1.0 - contraction.kappa}};
  } else {
    diagnostics["warnings"].push_back(
        "coupling operator spectral radius skipped for N > 64");
  }

  csv.push_back("n,worst_tv,bound,rv_power");
  for (std::size_t k = 0; k < envelope.worst_tv.size(); ++k) {
    const double rv_pow = std::isnan(r_v)
                              ? std::nan("")
                              : std::pow(r_v, static_cast<double>(k));
    csv.push_back(std::to_string(k) + "," + csv_number(envelope.worst_tv[k]) +
                  "," + csv_number(envelope.bound[k]) + "," +
                  csv_number(rv_pow));
  }
  return results;
}

json run_couple(const ModelFile& model, const Flags& flags, json& diagnostics,
                std::vector<std::string>& csv, json& seed_record) {
  const StochasticChain chain = model.chain();
  const Eigen::Index from = chain.index_of(flags.from);
  const Eigen::Index to = chain.index_of(flags.to);

  json results;
  if (!flags.vaserstein) {
    const SimpleCouplingTail tail =
        simple_coupling_tail(chain, from, to, flags.n_max);
    if (tail.vacuous) {
      diagnostics["warnings"].push_back(
          "VacuousBound: kappa0 = 0, the simple tail bound certifies nothing");
    }
    results["mode"] = "simple";
    results["kappa0"] = tail.kappa0;
    results["tail"] = to_json(tail.tail);
    results["bound"] = to_json(tail.bound);
    csv.push_back("n,tail,bound");
    for (std::size_t k = 0; k < tail.tail.size(); ++k) {
      csv.push_back(std::to_string(k) + "," + csv_number(tail.tail[k]) + "," +
                    csv_number(tail.bound[k]));
    }
    return results;
  }

  const int horizon = flags.n_max;
  const Distribution mu1 = Distribution::point_mass(from, chain.size());
  const Distribution mu2 = Distribution::point_mass(to, chain.size());
  const VasersteinBatch batch = vaserstein_batch(
      chain, mu1, mu2, horizon, flags.paths, flags.seed, 0);
  const std::vector<double> bound =
      coupling_bound_curve(chain, mu1, mu2, horizon);

  // Reconstructed marginals against the exact laws mu P^n.
  double worst_marginal_tv = 0.0;
  Vector law1 = mu1.weights();
  Vector law2 = mu2.weights();
  bool dominated = true;
  for (int k = 0; k <= horizon; ++k) {
    worst_marginal_tv = std::max(
        worst_marginal_tv, total_variation(Vector(batch.marginal1.col(k)), law1));
    worst_marginal_tv = std::max(
        worst_marginal_tv, total_variation(Vector(batch.marginal2.col(k)), law2));
    const double freq = batch.decouple_freq[static_cast<std::size_t>(k)];
    const double sigma = std::sqrt(
        std::max(freq * (1.0 - freq), 0.0) / static_cast<double>(batch.paths));
    if (freq - 3.0 * sigma > bound[static_cast<std::size_t>(k)]) {
      dominated = false;
    }
    law1 = chain.matrix().transpose() * law1;
    law2 = chain.matrix().transpose() * law2;
  }

  results["mode"] = "vaserstein";
  results["paths"] = batch.paths;
  results["decouple_freq"] = to_json(batch.decouple_freq);
  results["exact_bound"] = to_json(bound);
  results["bound_dominates_within_3sigma"] = dominated;
  results["worst_marginal_tv"] = worst_marginal_tv;
  seed_record = {{"master_seed", flags.seed}, {"base_stream", 0}};

  csv.push_back("n,decouple_freq,exact_bound");
  for (std::size_t k = 0; k < batch.decouple_freq.size(); ++k) {
    csv.push_back(std::to_string(k) + "," +
                  csv_number(batch.decouple_freq[k]) + "," +
                  csv_number(bound[k]));
  }
  return results;
}

json run_limits(const ModelFile& model, const Flags& flags, json& diagnostics,
                std::vector<std::string>& csv, json& seed_record) {
  const StochasticChain chain = model.chain();
  const Observable f = model.observable(flags.observable);
  const VarianceReport variance = asymptotic_variance(chain, f);

  const ExperimentMode mode =
      flags.mode == "clt" ? ExperimentMode::clt : ExperimentMode::mean;
  const Distribution init = Distribution::point_mass(0, chain.size());
  const ExperimentResult experiment = lln_clt_experiment(
      chain, f, flags.n, flags.replicas, mode, init, flags.seed, 0);

  if (experiment.degenerate) {
    diagnostics["warnings"].push_back(
        "sigma^2 = 0: the limit law is the degenerate normal at 0");
  }

  json results;
  results["sigma2"] = variance.sigma2;
  results["truncation_n"] = variance.truncation_n;
  results["tail_bound"] = variance.tail_bound;
  results["e_inv_f"] = experiment.e_inv_f;
  results["mode"] = flags.mode;
  results["n"] = flags.n;
  results["replicas"] = flags.replicas;
  results["summary"] =
      experiment.summary;  // max deviation (mean) or KS distance (clt)
  results["degenerate"] = experiment.degenerate;
  seed_record = {{"master_seed", flags.seed}, {"base_stream", 0}};

  csv.push_back("replica,value");
  for (std::size_t i = 0; i < experiment.samples.size(); ++i) {
    csv.push_back(std::to_string(i) + "," + csv_number(experiment.samples[i]));
  }
  return results;
}

json run_ldp(const ModelFile& model, const Flags& flags, json& diagnostics,
             std::vector<std::string>& csv) {
  const StochasticChain chain = model.chain();
  const Observable f = model.observable(flags.observable);
  const RateFunctionTable table = rate_function_table(
      chain, f, flags.beta_min, flags.beta_max, flags.grid);

  // Central-difference derivatives of H at 0 (step 1e-3).
  const double h = 1e-3;
  const double h_plus = scaled_cgf(chain, f, h);
  const double h_minus = scaled_cgf(chain, f, -h);
  const double h_zero = scaled_cgf(chain, f, 0.0);

  json results;
  results["beta_grid"] = to_json(table.beta_grid);
  results["h_values"] = to_json(table.h_values);
  results["alpha_grid"] = to_json(table.alpha_grid);
  results["l_values"] = to_json(table.l_values);
  results["h_zero"] = h_zero;
  results["h_prime_zero"] = (h_plus - h_minus) / (2.0 * h);
  results["h_second_zero"] = (h_plus - 2.0 * h_zero + h_minus) / (h * h);

  csv.push_back("beta,H,alpha,L");
  for (std::size_t i = 0; i < table.beta_grid.size(); ++i) {
    csv.push_back(csv_number(table.beta_grid[i]) + "," +
                  csv_number(table.h_values[i]) + "," +
                  csv_number(table.alpha_grid[i]) + "," +
                  csv_number(table.l_values[i]));
  }

  if (flags.epsilon) {
    const LdTailResult tail =
        ld_tail_exact(chain, f, *flags.epsilon, flags.n, 0, flags.denominator,
                      flags.delta0);
    results["epsilon"] = *flags.epsilon;
    results["tail_probability"] = tail.probability;
    results["log_tail_rate"] = tail.log_tail_rate;
    results["bound"] = tail.bound;
    results["delta_n"] = tail.delta_n;
    results["rounded_f"] = to_json(tail.rounded_f);
    results["denominator"] = tail.denominator;
    const bool verdict =
        tail.zero_probability ||
        tail.log_tail_rate <= tail.bound + std::max(tail.delta_n, 0.0) + 1e-9;
    results["rate_below_bound"] = verdict;
    if (tail.zero_probability) {
      diagnostics["warnings"].push_back(
          "tail probability is exactly zero; the rate is -infinity");
    }
  }
  return results;
}

json run_poisson(const ModelFile& model, const Flags& flags, json& diagnostics,
                 std::vector<std::string>& csv, json& seed_record) {
  const StochasticChain chain = model.chain();
  const Observable f = model.observable(flags.observable);

  PoissonMethod method = PoissonMethod::linear;
  if (flags.method == "series") method = PoissonMethod::series;
  else if (flags.method == "mc") method = PoissonMethod::monte_carlo;
  else if (flags.method != "linear") {
    throw BadArgumentsError("poisson: method must be linear, series or mc");
  }

  McOptions mc;
  mc.paths = flags.mc_paths;
  mc.master_seed = flags.seed;

  PoissonSolution sol{Observable(Vector::Zero(chain.size())), 0, method, {}, {}, {}};
  if (!flags.boundary.empty()) {
    if (flags.boundary_data.empty()) {
      throw BadArgumentsError("poisson: --boundary requires --boundary-data");
    }
    const Observable g = model.observable(flags.boundary_data);
    std::optional<Observable> c;
    if (!flags.potential.empty()) c = model.potential(flags.potential);
    const BoundaryProblem problem(chain, model.boundary(flags.boundary), f, g, c);
    sol = c ? solve_dirichlet_potential(problem, method, mc)
            : solve_dirichlet(problem, method, mc);
  } else if (!flags.potential.empty()) {
    sol = solve_whole_potential(chain, model.potential(flags.potential), f,
                                method, mc);
  } else {
    sol = solve_whole(chain, f, method, mc);
  }

  for (const std::string& w : sol.warnings) {
    diagnostics["warnings"].push_back(w);
  }

  json results;
  results["u"] = to_json(sol.u.values());
  results["residual"] = sol.residual;
  results["method"] = flags.method;
  results["wellposedness"] = {{"kind", sol.wellposedness.kind},
                              {"value", sol.wellposedness.value},
                              {"certified", sol.wellposedness.certified}};
  if (!sol.std_error.empty()) {
    results["std_error"] = to_json(sol.std_error);
    seed_record = {{"master_seed", flags.seed}, {"base_stream", 0}};
  }

  csv.push_back(sol.std_error.empty() ? "state,u" : "state,u,std_error");
  for (Eigen::Index i = 0; i < chain.size(); ++i) {
    std::string row = chain.states()[static_cast<std::size_t>(i)] + "," +
                      csv_number(sol.u[i]);
    if (!sol.std_error.empty()) {
      row += "," + csv_number(sol.std_error[static_cast<std::size_t>(i)]);
    }
    csv.push_back(row);
  }
  return results;
}

json echo_args(Command command, const Flags& flags) {
  json args;
  switch (command) {
    case Command::analyze:
      args["n_max"] = flags.n_max;
      args["n0"] = flags.n0;
      break;
    case Command::couple:
      args["from"] = flags.from;
      args["to"] = flags.to;
      args["mode"] = flags.vaserstein ? "vaserstein" : "simple";
      args["n_max"] = flags.n_max;
      if (flags.vaserstein) args["paths"] = flags.paths;
      break;
    case Command::limits:
      args["observable"] = flags.observable;
      args["mode"] = flags.mode;
      args["n"] = flags.n;
      args["replicas"] = flags.replicas;
      break;
    case Command::ldp:
      args["observable"] = flags.observable;
      args["beta_min"] = flags.beta_min;
      args["beta_max"] = flags.beta_max;
      args["grid"] = flags.grid;
      if (flags.epsilon) {
        args["epsilon"] = *flags.epsilon;
        args["n"] = flags.n;
        args["denominator"] = flags.denominator;
        args["delta0"] = flags.delta0;
      }
      break;
    case Command::poisson:
      args["observable"] = flags.observable;
      if (!flags.boundary.empty()) {
        args["boundary"] = flags.boundary;
        args["boundary_data"] = flags.boundary_data;
      }
      if (!flags.potential.empty()) args["potential"] = flags.potential;
      args["method"] = flags.method;
      if (flags.method == "mc") args["paths"] = flags.mc_paths;
      break;
  }
  return args;
}

std::string command_name(Command command) {
  switch (command) {
    case Command::analyze: return "analyze";
    case Command::couple: return "couple";
    case Command::limits: return "limits";
    case Command::ldp: return "ldp";
    case Command::poisson: return "poisson";
  }
  return "?";
}

}  // namespace

Report run(Command command, const ModelFile& model, const Flags& flags) {
  json diagnostics;
  diagnostics["warnings"] = json::array();
  json seed_record;
  std::vector<std::string> csv;

  json results;
  switch (command) {
    case Command::analyze:
      results = run_analyze(model, flags, diagnostics, csv);
      break;
    case Command::couple:
      results = run_couple(model, flags, diagnostics, csv, seed_record);
      break;
    case Command::limits:
      results = run_limits(model, flags, diagnostics, csv, seed_record);
      break;
    case Command::ldp:
      results = run_ldp(model, flags, diagnostics, csv);
      break;
    case Command::poisson:
      results = run_poisson(model, flags, diagnostics, csv, seed_record);
      break;
  }

  json doc;
  doc["command"] = command_name(command);
  doc["input_digest"] = model.digest;
  doc["args"] = echo_args(command, flags);
  doc["results"] = results;
  doc["diagnostics"] = diagnostics;
  if (!seed_record.is_null()) {
    doc["seed"] = seed_record;
  }

  Report report;
  report.json_text = doc.dump(2) + "\n";
  report.csv_rows = std::move(csv);
  return report;
}

int exit_code_for(const std::exception& error) {
  if (const auto* typed = dynamic_cast<const Error*>(&error)) {
    return static_cast<int>(typed->code());
  }
  return static_cast<int>(ErrorCode::unexpected);
}

}  // namespace ergo
