#include <CLI11.hpp>
#include <fstream>
#include <iostream>

#include "ergo/model_io.hpp"

namespace {

void write_output(const ergo::Report& report, const std::string& out_path,
                  const std::string& csv_path) {
  if (out_path.empty()) {
    std::cout << report.json_text;
  } else {
    std::ofstream out(out_path, std::ios::binary);
    if (!out) throw ergo::BadArgumentsError("cannot open --out path: " + out_path);
    out << report.json_text;
  }
  if (!csv_path.empty()) {
    std::ofstream csv(csv_path, std::ios::binary);
    if (!csv) throw ergo::BadArgumentsError("cannot open --csv path: " + csv_path);
    for (const std::string& row : report.csv_rows) {
      csv << row << "\n";
    }
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ergo: finite Markov chain ergodicity, coupling, limit-theorem "
               "and Poisson-equation toolkit"};
  app.require_subcommand(1);

  std::string model_path;
  std::string out_path;
  std::string csv_path;
  ergo::Flags flags;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("model", model_path, "model file (JSON)")->required();
    cmd->add_option("--out", out_path, "write the JSON report here (default stdout)");
    cmd->add_option("--csv", csv_path, "write plot data here");
  };

  CLI::App* analyze = app.add_subcommand(
      "analyze", "contraction coefficients, invariant measure, convergence envelope");
  add_common(analyze);
  analyze->add_option("--n-max", flags.n_max, "envelope horizon");
  analyze->add_option("--n0", flags.n0, "steps for the n0-step coefficient");

  CLI::App* couple = app.add_subcommand(
      "couple", "simple meeting-time tail or Vaserstein coupled simulation");
  add_common(couple);
  couple->add_option("--from", flags.from, "first start state")->required();
  couple->add_option("--to", flags.to, "second start state")->required();
  bool simple_flag = false;
  CLI::Option* simple_opt =
      couple->add_flag("--simple", simple_flag, "exact product-chain tail (default)");
  couple->add_flag("--vaserstein", flags.vaserstein, "simulate the coupled 4-component chain");
  couple->add_option("--paths", flags.paths, "simulated paths");
  couple->add_option("--n-max", flags.n_max, "horizon");
  couple->add_option("--seed", flags.seed, "master seed");
  (void)simple_opt;

  CLI::App* limits = app.add_subcommand(
      "limits", "asymptotic variance and LLN/CLT sampling experiments");
  add_common(limits);
  limits->add_option("--observable", flags.observable, "observable name")->required();
  limits->add_option("--mode", flags.mode, "mean or clt")
      ->check(CLI::IsMember({"mean", "clt"}));
  limits->add_option("--n", flags.n, "trajectory length");
  limits->add_option("--replicas", flags.replicas, "independent replicas");
  limits->add_option("--seed", flags.seed, "master seed");

  CLI::App* ldp = app.add_subcommand(
      "ldp", "tilted-operator cumulant generating function and exact tail rates");
  add_common(ldp);
  ldp->add_option("--observable", flags.observable, "observable name")->required();
  ldp->add_option("--beta-min", flags.beta_min, "grid left end");
  ldp->add_option("--beta-max", flags.beta_max, "grid right end");
  ldp->add_option("--grid", flags.grid, "grid points");
  double epsilon_value = 0.0;
  CLI::Option* eps_opt =
      ldp->add_option("--epsilon", epsilon_value, "tail threshold for the exact DP");
  ldp->add_option("--n", flags.n, "horizon for the exact tail");
  ldp->add_option("--denominator", flags.denominator, "integer scaling of the observable");
  ldp->add_option("--delta0", flags.delta0, "one-sided regularization step");

  CLI::App* poisson = app.add_subcommand(
      "poisson", "discrete Poisson equations with optional boundary and potential");
  add_common(poisson);
  poisson->add_option("--observable", flags.observable, "source observable")->required();
  poisson->add_option("--boundary", flags.boundary, "boundary set name");
  poisson->add_option("--boundary-data", flags.boundary_data, "boundary data observable");
  poisson->add_option("--potential", flags.potential, "potential name");
  poisson->add_option("--method", flags.method, "linear, series or mc")
      ->check(CLI::IsMember({"linear", "series", "mc"}));
  poisson->add_option("--paths", flags.mc_paths, "Monte Carlo paths");
  poisson->add_option("--seed", flags.seed, "master seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(ergo::ErrorCode::bad_arguments);
  }

  try {
    if (eps_opt->count() > 0) flags.epsilon = epsilon_value;
    ergo::Command command = ergo::Command::analyze;
    if (couple->parsed()) command = ergo::Command::couple;
    else if (limits->parsed()) command = ergo::Command::limits;
    else if (ldp->parsed()) command = ergo::Command::ldp;
    else if (poisson->parsed()) command = ergo::Command::poisson;

    const ergo::ModelFile model = ergo::parse_model(model_path);
    const ergo::Report report = ergo::run(command, model, flags);
    write_output(report, out_path, csv_path);
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return ergo::exit_code_for(e);
  }
}
