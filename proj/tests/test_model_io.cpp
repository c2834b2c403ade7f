#include <doctest.h>

#include <random>

#include "ergo/model_io.hpp"
#include "support/test_support.hpp"

using namespace ergo;

namespace {

const char* kP2Model = R"({
  "states": ["1", "2"],
  "matrix": [[0.9, 0.1], [0.2, 0.8]],
  "observables": {"f": [1, -2]},
  "potentials": {"c": [0.6931471805599453, 0.6931471805599453]},
  "boundaries": {"G": ["2"]},
  "initial_laws": {"d1": [1, 0]}
})";

}  // namespace

TEST_CASE("parse_model: minimal file and error classes") {
  const ModelFile model = parse_model_text(kP2Model);
  CHECK(model.states.size() == 2);
  CHECK(model.chain().matrix()(0, 0) == doctest::Approx(0.9));
  CHECK(model.observable("f")[1] == doctest::Approx(-2.0));
  CHECK(model.boundary("G") == std::vector<Eigen::Index>{1});
  CHECK(model.initial_law("d1")[0] == doctest::Approx(1.0));
  CHECK_THROWS_AS(model.observable("missing"), UnknownReferenceError);

  CHECK_THROWS_AS(parse_model_text("{not json"), ParseError);
  CHECK_THROWS_AS(parse_model_text(R"({"states": ["a"]})"), ParseError);

  // Row out of tolerance is a validation error, not a parse error.
  CHECK_THROWS_AS(parse_model_text(R"({
    "states": ["a", "b"],
    "matrix": [[0.9, 0.2], [0.2, 0.8]]
  })"),
                  ValidationError);

  // Boundary referencing an unknown label.
  CHECK_THROWS_AS(parse_model_text(R"({
    "states": ["a", "b"],
    "matrix": [[0.5, 0.5], [0.5, 0.5]],
    "boundaries": {"G": ["zzz"]}
  })"),
                  UnknownReferenceError);
}

TEST_CASE("model round-trip: parse(emit(model)) = model") {
  std::mt19937_64 rng(404);
  for (int trial = 0; trial < 5; ++trial) {
    const int n = 2 + static_cast<int>(rng() % 5);
    ModelFile model;
    const StochasticChain chain = testing::random_positive_chain(rng, n);
    model.states = chain.states();
    model.matrix = chain.matrix();
    model.observables["f"] = testing::random_observable(rng, n).values();
    model.potentials["c"] = testing::random_observable(rng, n).values();
    model.boundaries["G"] = {model.states.front()};
    model.initial_laws["nu"] = testing::random_distribution(rng, n).weights();

    const ModelFile back = parse_model_text(emit_model(model));
    CHECK(back.states == model.states);
    CHECK((back.matrix - model.matrix).cwiseAbs().maxCoeff() == 0.0);
    CHECK((back.observables.at("f") - model.observables.at("f"))
              .cwiseAbs()
              .maxCoeff() == 0.0);
    CHECK(back.boundaries.at("G") == model.boundaries.at("G"));
    CHECK((back.initial_laws.at("nu") - model.initial_laws.at("nu"))
              .cwiseAbs()
              .maxCoeff() == 0.0);
  }
}

TEST_CASE("reports: reference values on the analyze command") {
  const ModelFile model = parse_model_text(kP2Model);
  Flags flags;
  flags.n_max = 10;
  const Report report = run(Command::analyze, model, flags);
  CHECK(report.json_text.find("\"kappa\": 0.300000000000000") != std::string::npos);
  CHECK(report.json_text.find("\"kappa0\": 0.1") != std::string::npos);
  CHECK(report.json_text.find("0.6666666666666666") != std::string::npos);
  CHECK(report.json_text.find("\"r_v\": 0.7") != std::string::npos);
  CHECK(report.csv_rows.size() == 12);  // header + 11 horizon rows
}

TEST_CASE("reports with the same seed are byte-identical") {
  const ModelFile model = parse_model_text(kP2Model);

  Flags couple_flags;
  couple_flags.from = "1";
  couple_flags.to = "2";
  couple_flags.vaserstein = true;
  couple_flags.paths = 2000;
  couple_flags.n_max = 10;
  couple_flags.seed = 99;
  const Report c1 = run(Command::couple, model, couple_flags);
  const Report c2 = run(Command::couple, model, couple_flags);
  CHECK(c1.json_text == c2.json_text);
  CHECK(c1.csv_rows == c2.csv_rows);
  CHECK(c1.json_text.find("\"seed\"") != std::string::npos);

  Flags limit_flags;
  limit_flags.observable = "f";
  limit_flags.mode = "clt";
  limit_flags.n = 200;
  limit_flags.replicas = 400;
  limit_flags.seed = 31;
  const Report l1 = run(Command::limits, model, limit_flags);
  const Report l2 = run(Command::limits, model, limit_flags);
  CHECK(l1.json_text == l2.json_text);
  CHECK(l1.csv_rows == l2.csv_rows);

  Flags poisson_flags;
  poisson_flags.observable = "f";
  poisson_flags.method = "mc";
  poisson_flags.mc_paths = 500;
  poisson_flags.seed = 12;
  const Report p1 = run(Command::poisson, model, poisson_flags);
  const Report p2 = run(Command::poisson, model, poisson_flags);
  CHECK(p1.json_text == p2.json_text);
}

TEST_CASE("poisson command dispatches all four problem shapes") {
  const ModelFile model = parse_model_text(kP2Model);
  Flags flags;
  flags.observable = "f";
  flags.method = "series";

  const Report whole = run(Command::poisson, model, flags);
  CHECK(whole.json_text.find("3.333333333333") != std::string::npos);

  flags.potential = "c";
  const Report whole_pot = run(Command::poisson, model, flags);
  CHECK(whole_pot.json_text.find("1.538461538461") != std::string::npos);

  flags.potential.clear();
  flags.boundary = "G";
  flags.boundary_data = "f";
  flags.method = "linear";
  const Report dirichlet = run(Command::poisson, model, flags);
  CHECK(dirichlet.json_text.find("8.0") != std::string::npos);

  flags.potential = "c";
  CHECK_NOTHROW(run(Command::poisson, model, flags));

  flags.boundary_data.clear();
  CHECK_THROWS_AS(run(Command::poisson, model, flags), BadArgumentsError);
}

TEST_CASE("ldp command reports the tail verdict") {
  const ModelFile model = parse_model_text(kP2Model);
  Flags flags;
  flags.observable = "f";
  flags.epsilon = 0.3;
  flags.n = 200;
  const Report report = run(Command::ldp, model, flags);
  CHECK(report.json_text.find("\"rate_below_bound\": true") != std::string::npos);
  CHECK(report.json_text.find("\"h_zero\": 0.0") != std::string::npos);
}

TEST_CASE("exit codes are distinct per error class") {
  CHECK(exit_code_for(ParseError("x")) == 2);
  CHECK(exit_code_for(ValidationError("x")) == 3);
  CHECK(exit_code_for(UnknownReferenceError("x")) == 4);
  CHECK(exit_code_for(BadArgumentsError("x")) == 5);
  CHECK(exit_code_for(DimensionMismatchError("x")) == 6);
  CHECK(exit_code_for(SingularPairError("x")) == 7);
  CHECK(exit_code_for(VacuousBoundError("x")) == 8);
  CHECK(exit_code_for(IllPosedError("x")) == 9);
  CHECK(exit_code_for(UnreachableBoundaryError("x")) == 10);
  CHECK(exit_code_for(NotPrimitiveError("x")) == 11);
  CHECK(exit_code_for(BracketFailureError("x")) == 12);
  CHECK(exit_code_for(TableTooLargeError("x")) == 13);
  CHECK(exit_code_for(NoConvergenceError("x")) == 14);
  CHECK(exit_code_for(HorizonExceededError("x")) == 15);
  CHECK(exit_code_for(NotCenteredError("x")) == 16);
  CHECK(exit_code_for(std::runtime_error("x")) == 1);
}
