// Command line front end. Exit codes: 0 all requested checks pass, 1 a
// check failed or the computation errored, 2 the inputs could not be loaded
// or understood (bad flags, malformed model JSON, unreadable files).
#include <bit>
#include <charconv>
#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <CLI11.hpp>

#include "umarkov/model_io.hpp"
#include "umarkov/oracle.hpp"
#include "umarkov/selection.hpp"
#include "umarkov/semigroup.hpp"

using namespace umarkov;

namespace {

int input_failure(const Error& e) {
  std::cerr << "input error: " << e.what();
  const auto* p = dynamic_cast<const ParseError*>(&e);
  if (p != nullptr && p->line > 0 &&
      std::string_view(e.what()).find("line") == std::string_view::npos)
    std::cerr << " (line " << p->line << ")";
  std::cerr << "\n";
  return 2;
}

int run_failure(const Error& e) {
  std::cerr << "error: " << e.what() << "\n";
  return 1;
}

// Payload goes to the file when --out is set, to stdout otherwise.
void emit(const std::string& out_path, const std::string& text) {
  if (out_path.empty()) {
    std::cout << text;
  } else {
    write_text_file(out_path, text);
    std::cout << "wrote " << out_path << "\n";
  }
}

// --f grammar: sum | upset:K | const:C | file:PATH.
StateFunction function_from_spec(const std::string& spec, const SpeedFunction& c) {
  const std::uint32_t n = c.n_states();
  if (spec == "sum") {
    StateFunction f(n);
    for (Configuration eta = 0; eta < n; ++eta) f[eta] = static_cast<double>(std::popcount(eta));
    return f;
  }
  if (spec.rfind("upset:", 0) == 0) {
    std::string_view digits = std::string_view(spec).substr(6);
    std::uint32_t k = 0;
    auto res = std::from_chars(digits.data(), digits.data() + digits.size(), k);
    if (res.ec != std::errc{} || res.ptr != digits.data() + digits.size() || k >= n)
      throw ParameterError("bad up-set index in '" + spec + "'");
    StateFunction f(n, 0.0);
    for (Configuration eta = 0; eta < n; ++eta) f[eta] = (eta & k) == k ? 1.0 : 0.0;
    return f;
  }
  if (spec.rfind("const:", 0) == 0) {
    std::string_view num = std::string_view(spec).substr(6);
    double v = 0;
    auto res = std::from_chars(num.data(), num.data() + num.size(), v);
    if (res.ec != std::errc{} || res.ptr != num.data() + num.size() || !std::isfinite(v))
      throw ParameterError("bad constant in '" + spec + "'");
    return StateFunction(n, v);
  }
  if (spec.rfind("file:", 0) == 0)
    return read_function_csv(read_text_file(spec.substr(5)), n);
  throw ParameterError("unknown function '" + spec + "' (want sum, upset:K, const:C, file:PATH)");
}

std::size_t resolve_control(const std::string& text, const ControlGrid& grid) {
  std::size_t g = 0;
  auto res = std::from_chars(text.data(), text.data() + text.size(), g);
  if (res.ec == std::errc{} && res.ptr == text.data() + text.size()) {
    if (g >= grid.size())
      throw ParameterError("control index " + text + " out of range, grid has " +
                           std::to_string(grid.size()) + " points");
    return g;
  }
  return grid.index_of(text);
}

// Clip the policy to [0, t]; cells past t never influence X_t.
MarkovPolicy truncate_policy(const MarkovPolicy& policy, double t) {
  double horizon = policy.horizon();
  if (t > horizon * (1 + 1e-12))
    throw UsageError("evaluation time " + std::to_string(t) + " exceeds the policy horizon " +
                     std::to_string(horizon));
  if (t >= horizon) return policy;
  MarkovPolicy out;
  out.cell_boundaries.push_back(policy.cell_boundaries.front());
  for (std::size_t c = 0; c < policy.n_cells(); ++c) {
    if (policy.cell_boundaries[c] >= t) break;
    double end = std::min(policy.cell_boundaries[c + 1], t);
    out.cell_boundaries.push_back(end);
    out.choice.push_back(policy.choice[c]);
    if (end >= t) break;
  }
  return out;
}

const char* status_name(CertificationStatus s) {
  switch (s) {
    case CertificationStatus::certified_ergodic: return "certified_ergodic";
    case CertificationStatus::not_certified: return "not_certified";
    case CertificationStatus::failed_precondition: return "failed_precondition";
  }
  return "unknown";
}

std::optional<UncertainGenerator> load_generator(const std::string& model_path, int& rc) {
  try {
    return UncertainGenerator(speed_from_spec(load_model_file(model_path)));
  } catch (const Error& e) {
    rc = input_failure(e);
    return std::nullopt;
  }
}

int cmd_evolve(const std::string& model, const std::string& fspec, double t, double step,
               const std::string& out) {
  int rc = 0;
  auto gen = load_generator(model, rc);
  if (!gen) return rc;
  StateFunction f;
  try {
    f = function_from_spec(fspec, gen->speed());
  } catch (const Error& e) {
    return input_failure(e);
  }
  try {
    SemigroupRun run = evolve(*gen, f, t, step > 0 ? step : default_step(*gen));
    emit(out, run_csv(run));
    return 0;
  } catch (const Error& e) {
    return run_failure(e);
  }
}

int cmd_check_semigroup(const std::string& model, const std::string& fspec, double s, double t,
                        double step, double tol) {
  int rc = 0;
  auto gen = load_generator(model, rc);
  if (!gen) return rc;
  StateFunction f;
  try {
    f = function_from_spec(fspec, gen->speed());
  } catch (const Error& e) {
    return input_failure(e);
  }
  try {
    GapReport rep = check_semigroup(*gen, f, s, t, step > 0 ? step : default_step(*gen), tol);
    std::cout << "gap " << format_double(rep.max_abs_gap) << " tol " << format_double(rep.tol)
              << (rep.pass ? " pass" : " fail") << "\n";
    return rep.pass ? 0 : 1;
  } catch (const Error& e) {
    return run_failure(e);
  }
}

int cmd_select(const std::string& model, const std::string& fspec, double t, double step,
               double tol, const std::string& out) {
  int rc = 0;
  auto gen = load_generator(model, rc);
  if (!gen) return rc;
  StateFunction f;
  try {
    f = function_from_spec(fspec, gen->speed());
  } catch (const Error& e) {
    return input_failure(e);
  }
  try {
    SelectionReport rep = verify_selection(*gen, f, t, step > 0 ? step : default_step(*gen), tol);
    std::cout << "max_gap " << format_double(rep.max_gap) << " tol " << format_double(rep.tol)
              << (rep.pass ? " pass" : " fail") << "\n";
    emit(out, policy_csv(rep.policy, gen->speed().grid()));
    return rep.pass ? 0 : 1;
  } catch (const Error& e) {
    return run_failure(e);
  }
}

int cmd_sandwich(const std::string& model, const std::string& fspec, double t, double step,
                 double tol) {
  int rc = 0;
  auto gen = load_generator(model, rc);
  if (!gen) return rc;
  StateFunction f;
  try {
    f = function_from_spec(fspec, gen->speed());
  } catch (const Error& e) {
    return input_failure(e);
  }
  try {
    SandwichReport rep =
        sandwich_check(gen->speed(), f, t, step > 0 ? step : default_step(*gen), tol);
    if (rep.status == SandwichReport::Status::failed_precondition) {
      std::cout << "failed_precondition: envelope chains are not attractive\n";
      return 1;
    }
    std::cout << "lower_violation " << format_double(rep.max_lower_violation)
              << " upper_violation " << format_double(rep.max_upper_violation) << " tol "
              << format_double(rep.tol) << (rep.pass ? " pass" : " fail") << "\n";
    return rep.pass ? 0 : 1;
  } catch (const Error& e) {
    return run_failure(e);
  }
}

int cmd_certify(const std::string& model, const std::string& out) {
  int rc = 0;
  auto gen = load_generator(model, rc);
  if (!gen) return rc;
  try {
    ErgodicityVerdict verdict = certify_nonlinear_ergodicity(gen->speed());
    std::string doc = verdict_json(verdict);
    if (out.empty()) {
      std::cout << doc;
    } else {
      write_text_file(out, doc);
      std::cout << "status " << status_name(verdict.status) << "\nwrote " << out << "\n";
    }
    return verdict.status == CertificationStatus::certified_ergodic ? 0 : 1;
  } catch (const Error& e) {
    return run_failure(e);
  }
}

int cmd_probe(const std::string& model, const std::string& fspec,
              const std::vector<double>& horizons, double step, const std::string& out) {
  int rc = 0;
  auto gen = load_generator(model, rc);
  if (!gen) return rc;
  StateFunction f;
  try {
    f = function_from_spec(fspec, gen->speed());
  } catch (const Error& e) {
    return input_failure(e);
  }
  try {
    auto rows = convergence_probe(gen->speed(), f, horizons, step > 0 ? step : default_step(*gen));
    emit(out, probe_csv(rows));
    return 0;
  } catch (const Error& e) {
    return run_failure(e);
  }
}

int cmd_oracle(const std::string& model, const std::string& policy_path, const std::string& fspec,
               double t, double step, std::size_t mc, std::uint64_t seed, std::uint32_t start,
               const std::string& out) {
  int rc = 0;
  auto gen = load_generator(model, rc);
  if (!gen) return rc;
  StateFunction f;
  MarkovPolicy policy;
  try {
    f = function_from_spec(fspec, gen->speed());
    policy = read_policy_csv(read_text_file(policy_path), *gen);
  } catch (const Error& e) {
    return input_failure(e);
  }
  try {
    if (t < 0) throw ParameterError("evaluation time must be nonnegative");
    if (mc > 0) {
      EstimateReport rep = estimate_expectation(*gen, policy, f, start, t, mc, seed);
      emit(out, estimate_csv({{start, rep}}));
    } else {
      StateFunction values =
          t == 0 ? f
                 : exact_expectation(*gen, truncate_policy(policy, t), f, step > 0 ? step : 1e-3);
      emit(out, value_csv(values));
    }
    return 0;
  } catch (const Error& e) {
    return run_failure(e);
  }
}

int cmd_stationary(const std::string& model, const std::string& control, const std::string& out) {
  int rc = 0;
  auto gen = load_generator(model, rc);
  if (!gen) return rc;
  std::size_t g = 0;
  try {
    g = resolve_control(control, gen->speed().grid());
  } catch (const Error& e) {
    return input_failure(e);
  }
  try {
    auto dists = stationary_distributions(gen->qmatrix(g));
    emit(out, stationary_csv(dists));
    return 0;
  } catch (const Error& e) {
    return run_failure(e);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sublinear Markov semigroups over uncertain spin-flip generators"};
  app.require_subcommand(1);
  int rc = 0;

  const char* f_help = "terminal function: sum, upset:K, const:C, file:PATH";
  const char* step_help = "RK4 step, 0 picks the rate-adapted default";

  struct {
    std::string model, f = "sum", out;
    double t = 0, step = 0;
  } ev;
  CLI::App* c_evolve = app.add_subcommand("evolve", "integrate T_t f and dump the whole run");
  c_evolve->add_option("--model", ev.model, "model JSON file")->required();
  c_evolve->add_option("--f", ev.f, f_help);
  c_evolve->add_option("--t", ev.t, "horizon")->required();
  c_evolve->add_option("--step", ev.step, step_help);
  c_evolve->add_option("--out", ev.out, "run CSV path");
  c_evolve->callback([&] { rc = cmd_evolve(ev.model, ev.f, ev.t, ev.step, ev.out); });

  struct {
    std::string model, f = "sum";
    double s = 0, t = 0, step = 0, tol = 1e-6;
  } cs;
  CLI::App* c_check = app.add_subcommand("check-semigroup", "compare T_s T_t f with T_{s+t} f");
  c_check->add_option("--model", cs.model, "model JSON file")->required();
  c_check->add_option("--f", cs.f, f_help);
  c_check->add_option("--s", cs.s, "outer duration")->required();
  c_check->add_option("--t", cs.t, "inner duration")->required();
  c_check->add_option("--step", cs.step, step_help);
  c_check->add_option("--tol", cs.tol, "gap tolerance");
  c_check->callback([&] { rc = cmd_check_semigroup(cs.model, cs.f, cs.s, cs.t, cs.step, cs.tol); });

  struct {
    std::string model, f = "sum", out;
    double t = 0, step = 0, tol = 1e-4;
  } se;
  CLI::App* c_select = app.add_subcommand(
      "select", "extract the greedy Markov policy and verify it reproduces the value");
  c_select->add_option("--model", se.model, "model JSON file")->required();
  c_select->add_option("--f", se.f, f_help);
  c_select->add_option("--t", se.t, "horizon")->required();
  c_select->add_option("--step", se.step, step_help);
  c_select->add_option("--tol", se.tol, "verification tolerance");
  c_select->add_option("--out", se.out, "policy CSV path");
  c_select->callback([&] { rc = cmd_select(se.model, se.f, se.t, se.step, se.tol, se.out); });

  struct {
    std::string model, f = "sum";
    double t = 0, step = 0, tol = 1e-8;
  } sw;
  CLI::App* c_sandwich =
      app.add_subcommand("sandwich", "check the envelope bounds around T_t f for increasing f");
  c_sandwich->add_option("--model", sw.model, "model JSON file")->required();
  c_sandwich->add_option("--f", sw.f, f_help);
  c_sandwich->add_option("--t", sw.t, "horizon")->required();
  c_sandwich->add_option("--step", sw.step, step_help);
  c_sandwich->add_option("--tol", sw.tol, "violation tolerance");
  c_sandwich->callback([&] { rc = cmd_sandwich(sw.model, sw.f, sw.t, sw.step, sw.tol); });

  struct {
    std::string model, out;
  } ce;
  CLI::App* c_certify = app.add_subcommand("certify", "run the envelope ergodicity certificate");
  c_certify->add_option("--model", ce.model, "model JSON file")->required();
  c_certify->add_option("--out", ce.out, "verdict JSON path");
  c_certify->callback([&] { rc = cmd_certify(ce.model, ce.out); });

  struct {
    std::string model, f = "sum", out;
    std::vector<double> horizons{1.0, 5.0, 20.0, 50.0};
    double step = 0;
  } pr;
  CLI::App* c_probe =
      app.add_subcommand("probe", "sup distance of T_t f from the invariant mean per horizon");
  c_probe->add_option("--model", pr.model, "model JSON file")->required();
  c_probe->add_option("--f", pr.f, f_help);
  c_probe->add_option("--horizons", pr.horizons, "comma separated horizons")->delimiter(',');
  c_probe->add_option("--step", pr.step, step_help);
  c_probe->add_option("--out", pr.out, "probe CSV path");
  c_probe->callback([&] { rc = cmd_probe(pr.model, pr.f, pr.horizons, pr.step, pr.out); });

  struct {
    std::string model, policy, f = "sum", out;
    double t = 0, step = 0;
    std::size_t mc = 0;
    std::uint64_t seed = 0;
    std::uint32_t start = 0;
  } orc;
  CLI::App* c_oracle = app.add_subcommand(
      "oracle", "evaluate a fixed policy: exact by default, Monte Carlo with --mc");
  c_oracle->add_option("--model", orc.model, "model JSON file")->required();
  c_oracle->add_option("--policy", orc.policy, "policy CSV path")->required();
  c_oracle->add_option("--f", orc.f, f_help);
  c_oracle->add_option("--t", orc.t, "evaluation time")->required();
  c_oracle->add_option("--step", orc.step, step_help);
  c_oracle->add_option("--mc", orc.mc, "sample count, 0 means exact integration");
  c_oracle->add_option("--seed", orc.seed, "master seed for --mc");
  c_oracle->add_option("--start", orc.start, "initial state for --mc");
  c_oracle->add_option("--out", orc.out, "output CSV path");
  c_oracle->callback([&] {
    rc = cmd_oracle(orc.model, orc.policy, orc.f, orc.t, orc.step, orc.mc, orc.seed, orc.start,
                    orc.out);
  });

  struct {
    std::string model, control, out;
  } st;
  CLI::App* c_stationary = app.add_subcommand(
      "stationary", "stationary distributions of one frozen control's linear chain");
  c_stationary->add_option("--model", st.model, "model JSON file")->required();
  c_stationary->add_option("--control", st.control, "control label or grid index")->required();
  c_stationary->add_option("--out", st.out, "stationary CSV path");
  c_stationary->callback([&] { rc = cmd_stationary(st.model, st.control, st.out); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  return rc;
}
