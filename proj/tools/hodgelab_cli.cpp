// hodgelab: command-line front end for the experiment runner.
//
//   hodgelab run --config run.json [--out DIR] [--seed N] [--workers N] [--preset P] [--strict]
//   hodgelab validate --config run.json
//   hodgelab schema
//   hodgelab list builtins|experiments|psi
//   hodgelab describe [builtin|experiment|psi] NAME
//   hodgelab exit-codes

#include <cstdlib>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "config.hpp"
#include "runner.hpp"

using namespace hodgelab;
using namespace hodgelab::cli;

namespace {

struct Overrides {
  std::string config;
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::optional<std::string> preset;
  bool strict = false;
};

RunConfig effective_config(const Overrides& o) {
  RunConfig cfg = load_config(o.config);
  if (o.out) cfg.output = *o.out;
  if (o.seed) cfg.seed = *o.seed;
  if (o.workers) {
    if (*o.workers < 1) throw ConfigError("--workers: must be >= 1");
    cfg.workers = *o.workers;
  }
  if (o.preset) {
    check_preset(*o.preset);
    cfg.preset = *o.preset;
  }
  if (o.strict) cfg.strict = true;
  return cfg;
}

int cmd_run(const Overrides& o) {
  const RunConfig cfg = effective_config(o);
  const RunResult r = run(cfg);
  for (const ExperimentOutcome& e : r.experiments)
    std::cout << e.id << " (" << e.type << "): " << (e.breaches.empty() ? "ok" : "BREACH") << "  "
              << cfg.output << "/" << e.csv << "\n";
  for (const std::string& b : r.breaches) std::cerr << "hodgelab: breach: " << b << "\n";
  std::cout << "manifest: " << cfg.output << "/manifest.json\n";
  return r.exit_code;
}

int cmd_validate(const Overrides& o) {
  const RunConfig cfg = effective_config(o);
  const auto op = build(cfg.op);
  audit_operator(*op, cfg.audit_trials, cfg.seed);
  std::cout << "ok: operator " << op->name() << " (n = " << op->torus().dim()
            << ", m = " << op->torus().points_per_axis() << ", fiber " << op->fiber_dim() << "), "
            << cfg.experiments.size() << " experiment(s), sha256 " << sha256_hex(cfg.document.dump())
            << "\n";
  return kExitOk;
}

int cmd_list(const std::string& what) {
  if (what == "builtins") {
    for (const auto& e : builtin_operators()) std::cout << e.name << "\t" << e.summary << "\n";
  } else if (what == "experiments") {
    for (const auto& e : experiment_catalog()) std::cout << e.name << "\t" << e.summary << "\n";
  } else if (what == "psi") {
    for (const auto& e : psi_dictionary())
      std::cout << e.pattern << "\t" << e.formula << "\t" << e.decay_class << "\n";
  } else {
    throw ConfigError("list: unknown catalogue '" + what + "' (builtins, experiments, psi)");
  }
  return kExitOk;
}

int cmd_describe(const std::vector<std::string>& args) {
  std::string kind, name;
  if (args.size() == 2) {
    kind = args[0];
    name = args[1];
  } else if (args.size() == 1) {
    name = args[0];
    for (const auto& e : builtin_operators())
      if (e.name == name) kind = "builtin";
    for (const auto& e : experiment_catalog())
      if (e.name == name) kind = "experiment";
    if (kind.empty()) kind = "psi";
  } else {
    throw ConfigError("describe: expected [builtin|experiment|psi] NAME");
  }
  if (kind == "builtin") std::cout << describe_builtin(name);
  else if (kind == "experiment") std::cout << describe_experiment(name);
  else if (kind == "psi") std::cout << describe_psi(name);
  else throw ConfigError("describe: unknown kind '" + kind + "'");
  std::cout << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hodgelab: numerical experiments for perturbed Hodge-Dirac operators"};
  app.set_version_flag("--version", std::string("hodgelab ") + kToolVersion);
  app.require_subcommand(1);

  Overrides o;
  auto add_config = [&](CLI::App* sub) {
    sub->add_option("-c,--config", o.config, "JSON run configuration")
        ->envname("HODGELAB_CONFIG")
        ->required();
  };
  auto add_overrides = [&](CLI::App* sub) {
    sub->add_option("-o,--out", o.out, "output directory")->envname("HODGELAB_OUT");
    sub->add_option("--seed", o.seed, "master seed")->envname("HODGELAB_SEED");
    sub->add_option("--workers", o.workers, "worker threads for trials")->envname("HODGELAB_WORKERS");
    sub->add_option("--preset", o.preset, "default | paper | fast")->envname("HODGELAB_PRESET");
    sub->add_flag("--strict", o.strict, "exit 13 on invariant breaches")->envname("HODGELAB_STRICT");
  };

  CLI::App* run_cmd = app.add_subcommand("run", "run the experiments of a configuration");
  add_config(run_cmd);
  add_overrides(run_cmd);
  CLI::App* validate_cmd = app.add_subcommand("validate", "check a configuration without running it");
  add_config(validate_cmd);
  add_overrides(validate_cmd);
  app.add_subcommand("schema", "print the JSON Schema of configurations");
  std::string list_what;
  CLI::App* list_cmd = app.add_subcommand("list", "list builtins, experiments or psi functions");
  list_cmd->add_option("what", list_what, "builtins | experiments | psi")->required();
  std::vector<std::string> describe_args;
  CLI::App* describe_cmd = app.add_subcommand("describe", "describe a builtin, experiment or psi id");
  describe_cmd->add_option("args", describe_args, "[builtin|experiment|psi] NAME")->required()->expected(1, 2);
  app.add_subcommand("exit-codes", "print the exit code table");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  try {
    CLI::App* sub = app.get_subcommands().front();
    const std::string name = sub->get_name();
    if (name == "run") return cmd_run(o);
    if (name == "validate") return cmd_validate(o);
    if (name == "schema") {
      std::cout << config_schema().dump(2) << "\n";
      return kExitOk;
    }
    if (name == "list") return cmd_list(list_what);
    if (name == "describe") return cmd_describe(describe_args);
    if (name == "exit-codes") {
      for (const auto& [code, what] : exit_code_table()) std::cout << code << "\t" << what << "\n";
      return kExitOk;
    }
  } catch (const Error& e) {
    std::cerr << "hodgelab: " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "hodgelab: " << e.what() << "\n";
    return exit_code_for(e);
  }
  return kExitUnknown;
}
