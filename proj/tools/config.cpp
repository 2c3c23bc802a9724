#include "config.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

namespace hodgelab::cli {

namespace {

enum class Kind {
  integer,      // any integer
  positive,     // integer >= 1
  nonneg,       // integer >= 0
  number,       // any finite number
  pos_number,   // number > 0
  boolean,
  string,
  numbers,      // number or array of numbers (> 0)
  num_array,    // array of numbers
  pos_array,    // array of positive numbers
  str_array,
  window,       // {t_min, t_max, ratio}
  object,       // checked separately
  list,         // array, checked separately
  matrix,
  matrices,
};

struct KeySpec {
  std::string name;
  Kind kind;
  std::vector<std::string> choices = {};
  std::string help = "";
};

const std::vector<KeySpec>& common_keys() {
  static const std::vector<KeySpec> keys = {
      {"type", Kind::string, {}, "experiment type"},
      {"id", Kind::string, {}, "output file stem (default: type and index)"},
      {"trials", Kind::positive, {}, "number of random trials"},
      {"p", Kind::numbers, {}, "exponent(s) p"},
      {"M", Kind::positive, {}, "power of Q_t^B"},
      {"N", Kind::positive, {}, "power of P_t (N-tilde)"},
      {"band", Kind::nonneg, {}, "frequency band of random inputs"},
      {"time_grid", Kind::window, {}, "truncation window {t_min, t_max, ratio}"},
      {"refine", Kind::boolean, {}, "repeat on the doubled grid and report drift"},
      {"refine_tol", Kind::pos_number, {}, "allowed relative drift under refinement"},
      {"seed", Kind::nonneg, {}, "seed offset of this experiment"},
  };
  return keys;
}

const std::map<std::string, std::vector<KeySpec>>& specific_keys() {
  static const std::map<std::string, std::vector<KeySpec>> keys = {
      {"identities",
       {{"times", Kind::pos_array, {}, "values of t"},
        {"s_ratio", Kind::pos_number, {}, "s = s_ratio * t (s <= t)"},
        {"modes", Kind::str_array, {"automatic", "dense", "iterative", "frequency_diagonal"},
         "solver modes"}}},
      {"hodge", {}},
      {"offdiag",
       {{"family", Kind::string, {"p_t", "q_t", "resolvent", "dyadic_average"}, "operator family"},
        {"separations", Kind::pos_array, {}, "values of d/t"},
        {"inputs", Kind::positive, {}, "random inputs per t"},
        {"center", Kind::nonneg, {}, "grid index of the ball centre"},
        {"times", Kind::pos_array, {}, "values of t"}}},
      {"sq_equiv",
       {{"subspace", Kind::string, {"range_gamma", "range_gamma_star_b", "range_pi_b"},
         "sampled subspace"}}},
      {"low_freq", {}},
      {"high_freq", {}},
      {"conical_vertical", {}},
      {"kato", {}},
      {"riesz", {}},
      {"sgn", {}},
      {"sobolev", {{"times", Kind::pos_array, {}, "values of t in the supremum"}}},
      {"calculus", {{"functions", Kind::str_array, {}, "psi dictionary ids"}}},
      {"schur",
       {{"eps", Kind::pos_number, {}, "real part of z"},
        {"gammas", Kind::num_array, {}, "imaginary parts of z"},
        {"probes", Kind::positive, {}, "random probes"},
        {"iterations", Kind::positive, {}, "power iterations"}}},
      {"factorization",
       {{"q", Kind::numbers, {}, "exponent(s) q"}, {"pairs", Kind::positive, {}, "random pairs"}}},
      {"tent_laws",
       {{"fields", Kind::positive, {}, "random tent fields"},
        {"alphas", Kind::pos_array, {}, "apertures (>= 1)"}}},
  };
  return keys;
}

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw ConfigError(path + ": " + what);
}

bool is_number(const json& j) { return j.is_number() && std::isfinite(j.get<double>()); }

void check_matrix(const json& j, const std::string& path) {
  if (!j.is_array() || j.empty()) fail(path, "expected a non-empty array of rows");
  const std::size_t n = j.size();
  for (std::size_t r = 0; r < n; ++r) {
    const json& row = j[r];
    const std::string rp = path + "[" + std::to_string(r) + "]";
    if (!row.is_array() || row.size() != n) fail(rp, "expected a row of length " + std::to_string(n));
    for (std::size_t c = 0; c < n; ++c) {
      const json& e = row[c];
      if (is_number(e)) continue;
      if (e.is_array() && e.size() == 2 && is_number(e[0]) && is_number(e[1])) continue;
      fail(rp + "[" + std::to_string(c) + "]", "expected a number or [re, im]");
    }
  }
}

void check_value(const json& j, const KeySpec& k, const std::string& path) {
  auto require = [&](bool ok, const std::string& what) {
    if (!ok) fail(path, what);
  };
  auto check_choice = [&](const std::string& s) {
    if (!k.choices.empty() && std::find(k.choices.begin(), k.choices.end(), s) == k.choices.end()) {
      std::string all;
      for (const auto& c : k.choices) all += (all.empty() ? "" : ", ") + c;
      fail(path, "'" + s + "' is not one of {" + all + "}");
    }
  };
  switch (k.kind) {
    case Kind::integer: require(j.is_number_integer(), "expected an integer"); break;
    case Kind::positive:
      require(j.is_number_integer() && j.get<long long>() >= 1, "expected an integer >= 1");
      break;
    case Kind::nonneg:
      require(j.is_number_integer() && (j.is_number_unsigned() || j.get<long long>() >= 0),
              "expected an integer >= 0");
      break;
    case Kind::number: require(is_number(j), "expected a number"); break;
    case Kind::pos_number: require(is_number(j) && j.get<double>() > 0.0, "expected a number > 0"); break;
    case Kind::boolean: require(j.is_boolean(), "expected true or false"); break;
    case Kind::string:
      require(j.is_string(), "expected a string");
      check_choice(j.get<std::string>());
      break;
    case Kind::numbers:
      if (is_number(j)) {
        require(j.get<double>() > 0.0, "expected a number > 0");
        break;
      }
      [[fallthrough]];
    case Kind::pos_array:
      require(j.is_array() && !j.empty(), "expected a non-empty array of numbers");
      for (const json& e : j) require(is_number(e) && e.get<double>() > 0.0, "expected numbers > 0");
      break;
    case Kind::num_array:
      require(j.is_array() && !j.empty(), "expected a non-empty array of numbers");
      for (const json& e : j) require(is_number(e), "expected numbers");
      break;
    case Kind::str_array:
      require(j.is_array() && !j.empty(), "expected a non-empty array of strings");
      for (const json& e : j) {
        require(e.is_string(), "expected strings");
        check_choice(e.get<std::string>());
      }
      break;
    case Kind::window: {
      require(j.is_object(), "expected an object {t_min, t_max, ratio}");
      for (auto it = j.begin(); it != j.end(); ++it) {
        const std::string kp = path + "." + it.key();
        if (it.key() != "t_min" && it.key() != "t_max" && it.key() != "ratio")
          fail(kp, "unknown key");
        if (!is_number(it.value()) || it.value().get<double>() <= 0.0) fail(kp, "expected a number > 0");
      }
      const double lo = j.value("t_min", 0.0), hi = j.value("t_max", 0.0);
      if ((lo > 0.0) != (hi > 0.0)) fail(path, "t_min and t_max must be given together");
      if (lo > 0.0 && !(hi > lo)) fail(path, "t_max must exceed t_min");
      if (j.contains("ratio") && !(j["ratio"].get<double>() > 1.0)) fail(path + ".ratio", "must exceed 1");
      break;
    }
    case Kind::matrix: check_matrix(j, path); break;
    case Kind::matrices:
      require(j.is_array() && !j.empty(), "expected a non-empty array of matrices");
      for (std::size_t i = 0; i < j.size(); ++i) check_matrix(j[i], path + "[" + std::to_string(i) + "]");
      break;
    case Kind::object: require(j.is_object(), "expected an object"); break;
    case Kind::list: require(j.is_array(), "expected an array"); break;
  }
}

void check_object(const json& j, const std::vector<KeySpec>& keys, const std::string& path) {
  if (!j.is_object()) fail(path, "expected an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    const auto spec = std::find_if(keys.begin(), keys.end(),
                                   [&](const KeySpec& k) { return k.name == it.key(); });
    const std::string kp = path.empty() ? it.key() : path + "." + it.key();
    if (spec == keys.end()) fail(kp, "unknown key");
    check_value(it.value(), *spec, kp);
  }
}

const std::vector<KeySpec>& top_keys() {
  static const std::vector<KeySpec> keys = {
      {"schema_version", Kind::positive, {}, "must be 1"},
      {"seed", Kind::nonneg, {}, "master seed"},
      {"workers", Kind::positive, {}, "worker threads"},
      {"preset", Kind::string, {"default", "fast", "paper"}, "parameter preset"},
      {"output", Kind::string, {}, "output directory"},
      {"strict", Kind::boolean, {}, "fail on any invariant breach"},
      {"torus", Kind::object, {}, "grid"},
      {"operator", Kind::object, {}, "operator"},
      {"solver", Kind::object, {}, "resolvent solver"},
      {"funcalc", Kind::object, {}, "functional calculus quadrature"},
      {"audit", Kind::object, {}, "audits"},
      {"defaults", Kind::object, {}, "default experiment parameters"},
      {"experiments", Kind::list, {}, "experiment list"},
  };
  return keys;
}

const std::vector<KeySpec>& torus_keys() {
  static const std::vector<KeySpec> keys = {
      {"m", Kind::positive, {}, "points per axis (even)"},
      {"period", Kind::pos_number, {}, "side length"},
      {"dim", Kind::positive, {}, "dimension (explicit symbols only)"},
  };
  return keys;
}

const std::vector<KeySpec>& operator_keys() {
  static const std::vector<KeySpec> keys = {
      {"builtin", Kind::string, {}, "dirac1d | elliptic-n | forms-n | da-n"},
      {"amplitude", Kind::number, {}, "sup ||B - I|| of the random part, in [0, 1)"},
      {"a_amplitude", Kind::number, {}, "elliptic-n: perturbation of a, in [0, 1)"},
      {"roughness", Kind::string, {"smooth", "rough"}, "coefficient roughness"},
      {"band", Kind::nonneg, {}, "band of smooth coefficients"},
      {"phase", Kind::number, {}, "rotation e^{i phase} of the coefficients"},
      {"seed", Kind::nonneg, {}, "coefficient seed"},
      {"generators", Kind::matrices, {}, "explicit symbol: G_1 .. G_n"},
      {"b1", Kind::matrix, {}, "explicit: constant B1"},
      {"b2", Kind::matrix, {}, "explicit: constant B2"},
      {"name", Kind::string, {}, "explicit: operator name"},
  };
  return keys;
}

const std::vector<KeySpec>& solver_keys() {
  static const std::vector<KeySpec> keys = {
      {"mode", Kind::string, {"automatic", "dense", "iterative", "frequency_diagonal"}, "mode"},
      {"tol", Kind::pos_number, {}, "relative residual"},
      {"max_iterations", Kind::positive, {}, "iteration cap"},
      {"restart", Kind::positive, {}, "GMRES restart length"},
      {"precondition", Kind::boolean, {}, "unperturbed preconditioner"},
  };
  return keys;
}

const std::vector<KeySpec>& funcalc_keys() {
  static const std::vector<KeySpec> keys = {
      {"tol", Kind::pos_number, {}, "relative change under refinement"},
      {"padding", Kind::pos_number, {}, "window padding beyond the spectral range"},
      {"steps_per_octave", Kind::positive, {}, "initial nodes per octave"},
      {"max_refinements", Kind::nonneg, {}, "refinement cap"},
      {"theta", Kind::pos_number, {}, "contour angle (default (omega + pi/2)/2)"},
  };
  return keys;
}

const std::vector<KeySpec>& audit_keys() {
  static const std::vector<KeySpec> keys = {{"trials", Kind::positive, {}, "audit samples"}};
  return keys;
}

std::vector<KeySpec> all_experiment_keys(const std::string& type) {
  std::vector<KeySpec> keys = common_keys();
  const auto& sp = specific_keys().at(type);
  keys.insert(keys.end(), sp.begin(), sp.end());
  return keys;
}

/// Union of every experiment key (for the "defaults" section).
std::vector<KeySpec> union_keys() {
  std::vector<KeySpec> keys = common_keys();
  for (const auto& [type, sp] : specific_keys())
    for (const KeySpec& k : sp)
      if (std::none_of(keys.begin(), keys.end(), [&](const KeySpec& x) { return x.name == k.name; }))
        keys.push_back(k);
  keys.erase(std::remove_if(keys.begin(), keys.end(),
                            [](const KeySpec& k) { return k.name == "type" || k.name == "id"; }),
             keys.end());
  return keys;
}

Matrix to_matrix(const json& j) {
  const auto n = static_cast<Eigen::Index>(j.size());
  Matrix m(n, n);
  for (Eigen::Index r = 0; r < n; ++r)
    for (Eigen::Index c = 0; c < n; ++c) {
      const json& e = j[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
      m(r, c) = e.is_array() ? cplx(e[0].get<double>(), e[1].get<double>()) : cplx(e.get<double>());
    }
  return m;
}

SolverMode parse_mode(const std::string& s) {
  if (s == "dense") return SolverMode::dense;
  if (s == "iterative") return SolverMode::iterative;
  if (s == "frequency_diagonal") return SolverMode::frequency_diagonal;
  return SolverMode::automatic;
}

json schema_for(const KeySpec& k) {
  json s;
  const json number_array = {{"type", "array"}, {"items", {{"type", "number"}}}, {"minItems", 1}};
  switch (k.kind) {
    case Kind::integer: s = {{"type", "integer"}}; break;
    case Kind::positive: s = {{"type", "integer"}, {"minimum", 1}}; break;
    case Kind::nonneg: s = {{"type", "integer"}, {"minimum", 0}}; break;
    case Kind::number: s = {{"type", "number"}}; break;
    case Kind::pos_number: s = {{"type", "number"}, {"exclusiveMinimum", 0}}; break;
    case Kind::boolean: s = {{"type", "boolean"}}; break;
    case Kind::string:
      s = {{"type", "string"}};
      if (!k.choices.empty()) s["enum"] = k.choices;
      break;
    case Kind::numbers:
      s = {{"oneOf", json::array({{{"type", "number"}, {"exclusiveMinimum", 0}}, number_array})}};
      break;
    case Kind::num_array:
    case Kind::pos_array: s = number_array; break;
    case Kind::str_array:
      s = {{"type", "array"}, {"items", {{"type", "string"}}}, {"minItems", 1}};
      if (!k.choices.empty()) s["items"]["enum"] = k.choices;
      break;
    case Kind::window:
      s = {{"type", "object"},
           {"additionalProperties", false},
           {"properties",
            {{"t_min", {{"type", "number"}, {"exclusiveMinimum", 0}}},
             {"t_max", {{"type", "number"}, {"exclusiveMinimum", 0}}},
             {"ratio", {{"type", "number"}, {"exclusiveMinimum", 1}}}}}};
      break;
    case Kind::matrix: s = {{"$ref", "#/$defs/matrix"}}; break;
    case Kind::matrices: s = {{"type", "array"}, {"items", {{"$ref", "#/$defs/matrix"}}}}; break;
    case Kind::object: s = {{"type", "object"}}; break;
    case Kind::list: s = {{"type", "array"}}; break;
  }
  if (!k.help.empty()) s["description"] = k.help;
  return s;
}

json object_schema(const std::vector<KeySpec>& keys) {
  json props = json::object();
  for (const KeySpec& k : keys) props[k.name] = schema_for(k);
  return {{"type", "object"}, {"additionalProperties", false}, {"properties", props}};
}

}  // namespace

const std::vector<std::string>& experiment_types() {
  static const std::vector<std::string> types = [] {
    std::vector<std::string> t;
    for (const auto& [name, keys] : specific_keys()) t.push_back(name);
    return t;
  }();
  return types;
}

std::vector<std::string> experiment_keys(const std::string& type) {
  if (!specific_keys().count(type)) throw ConfigError("unknown experiment type '" + type + "'");
  std::vector<std::string> out;
  for (const KeySpec& k : specific_keys().at(type)) out.push_back(k.name);
  return out;
}

void check_preset(const std::string& preset) {
  if (preset != "default" && preset != "fast" && preset != "paper")
    throw ConfigError("preset: '" + preset + "' is not one of {default, fast, paper}");
}

RunConfig parse_config(const json& doc) {
  check_object(doc, top_keys(), "");
  if (!doc.contains("schema_version")) fail("schema_version", "required");
  if (doc["schema_version"].get<int>() != kSchemaVersion)
    fail("schema_version", "unsupported version (expected " + std::to_string(kSchemaVersion) + ")");
  RunConfig cfg;
  cfg.document = doc;
  cfg.seed = doc.value("seed", std::uint64_t{0});
  cfg.workers = doc.value("workers", 1);
  cfg.preset = doc.value("preset", std::string("default"));
  cfg.output = doc.value("output", std::string("hodgelab-out"));
  cfg.strict = doc.value("strict", false);

  if (!doc.contains("torus")) fail("torus", "required");
  const json& torus = doc["torus"];
  check_object(torus, torus_keys(), "torus");
  if (!torus.contains("m")) fail("torus.m", "required");
  const int m = torus["m"].get<int>();
  if (m % 2) fail("torus.m", "must be even");
  const double period = torus.value("period", 1.0);

  if (!doc.contains("operator")) fail("operator", "required");
  const json& op = doc["operator"];
  check_object(op, operator_keys(), "operator");
  OperatorConfig& oc = cfg.op;
  if (op.contains("generators")) {
    for (const char* k : {"builtin", "amplitude", "a_amplitude", "roughness", "band", "phase", "seed"})
      if (op.contains(k)) fail(std::string("operator.") + k, "not allowed with explicit generators");
    oc.is_explicit = true;
    for (const json& g : op["generators"]) oc.generators.push_back(to_matrix(g));
    oc.dim = static_cast<int>(oc.generators.size());
    if (oc.dim > 3) fail("operator.generators", "at most 3 generators (n <= 3)");
    const auto n = oc.generators.front().rows();
    for (const Matrix& g : oc.generators)
      if (g.rows() != n) fail("operator.generators", "generators must share one size");
    if (torus.contains("dim") && torus["dim"].get<int>() != oc.dim)
      fail("torus.dim", "does not match the number of generators");
    if (op.contains("b1")) oc.b1 = to_matrix(op["b1"]);
    if (op.contains("b2")) oc.b2 = to_matrix(op["b2"]);
    for (const auto& [key, b] : {std::pair{"b1", &oc.b1}, std::pair{"b2", &oc.b2}})
      if (*b && (*b)->rows() != n) fail(std::string("operator.") + key, "size differs from the generators");
    oc.name = op.value("name", std::string("custom"));
    oc.builtin.m = m;
    oc.builtin.period = period;
  } else {
    for (const char* k : {"b1", "b2", "name"})
      if (op.contains(k)) fail(std::string("operator.") + k, "only allowed with explicit generators");
    if (!op.contains("builtin")) fail("operator.builtin", "required (or give explicit generators)");
    OperatorSpec& s = oc.builtin;
    s.builtin = op["builtin"].get<std::string>();
    s.m = m;
    s.period = period;
    s.amplitude = op.value("amplitude", 0.0);
    s.a_amplitude = op.value("a_amplitude", 0.0);
    s.roughness = op.value("roughness", std::string("smooth")) == "rough" ? Roughness::rough
                                                                          : Roughness::smooth;
    s.band = op.value("band", 4);
    s.phase = op.value("phase", 0.0);
    s.seed = op.value("seed", std::uint64_t{0});
    for (const char* k : {"amplitude", "a_amplitude"})
      if (op.contains(k) && !(op[k].get<double>() >= 0.0 && op[k].get<double>() < 1.0))
        fail(std::string("operator.") + k, "must lie in [0, 1)");
    try {
      describe_builtin(s.builtin);
    } catch (const Error&) {
      fail("operator.builtin", "unknown builtin '" + s.builtin + "'");
    }
    if (torus.contains("dim")) fail("torus.dim", "only allowed with explicit generators");
  }

  if (doc.contains("solver")) {
    const json& s = doc["solver"];
    check_object(s, solver_keys(), "solver");
    cfg.solver.mode = parse_mode(s.value("mode", std::string("automatic")));
    cfg.solver.tol = s.value("tol", cfg.solver.tol);
    cfg.solver.max_iterations = s.value("max_iterations", cfg.solver.max_iterations);
    cfg.solver.restart = s.value("restart", cfg.solver.restart);
    cfg.solver.precondition = s.value("precondition", cfg.solver.precondition);
  }
  if (doc.contains("funcalc")) {
    const json& f = doc["funcalc"];
    check_object(f, funcalc_keys(), "funcalc");
    cfg.funcalc.tol = f.value("tol", cfg.funcalc.tol);
    cfg.funcalc.padding = f.value("padding", cfg.funcalc.padding);
    cfg.funcalc.steps_per_octave = f.value("steps_per_octave", cfg.funcalc.steps_per_octave);
    cfg.funcalc.max_refinements = f.value("max_refinements", cfg.funcalc.max_refinements);
    if (f.contains("theta")) cfg.funcalc.theta = f["theta"].get<double>();
  }
  if (doc.contains("audit")) {
    check_object(doc["audit"], audit_keys(), "audit");
    cfg.audit_trials = doc["audit"].value("trials", cfg.audit_trials);
  }
  if (doc.contains("defaults")) {
    check_object(doc["defaults"], union_keys(), "defaults");
    cfg.defaults = doc["defaults"];
  }

  if (!doc.contains("experiments")) fail("experiments", "required");
  const json& exps = doc["experiments"];
  if (!exps.is_array() || exps.empty()) fail("experiments", "expected a non-empty array");
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < exps.size(); ++i) {
    const std::string path = "experiments[" + std::to_string(i) + "]";
    const json& e = exps[i];
    if (!e.is_object()) fail(path, "expected an object");
    if (!e.contains("type") || !e["type"].is_string()) fail(path + ".type", "required string");
    const std::string type = e["type"].get<std::string>();
    if (!specific_keys().count(type)) {
      std::string all;
      for (const auto& t : experiment_types()) all += (all.empty() ? "" : ", ") + t;
      fail(path + ".type", "unknown experiment type '" + type + "' (one of " + all + ")");
    }
    check_object(e, all_experiment_keys(type), path);
    if (e.contains("functions"))
      for (const json& f : e["functions"]) {
        try {
          make_psi(f.get<std::string>());
        } catch (const Error& err) {
          fail(path + ".functions", err.what());
        }
      }
    ExperimentConfig ec;
    ec.type = type;
    ec.id = e.value("id", type + "_" + std::to_string(i));
    if (ec.id.empty() || ec.id.find_first_of("/\\ ") != std::string::npos)
      fail(path + ".id", "must be a non-empty file stem");
    if (std::find(ids.begin(), ids.end(), ec.id) != ids.end()) fail(path + ".id", "duplicate id");
    ids.push_back(ec.id);
    ec.own = e;
    ec.own.erase("type");
    ec.own.erase("id");
    cfg.experiments.push_back(std::move(ec));
  }
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  json doc;
  try {
    doc = json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("syntax error: ") + e.what());
  }
  return parse_config(doc);
}

json resolve_params(const RunConfig& cfg, const ExperimentConfig& exp) {
  json p = json::object();
  const int n = cfg.op.is_explicit ? cfg.op.dim : builtin_dimension(cfg.op.builtin.builtin);
  if (cfg.preset == "paper") {
    p["M"] = 10 * n;
    p["N"] = 10 * n;
  }
  const auto allowed = all_experiment_keys(exp.type);
  for (auto it = cfg.defaults.begin(); it != cfg.defaults.end(); ++it)
    if (std::any_of(allowed.begin(), allowed.end(), [&](const KeySpec& k) { return k.name == it.key(); }))
      p[it.key()] = it.value();
  for (auto it = exp.own.begin(); it != exp.own.end(); ++it) p[it.key()] = it.value();
  if (cfg.preset == "fast") {
    for (const char* k : {"trials", "pairs", "fields"})
      if (p.contains(k)) p[k] = std::max(2, p[k].get<int>() / 4);
    p["fast"] = true;
  }
  return p;
}

json config_schema() {
  json exp_variants = json::array();
  for (const std::string& type : experiment_types()) {
    json s = object_schema(all_experiment_keys(type));
    s["properties"]["type"] = {{"const", type}};
    s["required"] = {"type"};
    exp_variants.push_back(s);
  }
  json top = object_schema(top_keys());
  top["$schema"] = "https://json-schema.org/draft/2020-12/schema";
  top["title"] = "hodgelab run configuration";
  top["required"] = {"schema_version", "torus", "operator", "experiments"};
  top["properties"]["schema_version"] = {{"const", kSchemaVersion}};
  top["properties"]["torus"] = object_schema(torus_keys());
  top["properties"]["torus"]["required"] = {"m"};
  top["properties"]["operator"] = object_schema(operator_keys());
  top["properties"]["solver"] = object_schema(solver_keys());
  top["properties"]["funcalc"] = object_schema(funcalc_keys());
  top["properties"]["audit"] = object_schema(audit_keys());
  top["properties"]["defaults"] = object_schema(union_keys());
  top["properties"]["experiments"] = {{"type", "array"}, {"minItems", 1}, {"items", {{"oneOf", exp_variants}}}};
  const json entry = {{"oneOf", json::array({json{{"type", "number"}},
                                             json{{"type", "array"},
                                                  {"items", {{"type", "number"}}},
                                                  {"minItems", 2},
                                                  {"maxItems", 2}}})}};
  const json row = {{"type", "array"}, {"items", entry}};
  top["$defs"]["matrix"] = {{"type", "array"}, {"items", row}};
  return top;
}

std::shared_ptr<const PerturbedDirac> build(const OperatorConfig& op, int m_override) {
  if (!op.is_explicit) {
    OperatorSpec s = op.builtin;
    if (m_override > 0) s.m = m_override;
    return build_operator(s);
  }
  const int m = m_override > 0 ? m_override : op.builtin.m;
  const Torus torus(op.dim, m, op.builtin.period);
  const DiracSymbol sym(op.dim, op.generators);
  auto constant = [&](const std::optional<Matrix>& b) -> std::optional<MatrixField> {
    if (!b) return std::nullopt;
    MatrixField f(torus, static_cast<int>(b->rows()));
    for (std::size_t x = 0; x < torus.num_points(); ++x) f.at(x) = *b;
    return f;
  };
  return std::make_shared<PerturbedDirac>(sym, torus, constant(op.b1), constant(op.b2), op.name);
}

TimeWindow parse_window(const json& j) {
  TimeWindow w;
  if (j.is_null()) return w;
  w.t_min = j.value("t_min", 0.0);
  w.t_max = j.value("t_max", 0.0);
  w.ratio = j.value("ratio", 0.0);
  return w;
}

TimeGrid make_grid(const TimeWindow& w, const Torus& torus) {
  const double ratio = w.ratio > 0.0 ? w.ratio : std::exp2(0.25);
  if (w.t_min > 0.0) return TimeGrid::geometric(w.t_min, w.t_max, ratio);
  const TimeGrid s = TimeGrid::standard(torus);
  return TimeGrid::geometric(s.t_min(), s.t_max(), ratio);
}

std::string sha256_hex(const std::string& text) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(text.data(), text.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw Error("cli", "SHA-256 failed");
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i)
    os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  return os.str();
}

}  // namespace hodgelab::cli
