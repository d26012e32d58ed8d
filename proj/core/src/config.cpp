#include "maflow/config.hpp"

#include <cmath>
#include <numbers>
#include <set>
#include <sstream>

#include "maflow/spectral.hpp"

namespace maflow {

using nlohmann::json;

namespace {

std::string join(const std::vector<std::string>& errs) {
  std::string s = "invalid configuration:";
  for (const auto& e : errs) s += "\n  - " + e;
  return s;
}

bool power_of_two(int v) { return v > 0 && (v & (v - 1)) == 0; }

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = {
      "preset",        "kind",          "variant",      "n",
      "grid",          "periods",       "background",   "f",
      "omega0",        "eta",           "t_prime",      "omega_density",
      "stepper",       "newton",        "monitor_every", "record_S",
      "checkpoint_every", "seed",       "perturbation", "uniqueness_pair",
      "oracle_tolerance", "class",      "out"};
  return keys;
}

// Matrix entries are numbers or [re, im] pairs.
std::optional<std::vector<cplx>> read_matrix(const json& j, int n, const std::string& key,
                                             std::vector<std::string>& errs) {
  if (!j.is_array() || j.size() != static_cast<std::size_t>(n)) {
    errs.push_back(key + ": expected " + std::to_string(n) + " rows");
    return std::nullopt;
  }
  std::vector<cplx> out;
  for (const auto& row : j) {
    if (!row.is_array() || row.size() != static_cast<std::size_t>(n)) {
      errs.push_back(key + ": every row needs " + std::to_string(n) + " entries");
      return std::nullopt;
    }
    for (const auto& e : row) {
      if (e.is_number()) {
        out.emplace_back(e.get<double>(), 0.0);
      } else if (e.is_array() && e.size() == 2 && e[0].is_number() && e[1].is_number()) {
        out.emplace_back(e[0].get<double>(), e[1].get<double>());
      } else {
        errs.push_back(key + ": entries must be numbers or [re, im]");
        return std::nullopt;
      }
    }
  }
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < n; ++k)
      if (std::abs(out[i * n + k] - std::conj(out[k * n + i])) > 1e-13) {
        errs.push_back(key + ": matrix is not Hermitian");
        return std::nullopt;
      }
  return out;
}

json write_matrix(int n, const std::vector<cplx>& m) {
  json rows = json::array();
  for (int i = 0; i < n; ++i) {
    json row = json::array();
    for (int k = 0; k < n; ++k) {
      const cplx v = m[i * n + k];
      if (v.imag() == 0.0) row.push_back(v.real());
      else row.push_back(json::array({v.real(), v.imag()}));
    }
    rows.push_back(row);
  }
  return rows;
}

std::vector<cplx> entries(const PointMatrix& m) {
  return std::vector<cplx>(m.a.begin(), m.a.begin() + m.n * m.n);
}

std::optional<std::vector<FourierMode>> read_modes(const json& j, const std::string& key,
                                                   std::vector<std::string>& errs) {
  if (!j.is_array()) {
    errs.push_back(key + ": expected a list of modes");
    return std::nullopt;
  }
  std::vector<FourierMode> modes;
  for (const auto& m : j) {
    if (!m.is_object() || !m.contains("k") || !m["k"].is_array()) {
      errs.push_back(key + ": each mode needs an integer list \"k\"");
      return std::nullopt;
    }
    FourierMode fm;
    for (const auto& k : m["k"]) {
      if (!k.is_number_integer()) {
        errs.push_back(key + ": wavenumbers must be integers");
        return std::nullopt;
      }
      fm.k.push_back(k.get<int>());
    }
    for (auto it = m.begin(); it != m.end(); ++it) {
      if (it.key() != "k" && it.key() != "amplitude" && it.key() != "phase")
        errs.push_back(key + ": unknown mode key \"" + it.key() + "\"");
    }
    fm.amplitude = m.value("amplitude", 0.0);
    fm.phase = m.value("phase", 0.0);
    modes.push_back(std::move(fm));
  }
  return modes;
}

json write_modes(const std::vector<FourierMode>& modes) {
  json out = json::array();
  for (const auto& m : modes)
    out.push_back({{"k", m.k}, {"amplitude", m.amplitude}, {"phase", m.phase}});
  return out;
}

void check_modes(const std::vector<FourierMode>& modes, const ExperimentConfig& c,
                 const std::string& key, std::vector<std::string>& errs) {
  const int dims = 2 * c.n;
  for (std::size_t i = 0; i < modes.size(); ++i) {
    const auto& m = modes[i];
    const std::string where = key + "[" + std::to_string(i) + "]";
    if (static_cast<int>(m.k.size()) != dims) {
      errs.push_back(where + ": k needs " + std::to_string(dims) + " entries");
      continue;
    }
    if (!std::isfinite(m.amplitude) || !std::isfinite(m.phase))
      errs.push_back(where + ": amplitude and phase must be finite");
    if (static_cast<int>(c.grid.size()) != dims) continue;
    for (int d = 0; d < dims; ++d) {
      if (c.grid[d] > 0 && !SpectralWorkspace::in_dealias_band(m.k[d], c.grid[d])) {
        errs.push_back(where + ": wavenumber " + std::to_string(m.k[d]) +
                       " is outside the resolved band for grid " +
                       std::to_string(c.grid[d]));
      }
    }
  }
}

template <class T>
void read_number(const json& doc, const char* key, T& dst, std::vector<std::string>& errs) {
  if (!doc.contains(key)) return;
  const auto& v = doc[key];
  if constexpr (std::is_same_v<T, bool>) {
    if (!v.is_boolean()) { errs.push_back(std::string(key) + ": expected a boolean"); return; }
  } else if constexpr (std::is_integral_v<T>) {
    if (!v.is_number_integer()) { errs.push_back(std::string(key) + ": expected an integer"); return; }
  } else {
    if (!v.is_number()) { errs.push_back(std::string(key) + ": expected a number"); return; }
  }
  dst = v.get<T>();
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> errors)
    : std::runtime_error(join(errors)), errors_(std::move(errors)) {}

TorusDomain ExperimentConfig::domain() const {
  return TorusDomain::make(n, grid, periods);
}

std::vector<std::string> preset_names() {
  return {"cy_t2_n1", "cy_t4_n2", "ke_neg_t2", "ref_flow_t2", "uniq_test", "class_demo"};
}

ExperimentConfig preset(const std::string& name) {
  ExperimentConfig c;
  c.preset = name;
  if (name == "cy_t2_n1") {
    c.variant = Variant::CalabiYau;
    c.n = 1;
    c.grid = {64, 64};
    c.periods = {1.0, 1.0};
    c.background = PointMatrix::identity(1);
    c.f_modes = {{{1, 0}, 0.2, 0.0}};
    c.stepper.tolerance = 1e-9;
    c.stepper.converge_tol = 1e-8;
    c.stepper.t_end = 50.0;
    c.monitor_every = 0.02;
    c.oracle_tolerance = 1e-6;
  } else if (name == "cy_t4_n2") {
    c.variant = Variant::CalabiYau;
    c.n = 2;
    c.grid = {16, 16, 16, 16};
    c.periods = {1.0, 1.0, 1.0, 1.0};
    const std::array<cplx, 4> bg{cplx(1.0, 0.0), cplx(0.0, 0.2), cplx(0.0, -0.2),
                                 cplx(1.0, 0.0)};
    c.background = PointMatrix::from_rows(2, bg);
    c.f_modes = {{{1, 0, 0, 0}, 0.1, 0.0}, {{0, 1, 1, 0}, 0.1, 0.5}};
    c.stepper.tolerance = 1e-8;
    c.stepper.converge_tol = 1e-8;
    c.stepper.t_end = 50.0;
    c.monitor_every = 0.02;
    c.oracle_tolerance = 1e-5;
  } else if (name == "ke_neg_t2") {
    c.variant = Variant::NegativeKE;
    c.n = 1;
    c.grid = {32, 32};
    c.periods = {1.0, 1.0};
    c.f_modes = {{{1, 0}, 0.2, 0.0}};
    c.stepper.tolerance = 1e-9;
    c.stepper.converge_tol = 1e-8;
    c.stepper.t_end = 50.0;
    c.monitor_every = 0.05;
    c.oracle_tolerance = 1e-6;
  } else if (name == "ref_flow_t2") {
    c.variant = Variant::ReferenceFlow;
    c.n = 1;
    c.grid = {32, 32};
    c.periods = {1.0, 1.0};
    c.omega0 = PointMatrix::identity(1);
    const std::array<double, 1> two{2.0};
    c.eta = PointMatrix::diagonal(two);
    c.background = c.omega0;
    c.t_prime = 1.0;
    c.omega_scale = 1.0;
    c.omega_modes = {{{1, 0}, 0.1, 0.0}};
    c.stepper.tolerance = 1e-9;
    c.stepper.t_end = 1.0;
    c.monitor_every = 0.02;
  } else if (name == "uniq_test") {
    c.variant = Variant::NegativeKE;
    c.n = 1;
    c.grid = {32, 32};
    c.periods = {1.0, 1.0};
    c.f_modes = {{{1, 0}, 0.2, 0.0}, {{0, 2}, 0.1, 0.3}};
    c.stepper.tolerance = 1e-9;
    c.stepper.converge_tol = 1e-9;
    c.monitor_every = 0.1;
    c.seed = 7;
    c.perturbation = 1e-2;
    c.uniqueness_pair = true;
    c.oracle_tolerance = 1e-6;
  } else if (name == "class_demo") {
    c.kind = "class";
    c.n = 2;
    c.grid = {8, 8, 8, 8};
    c.periods = {1.0, 1.0, 1.0, 1.0};
    c.background = c.omega0 = c.eta = PointMatrix::identity(2);
    c.class_a0 = ClassVector::from_rows(2, {2.0, cplx(0.0, 0.5), cplx(0.0, -0.5), 1.0});
    c.class_b = ClassVector::from_rows(2, {1.0, 0.3, 0.3, 0.5});
  } else {
    std::string known;
    for (const auto& p : preset_names()) known += (known.empty() ? "" : ", ") + p;
    throw ConfigError({"unknown preset \"" + name + "\" (known: " + known + ")"});
  }
  return c;
}

ExperimentConfig parse_config(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError({std::string("not valid JSON: ") + e.what()});
  }
  return parse_config(doc);
}

ExperimentConfig parse_config(const json& doc) {
  std::vector<std::string> errs;
  if (!doc.is_object()) throw ConfigError({"configuration must be a JSON object"});

  for (auto it = doc.begin(); it != doc.end(); ++it)
    if (!known_keys().count(it.key())) errs.push_back("unknown key \"" + it.key() + "\"");

  ExperimentConfig c;
  if (doc.contains("preset")) {
    if (!doc["preset"].is_string()) {
      errs.push_back("preset: expected a string");
    } else {
      try {
        c = preset(doc["preset"].get<std::string>());
      } catch (const ConfigError& e) {
        errs.insert(errs.end(), e.errors().begin(), e.errors().end());
      }
    }
  }
  const bool from_preset = !c.preset.empty();
  for (auto it = doc.begin(); it != doc.end(); ++it)
    if (from_preset && it.key() != "preset" && known_keys().count(it.key()))
      c.overridden.push_back(it.key());

  if (doc.contains("kind")) {
    const auto k = doc.value("kind", std::string());
    if (k != "flow" && k != "class") errs.push_back("kind: must be \"flow\" or \"class\"");
    else c.kind = k;
  }
  if (doc.contains("variant")) {
    try {
      c.variant = variant_from_string(doc["variant"].get<std::string>());
    } catch (const std::exception&) {
      errs.push_back("variant: must be calabi_yau, negative_ke or reference_flow");
    }
  }
  const int old_n = c.n;
  read_number(doc, "n", c.n, errs);
  if (c.n != 1 && c.n != 2) {
    errs.push_back("n: complex dimension must be 1 or 2");
    c.n = 1;
  }
  const int dims = 2 * c.n;
  if (c.n != old_n) {
    // Dimension changed under a preset; resize the dimension-bound fields.
    c.grid.assign(dims, c.grid.empty() ? 32 : c.grid.front());
    c.periods.assign(dims, c.periods.empty() ? 1.0 : c.periods.front());
    c.background = PointMatrix::identity(c.n);
    c.omega0 = PointMatrix::identity(c.n);
    c.eta = PointMatrix::identity(c.n);
  }

  if (doc.contains("grid")) {
    const auto& g = doc["grid"];
    if (g.is_number_integer()) {
      c.grid.assign(dims, g.get<int>());
    } else if (g.is_array() && g.size() == static_cast<std::size_t>(dims) &&
               std::all_of(g.begin(), g.end(), [](const json& v) { return v.is_number_integer(); })) {
      c.grid = g.get<std::vector<int>>();
    } else {
      errs.push_back("grid: expected an integer or a list of " + std::to_string(dims));
    }
  }
  for (int v : c.grid) {
    if (!power_of_two(v)) {
      errs.push_back("grid must be a power of two (got " + std::to_string(v) + ")");
    } else if (v < 8) {
      errs.push_back("grid must be at least 8 (got " + std::to_string(v) + ")");
    }
  }
  if (static_cast<int>(c.grid.size()) != dims)
    errs.push_back("grid: needs " + std::to_string(dims) + " entries");

  if (doc.contains("periods")) {
    const auto& p = doc["periods"];
    if (p.is_number()) {
      c.periods.assign(dims, p.get<double>());
    } else if (p.is_array() && p.size() == static_cast<std::size_t>(dims) &&
               std::all_of(p.begin(), p.end(), [](const json& v) { return v.is_number(); })) {
      c.periods = p.get<std::vector<double>>();
    } else {
      errs.push_back("periods: expected a number or a list of " + std::to_string(dims));
    }
  }
  for (double L : c.periods)
    if (!(L > 0.0) || !std::isfinite(L)) errs.push_back("periods must be positive");

  auto read_pm = [&](const char* key, PointMatrix& dst) {
    if (!doc.contains(key)) return;
    if (auto m = read_matrix(doc[key], c.n, key, errs)) dst = PointMatrix::from_rows(c.n, *m);
  };
  read_pm("background", c.background);
  read_pm("omega0", c.omega0);
  read_pm("eta", c.eta);
  if (c.variant == Variant::ReferenceFlow) c.background = c.omega0;

  if (doc.contains("f")) {
    if (auto m = read_modes(doc["f"], "f", errs)) c.f_modes = *m;
  }
  read_number(doc, "t_prime", c.t_prime, errs);
  if (doc.contains("omega_density")) {
    const auto& od = doc["omega_density"];
    if (!od.is_object()) {
      errs.push_back("omega_density: expected an object");
    } else {
      for (auto it = od.begin(); it != od.end(); ++it)
        if (it.key() != "scale" && it.key() != "modes")
          errs.push_back("omega_density: unknown key \"" + it.key() + "\"");
      read_number(od, "scale", c.omega_scale, errs);
      if (od.contains("modes"))
        if (auto m = read_modes(od["modes"], "omega_density.modes", errs)) c.omega_modes = *m;
    }
  }

  if (doc.contains("stepper")) {
    const auto& s = doc["stepper"];
    static const std::set<std::string> sk = {"dt_initial", "safety", "dt_max", "tolerance",
                                             "dealias", "max_steps", "t_end", "converge_tol",
                                             "stability_factor"};
    if (!s.is_object()) {
      errs.push_back("stepper: expected an object");
    } else {
      for (auto it = s.begin(); it != s.end(); ++it)
        if (!sk.count(it.key())) errs.push_back("stepper: unknown key \"" + it.key() + "\"");
      read_number(s, "dt_initial", c.stepper.dt_initial, errs);
      read_number(s, "safety", c.stepper.safety, errs);
      read_number(s, "dt_max", c.stepper.dt_max, errs);
      read_number(s, "tolerance", c.stepper.tolerance, errs);
      read_number(s, "dealias", c.stepper.dealias, errs);
      read_number(s, "max_steps", c.stepper.max_steps, errs);
      read_number(s, "t_end", c.stepper.t_end, errs);
      read_number(s, "converge_tol", c.stepper.converge_tol, errs);
      read_number(s, "stability_factor", c.stepper.stability_factor, errs);
    }
  }
  try {
    c.stepper.validate();
  } catch (const std::exception& e) {
    errs.push_back(std::string("stepper: ") + e.what());
  }

  if (doc.contains("newton")) {
    const auto& s = doc["newton"];
    if (!s.is_object()) {
      errs.push_back("newton: expected an object");
    } else {
      for (auto it = s.begin(); it != s.end(); ++it)
        if (it.key() != "max_iterations" && it.key() != "tolerance")
          errs.push_back("newton: unknown key \"" + it.key() + "\"");
      read_number(s, "max_iterations", c.newton.max_iterations, errs);
      read_number(s, "tolerance", c.newton.tolerance, errs);
    }
  }
  try {
    c.newton.validate();
  } catch (const std::exception& e) {
    errs.push_back(std::string("newton: ") + e.what());
  }

  read_number(doc, "monitor_every", c.monitor_every, errs);
  read_number(doc, "record_S", c.record_S, errs);
  read_number(doc, "checkpoint_every", c.checkpoint_every, errs);
  read_number(doc, "seed", c.seed, errs);
  read_number(doc, "perturbation", c.perturbation, errs);
  read_number(doc, "uniqueness_pair", c.uniqueness_pair, errs);
  read_number(doc, "oracle_tolerance", c.oracle_tolerance, errs);
  if (doc.contains("out")) {
    if (doc["out"].is_string()) c.out_dir = doc["out"].get<std::string>();
    else errs.push_back("out: expected a string");
  }
  if (!(c.monitor_every > 0.0)) errs.push_back("monitor_every must be positive");
  if (c.checkpoint_every < 0.0) errs.push_back("checkpoint_every must be >= 0");
  if (c.perturbation < 0.0) errs.push_back("perturbation must be >= 0");
  if (!(c.t_prime > 0.0)) errs.push_back("t_prime must be positive");
  if (!(c.omega_scale > 0.0)) errs.push_back("omega_density.scale must be positive");

  if (doc.contains("class")) {
    const auto& cl = doc["class"];
    if (!cl.is_object() || !cl.contains("A0") || !cl.contains("B")) {
      errs.push_back("class: expected {\"A0\": matrix, \"B\": matrix}");
    } else {
      for (auto it = cl.begin(); it != cl.end(); ++it)
        if (it.key() != "A0" && it.key() != "B")
          errs.push_back("class: unknown key \"" + it.key() + "\"");
      auto a = read_matrix(cl["A0"], c.n, "class.A0", errs);
      auto b = read_matrix(cl["B"], c.n, "class.B", errs);
      if (a && b) {
        c.class_a0 = ClassVector::from_rows(c.n, *a);
        c.class_b = ClassVector::from_rows(c.n, *b);
      }
    }
  }
  if (c.kind == "class") {
    if (!c.class_a0 || !c.class_b) errs.push_back("class: kind \"class\" needs A0 and B");
    else if (c.class_a0->n != c.n) errs.push_back("class: matrices must be n x n");
  }

  check_modes(c.f_modes, c, "f", errs);
  check_modes(c.omega_modes, c, "omega_density.modes", errs);

  if (c.kind == "flow") {
    auto check_pd = [&](const PointMatrix& m, const char* key) {
      if (m.n != c.n) {
        errs.push_back(std::string(key) + ": must be n x n");
        return;
      }
      if (!(eigen_extrema(m).first > 0.0))
        errs.push_back(std::string(key) + ": must be positive definite (min eigenvalue " +
                       std::to_string(eigen_extrema(m).first) + ")");
    };
    check_pd(c.background, "background");
    if (c.variant == Variant::ReferenceFlow) check_pd(c.eta, "eta");
    if (c.variant != Variant::NegativeKE && c.uniqueness_pair)
      errs.push_back("uniqueness_pair needs variant negative_ke");
  }

  if (!errs.empty()) throw ConfigError(std::move(errs));
  return c;
}

json to_json(const ExperimentConfig& c) {
  json j;
  j["kind"] = c.kind;
  j["variant"] = to_string(c.variant);
  j["n"] = c.n;
  j["grid"] = c.grid;
  j["periods"] = c.periods;
  j["background"] = write_matrix(c.background.n, entries(c.background));
  j["f"] = write_modes(c.f_modes);
  if (c.variant == Variant::ReferenceFlow) {
    j["omega0"] = write_matrix(c.omega0.n, entries(c.omega0));
    j["eta"] = write_matrix(c.eta.n, entries(c.eta));
    j["t_prime"] = c.t_prime;
    j["omega_density"] = {{"scale", c.omega_scale}, {"modes", write_modes(c.omega_modes)}};
  }
  j["stepper"] = {{"dt_initial", c.stepper.dt_initial}, {"safety", c.stepper.safety},
                  {"dt_max", c.stepper.dt_max},         {"tolerance", c.stepper.tolerance},
                  {"dealias", c.stepper.dealias},       {"max_steps", c.stepper.max_steps},
                  {"t_end", c.stepper.t_end},           {"converge_tol", c.stepper.converge_tol},
                  {"stability_factor", c.stepper.stability_factor}};
  j["newton"] = {{"max_iterations", c.newton.max_iterations},
                 {"tolerance", c.newton.tolerance}};
  j["monitor_every"] = c.monitor_every;
  j["record_S"] = c.record_S;
  j["checkpoint_every"] = c.checkpoint_every;
  j["seed"] = c.seed;
  j["perturbation"] = c.perturbation;
  j["uniqueness_pair"] = c.uniqueness_pair;
  j["oracle_tolerance"] = c.oracle_tolerance;
  if (c.class_a0 && c.class_b)
    j["class"] = {{"A0", write_matrix(c.n, c.class_a0->m)},
                  {"B", write_matrix(c.n, c.class_b->m)}};
  j["out"] = c.out_dir;
  return j;
}

ScalarField build_modes(const TorusDomain& d, const std::vector<FourierMode>& modes) {
  return ScalarField::sample(d, [&](std::span<const double> x) {
    double s = 0.0;
    for (const auto& m : modes) {
      double arg = m.phase;
      for (int k = 0; k < d.real_dims(); ++k)
        arg += 2.0 * std::numbers::pi * m.k[k] * x[k] / d.periods[k];
      s += m.amplitude * std::cos(arg);
    }
    return s;
  });
}

FlowProblem build_problem(const ExperimentConfig& c) {
  const TorusDomain d = c.domain();
  switch (c.variant) {
    case Variant::CalabiYau:
      return FlowProblem::calabi_yau(make_flat_metric(d, c.background), build_modes(d, c.f_modes));
    case Variant::NegativeKE:
      return FlowProblem::negative_ke(make_flat_metric(d, c.background),
                                      build_modes(d, c.f_modes));
    case Variant::ReferenceFlow: {
      ScalarField omega = build_modes(d, c.omega_modes);
      for (auto& v : omega.values) v = c.omega_scale * std::exp(v);
      return FlowProblem::reference_flow(make_flat_metric(d, c.omega0),
                                         make_flat_metric(d, c.eta), c.t_prime,
                                         std::move(omega));
    }
  }
  throw std::logic_error("unhandled variant");
}

}  // namespace maflow
