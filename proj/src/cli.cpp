#include "resolab/cli.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "resolab/classical.hpp"
#include "resolab/lattice.hpp"
#include "resolab/parallel.hpp"
#include "resolab/potential.hpp"
#include "resolab/spectral.hpp"
#include "resolab/verify.hpp"
#include "resolab/wkb.hpp"

namespace resolab::cli {

using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr const char* kDefaults = R"({
  "schema_version": 1,
  "potential": {"family": "gaussian_barrier", "params": {}, "guess": null},
  "grid": {"points": 2000, "half_width": 8.0, "fd_order": 4, "min_points": 32, "max_unknowns": 250000},
  "distortion": {"mode": "global_rotation", "theta_policy": "paper", "theta": 0.5,
                 "inner_radius": 2.0, "outer_radius": 4.0},
  "stability": {"eta": 0.2, "refine_factor": 1.5, "stab_tol": 0.001, "imag_tol": 0.001, "cluster_tol": 0.001},
  "window": {"C": 4.0, "E0": null},
  "h_list": [0.2, 0.1, 0.05, 0.025],
  "output": {"dir": "out"},
  "jobs": 0,
  "lattice": {"h": 0.05, "lambda": null, "E0": null, "shift": [0.0, 0.0], "mu_count": 8},
  "classical": {"shell_radius": 3.0, "T_max": 50.0, "samples": 200, "seed": 20240611, "dt": 0.001,
                "r_min_fraction": 0.1, "box_factor": 10.0, "eikonal_order": 8,
                "trajectory": {"x0": null, "xi0": null, "T": 10.0, "record_stride": 10}},
  "resonances": {"h": 0.05, "dump_matrix": false},
  "resolvent": {"h": 0.05, "samples": 200, "cutoff_radius": 1.0, "prominence": 2.0, "seed": 2654435769,
                "start": null, "end": null},
  "state": {"h_list": [0.1, 0.05, 0.025], "alpha": 0, "radius": 0.3, "phase_order": 8, "m_max": 3,
            "unrotation": "exact"},
  "expand": {"alpha0": null, "K": 6}
})";

std::string pointer(const std::string& path) {
  std::string p = "/";
  for (char c : path) p += c == '.' ? '/' : c;
  return p;
}

/// Typed access to the merged configuration; every error names the key.
class Config {
 public:
  explicit Config(json j) : j_(std::move(j)) {}
  const json& raw() const { return j_; }

  const json& at(const std::string& path) const {
    const json::json_pointer ptr(pointer(path));
    if (!j_.contains(ptr)) fail(path, "missing");
    return j_.at(ptr);
  }
  bool has(const std::string& path) const {
    const json::json_pointer ptr(pointer(path));
    return j_.contains(ptr) && !j_.at(ptr).is_null();
  }
  double number(const std::string& path) const {
    const json& v = at(path);
    if (!v.is_number()) fail(path, "must be a number");
    return v.get<double>();
  }
  double positive(const std::string& path) const {
    const double v = number(path);
    if (!(v > 0.0) || !std::isfinite(v)) fail(path, "must be positive");
    return v;
  }
  long integer(const std::string& path, long min) const {
    const json& v = at(path);
    if (!v.is_number_integer()) fail(path, "must be an integer");
    const long i = v.get<long>();
    if (i < min) fail(path, "must be >= " + std::to_string(min));
    return i;
  }
  std::uint64_t seed(const std::string& path) const {
    const json& v = at(path);
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0))
      fail(path, "must be a non-negative integer");
    return v.get<std::uint64_t>();
  }
  bool flag(const std::string& path) const {
    const json& v = at(path);
    if (!v.is_boolean()) fail(path, "must be true or false");
    return v.get<bool>();
  }
  std::string text(const std::string& path) const {
    const json& v = at(path);
    if (!v.is_string()) fail(path, "must be a string");
    return v.get<std::string>();
  }
  std::vector<double> numbers(const std::string& path) const {
    const json& v = at(path);
    if (!v.is_array()) fail(path, "must be an array of numbers");
    std::vector<double> out;
    for (const auto& e : v) {
      if (!e.is_number()) fail(path, "must be an array of numbers");
      out.push_back(e.get<double>());
    }
    return out;
  }
  Complex complex(const std::string& path) const {
    const std::vector<double> v = numbers(path);
    if (v.size() != 2) fail(path, "must be [re, im]");
    return {v[0], v[1]};
  }
  [[noreturn]] static void fail(const std::string& path, const std::string& what) {
    throw ValidationError("config key '" + path + "': " + what);
  }

 private:
  json j_;
};

/// Rejects keys the defaults do not know, except inside free-form objects.
void check_known(const json& user, const json& defaults, const std::string& path) {
  if (!user.is_object() || !defaults.is_object()) return;
  for (const auto& [key, value] : user.items()) {
    const std::string p = path.empty() ? key : path + "." + key;
    if (!defaults.contains(key)) Config::fail(p, "unknown key");
    if (p == "potential.params") continue;
    if (defaults.at(key).is_object()) {
      if (!value.is_object()) Config::fail(p, "must be an object");
      check_known(value, defaults.at(key), p);
    }
  }
}

/// Recursive overlay; unlike a merge patch, null values are kept.
void overlay(json& base, const json& patch) {
  for (const auto& [key, value] : patch.items()) {
    if (value.is_object() && base.contains(key) && base[key].is_object())
      overlay(base[key], value);
    else
      base[key] = value;
  }
}

json parse_value(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error&) {
    return json(text);
  }
}

Config load_config(const std::string& path, const std::vector<std::string>& overrides) {
  const json defaults = json::parse(kDefaults);
  json merged = defaults;
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot read config file '" + path + "'");
    json user;
    try {
      user = json::parse(in);
    } catch (const json::parse_error& e) {
      throw ValidationError("config file '" + path + "' is not valid JSON: " + e.what());
    }
    // An emitted artifact carries its own config.
    if (user.is_object() && user.contains("artifact") && user.contains("config")) user = user.at("config");
    if (!user.is_object()) throw ValidationError("config file '" + path + "' must hold a JSON object");
    check_known(user, defaults, "");
    overlay(merged, user);
  }
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos || eq == 0) throw ValidationError("--set expects KEY=VALUE, got '" + o + "'");
    const std::string key = o.substr(0, eq);
    json patch = json::object();
    patch[json::json_pointer(pointer(key))] = parse_value(o.substr(eq + 1));
    check_known(patch, defaults, "");
    overlay(merged, patch);
  }
  Config c(std::move(merged));
  if (c.integer("schema_version", 1) != kSchemaVersion)
    Config::fail("schema_version", "unsupported (expected " + std::to_string(kSchemaVersion) + ")");
  return c;
}

Potential load_potential(const Config& c) {
  ParamMap params;
  const json& p = c.at("potential.params");
  if (!p.is_object()) Config::fail("potential.params", "must be an object");
  for (const auto& [k, v] : p.items()) {
    if (!v.is_number()) Config::fail("potential.params." + k, "must be a number");
    params[k] = v.get<double>();
  }
  try {
    return builtin(c.text("potential.family"), params);
  } catch (const ValidationError& e) {
    throw ValidationError(std::string("config key 'potential': ") + e.what());
  }
}

BarrierData load_barrier(const Config& c, const Potential& V) {
  std::vector<double> guess(static_cast<std::size_t>(V.dimension()), 0.0);
  if (c.has("potential.guess")) {
    guess = c.numbers("potential.guess");
    if (static_cast<int>(guess.size()) != V.dimension())
      Config::fail("potential.guess", "length must equal the potential dimension");
  }
  try {
    return find_barrier(V, guess);
  } catch (const ValidationError& e) {
    throw ValidationError(std::string("config key 'potential': ") + e.what());
  }
}

SpectralConfig load_spectral(const Config& c, int dimension) {
  SpectralConfig s;
  s.grid.dimension = dimension;
  s.grid.points = static_cast<int>(c.integer("grid.points", 1));
  s.grid.half_width = c.positive("grid.half_width");
  s.assemble.fd_order = static_cast<int>(c.integer("grid.fd_order", 2));
  if (s.assemble.fd_order != 2 && s.assemble.fd_order != 4) Config::fail("grid.fd_order", "must be 2 or 4");
  s.assemble.min_points = static_cast<int>(c.integer("grid.min_points", 1));
  if (s.grid.points < s.assemble.min_points)
    Config::fail("grid.points", "grid too coarse (below grid.min_points)");
  const double unknowns = std::pow(static_cast<double>(s.grid.points), dimension);
  if (unknowns > c.positive("grid.max_unknowns")) Config::fail("grid.points", "too many unknowns for this dimension");
  try {
    s.mode = distortion_mode_from_string(c.text("distortion.mode"));
  } catch (const ValidationError&) {
    Config::fail("distortion.mode", "must be global_rotation or exterior_scaling");
  }
  s.inner_radius = c.number("distortion.inner_radius");
  s.outer_radius = c.number("distortion.outer_radius");
  const std::string policy = c.text("distortion.theta_policy");
  if (policy == "paper") {
    s.theta.kind = ThetaPolicy::Kind::Paper;
  } else if (policy == "fixed") {
    s.theta.kind = ThetaPolicy::Kind::Fixed;
    s.theta.value = c.positive("distortion.theta");
  } else {
    Config::fail("distortion.theta_policy", "must be paper or fixed");
  }
  s.stability.eta = c.positive("stability.eta");
  s.stability.refine_factor = c.positive("stability.refine_factor");
  if (!(s.stability.refine_factor > 1.0)) Config::fail("stability.refine_factor", "must exceed 1");
  s.stability.stab_tol = c.positive("stability.stab_tol");
  s.stability.imag_tol = c.positive("stability.imag_tol");
  s.stability.cluster_tol = c.positive("stability.cluster_tol");
  return s;
}

/// Throws unless theta and theta (1 + eta) are admissible at h.
void check_theta(const SpectralConfig& s, double h, const std::string& key) {
  const double t = s.theta.theta_for(h);
  if (!(t > 0.0) || !(t * (1.0 + s.stability.eta) < std::numbers::pi / 4))
    Config::fail(key, "theta policy gives theta = " + std::to_string(t) + " at h = " + std::to_string(h) +
                          ", need 0 < theta (1 + eta) < pi/4");
}

double load_h(const Config& c, const std::string& key) {
  const double h = c.positive(key);
  if (!(h < 1.0)) Config::fail(key, "must lie in (0, 1)");
  return h;
}

std::vector<double> load_h_list(const Config& c, const std::string& key) {
  const std::vector<double> hs = c.numbers(key);
  if (hs.empty()) Config::fail(key, "must not be empty");
  for (std::size_t i = 0; i < hs.size(); ++i) {
    if (!(hs[i] > 0.0) || !(hs[i] < 1.0)) Config::fail(key, "every h must lie in (0, 1)");
    if (i > 0 && !(hs[i] < hs[i - 1])) Config::fail(key, "must be strictly decreasing");
  }
  return hs;
}

json cjson(Complex z) { return json{{"re", z.real()}, {"im", z.imag()}}; }

json vjson(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

json mjson(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json r = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) r.push_back(m(i, j));
    rows.push_back(r);
  }
  return rows;
}

std::string timestamp() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string num(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

class Csv {
 public:
  explicit Csv(std::vector<std::string> header) : header_(std::move(header)) {}
  void row(std::vector<std::string> cells) { rows_.push_back(std::move(cells)); }
  void write(const fs::path& path) const {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write '" + path.string() + "'");
    auto line = [&](const std::vector<std::string>& cells) {
      for (std::size_t i = 0; i < cells.size(); ++i) out << (i ? "," : "") << cells[i];
      out << "\n";
    };
    line(header_);
    for (const auto& r : rows_) line(r);
  }

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

struct Outcome {
  json result;
  std::vector<std::pair<std::string, Csv>> tables;
  std::string summary;
  bool check_passed = true;
  std::string check_note;
};

json barrier_json(const BarrierData& bd) {
  return json{{"critical_point", vjson(bd.critical_point)},
              {"E0", bd.energy},
              {"lambda", vjson(bd.lambda)},
              {"hessian", mjson(bd.hessian)},
              {"axes", mjson(bd.axes)},
              {"newton_iterations", bd.newton_iterations}};
}

json lattice_json(const PseudoResonanceLattice& lat) {
  json pts = json::array();
  for (const auto& p : lat.points) {
    pts.push_back(json{{"re", p.z.real()},
                       {"im", p.z.imag()},
                       {"level", p.level},
                       {"multiplicity", p.multiplicity},
                       {"witnesses", p.witnesses}});
  }
  return json{{"E0", lat.E0}, {"lambda", lat.lambda}, {"h", lat.h}, {"C", lat.C},
              {"shift", cjson(lat.shift)}, {"points", pts}};
}

Csv lattice_csv(const PseudoResonanceLattice& lat) {
  Csv t({"re", "im", "level", "multiplicity", "witnesses"});
  for (const auto& p : lat.points) {
    std::string w;
    for (std::size_t k = 0; k < p.witnesses.size(); ++k) {
      if (k) w += "|";
      for (std::size_t j = 0; j < p.witnesses[k].size(); ++j) w += (j ? ";" : "") + std::to_string(p.witnesses[k][j]);
    }
    t.row({num(p.z.real()), num(p.z.imag()), num(p.level), std::to_string(p.multiplicity), w});
  }
  return t;
}

json resonance_set_json(const ResonanceSet& rs) {
  json list = json::array();
  for (const auto& r : rs.resonances) {
    list.push_back(json{{"re", r.z.real()},
                        {"im", r.z.imag()},
                        {"stab", r.theta_shift},
                        {"grid_stab", r.grid_shift},
                        {"cluster", r.cluster}});
  }
  json rejected = json::array();
  for (const auto& z : rs.rejected) rejected.push_back(cjson(z));
  return json{{"h", rs.h},
              {"theta", rs.theta},
              {"window", {{"E0", rs.E0}, {"C", rs.C}}},
              {"resonances", list},
              {"rejected", rejected},
              {"window_eigenvalues", rs.base_count}};
}

json match_json(const MatchReport& m) {
  json pairs = json::array();
  for (const auto& p : m.pairs) pairs.push_back(json{{"z", cjson(p.z)}, {"w", cjson(p.w)}, {"distance", p.distance}});
  json ur = json::array(), ul = json::array();
  for (const auto& z : m.unmatched_resonances) ur.push_back(cjson(z));
  for (const auto& z : m.unmatched_lattice) ul.push_back(cjson(z));
  return json{{"d_rl", m.d_rl}, {"d_lr", m.d_lr}, {"d", m.d}, {"pairs", pairs},
              {"unmatched_resonances", ur}, {"unmatched_lattice", ul}};
}

double window_energy(const Config& c, const Potential& V, std::optional<BarrierData>& bd) {
  if (c.has("window.E0")) return c.number("window.E0");
  bd = load_barrier(c, V);
  return bd->energy;
}

// ---------------------------------------------------------------- commands

Outcome cmd_lattice(const Config& c) {
  const double h = load_h(c, "lattice.h");
  const double C = c.positive("window.C");
  std::vector<double> lambda;
  double E0 = 0.0;
  json barrier = nullptr;
  if (c.has("lattice.lambda")) {
    lambda = c.numbers("lattice.lambda");
    if (lambda.empty() || lambda.size() > 2) Config::fail("lattice.lambda", "must have 1 or 2 entries");
    for (double l : lambda)
      if (!(l > 0.0)) Config::fail("lattice.lambda", "entries must be positive");
    E0 = c.has("lattice.E0") ? c.number("lattice.E0") : 0.0;
  } else {
    const Potential V = load_potential(c);
    const BarrierData bd = load_barrier(c, V);
    lambda.assign(bd.lambda.data(), bd.lambda.data() + bd.lambda.size());
    E0 = c.has("lattice.E0") ? c.number("lattice.E0") : bd.energy;
    barrier = barrier_json(bd);
  }
  const Complex shift = c.complex("lattice.shift");
  const PseudoResonanceLattice lat = pseudo_resonances(E0, lambda, h, C, shift);
  const MuSequence mu = mu_sequence(lambda, static_cast<int>(c.integer("lattice.mu_count", 1)));

  Outcome o;
  o.result = lattice_json(lat);
  o.result["barrier"] = barrier;
  o.result["mu"] = json{{"values", mu.values}, {"counts", mu.counts}};
  o.tables.emplace_back("lattice.csv", lattice_csv(lat));
  std::ostringstream s;
  s << "pseudo-resonances in B(" << E0 + 0.0 << ", " << C << " h), h = " << h << ": " << lat.points.size() << " points\n";
  s << "  level      re            im            mult\n";
  for (const auto& p : lat.points)
    s << "  " << std::setw(9) << p.level << "  " << std::setw(12) << p.z.real() << "  " << std::setw(12) << p.z.imag()
      << "  " << p.multiplicity << "\n";
  o.summary = s.str();
  o.check_passed = !lat.points.empty();
  o.check_note = "lattice window non-empty";
  return o;
}

Outcome cmd_classical(const Config& c, int jobs) {
  const Potential V = load_potential(c);
  const BarrierData bd = load_barrier(c, V);
  const Linearization lin = linearize(bd);
  const int K = static_cast<int>(c.integer("classical.eikonal_order", 2));
  const TaylorPhase plus = eikonal_taylor(V, bd, 1, K);

  TrappedOptions to;
  to.dt = c.positive("classical.dt");
  to.r_min_fraction = c.number("classical.r_min_fraction");
  to.box_factor = c.positive("classical.box_factor");
  to.center = bd.critical_point;
  to.jobs = jobs;
  const TrappedReport tr = trapped_diagnostic(V, bd.energy, c.positive("classical.shell_radius"),
                                              c.positive("classical.T_max"),
                                              static_cast<int>(c.integer("classical.samples", 0)),
                                              c.seed("classical.seed"), to);

  Outcome o;
  json eik = json::array();
  Csv et({"alpha", "coefficient"});
  for_each_multi_index(bd.dimension(), K, [&](const MultiIndex& a) {
    const double v = plus.coefficient(a);
    if (v == 0.0) return;
    eik.push_back(json{{"alpha", a}, {"coefficient", v}});
    std::string key;
    for (std::size_t j = 0; j < a.size(); ++j) key += (j ? ";" : "") + std::to_string(a[j]);
    et.row({key, num(v)});
  });
  json stable = json::array();
  for (int j = 0; j < bd.dimension(); ++j) stable.push_back(mjson(lin.projection(-bd.lambda(j))));
  o.result = json{{"barrier", barrier_json(bd)},
                  {"linearization", {{"F", mjson(lin.F)}, {"eigenvalues", vjson(lin.eigenvalues)},
                                     {"stable_projections", stable}}},
                  {"eikonal_plus", eik},
                  {"trapped", {{"requested", tr.requested},
                               {"evaluated", tr.evaluated},
                               {"rejected", tr.rejected},
                               {"trapped", tr.trapped},
                               {"trapped_fraction", tr.trapped_fraction ? json(*tr.trapped_fraction) : json(nullptr)},
                               {"min_escape_forward", std::isfinite(tr.min_escape_forward) ? json(tr.min_escape_forward) : json(nullptr)},
                               {"min_escape_backward", std::isfinite(tr.min_escape_backward) ? json(tr.min_escape_backward) : json(nullptr)},
                               {"max_escape_time", tr.max_escape_time},
                               {"non_trapping", tr.non_trapping()}}}};
  if (!V.caveat().empty()) o.result["caveat"] = V.caveat();
  o.tables.emplace_back("eikonal.csv", std::move(et));
  if (c.has("classical.trajectory.x0")) {
    const std::vector<double> x0 = c.numbers("classical.trajectory.x0");
    const std::vector<double> xi0 =
        c.has("classical.trajectory.xi0") ? c.numbers("classical.trajectory.xi0") : std::vector<double>(x0.size(), 0.0);
    if (static_cast<int>(x0.size()) != V.dimension()) Config::fail("classical.trajectory.x0", "wrong length");
    if (xi0.size() != x0.size()) Config::fail("classical.trajectory.xi0", "wrong length");
    FlowOptions fo;
    fo.record_stride = static_cast<int>(c.integer("classical.trajectory.record_stride", 1));
    fo.box_radius = to.box_factor * c.positive("classical.shell_radius");
    fo.box_center = bd.critical_point;
    const Trajectory tj = flow(V, Eigen::Map<const Eigen::VectorXd>(x0.data(), V.dimension()),
                               Eigen::Map<const Eigen::VectorXd>(xi0.data(), V.dimension()),
                               c.number("classical.trajectory.T"), to.dt, fo);
    std::vector<std::string> head{"t"};
    for (int j = 1; j <= V.dimension(); ++j) head.push_back(V.dimension() == 1 ? "x" : "x" + std::to_string(j));
    for (int j = 1; j <= V.dimension(); ++j) head.push_back(V.dimension() == 1 ? "xi" : "xi" + std::to_string(j));
    head.push_back("energy");
    Csv tt(head);
    for (std::size_t k = 0; k < tj.t.size(); ++k) {
      std::vector<std::string> r{num(tj.t[k])};
      for (int j = 0; j < V.dimension(); ++j) r.push_back(num(tj.x[k](j)));
      for (int j = 0; j < V.dimension(); ++j) r.push_back(num(tj.xi[k](j)));
      r.push_back(num(tj.energy[k]));
      tt.row(std::move(r));
    }
    o.result["trajectory"] = json{{"samples", tj.t.size()},
                                  {"max_energy_drift", tj.max_energy_drift},
                                  {"escaped", tj.escaped},
                                  {"escape_time", tj.escaped ? json(tj.escape_time) : json(nullptr)}};
    o.tables.emplace_back("trajectory.csv", std::move(tt));
  }
  std::ostringstream s;
  s << "barrier of " << V.name() << ": x* = " << bd.critical_point.transpose() << ", E0 = " << bd.energy
    << ", lambda = " << bd.lambda.transpose() << "\n";
  s << "trapped diagnostic: " << tr.trapped << " trapped of " << tr.evaluated << " evaluated (" << tr.rejected
    << " draws rejected)\n";
  o.summary = s.str();
  o.check_passed = tr.non_trapping();
  o.check_note = "no trapped sample";
  return o;
}

Outcome cmd_resonances(const Config& c, const fs::path& dir) {
  const Potential V = load_potential(c);
  std::optional<BarrierData> bd;
  const double E0 = window_energy(c, V, bd);
  const double h = load_h(c, "resonances.h");
  const double C = c.positive("window.C");
  const SpectralConfig sc = load_spectral(c, V.dimension());
  check_theta(sc, h, "distortion");

  ResonanceSet rs;
  try {
    rs = resonances(V, E0, h, C, sc);
  } catch (const NumericalError& e) {
    throw NumericalError("h = " + num(h) + ": " + e.what());
  }
  if (c.flag("resonances.dump_matrix")) {
    const DistortedOperator op = assemble(V, h, sc.distortion_for(h), sc.grid, sc.assemble);
    write_matrix_market(op, (dir / "operator.mtx").string());
  }

  Outcome o;
  o.result = resonance_set_json(rs);
  Csv t({"re", "im", "theta_shift", "grid_shift", "cluster"});
  for (const auto& r : rs.resonances)
    t.row({num(r.z.real()), num(r.z.imag()), num(r.theta_shift), num(r.grid_shift), std::to_string(r.cluster)});
  o.tables.emplace_back("resonances.csv", std::move(t));
  std::ostringstream s;
  s << "resonances of " << V.name() << " in B(" << E0 + 0.0 << ", " << C << " h), h = " << h << ", theta = " << rs.theta
    << ": " << rs.resonances.size() << " kept, " << rs.rejected.size() << " rejected\n";
  for (const auto& r : rs.resonances)
    s << "  " << std::setprecision(10) << r.z.real() << (r.z.imag() < 0 ? " - " : " + ") << std::abs(r.z.imag())
      << "i   stab " << std::setprecision(3) << r.theta_shift / h << " h  grid " << r.grid_shift / h << " h\n";
  if (bd) {
    const PseudoResonanceLattice lat = pseudo_resonances(*bd, h, C);
    const MatchReport m = match(rs.values(), lat);
    o.result["lattice"] = lattice_json(lat);
    o.result["match"] = match_json(m);
    o.tables.emplace_back("resonances_lattice.csv", lattice_csv(lat));
    s << "distance to the lattice: d = " << m.d << " (d/h = " << m.d / h << ")\n";
    o.check_passed = m.unmatched_lattice.empty() && m.unmatched_resonances.empty() && !rs.resonances.empty();
    o.check_note = "every resonance and lattice point matched within h/2";
  } else {
    o.check_passed = !rs.resonances.empty();
    o.check_note = "resonance set non-empty";
  }
  o.summary = s.str();
  return o;
}

Outcome cmd_sweep(const Config& c, int jobs) {
  const Potential V = load_potential(c);
  const BarrierData bd = load_barrier(c, V);
  const double C = c.positive("window.C");
  const std::vector<double> hs = load_h_list(c, "h_list");
  if (hs.size() < 3) Config::fail("h_list", "a sweep needs at least 3 values");
  const SpectralConfig sc = load_spectral(c, V.dimension());
  for (double h : hs) check_theta(sc, h, "distortion");
  const SweepResult sr = h_sweep(V, bd, C, hs, sc, jobs);

  Outcome o;
  json entries = json::array();
  Csv t({"h", "theta", "d", "d_over_h", "resonance_count", "lattice_count", "flagged"});
  Csv pts({"h", "kind", "re", "im"});
  for (const auto& e : sr.entries) {
    entries.push_back(json{{"h", e.h},
                           {"theta", e.theta},
                           {"d", e.d},
                           {"d_over_h", e.d_over_h},
                           {"resonance_count", e.resonance_count},
                           {"lattice_count", e.lattice_count},
                           {"flagged", e.flagged},
                           {"match", match_json(e.report)},
                           {"resonances", resonance_set_json(e.resonances)}});
    t.row({num(e.h), num(e.theta), num(e.d), num(e.d_over_h), std::to_string(e.resonance_count),
           std::to_string(e.lattice_count), e.flagged ? "1" : "0"});
    for (const auto& r : e.resonances.resonances) pts.row({num(e.h), "resonance", num(r.z.real()), num(r.z.imag())});
    for (const auto& w : pseudo_resonances(bd, e.h, C).points)
      pts.row({num(e.h), "lattice", num(w.z.real()), num(w.z.imag())});
  }
  o.result = json{{"potential", sr.potential},
                  {"C", C},
                  {"barrier", barrier_json(bd)},
                  {"entries", entries},
                  {"q", std::isfinite(sr.fit.slope) ? json(sr.fit.slope) : json(nullptr)},
                  {"fit_residual", sr.fit.residual},
                  {"exact_family", sr.exact_family},
                  {"ratio_strictly_decreasing", sr.ratio_strictly_decreasing()},
                  {"max_successive_ratio", sr.max_successive_ratio()},
                  {"warnings", sr.warnings}};
  o.tables.emplace_back("sweep.csv", std::move(t));
  o.tables.emplace_back("sweep_points.csv", std::move(pts));
  std::ostringstream s;
  s << "h-sweep of " << sr.potential << ", C = " << C << "\n";
  s << "         h      theta            d          d/h  #res  #lat\n";
  for (const auto& e : sr.entries)
    s << std::setw(10) << e.h << " " << std::setw(10) << e.theta << " " << std::setw(12) << e.d << " " << std::setw(12)
      << e.d_over_h << " " << std::setw(5) << e.resonance_count << " " << std::setw(5) << e.lattice_count
      << (e.flagged ? "  flagged" : "") << "\n";
  s << "fitted q = " << sr.fit.slope << " (rms log residual " << sr.fit.residual << ")\n";
  for (const auto& w : sr.warnings) s << "warning: " << w << "\n";
  o.summary = s.str();
  o.check_passed = sr.ratio_strictly_decreasing();
  o.check_note = "d(h)/h strictly decreasing";
  return o;
}

Outcome cmd_resolvent(const Config& c, int jobs) {
  const Potential V = load_potential(c);
  const BarrierData bd = load_barrier(c, V);
  const double h = load_h(c, "resolvent.h");
  const double C = c.positive("window.C");
  const SpectralConfig sc = load_spectral(c, V.dimension());
  check_theta(sc, h, "distortion");
  LineSpec line;
  line.samples = static_cast<int>(c.integer("resolvent.samples", 3));
  if (c.has("resolvent.start")) line.start = c.complex("resolvent.start");
  if (c.has("resolvent.end")) line.end = c.complex("resolvent.end");
  ScanOptions so;
  so.cutoff_radius = c.positive("resolvent.cutoff_radius");
  so.prominence = c.positive("resolvent.prominence");
  so.probe.seed = c.seed("resolvent.seed");
  so.jobs = jobs;
  const ResolventProfile p = resolvent_scan(V, bd, h, C, line, sc, so);

  Outcome o;
  json pts = json::array(), peaks = json::array(), mids = json::array();
  Csv t({"re", "im", "norm", "at_resonance", "iterations"});
  for (const auto& q : p.points) {
    const json nv = std::isfinite(q.norm) ? json(q.norm) : json(nullptr);
    pts.push_back(json{{"z", cjson(q.z)}, {"norm", nv}, {"at_resonance", q.at_resonance}, {"iterations", q.iterations}});
    t.row({num(q.z.real()), num(q.z.imag()), num(q.norm), q.at_resonance ? "1" : "0", std::to_string(q.iterations)});
  }
  Csv pt({"re", "im", "norm", "saturated", "midpoint_ratio"});
  double min_ratio = std::numeric_limits<double>::infinity();
  for (const auto& k : p.peaks) {
    peaks.push_back(json{{"z", cjson(k.z)},
                         {"norm", std::isfinite(k.norm) ? json(k.norm) : json(nullptr)},
                         {"saturated", k.saturated},
                         {"midpoint_ratio", std::isfinite(k.midpoint_ratio) ? json(k.midpoint_ratio) : json(nullptr)}});
    pt.row({num(k.z.real()), num(k.z.imag()), num(k.norm), k.saturated ? "1" : "0", num(k.midpoint_ratio)});
    min_ratio = std::min(min_ratio, std::isnan(k.midpoint_ratio) ? 0.0 : k.midpoint_ratio);
  }
  for (const auto& m : p.midpoints) mids.push_back(json{{"z", cjson(m.z)}, {"norm", m.norm}});
  o.result = json{{"h", p.h}, {"theta", p.theta}, {"window", {{"E0", p.E0}, {"C", p.C}}},
                  {"cutoff_radius", so.cutoff_radius}, {"points", pts}, {"peaks", peaks}, {"midpoints", mids},
                  {"ordinate_distance", {{"d_peaks_lattice", p.ordinate_distance.d_ab},
                                         {"d_lattice_peaks", p.ordinate_distance.d_ba},
                                         {"d", p.ordinate_distance.d}}}};
  o.tables.emplace_back("resolvent.csv", std::move(t));
  o.tables.emplace_back("resolvent_peaks.csv", std::move(pt));
  std::ostringstream s;
  s << "resolvent scan of " << V.name() << ", h = " << h << ", theta = " << p.theta << ", " << p.points.size()
    << " samples\n";
  for (const auto& k : p.peaks)
    s << "  peak at Im(z - E0) = " << k.z.imag() / h << " h, norm " << k.norm << ", peak/midpoint " << k.midpoint_ratio
      << "\n";
  for (const auto& m : p.midpoints) s << "  midpoint Im(z - E0) = " << m.z.imag() / h << " h, norm " << m.norm << "\n";
  s << "peak ordinates vs lattice: d = " << p.ordinate_distance.d / h << " h\n";
  o.summary = s.str();
  o.check_passed = !p.peaks.empty() && p.ordinate_distance.d <= 0.1 * h && min_ratio >= 100.0;
  o.check_note = "peaks within 0.1 h of the lattice ordinates with peak/midpoint >= 100";
  return o;
}

Outcome cmd_state(const Config& c, int jobs) {
  const Potential V = load_potential(c);
  if (V.dimension() != 1) Config::fail("potential", "the state pipeline is one-dimensional");
  const BarrierData bd = load_barrier(c, V);
  const std::vector<double> hs = load_h_list(c, "state.h_list");
  const SpectralConfig sc = load_spectral(c, 1);
  for (double h : hs) check_theta(sc, h, "distortion");
  const int alpha = static_cast<int>(c.integer("state.alpha", 0));
  const int K = static_cast<int>(c.integer("state.phase_order", 2));
  const int m_max = static_cast<int>(c.integer("state.m_max", 1));
  SymbolOptions so;
  so.radius = c.positive("state.radius");
  const std::string mode = c.text("state.unrotation");
  if (mode == "exact") so.mode = Unrotation::Exact;
  else if (mode == "small_theta") so.mode = Unrotation::SmallTheta;
  else Config::fail("state.unrotation", "must be exact or small_theta");

  const TaylorPhase phase = eikonal_taylor(V, bd, 1, K);
  const TaylorPhase phase_low = eikonal_taylor(V, bd, 1, std::max(2, K - 2));

  struct Row {
    double h;
    Complex z, zl;
    double theta, res, res_lattice, coarse, raw_max;
    DecayTable decay, decay_low;
    WKBState state;
  };
  std::vector<Row> rows(hs.size());
  parallel_for(hs.size(), jobs, [&](std::size_t i) {
    const double h = hs[i];
    try {
      const DistortedOperator op = assemble(V, h, sc.distortion_for(h), sc.grid, sc.assemble);
      const Complex zl = pseudo_resonances(bd, h, 1.0).value({alpha});
      const ResonantVector rv = resonant_vector(op, zl);
      Row& r = rows[i];
      r.h = h;
      r.z = rv.eigenvalue;
      r.zl = zl;
      r.theta = op.distortion.theta;
      r.state = extract_symbol(op, rv.u, phase, rv.eigenvalue, so);
      TransportOptions to;
      to.check_coarse = false;
      const TransportReport tz = transport_residual(r.state, rv.eigenvalue, bd.energy, h, to);
      const TransportReport tl = transport_residual(r.state, zl, bd.energy, h, to);
      r.res = tz.residual;
      r.coarse = tz.coarse_residual;
      r.res_lattice = tl.residual;
      r.raw_max = r.state.raw_max;
      r.decay = annihilation_decay(op, rv.u, phase, m_max, so.radius);
      r.decay_low = annihilation_decay(op, rv.u, phase_low, m_max, so.radius);
    } catch (const NumericalError& e) {
      throw NumericalError("h = " + num(h) + ": " + e.what());
    }
  });

  Outcome o;
  json list = json::array();
  Csv decay({"m", "h", "norm"});
  std::vector<double> hv, a1;
  for (const auto& r : rows) {
    double sens = 0.0;
    for (std::size_t m = 1; m < r.decay.norms.size(); ++m)
      sens = std::max(sens, std::abs(r.decay.norms[m] - r.decay_low.norms[m]) / r.decay.norms[m]);
    list.push_back(json{{"h", r.h},
                        {"theta", r.theta},
                        {"z", cjson(r.z)},
                        {"lattice_point", cjson(r.zl)},
                        {"transport_residual", r.res},
                        {"transport_residual_coarse", r.coarse},
                        {"transport_residual_lattice", r.res_lattice},
                        {"symbol_raw_max", r.raw_max},
                        {"unrotation", mode},
                        {"unrotation_error", r.state.unrotation_error},
                        {"decay", r.decay.norms},
                        {"decay_phase_order_minus_2", r.decay_low.norms},
                        {"decay_sensitivity", sens}});
    for (std::size_t m = 0; m < r.decay.norms.size(); ++m)
      decay.row({std::to_string(m), num(r.h), num(r.decay.norms[m])});
    hv.push_back(r.h);
    if (r.decay.norms.size() > 1) a1.push_back(r.decay.norms[1]);
  }
  const LineFit slope = hv.size() >= 2 && a1.size() == hv.size() ? fit_loglog(hv, a1) : LineFit{};
  Csv sym({"x", "re_u", "im_u", "re_a", "im_a"});
  const WKBState& st = rows.front().state;
  for (std::size_t i = 0; i < st.size(); ++i)
    if (st.inside(i))
      sym.row({num(st.x[i]), num(st.u[i].real()), num(st.u[i].imag()), num(st.a[i].real()), num(st.a[i].imag())});
  o.result = json{{"alpha", alpha}, {"phase_order", K}, {"radius", so.radius}, {"states", list},
                  {"decay_slope", hv.size() >= 2 ? json(slope.slope) : json(nullptr)}};
  o.tables.emplace_back("state_symbol.csv", std::move(sym));
  o.tables.emplace_back("state_decay.csv", std::move(decay));

  std::ostringstream s;
  s << "resonant state alpha = " << alpha << " of " << V.name() << " (|x - x*| <= " << so.radius << ")\n";
  s << "         h                 z             R(z)      R(lattice)     |Au|/|u|\n";
  for (const auto& r : rows)
    s << std::setw(10) << r.h << "  " << std::setw(10) << r.z.real() << std::showpos << std::setw(12) << r.z.imag()
      << "i" << std::noshowpos << "  " << std::setw(12) << r.res << "  " << std::setw(12) << r.res_lattice << "  "
      << std::setw(12) << (r.decay.norms.size() > 1 ? r.decay.norms[1] : 0.0) << "\n";
  if (hv.size() >= 2) s << "slope of log |Au|/|u| vs log h: " << slope.slope << "\n";
  o.summary = s.str();
  o.check_passed = true;
  for (const auto& r : rows)
    o.check_passed = o.check_passed && r.decay.norms.size() > 1 && r.decay.norms[1] <= 10.0 * r.h;
  o.check_note = "|Au|/|u| <= 10 h for every h";
  return o;
}

Outcome cmd_expand(const Config& c) {
  const Potential V = load_potential(c);
  const BarrierData bd = load_barrier(c, V);
  MultiIndex alpha0(static_cast<std::size_t>(bd.dimension()), 0);
  if (c.has("expand.alpha0")) {
    const json& a = c.at("expand.alpha0");
    if (!a.is_array() || static_cast<int>(a.size()) != bd.dimension())
      Config::fail("expand.alpha0", "must list one non-negative integer per dimension");
    for (std::size_t j = 0; j < a.size(); ++j) {
      if (!a[j].is_number_integer() || a[j].get<int>() < 0)
        Config::fail("expand.alpha0", "must list one non-negative integer per dimension");
      alpha0[j] = a[j].get<int>();
    }
  }
  const int K = static_cast<int>(c.integer("expand.K", 1));
  const ExpansionResult ex = taylor_recurrence(V, bd, alpha0, K);

  Outcome o;
  json E = json::array(), sig = json::array(), G = json::array();
  Csv et({"k", "re", "im"});
  for (std::size_t k = 0; k < ex.E.size(); ++k) {
    E.push_back(cjson(ex.E[k]));
    et.row({std::to_string(k), num(ex.E[k].real()), num(ex.E[k].imag())});
  }
  for (const auto& s : ex.sigma) sig.push_back(cjson(s));
  Csv gt({"k", "n", "re", "im"});
  for (std::size_t k = 0; k < ex.G.size(); ++k) {
    json gk = json::array();
    for (std::size_t n = 0; n < ex.G[k].size(); ++n) {
      gk.push_back(cjson(ex.G[k][n]));
      gt.row({std::to_string(k), std::to_string(n), num(ex.G[k][n].real()), num(ex.G[k][n].imag())});
    }
    G.push_back(gk);
  }
  double level = 0.0;
  for (int j = 0; j < bd.dimension(); ++j) level += bd.lambda(j) * (alpha0[static_cast<std::size_t>(j)] + 0.5);
  const double e1_error = std::abs(ex.E[1] - Complex(0.0, -level));
  o.result = json{{"alpha0", alpha0}, {"K", K}, {"barrier", barrier_json(bd)}, {"sigma0", cjson(ex.sigma0)},
                  {"G", G}, {"sigma", sig}, {"E", E}, {"E1_error", e1_error}};
  o.tables.emplace_back("expand.csv", std::move(et));
  o.tables.emplace_back("expand_G.csv", std::move(gt));
  std::ostringstream s;
  s << "z_inf(h) = sum_k E_k h^k for " << V.name() << ", alpha0 = (";
  for (std::size_t j = 0; j < alpha0.size(); ++j) s << (j ? "," : "") << alpha0[j];
  s << ")\n";
  for (std::size_t k = 0; k < ex.E.size(); ++k)
    s << "  E" << k << " = " << std::setprecision(12) << ex.E[k].real() << (ex.E[k].imag() < 0 ? " - " : " + ")
      << std::abs(ex.E[k].imag()) << "i\n";
  o.summary = s.str();
  o.check_passed = e1_error <= 1e-12;
  o.check_note = "E1 = -i sum lambda_j (alpha_j + 1/2)";
  return o;
}

void write_outputs(const fs::path& dir, const std::string& name, const Config& c, const Outcome& o) {
  fs::create_directories(dir);
  json doc = json{{"schema_version", kSchemaVersion},
                  {"artifact", name},
                  {"generated_at", timestamp()},
                  {"config", c.raw()},
                  {"result", o.result}};
  std::ofstream out(dir / (name + ".json"));
  if (!out) throw ValidationError("cannot write into output directory '" + dir.string() + "'");
  out << doc.dump(2) << "\n";
  for (const auto& [file, table] : o.tables) table.write(dir / file);
}

}  // namespace

std::string default_config() { return json::parse(kDefaults).dump(2); }

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Barrier-top resonance lab"};
  app.require_subcommand(1);
  struct Common {
    std::string config;
    std::vector<std::string> sets;
    bool check = false;
    std::string out;
    int jobs = -1;
  } common;
  const std::vector<std::pair<std::string, std::string>> names = {
      {"lattice", "pseudo-resonance lattice in B(E0, C h)"},
      {"classical", "barrier data, eikonal expansion and trapped-set diagnostic"},
      {"resonances", "theta-stable resonances of the distorted operator"},
      {"sweep", "lattice distance d(h) over the h list"},
      {"resolvent", "cutoff resolvent norms along a line"},
      {"state", "resonant state symbol, transport residual and annihilation decay"},
      {"expand", "Taylor recurrence for z_inf(h)"},
      {"defaults", "print the default configuration"}};
  for (const auto& [name, help] : names) {
    CLI::App* sub = app.add_subcommand(name, help);
    if (name == "defaults") continue;
    sub->add_option("--config", common.config, "JSON configuration file (or an emitted artifact)");
    sub->add_option("--set", common.sets, "override KEY=VALUE (dotted key, JSON value)")->take_all();
    sub->add_flag("--check", common.check, "exit 4 when the subcommand's acceptance check fails");
    sub->add_option("--out", common.out, "output directory (overrides output.dir)");
    sub->add_option("--jobs", common.jobs, "worker threads (0 = machine parallelism)");
  }

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  const std::string sub = app.get_subcommands().front()->get_name();
  if (sub == "defaults") {
    out << default_config() << "\n";
    return kExitOk;
  }
  try {
    const Config c = load_config(common.config, common.sets);
    const int jobs = resolve_jobs(common.jobs >= 0 ? common.jobs : static_cast<int>(c.integer("jobs", 0)));
    const fs::path dir = common.out.empty() ? fs::path(c.text("output.dir")) : fs::path(common.out);
    fs::create_directories(dir);
    Outcome o;
    if (sub == "lattice") o = cmd_lattice(c);
    else if (sub == "classical") o = cmd_classical(c, jobs);
    else if (sub == "resonances") o = cmd_resonances(c, dir);
    else if (sub == "sweep") o = cmd_sweep(c, jobs);
    else if (sub == "resolvent") o = cmd_resolvent(c, jobs);
    else if (sub == "state") o = cmd_state(c, jobs);
    else o = cmd_expand(c);
    write_outputs(dir, sub, c, o);
    out << o.summary;
    out << "artifacts written to " << dir.string() << "\n";
    if (common.check) {
      out << "check (" << o.check_note << "): " << (o.check_passed ? "pass" : "FAIL") << "\n";
      if (!o.check_passed) return kExitCheck;
    }
    return kExitOk;
  } catch (const ValidationError& e) {
    err << "validation error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const fs::filesystem_error& e) {
    err << "validation error: " << e.what() << "\n";
    return kExitValidation;
  }
}

}  // namespace resolab::cli
