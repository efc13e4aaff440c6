#include "stochep/experiments.hpp"

#include "stochep/algebra.hpp"
#include "stochep/errors.hpp"
#include "stochep/format.hpp"
#include "stochep/group_sde.hpp"
#include "stochep/reduced_dynamics.hpp"
#include "stochep/torus_fluid.hpp"
#include "stochep/variational.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <sstream>

namespace stochep {

using json = nlohmann::json;

namespace {

// ---------------------------------------------------------------------------
// Parameter parsing

enum class Bound { kAny, kPositive, kNonNegative };

void check_bound(const std::string& key, double v, Bound bound)
{
  if (!std::isfinite(v)) throw ConfigError(key + ": must be finite");
  if (bound == Bound::kPositive && !(v > 0.0)) throw ConfigError(key + ": must be positive");
  if (bound == Bound::kNonNegative && !(v >= 0.0)) throw ConfigError(key + ": must be non-negative");
}

double as_number(const std::string& key, const json& j)
{
  if (!j.is_number()) throw ConfigError(key + ": expected a number");
  return j.get<double>();
}

// Reads typed values out of a parameters object, remembering every key it was
// asked for and the value actually used.
class Params
{
 public:
  explicit Params(const json& given) : given_(given)
  {
    if (!given_.is_object()) throw ConfigError("parameters: expected an object");
  }

  double number(const std::string& key, double def, Bound bound)
  {
    double v = def;
    if (const json* j = find(key)) v = as_number(key, *j);
    check_bound(key, v, bound);
    out_[key] = v;
    return v;
  }

  std::optional<double> optional_number(const std::string& key, Bound bound)
  {
    const json* j = find(key);
    if (j == nullptr || j->is_null())
    {
      out_[key] = nullptr;
      return std::nullopt;
    }
    const double v = as_number(key, *j);
    check_bound(key, v, bound);
    out_[key] = v;
    return v;
  }

  std::uint64_t integer(const std::string& key, std::uint64_t def, std::uint64_t min = 0)
  {
    std::uint64_t v = def;
    if (const json* j = find(key))
    {
      if (j->is_number_unsigned())
        v = j->get<std::uint64_t>();
      else if (j->is_number_integer())
      {
        if (j->get<std::int64_t>() < 0) throw ConfigError(key + ": must be non-negative");
        v = static_cast<std::uint64_t>(j->get<std::int64_t>());
      }
      else
        throw ConfigError(key + ": expected a non-negative integer");
    }
    if (v < min) throw ConfigError(key + ": must be at least " + std::to_string(min));
    out_[key] = v;
    return v;
  }

  bool flag(const std::string& key, bool def)
  {
    bool v = def;
    if (const json* j = find(key))
    {
      if (!j->is_boolean()) throw ConfigError(key + ": expected true or false");
      v = j->get<bool>();
    }
    out_[key] = v;
    return v;
  }

  std::string choice(const std::string& key, const std::string& def, const std::vector<std::string>& allowed)
  {
    std::string v = def;
    if (const json* j = find(key))
    {
      if (!j->is_string()) throw ConfigError(key + ": expected a string");
      v = j->get<std::string>();
    }
    if (std::find(allowed.begin(), allowed.end(), v) == allowed.end())
    {
      std::string list;
      for (const auto& a : allowed) list += (list.empty() ? "" : "|") + a;
      throw ConfigError(key + ": expected one of " + list);
    }
    out_[key] = v;
    return v;
  }

  std::vector<double> numbers(const std::string& key, const std::vector<double>& def, Bound bound)
  {
    std::vector<double> v = def;
    if (const json* j = find(key)) v = read_numbers(key, *j);
    for (double x : v) check_bound(key, x, bound);
    out_[key] = v;
    return v;
  }

  std::optional<std::vector<double>> optional_numbers(const std::string& key, Bound bound)
  {
    const json* j = find(key);
    if (j == nullptr || j->is_null())
    {
      out_[key] = nullptr;
      return std::nullopt;
    }
    auto v = read_numbers(key, *j);
    for (double x : v) check_bound(key, x, bound);
    out_[key] = v;
    return v;
  }

  Eigen::Vector3d vec3(const std::string& key, const Eigen::Vector3d& def, Bound bound)
  {
    const auto v = numbers(key, {def[0], def[1], def[2]}, bound);
    if (v.size() != 3) throw ConfigError(key + ": expected 3 numbers");
    return {v[0], v[1], v[2]};
  }

  std::vector<Eigen::Vector3d> vec3_list(const std::string& key, const std::vector<Eigen::Vector3d>& def)
  {
    std::vector<Eigen::Vector3d> v = def;
    if (const json* j = find(key))
    {
      if (!j->is_array()) throw ConfigError(key + ": expected a list of 3-vectors");
      v.clear();
      for (const auto& item : *j)
      {
        const auto x = read_numbers(key, item);
        if (x.size() != 3) throw ConfigError(key + ": expected a list of 3-vectors");
        for (double c : x) check_bound(key, c, Bound::kAny);
        v.emplace_back(x[0], x[1], x[2]);
      }
    }
    json out = json::array();
    for (const auto& x : v) out.push_back({x[0], x[1], x[2]});
    out_[key] = out;
    return v;
  }

  std::vector<int> ints(const std::string& key, const std::vector<int>& def)
  {
    std::vector<int> v = def;
    if (const json* j = find(key))
    {
      if (!j->is_array()) throw ConfigError(key + ": expected a list of integers");
      v.clear();
      for (const auto& item : *j)
      {
        if (!item.is_number_integer()) throw ConfigError(key + ": expected a list of integers");
        v.push_back(item.get<int>());
      }
    }
    out_[key] = v;
    return v;
  }

  void finish() const
  {
    for (const auto& [key, value] : given_.items())
      if (!used_.contains(key)) throw ConfigError("parameters: unknown key '" + key + "'");
  }

  const json& resolved() const { return out_; }

 private:
  const json* find(const std::string& key)
  {
    used_.insert(key);
    const auto it = given_.find(key);
    return it == given_.end() ? nullptr : &*it;
  }

  static std::vector<double> read_numbers(const std::string& key, const json& j)
  {
    if (!j.is_array()) throw ConfigError(key + ": expected a list of numbers");
    std::vector<double> v;
    for (const auto& item : j) v.push_back(as_number(key, item));
    return v;
  }

  const json& given_;
  json out_ = json::object();
  std::set<std::string> used_;
};

// ---------------------------------------------------------------------------
// Shared pieces

struct RunContext
{
  const ExperimentConfig& config;
  AuditOptions faults;
  std::uint64_t seed = 0;

  json echo() const { return {{"experiment", config.experiment}, {"parameters", config.parameters}}; }

  std::string csv_preamble() const
  {
    return "# seed=" + std::to_string(seed) + "\n# config=" + echo().dump() + "\n";
  }
};

std::string dump(const json& j)
{
  return j.dump(2) + "\n";
}

Check at_most(std::string name, double value, double tolerance)
{
  return {std::move(name), std::isfinite(value) && value <= tolerance, value, tolerance};
}

Check at_least(std::string name, double value, double tolerance)
{
  return {std::move(name), value > tolerance, value, tolerance};
}

InvarianceSide parse_side(const std::string& s)
{
  return s == "right" ? InvarianceSide::kRight : InvarianceSide::kLeft;
}

GeometrySpec so3(const Eigen::Vector3d& inertia, const Eigen::Vector3d& connection, InvarianceSide side,
                 const AuditOptions& faults)
{
  GeometrySpec g = so3_geometry(inertia, connection, side);
  if (faults.flip_ad_sign) g.structure = -g.structure;
  return g;
}

struct So3Setup
{
  Eigen::Vector3d inertia;
  Eigen::Vector3d connection;
  double noise_scale = 1.0;
  InvarianceSide side = InvarianceSide::kLeft;

  GeometrySpec geometry(const AuditOptions& faults) const { return so3(inertia, connection, side, faults); }

  NoiseBasis noise() const
  {
    NoiseBasis h = so3_principal_noise(inertia);
    for (auto& v : h.vectors) v *= noise_scale;
    return h;
  }

  bool closed_form_applies() const
  {
    return connection == inertia && noise_scale == 1.0 && side == InvarianceSide::kLeft;
  }
};

void require_divides(double horizon, const char* horizon_key, double step, const char* step_key)
{
  const double steps = horizon / step;
  if (std::abs(steps - std::round(steps)) > 1e-9 * steps || std::round(steps) < 1.0)
    throw ConfigError(std::string(step_key) + ": must divide " + horizon_key);
}

So3Setup read_so3(Params& p)
{
  So3Setup s;
  s.inertia = p.vec3("inertia", {1.0, 2.0, 3.0}, Bound::kPositive);
  s.connection = p.vec3("connection_inertia", s.inertia, Bound::kPositive);
  s.noise_scale = p.number("noise_scale", 1.0, Bound::kNonNegative);
  s.side = parse_side(p.choice("side", "left", {"left", "right"}));
  return s;
}

Eigen::Vector3d to3(const AlgebraVector& v)
{
  return {v[0], v[1], v[2]};
}

double max_abs(const AlgebraVector& v)
{
  return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff();
}

// ---------------------------------------------------------------------------
// rigid-body

struct RigidBodyParams
{
  So3Setup so3;
  Eigen::Vector3d u0;
  double dt = 1e-3;
  double horizon = 1.0;
};

RigidBodyParams read_rigid_body(Params& p)
{
  RigidBodyParams r;
  r.so3 = read_so3(p);
  r.u0 = p.vec3("u0", {1.0, 1.0, 1.0}, Bound::kAny);
  r.dt = p.number("dt", 1e-3, Bound::kPositive);
  r.horizon = p.number("T", 1.0, Bound::kPositive);
  require_divides(r.horizon, "T", r.dt, "dt");
  return r;
}

ExperimentOutput rigid_body(Params& p, const RunContext& ctx)
{
  const auto r = read_rigid_body(p);
  p.finish();
  const GeometrySpec g = r.so3.geometry(ctx.faults);
  const NoiseBasis noise = r.so3.noise();
  const auto grid = uniform_grid(r.horizon, r.dt);
  const auto traj = integrate([&](double, const AlgebraVector& u) { return ep_rhs(u, noise, g); }, r.u0, grid);

  ExperimentOutput out;
  double worst = -std::numeric_limits<double>::infinity();
  const double e0 = kinetic_energy(traj.states.front(), g);
  for (std::size_t n = 0; n + 1 < traj.size(); ++n)
    worst = std::max(worst, kinetic_energy(traj.states[n + 1], g) - kinetic_energy(traj.states[n], g));
  out.checks.push_back(at_most("energy_monotone", worst, 1e-12 * std::max(1.0, e0)));

  if (r.so3.closed_form_applies())
  {
    const Eigen::Vector3d inertia = r.so3.inertia;
    const auto closed = integrate(
        [&](double, const AlgebraVector& u) -> AlgebraVector { return rigid_body_rhs(to3(u), inertia); }, r.u0,
        grid);
    double diff = 0.0;
    for (std::size_t n = 0; n < traj.size(); ++n) diff = std::max(diff, max_abs(traj.states[n] - closed.states[n]));
    out.checks.push_back(at_most("closed_form_agreement", diff, 1e-10));
  }

  std::ostringstream csv;
  csv << ctx.csv_preamble();
  write_trajectory_csv(csv, traj, g);
  out.artifacts.push_back({"trajectory.csv", csv.str()});
  return out;
}

// ---------------------------------------------------------------------------
// variational-check

struct VariationalParams
{
  So3Setup so3;
  Eigen::Vector3d u0;
  double dt = 1e-3;
  double eps = kDefaultGateauxStep;
};

struct DictionaryRun
{
  std::vector<VariationResult> results;
  double max_abs_dj = 0.0;
  double max_diff = 0.0;
};

DictionaryRun run_dictionary(const ReducedTrajectory& u, const NoiseBasis& noise, const GeometrySpec& g, double eps)
{
  DictionaryRun run;
  for (const auto& [id, curve] : variation_dictionary())
  {
    VariationResult r;
    r.v_id = id;
    r.dj_fd = gateaux_derivative(u, noise, g, curve, eps).richardson;
    r.dj_pairing = ep_pairing(u, noise, g, curve);
    r.diff = r.dj_fd - r.dj_pairing;
    run.max_abs_dj = std::max(run.max_abs_dj, std::abs(r.dj_fd));
    run.max_diff = std::max(run.max_diff, std::abs(r.diff));
    run.results.push_back(r);
  }
  return run;
}

VariationalParams read_variational(Params& p)
{
  VariationalParams v;
  v.so3 = read_so3(p);
  v.u0 = p.vec3("u0", {1.0, 1.0, 1.0}, Bound::kAny);
  v.dt = p.number("dt", 1e-3, Bound::kPositive);
  v.eps = p.number("eps", kDefaultGateauxStep, Bound::kPositive);
  if (v.eps > 0.1) throw ConfigError("eps: must be at most 0.1");
  return v;
}

ExperimentOutput variational_check(Params& p, const RunContext& ctx)
{
  const VariationalParams v = read_variational(p);
  p.finish();

  const GeometrySpec g = v.so3.geometry(ctx.faults);
  const NoiseBasis noise = v.so3.noise();
  const auto grid = uniform_grid(1.0, v.dt);
  if (grid.size() < 5) throw ConfigError("dt: need at least four steps on [0, 1]");
  const auto critical =
      integrate([&](double, const AlgebraVector& u) { return ep_rhs(u, noise, g); }, v.u0, grid);
  const AlgebraVector half_c = 0.5 * contraction(noise, g);
  const auto control = integrate(
      [&](double, const AlgebraVector& u) -> AlgebraVector {
        return g.side_sign() * ad_star(u - half_c, u, g);
      },
      v.u0, grid);

  const auto main = run_dictionary(critical, noise, g, v.eps);
  const auto ctrl = run_dictionary(control, noise, g, v.eps);

  ExperimentOutput out;
  out.checks.push_back(at_most("max_abs_dJ", main.max_abs_dj, 1e-6));
  out.checks.push_back(at_most("max_fd_pairing_diff", main.max_diff, 1e-6));
  out.checks.push_back(at_least("non_critical_control_max_abs_dJ", ctrl.max_abs_dj, 1e-3));
  out.checks.push_back(at_most("non_critical_control_fd_pairing_diff", ctrl.max_diff, 1e-6));

  json results = json::array();
  for (const auto& [source, run] : {std::pair{"euler_poincare", &main}, std::pair{"k_dropped", &ctrl}})
    for (const auto& r : run->results)
      results.push_back(
          {{"u_source", source}, {"v_id", r.v_id}, {"dJ_fd", r.dj_fd}, {"dJ_pairing", r.dj_pairing}, {"diff", r.diff}});
  out.artifacts.push_back({"variational.json", dump({{"schema_version", kSchemaVersion},
                                                      {"seed", ctx.seed},
                                                      {"config", ctx.echo()},
                                                      {"results", results}})});
  std::ostringstream csv;
  csv << ctx.csv_preamble();
  write_trajectory_csv(csv, critical, g);
  out.artifacts.push_back({"trajectory.csv", csv.str()});
  return out;
}

// ---------------------------------------------------------------------------
// sde-generator-check

std::vector<LinearFunctional> test_functionals()
{
  std::vector<LinearFunctional> fs{{"trace", Eigen::Matrix3d::Identity()}};
  for (int j = 0; j < 3; ++j)
    fs.push_back({"e" + std::to_string(j + 1), hat(Eigen::Vector3d::Unit(j)).transpose()});
  return fs;
}

json report_json(const GeneratorReport& r, const std::string& drift)
{
  return {{"f", r.function},     {"h", r.step},         {"n", r.samples},     {"estimate", r.estimate},
          {"analytic", r.analytic}, {"stderr", r.stderr_}, {"z", r.z},        {"drift", drift},
          {"sufficient", r.sufficient}};
}

struct GeneratorParams
{
  Eigen::Vector3d inertia;
  NoiseBasis noise;
  Eigen::Vector3d drift;
  InvarianceSide side = InvarianceSide::kLeft;
  double h = 1e-3;
  double horizon = 0.1;
  double record_dt = 1e-3;
  std::size_t n_samples = 0;
  unsigned threads = 0;
  double z_threshold = 3.0;
  double control_threshold = 5.0;
  bool write_paths = false;
};

GeneratorParams read_generator(Params& p)
{
  GeneratorParams r;
  r.inertia = p.vec3("inertia", {1.0, 2.0, 3.0}, Bound::kPositive);
  for (const auto& h : p.vec3_list("noise", {Eigen::Vector3d(1.0, 1.0, 0.0)})) r.noise.vectors.push_back(h);
  r.drift = p.vec3("drift", {0.3, -0.2, 0.5}, Bound::kAny);
  r.side = parse_side(p.choice("side", "left", {"left", "right"}));
  r.h = p.number("h", 1e-3, Bound::kPositive);
  r.horizon = p.number("T", 0.1, Bound::kPositive);
  r.record_dt = p.number("record_dt", 1e-3, Bound::kPositive);
  r.n_samples = p.integer("n_samples", 20000, 1);
  r.threads = static_cast<unsigned>(p.integer("threads", 0));
  r.z_threshold = p.number("z_threshold", 3.0, Bound::kPositive);
  r.control_threshold = p.number("control_threshold", 5.0, Bound::kPositive);
  r.write_paths = p.flag("write_paths", false);
  return r;
}

ExperimentOutput sde_generator_check(Params& p, const RunContext& ctx)
{
  const GeneratorParams r = read_generator(p);
  p.finish();
  const Eigen::Vector3d& inertia = r.inertia;
  const NoiseBasis& noise = r.noise;
  const double z_threshold = r.z_threshold;

  const GeometrySpec g = so3(inertia, inertia, r.side, ctx.faults);
  ReducedTrajectory drift;
  drift.times = uniform_grid(r.horizon, r.record_dt);
  drift.states.assign(drift.times.size(), r.drift);
  SimulationOptions options;
  options.threads = r.threads;
  const PathEnsemble ens = simulate(drift, noise, g, r.n_samples, ctx.seed, r.h, options);

  ExperimentOutput out;
  json reports = json::array();
  for (const auto& f : test_functionals())
  {
    const auto rep = weak_generator_check(ens, f, drift, noise, g);
    out.checks.push_back({"generator_z_" + f.name, rep.passes(z_threshold), rep.z, z_threshold});
    reports.push_back(report_json(rep, "full"));
  }
  if (contraction(noise, g).norm() > 0.0)
  {
    GeometrySpec flat = g;
    flat.christoffel = Tensor3(g.dim());
    double worst = 0.0;
    for (const auto& f : test_functionals())
    {
      const auto rep = weak_generator_check(ens, f, drift, noise, flat);
      worst = std::max(worst, std::abs(rep.z));
      reports.push_back(report_json(rep, "omits_contraction"));
    }
    out.checks.push_back(at_least("control_max_z", worst, r.control_threshold));
  }

  out.artifacts.push_back({"generator.json", dump({{"schema_version", kSchemaVersion},
                                                    {"seed", ctx.seed},
                                                    {"config", ctx.echo()},
                                                    {"reprojections", ens.reprojections},
                                                    {"reports", reports}})});

  std::ostringstream mean;
  mean << ctx.csv_preamble() << "t,m11,m12,m13,m21,m22,m23,m31,m32,m33\n";
  std::vector<double> column(ens.samples());
  for (std::size_t k = 0; k < ens.times.size(); ++k)
  {
    mean << fmt_double(ens.times[k]);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
      {
        for (std::size_t s = 0; s < ens.samples(); ++s) column[s] = ens.paths[s][k](i, j);
        mean << ',' << fmt_double(pairwise_sum(column) / static_cast<double>(ens.samples()));
      }
    mean << '\n';
  }
  out.artifacts.push_back({"mean_path.csv", mean.str()});
  if (r.write_paths)
  {
    std::ostringstream paths;
    paths << ctx.csv_preamble();
    write_paths_csv(paths, ens);
    out.artifacts.push_back({"paths.csv", paths.str()});
  }
  return out;
}

// ---------------------------------------------------------------------------
// algebra-audit

// Closed-form Levi-Civita table of <>^I on the left side:
// nabla_{E_a} E_b = 1/2 (1 + (I_b - I_a) / I_c) E_c for (a, b, c) cyclic,
// nabla_{E_b} E_a = 1/2 (-1 + (I_b - I_a) / I_c) E_c, and nabla_{E_a} E_a = 0.
double connection_table_error(const GeometrySpec& g, const Eigen::Vector3d& inertia)
{
  Tensor3 expected(3);
  for (int a = 0; a < 3; ++a)
  {
    const int b = (a + 1) % 3;
    const int c = (a + 2) % 3;
    const double s = (inertia[b] - inertia[a]) / inertia[c];
    expected(c, a, b) = 0.5 * (1.0 + s) * g.side_sign();
    expected(c, b, a) = 0.5 * (-1.0 + s) * g.side_sign();
  }
  double err = 0.0;
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t a = 0; a < 3; ++a)
      for (std::size_t b = 0; b < 3; ++b) err = std::max(err, std::abs(g.christoffel(c, a, b) - expected(c, a, b)));
  return err;
}

std::vector<Check> algebra_checks(const So3Setup& setup, std::size_t n_random, std::size_t n_oracle,
                                  std::uint64_t seed, const AuditOptions& faults)
{
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> moment(0.5, 3.0);
  std::uniform_real_distribution<double> coord(-2.0, 2.0);
  auto random_inertia = [&] { return Eigen::Vector3d(moment(rng), moment(rng), moment(rng)); };
  auto random_vector = [&] { return Eigen::Vector3d(coord(rng), coord(rng), coord(rng)); };

  std::vector<Check> checks;
  const GeometrySpec g = setup.geometry(faults);
  const NoiseBasis noise = setup.noise();
  checks.push_back(at_most("metric_compatibility", metric_compatibility_defect(g), 1e-12));
  checks.push_back(at_most("torsion_free", torsion_defect(g), 1e-12));
  checks.push_back(at_most("jacobi", jacobi_defect(g.structure), 1e-12));

  double table = 0.0;
  for (std::size_t n = 0; n < n_random; ++n)
  {
    const Eigen::Vector3d inertia = random_inertia();
    table = std::max(table, connection_table_error(so3(inertia, inertia, InvarianceSide::kLeft, faults), inertia));
  }
  checks.push_back(at_most("connection_table_random_I", table, 1e-12));

  double oracle = 0.0;
  for (std::size_t n = 0; n < n_oracle; ++n)
  {
    const Eigen::Vector3d inertia = random_inertia();
    const Eigen::Vector3d u = random_vector();
    const GeometrySpec gi = so3(inertia, inertia, InvarianceSide::kLeft, faults);
    oracle = std::max(oracle, max_abs(ep_rhs(u, so3_principal_noise(inertia), gi) - rigid_body_rhs(u, inertia)));
  }
  checks.push_back(at_most("ep_rhs_vs_closed_form", oracle, 1e-10));

  const Eigen::Vector3d ones = Eigen::Vector3d::Ones();
  const GeometrySpec round = so3(ones, ones, setup.side, faults);
  const NoiseBasis round_noise = so3_principal_noise(ones);
  const GeometrySpec bi_invariant = so3(setup.inertia, ones, setup.side, faults);
  double curv = 0.0;
  double lap = 0.0;
  double curv_configured = 0.0;
  double k_zero = 0.0;
  for (int n = 0; n < 20; ++n)
  {
    const Eigen::Vector3d u = random_vector();
    const AlgebraVector k = k_operator(u, round_noise, round);
    curv = std::max(curv, max_abs(k - k_from_curvature(u, round_noise, round)));
    lap = std::max(lap, max_abs(k - k_from_laplacian(u, round)));
    curv_configured = std::max(curv_configured, max_abs(k_operator(u, noise, g) - k_from_curvature(u, noise, g)));
    k_zero = std::max(k_zero, max_abs(k_operator(u, noise, bi_invariant)));
  }
  checks.push_back(at_most("k_vs_curvature_round", curv, 1e-12));
  checks.push_back(at_most("k_vs_laplacian_round", lap, 1e-12));
  if (setup.connection == setup.inertia)
    checks.push_back(at_most("k_vs_curvature_configured", curv_configured, 1e-12));
  checks.push_back(at_most("k_zero_bi_invariant_connection", k_zero, 1e-14));
  return checks;
}

struct AuditParams
{
  So3Setup setup;
  std::size_t n_random = 0;
  std::size_t n_oracle = 0;
};

AuditParams read_audit(Params& p)
{
  AuditParams a;
  a.setup = read_so3(p);
  a.n_random = p.integer("n_random", 100, 1);
  a.n_oracle = p.integer("n_oracle", 1000, 1);
  return a;
}

ExperimentOutput algebra_audit(Params& p, const RunContext& ctx)
{
  const AuditParams a = read_audit(p);
  p.finish();
  const So3Setup& setup = a.setup;

  ExperimentOutput out;
  out.checks = algebra_checks(setup, a.n_random, a.n_oracle, ctx.seed, ctx.faults);

  const GeometrySpec g = setup.geometry(ctx.faults);
  std::ostringstream csv;
  csv << ctx.csv_preamble() << "a,b,c,christoffel,structure\n";
  for (std::size_t a = 0; a < 3; ++a)
    for (std::size_t b = 0; b < 3; ++b)
      for (std::size_t c = 0; c < 3; ++c)
        csv << a + 1 << ',' << b + 1 << ',' << c + 1 << ',' << fmt_double(g.christoffel(c, a, b)) << ','
            << fmt_double(g.structure(c, a, b)) << '\n';
  out.artifacts.push_back({"connection.csv", csv.str()});
  return out;
}

// ---------------------------------------------------------------------------
// torus

torus::ModeSet read_modes(Params& p, int m)
{
  const double gamma = p.number("gamma", 3.0, Bound::kNonNegative);
  const auto lambda = p.optional_numbers("lambda", Bound::kNonNegative);
  const auto nu = p.optional_number("nu", Bound::kNonNegative);
  torus::ModeSet modes = torus::ModeSet::power_law(m, gamma);
  if (lambda)
  {
    if (lambda->size() != static_cast<std::size_t>(m + 1))
      throw ConfigError("lambda: expected m + 1 entries (index 0 unused)");
    modes = torus::ModeSet::truncated(m, *lambda);
  }
  if (nu)
  {
    if (*nu > 0.0 && torus::nu_effective(modes) == 0.0)
      throw ConfigError("nu: cannot rescale an all-zero lambda schedule");
    modes = modes.with_viscosity(*nu);
  }
  return modes;
}

int read_m(Params& p, const char* key, int def)
{
  const auto m = p.integer(key, static_cast<std::uint64_t>(def), 1);
  if (m > 64) throw ConfigError(std::string(key) + ": at most 64");
  return static_cast<int>(m);
}

struct IdentityParams
{
  std::vector<int> ms;
  double gamma = 3.0;
};

IdentityParams read_identity(Params& p)
{
  IdentityParams r;
  r.ms = p.ints("m_values", {1, 2, 4, 6});
  if (r.ms.empty()) throw ConfigError("m_values: must not be empty");
  for (int m : r.ms)
    if (m < 1 || m > 64) throw ConfigError("m_values: entries must lie in [1, 64]");
  r.gamma = p.number("gamma", 3.0, Bound::kNonNegative);
  return r;
}

ExperimentOutput torus_identity(Params& p, const RunContext& ctx)
{
  const auto [ms, gamma] = read_identity(p);
  p.finish();

  ExperimentOutput out;
  std::ostringstream csv;
  csv << ctx.csv_preamble() << "m,q1,q2,lhs,rhs,error\n";
  json nus = json::object();
  for (int m : ms)
  {
    const auto modes = torus::ModeSet::power_law(m, gamma);
    nus[std::to_string(m)] = torus::nu_effective(modes);
    out.checks.push_back(at_most("identity_m" + std::to_string(m), torus::laplacian_identity_defect(modes), 1e-12));
    for (int q1 = -m; q1 <= m; ++q1)
      for (int q2 = -m; q2 <= m; ++q2)
      {
        if (std::abs(q1) + std::abs(q2) > m) continue;
        const auto r = torus::laplacian_identity_check(modes, {q1, q2});
        csv << m << ',' << q1 << ',' << q2 << ',' << fmt_double(r.lhs) << ',' << fmt_double(r.rhs) << ','
            << fmt_double(r.error) << '\n';
      }

    // only wavevectors along the first axis: the noise cannot diffuse along it
    std::vector<torus::Wavevector> axis;
    for (const auto& k : modes.reps())
      if (k.k2 == 0) axis.push_back(k);
    const auto control = torus::ModeSet::custom(m, axis, modes.lambda_schedule());
    out.checks.push_back(
        at_least("anisotropic_control_m" + std::to_string(m), torus::laplacian_identity_defect(control), 1e-3));
  }
  out.manifest_extras["nu_eff"] = nus;
  out.artifacts.push_back({"identity.csv", csv.str()});
  return out;
}

torus::VelocityField random_field(const torus::ModeSet& modes, std::mt19937_64& rng, double amplitude)
{
  std::normal_distribution<double> normal;
  auto u = torus::VelocityField::zeros(modes);
  for (std::size_t j = 0; j < u.size(); ++j)
  {
    const double scale = amplitude / u.reps[j].norm_sq();
    u.a[static_cast<Eigen::Index>(j)] = scale * normal(rng);
    u.b[static_cast<Eigen::Index>(j)] = scale * normal(rng);
  }
  return u;
}

struct FlowParams
{
  torus::ModeSet modes;
  std::string initial;
  std::vector<int> shear;
  double amplitude = 1.0;
  double dt = 1e-3;
  double horizon = 1.0;
  std::size_t record_every = 10;
  std::size_t k_samples = 3;
};

FlowParams read_flow(Params& p)
{
  const int m = read_m(p, "m", 4);
  FlowParams r{read_modes(p, m), {}, {}};
  r.initial = p.choice("initial", "shear", {"shear", "random"});
  r.shear = p.ints("shear_mode", {1, 0});
  if (r.shear.size() != 2) throw ConfigError("shear_mode: expected two integers");
  r.amplitude = p.number("amplitude", 1.0, Bound::kAny);
  r.dt = p.number("dt", 1e-3, Bound::kPositive);
  r.horizon = p.number("T", 1.0, Bound::kPositive);
  r.record_every = p.integer("record_every", 10, 1);
  r.k_samples = p.integer("k_check_samples", 3);
  require_divides(r.horizon, "T", r.dt, "dt");
  if (r.initial == "shear")
  {
    const torus::Wavevector k{r.shear[0], r.shear[1]};
    if (k.l1() == 0 || r.modes.index_of(k) < 0) throw ConfigError("shear_mode: not among the truncated modes");
  }
  return r;
}

ExperimentOutput torus_flow(Params& p, const RunContext& ctx, torus::Metric metric)
{
  const FlowParams r = read_flow(p);
  p.finish();
  const torus::ModeSet& modes = r.modes;
  const std::string& initial = r.initial;
  const auto& shear = r.shear;
  const double amplitude = r.amplitude;
  const double dt = r.dt;
  const double horizon = r.horizon;
  const std::size_t record_every = r.record_every;
  const std::size_t k_samples = r.k_samples;

  std::mt19937_64 rng(ctx.seed);
  torus::VelocityField u0 = torus::VelocityField::zeros(modes);
  const torus::Wavevector k_shear = torus::canonical({shear[0], shear[1]});
  if (initial == "shear")
    u0.a[modes.index_of(k_shear)] = amplitude;
  else
  {
    u0 = random_field(modes, rng, amplitude);
  }

  const double nu = torus::nu_effective(modes);
  const auto traj = torus::integrate_fluid(u0, modes, metric, horizon, dt, record_every);

  ExperimentOutput out;
  if (initial == "shear")
  {
    const double expected = amplitude * std::exp(-0.5 * nu * k_shear.norm_sq() * horizon);
    auto deviation = traj.fields.back();
    deviation.a[modes.index_of(k_shear)] -= expected;
    const double err = std::sqrt(deviation.a.squaredNorm() + deviation.b.squaredNorm()) / std::abs(expected);
    out.checks.push_back(at_most("decay_rel_err", err, 1e-6));
  }

  std::vector<double> e;
  for (const auto& f : traj.fields) e.push_back(torus::energy(f, metric));
  if (nu == 0.0)
  {
    double drift = 0.0;
    for (double x : e) drift = std::max(drift, std::abs(x - e.front()));
    out.checks.push_back(at_most("energy_conserved_" + torus::to_string(metric), drift / e.front(), 1e-8));
  }
  else
  {
    double worst = -std::numeric_limits<double>::infinity();
    for (std::size_t n = 0; n + 1 < e.size(); ++n) worst = std::max(worst, e[n + 1] - e[n]);
    out.checks.push_back({"energy_decreasing_" + torus::to_string(metric), worst < 0.0, worst, 0.0});
  }

  if (k_samples > 0)
  {
    double k_err = 0.0;
    double neutral = 0.0;
    for (std::size_t s = 0; s < k_samples; ++s)
    {
      const auto u = random_field(modes, rng, 1.0);
      const auto closed = torus::k_operator_closed(u, modes);
      const auto paired = torus::k_operator_pairing(u, modes, metric);
      k_err = std::max({k_err, max_abs(closed.a - paired.a), max_abs(closed.b - paired.b)});
      const double scale = std::max(torus::energy(u, metric), 1e-300);
      neutral = std::max(neutral, std::abs(torus::inner(torus::ad_star(u, metric), u, metric)) / scale);
    }
    out.checks.push_back(at_most("k_pairing_vs_closed", k_err, 1e-10));
    out.checks.push_back(at_most("ad_star_energy_neutral", neutral, 1e-10));
  }

  json mode_list = json::array();
  for (const auto& k : modes.reps()) mode_list.push_back({k.k1, k.k2});
  out.manifest_extras["modes"] = mode_list;
  out.manifest_extras["lambda_schedule"] = modes.lambda_schedule();
  out.manifest_extras["nu_eff"] = nu;
  out.manifest_extras["metric"] = torus::to_string(metric);
  out.manifest_extras["dt"] = dt;
  out.manifest_extras["T"] = horizon;

  std::ostringstream csv;
  csv << ctx.csv_preamble();
  torus::write_fluid_csv(csv, traj);
  out.artifacts.push_back({"fluid.csv", csv.str()});
  return out;
}

// ---------------------------------------------------------------------------

struct Experiment
{
  std::function<void(Params&)> read;
  std::function<ExperimentOutput(Params&, const RunContext&)> run;
};

const std::map<std::string, Experiment>& runners()
{
  static const std::map<std::string, Experiment> table{
      {"rigid-body", {read_rigid_body, rigid_body}},
      {"variational-check", {read_variational, variational_check}},
      {"sde-generator-check", {read_generator, sde_generator_check}},
      {"algebra-audit", {read_audit, algebra_audit}},
      {"torus-identity", {read_identity, torus_identity}},
      {"torus-ns",
       {read_flow, [](Params& p, const RunContext& c) { return torus_flow(p, c, torus::Metric::kL2); }}},
      {"torus-ch",
       {read_flow, [](Params& p, const RunContext& c) { return torus_flow(p, c, torus::Metric::kH1); }}},
  };
  return table;
}

std::uint64_t read_seed(Params& p)
{
  return p.integer("seed", 1);
}

ExperimentConfig resolve_impl(ExperimentConfig config);

ExperimentOutput execute_with(const ExperimentConfig& raw, const AuditOptions& faults)
{
  const ExperimentConfig config = resolve_impl(raw);
  const auto it = runners().find(config.experiment);
  Params p(config.parameters);
  RunContext ctx{config, faults, read_seed(p)};
  ExperimentOutput out = it->second.run(p, ctx);

  json checks = json::array();
  for (const auto& c : out.checks)
    checks.push_back({{"name", c.name}, {"pass", c.pass}, {"value", c.value}, {"tolerance", c.tolerance}});
  const json verdict{{"schema_version", kSchemaVersion},
                     {"experiment", config.experiment},
                     {"seed", ctx.seed},
                     {"pass", out.passed()},
                     {"checks", checks}};

  json files = json::array();
  for (const auto& a : out.artifacts) files.push_back(a.filename);
  files.push_back("verdict.json");
  json manifest{{"schema_version", kSchemaVersion},
                {"build", build_identifier()},
                {"seed", ctx.seed},
                {"config", ctx.echo()},
                {"artifacts", files}};
  for (const auto& [key, value] : out.manifest_extras.items()) manifest[key] = value;

  out.artifacts.push_back({"verdict.json", dump(verdict)});
  out.artifacts.push_back({"manifest.json", dump(manifest)});
  return out;
}

}  // namespace

std::string build_identifier()
{
  std::string compiler =
#if defined(__clang__)
      "clang " __clang_version__;
#elif defined(__GNUC__)
      "gcc " __VERSION__;
#else
      "unknown compiler";
#endif
  return std::string("stochep ") + kVersion + " (" + compiler + ")";
}

const std::vector<std::string>& experiment_names()
{
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const auto& [name, runner] : runners()) out.push_back(name);
    return out;
  }();
  return names;
}

ExperimentConfig parse_config(const json& doc)
{
  if (!doc.is_object()) throw ConfigError("config: expected a JSON object");
  const json* source = &doc;
  if (doc.contains("schema_version") && doc.contains("config")) source = &doc["config"];
  if (!source->is_object()) throw ConfigError("config: expected a JSON object");

  ExperimentConfig config;
  for (const auto& [key, value] : source->items())
  {
    if (key == "experiment")
    {
      if (!value.is_string()) throw ConfigError("experiment: expected a string");
      config.experiment = value.get<std::string>();
    }
    else if (key == "parameters")
      config.parameters = value;
    else if (key == "output_dir")
    {
      if (!value.is_string() || value.get<std::string>().empty())
        throw ConfigError("output_dir: expected a non-empty string");
      config.output_dir = value.get<std::string>();
    }
    else
      throw ConfigError("config: unknown key '" + key + "'");
  }
  if (config.experiment.empty()) throw ConfigError("experiment: missing");
  return resolve(std::move(config));
}

ExperimentConfig resolve(ExperimentConfig config)
{
  return resolve_impl(std::move(config));
}

namespace {

ExperimentConfig resolve_impl(ExperimentConfig config)
{
  const auto it = runners().find(config.experiment);
  if (it == runners().end()) throw ConfigError("experiment: unknown experiment '" + config.experiment + "'");
  if (config.parameters.is_null()) config.parameters = json::object();
  // A dry pass over the parameter reader fills defaults and validates keys;
  // the expensive part of each runner starts only after finish().
  Params p(config.parameters);
  read_seed(p);
  it->second.read(p);
  p.finish();
  config.parameters = p.resolved();
  return config;
}

}  // namespace

bool ExperimentOutput::passed() const
{
  return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass; });
}

ExperimentOutput execute(const ExperimentConfig& config)
{
  return execute_with(config, {});
}

ExperimentOutput run(const ExperimentConfig& config)
{
  ExperimentOutput out = execute(config);
  const std::filesystem::path dir(config.output_dir);
  std::filesystem::create_directories(dir);
  for (const auto& a : out.artifacts)
  {
    std::ofstream os(dir / a.filename, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + (dir / a.filename).string());
    os << a.content;
  }
  return out;
}

std::vector<AuditRow> audit(const AuditOptions& options)
{
  std::vector<AuditRow> rows;
  for (const auto& name : experiment_names())
  {
    ExperimentConfig config;
    config.experiment = name;
    config = resolve(std::move(config));
    const auto out = execute_with(config, options);
    for (const auto& c : out.checks) rows.push_back({name + "/" + c.name, c.pass, c.value, c.tolerance});
  }
  return rows;
}

std::string format_audit(const std::vector<AuditRow>& rows)
{
  std::size_t width = 9;
  for (const auto& r : rows) width = std::max(width, r.name.size());
  std::string out;
  char line[512];
  std::snprintf(line, sizeof line, "%-*s  %-6s  %-13s  %s\n", static_cast<int>(width), "invariant", "result",
                "value", "tolerance");
  out += line;
  for (const auto& r : rows)
  {
    std::snprintf(line, sizeof line, "%-*s  %-6s  %-13.6e  %.1e\n", static_cast<int>(width), r.name.c_str(),
                  r.pass ? "pass" : "FAIL", r.value, r.tolerance);
    out += line;
  }
  return out;
}

std::string error_line(const std::string& kind, const std::string& message, std::optional<std::size_t> step)
{
  json j{{"error", kind}, {"message", message}};
  if (step) j["step"] = *step;
  return j.dump();
}

}  // namespace stochep
