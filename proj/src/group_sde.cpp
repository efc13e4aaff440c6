#include "stochep/group_sde.hpp"

#include "stochep/errors.hpp"
#include "stochep/format.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <random>
#include <stdexcept>
#include <thread>

namespace stochep {

namespace {

std::uint64_t splitmix64(std::uint64_t x)
{
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t sample)
{
  return splitmix64(seed ^ splitmix64(sample + 0x632BE59BD9B4E019ULL));
}

Eigen::Vector3d as3(const AlgebraVector& v)
{
  if (v.size() != 3) throw std::invalid_argument("group_sde: algebra vectors must have dimension 3");
  return {v[0], v[1], v[2]};
}

double mean_of(std::span<const double> values)
{
  return values.empty() ? 0.0 : pairwise_sum(values) / static_cast<double>(values.size());
}

// Unbiased standard error of the mean.
double standard_error(std::span<const double> values, double mean)
{
  const std::size_t n = values.size();
  if (n < 2) return 0.0;
  std::vector<double> sq(n);
  for (std::size_t i = 0; i < n; ++i) sq[i] = (values[i] - mean) * (values[i] - mean);
  const double var = pairwise_sum(sq) / static_cast<double>(n - 1);
  return std::sqrt(var / static_cast<double>(n));
}

double z_score(double diff, double se, double allowance)
{
  if (se > 0.0) return diff / se;
  return std::abs(diff) <= allowance ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), diff);
}

}  // namespace

double orthogonality_defect(const GroupElement& r)
{
  return (r.transpose() * r - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
}

bool is_rotation(const GroupElement& r, double tol)
{
  return r.allFinite() && orthogonality_defect(r) < tol && r.determinant() > 0.0;
}

GroupElement so3_exp(const Eigen::Vector3d& w)
{
  const double theta = w.norm();
  const Eigen::Matrix3d k = hat(w);
  double a, b;
  if (theta < 1e-6)
  {
    const double t2 = theta * theta;
    a = 1.0 - t2 / 6.0 + t2 * t2 / 120.0;
    b = 0.5 - t2 / 24.0 + t2 * t2 / 720.0;
  }
  else
  {
    a = std::sin(theta) / theta;
    b = (1.0 - std::cos(theta)) / (theta * theta);
  }
  return Eigen::Matrix3d::Identity() + a * k + b * k * k;
}

Eigen::Vector3d so3_log(const GroupElement& r)
{
  const double c = std::clamp(0.5 * (r.trace() - 1.0), -1.0, 1.0);
  const double theta = std::acos(c);
  const Eigen::Vector3d axis = 0.5 * vee(r - r.transpose());
  if (theta < 1e-6) return axis * (1.0 + theta * theta / 6.0);
  return axis * (theta / std::sin(theta));
}

GroupElement polar_project(const GroupElement& m)
{
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d u = svd.matrixU();
  const Eigen::Matrix3d v = svd.matrixV();
  if ((u * v.transpose()).determinant() < 0.0) u.col(2) *= -1.0;
  return u * v.transpose();
}

double pairwise_sum(std::span<const double> values)
{
  if (values.size() <= 8)
  {
    double acc = 0.0;
    for (double v : values) acc += v;
    return acc;
  }
  const std::size_t half = values.size() / 2;
  return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

Eigen::Vector3d step_increment(std::span<const double> dw, const NoiseBasis& noise,
                               const Eigen::Vector3d& drift_start, const Eigen::Vector3d& drift_end,
                               double h, InvarianceSide side)
{
  Eigen::Vector3d diffusion = Eigen::Vector3d::Zero();
  for (std::size_t i = 0; i < noise.size(); ++i) diffusion += dw[i] * as3(noise.vectors[i]);
  const Eigen::Vector3d y0 = diffusion + h * drift_start;
  const Eigen::Vector3d y1 = diffusion + h * drift_end;
  // first-order dexp^{-1} correction of the corrector stage
  const double sign = side == InvarianceSide::kLeft ? -0.5 : 0.5;
  return 0.5 * (y0 + y1 + sign * y0.cross(y1));
}

PathEnsemble simulate(const ReducedTrajectory& drift, const NoiseBasis& noise, const GeometrySpec& g,
                      std::size_t n_samples, std::uint64_t seed, double h, const SimulationOptions& options)
{
  validate(drift);
  validate(g);
  if (g.dim() != 3) throw std::invalid_argument("simulate: SO(3) requires a 3-dimensional algebra");
  if (!(h > 0.0)) throw std::invalid_argument("simulate: step must be positive");
  for (const auto& v : noise.vectors) as3(v);

  // substeps per recorded interval
  std::vector<std::size_t> substeps(drift.size() > 0 ? drift.size() - 1 : 0);
  for (std::size_t j = 0; j + 1 < drift.size(); ++j)
  {
    const double ratio = (drift.times[j + 1] - drift.times[j]) / h;
    const auto n = static_cast<std::size_t>(std::llround(ratio));
    if (n == 0 || std::abs(ratio - static_cast<double>(n)) > 1e-9 * ratio)
      throw std::invalid_argument("simulate: step does not divide the grid spacing");
    substeps[j] = n;
  }

  const Eigen::Vector3d half_contraction = 0.5 * as3(contraction(noise, g));
  auto drift_at = [&](double t) -> Eigen::Vector3d { return as3(drift.at(t)) - half_contraction; };

  PathEnsemble ens;
  ens.seed = seed;
  ens.step = h;
  ens.side = g.side;
  ens.times = drift.times;
  ens.paths.assign(n_samples, {});
  std::vector<std::size_t> reprojections(n_samples, 0);
  std::vector<std::size_t> failed_step(n_samples, std::numeric_limits<std::size_t>::max());

  const double tol = options.reprojection_tolerance;
  const std::size_t k = noise.size();
  auto run_sample = [&](std::size_t s) {
    std::mt19937_64 rng(substream_seed(seed, s));
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> dw(k);
    const double sqrt_h = std::sqrt(h);
    auto& path = ens.paths[s];
    path.reserve(drift.size());
    GroupElement current = GroupElement::Identity();
    path.push_back(current);
    std::size_t step_index = 0;
    for (std::size_t j = 0; j < substeps.size(); ++j)
    {
      const double t0 = drift.times[j];
      const double dt = (drift.times[j + 1] - t0) / static_cast<double>(substeps[j]);
      for (std::size_t n = 0; n < substeps[j]; ++n, ++step_index)
      {
        for (std::size_t i = 0; i < k; ++i) dw[i] = sqrt_h * normal(rng);
        const double ta = t0 + static_cast<double>(n) * dt;
        const Eigen::Vector3d xi =
            step_increment(dw, noise, drift_at(ta), drift_at(ta + dt), dt, g.side);
        if (!xi.allFinite())
        {
          failed_step[s] = step_index;
          return;
        }
        const GroupElement e = so3_exp(xi);
        current = g.side == InvarianceSide::kLeft ? GroupElement(current * e) : GroupElement(e * current);
        if (orthogonality_defect(current) > tol)
        {
          current = polar_project(current);
          ++reprojections[s];
        }
      }
      path.push_back(current);
    }
  };

  unsigned threads = options.threads != 0 ? options.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(n_samples, 1)));
  if (threads <= 1)
  {
    for (std::size_t s = 0; s < n_samples; ++s) run_sample(s);
  }
  else
  {
    std::vector<std::jthread> workers;
    for (unsigned w = 0; w < threads; ++w)
      workers.emplace_back([&, w] {
        for (std::size_t s = w; s < n_samples; s += threads) run_sample(s);
      });
  }

  for (std::size_t s = 0; s < n_samples; ++s)
    if (failed_step[s] != std::numeric_limits<std::size_t>::max())
      throw NumericalBlowup("simulate: non-finite increment in sample " + std::to_string(s), failed_step[s]);
  for (std::size_t r : reprojections) ens.reprojections += r;
  return ens;
}

double analytic_generator(const LinearFunctional& f, const GroupElement& g, const NoiseBasis& noise,
                          const Eigen::Vector3d& drift, InvarianceSide side)
{
  Eigen::Matrix3d op = hat(drift);
  for (const auto& h : noise.vectors)
  {
    const Eigen::Matrix3d hh = hat(as3(h));
    op += 0.5 * hh * hh;
  }
  return side == InvarianceSide::kLeft ? (f.weight * g * op).trace() : (f.weight * op * g).trace();
}

bool GeneratorReport::passes(double z_threshold) const
{
  return sufficient && std::abs(z) < z_threshold;
}

GeneratorReport weak_generator_check(const PathEnsemble& ens, const LinearFunctional& f,
                                     const ReducedTrajectory& drift, const NoiseBasis& noise,
                                     const GeometrySpec& g)
{
  if (ens.times.size() < 2) throw std::invalid_argument("generator check: need at least two recorded nodes");
  const std::size_t n = ens.samples();
  const std::size_t intervals = ens.times.size() - 1;
  const Eigen::Vector3d half_contraction = 0.5 * as3(contraction(noise, g));

  GeneratorReport report;
  report.function = f.name;
  report.step = ens.step;
  report.samples = n;
  report.sufficient = n >= kMinGeneratorSamples;

  std::vector<Eigen::Vector3d> drifts(intervals);
  for (std::size_t j = 0; j < intervals; ++j) drifts[j] = as3(drift.at(ens.times[j])) - half_contraction;

  std::vector<double> est(n), ana(n), diff(n);
  std::vector<double> node_est(n), node_ana(n), node_diff(n);
  std::vector<double> est_acc(n, 0.0), ana_acc(n, 0.0);
  double max_dt = 0.0;
  report.node_z.resize(intervals);
  for (std::size_t j = 0; j < intervals; ++j)
  {
    const double dt = ens.times[j + 1] - ens.times[j];
    max_dt = std::max(max_dt, dt);
    for (std::size_t s = 0; s < n; ++s)
    {
      const auto& path = ens.paths[s];
      node_est[s] = (f(path[j + 1]) - f(path[j])) / dt;
      node_ana[s] = analytic_generator(f, path[j], noise, drifts[j], ens.side);
      node_diff[s] = node_est[s] - node_ana[s];
      est_acc[s] += node_est[s];
      ana_acc[s] += node_ana[s];
    }
    const double m_diff = mean_of(node_diff);
    report.node_z[j] = z_score(m_diff, standard_error(node_diff, m_diff),
                               10.0 * dt * (1.0 + std::abs(mean_of(node_ana))));
  }
  for (std::size_t s = 0; s < n; ++s)
  {
    est[s] = est_acc[s] / static_cast<double>(intervals);
    ana[s] = ana_acc[s] / static_cast<double>(intervals);
    diff[s] = est[s] - ana[s];
  }
  report.estimate = mean_of(est);
  report.analytic = mean_of(ana);
  const double m_diff = mean_of(diff);
  report.stderr_ = standard_error(diff, m_diff);
  report.deterministic = report.stderr_ == 0.0;
  report.z = z_score(m_diff, report.stderr_, 10.0 * max_dt * (1.0 + std::abs(report.analytic)));
  return report;
}

DecayEstimate trace_decay_rate(const PathEnsemble& ens)
{
  if (ens.samples() < 2 || ens.times.size() < 2) throw std::invalid_argument("trace decay: ensemble too small");
  std::vector<double> traces(ens.samples());
  for (std::size_t s = 0; s < ens.samples(); ++s) traces[s] = ens.paths[s].back().trace();
  const double mean = mean_of(traces);
  const double se = standard_error(traces, mean);
  const double t = ens.times.back() - ens.times.front();
  if (!(mean > 0.0)) throw std::runtime_error("trace decay: mean trace is not positive");
  return {-std::log(mean / 3.0) / t, se / (mean * t)};
}

void validate(const VariationCurve& v)
{
  if (!v.value || !v.derivative) throw std::invalid_argument("variation curve: missing value or derivative");
  if (v.value(0.0) != Eigen::Vector3d::Zero() || v.value(1.0) != Eigen::Vector3d::Zero())
    throw std::invalid_argument("variation curve: endpoint values must be exactly zero");
}

std::vector<GroupElement> perturbation_flow(const VariationCurve& v, double eps, const std::vector<double>& grid,
                                            InvarianceSide side)
{
  if (std::abs(eps) > 0.1) throw std::invalid_argument("perturbation flow: |eps| must not exceed 0.1");
  validate(v);
  auto rate = [&](double t, const GroupElement& e) -> GroupElement {
    const Eigen::Matrix3d w = eps * hat(v.derivative(t));
    return side == InvarianceSide::kLeft ? GroupElement(e * w) : GroupElement(w * e);
  };
  std::vector<GroupElement> out;
  out.reserve(grid.size());
  out.push_back(GroupElement::Identity());
  for (std::size_t n = 0; n + 1 < grid.size(); ++n)
  {
    const double t = grid[n];
    const double h = grid[n + 1] - t;
    const GroupElement& e = out.back();
    const GroupElement k1 = rate(t, e);
    const GroupElement k2 = rate(t + 0.5 * h, e + 0.5 * h * k1);
    const GroupElement k3 = rate(t + 0.5 * h, e + 0.5 * h * k2);
    const GroupElement k4 = rate(t + h, e + h * k3);
    out.push_back(e + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4));
  }
  return out;
}

void write_paths_csv(std::ostream& os, const PathEnsemble& ens)
{
  os << "t,r11,r12,r13,r21,r22,r23,r31,r32,r33,sample\n";
  for (std::size_t s = 0; s < ens.samples(); ++s)
    for (std::size_t j = 0; j < ens.paths[s].size(); ++j)
    {
      os << fmt_double(ens.times[j]);
      const auto& r = ens.paths[s][j];
      for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b) os << ',' << fmt_double(r(a, b));
      os << ',' << s << '\n';
    }
}

}  // namespace stochep
