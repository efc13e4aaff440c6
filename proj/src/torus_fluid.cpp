#include "stochep/torus_fluid.hpp"

#include "stochep/errors.hpp"
#include "stochep/format.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <ostream>
#include <stdexcept>

namespace stochep::torus {

namespace {

using cplx = std::complex<double>;
using Vec2c = std::array<cplx, 2>;
constexpr double kPi = std::numbers::pi;
constexpr cplx kI{0.0, 1.0};

// Fourier coefficients of a real vector field on the box |k1|, |k2| <= radius:
// u(theta) = sum_k c(k) exp(i k.theta).
class Spectrum
{
 public:
  explicit Spectrum(int radius)
      : radius_(radius), width_(2 * radius + 1), data_(static_cast<std::size_t>(width_ * width_), Vec2c{})
  {
  }

  int radius() const { return radius_; }
  bool contains(int k1, int k2) const { return std::abs(k1) <= radius_ && std::abs(k2) <= radius_; }
  Vec2c& at(int k1, int k2) { return data_[index(k1, k2)]; }
  const Vec2c& at(int k1, int k2) const { return data_[index(k1, k2)]; }

  struct Entry
  {
    int k1, k2;
    Vec2c c;
  };

  std::vector<Entry> nonzeros() const
  {
    std::vector<Entry> out;
    for (int k1 = -radius_; k1 <= radius_; ++k1)
      for (int k2 = -radius_; k2 <= radius_; ++k2)
      {
        const Vec2c& c = at(k1, k2);
        if (c[0] != 0.0 || c[1] != 0.0) out.push_back({k1, k2, c});
      }
    return out;
  }

  Spectrum& operator+=(const Spectrum& o)
  {
    if (o.radius_ > radius_) *this = grown(o.radius_);
    for (int k1 = -o.radius_; k1 <= o.radius_; ++k1)
      for (int k2 = -o.radius_; k2 <= o.radius_; ++k2)
      {
        Vec2c& c = at(k1, k2);
        c[0] += o.at(k1, k2)[0];
        c[1] += o.at(k1, k2)[1];
      }
    return *this;
  }

  Spectrum operator-() const
  {
    Spectrum out = *this;
    for (auto& c : out.data_) c = {-c[0], -c[1]};
    return out;
  }

  void scale(double s)
  {
    for (auto& c : data_) c = {s * c[0], s * c[1]};
  }

 private:
  std::size_t index(int k1, int k2) const
  {
    return static_cast<std::size_t>((k1 + radius_) * width_ + (k2 + radius_));
  }

  Spectrum grown(int radius) const
  {
    Spectrum out(radius);
    for (int k1 = -radius_; k1 <= radius_; ++k1)
      for (int k2 = -radius_; k2 <= radius_; ++k2) out.at(k1, k2) = at(k1, k2);
    return out;
  }

  int radius_;
  int width_;
  std::vector<Vec2c> data_;
};

int field_radius(const VelocityField& u)
{
  int r = 0;
  for (const auto& k : u.reps) r = std::max({r, std::abs(k.k1), std::abs(k.k2)});
  return r;
}

// a A_k + b B_k = (k2, -k1) (a cos + b sin) has coefficients (k2, -k1)(a - i b)/2 at k
// and the conjugate at -k.
Spectrum to_spectrum(const VelocityField& u, int radius)
{
  Spectrum s(radius);
  for (std::size_t j = 0; j < u.size(); ++j)
  {
    const auto& k = u.reps[j];
    const cplx c = 0.5 * cplx(u.a[static_cast<Eigen::Index>(j)], -u.b[static_cast<Eigen::Index>(j)]);
    Vec2c& plus = s.at(k.k1, k.k2);
    plus[0] += static_cast<double>(k.k2) * c;
    plus[1] += -static_cast<double>(k.k1) * c;
    Vec2c& minus = s.at(-k.k1, -k.k2);
    minus[0] += static_cast<double>(k.k2) * std::conj(c);
    minus[1] += -static_cast<double>(k.k1) * std::conj(c);
  }
  return s;
}

Spectrum to_spectrum(const VelocityField& u)
{
  return to_spectrum(u, field_radius(u));
}

// Reads the divergence-free part on the given representatives.
VelocityField to_field(const Spectrum& s, const std::vector<Wavevector>& reps)
{
  VelocityField u;
  u.reps = reps;
  u.a = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(reps.size()));
  u.b = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(reps.size()));
  for (std::size_t j = 0; j < reps.size(); ++j)
  {
    const auto& k = reps[j];
    if (!s.contains(k.k1, k.k2)) continue;
    const Vec2c& c = s.at(k.k1, k.k2);
    const cplx amp = (static_cast<double>(k.k2) * c[0] - static_cast<double>(k.k1) * c[1]) / k.norm_sq();
    u.a[static_cast<Eigen::Index>(j)] = 2.0 * amp.real();
    u.b[static_cast<Eigen::Index>(j)] = -2.0 * amp.imag();
  }
  return u;
}

// (x . grad) y
Spectrum advect(const Spectrum& x, const Spectrum& y)
{
  Spectrum out(x.radius() + y.radius());
  const auto xs = x.nonzeros();
  const auto ys = y.nonzeros();
  for (const auto& p : xs)
    for (const auto& q : ys)
    {
      const cplx d = kI * (p.c[0] * static_cast<double>(q.k1) + p.c[1] * static_cast<double>(q.k2));
      Vec2c& o = out.at(p.k1 + q.k1, p.k2 + q.k2);
      o[0] += d * q.c[0];
      o[1] += d * q.c[1];
    }
  return out;
}

// sum_j v_j grad u_j
Spectrum transpose_gradient(const Spectrum& v, const Spectrum& u)
{
  Spectrum out(v.radius() + u.radius());
  const auto vs = v.nonzeros();
  const auto us = u.nonzeros();
  for (const auto& p : vs)
    for (const auto& q : us)
    {
      const cplx dot = p.c[0] * q.c[0] + p.c[1] * q.c[1];
      Vec2c& o = out.at(p.k1 + q.k1, p.k2 + q.k2);
      o[0] += kI * static_cast<double>(q.k1) * dot;
      o[1] += kI * static_cast<double>(q.k2) * dot;
    }
  return out;
}

// [x, y] = (x . grad) y - (y . grad) x
Spectrum field_bracket(const Spectrum& x, const Spectrum& y)
{
  Spectrum out = advect(x, y);
  out += -advect(y, x);
  return out;
}

void leray_project(Spectrum& s)
{
  const int r = s.radius();
  for (int k1 = -r; k1 <= r; ++k1)
    for (int k2 = -r; k2 <= r; ++k2)
    {
      Vec2c& c = s.at(k1, k2);
      if (k1 == 0 && k2 == 0)
      {
        c = {};
        continue;
      }
      const double n2 = static_cast<double>(k1 * k1 + k2 * k2);
      const cplx proj = (static_cast<double>(k1) * c[0] + static_cast<double>(k2) * c[1]) / n2;
      c[0] -= static_cast<double>(k1) * proj;
      c[1] -= static_cast<double>(k2) * proj;
    }
}

double metric_weight(int k1, int k2, Metric metric)
{
  return metric == Metric::kL2 ? 1.0 : 1.0 + static_cast<double>(k1 * k1 + k2 * k2);
}

// <x, y> = (2 pi)^2 sum_k w(k) Re(x(k) . conj(y(k)))
double pair(const Spectrum& x, const Spectrum& y, Metric metric)
{
  double acc = 0.0;
  const int r = std::min(x.radius(), y.radius());
  for (int k1 = -r; k1 <= r; ++k1)
    for (int k2 = -r; k2 <= r; ++k2)
    {
      const Vec2c& a = x.at(k1, k2);
      const Vec2c& b = y.at(k1, k2);
      acc += metric_weight(k1, k2, metric) * (a[0] * std::conj(b[0]) + a[1] * std::conj(b[1])).real();
    }
  return 4.0 * kPi * kPi * acc;
}

// gram entry of A_k (equal to that of B_k)
double basis_norm_sq(const Wavevector& k, Metric metric)
{
  return 2.0 * kPi * kPi * k.norm_sq() * metric_weight(k.k1, k.k2, metric);
}

Spectrum basis_spectrum(const Wavevector& k, bool cosine)
{
  VelocityField f;
  f.reps = {k};
  f.a = Eigen::VectorXd::Constant(1, cosine ? 1.0 : 0.0);
  f.b = Eigen::VectorXd::Constant(1, cosine ? 0.0 : 1.0);
  return to_spectrum(f);
}

VelocityField scaled_like(const VelocityField& u, const Eigen::VectorXd& factor)
{
  VelocityField out = u;
  out.a = u.a.cwiseProduct(factor);
  out.b = u.b.cwiseProduct(factor);
  return out;
}

Eigen::VectorXd wavenumber_sq(const VelocityField& u)
{
  Eigen::VectorXd k2(static_cast<Eigen::Index>(u.size()));
  for (std::size_t j = 0; j < u.size(); ++j) k2[static_cast<Eigen::Index>(j)] = u.reps[j].norm_sq();
  return k2;
}

}  // namespace

Wavevector canonical(Wavevector k)
{
  if (k.k1 < 0 || (k.k1 == 0 && k.k2 < 0)) return {-k.k1, -k.k2};
  return k;
}

ModeSet::ModeSet(int m, std::vector<Wavevector> reps, std::vector<double> lambda)
    : m_(m), reps_(std::move(reps)), lambda_(std::move(lambda))
{
  if (m < 1) throw std::invalid_argument("mode set: truncation radius must be at least 1");
  if (lambda_.size() != static_cast<std::size_t>(m + 1))
    throw std::invalid_argument("mode set: lambda schedule must have m + 1 entries");
  for (double l : lambda_)
    if (!std::isfinite(l) || l < 0.0) throw std::invalid_argument("mode set: lambda must be finite and >= 0");
  for (const auto& k : reps_)
    if (k.l1() == 0 || k.l1() > m || !(canonical(k) == k))
      throw std::invalid_argument("mode set: invalid representative");
}

ModeSet ModeSet::truncated(int m, std::vector<double> lambda)
{
  std::vector<Wavevector> reps;
  for (int k1 = 0; k1 <= m; ++k1)
    for (int k2 = -m; k2 <= m; ++k2)
    {
      const Wavevector k{k1, k2};
      if (k.l1() == 0 || k.l1() > m || !(canonical(k) == k)) continue;
      reps.push_back(k);
    }
  return ModeSet(m, std::move(reps), std::move(lambda));
}

ModeSet ModeSet::power_law(int m, double gamma)
{
  std::vector<double> lambda(static_cast<std::size_t>(std::max(m, 0) + 1), 0.0);
  for (int n = 1; n <= m; ++n) lambda[static_cast<std::size_t>(n)] = std::pow(static_cast<double>(n), -gamma);
  return truncated(m, std::move(lambda));
}

ModeSet ModeSet::custom(int m, std::vector<Wavevector> reps, std::vector<double> lambda)
{
  return ModeSet(m, std::move(reps), std::move(lambda));
}

int ModeSet::index_of(Wavevector k) const
{
  const Wavevector c = canonical(k);
  for (std::size_t j = 0; j < reps_.size(); ++j)
    if (reps_[j] == c) return static_cast<int>(j);
  return -1;
}

bool ModeSet::is_closed() const
{
  for (const auto& k : reps_)
  {
    if (index_of({k.k2, k.k1}) < 0) return false;
    if (index_of({-k.k1, k.k2}) < 0) return false;
  }
  return true;
}

ModeSet ModeSet::with_viscosity(double nu) const
{
  if (!(nu >= 0.0)) throw std::invalid_argument("mode set: viscosity must be non-negative");
  const double current = nu_effective(*this);
  if (current == 0.0) throw std::invalid_argument("mode set: cannot rescale an all-zero lambda schedule");
  std::vector<double> lambda = lambda_;
  const double s = std::sqrt(nu / current);
  for (double& l : lambda) l *= s;
  return ModeSet(m_, reps_, std::move(lambda));
}

double nu_effective(const ModeSet& modes)
{
  double nu = 0.0;
  for (const auto& k : modes.reps())
  {
    const double l = modes.lambda(k);
    nu += l * l * static_cast<double>(k.k1 * k.k1);
  }
  return nu;
}

IdentityReport laplacian_identity_check(const ModeSet& modes, Wavevector q)
{
  IdentityReport r;
  r.test_mode = q;
  // D_k exp(i q.theta) = i (k2 q1 - k1 q2) exp(i q.theta)
  for (const auto& k : modes.reps())
  {
    const double l = modes.lambda(k);
    const double d = static_cast<double>(k.k2 * q.k1 - k.k1 * q.k2);
    r.lhs += -l * l * d * d;
  }
  r.rhs = -nu_effective(modes) * q.norm_sq();
  r.error = std::abs(r.lhs - r.rhs);
  return r;
}

double laplacian_identity_defect(const ModeSet& modes)
{
  double worst = 0.0;
  const int m = modes.m();
  for (int q1 = -m; q1 <= m; ++q1)
    for (int q2 = -m; q2 <= m; ++q2)
    {
      if (std::abs(q1) + std::abs(q2) > m) continue;
      worst = std::max(worst, laplacian_identity_check(modes, {q1, q2}).error);
    }
  return worst;
}

double fitted_viscosity(const ModeSet& modes)
{
  return -laplacian_identity_check(modes, {1, 0}).lhs;
}

VelocityField VelocityField::zeros(const ModeSet& modes)
{
  VelocityField u;
  u.reps = modes.reps();
  u.a = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(modes.size()));
  u.b = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(modes.size()));
  return u;
}

Eigen::Vector2d VelocityField::operator()(double theta1, double theta2) const
{
  Eigen::Vector2d out = Eigen::Vector2d::Zero();
  for (std::size_t j = 0; j < reps.size(); ++j)
  {
    const auto& k = reps[j];
    const double phase = k.k1 * theta1 + k.k2 * theta2;
    const double s = a[static_cast<Eigen::Index>(j)] * std::cos(phase) + b[static_cast<Eigen::Index>(j)] * std::sin(phase);
    out += s * Eigen::Vector2d(k.k2, -k.k1);
  }
  return out;
}

std::string to_string(Metric metric)
{
  return metric == Metric::kL2 ? "L2" : "H1";
}

double inner(const VelocityField& u, const VelocityField& v, Metric metric)
{
  const int r = std::max(field_radius(u), field_radius(v));
  return pair(to_spectrum(u, r), to_spectrum(v, r), metric);
}

double energy(const VelocityField& u, Metric metric)
{
  double acc = 0.0;
  for (std::size_t j = 0; j < u.size(); ++j)
  {
    const auto idx = static_cast<Eigen::Index>(j);
    acc += basis_norm_sq(u.reps[j], metric) * (u.a[idx] * u.a[idx] + u.b[idx] * u.b[idx]);
  }
  return 0.5 * acc;
}

void require_within(const VelocityField& u, const ModeSet& modes)
{
  if (u.a.size() != static_cast<Eigen::Index>(u.size()) || u.b.size() != static_cast<Eigen::Index>(u.size()))
    throw std::invalid_argument("velocity field: coefficient arrays do not match the mode list");
  for (const auto& k : u.reps)
    if (!(canonical(k) == k) || k.l1() == 0 || modes.index_of(k) < 0)
      throw std::invalid_argument("velocity field: mode (" + std::to_string(k.k1) + "," + std::to_string(k.k2) +
                                  ") outside the truncation");
  if (!u.is_finite()) throw std::invalid_argument("velocity field: non-finite coefficients");
}

VelocityField embed(const VelocityField& u, const ModeSet& modes)
{
  require_within(u, modes);
  VelocityField out = VelocityField::zeros(modes);
  for (std::size_t j = 0; j < u.size(); ++j)
  {
    const auto idx = static_cast<Eigen::Index>(modes.index_of(u.reps[j]));
    out.a[idx] += u.a[static_cast<Eigen::Index>(j)];
    out.b[idx] += u.b[static_cast<Eigen::Index>(j)];
  }
  return out;
}

VelocityField k_operator_closed(const VelocityField& u, const ModeSet& modes)
{
  require_within(u, modes);
  const double nu = nu_effective(modes);
  // -(nu/2) Laplacian multiplies mode k by +(nu/2)|k|^2
  return scaled_like(u, 0.5 * nu * wavenumber_sq(u));
}

double k_pairing(const VelocityField& u, const VelocityField& v, const ModeSet& modes, Metric metric)
{
  require_within(u, modes);
  require_within(v, modes);
  const Spectrum vs = to_spectrum(v);
  Spectrum total(1);
  for (const auto& k : modes.reps())
  {
    const double l = modes.lambda(k);
    if (l == 0.0) continue;
    for (bool cosine : {true, false})
    {
      Spectrum basis = basis_spectrum(k, cosine);
      basis.scale(l);
      const Spectrum ad_v = -field_bracket(vs, basis);
      Spectrum term = advect(ad_v, basis);
      term += advect(basis, ad_v);
      total += term;
    }
  }
  leray_project(total);
  const int r = std::max(total.radius(), field_radius(u));
  Spectrum us = to_spectrum(u, r);
  return -0.5 * pair(us, total, metric);
}

VelocityField k_operator_pairing(const VelocityField& u, const ModeSet& modes, Metric metric)
{
  require_within(u, modes);
  VelocityField out = u;
  for (std::size_t j = 0; j < u.size(); ++j)
  {
    const Wavevector& q = u.reps[j];
    VelocityField v;
    v.reps = {q};
    v.a = Eigen::VectorXd::Constant(1, 1.0);
    v.b = Eigen::VectorXd::Zero(1);
    const double norm = basis_norm_sq(q, metric);
    out.a[static_cast<Eigen::Index>(j)] = k_pairing(u, v, modes, metric) / norm;
    v.a[0] = 0.0;
    v.b[0] = 1.0;
    out.b[static_cast<Eigen::Index>(j)] = k_pairing(u, v, modes, metric) / norm;
  }
  return out;
}

VelocityField ad_star_l2(const VelocityField& u)
{
  const Spectrum us = to_spectrum(u);
  Spectrum n = advect(us, us);
  leray_project(n);
  return to_field(n, u.reps);
}

VelocityField ad_star_h1(const VelocityField& u)
{
  const Eigen::VectorXd k2 = wavenumber_sq(u);
  const Eigen::VectorXd helmholtz = Eigen::VectorXd::Ones(k2.size()) + k2;
  const Spectrum us = to_spectrum(u);
  const Spectrum vs = to_spectrum(scaled_like(u, helmholtz));
  Spectrum n = advect(us, vs);
  n += transpose_gradient(vs, us);
  leray_project(n);
  return scaled_like(to_field(n, u.reps), helmholtz.cwiseInverse());
}

VelocityField ad_star(const VelocityField& u, Metric metric)
{
  return metric == Metric::kL2 ? ad_star_l2(u) : ad_star_h1(u);
}

VelocityField fluid_rhs(const VelocityField& field, const ModeSet& modes, Metric metric)
{
  const VelocityField u = embed(field, modes);
  const VelocityField adv = ad_star(u, metric);
  const VelocityField k = k_operator_closed(u, modes);
  VelocityField out = u;
  out.a = -adv.a - k.a;
  out.b = -adv.b - k.b;
  return out;
}

FluidTrajectory integrate_fluid(const VelocityField& u0, const ModeSet& modes, Metric metric, double horizon,
                                double dt, std::size_t record_every)
{
  if (!(horizon > 0.0) || !(dt > 0.0)) throw std::invalid_argument("integrate_fluid: T and dt must be positive");
  if (record_every == 0) throw std::invalid_argument("integrate_fluid: record_every must be positive");
  const double ratio = horizon / dt;
  const auto steps = static_cast<std::size_t>(std::llround(ratio));
  if (steps == 0 || std::abs(ratio - static_cast<double>(steps)) > 1e-9 * ratio)
    throw std::invalid_argument("integrate_fluid: dt does not divide T");
  const double h = horizon / static_cast<double>(steps);

  auto axpy = [](const VelocityField& x, double s, const VelocityField& y) {
    VelocityField out = x;
    out.a += s * y.a;
    out.b += s * y.b;
    return out;
  };

  FluidTrajectory traj;
  traj.metric = metric;
  traj.times.push_back(0.0);
  VelocityField u = embed(u0, modes);
  traj.fields.push_back(u);
  for (std::size_t n = 0; n < steps; ++n)
  {
    auto stage = [&](const VelocityField& x) {
      if (!x.is_finite()) throw NumericalBlowup("integrate_fluid: non-finite stage state", n);
      return fluid_rhs(x, modes, metric);
    };
    const VelocityField k1 = stage(u);
    const VelocityField k2 = stage(axpy(u, 0.5 * h, k1));
    const VelocityField k3 = stage(axpy(u, 0.5 * h, k2));
    const VelocityField k4 = stage(axpy(u, h, k3));
    u.a += (h / 6.0) * (k1.a + 2.0 * k2.a + 2.0 * k3.a + k4.a);
    u.b += (h / 6.0) * (k1.b + 2.0 * k2.b + 2.0 * k3.b + k4.b);
    if (!u.is_finite()) throw NumericalBlowup("integrate_fluid: non-finite coefficients", n);
    if ((n + 1) % record_every == 0 || n + 1 == steps)
    {
      traj.times.push_back(horizon * static_cast<double>(n + 1) / static_cast<double>(steps));
      traj.fields.push_back(u);
    }
  }
  return traj;
}

void write_fluid_csv(std::ostream& os, const FluidTrajectory& traj)
{
  os << "t,k1,k2,a,b,energy_L2,energy_H1\n";
  for (std::size_t n = 0; n < traj.times.size(); ++n)
  {
    const auto& u = traj.fields[n];
    const std::string e0 = fmt_double(energy(u, Metric::kL2));
    const std::string e1 = fmt_double(energy(u, Metric::kH1));
    for (std::size_t j = 0; j < u.size(); ++j)
    {
      os << fmt_double(traj.times[n]) << ',' << u.reps[j].k1 << ',' << u.reps[j].k2 << ','
         << fmt_double(u.a[static_cast<Eigen::Index>(j)]) << ',' << fmt_double(u.b[static_cast<Eigen::Index>(j)])
         << ',' << e0 << ',' << e1 << '\n';
    }
  }
}

}  // namespace stochep::torus
