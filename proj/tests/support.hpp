#pragma once

// Independent oracles shared by the test binaries. Nothing here calls into
// the library's numeric code.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <functional>
#include <iterator>
#include <limits>
#include <numbers>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include "evfuse/losses.hpp"
#include "evfuse/types.hpp"

namespace evfuse::testing {

// |a - n| <= rel * max(|a|, |n|) or |a - n| <= abs_floor.
inline bool grad_close(double analytic, double numeric, double rel = 1e-4, double abs_floor = 1e-7) {
  const double d = std::abs(analytic - numeric);
  return d <= abs_floor || d <= rel * std::max(std::abs(analytic), std::abs(numeric));
}

inline double relative_error(double got, double want, double abs_floor = 0.0) {
  const double d = std::abs(got - want);
  if (d <= abs_floor) return 0.0;
  return d / std::max(std::abs(want), 1e-300);
}

// Central difference of f along coordinate i.
inline double central_diff(const std::function<double(const std::vector<double>&)>& f,
                           std::vector<double> x, std::size_t i, double h = 1e-5) {
  const double x0 = x[i];
  x[i] = x0 + h;
  const double up = f(x);
  x[i] = x0 - h;
  const double down = f(x);
  return (up - down) / (2.0 * h);
}

// Tanh-sinh nodes on (0, 1): x and its complement 1 - x computed
// separately so both stay accurate near the endpoints, where the Dirichlet
// log-densities are singular.
struct Node {
  double x;
  double complement;
  double weight;
};

inline std::vector<Node> tanh_sinh01(double h = 1.0 / 64.0, double t_max = 3.2) {
  std::vector<Node> nodes;
  const double half_pi = std::numbers::pi / 2.0;
  for (double t = -t_max; t <= t_max + 1e-12; t += h) {
    const double s = std::numbers::pi * std::sinh(t);
    const double x = 1.0 / (1.0 + std::exp(-s));
    const double c = 1.0 / (1.0 + std::exp(s));
    const double ch = std::cosh(half_pi * std::sinh(t));
    const double w = h * half_pi * std::cosh(t) / (2.0 * ch * ch);
    if (x > 0.0 && c > 0.0 && w > 0.0) nodes.push_back(Node{x, c, w});
  }
  return nodes;
}

inline double log_dirichlet_density(std::span<const double> mu, std::span<const double> alpha) {
  double s = 0.0;
  double norm = 0.0;
  double body = 0.0;
  for (std::size_t k = 0; k < alpha.size(); ++k) {
    s += alpha[k];
    norm -= std::lgamma(alpha[k]);
    body += (alpha[k] - 1.0) * std::log(mu[k]);
  }
  return norm + std::lgamma(s) + body;
}

// KL(Dir(p) || Dir(q)) = E_p[ln p - ln q] by tanh-sinh quadrature over the
// simplex, K = 2 or 3.
inline double kl_quadrature(const std::vector<double>& p, const std::vector<double>& q) {
  const std::vector<Node> nodes = tanh_sinh01();
  auto integrand = [&](std::span<const double> mu) {
    const double lp = log_dirichlet_density(mu, p);
    return std::exp(lp) * (lp - log_dirichlet_density(mu, q));
  };
  double total = 0.0;
  if (p.size() == 2) {
    for (const auto& n : nodes) {
      const double mu[2] = {n.x, n.complement};
      total += n.weight * integrand(mu);
    }
  } else {
    for (const auto& a : nodes) {
      for (const auto& b : nodes) {
        const double mu[3] = {a.x, a.complement * b.x, a.complement * b.complement};
        total += a.weight * b.weight * a.complement * integrand(mu);
      }
    }
  }
  return total;
}

// Random opinion with uncertainty in [u_min, u_max]; beliefs split the
// remaining mass by normalised exponential draws.
inline Opinion random_opinion(std::mt19937_64& rng, std::size_t k, double u_min = 1e-3,
                              double u_max = 1.0) {
  std::uniform_real_distribution<double> uu(u_min, u_max);
  std::exponential_distribution<double> ex(1.0);
  const double u = uu(rng);
  std::vector<double> b(k);
  double sum = 0.0;
  for (double& x : b) sum += (x = ex(rng));
  for (double& x : b) x *= (1.0 - u) / sum;
  return Opinion(std::move(b), u);
}

inline BaseRate random_base_rate(std::mt19937_64& rng, std::size_t k, double weight = 0.0) {
  std::uniform_real_distribution<double> dist(0.05, 1.0);
  std::vector<double> a(k);
  double sum = 0.0;
  for (double& x : a) sum += (x = dist(rng));
  for (double& x : a) x /= sum;
  return BaseRate(std::move(a), weight > 0.0 ? weight : static_cast<double>(k));
}

inline std::vector<double> random_evidence(std::mt19937_64& rng, std::size_t k, double lo = 0.0,
                                           double hi = 20.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> e(k);
  for (double& x : e) x = dist(rng);
  return e;
}

// Textbook formulas written out longhand, used as fusion oracles.
struct RawOpinion {
  std::vector<double> b;
  double u;
};

inline RawOpinion raw(const Opinion& o) {
  return RawOpinion{std::vector<double>(o.beliefs().begin(), o.beliefs().end()), o.uncertainty()};
}

inline RawOpinion oracle_cbf(const RawOpinion& m, const RawOpinion& n) {
  const double den = m.u + n.u - m.u * n.u;
  RawOpinion r{std::vector<double>(m.b.size()), m.u * n.u / den};
  for (std::size_t k = 0; k < m.b.size(); ++k) r.b[k] = (m.b[k] * n.u + n.b[k] * m.u) / den;
  return r;
}

inline RawOpinion oracle_bcf(const RawOpinion& m, const RawOpinion& n) {
  double conflict = 0.0;
  for (std::size_t i = 0; i < m.b.size(); ++i) {
    for (std::size_t j = 0; j < n.b.size(); ++j) {
      if (i != j) conflict += m.b[i] * n.b[j];
    }
  }
  const double c = 1.0 - conflict;
  RawOpinion r{std::vector<double>(m.b.size()), m.u * n.u / c};
  for (std::size_t k = 0; k < m.b.size(); ++k) {
    r.b[k] = (m.b[k] * n.b[k] + m.b[k] * n.u + n.b[k] * m.u) / c;
  }
  return r;
}

// Argmax with the smallest index winning ties.
inline std::size_t argmax(std::span<const double> v) {
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

// A pair with equal uncertainty u whose BCF result should put its largest
// belief on `expected` = argmax_j b^m_j b^n_j. With b = (1 - u) d for belief
// directions d, the bound u < (b^m_k b^n_k - b^m_j b^n_j) / |b^m_j + b^n_j -
// b^m_k - b^n_k| becomes u < (1 - u) r with r = min_j A_j / B_j in direction
// terms, i.e. u < r / (1 + r). u is drawn strictly inside that range.
struct AgreementCase {
  RawOpinion m;
  RawOpinion n;
  std::size_t expected;
  double bound;
};

inline bool make_agreement_case(std::mt19937_64& rng, std::size_t k, AgreementCase& out) {
  std::exponential_distribution<double> ex(1.0);
  auto direction = [&] {
    std::vector<double> d(k);
    double sum = 0.0;
    for (double& x : d) sum += (x = ex(rng));
    for (double& x : d) x /= sum;
    return d;
  };
  const std::vector<double> dm = direction();
  const std::vector<double> dn = direction();
  std::vector<double> prod(k);
  for (std::size_t j = 0; j < k; ++j) prod[j] = dm[j] * dn[j];
  const std::size_t kt = argmax(prod);
  double r = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < k; ++j) {
    if (j == kt) continue;
    const double a = prod[kt] - prod[j];
    if (!(a > 1e-9)) return false;  // near tie in the product, no strict winner
    const double b = std::abs(dm[j] + dn[j] - dm[kt] - dn[kt]);
    if (b > 0.0) r = std::min(r, a / b);
  }
  const double bound = std::isinf(r) ? 1.0 : r / (1.0 + r);
  std::uniform_real_distribution<double> frac(0.0, 0.999);
  const double u = frac(rng) * bound;
  out.m = RawOpinion{dm, u};
  out.n = RawOpinion{dn, u};
  for (std::size_t j = 0; j < k; ++j) {
    out.m.b[j] *= 1.0 - u;
    out.n.b[j] *= 1.0 - u;
  }
  out.expected = kt;
  out.bound = bound;
  return true;
}

// Overall loss written directly on raw evidence numbers (no validation), so
// finite differences can step below zero evidence.
inline double overall_loss_raw(const std::vector<std::vector<double>>& ev, const BaseRate& a,
                        std::size_t label, const loss::LossConfig& cfg) {
  const double w = a.weight();
  std::vector<DirichletParams> alphas;
  std::vector<RawOpinion> ops;
  for (const auto& e : ev) {
    double s = w;
    for (double x : e) s += x;
    RawOpinion o{std::vector<double>(e.size()), w / s};
    std::vector<double> alpha(e.size());
    for (std::size_t k = 0; k < e.size(); ++k) {
      o.b[k] = e[k] / s;
      alpha[k] = e[k] + a[k] * w;
    }
    ops.push_back(o);
    alphas.emplace_back(alpha);
  }
  RawOpinion combined = ops.front();
  if (ops.size() > 1) {
    for (std::size_t v = 1; v + 1 < ops.size(); ++v) combined = oracle_cbf(combined, ops[v]);
    combined = oracle_bcf(combined, ops.back());
  }
  std::vector<double> ca(combined.b.size());
  for (std::size_t k = 0; k < ca.size(); ++k) ca[k] = combined.b[k] * w / combined.u + a[k] * w;
  return loss::overall_loss(alphas, DirichletParams(ca), label, cfg);
}

// Scratch directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("evfuse-test-" + std::to_string(rd()) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }
  const std::filesystem::path& path() const noexcept { return path_; }

 private:
  std::filesystem::path path_;
};

inline void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream(path, std::ios::binary) << text;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace evfuse::testing
