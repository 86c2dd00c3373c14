#include "properties.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "nnlsgd/objective.hpp"
#include "nnlsgd/problem.hpp"
#include "nnlsgd/solvers.hpp"
#include "oracles.hpp"

namespace props {

namespace {

using nnlsgd::DenseMatrix;
using nnlsgd::Vector;

void track(Result& r, double value, double limit, const std::string& where) {
  if (!(value <= limit)) {
    if (r.ok) {
      std::ostringstream os;
      os << where << ": " << value << " > " << limit;
      r.detail = os.str();
    }
    r.ok = false;
  }
  if (std::isnan(value) || value > r.worst) r.worst = value;
}

}  // namespace

Result adjoint_identity(int trials, std::uint64_t seed) {
  Result r;
  oracle::Draw d(seed);
  for (int t = 0; t < trials; ++t) {
    const auto m = static_cast<std::size_t>(d.integer(1, 40));
    const auto n = static_cast<std::size_t>(d.integer(1, 40));
    const DenseMatrix A = d.matrix(m, n);
    const Vector x = d.normals(n), v = d.normals(m);
    const double lhs = nnlsgd::dot(nnlsgd::matvec(A, x), v);
    const double rhs = nnlsgd::dot(x, nnlsgd::matvec_t(A, v));
    double fro = 0.0;
    for (double a : A.data()) fro += a * a;
    const double scale = std::sqrt(fro) * nnlsgd::norm2(x) * nnlsgd::norm2(v);
    track(r, std::abs(lhs - rhs) / scale, 1e-12, "trial " + std::to_string(t));
  }
  return r;
}

Result gradient_matches_fd(int trials, std::uint64_t seed) {
  Result r;
  oracle::Draw d(seed);
  for (int t = 0; t < trials; ++t) {
    const int L = 2 + t % 3;
    const auto m = static_cast<std::size_t>(d.integer(2, 8));
    const auto n = static_cast<std::size_t>(d.integer(2, 8));
    const DenseMatrix A = d.matrix(m, n);
    const Vector y = d.normals(m);
    const Vector x = d.positives(n, 0.2, 1.5);
    const Vector fd = oracle::fd_gradient(
        [&](const Vector& z) { return oracle::reduced_loss(A, y, z, L); }, x);
    Vector g = nnlsgd::flow_field(A, y, x, L);
    for (double& v : g) v *= L;
    track(r, oracle::max_rel_diff(g, fd), 1e-5, "trial " + std::to_string(t));
  }
  return r;
}

Result hessian_matches_fd(int trials, std::uint64_t seed) {
  Result r;
  oracle::Draw d(seed);
  for (int t = 0; t < trials; ++t) {
    const int L = 2 + t % 3;
    const auto m = static_cast<std::size_t>(d.integer(2, 8));
    const auto n = static_cast<std::size_t>(d.integer(2, 8));
    const DenseMatrix A = d.matrix(m, n);
    const Vector y = d.normals(m);
    const Vector x = d.positives(n, 0.2, 1.5);
    const Eigen::MatrixXd J = oracle::fd_jacobian(
        [&](const Vector& z) {
          Vector g = nnlsgd::flow_field(A, y, z, L);
          for (double& v : g) v *= L;
          return g;
        },
        x);
    const Eigen::MatrixXd H = oracle::to_eigen(nnlsgd::reduced_hessian(A, y, x, L));
    const double scale = std::max(1e-12, J.cwiseAbs().maxCoeff());
    track(r, (H - J).cwiseAbs().maxCoeff() / scale, 1e-5,
          "fd trial " + std::to_string(t));
    const double hs = std::max(1e-300, H.cwiseAbs().maxCoeff());
    track(r, (H - H.transpose()).cwiseAbs().maxCoeff() / hs, 1e-12,
          "symmetry trial " + std::to_string(t));
  }
  return r;
}

Result bregman_nonnegative(int trials, std::uint64_t seed) {
  Result r;
  oracle::Draw d(seed);
  for (int t = 0; t < trials; ++t) {
    const int L = 2 + t % 4;
    const auto n = static_cast<std::size_t>(d.integer(1, 10));
    Vector p = d.positives(n, 0.0, 3.0);
    if (t % 5 == 0) p[0] = 0.0;  // boundary point
    const Vector q = d.positives(n, 0.05, 3.0);
    const double D = nnlsgd::bregman_divergence(p, q, L);
    const std::string where = "trial " + std::to_string(t);
    track(r, -D, 0.0, where + " (negativity)");
    const double ref = oracle::bregman_divergence(p, q, L);
    track(r, std::abs(D - ref) / std::max(1.0, std::abs(ref)), 1e-12,
          where + " (oracle)");
    track(r, std::abs(nnlsgd::bregman_divergence(q, q, L)), 1e-12,
          where + " (D(q, q))");
    if (D < 1e-12) {
      track(r, oracle::max_abs_diff(p, q), 1e-6, where + " (definiteness)");
    }
  }
  return r;
}

Result projection_inequalities(int trials, std::uint64_t seed) {
  Result r;
  oracle::Draw d(seed);
  for (int t = 0; t < trials; ++t) {
    const auto m = static_cast<std::size_t>(d.integer(1, 12));
    const Vector y = d.normals(m);
    Vector w = d.normals(m);
    for (double& v : w) v = std::abs(v) * (d.uniform(0.0, 1.0) < 0.3 ? 0.0 : 1.0);
    Vector py(m);
    for (std::size_t i = 0; i < m; ++i) py[i] = std::max(0.0, y[i]);
    double ip = 0.0, wpy = 0.0, wy = 0.0, ypy = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      ip += (w[i] - y[i]) * (w[i] - py[i]);
      wpy += (w[i] - py[i]) * (w[i] - py[i]);
      wy += (w[i] - y[i]) * (w[i] - y[i]);
      ypy += (y[i] - py[i]) * (y[i] - py[i]);
    }
    const double slack = 1e-12 * std::max(1.0, wy);
    const std::string where = "trial " + std::to_string(t);
    track(r, 0.5 * wpy - ip - slack, 0.0, where + " (first)");
    track(r, wpy - (wy - ypy) - slack, 0.0, where + " (second)");
  }
  return r;
}

Result factor_identity_preserved(int steps, std::uint64_t seed) {
  Result r;
  oracle::Draw d(seed);
  for (int L : {2, 3, 4}) {
    const DenseMatrix A = d.matrix(6, 8);
    const Vector y = d.normals(6);
    const double eta = 1e-2;
    Vector x(8, 0.5);
    std::vector<Vector> factors(static_cast<std::size_t>(L), x);
    for (int s = 0; s < steps; ++s) {
      const auto grads = nnlsgd::overparam_gradients(A, y, factors);
      for (std::size_t k = 0; k < factors.size(); ++k)
        for (std::size_t n = 0; n < x.size(); ++n) factors[k][n] -= eta * grads[k][n];
      const Vector g = nnlsgd::flow_field(A, y, x, L);
      for (std::size_t n = 0; n < x.size(); ++n) x[n] -= eta * g[n];
    }
    double dev = 0.0;
    for (const auto& f : factors) {
      dev = std::max(dev, oracle::max_abs_diff(f, factors[0]));
      dev = std::max(dev, oracle::max_abs_diff(f, x));
    }
    track(r, dev, 1e-12, "L = " + std::to_string(L));
  }
  return r;
}

Result pgd_iterates_nonnegative(int trials, std::uint64_t seed) {
  Result r;
  oracle::Draw d(seed);
  for (int t = 0; t < trials; ++t) {
    nnlsgd::NnlsProblem p;
    p.A = d.matrix(8, 12);
    p.y = d.normals(8);
    nnlsgd::PgdConfig cfg;
    cfg.max_iters = 2000;
    cfg.trace_every = 1;
    cfg.x0 = d.normals(12);
    if (t % 2 == 1) cfg.step_rule = nnlsgd::BarzilaiBorweinStep{1e-2};
    double worst_neg = 0.0;
    cfg.observer = [&](std::size_t, std::span<const double> x) {
      for (double v : x) worst_neg = std::max(worst_neg, -v);
    };
    const auto rep = nnlsgd::solve_pgd(p, cfg);
    for (double v : rep.x_final) worst_neg = std::max(worst_neg, -v);
    track(r, worst_neg, 0.0, "trial " + std::to_string(t));
  }
  return r;
}

Result lh_factors_stationary(int trials, std::uint64_t seed) {
  Result r;
  for (int t = 0; t < trials; ++t) {
    const std::uint64_t s = seed + static_cast<std::uint64_t>(t);
    nnlsgd::NnlsProblem p;
    p.A = nnlsgd::gen_gaussian_matrix(30, 50, s);
    oracle::Draw d(s);
    p.y = d.normals(30);  // generic y: x_+ has a nontrivial active set
    const auto rep = nnlsgd::solve_lawson_hanson(p);
    for (int L : {2, 3}) {
      Vector root(rep.x_final.size());
      for (std::size_t n = 0; n < root.size(); ++n)
        root[n] = std::pow(rep.x_final[n], 1.0 / L);
      const std::vector<Vector> factors(static_cast<std::size_t>(L), root);
      double sup = 0.0;
      for (const auto& g : nnlsgd::overparam_gradients(p.A, p.y, factors))
        sup = std::max(sup, nnlsgd::norm_inf(g));
      track(r, sup, 1e-8,
            "seed " + std::to_string(s) + " L = " + std::to_string(L));
    }
  }
  return r;
}

Result q_level_split_exact(int trials, std::uint64_t seed) {
  Result r;
  for (int t = 0; t < trials; ++t) {
    const std::uint64_t s = seed + static_cast<std::uint64_t>(t);
    const double q = static_cast<double>(t % 11) / 10.0;
    const Vector raw = nnlsgd::gen_sparse_nonneg(50, 1 + t % 10, s);
    const auto sig = nnlsgd::make_q_perturbed(raw, q, s);
    const std::string where = "seed " + std::to_string(s);
    track(r, std::abs(nnlsgd::norm2_sq(sig.x_plus) - (1.0 - q)), 1e-10, where);
    track(r, std::abs(nnlsgd::norm2_sq(sig.x_minus) - q), 1e-10, where);
    double overlap = 0.0, neg = 0.0, recon = 0.0;
    for (std::size_t n = 0; n < raw.size(); ++n) {
      if (sig.x_plus[n] != 0.0 && sig.x_minus[n] != 0.0) overlap = 1.0;
      neg = std::max({neg, -sig.x_plus[n], -sig.x_minus[n]});
      recon = std::max(recon,
                       std::abs(sig.x_true[n] - (sig.x_plus[n] - sig.x_minus[n])));
    }
    track(r, overlap, 0.0, where + " (disjoint supports)");
    track(r, neg, 0.0, where + " (nonnegativity)");
    track(r, recon, 0.0, where + " (x = x_plus - x_minus)");
  }
  return r;
}

Result weighted_init_exact(int trials, std::uint64_t seed) {
  Result r;
  oracle::Draw d(seed);
  for (int t = 0; t < trials; ++t) {
    const auto n = static_cast<std::size_t>(d.integer(1, 20));
    Vector w = d.positives(n, 0.01, 1.0);
    w[static_cast<std::size_t>(d.integer(0, static_cast<int>(n) - 1))] = 1.0;
    const double theta = d.uniform(0.1, 10.0);
    const Vector x0 = nnlsgd::weighted_init(w, theta);
    double dev = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double ref = std::exp(-0.5 * (1.0 + theta * w[i]));
      dev = std::max(dev, std::abs(x0[i] - ref) / ref);
    }
    track(r, dev, 1e-15, "trial " + std::to_string(t));
  }
  return r;
}

Result alpha_bound_spot_values(int trials, std::uint64_t seed) {
  Result r;
  track(r, std::abs(nnlsgd::alpha_bound(1.0, 1.0, 3, 2) - 1.0 / 6.0), 1e-15,
        "L = 3, Q = 1, N = 2, eps = 1");
  track(r, std::abs(nnlsgd::alpha_bound(0.0, std::exp(-1.0), 2, 1) - std::exp(-1.0)),
        1e-15, "L = 2, Q = 0, N = 1, eps = 1/e");
  track(r, std::abs(nnlsgd::alpha_bound(0.0, 1.0, 4, 1) - 0.5), 1e-15,
        "L = 4, Q = 0, N = 1, eps = 1");
  oracle::Draw d(seed);
  for (int t = 0; t < trials; ++t) {
    const double q = d.uniform(0.0, 10.0);
    const double eps = std::exp(d.uniform(-10.0, 5.0));
    const auto n = static_cast<std::size_t>(d.integer(1, 1000));
    track(r, nnlsgd::alpha_bound(q, eps, 2, n) - std::exp(-0.5), 0.0,
          "L = 2 cap, trial " + std::to_string(t));
  }
  return r;
}

std::vector<Named> standard_suite() {
  return {
      {"adjoint identity", [] { return adjoint_identity(1000, 11); }},
      {"gradient vs finite differences", [] { return gradient_matches_fd(60, 12); }},
      {"hessian vs finite differences", [] { return hessian_matches_fd(60, 13); }},
      {"bregman nonnegativity", [] { return bregman_nonnegative(2000, 14); }},
      {"projection inequalities", [] { return projection_inequalities(10000, 15); }},
      {"factor identity preservation", [] { return factor_identity_preserved(10000, 16); }},
      {"pgd nonnegativity", [] { return pgd_iterates_nonnegative(20, 17); }},
      {"lh factor stationarity", [] { return lh_factors_stationary(10, 18); }},
      {"q-level split exactness", [] { return q_level_split_exact(200, 19); }},
      {"weighted_init exactness", [] { return weighted_init_exact(200, 20); }},
      {"alpha_bound spot values", [] { return alpha_bound_spot_values(1000, 21); }},
  };
}

}  // namespace props
