#include "sparse_rl/sparsereg.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>

namespace sparse_rl {

double soft_threshold(double v, double t) {
  if (v > t) return v - t;
  if (v < -t) return v + t;
  return 0.0;
}

double lasso_objective(const RegressionDataset& data, double lambda1, const Vec& w) {
  const int n = data.size();
  double sse = 0.0;
  for (int i = 0; i < n; ++i) {
    double r = data.targets[i] - dot(data.rows[i], w);
    sse += r * r;
  }
  return sse / n + lambda1 * l1_norm(w);
}

Vec lasso_gradient(const RegressionDataset& data, const Vec& w) {
  const int n = data.size();
  Vec g(data.dim, 0.0);
  for (int i = 0; i < n; ++i) {
    double r = data.targets[i] - dot(data.rows[i], w);
    const Vec& row = data.rows[i];
    for (int j = 0; j < data.dim; ++j) g[j] += row[j] * r;
  }
  for (double& v : g) v *= 2.0 / n;
  return g;
}

namespace {

LassoResult lasso_fit_residual(const RegressionDataset& data, const LassoConfig& cfg,
                               const Vec* warm_start) {
  const int n = data.size();
  const int d = data.dim;
  LassoResult res;
  res.w.assign(d, 0.0);

  Vec col_sq(d, 0.0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) col_sq[j] += data.rows[i][j] * data.rows[i][j];

  if (warm_start) {
    for (int j = 0; j < d; ++j) res.w[j] = col_sq[j] > 0.0 ? (*warm_start)[j] : 0.0;
  }

  Vec r = data.targets;
  for (int i = 0; i < n; ++i) {
    double pred = dot(data.rows[i], res.w);
    r[i] -= pred;
  }

  for (int sweep = 0; sweep < cfg.max_sweeps; ++sweep) {
    double max_change = 0.0;
    for (int j = 0; j < d; ++j) {
      if (col_sq[j] == 0.0) continue;
      double rho = 0.0;
      for (int i = 0; i < n; ++i) rho += data.rows[i][j] * r[i];
      double z = res.w[j] + rho / col_sq[j];
      double w_new = soft_threshold(z, n * cfg.lambda1 / (2.0 * col_sq[j]));
      double delta = w_new - res.w[j];
      if (delta != 0.0) {
        for (int i = 0; i < n; ++i) r[i] -= data.rows[i][j] * delta;
        res.w[j] = w_new;
      }
      max_change = std::max(max_change, std::fabs(delta));
    }
    res.sweeps = sweep + 1;
    double sse = l2_norm_sq(r);
    res.objective_history.push_back(sse / n + cfg.lambda1 * l1_norm(res.w));
    if (max_change <= cfg.tol) {
      res.converged = true;
      break;
    }
  }
  return res;
}

LassoResult lasso_fit_gram(const RegressionDataset& data, const LassoConfig& cfg,
                           const Vec* warm_start) {
  const int n = data.size();
  const int d = data.dim;
  LassoResult res;
  res.w.assign(d, 0.0);

  Matrix gram(d, d);
  Vec b(d, 0.0);
  double yy = 0.0;
  for (int i = 0; i < n; ++i) {
    const Vec& row = data.rows[i];
    double y = data.targets[i];
    yy += y * y;
    for (int j = 0; j < d; ++j) {
      if (row[j] == 0.0) continue;
      b[j] += row[j] * y;
      for (int k = j; k < d; ++k) gram(j, k) += row[j] * row[k];
    }
  }
  for (int j = 0; j < d; ++j)
    for (int k = 0; k < j; ++k) gram(j, k) = gram(k, j);

  if (warm_start) {
    for (int j = 0; j < d; ++j) res.w[j] = gram(j, j) > 0.0 ? (*warm_start)[j] : 0.0;
  }

  Vec q = matvec(gram, res.w);  // X^T X w, maintained incrementally

  for (int sweep = 0; sweep < cfg.max_sweeps; ++sweep) {
    double max_change = 0.0;
    for (int j = 0; j < d; ++j) {
      double gjj = gram(j, j);
      if (gjj == 0.0) continue;
      double z = res.w[j] + (b[j] - q[j]) / gjj;
      double w_new = soft_threshold(z, n * cfg.lambda1 / (2.0 * gjj));
      double delta = w_new - res.w[j];
      if (delta != 0.0) {
        for (int k = 0; k < d; ++k) q[k] += gram(k, j) * delta;
        res.w[j] = w_new;
      }
      max_change = std::max(max_change, std::fabs(delta));
    }
    res.sweeps = sweep + 1;
    double sse = yy - 2.0 * dot(b, res.w) + dot(res.w, q);
    res.objective_history.push_back(sse / n + cfg.lambda1 * l1_norm(res.w));
    if (max_change <= cfg.tol) {
      res.converged = true;
      break;
    }
  }
  return res;
}

}  // namespace

LassoResult lasso_fit(const RegressionDataset& data, const LassoConfig& cfg,
                      const Vec* warm_start) {
  if (data.size() < 1) throw std::invalid_argument("lasso_fit: empty dataset");
  if (cfg.lambda1 < 0.0) throw std::invalid_argument("lasso_fit: lambda1 must be nonnegative");
  if (cfg.tol <= 0.0) throw std::invalid_argument("lasso_fit: tolerance must be positive");
  if (data.targets.size() != data.rows.size())
    throw std::invalid_argument("lasso_fit: target count mismatch");
  for (double y : data.targets)
    if (!std::isfinite(y)) throw std::invalid_argument("lasso_fit: non-finite target");
  for (const Vec& row : data.rows)
    if (static_cast<int>(row.size()) != data.dim)
      throw std::invalid_argument("lasso_fit: row length mismatch");
  // Gram statistics win once the data is tall; the iterates solve the same
  // subproblems either way.
  if (data.size() >= 4 * data.dim && data.dim > 1) return lasso_fit_gram(data, cfg, warm_start);
  return lasso_fit_residual(data, cfg, warm_start);
}

Vec symmetric_eigenvalues(Matrix m) {
  if (m.rows != m.cols) throw std::invalid_argument("symmetric_eigenvalues: matrix not square");
  if (max_asymmetry(m) > 1e-10)
    throw std::invalid_argument("symmetric_eigenvalues: matrix is not symmetric");
  const int n = m.rows;
  // Exact symmetrization keeps the rotations clean.
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      double v = 0.5 * (m(i, j) + m(j, i));
      m(i, j) = v;
      m(j, i) = v;
    }
  if (n == 1) return {m(0, 0)};

  double scale = 0.0;
  for (int i = 0; i < n; ++i) scale = std::max(scale, std::fabs(m(i, i)));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) scale = std::max(scale, std::fabs(m(i, j)));
  const double stop = std::max(1e-300, scale) * 1e-15;

  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (int p = 0; p < n; ++p)
      for (int q = p + 1; q < n; ++q) off = std::max(off, std::fabs(m(p, q)));
    if (off <= stop) break;
    for (int p = 0; p < n; ++p) {
      for (int q = p + 1; q < n; ++q) {
        double apq = m(p, q);
        if (std::fabs(apq) <= stop * 1e-2) continue;
        double theta = (m(q, q) - m(p, p)) / (2.0 * apq);
        double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
        double c = 1.0 / std::sqrt(t * t + 1.0);
        double s = t * c;
        double app = m(p, p), aqq = m(q, q);
        m(p, p) = app - t * apq;
        m(q, q) = aqq + t * apq;
        m(p, q) = 0.0;
        m(q, p) = 0.0;
        for (int k = 0; k < n; ++k) {
          if (k == p || k == q) continue;
          double akp = m(k, p), akq = m(k, q);
          m(k, p) = c * akp - s * akq;
          m(p, k) = m(k, p);
          m(k, q) = s * akp + c * akq;
          m(q, k) = m(k, q);
        }
      }
    }
  }
  Vec eig(n);
  for (int i = 0; i < n; ++i) eig[i] = m(i, i);
  std::sort(eig.begin(), eig.end());
  return eig;
}

double min_eigenvalue(const Matrix& m) { return symmetric_eigenvalues(m).front(); }

namespace {

// Projection of v onto the l1 ball of radius r (Duchi et al. style).
void project_l1_ball(Vec& v, double r) {
  double norm = l1_norm(v);
  if (norm <= r) return;
  Vec mags(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) mags[i] = std::fabs(v[i]);
  std::sort(mags.begin(), mags.end(), std::greater<double>());
  double cum = 0.0, tau = 0.0;
  int rho = 0;
  for (std::size_t i = 0; i < mags.size(); ++i) {
    cum += mags[i];
    double candidate = (cum - r) / static_cast<double>(i + 1);
    if (mags[i] - candidate > 0.0) {
      rho = static_cast<int>(i + 1);
      tau = candidate;
    }
  }
  if (rho == 0) {
    std::fill(v.begin(), v.end(), 0.0);
    return;
  }
  for (double& x : v) x = soft_threshold(x, tau);
}

// Exact minimizer of b^T A b + 2 b^T c over the unit sphere, A symmetric of
// tiny dimension. Returns the minimizing b.
Vec sphere_quadratic_min(const Matrix& a, const Vec& c) {
  const int s = a.rows;
  Vec eig_diag;
  // Jacobi with eigenvectors for tiny s.
  Matrix m = a;
  Matrix v = Matrix::identity(s);
  for (int sweep = 0; sweep < 60; ++sweep) {
    double off = 0.0;
    for (int p = 0; p < s; ++p)
      for (int q = p + 1; q < s; ++q) off = std::max(off, std::fabs(m(p, q)));
    if (off <= 1e-15 * std::max(1.0, std::fabs(m(0, 0)))) break;
    for (int p = 0; p < s; ++p) {
      for (int q = p + 1; q < s; ++q) {
        double apq = m(p, q);
        if (std::fabs(apq) < 1e-18) continue;
        double theta = (m(q, q) - m(p, p)) / (2.0 * apq);
        double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
        double co = 1.0 / std::sqrt(t * t + 1.0);
        double si = t * co;
        double app = m(p, p), aqq = m(q, q);
        m(p, p) = app - t * apq;
        m(q, q) = aqq + t * apq;
        m(p, q) = m(q, p) = 0.0;
        for (int k = 0; k < s; ++k) {
          if (k != p && k != q) {
            double akp = m(k, p), akq = m(k, q);
            m(k, p) = m(p, k) = co * akp - si * akq;
            m(k, q) = m(q, k) = si * akp + co * akq;
          }
          double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = co * vkp - si * vkq;
          v(k, q) = si * vkp + co * vkq;
        }
      }
    }
  }
  std::vector<int> order(s);
  for (int i = 0; i < s; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](int i, int j) { return m(i, i) < m(j, j); });
  Vec lam(s);
  Matrix vs(s, s);
  for (int i = 0; i < s; ++i) {
    lam[i] = m(order[i], order[i]);
    for (int k = 0; k < s; ++k) vs(k, i) = v(k, order[i]);
  }
  Vec ct(s, 0.0);
  for (int i = 0; i < s; ++i)
    for (int k = 0; k < s; ++k) ct[i] += vs(k, i) * c[k];

  auto norm_at = [&](double mu) {
    double acc = 0.0;
    for (int i = 0; i < s; ++i) {
      double denom = lam[i] - mu;
      double u = ct[i] / denom;
      acc += u * u;
    }
    return acc;
  };

  Vec bt(s, 0.0);
  const double c_norm = std::sqrt(l2_norm_sq(ct));
  if (c_norm < 1e-14) {
    bt[0] = 1.0;  // pure eigenvector case
  } else if (std::fabs(ct[0]) < 1e-12 * std::max(1.0, c_norm)) {
    // Degenerate direction along the smallest eigenvalue: fill the residual
    // norm with the free component.
    double partial = 0.0;
    for (int i = 1; i < s; ++i) {
      double gap = lam[i] - lam[0];
      bt[i] = gap > 1e-14 ? -ct[i] / gap : 0.0;
      partial += bt[i] * bt[i];
    }
    if (partial <= 1.0) {
      bt[0] = std::sqrt(std::max(0.0, 1.0 - partial));
    } else {
      double scale = 1.0 / std::sqrt(partial);
      for (int i = 1; i < s; ++i) bt[i] *= scale;
    }
  } else {
    double hi = lam[0] - 1e-14 * std::max(1.0, std::fabs(lam[0]));
    double lo = lam[0] - c_norm - 1.0;
    while (norm_at(lo) > 1.0) lo = lam[0] - 2.0 * (lam[0] - lo);
    for (int it = 0; it < 200; ++it) {
      double mid = 0.5 * (lo + hi);
      if (norm_at(mid) > 1.0)
        hi = mid;
      else
        lo = mid;
    }
    double mu = 0.5 * (lo + hi);
    for (int i = 0; i < s; ++i) bt[i] = -ct[i] / (lam[i] - mu);
    double nrm = std::sqrt(l2_norm_sq(bt));
    if (nrm > 0.0)
      for (double& x : bt) x /= nrm;
  }

  Vec out(s, 0.0);
  for (int k = 0; k < s; ++k)
    for (int i = 0; i < s; ++i) out[k] += vs(k, i) * bt[i];
  return out;
}

double quadratic_form(const Matrix& m, const Vec& b) {
  double acc = 0.0;
  for (int i = 0; i < m.rows; ++i) {
    if (b[i] == 0.0) continue;
    double row = 0.0;
    for (int j = 0; j < m.cols; ++j) row += m(i, j) * b[j];
    acc += b[i] * row;
  }
  return acc;
}

// Cone probe for a fixed support: alternate an exact sphere step on the
// support block with projected coordinate descent on the complement.
double cone_value_for_support(const Matrix& m, const std::vector<int>& support) {
  const int d = m.rows;
  const int s = static_cast<int>(support.size());
  std::vector<char> in_support(d, 0);
  for (int j : support) in_support[j] = 1;
  std::vector<int> rest;
  rest.reserve(d - s);
  for (int j = 0; j < d; ++j)
    if (!in_support[j]) rest.push_back(j);

  Matrix a(s, s);
  for (int i = 0; i < s; ++i)
    for (int j = 0; j < s; ++j) a(i, j) = m(support[i], support[j]);

  Vec beta(d, 0.0);
  double best = std::numeric_limits<double>::infinity();
  for (int round = 0; round < 60; ++round) {
    // Support block: exact sphere minimization given the complement.
    Vec c(s, 0.0);
    for (int i = 0; i < s; ++i) {
      double acc = 0.0;
      for (int j : rest) acc += m(support[i], j) * beta[j];
      c[i] = acc;
    }
    Vec bs = sphere_quadratic_min(a, c);
    for (int i = 0; i < s; ++i) beta[support[i]] = bs[i];

    // Complement block: coordinate sweeps under the cone radius.
    double radius = 3.0 * l1_norm(bs);
    if (!rest.empty()) {
      for (int sweep = 0; sweep < 8; ++sweep) {
        for (int j : rest) {
          double mjj = m(j, j);
          if (mjj <= 0.0) {
            beta[j] = 0.0;
            continue;
          }
          double cross = 0.0;
          for (int k = 0; k < d; ++k)
            if (k != j) cross += m(j, k) * beta[k];
          beta[j] = -cross / mjj;
        }
        Vec block(rest.size());
        for (std::size_t t = 0; t < rest.size(); ++t) block[t] = beta[rest[t]];
        project_l1_ball(block, radius);
        for (std::size_t t = 0; t < rest.size(); ++t) beta[rest[t]] = block[t];
      }
    }

    double denom = 0.0;
    for (int j : support) denom += beta[j] * beta[j];
    if (denom <= 0.0) break;
    double value = quadratic_form(m, beta) / denom;
    if (best - value <= 1e-12 && round > 2) {
      best = std::min(best, value);
      break;
    }
    best = std::min(best, value);
  }
  return best;
}

void enumerate_supports(int d, int size, std::vector<std::vector<int>>& out) {
  std::vector<int> cur(size);
  auto rec = [&](auto&& self, int start, int depth) -> void {
    if (depth == size) {
      out.push_back(cur);
      return;
    }
    for (int j = start; j <= d - (size - depth); ++j) {
      cur[depth] = j;
      self(self, j + 1, depth + 1);
    }
  };
  if (size >= 1) rec(rec, 0, 0);
}

}  // namespace

ReInterval restricted_eigenvalue_estimate(const Matrix& m, int s, int search_budget,
                                          RngStream& rng, bool enumerate_small) {
  const int d = m.rows;
  if (s < 1 || s > d) throw std::invalid_argument("restricted_eigenvalue_estimate: bad s");
  ReInterval interval;
  interval.lower = min_eigenvalue(m);

  std::map<std::vector<int>, double> cache;
  auto probe_support = [&](const std::vector<int>& sup) {
    auto it = cache.find(sup);
    if (it != cache.end()) return it->second;
    double value = cone_value_for_support(m, sup);
    cache.emplace(sup, value);
    return value;
  };

  double upper = std::numeric_limits<double>::infinity();
  if (enumerate_small && d <= 12 && s <= 3) {
    std::vector<std::vector<int>> supports;
    for (int size = 1; size <= s; ++size) enumerate_supports(d, size, supports);
    for (const auto& sup : supports) upper = std::min(upper, probe_support(sup));
  }
  for (int probe = 0; probe < search_budget; ++probe) {
    int size = 1 + rng.next_below(s);
    std::vector<int> sup;
    while (static_cast<int>(sup.size()) < size) {
      int j = rng.next_below(d);
      if (std::find(sup.begin(), sup.end(), j) == sup.end()) sup.push_back(j);
    }
    std::sort(sup.begin(), sup.end());
    upper = std::min(upper, probe_support(sup));
  }
  if (!std::isfinite(upper)) upper = interval.lower;
  interval.upper = std::max(upper, interval.lower);
  return interval;
}

RegressionDataset load_dataset_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  RegressionDataset data;
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty dataset file " + path);
  // Header row: y,phi_1,...,phi_d
  int cols = static_cast<int>(std::count(line.begin(), line.end(), ',')) + 1;
  data.dim = cols - 1;
  if (data.dim < 1) throw std::runtime_error("dataset needs at least one feature column");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string cell;
    Vec row;
    row.reserve(data.dim);
    bool first = true;
    while (std::getline(ls, cell, ',')) {
      double v = std::stod(cell);
      if (first) {
        data.targets.push_back(v);
        first = false;
      } else {
        row.push_back(v);
      }
    }
    if (static_cast<int>(row.size()) != data.dim)
      throw std::runtime_error("dataset row width mismatch");
    data.rows.push_back(std::move(row));
  }
  return data;
}

}  // namespace sparse_rl
