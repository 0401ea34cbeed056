#include "biloop/problems.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "biloop/errors.hpp"
#include "biloop/rng.hpp"

namespace biloop::problems {

namespace {

constexpr std::uint64_t kConstantsProbeSeed = 0x5eedc0de5eedc0deULL;

void require_exact_symmetry(const DenseMatrix& m, const char* name) {
  if (m.rows() != m.cols()) {
    throw ParameterError(std::string(name) + " must be square");
  }
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = i + 1; j < m.cols(); ++j) {
      if (m(i, j) != m(j, i)) {
        throw ParameterError(std::string(name) + " must be symmetric");
      }
    }
  }
}

// Spectral norm of the joint Hessian of g for the quadratic family,
//   [[0, -B^T], [-B, H]],
// assembled explicitly. This is the honest gradient-Lipschitz constant of
// g; max(lmax(H), ||B||) underestimates it whenever B != 0.
double quadratic_g_hessian_norm(const DenseMatrix& H, const DenseMatrix& B) {
  const std::size_t p = B.cols();
  const std::size_t q = B.rows();
  DenseMatrix joint(p + q, p + q, 0.0);
  for (std::size_t i = 0; i < q; ++i) {
    for (std::size_t j = 0; j < p; ++j) {
      joint(p + i, j) = -B(i, j);
      joint(j, p + i) = -B(i, j);
    }
  }
  for (std::size_t i = 0; i < q; ++i) {
    for (std::size_t j = 0; j < q; ++j) joint(p + i, p + j) = H(i, j);
  }
  const std::vector<double> eig = sym_eigenvalues(joint);
  return std::max(std::abs(eig.front()), std::abs(eig.back()));
}

DenseVector gaussian_vector(Xoshiro256& rng, std::size_t dim, double scale) {
  DenseVector v(dim);
  for (std::size_t i = 0; i < dim; ++i) v[i] = scale * rng.normal();
  return v;
}

// Random orthogonal matrix via Gram-Schmidt on a Gaussian matrix.
DenseMatrix random_orthogonal(Xoshiro256& rng, std::size_t n) {
  std::vector<DenseVector> cols;
  cols.reserve(n);
  while (cols.size() < n) {
    DenseVector v = gaussian_vector(rng, n, 1.0);
    for (const DenseVector& u : cols) axpy(-dot(v, u), u, v);
    const double len = norm(v);
    if (len < 1e-8) continue;  // retry on a degenerate draw
    cols.push_back((1.0 / len) * v);
  }
  DenseMatrix q(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t i = 0; i < n; ++i) q(i, j) = cols[j][i];
  }
  return q;
}

// Q diag(e) Q^T, symmetrized entry-for-entry.
DenseMatrix spd_from_spectrum(const DenseMatrix& q, const std::vector<double>& e) {
  const std::size_t n = q.rows();
  DenseMatrix m(n, n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < n; ++k) s += q(i, k) * e[k] * q(j, k);
      m(i, j) = s;
      m(j, i) = s;
    }
  }
  m.mark_symmetric();
  return m;
}

std::vector<double> log_spaced(double lo, double hi, std::size_t n) {
  std::vector<double> out(n);
  if (n == 1) {
    out[0] = hi;
    return out;
  }
  const double llo = std::log(lo);
  const double lhi = std::log(hi);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = std::exp(llo + (lhi - llo) * static_cast<double>(i) /
                                static_cast<double>(n - 1));
  }
  return out;
}

struct QuadraticData {
  DenseMatrix H, B, Bt, A;
  DenseVector c, d;
  CholeskyFactor chol_h;

  QuadraticData(DenseMatrix h, DenseMatrix b, DenseVector cc, DenseMatrix a,
                DenseVector dd)
      : H(std::move(h)),
        B(std::move(b)),
        Bt(transpose(B)),
        A(std::move(a)),
        c(std::move(cc)),
        d(std::move(dd)),
        chol_h(H) {}

  DenseVector y_star(const DenseVector& x) const {
    return chol_h.solve(matvec(B, x) - c);
  }
};

double stable_softplus(double t) {
  if (t > 30.0) return t;
  if (t < -30.0) return std::exp(t);
  return std::log1p(std::exp(t));
}

double logistic(double t) {
  if (t >= 0.0) {
    const double e = std::exp(-t);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(t);
  return e / (1.0 + e);
}

// Deterministic sampled estimates of the Lipschitz constants for problems
// whose joint Hessians vary with the iterate. Ratios are taken at random
// point pairs inside the calibration box and doubled; the probe invariants in
// the tests sample inside the same box.
struct SampledConstants {
  double L = 0.0;
  double rho = 0.0;
};

SampledConstants sample_lipschitz_constants(const BilevelOracle& oracle,
                                            double box_half_width,
                                            std::size_t num_pairs) {
  Xoshiro256 rng(kConstantsProbeSeed);
  const std::size_t p = oracle.dim_x;
  const std::size_t q = oracle.dim_y;
  auto draw = [&](std::size_t dim) {
    DenseVector v(dim);
    for (std::size_t i = 0; i < dim; ++i) {
      v[i] = rng.uniform(-box_half_width, box_half_width);
    }
    return v;
  };

  SampledConstants est;
  for (std::size_t s = 0; s < num_pairs; ++s) {
    const DenseVector x = draw(p), x2 = draw(p);
    const DenseVector y = draw(q), y2 = draw(q);
    DenseVector v = gaussian_vector(rng, q, 1.0);
    const double vn = norm(v);
    if (vn == 0.0) continue;
    v = (1.0 / vn) * v;

    const double dz = std::sqrt(norm_sq(x - x2) + norm_sq(y - y2));
    if (dz > 0.0) {
      const double df = std::sqrt(
          norm_sq(oracle.grad_x_f(x, y) - oracle.grad_x_f(x2, y2)) +
          norm_sq(oracle.grad_y_f(x, y) - oracle.grad_y_f(x2, y2)));
      const double dg = norm(oracle.grad_y_g(x, y) - oracle.grad_y_g(x2, y2));
      est.L = std::max(est.L, std::max(df, dg) / dz);

      const double dh = norm(oracle.hvp_yy_g(x, y, v) - oracle.hvp_yy_g(x2, y2, v));
      const double dj = norm(oracle.jvp_xy_g(x, y, v) - oracle.jvp_xy_g(x2, y2, v));
      est.rho = std::max(est.rho, std::max(dh, dj) / dz);
    }
    est.L = std::max(est.L, norm(oracle.hvp_yy_g(x, y, v)));
    est.L = std::max(est.L, norm(oracle.jvp_xy_g(x, y, v)));
  }
  est.L *= 2.0;
  est.rho *= 2.0;
  return est;
}

double sample_outer_gradient_bound(const BilevelOracle& oracle,
                                   double box_half_width, std::size_t num_points) {
  Xoshiro256 rng(kConstantsProbeSeed ^ 0xABCDULL);
  double worst = 0.0;
  for (std::size_t s = 0; s < num_points; ++s) {
    DenseVector x(oracle.dim_x);
    for (std::size_t i = 0; i < oracle.dim_x; ++i) {
      x[i] = rng.uniform(-box_half_width, box_half_width);
    }
    const DenseVector ys = oracle.exact.y_star(x);
    worst = std::max(worst, norm(oracle.grad_y_f(x, ys)));
  }
  return 2.0 * worst;
}

}  // namespace

BilevelOracle make_quadratic(const DenseMatrix& H, const DenseMatrix& B,
                             const DenseVector& c, const DenseMatrix& A,
                             const DenseVector& d) {
  require_exact_symmetry(H, "H");
  require_exact_symmetry(A, "A");
  const std::size_t q = H.rows();
  const std::size_t p = A.rows();
  if (B.rows() != q || B.cols() != p) {
    throw ParameterError("B must be dim_y x dim_x");
  }
  if (c.dim() != q || d.dim() != q) {
    throw ParameterError("c and d must have dim_y entries");
  }

  std::shared_ptr<const QuadraticData> data;
  try {
    data = std::make_shared<QuadraticData>(H, B, c, A, d);
  } catch (const SingularityError&) {
    throw ParameterError("H is not positive definite");
  }
  std::vector<double> h_eig = sym_eigenvalues(H);
  std::vector<double> a_eig = sym_eigenvalues(A);
  if (h_eig.front() <= 0.0) throw ParameterError("H is not positive definite");
  if (a_eig.front() <= 0.0) throw ParameterError("A is not positive definite");

  BilevelOracle oracle;
  oracle.dim_x = p;
  oracle.dim_y = q;
  oracle.f_value = [data](const DenseVector& x, const DenseVector& y) {
    return 0.5 * dot(x, matvec(data->A, x)) + 0.5 * norm_sq(y - data->d);
  };
  oracle.grad_x_f = [data](const DenseVector& x, const DenseVector&) {
    return matvec(data->A, x);
  };
  oracle.grad_y_f = [data](const DenseVector&, const DenseVector& y) {
    return y - data->d;
  };
  oracle.grad_y_g = [data](const DenseVector& x, const DenseVector& y) {
    return matvec(data->H, y) - matvec(data->B, x) + data->c;
  };
  oracle.hvp_yy_g = [data](const DenseVector&, const DenseVector&, const DenseVector& v) {
    return matvec(data->H, v);
  };
  oracle.jvp_xy_g = [data](const DenseVector&, const DenseVector&, const DenseVector& v) {
    return -1.0 * matvec(data->Bt, v);
  };

  // Joint Hessian of f is diag(A, I); of g it is [[0,-B^T],[-B,H]].
  oracle.constants.L =
      std::max({a_eig.back(), 1.0, quadratic_g_hessian_norm(H, B)});
  oracle.constants.mu = h_eig.front();
  oracle.constants.rho = 0.0;

  oracle.exact.y_star = [data](const DenseVector& x) { return data->y_star(x); };
  oracle.exact.v_star = [data](const DenseVector& x) {
    return data->chol_h.solve(data->y_star(x) - data->d);
  };
  oracle.exact.grad_phi = [data](const DenseVector& x) {
    const DenseVector vs = data->chol_h.solve(data->y_star(x) - data->d);
    return matvec(data->A, x) + matvec(data->Bt, vs);
  };

  // M bounds ||grad_y f(x, y*(x))||; sampled over the unit box and doubled.
  oracle.constants.M = sample_outer_gradient_bound(oracle, 1.0, 64);
  return oracle;
}

BilevelOracle make_seeded_quadratic(std::size_t dim_x, std::size_t dim_y,
                                    double kappa, std::uint64_t seed) {
  if (dim_x == 0 || dim_y == 0) throw ParameterError("dimensions must be positive");
  if (kappa < 1.0) throw ParameterError("kappa must be >= 1");

  Xoshiro256 rng(seed);
  const DenseMatrix q_h = random_orthogonal(rng, dim_y);
  const DenseMatrix q_a = random_orthogonal(rng, dim_x);

  DenseMatrix b(dim_y, dim_x);
  for (std::size_t i = 0; i < dim_y; ++i) {
    for (std::size_t j = 0; j < dim_x; ++j) b(i, j) = rng.normal();
  }
  const double b_norm = spectral_norm(b);
  const double b_target = 0.3;
  for (std::size_t i = 0; i < dim_y; ++i) {
    for (std::size_t j = 0; j < dim_x; ++j) b(i, j) *= b_target / b_norm;
  }

  const DenseMatrix a = spd_from_spectrum(q_a, log_spaced(0.5, 1.0, dim_x));
  const DenseVector c = gaussian_vector(rng, dim_y, 0.5);
  const DenseVector d = gaussian_vector(rng, dim_y, 0.5);

  // The gradient-Lipschitz constant L exceeds lmax(H) = 1 because of the B
  // coupling, so lmin(H) is retargeted until L / lmin(H) == kappa.
  double mu = 1.0 / kappa;
  DenseMatrix h = spd_from_spectrum(q_h, log_spaced(mu, 1.0, dim_y));
  for (int pass = 0; pass < 12; ++pass) {
    const double big =
        std::max({sym_eigenvalues(a).back(), 1.0, quadratic_g_hessian_norm(h, b)});
    const double mu_next = big / kappa;
    if (std::abs(mu_next - mu) <= 1e-14 * mu) break;
    mu = mu_next;
    h = spd_from_spectrum(q_h, log_spaced(mu, 1.0, dim_y));
  }
  return make_quadratic(h, b, c, a, d);
}

BilevelOracle make_lower_bound_instance(double L, double mu, double M) {
  if (!(mu > 0.0) || !(L >= mu)) {
    throw ParameterError("require 0 < mu <= L");
  }
  if (!(M >= 0.0)) {
    throw ParameterError("require M >= 0");
  }

  BilevelOracle oracle;
  oracle.dim_x = 2;
  oracle.dim_y = 2;
  const double z0 = L, z1 = mu;

  oracle.f_value = [=](const DenseVector& x, const DenseVector& y) {
    return 0.5 * (z0 * x[0] * x[0] + z1 * x[1] * x[1]) + M * (y[0] + y[1]);
  };
  oracle.grad_x_f = [=](const DenseVector& x, const DenseVector&) {
    return DenseVector{z0 * x[0], z1 * x[1]};
  };
  oracle.grad_y_f = [=](const DenseVector&, const DenseVector&) {
    return DenseVector{M, M};
  };
  oracle.grad_y_g = [=](const DenseVector& x, const DenseVector& y) {
    return DenseVector{z0 * y[0] - L * x[0] + 1.0, z1 * y[1] - L * x[1] + 1.0};
  };
  oracle.hvp_yy_g = [=](const DenseVector&, const DenseVector&, const DenseVector& v) {
    return DenseVector{z0 * v[0], z1 * v[1]};
  };
  oracle.jvp_xy_g = [=](const DenseVector&, const DenseVector&, const DenseVector& v) {
    return DenseVector{-L * v[0], -L * v[1]};
  };

  oracle.exact.y_star = [=](const DenseVector& x) {
    return DenseVector{(L * x[0] - 1.0) / z0, (L * x[1] - 1.0) / z1};
  };
  oracle.exact.v_star = [=](const DenseVector&) {
    return DenseVector{M / z0, M / z1};
  };
  oracle.exact.grad_phi = [=](const DenseVector& x) {
    return DenseVector{z0 * x[0] + L * M / z0, z1 * x[1] + L * M / z1};
  };

  // The joint Hessian of g is [[0,-L I],[-L I, Z]]; its norm is the honest
  // gradient-Lipschitz constant. The construction parameter L stays in the
  // closed forms above, exactly as it appears in the residual-floor formula.
  const double joint_top = 0.5 * (L + std::sqrt(L * L + 4.0 * L * L));
  const double joint_mu = 0.5 * (mu + std::sqrt(mu * mu + 4.0 * L * L));
  oracle.constants.L = std::max({L, joint_top, joint_mu});
  oracle.constants.mu = mu;
  oracle.constants.rho = 0.0;
  oracle.constants.M = M * std::sqrt(2.0);  // ||grad_y f|| = ||M 1||
  return oracle;
}

namespace {

struct HyperRepData {
  HyperRepresentationDims dims;
  double gamma;
  DenseMatrix x_train, x_val;
  DenseVector y_train, y_val;

  std::size_t p() const { return dims.features * dims.rep_dim; }
  std::size_t q() const { return dims.rep_dim; }

  DenseMatrix mat_lambda(const DenseVector& lambda) const {
    DenseMatrix m(dims.features, dims.rep_dim);
    for (std::size_t i = 0; i < dims.features; ++i) {
      for (std::size_t j = 0; j < dims.rep_dim; ++j) {
        m(i, j) = lambda[i * dims.rep_dim + j];
      }
    }
    return m;
  }

  // X * mat(lambda), the mapped feature matrix.
  DenseMatrix features_of(const DenseMatrix& x, const DenseVector& lambda) const {
    return matmul(x, mat_lambda(lambda));
  }

  // vec(X^T r w^T) scaled: the lambda-gradient building block.
  DenseVector outer_product_grad(const DenseMatrix& x, const DenseVector& r,
                                 const DenseVector& w, double scale) const {
    const DenseVector xtr = matvec_transposed(x, r);
    DenseVector out(p());
    for (std::size_t i = 0; i < dims.features; ++i) {
      for (std::size_t j = 0; j < dims.rep_dim; ++j) {
        out[i * dims.rep_dim + j] = scale * xtr[i] * w[j];
      }
    }
    return out;
  }

  DenseMatrix inner_hessian(const DenseVector& lambda) const {
    const DenseMatrix f = features_of(x_train, lambda);
    DenseMatrix m = matmul(transpose(f), f);
    const double inv_n = 1.0 / static_cast<double>(dims.train_rows);
    for (std::size_t i = 0; i < q(); ++i) {
      for (std::size_t j = 0; j < q(); ++j) m(i, j) *= inv_n;
      m(i, i) += gamma;
    }
    return m;
  }

  DenseVector ridge_solution(const DenseVector& lambda) const {
    const DenseMatrix f = features_of(x_train, lambda);
    const double inv_n = 1.0 / static_cast<double>(dims.train_rows);
    return solve_spd(inner_hessian(lambda), inv_n * matvec_transposed(f, y_train));
  }
};

BilevelOracle oracle_from_hyper_rep_data(std::shared_ptr<HyperRepData> data);

}  // namespace

BilevelOracle make_hyper_representation(const HyperRepresentationDims& dims,
                                        double gamma, std::uint64_t seed) {
  if (dims.train_rows == 0 || dims.val_rows == 0 || dims.features == 0 ||
      dims.rep_dim == 0) {
    throw ParameterError("hyper_representation dimensions must be positive");
  }
  if (!(gamma > 0.0)) throw ParameterError("gamma must be > 0");

  auto data = std::make_shared<HyperRepData>();
  data->dims = dims;
  data->gamma = gamma;

  // Seeded Gaussian design: features N(0,1)/sqrt(m), a planted linear map and
  // regressor, responses with sigma = 1e-3 Gaussian noise.
  Xoshiro256 rng(seed);
  const double feature_scale = 1.0 / std::sqrt(static_cast<double>(dims.features));
  auto fill_matrix = [&](std::size_t rows, std::size_t cols) {
    DenseMatrix m(rows, cols);
    for (std::size_t i = 0; i < rows; ++i) {
      for (std::size_t j = 0; j < cols; ++j) m(i, j) = feature_scale * rng.normal();
    }
    return m;
  };
  data->x_train = fill_matrix(dims.train_rows, dims.features);
  data->x_val = fill_matrix(dims.val_rows, dims.features);

  DenseMatrix planted_map(dims.features, dims.rep_dim);
  for (std::size_t i = 0; i < dims.features; ++i) {
    for (std::size_t j = 0; j < dims.rep_dim; ++j) planted_map(i, j) = rng.normal();
  }
  const DenseVector planted_w = gaussian_vector(rng, dims.rep_dim, 1.0);
  const double noise_sigma = 1e-3;
  auto responses = [&](const DenseMatrix& x) {
    DenseVector y = matvec(matmul(x, planted_map), planted_w);
    for (std::size_t i = 0; i < y.dim(); ++i) y[i] += noise_sigma * rng.normal();
    return y;
  };
  data->y_train = responses(data->x_train);
  data->y_val = responses(data->x_val);

  return oracle_from_hyper_rep_data(std::move(data));
}

BilevelOracle make_hyper_representation_from_data(const DenseMatrix& x_train,
                                                  const DenseVector& y_train,
                                                  const DenseMatrix& x_val,
                                                  const DenseVector& y_val,
                                                  std::size_t rep_dim, double gamma) {
  if (rep_dim == 0) throw ParameterError("rep_dim must be positive");
  if (!(gamma > 0.0)) throw ParameterError("gamma must be > 0");
  if (x_train.cols() != x_val.cols()) {
    throw ParameterError("train and validation features disagree");
  }
  if (x_train.rows() != y_train.dim() || x_val.rows() != y_val.dim()) {
    throw ParameterError("response vectors must match the data rows");
  }
  auto data = std::make_shared<HyperRepData>();
  data->dims.train_rows = x_train.rows();
  data->dims.val_rows = x_val.rows();
  data->dims.features = x_train.cols();
  data->dims.rep_dim = rep_dim;
  data->gamma = gamma;
  data->x_train = x_train;
  data->y_train = y_train;
  data->x_val = x_val;
  data->y_val = y_val;
  return oracle_from_hyper_rep_data(std::move(data));
}

namespace {

BilevelOracle oracle_from_hyper_rep_data(std::shared_ptr<HyperRepData> data) {
  const HyperRepresentationDims dims = data->dims;
  const double gamma = data->gamma;

  BilevelOracle oracle;
  oracle.dim_x = data->p();
  oracle.dim_y = data->q();

  const double inv_tr = 1.0 / static_cast<double>(dims.train_rows);
  const double inv_val = 1.0 / static_cast<double>(dims.val_rows);

  oracle.f_value = [data, inv_val](const DenseVector& lambda, const DenseVector& w) {
    const DenseVector r = matvec(data->features_of(data->x_val, lambda), w) - data->y_val;
    return 0.5 * inv_val * norm_sq(r);
  };
  oracle.grad_x_f = [data, inv_val](const DenseVector& lambda, const DenseVector& w) {
    const DenseVector r = matvec(data->features_of(data->x_val, lambda), w) - data->y_val;
    return data->outer_product_grad(data->x_val, r, w, inv_val);
  };
  oracle.grad_y_f = [data, inv_val](const DenseVector& lambda, const DenseVector& w) {
    const DenseMatrix f = data->features_of(data->x_val, lambda);
    return inv_val * matvec_transposed(f, matvec(f, w) - data->y_val);
  };
  oracle.grad_y_g = [data, inv_tr](const DenseVector& lambda, const DenseVector& w) {
    const DenseMatrix f = data->features_of(data->x_train, lambda);
    DenseVector g = inv_tr * matvec_transposed(f, matvec(f, w) - data->y_train);
    axpy(data->gamma, w, g);
    return g;
  };
  oracle.hvp_yy_g = [data, inv_tr](const DenseVector& lambda, const DenseVector&,
                                   const DenseVector& v) {
    const DenseMatrix f = data->features_of(data->x_train, lambda);
    DenseVector h = inv_tr * matvec_transposed(f, matvec(f, v));
    axpy(data->gamma, v, h);
    return h;
  };
  oracle.jvp_xy_g = [data, inv_tr](const DenseVector& lambda, const DenseVector& w,
                                   const DenseVector& v) {
    // d/dlambda <grad_w g, v> = 1/q_s vec(X^T r v^T + X^T (X Lambda v) w^T).
    const DenseMatrix f = data->features_of(data->x_train, lambda);
    const DenseVector r = matvec(f, w) - data->y_train;
    DenseVector out = data->outer_product_grad(data->x_train, r, v, inv_tr);
    const DenseVector fv = matvec(f, v);
    axpy(1.0, data->outer_product_grad(data->x_train, fv, w, inv_tr), out);
    return out;
  };

  oracle.exact.y_star = [data](const DenseVector& lambda) {
    return data->ridge_solution(lambda);
  };
  auto grad_y_f_copy = oracle.grad_y_f;
  oracle.exact.v_star = [data, grad_y_f_copy](const DenseVector& lambda) {
    const DenseVector ys = data->ridge_solution(lambda);
    return solve_spd(data->inner_hessian(lambda), grad_y_f_copy(lambda, ys));
  };
  auto grad_x_f_copy = oracle.grad_x_f;
  auto jvp_copy = oracle.jvp_xy_g;
  oracle.exact.grad_phi = [data, grad_x_f_copy, grad_y_f_copy,
                           jvp_copy](const DenseVector& lambda) {
    const DenseVector ys = data->ridge_solution(lambda);
    const DenseVector vs =
        solve_spd(data->inner_hessian(lambda), grad_y_f_copy(lambda, ys));
    return grad_x_f_copy(lambda, ys) - jvp_copy(lambda, ys, vs);
  };

  // Constants are calibrated over the region experiments traverse
  // (per-coordinate [-1.1, 1.1] for the representation entries).
  oracle.constants.mu = gamma;  // global: the Gram term is PSD for every lambda
  const SampledConstants lip = sample_lipschitz_constants(oracle, 1.1, 200);
  oracle.constants.L = std::max(lip.L, 2.0 * gamma);
  oracle.constants.rho = lip.rho;
  oracle.constants.M = sample_outer_gradient_bound(oracle, 1.1, 64);
  return oracle;
}

}  // namespace

namespace {

struct HyperCleanData {
  std::size_t n_train = 0, n_val = 0, features = 0;
  DenseMatrix x_all;          // train rows first, then validation rows
  std::vector<double> label;  // +-1

  double row_dot(std::size_t row, const DenseVector& w) const {
    double s = 0.0;
    for (std::size_t j = 0; j < features; ++j) s += x_all(row, j) * w[j];
    return s;
  }
};

}  // namespace

BilevelOracle make_hyper_cleaning(const HyperCleaningDims& dims, double noise_frac,
                                  std::uint64_t seed) {
  if (dims.samples == 0 || dims.features == 0) {
    throw ParameterError("hyper_cleaning dimensions must be positive");
  }
  if (!(noise_frac >= 0.0 && noise_frac < 0.5)) {
    throw ParameterError("noise_frac must lie in [0, 0.5)");
  }
  if (!(dims.train_fraction > 0.0 && dims.val_fraction > 0.0 &&
        dims.train_fraction + dims.val_fraction <= 1.0 + 1e-12)) {
    throw ParameterError("split fractions must be positive and sum to <= 1");
  }

  auto data = std::make_shared<HyperCleanData>();
  data->features = dims.features;
  data->n_train = std::max<std::size_t>(
      1, static_cast<std::size_t>(dims.train_fraction * static_cast<double>(dims.samples)));
  data->n_val = std::max<std::size_t>(1, dims.samples - data->n_train);

  Xoshiro256 rng(seed);
  const std::size_t n = data->n_train + data->n_val;
  data->x_all = DenseMatrix(n, dims.features);
  data->label.resize(n);
  const DenseVector w_true = gaussian_vector(rng, dims.features, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    double margin = 0.0;
    for (std::size_t j = 0; j < dims.features; ++j) {
      const double v = rng.normal();
      data->x_all(i, j) = v;
      margin += v * w_true[j];
    }
    margin += 0.3 * rng.normal();
    data->label[i] = margin >= 0.0 ? 1.0 : -1.0;
  }
  // Corrupt a fraction of the training labels.
  const auto n_flip =
      static_cast<std::size_t>(noise_frac * static_cast<double>(data->n_train));
  for (std::size_t k = 0; k < n_flip; ++k) {
    const std::size_t i = rng.next() % data->n_train;
    data->label[i] = -data->label[i];
  }

  BilevelOracle oracle;
  oracle.dim_x = 1;
  oracle.dim_y = dims.features;

  const std::size_t n_tr = data->n_train;
  const std::size_t n_val = data->n_val;

  auto mean_loss = [data](std::size_t begin, std::size_t end, const DenseVector& w) {
    double s = 0.0;
    for (std::size_t i = begin; i < end; ++i) {
      s += stable_softplus(-data->label[i] * data->row_dot(i, w));
    }
    return s / static_cast<double>(end - begin);
  };
  auto mean_grad = [data](std::size_t begin, std::size_t end, const DenseVector& w) {
    DenseVector g(data->features, 0.0);
    const double inv = 1.0 / static_cast<double>(end - begin);
    for (std::size_t i = begin; i < end; ++i) {
      const double l = data->label[i];
      const double s = logistic(-l * data->row_dot(i, w));
      const double coeff = -inv * l * s;
      for (std::size_t j = 0; j < data->features; ++j) g[j] += coeff * data->x_all(i, j);
    }
    return g;
  };

  oracle.f_value = [mean_loss, n_tr, n_val](const DenseVector&, const DenseVector& w) {
    return mean_loss(n_tr, n_tr + n_val, w);
  };
  oracle.grad_x_f = [](const DenseVector&, const DenseVector&) {
    return DenseVector{0.0};  // f does not depend on lambda directly
  };
  oracle.grad_y_f = [mean_grad, n_tr, n_val](const DenseVector&, const DenseVector& w) {
    return mean_grad(n_tr, n_tr + n_val, w);
  };
  oracle.grad_y_g = [mean_grad, n_tr](const DenseVector& lambda, const DenseVector& w) {
    DenseVector g = mean_grad(0, n_tr, w);
    axpy(stable_softplus(lambda[0]), w, g);
    return g;
  };
  oracle.hvp_yy_g = [data, n_tr](const DenseVector& lambda, const DenseVector& w,
                                 const DenseVector& v) {
    DenseVector h(data->features, 0.0);
    const double inv = 1.0 / static_cast<double>(n_tr);
    for (std::size_t i = 0; i < n_tr; ++i) {
      const double s = logistic(-data->label[i] * data->row_dot(i, w));
      const double coeff = inv * s * (1.0 - s) * data->row_dot(i, v);
      for (std::size_t j = 0; j < data->features; ++j) h[j] += coeff * data->x_all(i, j);
    }
    axpy(stable_softplus(lambda[0]), v, h);
    return h;
  };
  oracle.jvp_xy_g = [](const DenseVector& lambda, const DenseVector& w,
                       const DenseVector& v) {
    // d/dlambda grad_w g = softplus'(lambda) w.
    return DenseVector{logistic(lambda[0]) * dot(w, v)};
  };

  // Constants are calibrated over lambda in [-4, 4] and unit-box w. The
  // softplus reparameterization makes the effective ridge weight positive for
  // any real lambda, so mu = softplus(-4) is a valid curvature floor there.
  oracle.constants.mu = stable_softplus(-4.0);
  const SampledConstants lip = sample_lipschitz_constants(oracle, 2.0, 200);
  oracle.constants.L = std::max(lip.L, 1.0);
  oracle.constants.rho = lip.rho;

  // No closed-form y*; bound grad_y f at long-GD inner solutions instead.
  {
    Xoshiro256 probe_rng(kConstantsProbeSeed ^ 0x77ULL);
    double worst = 0.0;
    for (int s = 0; s < 8; ++s) {
      const DenseVector lambda{probe_rng.uniform(-3.0, 3.0)};
      DenseVector w(dims.features, 0.0);
      const double step = 1.0 / oracle.constants.L;
      for (int it = 0; it < 4000; ++it) {
        axpy(-step, oracle.grad_y_g(lambda, w), w);
      }
      worst = std::max(worst, norm(oracle.grad_y_f(lambda, w)));
    }
    oracle.constants.M = 2.0 * worst;
  }
  return oracle;
}

}  // namespace biloop::problems
