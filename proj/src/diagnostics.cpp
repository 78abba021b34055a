#include "snaper/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "snaper/errors.hpp"

namespace snaper {

void Trace::append(const Eigen::MatrixXd& positions) {
  for (long b = 0; b < n_chains; ++b) {
    for (int d = 0; d < dim; ++d) {
      data.push_back(positions(d, b));
    }
  }
  ++n_draws;
}

Eigen::MatrixXd Trace::series_dim(int d) const {
  Eigen::MatrixXd out(n_draws, n_chains);
  for (long t = 0; t < n_draws; ++t) {
    for (long b = 0; b < n_chains; ++b) {
      out(t, b) = at(t, b, d);
    }
  }
  return out;
}

Eigen::MatrixXd Trace::series_square(int d, double mu_d) const {
  Eigen::MatrixXd out(n_draws, n_chains);
  for (long t = 0; t < n_draws; ++t) {
    for (long b = 0; b < n_chains; ++b) {
      const double z = at(t, b, d) - mu_d;
      out(t, b) = z * z;
    }
  }
  return out;
}

Eigen::VectorXd Trace::grand_means() const {
  Eigen::VectorXd mu = Eigen::VectorXd::Zero(dim);
  for (long t = 0; t < n_draws; ++t) {
    for (long b = 0; b < n_chains; ++b) {
      for (int d = 0; d < dim; ++d) {
        mu(d) += at(t, b, d);
      }
    }
  }
  return mu / static_cast<double>(n_draws * n_chains);
}

Eigen::VectorXd autocorrelation(const Eigen::VectorXd& series, int max_lag) {
  const Eigen::Index t = series.size();
  if (t < 4) {
    throw std::invalid_argument("autocorrelation needs at least 4 samples");
  }
  max_lag = std::min<int>(max_lag, static_cast<int>(t) - 1);
  const Eigen::VectorXd centered = series.array() - series.mean();
  const double var0 = centered.squaredNorm() / static_cast<double>(t);
  if (!(var0 > 0.0)) {
    throw DegenerateSeriesError("autocorrelation: zero-variance series");
  }
  Eigen::VectorXd rho(max_lag + 1);
  rho(0) = 1.0;
  for (int l = 1; l <= max_lag; ++l) {
    const double cov =
        centered.head(t - l).dot(centered.tail(t - l)) / static_cast<double>(t);
    rho(l) = cov / var0;
  }
  return rho;
}

namespace {

constexpr int kMaxEssLag = 4096;
constexpr double kSuperEfficiencyCap = 4.0;

struct PooledSeries {
  Eigen::MatrixXd centered;  // about the grand mean
  double var0 = 0.0;         // pooled (within + between) variance
  long t = 0;
  long b = 0;

  double rho(int lag) const {
    if (lag == 0) return 1.0;
    if (lag >= t) return 0.0;
    double acc = 0.0;
    for (long j = 0; j < b; ++j) {
      acc += centered.col(j).head(t - lag).dot(centered.col(j).tail(t - lag));
    }
    return acc / (static_cast<double>(t) * static_cast<double>(b) * var0);
  }
};

PooledSeries pool(const Eigen::MatrixXd& series) {
  PooledSeries p;
  p.t = series.rows();
  p.b = series.cols();
  if (p.t < 4 || p.b < 1) {
    throw std::invalid_argument("ess needs T >= 4 and at least one chain");
  }
  p.centered = series.array() - series.mean();
  p.var0 = p.centered.squaredNorm() / static_cast<double>(p.t * p.b);
  if (!(p.var0 > 0.0)) {
    throw DegenerateSeriesError("ess: zero-variance series");
  }
  return p;
}

}  // namespace

double ess(const Eigen::MatrixXd& series) {
  const PooledSeries p = pool(series);
  const double n_total = static_cast<double>(p.t * p.b);
  const int cap = std::min<long>(kMaxEssLag, p.t - 1);

  // Initial positive sequence: accumulate pairs (rho(2k), rho(2k+1)) while
  // they stay positive. The first pair contains rho(0), so antithetic chains
  // can drive the integrated time below 1.
  double tau_int = -1.0;
  for (int k = 0;; ++k) {
    const int l0 = 2 * k;
    const int l1 = 2 * k + 1;
    if (l0 > cap) break;
    const double pair = p.rho(l0) + (l1 <= cap ? p.rho(l1) : 0.0);
    if (!(pair > 0.0)) break;
    tau_int += 2.0 * pair;
    if (l1 >= cap) break;
  }
  tau_int = std::max(tau_int, 1.0 / kSuperEfficiencyCap);
  return std::min(n_total / tau_int, kSuperEfficiencyCap * n_total);
}

double lag1_autocorrelation(const Eigen::MatrixXd& series) {
  return pool(series).rho(1);
}

double ess_max_from_lag1(double n_total, double rho1) {
  if (rho1 <= -1.0) {
    rho1 = -1.0 + 1e-6;
  }
  if (rho1 >= 1.0) {
    rho1 = 1.0 - 1e-12;
  }
  return n_total * (1.0 - rho1) / (1.0 + rho1);
}

double ess_max(const Eigen::MatrixXd& series) {
  const double n_total =
      static_cast<double>(series.rows()) * static_cast<double>(series.cols());
  return ess_max_from_lag1(n_total, lag1_autocorrelation(series));
}

double split_rhat(const Eigen::MatrixXd& series) {
  const long t = series.rows();
  const long b = series.cols();
  if (b < 2 || t < 4) {
    throw std::invalid_argument("split_rhat needs B >= 2 and T >= 4");
  }
  const long half = t / 2;
  const long m = 2 * b;

  Eigen::VectorXd means(m);
  Eigen::VectorXd vars(m);
  for (long j = 0; j < b; ++j) {
    for (int piece = 0; piece < 2; ++piece) {
      const auto seg = series.col(j).segment(piece * half, half);
      const double mean = seg.mean();
      means(2 * j + piece) = mean;
      vars(2 * j + piece) =
          (seg.array() - mean).square().sum() / static_cast<double>(half - 1);
    }
  }

  const double w = vars.mean();
  const double grand = means.mean();
  const double between =
      static_cast<double>(half) *
      (means.array() - grand).square().sum() / static_cast<double>(m - 1);

  if (!(w > 0.0) && !(between > 0.0)) {
    throw DegenerateSeriesError("split_rhat: all half-chains constant");
  }
  const double n = static_cast<double>(half);
  const double v_hat = (n - 1.0) / n * w + between / n;
  return std::sqrt(v_hat / std::max(w, 1e-300));
}

double trace_esjd(const Eigen::MatrixXd& series) {
  const long t = series.rows();
  const long b = series.cols();
  if (t < 2) {
    throw std::invalid_argument("trace_esjd needs at least 2 draws");
  }
  double acc = 0.0;
  for (long j = 0; j < b; ++j) {
    acc += (series.col(j).tail(t - 1) - series.col(j).head(t - 1))
               .squaredNorm();
  }
  return acc / static_cast<double>((t - 1) * b);
}

MinEss min_ess_over_squares(const Trace& trace, const Eigen::VectorXd& mu) {
  if (mu.size() != trace.dim) {
    throw std::invalid_argument("min_ess_over_squares: center size mismatch");
  }
  MinEss out;
  out.per_dim.resize(trace.dim);
  for (int d = 0; d < trace.dim; ++d) {
    out.per_dim(d) = ess(trace.series_square(d, mu(d)));
  }
  out.value = out.per_dim.minCoeff(&out.argmin_dim);
  return out;
}

Eigen::VectorXd rhat_per_dim(const Trace& trace) {
  Eigen::VectorXd out(trace.dim);
  for (int d = 0; d < trace.dim; ++d) {
    out(d) = split_rhat(trace.series_dim(d));
  }
  return out;
}

Eigen::VectorXd trace_principal_component(const Trace& trace) {
  const Eigen::VectorXd mu = trace.grand_means();
  const long n = trace.n_draws * trace.n_chains;
  const long block = std::min<long>(n, 2048);

  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(trace.dim, trace.dim);
  Eigen::MatrixXd z(trace.dim, block);
  long filled = 0;
  for (long t = 0; t < trace.n_draws; ++t) {
    for (long b = 0; b < trace.n_chains; ++b) {
      for (int d = 0; d < trace.dim; ++d) {
        z(d, filled) = trace.at(t, b, d) - mu(d);
      }
      if (++filled == block) {
        cov.selfadjointView<Eigen::Lower>().rankUpdate(z);
        filled = 0;
      }
    }
  }
  if (filled > 0) {
    cov.selfadjointView<Eigen::Lower>().rankUpdate(z.leftCols(filled));
  }
  cov /= static_cast<double>(n);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(
      cov.selfadjointView<Eigen::Lower>().toDenseMatrix());
  return solver.eigenvectors().col(trace.dim - 1);
}

}  // namespace snaper
