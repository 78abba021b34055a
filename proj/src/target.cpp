#include "snaper/target.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <memory>
#include <sstream>
#include <stdexcept>

#include "snaper/errors.hpp"
#include "snaper/rng.hpp"

namespace snaper {

namespace {

double softplus(double a) {
  return a > 0.0 ? a + std::log1p(std::exp(-a)) : std::log1p(std::exp(a));
}

double sigmoid(double a) {
  if (a >= 0.0) {
    return 1.0 / (1.0 + std::exp(-a));
  }
  const double e = std::exp(a);
  return e / (1.0 + e);
}

}  // namespace

double TargetModel::log_density(const Eigen::VectorXd& x) const {
  Eigen::VectorXd scratch(dim);
  return logp_grad(x, scratch);
}

void TargetModel::eval_batch(const Eigen::MatrixXd& positions,
                             Eigen::VectorXd& logp,
                             Eigen::MatrixXd& grad) const {
  if (logp_grad_batch) {
    logp_grad_batch(positions, logp, grad);
    return;
  }
  const Eigen::Index b = positions.cols();
  logp.resize(b);
  grad.resize(positions.rows(), b);
  Eigen::VectorXd g(positions.rows());
  for (Eigen::Index i = 0; i < b; ++i) {
    logp(i) = logp_grad(positions.col(i), g);
    grad.col(i) = g;
  }
}

Bijector softplus_bijector() {
  Bijector b;
  b.forward = [](double y) { return softplus(y); };
  b.inverse = [](double x) {
    if (!(x > 0.0)) {
      throw std::invalid_argument(
          "softplus inverse requires a positive argument");
    }
    // log(exp(x) - 1), kept stable on both ends.
    return x > 30.0 ? x + std::log1p(-std::exp(-x)) : std::log(std::expm1(x));
  };
  b.log_det_jacobian = [](double y) { return -softplus(-y); };
  b.forward_deriv = [](double y) { return sigmoid(y); };
  b.log_det_jacobian_deriv = [](double y) { return sigmoid(-y); };
  return b;
}

Bijector identity_bijector() {
  Bijector b;
  b.forward = [](double y) { return y; };
  b.inverse = [](double x) { return x; };
  b.log_det_jacobian = [](double) { return 0.0; };
  b.forward_deriv = [](double) { return 1.0; };
  b.log_det_jacobian_deriv = [](double) { return 0.0; };
  return b;
}

TargetModel make_diag_gaussian(const Eigen::VectorXd& scales) {
  if (scales.size() == 0) {
    throw std::invalid_argument("diag_gaussian: empty scale vector");
  }
  for (Eigen::Index d = 0; d < scales.size(); ++d) {
    if (!std::isfinite(scales(d)) || scales(d) <= 0.0) {
      throw std::invalid_argument(
          "diag_gaussian: scales must be positive and finite");
    }
  }
  auto inv_var = std::make_shared<Eigen::ArrayXd>(
      scales.array().square().inverse());

  TargetModel m;
  m.dim = static_cast<int>(scales.size());
  m.name = "diag_gaussian";
  m.logp_grad = [inv_var](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
    g = -(x.array() * (*inv_var)).matrix();
    return 0.5 * x.dot(g);
  };
  m.logp_grad_batch = [inv_var](const Eigen::MatrixXd& x, Eigen::VectorXd& lp,
                                Eigen::MatrixXd& g) {
    g = -(x.array().colwise() * (*inv_var)).matrix();
    lp = 0.5 * (x.array() * g.array()).colwise().sum().transpose();
  };
  m.reference_moments =
      ReferenceMoments{Eigen::VectorXd::Zero(scales.size()), scales};
  return m;
}

TargetModel make_logistic_regression(const Dataset& data, double prior_scale) {
  const Eigen::Index n = data.features.rows();
  const Eigen::Index f = data.features.cols();
  if (n == 0 || f == 0) {
    throw std::invalid_argument("logistic_regression: empty dataset");
  }
  if (data.labels.size() != n) {
    throw std::invalid_argument(
        "logistic_regression: label/feature row mismatch");
  }
  if (!std::isfinite(prior_scale) || prior_scale <= 0.0) {
    throw std::invalid_argument("logistic_regression: prior_scale must be > 0");
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    if (data.labels(i) != 0.0 && data.labels(i) != 1.0) {
      throw std::invalid_argument("logistic_regression: label outside {0,1}");
    }
  }

  struct Shared {
    Eigen::MatrixXd x;       // N x F
    Eigen::VectorXd sign;    // 2y - 1
    double prior_precision;  // 1 / prior_scale^2
  };
  auto s = std::make_shared<Shared>();
  s->x = data.features;
  s->sign = (2.0 * data.labels.array() - 1.0).matrix();
  s->prior_precision = 1.0 / (prior_scale * prior_scale);

  TargetModel m;
  m.dim = static_cast<int>(f);
  m.name = "logistic_regression";
  m.logp_grad = [s](const Eigen::VectorXd& theta, Eigen::VectorXd& g) {
    const Eigen::ArrayXd a = (s->x * theta).array() * s->sign.array();
    double lp = 0.0;
    for (Eigen::Index i = 0; i < a.size(); ++i) {
      lp -= softplus(-a(i));
    }
    Eigen::ArrayXd w(a.size());
    for (Eigen::Index i = 0; i < a.size(); ++i) {
      w(i) = sigmoid(-a(i)) * s->sign(i);
    }
    g = s->x.transpose() * w.matrix() - s->prior_precision * theta;
    lp -= 0.5 * s->prior_precision * theta.squaredNorm();
    return lp;
  };
  m.logp_grad_batch = [s](const Eigen::MatrixXd& theta, Eigen::VectorXd& lp,
                          Eigen::MatrixXd& g) {
    const Eigen::Index b = theta.cols();
    Eigen::MatrixXd a =
        ((s->x * theta).array().colwise() * s->sign.array()).matrix();
    lp.resize(b);
    Eigen::MatrixXd w(a.rows(), b);
    for (Eigen::Index j = 0; j < b; ++j) {
      double acc = 0.0;
      for (Eigen::Index i = 0; i < a.rows(); ++i) {
        acc -= softplus(-a(i, j));
        w(i, j) = sigmoid(-a(i, j)) * s->sign(i);
      }
      lp(j) = acc - 0.5 * s->prior_precision * theta.col(j).squaredNorm();
    }
    g = s->x.transpose() * w - s->prior_precision * theta;
  };
  return m;
}

TargetModel unconstrain(
    const TargetModel& model,
    const std::vector<std::optional<Bijector>>& transforms) {
  if (static_cast<int>(transforms.size()) != model.dim) {
    throw std::invalid_argument(
        "unconstrain: one (optional) transform per coordinate required");
  }
  auto inner = std::make_shared<TargetModel>(model);
  auto tf = std::make_shared<std::vector<std::optional<Bijector>>>(transforms);

  TargetModel m;
  m.dim = model.dim;
  m.name = model.name + "_unconstrained";
  m.logp_grad = [inner, tf](const Eigen::VectorXd& y, Eigen::VectorXd& g) {
    Eigen::VectorXd x = y;
    for (int d = 0; d < inner->dim; ++d) {
      if ((*tf)[d]) {
        x(d) = (*tf)[d]->forward(y(d));
      }
    }
    Eigen::VectorXd gx(inner->dim);
    double lp = inner->logp_grad(x, gx);
    g = gx;
    for (int d = 0; d < inner->dim; ++d) {
      if ((*tf)[d]) {
        lp += (*tf)[d]->log_det_jacobian(y(d));
        g(d) = gx(d) * (*tf)[d]->forward_deriv(y(d)) +
               (*tf)[d]->log_det_jacobian_deriv(y(d));
      }
    }
    return lp;
  };
  return m;
}

namespace {

bool parse_field(const std::string& tok, double& out) {
  const char* begin = tok.c_str();
  char* end = nullptr;
  out = std::strtod(begin, &end);
  if (end == begin) return false;
  while (*end != '\0') {
    if (!std::isspace(static_cast<unsigned char>(*end))) return false;
    ++end;
  }
  return std::isfinite(out);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

bool is_blank(const std::string& s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) {
    return std::isspace(c) || c == '\r';
  });
}

}  // namespace

Dataset load_csv_dataset(const std::string& path, bool standardize) {
  std::ifstream in(path);
  if (!in) {
    throw std::invalid_argument("cannot open CSV file: " + path);
  }

  std::vector<std::vector<double>> rows;
  std::string line;
  long line_no = 0;
  Eigen::Index n_cols = -1;
  bool first_content_row = true;

  while (std::getline(in, line)) {
    ++line_no;
    if (is_blank(line)) continue;
    const auto fields = split_csv_line(line);

    if (first_content_row) {
      // Header detection: a first row where no field parses as a number.
      bool any_numeric = false;
      double tmp;
      for (const auto& f : fields) {
        if (parse_field(f, tmp)) {
          any_numeric = true;
          break;
        }
      }
      first_content_row = false;
      if (!any_numeric) continue;  // header row
    }

    if (n_cols < 0) {
      n_cols = static_cast<Eigen::Index>(fields.size());
      if (n_cols < 2) {
        throw std::invalid_argument(
            "CSV needs at least one feature column plus the label column");
      }
    } else if (static_cast<Eigen::Index>(fields.size()) != n_cols) {
      throw RunError("CSV parse error at line " + std::to_string(line_no) +
                     ": expected " + std::to_string(n_cols) + " fields, got " +
                     std::to_string(fields.size()));
    }

    std::vector<double> row(fields.size());
    for (std::size_t c = 0; c < fields.size(); ++c) {
      if (!parse_field(fields[c], row[c])) {
        throw RunError("CSV parse error at line " + std::to_string(line_no) +
                       ", column " + std::to_string(c + 1) +
                       ": not a number: '" + fields[c] + "'");
      }
    }
    rows.push_back(std::move(row));
  }

  if (rows.empty()) {
    throw std::invalid_argument("CSV file has no data rows: " + path);
  }

  const Eigen::Index n = static_cast<Eigen::Index>(rows.size());
  const Eigen::Index f = n_cols - 1;
  Dataset data;
  data.features.resize(n, f);
  data.labels.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index c = 0; c < f; ++c) {
      data.features(i, c) = rows[i][c];
    }
    const double label = rows[i][f];
    if (label != 0.0 && label != 1.0) {
      throw std::invalid_argument("CSV label outside {0,1} in data row " +
                                  std::to_string(i + 1));
    }
    data.labels(i) = label;
  }

  data.column_means = data.features.colwise().mean();
  data.column_stds.resize(f);
  for (Eigen::Index c = 0; c < f; ++c) {
    const double var =
        (data.features.col(c).array() - data.column_means(c)).square().mean();
    data.column_stds(c) = std::sqrt(var);
  }
  if (standardize) {
    standardize_features(data);
  }
  return data;
}

void standardize_features(Dataset& data) {
  const Eigen::Index f = data.features.cols();
  data.column_means = data.features.colwise().mean();
  data.column_stds.resize(f);
  for (Eigen::Index c = 0; c < f; ++c) {
    const double mean = data.column_means(c);
    const double var = (data.features.col(c).array() - mean).square().mean();
    const double sd = std::sqrt(var);
    data.column_stds(c) = sd;
    if (sd == 0.0) {
      data.features.col(c).setZero();
    } else {
      data.features.col(c) = (data.features.col(c).array() - mean) / sd;
    }
  }
}

Eigen::VectorXd synthetic_logistic_truth(int dim, std::uint64_t seed,
                                         double theta_scale) {
  RngStream rng(stream_seed(seed, StreamKind::kData, 1));
  Eigen::VectorXd theta(dim);
  for (int d = 0; d < dim; ++d) {
    theta(d) = theta_scale * rng.normal();
  }
  return theta;
}

Dataset make_synthetic_logistic_data(int n, int dim, std::uint64_t seed,
                                     double theta_scale) {
  if (n <= 0 || dim <= 0) {
    throw std::invalid_argument("synthetic dataset needs n > 0 and dim > 0");
  }
  const Eigen::VectorXd theta = synthetic_logistic_truth(dim, seed, theta_scale);
  RngStream rng(stream_seed(seed, StreamKind::kData, 0));

  Dataset data;
  data.features.resize(n, dim);
  data.labels.resize(n);
  for (int i = 0; i < n; ++i) {
    for (int d = 0; d < dim; ++d) {
      data.features(i, d) = rng.normal();
    }
  }
  for (int i = 0; i < n; ++i) {
    const double p = sigmoid(data.features.row(i).dot(theta));
    data.labels(i) = rng.uniform01() < p ? 1.0 : 0.0;
  }
  data.column_means = data.features.colwise().mean();
  data.column_stds.resize(dim);
  for (int c = 0; c < dim; ++c) {
    const double var =
        (data.features.col(c).array() - data.column_means(c)).square().mean();
    data.column_stds(c) = std::sqrt(var);
  }
  return data;
}

}  // namespace snaper
