#include "devdet/dosedict.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "devdet/error.hpp"
#include "devdet/rng.hpp"

namespace devdet {

namespace {

// Power iteration on a symmetric positive semidefinite matrix.
double largest_eigenvalue(const Eigen::MatrixXd& m) {
  const Eigen::Index n = m.rows();
  if (n == 0) return 0.0;
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = 1.0 + 0.1 * static_cast<double>(i);
  v.normalize();
  double lambda = 0.0;
  for (int it = 0; it < 1000; ++it) {
    Eigen::VectorXd w = m * v;
    const double next = v.dot(w);
    const double norm = w.norm();
    if (norm == 0.0) return 0.0;
    v = w / norm;
    if (std::abs(next - lambda) <= 1e-13 * std::abs(next)) return next;
    lambda = next;
  }
  return lambda;
}

bool finite(const Eigen::MatrixXd& m) { return m.allFinite(); }

}  // namespace

double soft_threshold(double v, double t) {
  if (v > t) return v - t;
  if (v < -t) return v + t;
  return 0.0;
}

double lipschitz_constant(const Eigen::MatrixXd& D) { return largest_eigenvalue(D.transpose() * D); }

double lasso_objective(const Eigen::MatrixXd& D, const Eigen::VectorXd& z, const Eigen::VectorXd& alpha, double lambda) {
  return 0.5 * (z - D * alpha).squaredNorm() + lambda * alpha.lpNorm<1>();
}

SparseCode sparse_code(const Eigen::MatrixXd& D, const Eigen::VectorXd& z, double lambda, const IstaOptions& options,
                       const Eigen::VectorXd* warm_start) {
  if (!finite(D) || !z.allFinite() || !std::isfinite(lambda)) throw NumericError("sparse_code: non-finite input");
  if (z.size() != D.rows()) throw ContractError("sparse_code: feature length does not match dictionary rows");
  const Eigen::Index k = D.cols();
  SparseCode out;
  out.alpha = Eigen::VectorXd::Zero(k);
  const double zero_objective = lasso_objective(D, z, out.alpha, lambda);
  if (warm_start) {
    if (warm_start->size() != k) throw ContractError("sparse_code: warm start has the wrong length");
    out.alpha = *warm_start;
  }
  out.objective = lasso_objective(D, z, out.alpha, lambda);

  // A small margin over the power-iteration estimate keeps every step a descent step.
  const double L = lipschitz_constant(D) * (1.0 + 1e-9);
  if (L > 0.0) {
    const Eigen::MatrixXd gram = D.transpose() * D;
    const Eigen::VectorXd dtz = D.transpose() * z;
    const double step = 1.0 / L;
    Eigen::VectorXd next(k);
    for (int it = 0; it < options.max_iterations; ++it) {
      const Eigen::VectorXd grad = gram * out.alpha - dtz;
      for (Eigen::Index j = 0; j < k; ++j) next[j] = soft_threshold(out.alpha[j] - step * grad[j], step * lambda);
      const double obj = lasso_objective(D, z, next, lambda);
      out.iterations = it + 1;
      const double decrease = out.objective - obj;
      if (decrease < 0.0) break;  // rounding noise at the optimum
      out.alpha = next;
      out.objective = obj;
      if (decrease < options.tolerance) break;
    }
  }
  if (out.objective > zero_objective) {
    out.alpha.setZero();
    out.objective = zero_objective;
  }
  return out;
}

Eigen::MatrixXd least_squares_dictionary(const Eigen::MatrixXd& Z, const Eigen::MatrixXd& A, const Eigen::MatrixXd* previous) {
  if (Z.cols() != A.cols()) throw ContractError("update_dictionary: Z and A disagree on the sample count");
  const Eigen::Index k = A.rows();
  Eigen::MatrixXd gram = A * A.transpose();
  gram.diagonal().array() += 1e-10;
  // D gram = Z A^T, solved for D^T with a symmetric factorization.
  Eigen::MatrixXd D = gram.ldlt().solve((Z * A.transpose()).transpose()).transpose();
  for (Eigen::Index j = 0; j < k; ++j) {
    if (A.row(j).cwiseAbs().maxCoeff() != 0.0) continue;
    if (previous)
      D.col(j) = previous->col(j);
    else
      D.col(j).setZero();
  }
  return D;
}

void project_columns(Eigen::MatrixXd& D) {
  for (Eigen::Index j = 0; j < D.cols(); ++j) {
    const double n = D.col(j).norm();
    if (n > 1.0) D.col(j) /= n;
  }
}

DictionaryUpdate update_dictionary(const Eigen::MatrixXd& Z, const Eigen::MatrixXd& A, const Eigen::MatrixXd& previous) {
  DictionaryUpdate out;
  if (A.size() == 0 || A.cwiseAbs().maxCoeff() == 0.0) {
    out.D = previous;
    out.degenerate = true;
    return out;
  }
  out.D = least_squares_dictionary(Z, A, &previous);
  project_columns(out.D);
  return out;
}

double dictionary_objective(const Eigen::MatrixXd& Z, const Eigen::MatrixXd& D, const Eigen::MatrixXd& A, double lambda) {
  return 0.5 * (Z - D * A).squaredNorm() + lambda * A.cwiseAbs().sum();
}

int default_num_atoms(std::size_t n) { return std::max(1, static_cast<int>(std::min<std::size_t>(64, n / 4))); }

double unit_mean_norm_scale(const Eigen::MatrixXd& Z) {
  if (Z.cols() == 0) return 1.0;
  const double mean = Z.colwise().norm().mean();
  return mean > 0.0 ? 1.0 / mean : 1.0;
}

namespace {

// Projected gradient on 1/2 ||Z - D A||^2 from a feasible D; monotone with step 1/lambda_max(A A^T).
Eigen::MatrixXd projected_gradient(const Eigen::MatrixXd& Z, const Eigen::MatrixXd& A, Eigen::MatrixXd D) {
  const Eigen::MatrixXd gram = A * A.transpose();
  const double L = largest_eigenvalue(gram) * (1.0 + 1e-9);
  if (L <= 0.0) return D;
  const Eigen::MatrixXd za = Z * A.transpose();
  double f = 0.5 * (Z - D * A).squaredNorm();
  for (int it = 0; it < 500; ++it) {
    Eigen::MatrixXd next = D - (D * gram - za) / L;
    project_columns(next);
    const double g = 0.5 * (Z - next * A).squaredNorm();
    if (g > f) break;
    D = std::move(next);
    const bool small = f - g <= 1e-12 * std::max(1.0, f);
    f = g;
    if (small) break;
  }
  return D;
}

}  // namespace

DoseDictModel fit(const Eigen::MatrixXd& Z, int num_atoms, double lambda, std::uint64_t seed, const FitOptions& options,
                  FitLog* log) {
  if (num_atoms < 1) throw ContractError("fit: num_atoms must be >= 1");
  if (!(lambda >= 0.0)) throw ContractError("fit: lambda must be >= 0");
  if (Z.cols() == 0 || Z.rows() == 0) throw ContractError("fit: no features");
  if (!finite(Z)) throw NumericError("fit: non-finite features");
  FitLog local;
  FitLog& L = log ? *log : local;
  L = FitLog{};
  const Eigen::Index d = Z.rows(), n = Z.cols(), k = num_atoms;
  if (n < k) L.warnings.push_back("fewer features (" + std::to_string(n) + ") than atoms (" + std::to_string(k) + ")");

  // Initial atoms: distinct seeded samples, unit norm; random directions when samples run out or vanish.
  Rng rng(seed);
  std::vector<std::size_t> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(std::span<std::size_t>(order));
  Eigen::MatrixXd D(d, k);
  for (Eigen::Index j = 0; j < k; ++j) {
    Eigen::VectorXd col = Eigen::VectorXd::Zero(d);
    if (j < n) col = Z.col(static_cast<Eigen::Index>(order[static_cast<std::size_t>(j)]));
    if (col.norm() == 0.0)
      for (Eigen::Index i = 0; i < d; ++i) col[i] = rng.normal();
    D.col(j) = col / col.norm();
  }

  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(k, n);
  double prev = dictionary_objective(Z, D, A, lambda);
  for (int round = 0; round < options.max_rounds; ++round) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const Eigen::VectorXd warm = A.col(i);
      A.col(i) = sparse_code(D, Z.col(i), lambda, options.ista, &warm).alpha;
    }
    const double after_codes = dictionary_objective(Z, D, A, lambda);
    DictionaryUpdate upd = update_dictionary(Z, A, D);
    double obj = dictionary_objective(Z, upd.D, A, lambda);
    if (upd.degenerate) L.warnings.push_back("round " + std::to_string(round + 1) + ": all codes are zero");
    if (obj > after_codes) {
      // Projecting the unconstrained least-squares solution can overshoot; fall back to a monotone projected gradient.
      upd.D = projected_gradient(Z, A, D);
      obj = dictionary_objective(Z, upd.D, A, lambda);
      ++L.fallback_rounds;
    }
    D = std::move(upd.D);
    L.objective.push_back(obj);
    L.rounds = round + 1;
    if (!std::isfinite(obj)) throw NumericError("dictionary fit: non-finite objective in round " + std::to_string(round + 1));
    if (obj > prev + options.slack) {
      char buf[160];
      std::snprintf(buf, sizeof buf, "dictionary fit diverged in round %d: objective %.17g > %.17g", round + 1, obj, prev);
      throw NumericError(buf);
    }
    const double rel = (prev - obj) / std::max(std::abs(prev), 1e-300);
    prev = obj;
    if (round > 0 && rel < options.tolerance) {
      L.converged = true;
      break;
    }
  }

  DoseDictModel model;
  model.D = std::move(D);
  model.lambda_l1 = lambda;
  return model;
}

double reconstruction_error(const DoseDictModel& model, const Eigen::VectorXd& z) {
  const Eigen::VectorXd zs = z * model.feature_scale;
  const SparseCode code = sparse_code(model.D, zs, model.lambda_l1);
  return (zs - model.D * code.alpha).norm();
}

double percentile(std::vector<double> values, double p) {
  if (values.empty()) throw ContractError("percentile of an empty set");
  if (!(p >= 0.0 && p <= 100.0)) throw ContractError("percentile must lie in [0, 100]");
  std::sort(values.begin(), values.end());
  const double pos = p / 100.0 * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

void calibrate(DoseDictModel& model, const Eigen::MatrixXd& features, double lo_percentile, double hi_percentile) {
  if (!(lo_percentile < hi_percentile)) throw ContractError("calibration percentiles must satisfy lo < hi");
  std::vector<double> errors;
  errors.reserve(static_cast<std::size_t>(features.cols()));
  for (Eigen::Index i = 0; i < features.cols(); ++i) errors.push_back(reconstruction_error(model, features.col(i)));
  model.calib_lo = percentile(errors, lo_percentile);
  model.calib_hi = percentile(errors, hi_percentile);
  if (!(model.calib_lo < model.calib_hi))
    throw ContractError("calibration errors are degenerate (lo = hi = " + std::to_string(model.calib_lo) + ")");
}

double dose_for_error(const DoseDictModel& model, double error, double base_dose) {
  const double t = (model.calib_hi - error) / (model.calib_hi - model.calib_lo);
  return base_dose * std::clamp(t, 0.0, 1.0);
}

double adaptive_dose(const DoseDictModel& model, const Eigen::VectorXd& z, double base_dose) {
  return dose_for_error(model, reconstruction_error(model, z), base_dose);
}

Eigen::VectorXd to_vector(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

Eigen::MatrixXd feature_matrix(const Detector& extractor, const SampleSet& set) {
  Eigen::MatrixXd Z(static_cast<Eigen::Index>(extractor.feature_dim()), static_cast<Eigen::Index>(set.size()));
  for (std::size_t i = 0; i < set.size(); ++i) Z.col(static_cast<Eigen::Index>(i)) = to_vector(extractor.predict(*set.samples[i].image).feature);
  return Z;
}

namespace {

constexpr const char* kDictMagic = "DEVDET-DOSEDICT 1";

std::string g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void write_dictionary(const std::string& path, const DoseDictModel& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << kDictMagic << '\n'
      << "feature_dim " << m.feature_dim() << '\n'
      << "num_atoms " << m.num_atoms() << '\n'
      << "lambda_l1 " << g17(m.lambda_l1) << '\n'
      << "calib_lo " << g17(m.calib_lo) << '\n'
      << "calib_hi " << g17(m.calib_hi) << '\n'
      << "feature_scale " << g17(m.feature_scale) << '\n'
      << "extractor_hash " << (m.extractor_hash.empty() ? "-" : m.extractor_hash) << '\n'
      << "config_hash " << (m.config_hash.empty() ? "-" : m.config_hash) << '\n'
      << "end_header\n";
  std::vector<unsigned char> bytes(static_cast<std::size_t>(m.D.size()) * 8);
  for (Eigen::Index i = 0; i < m.D.size(); ++i) {
    const auto u = std::bit_cast<std::uint64_t>(m.D.data()[i]);
    for (int b = 0; b < 8; ++b) bytes[static_cast<std::size_t>(i) * 8 + b] = static_cast<unsigned char>((u >> (8 * b)) & 0xffu);
  }
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing " + path);
}

DoseDictModel read_dictionary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read dictionary " + path);
  std::string line;
  if (!std::getline(in, line) || line != kDictMagic) throw LoadError(path + ": not a dictionary file");
  DoseDictModel m;
  long long d = -1, k = -1;
  bool done = false;
  while (std::getline(in, line)) {
    if (line == "end_header") {
      done = true;
      break;
    }
    const auto sp = line.find(' ');
    const std::string key = line.substr(0, sp), val = sp == std::string::npos ? "" : line.substr(sp + 1);
    try {
      if (key == "feature_dim") d = std::stoll(val);
      else if (key == "num_atoms") k = std::stoll(val);
      else if (key == "lambda_l1") m.lambda_l1 = std::stod(val);
      else if (key == "calib_lo") m.calib_lo = std::stod(val);
      else if (key == "calib_hi") m.calib_hi = std::stod(val);
      else if (key == "feature_scale") m.feature_scale = std::stod(val);
      else if (key == "extractor_hash") m.extractor_hash = val == "-" ? "" : val;
      else if (key == "config_hash") m.config_hash = val == "-" ? "" : val;
      else throw LoadError(path + ": unknown header key '" + key + "'");
    } catch (const LoadError&) {
      throw;
    } catch (const std::exception&) {
      throw LoadError(path + ": bad header line '" + line + "'");
    }
  }
  if (!done || d < 1 || k < 1) throw LoadError(path + ": incomplete dictionary header");
  m.D.resize(d, k);
  std::vector<unsigned char> bytes(static_cast<std::size_t>(d * k) * 8);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (static_cast<std::size_t>(in.gcount()) != bytes.size()) throw LoadError(path + ": truncated dictionary payload");
  if (in.peek() != std::char_traits<char>::eof()) throw LoadError(path + ": trailing bytes after dictionary");
  for (Eigen::Index i = 0; i < m.D.size(); ++i) {
    std::uint64_t u = 0;
    for (int b = 0; b < 8; ++b) u |= static_cast<std::uint64_t>(bytes[static_cast<std::size_t>(i) * 8 + b]) << (8 * b);
    m.D.data()[i] = std::bit_cast<double>(u);
  }
  return m;
}

}  // namespace devdet
