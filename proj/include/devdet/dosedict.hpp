#pragma once
// Sparse dictionary over hard-fake features and the reconstruction-error
// driven dose. Objective over features Z (d x N) and codes A (K x N):
//   sum_i 1/2 ||z_i - D a_i||^2 + lambda ||a_i||_1,  ||d_k|| <= 1.
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "devdet/data.hpp"
#include "devdet/detector.hpp"

namespace devdet {

struct SparseCode {
  Eigen::VectorXd alpha;
  double objective = 0.0;
  int iterations = 0;
};

struct IstaOptions {
  double tolerance = 1e-9;  // stop when one step decreases the objective by less
  int max_iterations = 20000;
};

double soft_threshold(double v, double t);

// Largest eigenvalue of D^T D by power iteration.
double lipschitz_constant(const Eigen::MatrixXd& D);

double lasso_objective(const Eigen::MatrixXd& D, const Eigen::VectorXd& z, const Eigen::VectorXd& alpha, double lambda);

// ISTA with fixed step 1/L from alpha = 0, or from `warm_start` when given.
// Never returns an objective above that of alpha = 0. Throws NumericError on
// non-finite input.
SparseCode sparse_code(const Eigen::MatrixXd& D, const Eigen::VectorXd& z, double lambda, const IstaOptions& options = {},
                       const Eigen::VectorXd* warm_start = nullptr);

// argmin_D ||Z - D A||_F^2 through the normal equations with 1e-10 ridge.
// Atoms whose code row is all zero keep their column from `previous` (zero
// when absent); they do not affect the objective.
Eigen::MatrixXd least_squares_dictionary(const Eigen::MatrixXd& Z, const Eigen::MatrixXd& A,
                                         const Eigen::MatrixXd* previous = nullptr);
// Rescales every column with norm > 1 to unit norm.
void project_columns(Eigen::MatrixXd& D);

struct DictionaryUpdate {
  Eigen::MatrixXd D;
  bool degenerate = false;  // A was all zero; D returned unchanged
};

// Least squares followed by projection onto the unit-norm constraint.
DictionaryUpdate update_dictionary(const Eigen::MatrixXd& Z, const Eigen::MatrixXd& A, const Eigen::MatrixXd& previous);

double dictionary_objective(const Eigen::MatrixXd& Z, const Eigen::MatrixXd& D, const Eigen::MatrixXd& A, double lambda);

struct DoseDictModel {
  Eigen::MatrixXd D;  // d x K
  double lambda_l1 = 0.1;
  double calib_lo = 0.0;
  double calib_hi = 1.0;
  double feature_scale = 1.0;  // features are multiplied by this before coding
  std::string extractor_hash;  // parameter hash of the feature extractor
  std::string config_hash;

  int feature_dim() const { return static_cast<int>(D.rows()); }
  int num_atoms() const { return static_cast<int>(D.cols()); }
};

struct FitOptions {
  int max_rounds = 100;
  double tolerance = 1e-6;  // relative objective decrease
  double slack = 1e-9;      // allowed objective increase before declaring divergence
  IstaOptions ista;
};

struct FitLog {
  std::vector<double> objective;  // after every round
  int rounds = 0;
  bool converged = false;
  int fallback_rounds = 0;  // rounds whose projected least squares was replaced by projected gradient
  std::vector<std::string> warnings;
};

// Default atom count min(64, N/4), at least 1.
int default_num_atoms(std::size_t n);

// Alternating minimization on already-scaled features (columns of Z).
// Atoms start from distinct seeded samples. Throws NumericError when the
// objective rises by more than the slack.
DoseDictModel fit(const Eigen::MatrixXd& Z, int num_atoms, double lambda, std::uint64_t seed, const FitOptions& options = {},
                  FitLog* log = nullptr);

// 1 / mean column norm (1 when all columns are zero).
double unit_mean_norm_scale(const Eigen::MatrixXd& Z);

// ||s z - D alpha*(s z)|| with s = feature_scale.
double reconstruction_error(const DoseDictModel& model, const Eigen::VectorXd& z);

// Linear interpolation between order statistics, p in [0, 100].
double percentile(std::vector<double> values, double p);

// Sets calib_lo / calib_hi to the given percentiles of the reconstruction
// errors of the (unscaled) feature columns. Throws ContractError when they coincide.
void calibrate(DoseDictModel& model, const Eigen::MatrixXd& features, double lo_percentile = 5.0, double hi_percentile = 95.0);

// base_dose * clip((calib_hi - e) / (calib_hi - calib_lo), 0, 1).
double dose_for_error(const DoseDictModel& model, double error, double base_dose);
double adaptive_dose(const DoseDictModel& model, const Eigen::VectorXd& z, double base_dose);

// Features of every sample as columns.
Eigen::MatrixXd feature_matrix(const Detector& extractor, const SampleSet& set);
Eigen::VectorXd to_vector(const std::vector<double>& v);

// Header lines then the d x K matrix as column-major little-endian float64.
void write_dictionary(const std::string& path, const DoseDictModel& model);
DoseDictModel read_dictionary(const std::string& path);

}  // namespace devdet
