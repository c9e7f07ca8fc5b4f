/*
 Copyright 2026 gpff contributors

 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

      https://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/
#pragma once

#include <Eigen/Cholesky>
#include <string>

#include "gpff/types.hpp"

namespace gpff {

/// Squared-exponential covariance with per-dimension (ARD) lengthscales:
///   k(a, b) = sigma_f^2 exp(-1/2 sum_d ((a_d - b_d)/l_d)^2).
struct Kernel {
    double signal_variance = 1.0;  ///< sigma_f^2
    Vector lengthscales;           ///< one per position dimension, > 0

    void validate() const;
};

double kernel_eval(const Kernel& kernel, const Eigen::Ref<const Vector>& a,
                   const Eigen::Ref<const Vector>& b);

/// Cross-covariance matrix between row-stacked position sets.
Matrix gram(const Kernel& kernel, const Eigen::Ref<const Matrix>& a,
            const Eigen::Ref<const Matrix>& b);

/// How the zero-mean GP assumption is reconciled with observations that sit
/// far from zero: either subtract the empirical mean and restore it on
/// prediction, or regress the raw values (the level is then explained by the
/// signal variance, which preserves the smoothness evidence of small sets).
enum class MeanHandling { empirical_mean, zero };

/// Observations of one feedforward parameter over training positions. Rows of
/// `positions` closer than `tol` are merged by averaging their values.
struct TrainingSet {
    Matrix positions;  ///< l x dim
    Vector values;     ///< l
    int merged_duplicates = 0;

    int size() const { return static_cast<int>(positions.rows()); }
    int dim() const { return static_cast<int>(positions.cols()); }

    static TrainingSet merged(Matrix positions, Vector values, double tol = 1e-9);
};

/// Log marginal likelihood of the centered observations and its gradient with
/// respect to the log-hyperparameters [log l_1..d, log sigma_f, log sigma_n].
struct LogMarginal {
    double value = 0.0;
    Vector gradient;
};

LogMarginal log_marginal_likelihood(const Kernel& kernel, double noise_variance,
                                    const TrainingSet& training,
                                    MeanHandling mean = MeanHandling::empirical_mean);

/// Exact GP regression model: caches the Cholesky factor of
/// K_y = K(P,P) + sigma_n^2 I (plus escalating jitter when needed) and
/// alpha = K_y^-1 (y - offset), where offset is the empirical mean of y.
class GpModel {
public:
    GpModel(Kernel kernel, double noise_variance, TrainingSet training,
            MeanHandling mean = MeanHandling::empirical_mean);

    const Kernel& kernel() const { return kernel_; }
    double noise_variance() const { return noise_variance_; }
    const TrainingSet& training() const { return training_; }
    double offset() const { return offset_; }
    double jitter() const { return jitter_; }
    const Vector& alpha() const { return alpha_; }
    MeanHandling mean_handling() const { return mean_; }

    struct Posterior {
        Vector mean;
        Matrix covariance;
        int clamped_diagonal = 0;  ///< diagonal entries clipped up to zero
    };

    /// Posterior mean and covariance at row-stacked test positions.
    Posterior posterior(const Eigen::Ref<const Matrix>& test_positions) const;

    /// Convenience: pointwise mean and variance only.
    void predict(const Eigen::Ref<const Matrix>& test_positions, Vector& mean,
                 Vector& variance) const;

    double log_marginal() const { return log_marginal_; }

private:
    Kernel kernel_;
    double noise_variance_;
    TrainingSet training_;
    MeanHandling mean_ = MeanHandling::empirical_mean;
    double offset_ = 0.0;
    double jitter_ = 0.0;
    double log_marginal_ = 0.0;
    Eigen::LLT<Matrix> llt_;
    Vector alpha_;
};

struct GpFitConfig {
    int restarts = 8;
    int max_iterations = 300;
    double gradient_tol = 1e-6;
    std::uint64_t seed = 0;
    MeanHandling mean = MeanHandling::empirical_mean;
    /// Known lower bound for the fitted noise variance, e.g. the measured
    /// variance of the upstream parameter estimator. 0 = numerical floor only.
    double noise_floor = 0.0;
};

struct FitDiagnostics {
    double log_marginal = 0.0;
    double gradient_norm = 0.0;
    int iterations = 0;
    bool converged = false;      ///< gradient tolerance reached before the cap
    bool single_point = false;   ///< l = 1: prior-like defaults were returned
};

/// Multi-start gradient ascent on the log marginal likelihood in
/// log-hyperparameter space (backtracking line search, seeded log-uniform
/// restarts). Returns the best candidate as a ready-to-query model.
GpModel fit_hyperparameters(const TrainingSet& training, const GpFitConfig& config = {},
                            FitDiagnostics* diagnostics = nullptr);

/// JSON persistence (schema_version field included).
void write_gp_model_json(const std::string& path, const GpModel& model,
                         const std::string& parameter_name = "");
GpModel read_gp_model_json(const std::string& path);

}  // namespace gpff
