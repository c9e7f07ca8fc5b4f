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

#include <map>
#include <string>
#include <vector>

#include "gpff/gp.hpp"
#include "gpff/ilcbf.hpp"
#include "gpff/plant.hpp"
#include "gpff/trajectory.hpp"
#include "gpff/types.hpp"

namespace gpff {

/// Everything needed to run the pipeline: learn parameters on the training
/// positions, regress them over position, and compare feedforward policies on
/// the test positions. The master seed makes the whole run reproducible.
struct ExperimentPlan {
    // plant
    std::string plant_kind = "spatial_mass";
    double nominal_mass = 1.0;
    double damping = 0.0;
    double mass2 = 1.2;            ///< periodic_flux second axis
    double flux_amplitude = 0.08;  ///< periodic_flux actuator gain ripple
    double magnet_pitch = 0.25;    ///< spatial period of the gain ripple
    double sample_time = 1e-3;
    double noise_std = 1e-4;  ///< measurement noise during learning trials
    Vector domain_min;        ///< optional override of the plant position box
    Vector domain_max;

    // controller
    double bandwidth_hz = kDefaultBandwidthHz;
    double damping_ratio = kDefaultDampingRatio;

    // trajectory (per axis start/end, shared timing)
    Vector move_start;
    Vector move_end;
    double duration = 0.5;
    int order = 3;

    // feedforward basis per axis
    std::vector<std::vector<BasisDescriptor>> basis;

    // ilc
    int trials = 20;
    IlcWeights weights{};
    double trailing_fraction = 0.4;  ///< share of trailing trials averaged into the observation
    std::string nominal = "center";  ///< update-law model: "center" or "local"

    // gp
    GpFitConfig gp{};
    std::string gp_mean = "zero";  ///< "zero" (regress raw values) or "empirical" (center first)

    // positions
    Matrix training_positions;  ///< l x dim
    Matrix test_positions;      ///< l* x dim
    Vector center_position;     ///< empty = domain midpoint
    int prediction_grid = 181;  ///< samples per dimension for grid exports

    // evaluation
    double eval_noise_std = -1.0;  ///< -1 = use noise_std; 0 = noiseless
    std::uint64_t seed = 1;

    SpatialPlant make_plant() const;
    FeedbackController make_controller(const SpatialPlant& plant) const;
    Reference make_reference(const SpatialPlant& plant) const;
    Vector center(const SpatialPlant& plant) const;
    double evaluation_noise() const { return eval_noise_std < 0.0 ? noise_std : eval_noise_std; }

    /// Fills defaulted fields and checks positions against the plant domain.
    void finalize();
};

/// One flattened feedforward parameter (axis-major over the basis columns).
struct ParameterInfo {
    int axis;
    std::string basis_name;
    std::string label;  ///< "theta_1", "theta_2", ... (1-indexed)
};

std::vector<ParameterInfo> parameter_layout(const ExperimentPlan& plan);

struct SessionSummary {
    Vector position;
    int axis = 0;
    Vector theta_estimate;  ///< trailing-window mean for this axis
    Vector theta_variance;  ///< trailing-window sample variance per component
    double final_error_norm = 0.0;
    double initial_error_norm = 0.0;
    double basis_condition = 0.0;
    double final_theta_change = 0.0;
};

struct CollectResult {
    std::vector<TrainingSet> per_parameter;  ///< one training set per flattened parameter
    std::vector<SessionSummary> sessions;    ///< one per (training position, axis)
    /// Per-parameter estimator variance (trailing-window scatter averaged over
    /// positions); the GP fit uses it as a noise-variance floor.
    Vector observation_variances;
};

/// Runs one ILC session per training position (per axis) and assembles the
/// trailing-mean parameter observations. Sessions are seeded from the master
/// seed plus the position index and may run concurrently.
CollectResult collect_training_data(const ExperimentPlan& plan);

/// Fits one GP per parameter (marginal-likelihood optimization, seeded per
/// parameter from the plan's GP config).
std::vector<GpModel> fit_parameter_models(const std::vector<TrainingSet>& training,
                                          const GpFitConfig& config,
                                          const Vector& noise_floors = Vector(),
                                          std::vector<FitDiagnostics>* diagnostics = nullptr);

struct ParameterPrediction {
    Matrix mean;      ///< positions x parameters
    Matrix variance;  ///< positions x parameters
};

ParameterPrediction predict_parameters(const std::vector<GpModel>& models,
                                       const Eigen::Ref<const Matrix>& positions);

inline constexpr const char* kMethodCenter = "center";
inline constexpr const char* kMethodGp = "gp";
inline constexpr const char* kMethodLocalIlc = "local_ilc";

struct MethodResult {
    Vector theta;          ///< stacked parameters used
    double error_norm = 0.0;     ///< Frobenius norm over all axes
    double max_abs_error = 0.0;
    Matrix error;          ///< N x axes time series
};

struct PositionReport {
    Vector position;
    std::map<std::string, MethodResult> methods;
};

struct EvaluationReport {
    std::vector<std::string> methods;
    std::vector<PositionReport> positions;
    std::vector<SessionSummary> training_sessions;
    Vector center_theta;
    Vector center_position;
};

/// Evaluates the selected methods at every test position with one shared
/// seeded noise realization per position, so policies face identical
/// conditions. Methods default to all three.
EvaluationReport evaluate_methods(const ExperimentPlan& plan, const std::vector<GpModel>& models,
                                  const std::vector<std::string>& methods = {});

// Artifact writers (CSV/JSON formats documented in the CLI).
void write_training_csv(const std::string& path, const ExperimentPlan& plan,
                        const CollectResult& collected);

struct TrainingData {
    std::vector<TrainingSet> per_parameter;
    Vector observation_variances;
};

TrainingData read_training_csv(const std::string& path, const ExperimentPlan& plan);
void write_prediction_csv(const std::string& path, const ExperimentPlan& plan,
                          const Eigen::Ref<const Matrix>& positions,
                          const ParameterPrediction& prediction);
void write_summary_csv(const std::string& path, const EvaluationReport& report);
void write_report_json(const std::string& path, const EvaluationReport& report);

/// Uniform grid over the plant domain, `per_dim` points per dimension
/// (row-major cartesian product; 1D keeps its natural ordering).
Matrix domain_grid(const DomainBox& box, int per_dim);

}  // namespace gpff
