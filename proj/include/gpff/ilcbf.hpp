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

#include <optional>
#include <vector>

#include "gpff/lifted.hpp"
#include "gpff/plant.hpp"
#include "gpff/trajectory.hpp"
#include "gpff/types.hpp"

namespace gpff {

/// Scalar-times-identity weighting of the trial-domain criterion
///
///   V(theta_{j+1}) = ||e_{j+1}||^2_{We} + ||f_{j+1}||^2_{Wf} + ||f_{j+1}-f_j||^2_{Wdf}.
///
/// error > 0; effort and effort_change >= 0.
struct IlcWeights {
    double error = 1.0;
    double effort = 1e-8;
    double effort_change = 0.0;

    void validate() const;
};

/// Parameter update theta_{j+1} = learning * e_j + smoothing * theta_j, the
/// analytic minimizer of the quadratic criterion under the nominal model.
struct IlcUpdateLaw {
    Matrix learning;    ///< L, n_theta x N
    Matrix smoothing;   ///< Q, n_theta x n_theta
    Matrix quadratic;   ///< R, n_theta x n_theta (symmetric positive definite)
    double basis_condition = 0.0;  ///< condition number of the basis matrix
};

/// Builds L, Q, R from the basis and the lifted sensitivity and nominal plant.
/// The process path is composed as one causal operator (impulse convolution of
/// S and G0), which coincides with lifting the cascaded rational system.
///
/// Throws NumericalError when R is singular; with zero effort weights the
/// message advises regularizing via the effort weight.
IlcUpdateLaw build_update_law(const BasisMatrix& psi, const LiftedOperator& sensitivity,
                              const LiftedOperator& nominal_plant, const IlcWeights& weights);

Vector update_parameters(const IlcUpdateLaw& law, const Eigen::Ref<const Vector>& error,
                         const Eigen::Ref<const Vector>& theta);

/// Criterion value predicted by the nominal model for candidate parameters,
/// given the previous trial's measured error and parameters. `process` is the
/// lifted S*G0 path. Used for minimizer diagnostics.
double predicted_criterion(const LiftedOperator& process, const BasisMatrix& psi,
                           const IlcWeights& weights, const Eigen::Ref<const Vector>& prev_error,
                           const Eigen::Ref<const Vector>& prev_theta,
                           const Eigen::Ref<const Vector>& theta);

struct TrialRecord {
    Vector theta;
    Vector feedforward;
    Vector error;
    double error_norm = 0.0;
    double criterion = 0.0;
};

struct SessionConfig {
    int trials = 20;
    IlcWeights weights{};
    Vector theta0;  ///< empty = zero initialization (feedback-only first trial)
    std::uint64_t seed = 0;
    double noise_std = 0.0;
    int axis = 0;
    /// Model used to build the update law; defaults to the plant frozen at the
    /// session position (exact-model learning).
    std::optional<DiscreteTransferFunction> nominal_model;
};

/// Trial-indexed learning history at one fixed position. history[j] holds the
/// parameters applied in trial j and the error that trial measured; length is
/// trials + 1, so the last record shows the converged behaviour.
struct IlcSession {
    Vector position;
    int axis = 0;
    std::vector<TrialRecord> history;
    double basis_condition = 0.0;
    double final_theta_change = 0.0;  ///< relative parameter change at the last update

    const TrialRecord& final_trial() const { return history.back(); }

    /// Mean of theta over the trailing `fraction` of the updates (at least one
    /// record); the estimator fed to the GP stage.
    Vector trailing_mean_theta(double fraction) const;

    /// Per-component sample variance over the same trailing window (zero for a
    /// single record); a measured scale for the observation noise downstream.
    Vector trailing_variance_theta(double fraction) const;
};

IlcSession run_session(const SpatialPlant& plant, const Eigen::Ref<const Vector>& rho,
                       const FeedbackController& ctrl, const Reference& reference,
                       const BasisMatrix& psi, const SessionConfig& config);

/// Per-trial history, columns j,e_norm,criterion,theta_0... .
void write_session_csv(const std::string& path, const IlcSession& session);

/// Full history as JSON (schema_version field included).
void write_session_json(const std::string& path, const IlcSession& session);

}  // namespace gpff
