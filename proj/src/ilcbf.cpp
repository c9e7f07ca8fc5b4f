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
#include "gpff/ilcbf.hpp"

#include <Eigen/Cholesky>
#include <Eigen/SVD>
#include <cmath>

#include "gpff/csv.hpp"
#include "json.hpp"

#include <fstream>

namespace gpff {

void IlcWeights::validate() const {
    if (!(error > 0.0)) throw ConfigError("error weight must be positive definite (w_e > 0)");
    if (effort < 0.0 || effort_change < 0.0)
        throw ConfigError("effort weights must be positive semidefinite (w_f, w_df >= 0)");
}

IlcUpdateLaw build_update_law(const BasisMatrix& psi, const LiftedOperator& sensitivity,
                              const LiftedOperator& nominal_plant, const IlcWeights& weights) {
    weights.validate();
    const int n = psi.trial_length();
    if (sensitivity.trial_length() != n || nominal_plant.trial_length() != n)
        throw ConfigError("basis and lifted operators disagree on trial length");

    const LiftedOperator process = sensitivity.compose(nominal_plant);

    const Eigen::Index n_theta = psi.columns.cols();
    Matrix process_psi(n, n_theta);
    for (Eigen::Index i = 0; i < n_theta; ++i)
        process_psi.col(i) = process.apply(psi.columns.col(i));

    Eigen::JacobiSVD<Matrix> svd(psi.columns);
    const double sv_min = svd.singularValues().minCoeff();
    const double sv_max = svd.singularValues().maxCoeff();
    const double condition = sv_min > 0.0 ? sv_max / sv_min : std::numeric_limits<double>::infinity();

    const Matrix data_term = weights.error * (process_psi.transpose() * process_psi);
    const Matrix basis_gram = psi.columns.transpose() * psi.columns;

    IlcUpdateLaw law;
    law.basis_condition = condition;
    law.quadratic = data_term + (weights.effort + weights.effort_change) * basis_gram;
    law.quadratic = 0.5 * (law.quadratic + law.quadratic.transpose()).eval();

    Eigen::LLT<Matrix> llt(law.quadratic);
    const bool singular_basis = !(sv_min > sv_max * 1e-14);
    if (llt.info() != Eigen::Success || (singular_basis && weights.effort == 0.0 &&
                                         weights.effort_change == 0.0)) {
        if (weights.effort == 0.0 && weights.effort_change == 0.0)
            throw NumericalError("R is singular: basis matrix is rank deficient (condition " +
                                 std::to_string(condition) +
                                 "); regularize by increasing the effort weight w_f");
        throw NumericalError("failed to factorize the ILC normal matrix R");
    }

    law.learning = llt.solve(weights.error * process_psi.transpose());
    law.smoothing = llt.solve(data_term + weights.effort_change * basis_gram);
    return law;
}

Vector update_parameters(const IlcUpdateLaw& law, const Eigen::Ref<const Vector>& error,
                         const Eigen::Ref<const Vector>& theta) {
    if (error.size() != law.learning.cols() || theta.size() != law.learning.rows())
        throw ConfigError("update law dimension mismatch");
    return law.learning * error + law.smoothing * theta;
}

double predicted_criterion(const LiftedOperator& process, const BasisMatrix& psi,
                           const IlcWeights& weights, const Eigen::Ref<const Vector>& prev_error,
                           const Eigen::Ref<const Vector>& prev_theta,
                           const Eigen::Ref<const Vector>& theta) {
    const Vector delta_f = psi.columns * (theta - prev_theta);
    const Vector predicted_error = prev_error - process.apply(delta_f);
    const Vector feedforward = psi.columns * theta;
    return weights.error * predicted_error.squaredNorm() +
           weights.effort * feedforward.squaredNorm() +
           weights.effort_change * delta_f.squaredNorm();
}

namespace {

int trailing_count(double fraction, size_t records) {
    const int updates = static_cast<int>(records) - 1;
    int count = std::max(1, static_cast<int>(std::llround(fraction * updates)));
    return std::min(count, static_cast<int>(records));
}

}  // namespace

Vector IlcSession::trailing_mean_theta(double fraction) const {
    const int count = trailing_count(fraction, history.size());
    Vector mean = Vector::Zero(history.back().theta.size());
    for (size_t j = history.size() - count; j < history.size(); ++j) mean += history[j].theta;
    return mean / count;
}

Vector IlcSession::trailing_variance_theta(double fraction) const {
    const int count = trailing_count(fraction, history.size());
    const Vector mean = trailing_mean_theta(fraction);
    Vector variance = Vector::Zero(mean.size());
    if (count < 2) return variance;
    for (size_t j = history.size() - count; j < history.size(); ++j)
        variance += (history[j].theta - mean).cwiseAbs2();
    return variance / (count - 1);
}

IlcSession run_session(const SpatialPlant& plant, const Eigen::Ref<const Vector>& rho,
                       const FeedbackController& ctrl, const Reference& reference,
                       const BasisMatrix& psi, const SessionConfig& config) {
    if (config.trials < 1) throw ConfigError("a session needs at least one trial");
    config.weights.validate();
    const int n = reference.length();
    if (psi.trial_length() != n) throw ConfigError("basis matrix does not match the reference length");

    const DiscreteTransferFunction nominal =
        config.nominal_model ? *config.nominal_model : plant.axis_dynamics(rho, config.axis);
    const auto nominal_maps = closed_loop_maps(nominal, ctrl.axis(config.axis));
    const LiftedOperator lifted_sensitivity = lift(nominal_maps.sensitivity, n);
    const LiftedOperator lifted_plant = lift(nominal, n);
    const IlcUpdateLaw law = build_update_law(psi, lifted_sensitivity, lifted_plant, config.weights);

    IlcSession session;
    session.position = rho;
    session.axis = config.axis;
    session.basis_condition = law.basis_condition;
    session.history.reserve(config.trials + 1);

    Vector theta = config.theta0.size() ? config.theta0 : Vector::Zero(psi.parameter_count());
    if (theta.size() != psi.parameter_count())
        throw ConfigError("theta0 dimension does not match the basis");

    Vector prev_feedforward = Vector::Zero(n);
    for (int j = 0; j <= config.trials; ++j) {
        TrialRecord record;
        record.theta = theta;
        record.feedforward = psi.feedforward(theta);

        NoiseSpec trial_noise{config.noise_std, mix_seed(config.seed, static_cast<std::uint64_t>(j))};
        const AxisLoopResult sim =
            simulate_axis_closed_loop(plant, rho, ctrl, config.axis,
                                      reference.samples.col(config.axis), record.feedforward,
                                      trial_noise);
        record.error = sim.e;
        record.error_norm = sim.e.norm();
        record.criterion = config.weights.error * sim.e.squaredNorm() +
                           config.weights.effort * record.feedforward.squaredNorm() +
                           config.weights.effort_change *
                               (record.feedforward - prev_feedforward).squaredNorm();
        prev_feedforward = record.feedforward;
        session.history.push_back(std::move(record));

        if (j < config.trials) theta = update_parameters(law, session.history.back().error, theta);
    }

    const Vector& last = session.history.back().theta;
    const Vector& prev = session.history[session.history.size() - 2].theta;
    const double scale = std::max(last.norm(), 1e-300);
    session.final_theta_change = (last - prev).norm() / scale;
    return session;
}

void write_session_json(const std::string& path, const IlcSession& session) {
    nlohmann::json j;
    j["schema_version"] = 1;
    j["position"] = std::vector<double>(session.position.begin(), session.position.end());
    j["axis"] = session.axis;
    j["basis_condition"] = session.basis_condition;
    j["final_theta_change"] = session.final_theta_change;
    auto& trials = j["trials"];
    trials = nlohmann::json::array();
    for (size_t t = 0; t < session.history.size(); ++t) {
        const TrialRecord& rec = session.history[t];
        nlohmann::json entry;
        entry["j"] = t;
        entry["theta"] = std::vector<double>(rec.theta.begin(), rec.theta.end());
        entry["error_2norm"] = rec.error_norm;
        entry["criterion"] = rec.criterion;
        entry["error"] = std::vector<double>(rec.error.begin(), rec.error.end());
        entry["feedforward"] = std::vector<double>(rec.feedforward.begin(), rec.feedforward.end());
        trials.push_back(std::move(entry));
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write session file: " + path);
    out << j.dump(2) << "\n";
}

void write_session_csv(const std::string& path, const IlcSession& session) {
    std::vector<std::string> header{"j", "e_norm", "criterion"};
    const Eigen::Index n_theta = session.history.front().theta.size();
    for (Eigen::Index i = 0; i < n_theta; ++i) header.push_back("theta_" + std::to_string(i));
    std::vector<std::vector<std::string>> rows;
    rows.reserve(session.history.size());
    for (size_t j = 0; j < session.history.size(); ++j) {
        const TrialRecord& rec = session.history[j];
        std::vector<std::string> row{std::to_string(j), csv::cell(rec.error_norm),
                                     csv::cell(rec.criterion)};
        for (Eigen::Index i = 0; i < n_theta; ++i) row.push_back(csv::cell(rec.theta(i)));
        rows.push_back(std::move(row));
    }
    csv::write(path, header, rows);
}

}  // namespace gpff
