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
#include "gpff/framework.hpp"

#include <algorithm>
#include <exception>
#include <fstream>
#include <mutex>
#include <thread>

#include "gpff/csv.hpp"
#include "json.hpp"

namespace gpff {

namespace {

// Disjoint seed streams per pipeline stage.
constexpr std::uint64_t kStreamCollect = 0x10000;
constexpr std::uint64_t kStreamCenter = 0x20000;
constexpr std::uint64_t kStreamLocalIlc = 0x30000;
constexpr std::uint64_t kStreamEvaluate = 0x40000;

/// Index-parallel loop writing into caller-preallocated slots; rethrows the
/// first worker exception.
template <typename F>
void parallel_for(int count, F&& fn) {
    const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    const unsigned workers = std::min<unsigned>(hw, static_cast<unsigned>(std::max(count, 1)));
    if (workers <= 1 || count <= 1) {
        for (int i = 0; i < count; ++i) fn(i);
        return;
    }
    std::mutex error_mutex;
    std::exception_ptr first_error;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&, w]() {
            for (int i = static_cast<int>(w); i < count; i += static_cast<int>(workers)) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!first_error) first_error = std::current_exception();
                    return;
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

struct AxisSessionOutput {
    SessionSummary summary;
    Vector theta_estimate;
};

}  // namespace

SpatialPlant ExperimentPlan::make_plant() const {
    std::optional<SpatialPlant> plant;
    if (plant_kind == "spatial_mass")
        plant = SpatialPlant::spatial_mass(nominal_mass, sample_time);
    else if (plant_kind == "mass_damper")
        plant = SpatialPlant::mass_damper(nominal_mass, damping, sample_time);
    else if (plant_kind == "periodic_flux")
        plant = SpatialPlant::periodic_flux(nominal_mass, mass2, flux_amplitude, magnet_pitch,
                                            sample_time);
    else
        throw ConfigError("unknown plant kind '" + plant_kind + "'");
    if (domain_min.size() || domain_max.size()) {
        DomainBox box = plant->domain();
        if (domain_min.size()) box.lo = domain_min;
        if (domain_max.size()) box.hi = domain_max;
        plant->set_domain(std::move(box));
    }
    return *plant;
}

FeedbackController ExperimentPlan::make_controller(const SpatialPlant& plant) const {
    return FeedbackController::pd(plant.nominal_masses(), bandwidth_hz, damping_ratio, sample_time);
}

Reference ExperimentPlan::make_reference(const SpatialPlant& plant) const {
    Vector s = move_start.size() ? move_start : Vector::Zero(plant.axis_count());
    Vector e = move_end.size() ? move_end : Vector::Constant(plant.axis_count(), 0.01);
    return polynomial_reference(s, e, duration, sample_time, order);
}

Vector ExperimentPlan::center(const SpatialPlant& plant) const {
    return center_position.size() ? center_position : plant.domain().center();
}

void ExperimentPlan::finalize() {
    const SpatialPlant plant = make_plant();
    const int axes = plant.axis_count();
    const int dim = plant.domain().dim();

    if (basis.empty())
        basis.assign(axes, {BasisDescriptor::velocity(), BasisDescriptor::acceleration()});
    if (static_cast<int>(basis.size()) != axes)
        throw ConfigError("basis must list one descriptor set per axis");
    for (const auto& axis_basis : basis)
        if (axis_basis.empty()) throw ConfigError("basis descriptor list is empty for an axis");

    if (move_start.size() == 0) move_start = Vector::Zero(axes);
    if (move_end.size() == 0) move_end = Vector::Constant(axes, 0.01);
    if (move_start.size() != axes || move_end.size() != axes)
        throw ConfigError("trajectory start/end must have one entry per axis");

    if (training_positions.rows() < 2) throw ConfigError("need at least 2 training positions");
    if (training_positions.cols() != dim || (test_positions.rows() > 0 && test_positions.cols() != dim))
        throw ConfigError("positions must match the plant domain dimension");
    for (Eigen::Index i = 0; i < training_positions.rows(); ++i)
        if (!plant.domain().contains(training_positions.row(i).transpose()))
            throw DomainError("training position row " + std::to_string(i) + " outside plant domain");
    for (Eigen::Index i = 0; i < test_positions.rows(); ++i)
        if (!plant.domain().contains(test_positions.row(i).transpose()))
            throw DomainError("test position row " + std::to_string(i) + " outside plant domain");
    if (center_position.size() && !plant.domain().contains(center_position))
        throw DomainError("center position outside plant domain");

    if (gp_mean == "zero")
        gp.mean = MeanHandling::zero;
    else if (gp_mean == "empirical")
        gp.mean = MeanHandling::empirical_mean;
    else
        throw ConfigError("gp mean handling must be 'zero' or 'empirical'");

    if (trials < 1) throw ConfigError("need at least one ILC trial");
    if (!(trailing_fraction > 0.0 && trailing_fraction <= 1.0))
        throw ConfigError("trailing fraction must be in (0, 1]");
    if (nominal != "center" && nominal != "local")
        throw ConfigError("nominal model must be 'center' or 'local'");
    weights.validate();
}

std::vector<ParameterInfo> parameter_layout(const ExperimentPlan& plan) {
    std::vector<ParameterInfo> layout;
    int index = 1;
    for (size_t axis = 0; axis < plan.basis.size(); ++axis)
        for (const auto& descriptor : plan.basis[axis])
            layout.push_back({static_cast<int>(axis), descriptor.name,
                              "theta_" + std::to_string(index++)});
    return layout;
}

namespace {

/// Runs the per-axis sessions at one position and returns the stacked
/// trailing-mean estimate plus per-axis summaries.
std::vector<AxisSessionOutput> run_position_sessions(const ExperimentPlan& plan,
                                                     const SpatialPlant& plant,
                                                     const FeedbackController& ctrl,
                                                     const Reference& reference,
                                                     const Eigen::Ref<const Vector>& rho,
                                                     std::uint64_t session_seed) {
    std::vector<AxisSessionOutput> outputs;
    const Vector center = plan.center(plant);
    for (int axis = 0; axis < plant.axis_count(); ++axis) {
        const BasisMatrix psi = build_basis(reference, plan.basis[axis], axis);
        SessionConfig config;
        config.trials = plan.trials;
        config.weights = plan.weights;
        config.seed = session_seed;
        config.noise_std = plan.noise_std;
        config.axis = axis;
        if (plan.nominal == "center") config.nominal_model = plant.axis_dynamics(center, axis);
        const IlcSession session = run_session(plant, rho, ctrl, reference, psi, config);

        AxisSessionOutput out;
        out.theta_estimate = session.trailing_mean_theta(plan.trailing_fraction);
        out.summary.position = rho;
        out.summary.axis = axis;
        out.summary.theta_estimate = out.theta_estimate;
        out.summary.theta_variance = session.trailing_variance_theta(plan.trailing_fraction);
        out.summary.final_error_norm = session.final_trial().error_norm;
        out.summary.initial_error_norm = session.history.front().error_norm;
        out.summary.basis_condition = session.basis_condition;
        out.summary.final_theta_change = session.final_theta_change;
        outputs.push_back(std::move(out));
    }
    return outputs;
}

Vector stack_axis_estimates(const std::vector<AxisSessionOutput>& outputs) {
    Eigen::Index total = 0;
    for (const auto& out : outputs) total += out.theta_estimate.size();
    Vector stacked(total);
    Eigen::Index at = 0;
    for (const auto& out : outputs) {
        stacked.segment(at, out.theta_estimate.size()) = out.theta_estimate;
        at += out.theta_estimate.size();
    }
    return stacked;
}

}  // namespace

CollectResult collect_training_data(const ExperimentPlan& plan) {
    const SpatialPlant plant = plan.make_plant();
    const FeedbackController ctrl = plan.make_controller(plant);
    const Reference reference = plan.make_reference(plant);
    const int l = static_cast<int>(plan.training_positions.rows());

    std::vector<std::vector<AxisSessionOutput>> outputs(l);
    parallel_for(l, [&](int i) {
        outputs[i] = run_position_sessions(plan, plant, ctrl, reference,
                                           plan.training_positions.row(i).transpose(),
                                           mix_seed(plan.seed, kStreamCollect + i));
    });

    const auto layout = parameter_layout(plan);
    Matrix observations(l, static_cast<Eigen::Index>(layout.size()));
    Matrix variances(l, static_cast<Eigen::Index>(layout.size()));
    CollectResult result;
    for (int i = 0; i < l; ++i) {
        observations.row(i) = stack_axis_estimates(outputs[i]).transpose();
        Eigen::Index at = 0;
        for (auto& out : outputs[i]) {
            variances.row(i).segment(at, out.summary.theta_variance.size()) =
                out.summary.theta_variance.transpose();
            at += out.summary.theta_variance.size();
            result.sessions.push_back(std::move(out.summary));
        }
    }
    result.per_parameter.reserve(layout.size());
    for (size_t p = 0; p < layout.size(); ++p)
        result.per_parameter.push_back(
            TrainingSet::merged(plan.training_positions, observations.col(p)));
    result.observation_variances = variances.colwise().mean();
    return result;
}

std::vector<GpModel> fit_parameter_models(const std::vector<TrainingSet>& training,
                                          const GpFitConfig& config, const Vector& noise_floors,
                                          std::vector<FitDiagnostics>* diagnostics) {
    if (noise_floors.size() && noise_floors.size() != static_cast<Eigen::Index>(training.size()))
        throw ConfigError("noise floor vector does not match the parameter count");
    std::vector<GpModel> models;
    models.reserve(training.size());
    std::vector<std::optional<GpModel>> slots(training.size());
    std::vector<FitDiagnostics> diags(training.size());
    parallel_for(static_cast<int>(training.size()), [&](int p) {
        GpFitConfig per_parameter = config;
        per_parameter.seed = mix_seed(config.seed, static_cast<std::uint64_t>(p));
        if (noise_floors.size())
            per_parameter.noise_floor = std::max(per_parameter.noise_floor, noise_floors(p));
        slots[p] = fit_hyperparameters(training[p], per_parameter, &diags[p]);
    });
    for (auto& slot : slots) models.push_back(std::move(*slot));
    if (diagnostics) *diagnostics = std::move(diags);
    return models;
}

ParameterPrediction predict_parameters(const std::vector<GpModel>& models,
                                       const Eigen::Ref<const Matrix>& positions) {
    ParameterPrediction out;
    out.mean.resize(positions.rows(), static_cast<Eigen::Index>(models.size()));
    out.variance.resize(positions.rows(), static_cast<Eigen::Index>(models.size()));
    for (size_t p = 0; p < models.size(); ++p) {
        Vector mean, variance;
        models[p].predict(positions, mean, variance);
        out.mean.col(p) = mean;
        out.variance.col(p) = variance;
    }
    return out;
}

namespace {

/// One noise realization per test position, shared by all methods so that the
/// comparison isolates the parameter choice.
MethodResult evaluate_theta(const ExperimentPlan& plan, const SpatialPlant& plant,
                            const FeedbackController& ctrl, const Reference& reference,
                            const Eigen::Ref<const Vector>& rho,
                            const Eigen::Ref<const Vector>& stacked_theta,
                            std::uint64_t noise_seed) {
    const int axes = plant.axis_count();
    Matrix feedforward(reference.length(), axes);
    Eigen::Index at = 0;
    for (int axis = 0; axis < axes; ++axis) {
        const BasisMatrix psi = build_basis(reference, plan.basis[axis], axis);
        feedforward.col(axis) = psi.feedforward(stacked_theta.segment(at, psi.parameter_count()));
        at += psi.parameter_count();
    }
    const NoiseSpec noise{plan.evaluation_noise(), noise_seed};
    const LoopResult sim =
        simulate_closed_loop(plant, rho, ctrl, reference.samples, feedforward, noise);

    MethodResult result;
    result.theta = stacked_theta;
    result.error = sim.e;
    result.error_norm = sim.e.norm();
    result.max_abs_error = sim.e.cwiseAbs().maxCoeff();
    return result;
}

}  // namespace

EvaluationReport evaluate_methods(const ExperimentPlan& plan, const std::vector<GpModel>& models,
                                  const std::vector<std::string>& methods) {
    const SpatialPlant plant = plan.make_plant();
    const FeedbackController ctrl = plan.make_controller(plant);
    const Reference reference = plan.make_reference(plant);

    EvaluationReport report;
    report.methods = methods.empty()
                         ? std::vector<std::string>{kMethodCenter, kMethodGp, kMethodLocalIlc}
                         : methods;
    for (const auto& m : report.methods)
        if (m != kMethodCenter && m != kMethodGp && m != kMethodLocalIlc)
            throw ConfigError("unknown evaluation method '" + m + "'");
    const bool want_center = std::count(report.methods.begin(), report.methods.end(), kMethodCenter);
    const bool want_gp = std::count(report.methods.begin(), report.methods.end(), kMethodGp);
    const bool want_local = std::count(report.methods.begin(), report.methods.end(), kMethodLocalIlc);

    report.center_position = plan.center(plant);
    if (want_center) {
        auto center_sessions = run_position_sessions(plan, plant, ctrl, reference,
                                                     report.center_position,
                                                     mix_seed(plan.seed, kStreamCenter));
        report.center_theta = stack_axis_estimates(center_sessions);
    }

    ParameterPrediction gp_prediction;
    if (want_gp) {
        if (models.empty()) throw ConfigError("GP evaluation requested but no models supplied");
        gp_prediction = predict_parameters(models, plan.test_positions);
    }

    const int n_test = static_cast<int>(plan.test_positions.rows());
    report.positions.resize(n_test);
    parallel_for(n_test, [&](int i) {
        const Vector rho = plan.test_positions.row(i).transpose();
        const std::uint64_t eval_seed = mix_seed(plan.seed, kStreamEvaluate + i);
        PositionReport& cell = report.positions[i];
        cell.position = rho;
        if (want_center)
            cell.methods[kMethodCenter] = evaluate_theta(plan, plant, ctrl, reference, rho,
                                                         report.center_theta, eval_seed);
        if (want_gp)
            cell.methods[kMethodGp] = evaluate_theta(plan, plant, ctrl, reference, rho,
                                                     gp_prediction.mean.row(i).transpose(),
                                                     eval_seed);
        if (want_local) {
            auto local_sessions = run_position_sessions(plan, plant, ctrl, reference, rho,
                                                        mix_seed(plan.seed, kStreamLocalIlc + i));
            cell.methods[kMethodLocalIlc] = evaluate_theta(plan, plant, ctrl, reference, rho,
                                                           stack_axis_estimates(local_sessions),
                                                           eval_seed);
        }
    });
    return report;
}

Matrix domain_grid(const DomainBox& box, int per_dim) {
    if (per_dim < 2) throw ConfigError("grid needs at least 2 points per dimension");
    const int dim = box.dim();
    Eigen::Index total = 1;
    for (int d = 0; d < dim; ++d) total *= per_dim;
    Matrix grid(total, dim);
    for (Eigen::Index i = 0; i < total; ++i) {
        Eigen::Index rest = i;
        for (int d = dim - 1; d >= 0; --d) {
            const Eigen::Index idx = rest % per_dim;
            rest /= per_dim;
            grid(i, d) = box.lo(d) + (box.hi(d) - box.lo(d)) * idx / (per_dim - 1);
        }
    }
    return grid;
}

void write_training_csv(const std::string& path, const ExperimentPlan& plan,
                        const CollectResult& collected) {
    const auto layout = parameter_layout(plan);
    const int dim = static_cast<int>(plan.training_positions.cols());
    std::vector<std::string> header;
    for (int d = 0; d < dim; ++d) header.push_back("rho_" + std::to_string(d));
    for (const auto& info : layout) header.push_back(info.label);
    for (const auto& info : layout) header.push_back(info.label + "_var");

    // Rows follow the plan's training positions (pre-merge observations).
    const int l = static_cast<int>(plan.training_positions.rows());
    const int axes = static_cast<int>(plan.basis.size());
    std::vector<std::vector<std::string>> rows;
    for (int i = 0; i < l; ++i) {
        std::vector<std::string> row;
        for (int d = 0; d < dim; ++d) row.push_back(csv::cell(plan.training_positions(i, d)));
        for (int axis = 0; axis < axes; ++axis) {
            const auto& summary = collected.sessions[i * axes + axis];
            for (Eigen::Index c = 0; c < summary.theta_estimate.size(); ++c)
                row.push_back(csv::cell(summary.theta_estimate(c)));
        }
        for (int axis = 0; axis < axes; ++axis) {
            const auto& summary = collected.sessions[i * axes + axis];
            for (Eigen::Index c = 0; c < summary.theta_variance.size(); ++c)
                row.push_back(csv::cell(summary.theta_variance(c)));
        }
        rows.push_back(std::move(row));
    }
    csv::write(path, header, rows);
}

TrainingData read_training_csv(const std::string& path, const ExperimentPlan& plan) {
    const auto layout = parameter_layout(plan);
    const csv::Table table = csv::read(path);
    const int dim = static_cast<int>(plan.training_positions.cols());
    const int n_params = static_cast<int>(layout.size());
    if (static_cast<int>(table.columns.size()) != dim + 2 * n_params)
        throw ConfigError("training CSV column count does not match the plan: " + path);

    const int l = static_cast<int>(table.rows.size());
    Matrix positions(l, dim);
    Matrix observations(l, n_params);
    Matrix variances(l, n_params);
    for (int i = 0; i < l; ++i) {
        for (int d = 0; d < dim; ++d) positions(i, d) = csv::to_double(table.rows[i][d]);
        for (int p = 0; p < n_params; ++p) {
            observations(i, p) = csv::to_double(table.rows[i][dim + p]);
            variances(i, p) = csv::to_double(table.rows[i][dim + n_params + p]);
        }
    }
    TrainingData data;
    data.per_parameter.reserve(n_params);
    for (int p = 0; p < n_params; ++p)
        data.per_parameter.push_back(TrainingSet::merged(positions, observations.col(p)));
    data.observation_variances = variances.colwise().mean();
    return data;
}

void write_prediction_csv(const std::string& path, const ExperimentPlan& plan,
                          const Eigen::Ref<const Matrix>& positions,
                          const ParameterPrediction& prediction) {
    const auto layout = parameter_layout(plan);
    std::vector<std::string> header;
    for (Eigen::Index d = 0; d < positions.cols(); ++d) header.push_back("rho_" + std::to_string(d));
    for (const auto& info : layout) {
        header.push_back(info.label + "_mean");
        header.push_back(info.label + "_variance");
    }
    std::vector<std::vector<std::string>> rows;
    for (Eigen::Index i = 0; i < positions.rows(); ++i) {
        std::vector<std::string> row;
        for (Eigen::Index d = 0; d < positions.cols(); ++d) row.push_back(csv::cell(positions(i, d)));
        for (Eigen::Index p = 0; p < prediction.mean.cols(); ++p) {
            row.push_back(csv::cell(prediction.mean(i, p)));
            row.push_back(csv::cell(prediction.variance(i, p)));
        }
        rows.push_back(std::move(row));
    }
    csv::write(path, header, rows);
}

void write_summary_csv(const std::string& path, const EvaluationReport& report) {
    std::vector<std::string> header;
    const int dim = report.positions.empty() ? 1 : static_cast<int>(report.positions[0].position.size());
    for (int d = 0; d < dim; ++d) header.push_back("rho_" + std::to_string(d));
    header.insert(header.end(), {"method", "error_2norm", "max_abs_error"});

    std::vector<std::vector<std::string>> rows;
    for (const auto& cell : report.positions) {
        for (const auto& method : report.methods) {
            const auto it = cell.methods.find(method);
            if (it == cell.methods.end()) continue;
            std::vector<std::string> row;
            for (int d = 0; d < dim; ++d) row.push_back(csv::cell(cell.position(d)));
            row.push_back(method);
            row.push_back(csv::cell(it->second.error_norm));
            row.push_back(csv::cell(it->second.max_abs_error));
            rows.push_back(std::move(row));
        }
    }
    csv::write(path, header, rows);
}

void write_report_json(const std::string& path, const EvaluationReport& report) {
    nlohmann::json j;
    j["schema_version"] = 1;
    j["methods"] = report.methods;
    if (report.center_theta.size())
        j["center"]["theta"] =
            std::vector<double>(report.center_theta.begin(), report.center_theta.end());
    j["center"]["position"] =
        std::vector<double>(report.center_position.begin(), report.center_position.end());

    auto& sessions = j["training_sessions"];
    sessions = nlohmann::json::array();
    for (const auto& s : report.training_sessions) {
        nlohmann::json entry;
        entry["position"] = std::vector<double>(s.position.begin(), s.position.end());
        entry["axis"] = s.axis;
        entry["theta"] = std::vector<double>(s.theta_estimate.begin(), s.theta_estimate.end());
        entry["initial_error_norm"] = s.initial_error_norm;
        entry["final_error_norm"] = s.final_error_norm;
        entry["basis_condition"] = s.basis_condition;
        entry["final_theta_change"] = s.final_theta_change;
        sessions.push_back(std::move(entry));
    }

    auto& cells = j["test_positions"];
    cells = nlohmann::json::array();
    for (const auto& cell : report.positions) {
        nlohmann::json entry;
        entry["position"] = std::vector<double>(cell.position.begin(), cell.position.end());
        for (const auto& [method, result] : cell.methods) {
            nlohmann::json m;
            m["theta"] = std::vector<double>(result.theta.begin(), result.theta.end());
            m["error_2norm"] = result.error_norm;
            m["max_abs_error"] = result.max_abs_error;
            std::vector<std::vector<double>> series;
            for (Eigen::Index axis = 0; axis < result.error.cols(); ++axis)
                series.emplace_back(result.error.col(axis).begin(), result.error.col(axis).end());
            m["error_series"] = series;
            entry["methods"][method] = std::move(m);
        }
        cells.push_back(std::move(entry));
    }

    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write report file: " + path);
    out << j.dump(2) << "\n";
}

}  // namespace gpff
