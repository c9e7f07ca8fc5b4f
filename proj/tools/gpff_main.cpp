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
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "gpff/config.hpp"
#include "gpff/csv.hpp"
#include "gpff/framework.hpp"

namespace fs = std::filesystem;
using namespace gpff;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitStability = 4;

struct Options {
    std::string config_path;
    std::string out_dir;   // overrides [output] dir when set
    std::string position;  // whitespace-separated components
    std::string theta;
    std::string methods;   // comma-separated subset of center,gp,local_ilc
    std::string stage;     // evaluate: stop after collect|fit|predict|evaluate
    std::optional<std::uint64_t> seed;
    bool verbose = false;
};

std::uint64_t fnv1a(const std::string& text) {
    std::uint64_t hash = 0xcbf29ce484222325ull;
    for (unsigned char c : text) {
        hash ^= c;
        hash *= 0x100000001b3ull;
    }
    return hash;
}

std::string file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

void append(std::ostringstream& os, double v) { os << csv::cell(v) << ";"; }

std::string collect_fingerprint(const ExperimentPlan& plan) {
    std::ostringstream os;
    os << plan.plant_kind << ";";
    append(os, plan.nominal_mass);
    append(os, plan.damping);
    append(os, plan.mass2);
    append(os, plan.flux_amplitude);
    append(os, plan.magnet_pitch);
    append(os, plan.sample_time);
    append(os, plan.noise_std);
    for (Eigen::Index i = 0; i < plan.domain_min.size(); ++i) append(os, plan.domain_min(i));
    for (Eigen::Index i = 0; i < plan.domain_max.size(); ++i) append(os, plan.domain_max(i));
    append(os, plan.bandwidth_hz);
    append(os, plan.damping_ratio);
    for (Eigen::Index i = 0; i < plan.move_start.size(); ++i) append(os, plan.move_start(i));
    for (Eigen::Index i = 0; i < plan.move_end.size(); ++i) append(os, plan.move_end(i));
    append(os, plan.duration);
    os << plan.order << ";" << plan.trials << ";";
    append(os, plan.weights.error);
    append(os, plan.weights.effort);
    append(os, plan.weights.effort_change);
    append(os, plan.trailing_fraction);
    os << plan.nominal << ";" << plan.seed << ";";
    for (const auto& axis : plan.basis)
        for (const auto& b : axis) os << b.name << ",";
    for (Eigen::Index i = 0; i < plan.training_positions.size(); ++i)
        append(os, plan.training_positions.data()[i]);
    return os.str();
}

std::string fit_fingerprint(const ExperimentPlan& plan, const std::string& training_csv) {
    std::ostringstream os;
    os << "fit;" << plan.gp.restarts << ";" << plan.gp.max_iterations << ";" << plan.gp_mean
       << ";";
    append(os, plan.gp.gradient_tol);
    os << plan.seed << ";" << plan.prediction_grid << ";" << fnv1a(file_bytes(training_csv));
    return os.str();
}

bool stage_cached(const std::string& out_dir, const std::string& stage, std::uint64_t fingerprint,
                  const std::vector<std::string>& outputs) {
    for (const auto& path : outputs)
        if (!fs::exists(path)) return false;
    const std::string hash_path = out_dir + "/.cache/" + stage + ".hash";
    std::ifstream in(hash_path);
    std::uint64_t stored = 0;
    if (!(in >> stored)) return false;
    return stored == fingerprint;
}

void store_stage(const std::string& out_dir, const std::string& stage, std::uint64_t fingerprint) {
    fs::create_directories(out_dir + "/.cache");
    std::ofstream out(out_dir + "/.cache/" + stage + ".hash");
    out << fingerprint << "\n";
}

Vector parse_components(const std::string& text, const std::string& what) {
    std::vector<double> values;
    std::string normalized = text;
    for (char& c : normalized)
        if (c == ',') c = ' ';
    std::stringstream ss(normalized);
    std::string token;
    while (ss >> token) {
        char* end = nullptr;
        const double v = std::strtod(token.c_str(), &end);
        if (end == token.c_str() || *end != '\0')
            throw ConfigError(what + ": expected numbers, got '" + token + "'");
        values.push_back(v);
    }
    if (values.empty()) throw ConfigError(what + ": no values given");
    return Eigen::Map<const Vector>(values.data(), values.size());
}

RunConfig load(const Options& opt) {
    RunConfig run = load_run_config(opt.config_path);
    if (!opt.out_dir.empty()) run.out_dir = opt.out_dir;
    if (opt.seed) {
        run.plan.seed = *opt.seed;
        run.plan.gp.seed = *opt.seed;
    }
    fs::create_directories(run.out_dir);
    return run;
}

std::string training_csv_path(const RunConfig& run) { return run.out_dir + "/training_data.csv"; }
std::string sessions_json_path(const RunConfig& run) { return run.out_dir + "/sessions.json"; }

void write_sessions_json(const std::string& path, const std::vector<SessionSummary>& sessions) {
    nlohmann::json j;
    j["schema_version"] = 1;
    auto& arr = j["sessions"];
    arr = nlohmann::json::array();
    for (const auto& s : sessions) {
        nlohmann::json entry;
        entry["position"] = std::vector<double>(s.position.begin(), s.position.end());
        entry["axis"] = s.axis;
        entry["theta"] = std::vector<double>(s.theta_estimate.begin(), s.theta_estimate.end());
        entry["initial_error_norm"] = s.initial_error_norm;
        entry["final_error_norm"] = s.final_error_norm;
        entry["basis_condition"] = s.basis_condition;
        entry["final_theta_change"] = s.final_theta_change;
        arr.push_back(std::move(entry));
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + path);
    out << j.dump(2) << "\n";
}

std::vector<SessionSummary> read_sessions_json(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read " + path);
    nlohmann::json j;
    in >> j;
    std::vector<SessionSummary> sessions;
    for (const auto& entry : j.at("sessions")) {
        SessionSummary s;
        const auto pos = entry.at("position").get<std::vector<double>>();
        s.position = Eigen::Map<const Vector>(pos.data(), pos.size());
        s.axis = entry.at("axis").get<int>();
        const auto theta = entry.at("theta").get<std::vector<double>>();
        s.theta_estimate = Eigen::Map<const Vector>(theta.data(), theta.size());
        s.initial_error_norm = entry.at("initial_error_norm").get<double>();
        s.final_error_norm = entry.at("final_error_norm").get<double>();
        s.basis_condition = entry.at("basis_condition").get<double>();
        s.final_theta_change = entry.at("final_theta_change").get<double>();
        sessions.push_back(std::move(s));
    }
    return sessions;
}

/// Runs (or reuses) the collect stage; training observations land in
/// training_data.csv and per-session summaries in sessions.json.
void ensure_collect(const RunConfig& run, bool verbose) {
    const std::uint64_t fp = fnv1a(collect_fingerprint(run.plan));
    const std::string csv_path = training_csv_path(run);
    if (stage_cached(run.out_dir, "collect", fp, {csv_path, sessions_json_path(run)})) {
        if (verbose) std::cout << "collect: cached (" << csv_path << ")\n";
        return;
    }
    if (verbose)
        std::cout << "collect: running " << run.plan.training_positions.rows()
                  << " training sessions\n";
    const CollectResult collected = collect_training_data(run.plan);
    write_training_csv(csv_path, run.plan, collected);
    write_sessions_json(sessions_json_path(run), collected.sessions);
    store_stage(run.out_dir, "collect", fp);
}

std::vector<std::string> model_paths(const RunConfig& run) {
    const auto layout = parameter_layout(run.plan);
    std::vector<std::string> paths;
    paths.reserve(layout.size());
    for (const auto& info : layout)
        paths.push_back(run.out_dir + "/gp_model_" + info.label + ".json");
    return paths;
}

/// Runs (or reuses) the fit stage: one GP model JSON per parameter plus a
/// prediction grid CSV over the plant domain. Always refits from the CSV on
/// disk so the training data round-trips.
std::vector<GpModel> ensure_fit(const RunConfig& run, bool verbose) {
    ensure_collect(run, verbose);
    const auto paths = model_paths(run);
    const std::string grid_path = run.out_dir + "/gp_grid.csv";
    const std::uint64_t fp = fnv1a(fit_fingerprint(run.plan, training_csv_path(run)));

    std::vector<std::string> outputs = paths;
    outputs.push_back(grid_path);
    if (stage_cached(run.out_dir, "fit", fp, outputs)) {
        if (verbose) std::cout << "fit: cached\n";
        std::vector<GpModel> models;
        models.reserve(paths.size());
        for (const auto& p : paths) models.push_back(read_gp_model_json(p));
        return models;
    }

    const TrainingData training = read_training_csv(training_csv_path(run), run.plan);
    std::vector<FitDiagnostics> diagnostics;
    GpFitConfig gp_config = run.plan.gp;
    gp_config.seed = run.plan.seed;
    std::vector<GpModel> models = fit_parameter_models(
        training.per_parameter, gp_config, training.observation_variances, &diagnostics);

    const auto layout = parameter_layout(run.plan);
    for (size_t p = 0; p < models.size(); ++p) {
        write_gp_model_json(paths[p], models[p], layout[p].label);
        if (verbose) {
            const auto& k = models[p].kernel();
            std::cout << "fit: " << layout[p].label << " (axis " << layout[p].axis + 1 << " "
                      << layout[p].basis_name << ") sigma_f^2=" << k.signal_variance
                      << " noise=" << models[p].noise_variance()
                      << " logML=" << models[p].log_marginal()
                      << (diagnostics[p].converged ? "" : " [iteration cap]") << "\n";
        }
    }

    const SpatialPlant plant = run.plan.make_plant();
    const Matrix grid = domain_grid(plant.domain(), run.plan.prediction_grid);
    write_prediction_csv(grid_path, run.plan, grid, predict_parameters(models, grid));
    store_stage(run.out_dir, "fit", fp);
    return models;
}

std::vector<std::string> parse_methods(const std::string& text) {
    if (text.empty()) return {};
    std::vector<std::string> methods;
    std::stringstream ss(text);
    std::string token;
    while (std::getline(ss, token, ',')) {
        if (!token.empty()) methods.push_back(token);
    }
    return methods;
}

int cmd_simulate(const Options& opt) {
    const RunConfig run = load(opt);
    const SpatialPlant plant = run.plan.make_plant();
    const FeedbackController ctrl = run.plan.make_controller(plant);
    const Reference reference = run.plan.make_reference(plant);
    const Vector rho = opt.position.empty() ? run.plan.center(plant)
                                            : parse_components(opt.position, "--position");

    const auto layout = parameter_layout(run.plan);
    Vector theta = Vector::Zero(static_cast<Eigen::Index>(layout.size()));
    if (!opt.theta.empty()) {
        theta = parse_components(opt.theta, "--theta");
        if (theta.size() != static_cast<Eigen::Index>(layout.size()))
            throw ConfigError("--theta needs " + std::to_string(layout.size()) + " values");
    }

    Matrix feedforward(reference.length(), plant.axis_count());
    Eigen::Index at = 0;
    for (int axis = 0; axis < plant.axis_count(); ++axis) {
        const BasisMatrix psi = build_basis(reference, run.plan.basis[axis], axis);
        feedforward.col(axis) = psi.feedforward(theta.segment(at, psi.parameter_count()));
        at += psi.parameter_count();
    }

    const NoiseSpec noise{run.plan.noise_std, mix_seed(run.plan.seed, 0x51u)};
    const LoopResult sim = simulate_closed_loop(plant, rho, ctrl, reference.samples, feedforward, noise);

    std::vector<std::string> header{"k", "t"};
    for (int a = 0; a < plant.axis_count(); ++a) {
        const std::string s = std::to_string(a);
        for (const char* base : {"r", "y", "e", "u", "f"}) header.push_back(base + s);
    }
    std::vector<std::vector<std::string>> rows;
    for (int k = 0; k < reference.length(); ++k) {
        std::vector<std::string> row{std::to_string(k), csv::cell(k * run.plan.sample_time)};
        for (int a = 0; a < plant.axis_count(); ++a) {
            row.push_back(csv::cell(reference.samples(k, a)));
            row.push_back(csv::cell(sim.y(k, a)));
            row.push_back(csv::cell(sim.e(k, a)));
            row.push_back(csv::cell(sim.u(k, a)));
            row.push_back(csv::cell(feedforward(k, a)));
        }
        rows.push_back(std::move(row));
    }
    const std::string path = run.out_dir + "/simulate.csv";
    csv::write(path, header, rows);

    for (int a = 0; a < plant.axis_count(); ++a)
        std::printf("axis %d: |e|_2 = %.6e  max|e| = %.6e\n", a + 1, sim.e.col(a).norm(),
                    sim.e.col(a).cwiseAbs().maxCoeff());
    std::cout << "wrote " << path << "\n";
    return 0;
}

int cmd_ilc(const Options& opt) {
    const RunConfig run = load(opt);
    const SpatialPlant plant = run.plan.make_plant();
    const FeedbackController ctrl = run.plan.make_controller(plant);
    const Reference reference = run.plan.make_reference(plant);
    const Vector rho = opt.position.empty() ? run.plan.center(plant)
                                            : parse_components(opt.position, "--position");
    const Vector center = run.plan.center(plant);

    for (int axis = 0; axis < plant.axis_count(); ++axis) {
        const BasisMatrix psi = build_basis(reference, run.plan.basis[axis], axis);
        SessionConfig config;
        config.trials = run.plan.trials;
        config.weights = run.plan.weights;
        config.seed = mix_seed(run.plan.seed, 0x52u);
        config.noise_std = run.plan.noise_std;
        config.axis = axis;
        if (run.plan.nominal == "center") config.nominal_model = plant.axis_dynamics(center, axis);
        const IlcSession session = run_session(plant, rho, ctrl, reference, psi, config);

        const std::string stem = plant.axis_count() == 1
                                     ? run.out_dir + "/ilc_session"
                                     : run.out_dir + "/ilc_session_axis" + std::to_string(axis + 1);
        const std::string path = stem + ".csv";
        write_session_csv(path, session);
        write_session_json(stem + ".json", session);
        std::printf("axis %d: final |e|_2 = %.6e (trial 0: %.6e), theta =", axis + 1,
                    session.final_trial().error_norm, session.history.front().error_norm);
        const Vector estimate = session.trailing_mean_theta(run.plan.trailing_fraction);
        for (Eigen::Index i = 0; i < estimate.size(); ++i) std::printf(" %.8g", estimate(i));
        std::printf("\n");
        std::cout << "wrote " << path << "\n";
    }
    return 0;
}

int cmd_collect(const Options& opt) {
    const RunConfig run = load(opt);
    ensure_collect(run, opt.verbose);
    const auto sessions = read_sessions_json(sessions_json_path(run));
    for (const auto& s : sessions) {
        std::printf("position");
        for (Eigen::Index d = 0; d < s.position.size(); ++d) std::printf(" %.4g", s.position(d));
        std::printf(" axis %d: theta =", s.axis + 1);
        for (Eigen::Index i = 0; i < s.theta_estimate.size(); ++i)
            std::printf(" %.8g", s.theta_estimate(i));
        std::printf("  final |e|_2 = %.4e\n", s.final_error_norm);
    }
    std::cout << "wrote " << training_csv_path(run) << "\n";
    return 0;
}

int cmd_fit(const Options& opt) {
    const RunConfig run = load(opt);
    const auto models = ensure_fit(run, opt.verbose);
    const auto layout = parameter_layout(run.plan);
    for (size_t p = 0; p < models.size(); ++p) {
        const auto& k = models[p].kernel();
        std::printf("%s (axis %d, %s): sigma_f^2 = %.6g, lengthscales =", layout[p].label.c_str(),
                    layout[p].axis + 1, layout[p].basis_name.c_str(), k.signal_variance);
        for (Eigen::Index d = 0; d < k.lengthscales.size(); ++d)
            std::printf(" %.6g", k.lengthscales(d));
        std::printf(", sigma_n^2 = %.6g, logML = %.6g\n", models[p].noise_variance(),
                    models[p].log_marginal());
    }
    std::cout << "wrote " << run.out_dir << "/gp_model_theta*.json and " << run.out_dir
              << "/gp_grid.csv\n";
    return 0;
}

int cmd_predict(const Options& opt) {
    const RunConfig run = load(opt);
    const auto models = ensure_fit(run, opt.verbose);
    const ParameterPrediction prediction = predict_parameters(models, run.plan.test_positions);
    const std::string path = run.out_dir + "/predictions.csv";
    write_prediction_csv(path, run.plan, run.plan.test_positions, prediction);

    const auto layout = parameter_layout(run.plan);
    for (Eigen::Index i = 0; i < run.plan.test_positions.rows(); ++i) {
        std::printf("position");
        for (Eigen::Index d = 0; d < run.plan.test_positions.cols(); ++d)
            std::printf(" %.4g", run.plan.test_positions(i, d));
        std::printf(":");
        for (size_t p = 0; p < layout.size(); ++p)
            std::printf(" %s = %.8g (sd %.3g)", layout[p].label.c_str(), prediction.mean(i, p),
                        std::sqrt(prediction.variance(i, p)));
        std::printf("\n");
    }
    std::cout << "wrote " << path << "\n";
    return 0;
}

int cmd_evaluate(const Options& opt) {
    const RunConfig run = load(opt);
    const std::string stage = opt.stage.empty() ? "evaluate" : opt.stage;
    if (stage != "collect" && stage != "fit" && stage != "predict" && stage != "evaluate")
        throw ConfigError("--stage must be collect, fit, predict, or evaluate");

    if (stage == "collect") {
        ensure_collect(run, opt.verbose);
        std::cout << "stopped after collect stage\n";
        return 0;
    }
    std::vector<std::string> methods = parse_methods(opt.methods);
    const bool want_gp = methods.empty() ||
                         std::count(methods.begin(), methods.end(), std::string(kMethodGp)) > 0;

    std::vector<GpModel> models;
    if (want_gp || stage == "fit" || stage == "predict") models = ensure_fit(run, opt.verbose);
    if (stage == "fit") {
        std::cout << "stopped after fit stage\n";
        return 0;
    }
    if (stage == "predict") {
        const ParameterPrediction prediction = predict_parameters(models, run.plan.test_positions);
        write_prediction_csv(run.out_dir + "/predictions.csv", run.plan, run.plan.test_positions,
                             prediction);
        std::cout << "stopped after predict stage\n";
        return 0;
    }

    EvaluationReport report = evaluate_methods(run.plan, models, methods);
    if (fs::exists(sessions_json_path(run)))
        report.training_sessions = read_sessions_json(sessions_json_path(run));

    write_summary_csv(run.out_dir + "/summary.csv", report);
    write_report_json(run.out_dir + "/report.json", report);

    std::printf("%-24s %-10s %14s %14s\n", "position", "method", "error_2norm", "max_abs_error");
    for (const auto& cell : report.positions) {
        std::string pos;
        for (Eigen::Index d = 0; d < cell.position.size(); ++d) {
            char buf[32];
            std::snprintf(buf, sizeof(buf), "%s%.4g", d ? " " : "", cell.position(d));
            pos += buf;
        }
        for (const auto& method : report.methods) {
            const auto it = cell.methods.find(method);
            if (it == cell.methods.end()) continue;
            std::printf("%-24s %-10s %14.6e %14.6e\n", pos.c_str(), method.c_str(),
                        it->second.error_norm, it->second.max_abs_error);
        }
    }
    std::cout << "wrote " << run.out_dir << "/summary.csv and " << run.out_dir << "/report.json\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"position-dependent feedforward: ILC parameter learning + GP regression"};
    app.require_subcommand(1);

    Options opt;
    const auto add_common = [&](CLI::App* cmd, bool needs_position) {
        cmd->add_option("--config", opt.config_path, "experiment config file")->required();
        cmd->add_option("--out-dir", opt.out_dir, "override the [output] dir from the config");
        cmd->add_option("--seed", opt.seed, "override the master seed");
        cmd->add_flag("--verbose", opt.verbose, "print stage progress");
        if (needs_position)
            cmd->add_option("--position", opt.position,
                            "evaluation position, components space- or comma-separated");
    };

    auto* simulate = app.add_subcommand("simulate", "one closed-loop run, time series to CSV");
    add_common(simulate, true);
    simulate->add_option("--theta", opt.theta, "stacked feedforward parameters (default zeros)");

    auto* ilc = app.add_subcommand("ilc", "ILC session at one position, history to CSV");
    add_common(ilc, true);

    auto* collect = app.add_subcommand("collect", "ILC sessions on all training positions");
    add_common(collect, false);

    auto* fit = app.add_subcommand("fit", "fit per-parameter GPs from the training data");
    add_common(fit, false);

    auto* predict = app.add_subcommand("predict", "GP predictions at the test positions");
    add_common(predict, false);

    auto* evaluate = app.add_subcommand("evaluate", "compare center/gp/local_ilc feedforward");
    add_common(evaluate, false);
    evaluate->add_option("--methods", opt.methods, "comma-separated subset of center,gp,local_ilc");
    evaluate->add_option("--stage", opt.stage, "stop after collect|fit|predict|evaluate");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitConfig;
    }

    try {
        if (simulate->parsed()) return cmd_simulate(opt);
        if (ilc->parsed()) return cmd_ilc(opt);
        if (collect->parsed()) return cmd_collect(opt);
        if (fit->parsed()) return cmd_fit(opt);
        if (predict->parsed()) return cmd_predict(opt);
        if (evaluate->parsed()) return cmd_evaluate(opt);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const StabilityError& e) {
        std::cerr << "stability error: " << e.what() << "\n";
        return kExitStability;
    } catch (const NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumerical;
    }
    return 0;
}
