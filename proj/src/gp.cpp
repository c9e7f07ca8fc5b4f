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
#include "gpff/gp.hpp"

#include <cmath>
#include <fstream>

#include "json.hpp"

namespace gpff {

namespace {

constexpr double kJitterStartRel = 1e-10;
constexpr double kJitterMaxRel = 1e-4;
constexpr double kNoiseFloorRel = 1e-12;

/// K(P,P) + sigma_n^2 I factorized with escalating jitter. A factorization is
/// accepted only once it reproduces the actual right-hand side accurately, so
/// the cached alpha always satisfies its defining system. Returns the jitter
/// that was needed and the validated solution.
double factorize_ky(const Matrix& ky, const Vector& rhs, Eigen::LLT<Matrix>& llt,
                    Vector& solution) {
    const double scale = ky.diagonal().mean();
    if (!std::isfinite(scale) || !ky.allFinite())
        throw NumericalError("K_y contains non-finite entries; check the training positions");
    double jitter = 0.0;
    for (;;) {
        Matrix attempt = ky;
        attempt.diagonal().array() += jitter;
        llt.compute(attempt);
        if (llt.info() == Eigen::Success) {
            solution = llt.solve(rhs);
            const double residual = (attempt * solution - rhs).norm();
            if (residual <= 1e-9 * std::max(rhs.norm(), 1e-9 * scale)) return jitter;
        }
        jitter = jitter == 0.0 ? kJitterStartRel * scale : 10.0 * jitter;
        if (jitter > kJitterMaxRel * scale)
            throw NumericalError(
                "K_y not factorizable to solve accuracy within the jitter ceiling (" +
                std::to_string(jitter) + "); training positions may coincide");
    }
}

}  // namespace

void Kernel::validate() const {
    if (!(signal_variance > 0.0)) throw ConfigError("kernel signal variance must be positive");
    if (lengthscales.size() == 0 || (lengthscales.array() <= 0.0).any())
        throw ConfigError("kernel lengthscales must be positive");
}

double kernel_eval(const Kernel& kernel, const Eigen::Ref<const Vector>& a,
                   const Eigen::Ref<const Vector>& b) {
    if (a.size() != kernel.lengthscales.size() || b.size() != kernel.lengthscales.size())
        throw ConfigError("kernel input dimension mismatch");
    const double z = ((a - b).array() / kernel.lengthscales.array()).square().sum();
    return kernel.signal_variance * std::exp(-0.5 * z);
}

Matrix gram(const Kernel& kernel, const Eigen::Ref<const Matrix>& a,
            const Eigen::Ref<const Matrix>& b) {
    Matrix out(a.rows(), b.rows());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < b.rows(); ++j)
            out(i, j) = kernel_eval(kernel, a.row(i).transpose(), b.row(j).transpose());
    return out;
}

TrainingSet TrainingSet::merged(Matrix positions, Vector values, double tol) {
    if (positions.rows() != values.size())
        throw ConfigError("training positions and values disagree in length");
    if (positions.rows() < 1) throw ConfigError("training set is empty");

    TrainingSet out;
    std::vector<int> counts;
    Matrix merged_pos(positions.rows(), positions.cols());
    Vector merged_val(positions.rows());
    Eigen::Index m = 0;
    for (Eigen::Index i = 0; i < positions.rows(); ++i) {
        bool matched = false;
        for (Eigen::Index k = 0; k < m; ++k) {
            if ((positions.row(i) - merged_pos.row(k)).cwiseAbs().maxCoeff() <= tol) {
                merged_val(k) = (merged_val(k) * counts[k] + values(i)) / (counts[k] + 1);
                ++counts[k];
                ++out.merged_duplicates;
                matched = true;
                break;
            }
        }
        if (!matched) {
            merged_pos.row(m) = positions.row(i);
            merged_val(m) = values(i);
            counts.push_back(1);
            ++m;
        }
    }
    out.positions = merged_pos.topRows(m);
    out.values = merged_val.head(m);
    return out;
}

LogMarginal log_marginal_likelihood(const Kernel& kernel, double noise_variance,
                                    const TrainingSet& training, MeanHandling mean) {
    kernel.validate();
    if (noise_variance < 0.0) throw ConfigError("noise variance must be nonnegative");
    const Eigen::Index l = training.size();

    const double offset = mean == MeanHandling::empirical_mean ? training.values.mean() : 0.0;
    const Vector centered = training.values.array() - offset;
    const Matrix kf = gram(kernel, training.positions, training.positions);
    Matrix ky = kf;
    ky.diagonal().array() += noise_variance;

    Eigen::LLT<Matrix> llt;
    Vector alpha;
    factorize_ky(ky, centered, llt, alpha);
    double log_det = 0.0;
    for (Eigen::Index i = 0; i < l; ++i) log_det += std::log(llt.matrixL()(i, i));
    log_det *= 2.0;

    LogMarginal out;
    out.value = -0.5 * centered.dot(alpha) - 0.5 * log_det - 0.5 * l * std::log(2.0 * M_PI);

    // d/d eta log p = 1/2 tr((alpha alpha^T - K_y^-1) dK_y/d eta), eta in
    // [log l_1.., log sigma_f, log sigma_n].
    const Matrix ky_inv = llt.solve(Matrix::Identity(l, l));
    const Matrix inner = alpha * alpha.transpose() - ky_inv;

    const Eigen::Index dim = kernel.lengthscales.size();
    out.gradient = Vector::Zero(dim + 2);
    for (Eigen::Index d = 0; d < dim; ++d) {
        double acc = 0.0;
        for (Eigen::Index i = 0; i < l; ++i) {
            for (Eigen::Index j = 0; j < l; ++j) {
                const double delta =
                    (training.positions(i, d) - training.positions(j, d)) / kernel.lengthscales(d);
                acc += inner(i, j) * kf(i, j) * delta * delta;
            }
        }
        out.gradient(d) = 0.5 * acc;
    }
    out.gradient(dim) = inner.cwiseProduct(kf).sum();  // 1/2 tr(inner * 2 kf)
    out.gradient(dim + 1) = noise_variance * inner.trace();
    return out;
}

GpModel::GpModel(Kernel kernel, double noise_variance, TrainingSet training, MeanHandling mean)
    : kernel_(std::move(kernel)), noise_variance_(noise_variance), training_(std::move(training)),
      mean_(mean) {
    kernel_.validate();
    if (noise_variance_ < 0.0) throw ConfigError("noise variance must be nonnegative");
    if (training_.dim() != kernel_.lengthscales.size())
        throw ConfigError("kernel dimension does not match training positions");

    offset_ = mean_ == MeanHandling::empirical_mean ? training_.values.mean() : 0.0;
    const Vector centered = training_.values.array() - offset_;

    Matrix ky = gram(kernel_, training_.positions, training_.positions);
    ky.diagonal().array() += noise_variance_;
    jitter_ = factorize_ky(ky, centered, llt_, alpha_);

    double log_det = 0.0;
    for (Eigen::Index i = 0; i < training_.size(); ++i) log_det += std::log(llt_.matrixL()(i, i));
    log_marginal_ = -0.5 * centered.dot(alpha_) - log_det -
                    0.5 * training_.size() * std::log(2.0 * M_PI);
}

GpModel::Posterior GpModel::posterior(const Eigen::Ref<const Matrix>& test_positions) const {
    if (test_positions.cols() != training_.dim())
        throw ConfigError("test positions have wrong dimension");
    const Matrix k_star = gram(kernel_, training_.positions, test_positions);
    const Matrix k_star_star = gram(kernel_, test_positions, test_positions);

    Posterior post;
    post.mean = (k_star.transpose() * alpha_).array() + offset_;

    const Matrix v = llt_.matrixL().solve(k_star);
    post.covariance = k_star_star - v.transpose() * v;
    post.covariance = 0.5 * (post.covariance + post.covariance.transpose()).eval();
    const double clamp_limit = 1e-8 * std::max(1.0, kernel_.signal_variance);
    for (Eigen::Index i = 0; i < post.covariance.rows(); ++i) {
        if (post.covariance(i, i) < 0.0) {
            if (post.covariance(i, i) < -clamp_limit)
                throw NumericalError("posterior variance significantly negative: " +
                                     std::to_string(post.covariance(i, i)));
            post.covariance(i, i) = 0.0;
            ++post.clamped_diagonal;
        }
    }
    return post;
}

void GpModel::predict(const Eigen::Ref<const Matrix>& test_positions, Vector& mean,
                      Vector& variance) const {
    if (test_positions.cols() != training_.dim())
        throw ConfigError("test positions have wrong dimension");
    // Pointwise path: never forms the test-test covariance, so large grids stay cheap.
    const Matrix k_star = gram(kernel_, training_.positions, test_positions);
    mean = (k_star.transpose() * alpha_).array() + offset_;
    const Matrix v = llt_.matrixL().solve(k_star);
    variance.resize(test_positions.rows());
    const double clamp_limit = 1e-8 * std::max(1.0, kernel_.signal_variance);
    for (Eigen::Index i = 0; i < test_positions.rows(); ++i) {
        double var = kernel_.signal_variance - v.col(i).squaredNorm();
        if (var < 0.0) {
            if (var < -clamp_limit)
                throw NumericalError("posterior variance significantly negative: " +
                                     std::to_string(var));
            var = 0.0;
        }
        variance(i) = var;
    }
}

namespace {

struct LogSpace {
    // x = [log l_1..d, log sigma_f, log sigma_n]
    static Kernel kernel_of(const Vector& x, Eigen::Index dim) {
        Kernel k;
        k.lengthscales = x.head(dim).array().exp();
        const double sf = std::exp(x(dim));
        k.signal_variance = sf * sf;
        return k;
    }
    static double noise_of(const Vector& x, Eigen::Index dim) {
        const double sn = std::exp(x(dim + 1));
        return sn * sn;
    }
};

}  // namespace

GpModel fit_hyperparameters(const TrainingSet& training, const GpFitConfig& config,
                            FitDiagnostics* diagnostics) {
    const Eigen::Index dim = training.dim();
    const Eigen::Index l = training.size();

    FitDiagnostics local;
    FitDiagnostics& diag = diagnostics ? *diagnostics : local;
    diag = FitDiagnostics{};

    // Per-dimension extent of the training positions; the restart ranges and
    // parameter bounds scale with it.
    Vector extent(dim);
    for (Eigen::Index d = 0; d < dim; ++d) {
        const double span =
            training.positions.col(d).maxCoeff() - training.positions.col(d).minCoeff();
        extent(d) = span > 0.0 ? span : 1.0;
    }
    const double mean_y = training.values.mean();
    double var_y = l > 1 ? (training.values.array() - mean_y).square().sum() / (l - 1) : 0.0;
    if (config.mean == MeanHandling::zero) var_y += mean_y * mean_y;
    if (!(var_y > 0.0)) var_y = std::max(1e-16, 1e-16 * mean_y * mean_y);

    if (l < 2) {
        Kernel prior{1.0, extent};
        GpModel model(prior, std::max(kNoiseFloorRel * var_y, config.noise_floor), training,
                      config.mean);
        diag.single_point = true;
        diag.log_marginal = model.log_marginal();
        return model;
    }

    const double noise_floor = std::max(kNoiseFloorRel * var_y, config.noise_floor);

    Vector lower(dim + 2), upper(dim + 2);
    for (Eigen::Index d = 0; d < dim; ++d) {
        lower(d) = std::log(1e-3 * extent(d));
        upper(d) = std::log(1e3 * extent(d));
    }
    lower(dim) = 0.5 * std::log(1e-8 * var_y);
    upper(dim) = 0.5 * std::log(1e8 * var_y);
    lower(dim + 1) = 0.5 * std::log(noise_floor);
    upper(dim + 1) = 0.5 * std::log(1e2 * var_y);

    const auto clamp = [&](Vector x) {
        return x.cwiseMax(lower).cwiseMin(upper).eval();
    };
    const auto evaluate = [&](const Vector& x) -> LogMarginal {
        return log_marginal_likelihood(LogSpace::kernel_of(x, dim), LogSpace::noise_of(x, dim),
                                       training, config.mean);
    };

    NormalSampler sampler(mix_seed(config.seed, 0xf17));
    const auto sample_start = [&](int restart) {
        Vector x(dim + 2);
        if (restart == 0) {
            // Deterministic midpoint start: lengthscale at half the extent,
            // signal variance at the observation variance, noise at 1e-3 of it.
            for (Eigen::Index d = 0; d < dim; ++d) x(d) = std::log(0.5 * extent(d));
            x(dim) = 0.5 * std::log(var_y);
            x(dim + 1) = 0.5 * std::log(1e-3 * var_y);
            return clamp(x);
        }
        if (restart == 1) {
            // Deterministic smooth start: long lengthscale, near-noiseless.
            for (Eigen::Index d = 0; d < dim; ++d) x(d) = std::log(extent(d));
            x(dim) = 0.5 * std::log(var_y);
            x(dim + 1) = 0.5 * std::log(1e-6 * var_y);
            return clamp(x);
        }
        for (Eigen::Index d = 0; d < dim; ++d) {
            const double lo = std::log(0.05 * extent(d)), hi = std::log(2.0 * extent(d));
            x(d) = lo + (hi - lo) * sampler.next_unit();
        }
        {
            const double lo = std::log(0.1 * var_y), hi = std::log(10.0 * var_y);
            x(dim) = 0.5 * (lo + (hi - lo) * sampler.next_unit());
        }
        {
            const double lo = std::log(1e-6 * var_y), hi = std::log(var_y);
            x(dim + 1) = 0.5 * (lo + (hi - lo) * sampler.next_unit());
        }
        return clamp(x);
    };

    bool any_success = false;
    double best_value = -std::numeric_limits<double>::infinity();
    Vector best_x;
    FitDiagnostics best_diag;

    for (int restart = 0; restart < std::max(1, config.restarts); ++restart) {
        Vector x = sample_start(restart);
        LogMarginal current;
        try {
            current = evaluate(x);
        } catch (const NumericalError&) {
            continue;
        }
        int iterations = 0;
        bool converged = false;
        double step_memory = 1.0;  // grows after easy accepts, so flat valleys get crossed
        while (iterations < config.max_iterations) {
            ++iterations;
            const Vector& g = current.gradient;
            if (g.norm() <= config.gradient_tol) {
                converged = true;
                break;
            }
            // Backtracking line search along the gradient (ascent).
            double step = std::min(4.0 * step_memory, 1e3) / std::max(1.0, g.norm());
            bool accepted = false;
            for (int half = 0; half < 60; ++half) {
                const Vector candidate = clamp(x + step * g);
                try {
                    const LogMarginal trial = evaluate(candidate);
                    if (trial.value > current.value + 1e-4 * g.dot(candidate - x)) {
                        x = candidate;
                        current = trial;
                        accepted = true;
                        step_memory = std::max(step * std::max(1.0, g.norm()), 1e-6);
                        break;
                    }
                } catch (const NumericalError&) {
                    // shrink into factorizable territory
                }
                step *= 0.5;
            }
            if (!accepted) {
                converged = current.gradient.norm() <= 1e3 * config.gradient_tol;
                break;
            }
        }
        any_success = true;
        if (current.value > best_value) {
            best_value = current.value;
            best_x = x;
            best_diag.log_marginal = current.value;
            best_diag.gradient_norm = current.gradient.norm();
            best_diag.iterations = iterations;
            best_diag.converged = converged;
        }
    }
    if (!any_success)
        throw NumericalError("all hyperparameter restarts failed to factorize K_y");

    diag = best_diag;
    const Kernel kernel = LogSpace::kernel_of(best_x, dim);
    const double noise = std::max(LogSpace::noise_of(best_x, dim), noise_floor);
    return GpModel(kernel, noise, training, config.mean);
}

void write_gp_model_json(const std::string& path, const GpModel& model,
                         const std::string& parameter_name) {
    nlohmann::json j;
    j["schema_version"] = 1;
    if (!parameter_name.empty()) j["parameter"] = parameter_name;
    j["kernel"]["signal_variance"] = model.kernel().signal_variance;
    j["kernel"]["lengthscales"] =
        std::vector<double>(model.kernel().lengthscales.begin(), model.kernel().lengthscales.end());
    j["noise_variance"] = model.noise_variance();
    j["mean_handling"] = model.mean_handling() == MeanHandling::zero ? "zero" : "empirical_mean";
    j["offset"] = model.offset();
    j["log_marginal"] = model.log_marginal();
    auto& tr = j["training"];
    tr["merged_duplicates"] = model.training().merged_duplicates;
    tr["values"] =
        std::vector<double>(model.training().values.begin(), model.training().values.end());
    std::vector<std::vector<double>> rows;
    for (int i = 0; i < model.training().size(); ++i) {
        const auto& p = model.training().positions;
        rows.emplace_back(p.row(i).begin(), p.row(i).end());
    }
    tr["positions"] = rows;

    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write GP model file: " + path);
    out << j.dump(2) << "\n";
}

GpModel read_gp_model_json(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read GP model file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("malformed GP model JSON " + path + ": " + e.what());
    }
    if (j.value("schema_version", 0) != 1)
        throw ConfigError("unsupported GP model schema_version in " + path);

    Kernel kernel;
    kernel.signal_variance = j.at("kernel").at("signal_variance").get<double>();
    const auto ls = j.at("kernel").at("lengthscales").get<std::vector<double>>();
    kernel.lengthscales = Eigen::Map<const Vector>(ls.data(), ls.size());

    const auto rows = j.at("training").at("positions").get<std::vector<std::vector<double>>>();
    const auto vals = j.at("training").at("values").get<std::vector<double>>();
    if (rows.empty() || rows.size() != vals.size())
        throw ConfigError("inconsistent training data in " + path);
    Matrix positions(rows.size(), rows[0].size());
    for (size_t i = 0; i < rows.size(); ++i)
        positions.row(i) = Eigen::Map<const Vector>(rows[i].data(), rows[i].size()).transpose();
    TrainingSet training;
    training.positions = std::move(positions);
    training.values = Eigen::Map<const Vector>(vals.data(), vals.size());
    training.merged_duplicates = j.at("training").value("merged_duplicates", 0);

    const MeanHandling mean = j.value("mean_handling", "empirical_mean") == std::string("zero")
                                  ? MeanHandling::zero
                                  : MeanHandling::empirical_mean;
    return GpModel(kernel, j.at("noise_variance").get<double>(), std::move(training), mean);
}

}  // namespace gpff
