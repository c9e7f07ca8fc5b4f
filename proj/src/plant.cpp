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
#include "gpff/plant.hpp"

#include <cmath>
#include <sstream>

namespace gpff {

namespace {

Vector convolve(const Vector& a, const Vector& b) {
    Vector out = Vector::Zero(a.size() + b.size() - 1);
    for (Eigen::Index i = 0; i < a.size(); ++i)
        for (Eigen::Index j = 0; j < b.size(); ++j)
            out(i + j) += a(i) * b(j);
    return out;
}

Vector padded_sum(const Vector& a, const Vector& b) {
    Vector out = Vector::Zero(std::max(a.size(), b.size()));
    out.head(a.size()) += a;
    out.head(b.size()) += b;
    return out;
}

std::string format_position(const Eigen::Ref<const Vector>& rho) {
    std::ostringstream os;
    os << "(";
    for (Eigen::Index i = 0; i < rho.size(); ++i) os << (i ? ", " : "") << rho(i);
    os << ")";
    return os.str();
}

}  // namespace

SpatialPlant::SpatialPlant(std::string kind, int axes, DomainBox domain, double ts, AxisModel model)
    : kind_(std::move(kind)), axes_(axes), domain_(std::move(domain)), sample_time_(ts),
      model_(std::move(model)), nominal_masses_(axes, 1.0) {}

void SpatialPlant::set_domain(DomainBox box) {
    if (box.dim() != domain_.dim()) throw ConfigError("domain box dimension mismatch");
    if (((box.hi - box.lo).array() <= 0.0).any())
        throw ConfigError("domain box must have positive extent in every dimension");
    // probe every corner: the dynamics must evaluate to finite, well-posed systems
    const int dim = box.dim();
    for (int corner = 0; corner < (1 << dim); ++corner) {
        Vector rho(dim);
        for (int d = 0; d < dim; ++d) rho(d) = (corner >> d) & 1 ? box.hi(d) : box.lo(d);
        for (int axis = 0; axis < axes_; ++axis) {
            const DiscreteTransferFunction sys = model_(rho, axis);
            if (!sys.num.allFinite() || !sys.den.allFinite())
                throw ConfigError("plant dynamics are not finite at a domain corner");
        }
    }
    domain_ = std::move(box);
}

DiscreteTransferFunction SpatialPlant::axis_dynamics(const Eigen::Ref<const Vector>& rho,
                                                     int axis) const {
    if (rho.size() != domain_.dim())
        throw DomainError("position has dimension " + std::to_string(rho.size()) + ", plant domain has " +
                          std::to_string(domain_.dim()));
    if (!domain_.contains(rho))
        throw DomainError("position " + format_position(rho) + " outside plant domain");
    if (axis < 0 || axis >= axes_) throw ConfigError("axis index out of range");
    return model_(rho, axis);
}

SpatialPlant SpatialPlant::spatial_mass(double nominal_mass, double ts) {
    DomainBox box{Vector::Zero(1), Vector::Ones(1)};
    auto model = [nominal_mass, ts](const Vector& rho, int) {
        const double m = spatial_mass_law(nominal_mass, rho(0));
        Vector num = Vector::Constant(1, ts * ts / m);
        Vector den(3);
        den << 1.0, -2.0, 1.0;
        return DiscreteTransferFunction(std::move(num), std::move(den), ts);
    };
    SpatialPlant plant("spatial_mass", 1, std::move(box), ts, std::move(model));
    plant.nominal_masses_ = {nominal_mass};
    return plant;
}

SpatialPlant SpatialPlant::mass_damper(double mass, double damping, double ts) {
    DomainBox box{Vector::Zero(1), Vector::Ones(1)};
    auto model = [mass, damping, ts](const Vector&, int) {
        Vector den(3);
        den(0) = mass / (ts * ts) + damping / ts;
        den(1) = -2.0 * mass / (ts * ts) - damping / ts;
        den(2) = mass / (ts * ts);
        return DiscreteTransferFunction(Vector::Ones(1), std::move(den), ts);
    };
    SpatialPlant plant("mass_damper", 1, std::move(box), ts, std::move(model));
    plant.nominal_masses_ = {mass};
    return plant;
}

SpatialPlant SpatialPlant::periodic_flux(double mass1, double mass2, double flux_amplitude,
                                         double magnet_pitch, double ts) {
    if (std::abs(flux_amplitude) >= 1.0)
        throw ConfigError("flux amplitude must stay below 1 to keep the actuator gain positive");
    DomainBox box{Vector::Zero(2), Vector::Ones(2)};
    auto model = [mass1, mass2, flux_amplitude, magnet_pitch, ts](const Vector& rho, int axis) {
        const double gain = axis == 0 ? periodic_gain_law(flux_amplitude, magnet_pitch, rho(0)) : 1.0;
        const double m = axis == 0 ? mass1 : mass2;
        Vector num = Vector::Constant(1, gain * ts * ts / m);
        Vector den(3);
        den << 1.0, -2.0, 1.0;
        return DiscreteTransferFunction(std::move(num), std::move(den), ts);
    };
    SpatialPlant plant("periodic_flux", 2, std::move(box), ts, std::move(model));
    plant.nominal_masses_ = {mass1, mass2};
    return plant;
}

FeedbackController::FeedbackController(std::vector<DiscreteTransferFunction> per_axis) {
    if (per_axis.empty()) throw ConfigError("controller needs at least one axis");
    per_axis_ = std::move(per_axis);
}

FeedbackController FeedbackController::pd(const std::vector<double>& nominal_masses,
                                          double bandwidth_hz, double damping_ratio, double ts) {
    if (!(bandwidth_hz > 0.0)) throw ConfigError("controller bandwidth must be positive");
    std::vector<DiscreteTransferFunction> axes;
    axes.reserve(nominal_masses.size());
    for (double m : nominal_masses) {
        const double w = 2.0 * M_PI * bandwidth_hz;
        const double kp = m * w * w;
        const double kd = 2.0 * damping_ratio * m * w;
        Vector num(2);
        num << kp + kd / ts, -kd / ts;
        axes.emplace_back(std::move(num), Vector::Ones(1), ts);
    }
    return FeedbackController(std::move(axes));
}

ClosedLoopMaps closed_loop_maps(const DiscreteTransferFunction& plant,
                                const DiscreteTransferFunction& controller) {
    // Characteristic polynomial of 1 + g c in q^-1.
    const Vector open_num = convolve(plant.num, controller.num);
    const Vector open_den = convolve(plant.den, controller.den);
    const Vector character = padded_sum(open_den, open_num);

    const double scale = character.cwiseAbs().maxCoeff();
    if (scale == 0.0 || std::abs(character(0)) < 1e-12 * scale)
        throw StabilityError("closed loop is ill-posed (algebraic loop: leading characteristic "
                             "coefficient vanishes)");

    // Marginal poles at |z| = 1 are legitimate over a finite trial (integrating
    // plants with the feedback off); only strictly unstable loops are rejected.
    std::ostringstream unstable;
    for (const auto& p : polynomial_roots(character)) {
        if (std::abs(p) > 1.0 + 1e-6) unstable << " |z|=" << std::abs(p);
    }
    if (!unstable.str().empty())
        throw StabilityError("closed loop unstable; pole magnitudes:" + unstable.str());

    const double ts = plant.sample_time;
    return ClosedLoopMaps{
        DiscreteTransferFunction(open_den, character, ts),
        DiscreteTransferFunction(open_num, character, ts),
        DiscreteTransferFunction(convolve(plant.num, controller.den), character, ts),
    };
}

DiscreteTransferFunction sensitivity(const DiscreteTransferFunction& plant,
                                     const DiscreteTransferFunction& controller) {
    return closed_loop_maps(plant, controller).sensitivity;
}

AxisLoopResult simulate_axis_closed_loop(const SpatialPlant& plant,
                                         const Eigen::Ref<const Vector>& rho,
                                         const FeedbackController& ctrl, int axis,
                                         const Eigen::Ref<const Vector>& r,
                                         const Eigen::Ref<const Vector>& f,
                                         const NoiseSpec& noise) {
    if (r.size() != f.size()) throw ConfigError("reference and feedforward lengths differ");
    const auto g = plant.axis_dynamics(rho, axis);
    const auto maps = closed_loop_maps(g, ctrl.axis(axis));

    // e = S (r - n) - gS f, y = r - e, u = C e + f; the measurement noise n
    // feeds back through the controller like a real output disturbance.
    Vector disturbed = r;
    if (noise.std_dev > 0.0) {
        NormalSampler sampler(mix_seed(noise.seed, static_cast<std::uint64_t>(axis)));
        for (Eigen::Index k = 0; k < disturbed.size(); ++k)
            disturbed(k) -= noise.std_dev * sampler();
    }
    AxisLoopResult out;
    out.e = filter(maps.sensitivity, disturbed) - filter(maps.process, f);
    out.y = r - out.e;
    out.u = filter(ctrl.axis(axis), out.e) + f;
    return out;
}

LoopResult simulate_closed_loop(const SpatialPlant& plant, const Eigen::Ref<const Vector>& rho,
                                const FeedbackController& ctrl, const Eigen::Ref<const Matrix>& r,
                                const Eigen::Ref<const Matrix>& f, const NoiseSpec& noise) {
    const int axes = plant.axis_count();
    if (ctrl.axis_count() != axes) throw ConfigError("controller axis count does not match plant");
    if (r.cols() != axes || f.cols() != axes)
        throw ConfigError("reference/feedforward must have one column per axis");

    const Eigen::Index n = r.rows();
    LoopResult out{Matrix(n, axes), Matrix(n, axes), Matrix(n, axes)};
    for (int axis = 0; axis < axes; ++axis) {
        AxisLoopResult one = simulate_axis_closed_loop(plant, rho, ctrl, axis, r.col(axis),
                                                       f.col(axis), noise);
        out.y.col(axis) = one.y;
        out.e.col(axis) = one.e;
        out.u.col(axis) = one.u;
    }
    return out;
}

}  // namespace gpff
