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

#include <functional>
#include <string>
#include <vector>

#include "gpff/transfer_function.hpp"
#include "gpff/types.hpp"

namespace gpff {

/// Axis-aligned box of valid initial positions.
struct DomainBox {
    Vector lo;
    Vector hi;

    int dim() const { return static_cast<int>(lo.size()); }
    bool contains(const Eigen::Ref<const Vector>& rho) const {
        if (rho.size() != lo.size()) return false;
        return (rho.array() >= lo.array()).all() && (rho.array() <= hi.array()).all();
    }
    Vector center() const { return 0.5 * (lo + hi); }
};

/// Effective mass of the spatially-distributed-mass plant at position rho.
inline double spatial_mass_law(double nominal_mass, double rho) {
    return nominal_mass * (1.0 - 2.0 * (0.5 - rho) * (0.5 - rho));
}

/// Actuator gain of the periodic-flux plant as a function of the first axis position.
inline double periodic_gain_law(double amplitude, double pitch, double rho1) {
    return 1.0 + amplitude * std::sin(2.0 * M_PI * rho1 / pitch);
}

/// A plant whose dynamics are LTI for a whole trial but depend on the initial
/// position rho. Evaluation freezes rho: the returned system does not change
/// while the reference plays out.
class SpatialPlant {
public:
    using AxisModel = std::function<DiscreteTransferFunction(const Vector& rho, int axis)>;

    SpatialPlant(std::string kind, int axes, DomainBox domain, double ts, AxisModel model);

    /// Frozen dynamics of one axis at rho. Throws DomainError outside the box.
    DiscreteTransferFunction axis_dynamics(const Eigen::Ref<const Vector>& rho, int axis) const;

    int axis_count() const { return axes_; }
    const DomainBox& domain() const { return domain_; }

    /// Restricts (or widens) the valid position box. The dynamics must stay
    /// well posed over the new box; the corners are checked.
    void set_domain(DomainBox box);
    double sample_time() const { return sample_time_; }
    const std::string& kind() const { return kind_; }
    /// Nominal masses used for controller scaling, one per axis.
    const std::vector<double>& nominal_masses() const { return nominal_masses_; }

    // Built-in plants.

    /// Double integrator with mass m(rho) = nominal * (1 - 2 (1/2 - rho)^2), rho in [0, 1].
    static SpatialPlant spatial_mass(double nominal_mass, double ts);

    /// Position-independent mass-damper, 1/(m (1-q^-1)^2/Ts^2 + d (1-q^-1)/Ts).
    static SpatialPlant mass_damper(double mass, double damping, double ts);

    /// Two decoupled axes over [0,1]^2; axis 1 actuator gain varies periodically
    /// with rho_1 (period = magnet pitch), axis 2 is position-independent.
    static SpatialPlant periodic_flux(double mass1, double mass2, double flux_amplitude,
                                      double magnet_pitch, double ts);

private:
    std::string kind_;
    int axes_;
    DomainBox domain_;
    double sample_time_;
    AxisModel model_;
    std::vector<double> nominal_masses_;
};

/// Per-axis feedback controllers (C in the loop).
class FeedbackController {
public:
    explicit FeedbackController(std::vector<DiscreteTransferFunction> per_axis);

    const DiscreteTransferFunction& axis(int i) const { return per_axis_.at(i); }
    int axis_count() const { return static_cast<int>(per_axis_.size()); }

    /// Discrete PD controller per axis, C = kp + kd (1-q^-1)/Ts with
    /// kp = m w^2, kd = 2 zeta m w, w = 2 pi bandwidth_hz. Gains scale with the
    /// nominal axis mass so every axis closes at the same bandwidth.
    static FeedbackController pd(const std::vector<double>& nominal_masses, double bandwidth_hz,
                                 double damping_ratio, double ts);

private:
    std::vector<DiscreteTransferFunction> per_axis_;
};

/// Default loop-shaping constants for the built-in plants. The bandwidth is
/// kept low so the effort-weight bias floor of the learned feedforward stays
/// well below the feedback-only error.
inline constexpr double kDefaultBandwidthHz = 3.0;
inline constexpr double kDefaultDampingRatio = 0.7;

/// Closed-loop transfer functions of the loop with plant g and controller c:
///   sensitivity   S  = 1/(1+gc)      (reference -> error, feedforward off)
///   complementary T  = gc/(1+gc)     (reference -> output)
///   process       gS = g/(1+gc)      (plant-input feedforward -> output)
struct ClosedLoopMaps {
    DiscreteTransferFunction sensitivity;
    DiscreteTransferFunction complementary;
    DiscreteTransferFunction process;
};

/// Builds the closed-loop maps; throws StabilityError if the loop is ill-posed
/// (algebraic loop) or any closed-loop pole magnitude is >= 1.
ClosedLoopMaps closed_loop_maps(const DiscreteTransferFunction& plant,
                                const DiscreteTransferFunction& controller);

/// S = (1 + g c)^-1 with the same well-posedness and stability checks.
DiscreteTransferFunction sensitivity(const DiscreteTransferFunction& plant,
                                     const DiscreteTransferFunction& controller);

/// Additive white Gaussian measurement noise, reproducible via the seed.
struct NoiseSpec {
    double std_dev = 0.0;
    std::uint64_t seed = 0;
};

struct LoopResult {
    Matrix y;  ///< measured output, N x axes
    Matrix e;  ///< servo error r - y
    Matrix u;  ///< plant input C e + f
};

struct AxisLoopResult {
    Vector y;
    Vector e;
    Vector u;
};

/// One decoupled axis of the loop below; noise.seed is still mixed with the
/// axis index, so per-axis runs reproduce the multi-axis simulation exactly.
AxisLoopResult simulate_axis_closed_loop(const SpatialPlant& plant,
                                         const Eigen::Ref<const Vector>& rho,
                                         const FeedbackController& ctrl, int axis,
                                         const Eigen::Ref<const Vector>& r,
                                         const Eigen::Ref<const Vector>& f,
                                         const NoiseSpec& noise = {});

/// Simulates the closed loop at frozen position rho for reference r and
/// feedforward f (both N x axes). Noise enters as a measurement disturbance:
/// the controller reacts to it and e = r - y holds for the measured output.
LoopResult simulate_closed_loop(const SpatialPlant& plant, const Eigen::Ref<const Vector>& rho,
                                const FeedbackController& ctrl, const Eigen::Ref<const Matrix>& r,
                                const Eigen::Ref<const Matrix>& f, const NoiseSpec& noise = {});

}  // namespace gpff
