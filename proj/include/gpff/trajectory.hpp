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

#include "gpff/types.hpp"

namespace gpff {

/// Sampled point-to-point reference, one column per axis. Rest-to-rest: the
/// first two and last two samples of every axis are identical, so backward
/// differences vanish at both ends.
struct Reference {
    Matrix samples;      ///< N x axes
    double sample_time;
    Vector start;
    Vector end;
    int order = 0;       ///< smoothness order of the generating profile (0 = imported)
    int motion_start = 0;
    int motion_length = 0;

    int length() const { return static_cast<int>(samples.rows()); }
    int axis_count() const { return static_cast<int>(samples.cols()); }
};

/// Symmetric point-to-point profile built by discrete integration, so the
/// sampled backward differences are exact: order 2 is acceleration-limited
/// (bang-bang acceleration), order 3 is jerk-limited (trapezoid-free S-curve).
/// All axes share the timing; displacements scale per axis.
Reference polynomial_reference(const Eigen::Ref<const Vector>& start,
                               const Eigen::Ref<const Vector>& end, double duration, double ts,
                               int order = 3);

/// (1 - q^-1)/ts with the start-padding convention r(-1) = r(0).
Vector backward_difference(const Eigen::Ref<const Vector>& signal, double ts);

/// (1 - q^-1)^2/ts^2 with padding r(-1) = r(-2) = r(0).
Vector second_backward_difference(const Eigen::Ref<const Vector>& signal, double ts);

enum class BasisKind { velocity, acceleration, custom };

/// One column of the basis matrix. Custom columns are arbitrary pure maps of
/// the reference (e.g. sign of velocity for friction-style feedforward).
struct BasisDescriptor {
    BasisKind kind;
    std::string name;
    std::function<Vector(const Reference&, int axis)> map;  // set for kind == custom

    static BasisDescriptor velocity();
    static BasisDescriptor acceleration();
    static BasisDescriptor custom(std::string name, std::function<Vector(const Reference&, int axis)> map);
    /// Built-in custom column: sign of the backward-difference velocity.
    static BasisDescriptor sign_velocity();
};

/// Parses "velocity" / "acceleration" / "sign_velocity"; throws ConfigError otherwise.
BasisDescriptor parse_basis_kind(const std::string& name);

/// N x n_theta map from feedforward parameters to a feedforward signal,
/// f = columns * theta.
struct BasisMatrix {
    Matrix columns;
    std::vector<BasisDescriptor> descriptors;

    int parameter_count() const { return static_cast<int>(columns.cols()); }
    int trial_length() const { return static_cast<int>(columns.rows()); }
    Vector feedforward(const Eigen::Ref<const Vector>& theta) const { return columns * theta; }
};

/// Evaluates the descriptor columns for one axis of the reference, in order.
BasisMatrix build_basis(const Reference& r, const std::vector<BasisDescriptor>& kinds, int axis = 0);

/// CSV export/import, columns k,t,r0[,r1...].
void write_reference_csv(const std::string& path, const Reference& r);
Reference read_reference_csv(const std::string& path);

}  // namespace gpff
