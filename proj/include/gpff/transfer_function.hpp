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

#include <complex>
#include <vector>

#include "gpff/types.hpp"

namespace gpff {

/// Rational discrete-time LTI system in the backward-shift operator:
///
///   y(k) = [ num(q^-1) / den(q^-1) ] u(k),
///   num(q^-1) = num[0] + num[1] q^-1 + ... ,  den likewise.
///
/// den[0] != 0 so the difference-equation recursion is well posed.
struct DiscreteTransferFunction {
    Vector num;
    Vector den;
    double sample_time;

    DiscreteTransferFunction(Vector numerator, Vector denominator, double ts);

    int num_order() const { return static_cast<int>(num.size()) - 1; }
    int den_order() const { return static_cast<int>(den.size()) - 1; }

    /// Static gain num(1)/den(1); infinite for integrating systems.
    double dc_gain() const;

    static DiscreteTransferFunction gain(double g, double ts);
    /// Pure k-sample delay q^-k.
    static DiscreteTransferFunction delay(int k, double ts);
};

/// Zero-initial-condition response of the difference equation to `input`.
Vector filter(const DiscreteTransferFunction& sys, const Eigen::Ref<const Vector>& input);

/// First `n` samples of the impulse response.
Vector impulse_response(const DiscreteTransferFunction& sys, int n);

/// Series interconnection a*b (same sample time).
DiscreteTransferFunction series(const DiscreteTransferFunction& a, const DiscreteTransferFunction& b);

/// Parallel interconnection a+b (same sample time).
DiscreteTransferFunction parallel(const DiscreteTransferFunction& a, const DiscreteTransferFunction& b);

/// Frequency response at angular frequency `omega` rad/s, evaluated at z = e^{i omega Ts}.
std::complex<double> frequency_response(const DiscreteTransferFunction& sys, double omega);

/// Roots of a polynomial c[0] x^n + c[1] x^(n-1) + ... + c[n] via the companion matrix.
std::vector<std::complex<double>> polynomial_roots(const Eigen::Ref<const Vector>& coeffs);

/// z-domain poles: roots of z^m den(1/z).
std::vector<std::complex<double>> poles(const DiscreteTransferFunction& sys);

/// Largest pole magnitude (0 for FIR systems).
double max_pole_magnitude(const DiscreteTransferFunction& sys);

bool is_stable(const DiscreteTransferFunction& sys, double margin = 1.0);

}  // namespace gpff
