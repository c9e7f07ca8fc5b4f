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
#include "gpff/transfer_function.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>

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

}  // namespace

DiscreteTransferFunction::DiscreteTransferFunction(Vector numerator, Vector denominator, double ts)
    : num(std::move(numerator)), den(std::move(denominator)), sample_time(ts) {
    if (den.size() == 0 || num.size() == 0)
        throw ConfigError("transfer function needs nonempty numerator and denominator");
    if (den(0) == 0.0)
        throw ConfigError("transfer function denominator has zero leading (q^0) coefficient");
    if (!(sample_time > 0.0))
        throw ConfigError("transfer function sample time must be positive");
}

double DiscreteTransferFunction::dc_gain() const {
    double d = den.sum();
    if (d == 0.0) return std::numeric_limits<double>::infinity();
    return num.sum() / d;
}

DiscreteTransferFunction DiscreteTransferFunction::gain(double g, double ts) {
    return DiscreteTransferFunction(Vector::Constant(1, g), Vector::Ones(1), ts);
}

DiscreteTransferFunction DiscreteTransferFunction::delay(int k, double ts) {
    Vector n = Vector::Zero(k + 1);
    n(k) = 1.0;
    return DiscreteTransferFunction(std::move(n), Vector::Ones(1), ts);
}

Vector filter(const DiscreteTransferFunction& sys, const Eigen::Ref<const Vector>& input) {
    const Eigen::Index n = input.size();
    const Vector& b = sys.num;
    const Vector& a = sys.den;
    Vector out(n);
    for (Eigen::Index k = 0; k < n; ++k) {
        double acc = 0.0;
        for (Eigen::Index i = 0; i < b.size() && i <= k; ++i) acc += b(i) * input(k - i);
        for (Eigen::Index i = 1; i < a.size() && i <= k; ++i) acc -= a(i) * out(k - i);
        out(k) = acc / a(0);
    }
    return out;
}

Vector impulse_response(const DiscreteTransferFunction& sys, int n) {
    Vector delta = Vector::Zero(n);
    delta(0) = 1.0;
    return filter(sys, delta);
}

DiscreteTransferFunction series(const DiscreteTransferFunction& a, const DiscreteTransferFunction& b) {
    return DiscreteTransferFunction(convolve(a.num, b.num), convolve(a.den, b.den), a.sample_time);
}

DiscreteTransferFunction parallel(const DiscreteTransferFunction& a, const DiscreteTransferFunction& b) {
    Vector n = padded_sum(convolve(a.num, b.den), convolve(b.num, a.den));
    return DiscreteTransferFunction(std::move(n), convolve(a.den, b.den), a.sample_time);
}

std::complex<double> frequency_response(const DiscreteTransferFunction& sys, double omega) {
    const std::complex<double> qinv = std::exp(std::complex<double>(0.0, -omega * sys.sample_time));
    std::complex<double> n = 0.0, d = 0.0, p = 1.0;
    for (Eigen::Index i = 0; i < std::max(sys.num.size(), sys.den.size()); ++i) {
        if (i < sys.num.size()) n += sys.num(i) * p;
        if (i < sys.den.size()) d += sys.den(i) * p;
        p *= qinv;
    }
    return n / d;
}

std::vector<std::complex<double>> polynomial_roots(const Eigen::Ref<const Vector>& coeffs) {
    // Trim leading zeros; a constant has no roots.
    Eigen::Index first = 0;
    while (first < coeffs.size() && coeffs(first) == 0.0) ++first;
    const Eigen::Index m = coeffs.size() - first - 1;
    if (m < 1) return {};
    Matrix companion = Matrix::Zero(m, m);
    for (Eigen::Index i = 0; i < m; ++i) companion(0, i) = -coeffs(first + 1 + i) / coeffs(first);
    companion.block(1, 0, m - 1, m - 1).setIdentity();
    Eigen::EigenSolver<Matrix> solver(companion, /*computeEigenvectors=*/false);
    if (solver.info() != Eigen::Success)
        throw NumericalError("polynomial root finding did not converge");
    std::vector<std::complex<double>> roots(m);
    for (Eigen::Index i = 0; i < m; ++i) roots[i] = solver.eigenvalues()(i);
    return roots;
}

std::vector<std::complex<double>> poles(const DiscreteTransferFunction& sys) {
    // den(q^-1) = d0 + d1 q^-1 + ... + dm q^-m  =>  poles are roots of
    // d0 z^m + d1 z^(m-1) + ... + dm, i.e. the same coefficient list read in z.
    return polynomial_roots(sys.den);
}

double max_pole_magnitude(const DiscreteTransferFunction& sys) {
    double worst = 0.0;
    for (const auto& p : poles(sys)) worst = std::max(worst, std::abs(p));
    return worst;
}

bool is_stable(const DiscreteTransferFunction& sys, double margin) {
    return max_pole_magnitude(sys) < margin;
}

}  // namespace gpff
