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
#include "gpff/lifted.hpp"

namespace gpff {

LiftedOperator::LiftedOperator(Vector impulse) : impulse_(std::move(impulse)) {
    if (impulse_.size() == 0) throw ConfigError("lifted operator over an empty trial");
}

Matrix LiftedOperator::matrix() const {
    const Eigen::Index n = impulse_.size();
    Matrix m = Matrix::Zero(n, n);
    for (Eigen::Index j = 0; j < n; ++j)
        for (Eigen::Index i = j; i < n; ++i) m(i, j) = impulse_(i - j);
    return m;
}

Vector LiftedOperator::apply(const Eigen::Ref<const Vector>& x) const {
    const Eigen::Index n = impulse_.size();
    if (x.size() != n) throw NumericalError("lifted operator applied to a signal of wrong length");
    Vector out = Vector::Zero(n);
    for (Eigen::Index k = 0; k < n; ++k) {
        double acc = 0.0;
        for (Eigen::Index i = 0; i <= k; ++i) acc += impulse_(i) * x(k - i);
        out(k) = acc;
    }
    return out;
}

LiftedOperator LiftedOperator::compose(const LiftedOperator& inner) const {
    // Truncated convolution of causal impulse responses equals the lift of the
    // series-composed rational system over the same trial.
    if (inner.trial_length() != trial_length())
        throw NumericalError("composing lifted operators of different trial lengths");
    return LiftedOperator(apply(inner.impulse_));
}

LiftedOperator lift(const DiscreteTransferFunction& sys, int n) {
    if (n < 1) throw ConfigError("lift requires a trial of at least one sample");
    return LiftedOperator(impulse_response(sys, n));
}

}  // namespace gpff
