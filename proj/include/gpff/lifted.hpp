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

#include "gpff/transfer_function.hpp"
#include "gpff/types.hpp"

namespace gpff {

/// Trial-domain representation of a causal LTI system over N samples with zero
/// initial conditions: a lower-triangular Toeplitz convolution matrix whose
/// (i, j) entry is impulse_response[i - j] for i >= j.
class LiftedOperator {
public:
    explicit LiftedOperator(Vector impulse);

    int trial_length() const { return static_cast<int>(impulse_.size()); }
    const Vector& impulse() const { return impulse_; }

    /// Materialized N x N matrix.
    Matrix matrix() const;

    /// Equivalent to matrix() * x without forming the matrix (causal convolution).
    Vector apply(const Eigen::Ref<const Vector>& x) const;

    /// Series composition: same as lift of the cascaded system over the trial.
    LiftedOperator compose(const LiftedOperator& inner) const;

private:
    Vector impulse_;
};

/// Lift a system over a trial of length n. Throws ConfigError for n < 1.
LiftedOperator lift(const DiscreteTransferFunction& sys, int n);

}  // namespace gpff
