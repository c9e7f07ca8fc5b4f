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
#include "gpff/trajectory.hpp"

#include <cmath>

#include "gpff/csv.hpp"

namespace gpff {

Reference polynomial_reference(const Eigen::Ref<const Vector>& start,
                               const Eigen::Ref<const Vector>& end, double duration, double ts,
                               int order) {
    if (start.size() != end.size()) throw ConfigError("start/end dimension mismatch");
    if (start.size() < 1) throw ConfigError("reference needs at least one axis");
    if (!(ts > 0.0)) throw ConfigError("sample time must be positive");
    if (order != 2 && order != 3) throw ConfigError("profile order must be 2 or 3");
    if (duration < 4.0 * ts) throw ConfigError("motion duration shorter than 4 samples");

    const int n = static_cast<int>(std::llround(duration / ts)) + 1;
    const int phase = order == 3 ? (n - 4) / 4 : (n - 4) / 2;
    if (phase < 1)
        throw ConfigError("duration too short for an order-" + std::to_string(order) + " profile");
    const int motion = order == 3 ? 4 * phase : 2 * phase;
    const int leftover = (n - 4) - motion;
    const int lead = 2 + leftover / 2;

    // Unit profile by exact cumulative sums; the highest derivative is a
    // symmetric +-1 sequence, so acceleration and velocity return to zero
    // without rounding error and the sampled differences of r are exact.
    Vector accel(motion);
    if (order == 2) {
        for (int t = 0; t < motion; ++t) accel(t) = t < phase ? 1.0 : -1.0;
    } else {
        double a = 0.0;
        for (int t = 0; t < motion; ++t) {
            const double jerk = (t < phase || t >= 3 * phase) ? 1.0 : -1.0;
            a += jerk;
            accel(t) = a;
        }
    }
    Vector vel(motion), pos(motion);
    double v = 0.0, p = 0.0;
    for (int t = 0; t < motion; ++t) {
        v += accel(t);
        vel(t) = v;
        p += v;
        pos(t) = p;
    }
    const double unit_displacement = pos(motion - 1);

    Reference r;
    r.sample_time = ts;
    r.start = start;
    r.end = end;
    r.order = order;
    r.motion_start = lead;
    r.motion_length = motion;
    r.samples.resize(n, start.size());
    for (Eigen::Index axis = 0; axis < start.size(); ++axis) {
        const double scale = (end(axis) - start(axis)) / unit_displacement;
        for (int k = 0; k < n; ++k) {
            if (k < lead)
                r.samples(k, axis) = start(axis);
            else if (k < lead + motion)
                r.samples(k, axis) = start(axis) + scale * pos(k - lead);
            else
                r.samples(k, axis) = end(axis);
        }
    }
    return r;
}

Vector backward_difference(const Eigen::Ref<const Vector>& signal, double ts) {
    Vector out(signal.size());
    out(0) = 0.0;
    for (Eigen::Index k = 1; k < signal.size(); ++k) out(k) = (signal(k) - signal(k - 1)) / ts;
    return out;
}

Vector second_backward_difference(const Eigen::Ref<const Vector>& signal, double ts) {
    const double ts2 = ts * ts;
    Vector out(signal.size());
    out(0) = 0.0;
    if (signal.size() > 1) out(1) = (signal(1) - signal(0)) / ts2;
    for (Eigen::Index k = 2; k < signal.size(); ++k)
        out(k) = (signal(k) - 2.0 * signal(k - 1) + signal(k - 2)) / ts2;
    return out;
}

BasisDescriptor BasisDescriptor::velocity() {
    return BasisDescriptor{BasisKind::velocity, "velocity", nullptr};
}

BasisDescriptor BasisDescriptor::acceleration() {
    return BasisDescriptor{BasisKind::acceleration, "acceleration", nullptr};
}

BasisDescriptor BasisDescriptor::custom(std::string name,
                                        std::function<Vector(const Reference&, int axis)> map) {
    if (!map) throw ConfigError("custom basis descriptor '" + name + "' has no signal map");
    return BasisDescriptor{BasisKind::custom, std::move(name), std::move(map)};
}

BasisDescriptor BasisDescriptor::sign_velocity() {
    return custom("sign_velocity", [](const Reference& r, int axis) {
        Vector v = backward_difference(r.samples.col(axis), r.sample_time);
        return v.unaryExpr([](double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }).eval();
    });
}

BasisDescriptor parse_basis_kind(const std::string& name) {
    if (name == "velocity") return BasisDescriptor::velocity();
    if (name == "acceleration") return BasisDescriptor::acceleration();
    if (name == "sign_velocity") return BasisDescriptor::sign_velocity();
    throw ConfigError("unknown basis kind '" + name + "'");
}

BasisMatrix build_basis(const Reference& r, const std::vector<BasisDescriptor>& kinds, int axis) {
    if (kinds.empty()) throw ConfigError("basis descriptor list is empty");
    if (axis < 0 || axis >= r.axis_count()) throw ConfigError("basis axis out of range");
    BasisMatrix basis;
    basis.columns.resize(r.length(), static_cast<Eigen::Index>(kinds.size()));
    basis.descriptors = kinds;
    for (size_t i = 0; i < kinds.size(); ++i) {
        switch (kinds[i].kind) {
            case BasisKind::velocity:
                basis.columns.col(i) = backward_difference(r.samples.col(axis), r.sample_time);
                break;
            case BasisKind::acceleration:
                basis.columns.col(i) = second_backward_difference(r.samples.col(axis), r.sample_time);
                break;
            case BasisKind::custom: {
                if (!kinds[i].map)
                    throw ConfigError("custom basis descriptor '" + kinds[i].name + "' has no signal map");
                Vector col = kinds[i].map(r, axis);
                if (col.size() != r.length())
                    throw ConfigError("custom basis column '" + kinds[i].name + "' has wrong length");
                basis.columns.col(i) = col;
                break;
            }
        }
    }
    return basis;
}

void write_reference_csv(const std::string& path, const Reference& r) {
    std::vector<std::string> header{"k", "t"};
    for (int a = 0; a < r.axis_count(); ++a) header.push_back("r" + std::to_string(a));
    std::vector<std::vector<std::string>> rows;
    rows.reserve(r.length());
    for (int k = 0; k < r.length(); ++k) {
        std::vector<std::string> row{std::to_string(k), csv::cell(k * r.sample_time)};
        for (int a = 0; a < r.axis_count(); ++a) row.push_back(csv::cell(r.samples(k, a)));
        rows.push_back(std::move(row));
    }
    csv::write(path, header, rows);
}

Reference read_reference_csv(const std::string& path) {
    const csv::Table table = csv::read(path);
    if (table.columns.size() < 3 || table.columns[0] != "k" || table.columns[1] != "t")
        throw ConfigError("reference CSV must have columns k,t,r0[,r1...]: " + path);
    const int axes = static_cast<int>(table.columns.size()) - 2;
    const int n = static_cast<int>(table.rows.size());
    if (n < 4) throw ConfigError("reference CSV has fewer than 4 samples: " + path);

    Reference r;
    r.samples.resize(n, axes);
    for (int k = 0; k < n; ++k)
        for (int a = 0; a < axes; ++a) r.samples(k, a) = csv::to_double(table.rows[k][2 + a]);
    r.sample_time = csv::to_double(table.rows[1][1]) - csv::to_double(table.rows[0][1]);
    if (!(r.sample_time > 0.0)) throw ConfigError("reference CSV has non-increasing time column");
    r.start = r.samples.row(0).transpose();
    r.end = r.samples.row(n - 1).transpose();

    int first = 0;
    while (first + 1 < n && (r.samples.row(first + 1) - r.samples.row(0)).cwiseAbs().maxCoeff() == 0.0)
        ++first;
    int last = n - 1;
    while (last > 0 && (r.samples.row(last - 1) - r.samples.row(n - 1)).cwiseAbs().maxCoeff() == 0.0)
        --last;
    r.motion_start = first + 1;
    r.motion_length = std::max(0, last - first);
    return r;
}

}  // namespace gpff
