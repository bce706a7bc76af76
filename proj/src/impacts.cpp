#include "hybrid_orbit/impacts.hpp"

#include <cmath>
#include <cstdlib>
#include <numeric>
#include <sstream>

#include "hybrid_orbit/errors.hpp"

namespace hybrid_orbit {

Relabeling::Relabeling(std::vector<int> signed_sources) : sources_(std::move(signed_sources)) {
    const int n = size();
    std::vector<bool> seen(static_cast<std::size_t>(n), false);
    for (int s : sources_) {
        const int idx = std::abs(s);
        if (idx < 1 || idx > n || seen[static_cast<std::size_t>(idx - 1)]) {
            throw std::invalid_argument("relabeling: entries must be a signed permutation of 1.." +
                                        std::to_string(n));
        }
        seen[static_cast<std::size_t>(idx - 1)] = true;
    }
}

Relabeling Relabeling::identity(int n) {
    std::vector<int> src(static_cast<std::size_t>(n));
    std::iota(src.begin(), src.end(), 1);
    return Relabeling(std::move(src));
}

Vector Relabeling::apply(const Vector& coords) const {
    if (coords.size() != size()) {
        throw DimensionError("relabel: map has " + std::to_string(size()) + " entries, vector has " +
                             std::to_string(coords.size()));
    }
    Vector out(coords.size());
    for (int k = 0; k < size(); ++k) {
        const int s = sources_[static_cast<std::size_t>(k)];
        out(k) = (s < 0 ? -1.0 : 1.0) * coords(std::abs(s) - 1);
    }
    return out;
}

Relabeling Relabeling::inverse() const {
    std::vector<int> inv(sources_.size());
    for (int k = 0; k < size(); ++k) {
        const int s = sources_[static_cast<std::size_t>(k)];
        inv[static_cast<std::size_t>(std::abs(s) - 1)] = (s < 0 ? -1 : 1) * (k + 1);
    }
    return Relabeling(std::move(inv));
}

bool Relabeling::is_involution() const { return inverse().sources_ == sources_; }

Vector relabel(const Vector& coords, const Relabeling& map) { return map.apply(coords); }

void ImpactModel::validate() const {
    const Eigen::Index n = inertia.rows();
    if (inertia.cols() != n || n == 0) {
        throw DimensionError("impact model: D_e must be square and non-empty");
    }
    if (constraint.cols() != n && constraint.rows() > 0) {
        throw DimensionError("impact model: E has " + std::to_string(constraint.cols()) +
                             " columns, D_e is " + std::to_string(n) + "x" + std::to_string(n));
    }
    if (symmetry_defect(inertia) > 1e-10) {
        throw NumericalError("impact model: D_e is not symmetric");
    }
    if (inertia.llt().info() != Eigen::Success) {
        throw NumericalError("impact model: D_e is not positive definite");
    }
    if (constraint.rows() > 0) {
        Eigen::ColPivHouseholderQR<Matrix> qr(constraint.transpose());
        if (qr.rank() < constraint.rows()) {
            throw NumericalError("impact model: E is row-rank deficient");
        }
    }
    if (relabeling.size() != 0 && relabeling.size() != n) {
        throw DimensionError("impact model: relabeling has " + std::to_string(relabeling.size()) +
                             " entries for " + std::to_string(n) + " coordinates");
    }
}

ImpactResult rigid_impact(const ImpactModel& model, const Vector& qdot_minus) {
    model.validate();
    const Eigen::Index n = model.inertia.rows();
    const Eigen::Index c = model.constraint.rows();
    if (qdot_minus.size() != n) {
        throw DimensionError("rigid_impact: velocity has size " + std::to_string(qdot_minus.size()) +
                             ", expected " + std::to_string(n));
    }
    if (c == 0) {
        return ImpactResult{qdot_minus, Vector(0)};
    }
    Matrix block = Matrix::Zero(n + c, n + c);
    block.topLeftCorner(n, n) = model.inertia;
    block.topRightCorner(n, c) = -model.constraint.transpose();
    block.bottomLeftCorner(c, n) = model.constraint;
    Vector rhs = Vector::Zero(n + c);
    rhs.head(n) = model.inertia * qdot_minus;

    Eigen::PartialPivLU<Matrix> lu(block);
    const double det = lu.determinant();
    if (!std::isfinite(det) || det == 0.0) {
        throw NumericalError("rigid_impact: singular impact block matrix");
    }
    const Vector sol = lu.solve(rhs);
    if (!sol.allFinite()) {
        throw NumericalError("rigid_impact: singular impact block matrix");
    }
    return ImpactResult{sol.head(n), sol.tail(c)};
}

ImpactReset impact_reset(const ImpactModel& model, const Vector& q, const Vector& qdot_minus) {
    const ImpactResult hit = rigid_impact(model, qdot_minus);
    const Relabeling map =
        model.relabeling.size() == 0 ? Relabeling::identity(static_cast<int>(q.size()))
                                     : model.relabeling;
    return ImpactReset{map.apply(q), map.apply(hit.velocity), hit.impulse};
}

ImpactModel impact_model_from_json(const Json& j) {
    if (!j.is_object() || !j.contains("D_e") || !j.contains("E")) {
        throw InputError("impact model: expected fields \"D_e\" and \"E\"");
    }
    ImpactModel model;
    model.inertia = matrix_from_json(j.at("D_e"), "D_e");
    model.constraint = matrix_from_json(j.at("E"), "E");
    if (j.contains("relabel")) {
        const Json& r = j.at("relabel");
        if (!r.is_array()) {
            throw InputError("relabel: expected an array of signed indices");
        }
        std::vector<int> src;
        for (const Json& e : r) {
            if (!e.is_number_integer()) {
                throw InputError("relabel: entries must be integers");
            }
            src.push_back(e.get<int>());
        }
        try {
            model.relabeling = Relabeling(std::move(src));
        } catch (const std::invalid_argument& e) {
            throw InputError(e.what());
        }
    }
    return model;
}

Json to_json(const ImpactModel& model) {
    return Json{{"D_e", matrix_to_json(model.inertia)},
                {"E", matrix_to_json(model.constraint)},
                {"relabel", model.relabeling.sources()}};
}

}  // namespace hybrid_orbit
