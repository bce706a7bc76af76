#pragma once

#include <vector>

#include "hybrid_orbit/json_io.hpp"
#include "hybrid_orbit/numerics.hpp"

namespace hybrid_orbit {

// Signed permutation with 1-based source indices: out[k] = sign(s_k) * in[|s_k| - 1].
// {3, -1, 2} maps (a, b, c) to (c, -a, b).
class Relabeling {
public:
    Relabeling() = default;
    explicit Relabeling(std::vector<int> signed_sources);

    static Relabeling identity(int n);

    [[nodiscard]] int size() const { return static_cast<int>(sources_.size()); }
    [[nodiscard]] const std::vector<int>& sources() const { return sources_; }
    [[nodiscard]] Vector apply(const Vector& coords) const;
    [[nodiscard]] Relabeling inverse() const;
    [[nodiscard]] bool is_involution() const;

private:
    std::vector<int> sources_;
};

Vector relabel(const Vector& coords, const Relabeling& map);

// Plastic impact with extended inertia D_e (n_e x n_e, SPD) and contact
// constraint Jacobian E (c x n_e, full row rank).
struct ImpactModel {
    Matrix inertia;     // D_e
    Matrix constraint;  // E
    Relabeling relabeling;

    // Throws DimensionError / NumericalError when D_e is not symmetric positive
    // definite, E has the wrong width or is row-rank deficient.
    void validate() const;
};

struct ImpactResult {
    Vector velocity;  // post-impact, before relabeling
    Vector impulse;   // c contact impulses
};

// Solves [D_e -E'; E 0] [qdot+; F] = [D_e qdot-; 0] by LU with partial pivoting.
ImpactResult rigid_impact(const ImpactModel& model, const Vector& qdot_minus);

// Positions are relabeled only; velocities pass through the impact first.
struct ImpactReset {
    Vector position;
    Vector velocity;
    Vector impulse;
};

ImpactReset impact_reset(const ImpactModel& model, const Vector& q, const Vector& qdot_minus);

// {"D_e": Matrix, "E": Matrix, "relabel": [signed indices]}
ImpactModel impact_model_from_json(const Json& j);
Json to_json(const ImpactModel& model);

}  // namespace hybrid_orbit
