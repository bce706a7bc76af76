#pragma once

#include <string>
#include <vector>

#include "hybrid_orbit/json_io.hpp"
#include "hybrid_orbit/numerics.hpp"

namespace hybrid_orbit {

// Published two-phase biped data, transcribed at four decimals.
struct PaperFixture {
    Matrix a1, a2;  // open-loop partial-map Jacobians
    Matrix a;       // their product as printed
    std::vector<Complex> eigenvalues;
    double rho_a = 0.0;
    Matrix f1, f2;    // parameter sensitivities
    Matrix k1, k2;    // scale-factor gains
    Matrix a1d, a2d;  // designed Jacobians
    Matrix ad;        // designed product
    double rho_ad = 0.0;
    // Pair of per-phase contractions whose product is unstable.
    Matrix remark_a1d, remark_a2d;
    double remark_rho_factor = 0.0;
    double remark_rho_product = 0.0;
};

PaperFixture paper_fixture_from_json(const Json& j);
Json to_json(const PaperFixture& fixture);

// The copy of fixtures/paper.json compiled into the library.
PaperFixture builtin_paper_fixture();

// Addressable scalar entry of a fixture, e.g. "K1(4,3)" or "eigenvalues[1].im".
struct FixtureEntry {
    std::string name;
    std::string field;  // top-level field the entry belongs to, e.g. "K1"
    double* value;
};

std::vector<FixtureEntry> fixture_entries(PaperFixture& fixture);

struct FixtureCheck {
    std::string name;
    bool pass = false;
    double measured = 0.0;   // worst deviation
    double tolerance = 0.0;
    std::string detail;      // where the worst deviation sits
    std::vector<std::string> depends_on;  // fixture fields read by the check
};

struct VerifyReport {
    std::vector<FixtureCheck> checks;

    [[nodiscard]] bool all_pass() const;
    [[nodiscard]] const FixtureCheck& check(const std::string& name) const;
};

// Recomputes every published quantity from its inputs and compares.
// tolerance_scale multiplies every tier (1e-3 direct, 5e-3 products,
// 2e-2 gains, 1e-4 / 1e-10 for the instability example).
VerifyReport verify_paper(const PaperFixture& fixture, double tolerance_scale = 1.0);

// Result of perturbing a single fixture entry and re-running the checks.
struct FaultInjection {
    std::string entry;   // e.g. "K1(4,3)"
    std::string field;   // e.g. "K1"
    double delta = 0.0;
    VerifyReport report;
    std::vector<std::string> flipped;     // checks whose verdict changed
    std::vector<std::string> dependents;  // checks reading `field`

    // Every flipped check reads the corrupted field.
    [[nodiscard]] bool confined() const;
    // At least one dependent check is red after the corruption.
    [[nodiscard]] bool detected() const;
};

// Throws InputError for an unknown entry name.
FaultInjection inject_fault(const PaperFixture& fixture, const std::string& entry,
                            double delta = 0.1, double tolerance_scale = 1.0);

// Fixed-width table, one row per check.
std::string format_verify_report(const VerifyReport& report);

}  // namespace hybrid_orbit
