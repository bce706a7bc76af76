#include "hybrid_orbit/cli.hpp"

#include <cmath>
#include <iomanip>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "hybrid_orbit/errors.hpp"
#include "hybrid_orbit/integrator.hpp"
#include "hybrid_orbit/json_io.hpp"
#include "hybrid_orbit/paper_fixture.hpp"
#include "hybrid_orbit/poincare.hpp"
#include "hybrid_orbit/synthesis.hpp"
#include "hybrid_orbit/synthetic.hpp"

namespace hybrid_orbit {

namespace {

struct IntegratorFlags {
    std::string scheme = "rk4";
    double step = 1e-3;
    double fd_step = 1e-5;

    [[nodiscard]] IntegratorConfig config() const {
        IntegratorConfig cfg;
        if (scheme == "rk4") {
            cfg.scheme = StepScheme::kRk4Fixed;
        } else if (scheme == "dopri") {
            cfg.scheme = StepScheme::kDormandPrince;
        } else {
            throw InputError("--scheme must be rk4 or dopri, got '" + scheme + "'");
        }
        cfg.base_step = step;
        if (!(fd_step > 0.0) || !std::isfinite(fd_step)) {
            throw InputError("--fd-step must be positive");
        }
        try {
            cfg.validate();
        } catch (const std::invalid_argument& e) {
            throw InputError(e.what());
        }
        return cfg;
    }
};

struct MethodFlags {
    std::string method = "scale";
    std::string msym_path;
    std::optional<double> eta;
    std::optional<double> q;
    std::optional<double> r;
    bool enforce_entry_bound = false;

    void validate() const {
        const GainMethod m = method_enum();
        if (!msym_path.empty() && m != GainMethod::kSymmetric) {
            throw InputError("--msym only applies to --method symmetric");
        }
        if (eta && m != GainMethod::kScaleFactor) {
            throw InputError("--eta only applies to --method scale");
        }
        if ((q || r || enforce_entry_bound) && m != GainMethod::kDlqr) {
            throw InputError("--q, --r and --enforce-t4 only apply to --method dlqr");
        }
        if (eta && !(*eta > 0.0 && *eta <= 1.0)) {
            throw InputError("--eta must lie in (0, 1]");
        }
        if ((q && !(*q > 0.0)) || (r && !(*r > 0.0))) {
            throw InputError("--q and --r must be positive");
        }
    }

    [[nodiscard]] GainMethod method_enum() const {
        try {
            return gain_method_from_string(method);
        } catch (const std::invalid_argument& e) {
            throw InputError(e.what());
        }
    }
};

void add_method_flags(CLI::App* cmd, MethodFlags& flags) {
    cmd->add_option("--method", flags.method, "symmetric | scale | dlqr")
        ->capture_default_str();
    cmd->add_option("--msym", flags.msym_path, "JSON matrix file with the symmetric target");
    cmd->add_option("--eta", flags.eta, "scale-factor margin in (0, 1]");
    cmd->add_option("--q", flags.q, "DLQR state weight (Q = q I)");
    cmd->add_option("--r", flags.r, "DLQR input weight (R = r I)");
    cmd->add_flag("--enforce-t4", flags.enforce_entry_bound,
                  "grow Q until every designed entry is below 1/k");
}

void add_integrator_flags(CLI::App* cmd, IntegratorFlags& flags) {
    cmd->add_option("--scheme", flags.scheme, "rk4 | dopri")->capture_default_str();
    cmd->add_option("--step", flags.step, "integrator base step")->capture_default_str();
    cmd->add_option("--fd-step", flags.fd_step, "relative finite-difference step")
        ->capture_default_str();
}

Matrix read_target(const std::string& path) {
    const Json j = read_json_file(path);
    if (j.is_object() && j.contains("M")) {
        return matrix_from_json(j.at("M"), "M");
    }
    return matrix_from_json(j, "msym");
}

GainSet design(const std::vector<PhaseJacobians>& jacs, const MethodFlags& flags) {
    flags.validate();
    const std::size_t k = static_cast<std::size_t>(jacs.front().A.rows());
    switch (flags.method_enum()) {
        case GainMethod::kSymmetric: {
            const Matrix target = flags.msym_path.empty()
                                      ? Matrix::Zero(static_cast<Eigen::Index>(k),
                                                     static_cast<Eigen::Index>(k))
                                      : read_target(flags.msym_path);
            try {
                return symmetric_matrix_gains(jacs, target);
            } catch (const DimensionError&) {
                throw;
            } catch (const std::invalid_argument& e) {
                throw InputError(e.what());
            }
        }
        case GainMethod::kScaleFactor:
            return scale_factor_gains(jacs, flags.eta.value_or(1.0));
        case GainMethod::kDlqr: {
            std::vector<Matrix> q;
            std::vector<Matrix> r;
            for (const auto& jac : jacs) {
                q.push_back(flags.q.value_or(1.0) * Matrix::Identity(jac.A.rows(), jac.A.rows()));
                r.push_back(flags.r.value_or(1.0) * Matrix::Identity(jac.F.cols(), jac.F.cols()));
            }
            DlqrOptions options;
            options.enforce_entry_bound = flags.enforce_entry_bound;
            return dlqr_gains(jacs, q, r, options);
        }
    }
    throw InputError("unknown method");
}

void emit(const std::string& path, const std::string& contents, std::ostream& out) {
    if (path.empty()) {
        out << contents;
    } else {
        write_file_atomically(path, contents);
    }
}

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

struct Analysis {
    SyntheticSystem synthetic;
    PeriodicOrbit orbit;
    std::vector<PhaseJacobians> jacobians;
    double residual = 0.0;
};

Analysis analyze_system(const std::string& name, const IntegratorConfig& cfg, double fd_step) {
    SyntheticSystem sys = build_synthetic(name);
    PeriodicOrbit orbit = refine_fixed_point(sys.system, sys.orbit.fixed_points.back(), cfg);
    const double residual = fixed_point_residual(sys.system, orbit, cfg);
    FiniteDifferenceConfig fd;
    fd.fd_step = fd_step;
    auto jacs = all_phase_jacobians(sys.system, orbit, cfg, fd);
    return Analysis{std::move(sys), std::move(orbit), std::move(jacs), residual};
}

int verdict_code(bool stable) { return stable ? kExitOk : kExitUnstable; }

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Periodic-orbit stabilization of multi-domain hybrid systems"};
    app.require_subcommand(1);
    std::string output;

    // analyze
    auto* analyze = app.add_subcommand("analyze", "Jacobians of a catalog system at its orbit");
    std::string system_name;
    IntegratorFlags analyze_int;
    analyze->add_option("--system", system_name, "catalog name, e.g. stable-3")->required();
    analyze->add_option("-o,--output", output, "output JSON path");
    add_integrator_flags(analyze, analyze_int);

    // synthesize
    auto* synthesize = app.add_subcommand("synthesize", "Gains and stability report");
    std::string input;
    MethodFlags synth_method;
    synthesize->add_option("-i,--input", input, "phase Jacobians JSON")->required();
    synthesize->add_option("-o,--output", output, "output JSON path");
    add_method_flags(synthesize, synth_method);

    // certify
    auto* certify = app.add_subcommand("certify", "Certificates for designed Jacobians");
    certify->add_option("-i,--input", input, "designed Jacobians JSON")->required();
    certify->add_option("-o,--output", output, "output JSON path");

    // simulate
    auto* simulate = app.add_subcommand("simulate", "Closed-loop section errors per cycle");
    MethodFlags sim_method;
    IntegratorFlags sim_int;
    int cycles = 20;
    double perturbation = 1e-2;
    std::uint64_t seed = 0;
    bool open_loop = false;
    simulate->add_option("--system", system_name, "catalog name")->required();
    simulate->add_option("-o,--output", output, "output CSV path");
    simulate->add_option("--cycles", cycles, "number of cycles")->capture_default_str();
    simulate->add_option("--perturbation", perturbation, "initial error norm")
        ->capture_default_str();
    simulate->add_option("--seed", seed, "perturbation direction seed")->capture_default_str();
    simulate->add_flag("--open-loop", open_loop, "run without feedback");
    add_method_flags(simulate, sim_method);
    add_integrator_flags(simulate, sim_int);

    // verify-paper
    auto* verify = app.add_subcommand("verify-paper", "Consistency checks of the published data");
    std::string fixture_path;
    double tolerance_scale = 1.0;
    verify->add_option("--fixture", fixture_path, "fixture JSON (default: built-in copy)");
    verify->add_option("--tolerance-scale", tolerance_scale, "multiplies every tolerance")
        ->capture_default_str();
    verify->add_option("-o,--output", output, "also write the checks as JSON");
    std::string corrupt_entry;
    double corrupt_delta = 0.1;
    verify->add_option("--corrupt", corrupt_entry, "perturb one entry first, e.g. 'K1(4,3)'");
    verify->add_option("--delta", corrupt_delta, "perturbation used by --corrupt")
        ->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitInputError;
    }

    try {
        if (analyze->parsed()) {
            const Analysis a = analyze_system(system_name, analyze_int.config(), analyze_int.fd_step);
            Json j = phase_jacobians_to_json(a.jacobians);
            std::vector<Matrix> as;
            for (std::size_t i = 0; i < a.jacobians.size(); ++i) {
                Json& phase = j["phases"][i];
                phase["phase"] = i + 1;
                phase["fixed_point"] = vector_to_json(a.orbit.fixed_points[i]);
                phase["duration"] = a.orbit.phase_durations[i];
                as.push_back(a.jacobians[i].A);
            }
            const Matrix product = compose_jacobians(as);
            j["system"] = system_name;
            j["A_product"] = matrix_to_json(product);
            j["spectral_radius"] = spectral_radius(product);
            j["fixed_point_residual"] = a.residual;
            emit(output, dump(j), out);
            return kExitOk;
        }
        if (synthesize->parsed()) {
            const auto jacs = phase_jacobians_from_json(read_json_file(input));
            const GainSet gains = design(jacs, synth_method);
            const StabilityReport report = stability_report(jacs, gains);
            emit(output, dump(Json{{"gains", to_json(gains)}, {"report", to_json(report)}}), out);
            return verdict_code(report.stable);
        }
        if (certify->parsed()) {
            const Json j = read_json_file(input);
            const Json* designed = nullptr;
            if (j.is_object() && j.contains("designed")) {
                designed = &j.at("designed");
            } else if (j.is_object() && j.contains("report") && j.at("report").is_object() &&
                       j.at("report").contains("designed")) {
                designed = &j.at("report").at("designed");
            }
            if (designed == nullptr || !designed->is_array() || designed->empty()) {
                throw InputError(input + ": expected a non-empty \"designed\" array");
            }
            std::vector<Matrix> mats;
            for (std::size_t i = 0; i < designed->size(); ++i) {
                mats.push_back(
                    matrix_from_json((*designed)[i], "designed[" + std::to_string(i) + "]"));
            }
            const StabilityReport report = assess_designed(mats);
            emit(output, dump(to_json(report)), out);
            return verdict_code(report.stable);
        }
        if (simulate->parsed()) {
            if (cycles < 0) {
                throw InputError("--cycles must be non-negative");
            }
            if (!(perturbation >= 0.0)) {
                throw InputError("--perturbation must be non-negative");
            }
            const IntegratorConfig cfg = sim_int.config();
            const Analysis a = analyze_system(system_name, cfg, sim_int.fd_step);
            const Vector& x_star = a.orbit.fixed_points.back();

            std::mt19937_64 rng(seed);
            std::normal_distribution<double> normal(0.0, 1.0);
            Vector dir(x_star.size());
            for (Eigen::Index i = 0; i < dir.size(); ++i) {
                dir(i) = normal(rng);
            }
            const Vector x0 = x_star + perturbation * dir.normalized();

            std::vector<CycleRecord> records;
            if (open_loop) {
                records = simulate_cycle(a.synthetic.system, x0, cycles, cfg);
            } else {
                const GainSet gains = design(a.jacobians, sim_method);
                FeedbackLaw law{gains.gains, std::make_shared<PeriodicOrbit>(a.orbit)};
                records = simulate_cycle(a.synthetic.system, law, x0, cycles, cfg);
            }

            std::ostringstream csv;
            csv << "cycle,err_norm";
            for (Eigen::Index i = 0; i < x_star.size(); ++i) {
                csv << ",x" << (i + 1);
            }
            csv << '\n' << std::setprecision(17);
            auto row = [&](int c, const Vector& x) {
                csv << c << ',' << (x - x_star).norm();
                for (Eigen::Index i = 0; i < x.size(); ++i) {
                    csv << ',' << x(i);
                }
                csv << '\n';
            };
            row(0, x0);
            for (std::size_t c = 0; c < records.size(); ++c) {
                row(static_cast<int>(c) + 1, records[c].section_state);
            }
            emit(output, csv.str(), out);
            return kExitOk;
        }
        if (verify->parsed()) {
            const PaperFixture fixture = fixture_path.empty()
                                             ? builtin_paper_fixture()
                                             : paper_fixture_from_json(read_json_file(fixture_path));
            if (!(tolerance_scale > 0.0)) {
                throw InputError("--tolerance-scale must be positive");
            }
            VerifyReport report;
            if (corrupt_entry.empty()) {
                report = verify_paper(fixture, tolerance_scale);
            } else {
                FaultInjection fault =
                    inject_fault(fixture, corrupt_entry, corrupt_delta, tolerance_scale);
                out << "corrupted " << fault.entry << " by " << fault.delta << "; flipped:";
                for (const auto& name : fault.flipped) {
                    out << ' ' << name;
                }
                out << (fault.flipped.empty() ? " none\n" : "\n");
                report = std::move(fault.report);
            }
            out << format_verify_report(report);
            if (!output.empty()) {
                Json checks = Json::array();
                for (const auto& c : report.checks) {
                    checks.push_back(Json{{"name", c.name},
                                          {"pass", c.pass},
                                          {"measured", c.measured},
                                          {"tolerance", c.tolerance},
                                          {"detail", c.detail}});
                }
                write_file_atomically(output, dump(Json{{"checks", checks},
                                                        {"all_pass", report.all_pass()}}));
            }
            return report.all_pass() ? kExitOk : kExitUnstable;
        }
    } catch (const InputError& e) {
        err << "input error: " << e.what() << '\n';
        return kExitInputError;
    } catch (const DimensionError& e) {
        err << "input error: " << e.what() << '\n';
        return kExitInputError;
    } catch (const IntegrationError& e) {
        std::string msg = e.what();
        err << "numerical failure (" << to_string(e.kind()) << ")";
        if (e.phase() >= 0) {
            // reported 1-based like the analyze output
            err << " in phase " << e.phase() + 1;
            msg = msg.substr(msg.find(": ") + 2);
        }
        err << ": " << msg << '\n';
        return kExitNumerical;
    } catch (const NumericalError& e) {
        err << "numerical failure: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const std::invalid_argument& e) {
        err << "input error: " << e.what() << '\n';
        return kExitInputError;
    } catch (const std::exception& e) {
        err << "numerical failure: " << e.what() << '\n';
        return kExitNumerical;
    }
    return kExitInputError;
}

}  // namespace hybrid_orbit
