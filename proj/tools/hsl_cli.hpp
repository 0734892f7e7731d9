#pragma once

#include <iostream>
#include <optional>
#include <ostream>
#include <string>

#include <CLI11.hpp>

#include <hsl/acceptance.hpp>
#include <hsl/io.hpp>

namespace hsl::cli {

using io::json;

enum ExitCode { kOk = 0, kInvalid = 2, kConvergence = 3, kVerification = 4 };

inline cplx parse_complex(std::string const& s) {
    auto const comma = s.find(',');
    try {
        std::size_t used = 0;
        double const re = std::stod(s.substr(0, comma), &used);
        if (used != (comma == std::string::npos ? s.size() : comma)) throw std::invalid_argument(s);
        if (comma == std::string::npos) return {re, 0.0};
        std::string const tail = s.substr(comma + 1);
        double const im = std::stod(tail, &used);
        if (used != tail.size()) throw std::invalid_argument(s);
        return {re, im};
    } catch (std::logic_error const&) {
        throw InvalidInput("expected RE or RE,IM but got '" + s + "'");
    }
}

struct Context {
    io::Config cfg;
    std::ostream& out;
};

inline void write_report(std::string const& path, json const& j) {
    if (!path.empty()) io::write_file(path, j.dump(2) + "\n");
}

inline ImmersionSample checked_mesh_write(Context& c, ImmersionSample const& s) {
    if (!c.cfg.out.empty()) io::write_mesh(c.cfg.out, s);
    return s;
}

inline bool defects_within(io::Config const& c, DefectReport const& r) {
    return r.conformality_max < c.tol.conformality && r.lagrangian_max < c.tol.lagrangian &&
           r.harmonicity < c.tol.harmonicity;
}

inline VerifyOptions verify_options(io::Config const& c, int grid_n) {
    VerifyOptions o;
    o.richardson_limit = c.tol.fd;
    if (grid_n < o.order + 1) o.order = 4;
    return o;
}

// ---- subcommands -----------------------------------------------------------------

struct Genus0Args {
    std::string a = "0.5";
    bool minimal = false;
    std::string recon;
};

inline int run_genus0(Context& c, Genus0Args const& a) {
    auto const d = a.minimal ? minimal_limit_data() : genus0_data({parse_complex(a.a)});
    auto const s = genus0_sample(d, c.cfg.grid);
    auto const v = verify_immersion(s, verify_options(c.cfg, c.cfg.grid));
    double period = 0;
    auto const& g = s.grid;
    for (int j = 0; j < g.nv; ++j)
        for (int i = 0; i < g.nu; ++i) {
            cplx const w = g.w(i, j);
            auto const& f = s.lifts[g.index(i, j)];
            period = std::max({period, fs_distance(genus0_immersion(d, w + d.gamma1), f),
                               fs_distance(genus0_immersion(d, w + d.gamma2), f)});
        }
    json rep = io::genus0_json(d);
    double const ident = rep["identity_residual"].get<double>();
    rep["grid"] = io::grid_json(g);
    rep["periodicity"] = period;
    rep["affinity"] = affinity_defect(v.angle, g, 2 * kPi * kMaslovCoordinate, 0.0);
    rep["maslov_coordinate_scale"] = kMaslovCoordinate;
    rep["defects"] = io::defect_json(v.report);
    checked_mesh_write(c, s);
    write_report(c.cfg.report, rep);
    if (!a.recon.empty()) io::write_file(a.recon, io::recon_to_json(reconstruction_from_genus0(d)).dump(2) + "\n");
    c.out << "genus0: identity residual " << ident << ", conformality " << v.report.conformality_max
          << ", Lagrangian " << v.report.lagrangian_max << "\n";
    if (!(ident < c.cfg.tol.identity)) throw VerificationFailure("genus0: identity residual above tolerance");
    return kOk;
}

inline TwistedLoop potential_or_default(std::string const& path, io::Config const& cfg) {
    if (path.empty()) return fixtures::plus_potential(cfg.seed, fixtures::kDressMass, cfg.modes);
    auto p = io::read_loop(path, cfg.modes);
    double const scale = std::max(1.0, total_mass(p));
    if (twist_defect(p) > 1e-10 * scale) throw InvalidInput("dress: potential violates the twist");
    if (negative_mode_mass(p) > 0) throw InvalidInput("dress: potential must have non-negative modes only");
    return resize(p, cfg.modes);
}

struct DressArgs {
    std::string mu = "0.3,0.15";
    std::string potential;
};

inline int run_dress(Context& c, DressArgs const& a) {
    VacuumData const vac{parse_complex(a.mu)};
    auto const pot = potential_or_default(a.potential, c.cfg);
    auto g = exp_loop(pot, 1.0);
    g.plus = true;
    auto const grid = GridGeometry::centered_square(c.cfg.grid, c.cfg.size);
    auto const F = vacuum_field(vac, grid, c.cfg.modes);
    FactorizeOptions fo;
    fo.tol = c.cfg.tol.factorization;
    auto const D = dress(g, F, fo);
    MaurerCartanOptions mo;
    mo.order = c.cfg.grid >= 17 ? 8 : 4;
    auto const mc = maurer_cartan(D.frame, mo);
    double a2 = 0, am1 = 0;
    for (auto const& x : mc.samples) {
        a2 = std::max({a2, norm(x.dz_mode(-2) - vac.A()), norm(x.dzbar_mode(2) - vac.A_bar())});
        am1 = std::max(am1, norm(x.dzbar_mode(-1)));
    }
    auto const s = immersion_from_frame(D.frame);
    auto const v = verify_immersion(s, verify_options(c.cfg, c.cfg.grid));
    auto const [mx, my] = fixtures::vacuum_maslov(vac);
    json rep = {{"mu0", io::to_json(vac.mu0)},
                {"grid", io::grid_json(grid)},
                {"modes", c.cfg.modes},
                {"factorization_residual", D.max_residual},
                {"base_discrepancy", D.frame.base_discrepancy},
                {"mc_order", mo.order},
                {"mc_residual", mc_residual(mc, mo.order)},
                {"mc_off_support_mass", mc.off_support_mass},
                {"alpha2_deviation", a2},
                {"alpha_minus1_dzbar", am1},
                {"maslov_expected", {{"mu_x", mx}, {"mu_y", my}}},
                {"potential", io::loop_to_json(pot)},
                {"defects", io::defect_json(v.report)}};
    checked_mesh_write(c, s);
    write_report(c.cfg.report, rep);
    c.out << "dress: factorization residual " << D.max_residual << ", zeta^{+-2} deviation " << a2 << "\n";
    return kOk;
}

struct SymesArgs {
    std::string eta;
    std::string mu = "0.3,0.15";
};

inline int run_symes(Context& c, SymesArgs const& a) {
    TwistedLoop const eta = a.eta.empty() ? fixtures::vacuum_generator({parse_complex(a.mu)}, c.cfg.modes)
                                          : resize(io::read_loop(a.eta, c.cfg.modes), c.cfg.modes);
    double const scale = std::max(1.0, total_mass(eta));
    if (twist_defect(eta) > 1e-10 * scale) throw InvalidInput("symes: potential violates the twist");
    auto const grid = GridGeometry::centered_square(c.cfg.grid, c.cfg.size);
    auto const F = symes_field(eta, grid, c.cfg.modes);
    auto const s = immersion_from_frame(F);
    json rep = {{"grid", io::grid_json(grid)}, {"modes", c.cfg.modes}, {"eta", io::loop_to_json(eta)}};
    if (grid.nu >= 9 && grid.nv >= 9) {
        MaurerCartanOptions mo;
        mo.order = grid.nu >= 17 && grid.nv >= 17 ? 8 : 4;
        auto const mc = maurer_cartan(F, mo);
        rep["mc_residual"] = mc_residual(mc, mo.order);
        rep["mc_off_support_mass"] = mc.off_support_mass;
    }
    checked_mesh_write(c, s);
    write_report(c.cfg.report, rep);
    c.out << "symes: " << grid.size() << " frames\n";
    return kOk;
}

struct LaxArgs {
    std::string xi0;
    int d = 0;
    int steps = 100;
    double dt = 1e-2;
    double angle = 0.7;
};

inline int run_lax(Context& c, LaxArgs const& a) {
    if (a.steps < 0) throw InvalidInput("lax: steps must be non-negative");
    if (!(a.dt > 0)) throw InvalidInput("lax: dt must be positive");
    TwistedLoop const xi0 = a.xi0.empty() ? fixtures::lax_seed(c.cfg.seed, a.d) : io::read_loop(a.xi0);
    LaxOptions o;
    o.direction = std::polar(1.0, a.angle);
    auto const traj = lax_flow(xi0, a.d, a.steps, a.dt, o);
    auto const lam = unit_circle_samples(16);
    auto const c0 = char_poly_curve(traj.front(), lam);
    double drift = 0;
    for (auto const& x : traj) drift = std::max(drift, char_poly_drift(c0, char_poly_curve(x, lam)));
    json rep = {{"d", a.d},
                {"steps", a.steps},
                {"dt", a.dt},
                {"direction", io::to_json(o.direction)},
                {"char_poly_drift", drift},
                {"displacement", max_distance(traj.front(), traj.back())},
                {"xi0", io::loop_to_json(traj.front())},
                {"xi_final", io::loop_to_json(traj.back())}};
    if (!c.cfg.out.empty()) io::write_loop(c.cfg.out, traj.back());
    write_report(c.cfg.report, rep);
    c.out << "lax: char-poly drift " << drift << "\n";
    return kOk;
}

struct FactorizeArgs {
    std::string in;
};

inline int run_factorize(Context& c, FactorizeArgs const& a) {
    auto const g = io::read_loop(a.in);
    FactorizeOptions fo;
    fo.tol = c.cfg.tol.factorization;
    auto const f = iwasawa_factorize(g, fo);
    json rep = {{"e_part", io::loop_to_json(f.e_part)},
                {"i_part", io::loop_to_json(f.i_part)},
                {"residual", f.residual},
                {"iterations", f.iterations}};
    if (c.cfg.out.empty()) throw InvalidInput("factorize: --out is required");
    io::write_file(c.cfg.out, rep.dump(2) + "\n");
    write_report(c.cfg.report, {{"residual", f.residual}, {"iterations", f.iterations}});
    c.out << "factorize: residual " << f.residual << " after " << f.iterations << " iterations\n";
    return kOk;
}

struct ThetaArgs {
    std::string data;
};

inline int run_theta_map(Context& c, ThetaArgs const& a) {
    auto const d = io::recon_from_json(io::parse_json(io::read_file(a.data), a.data));
    auto const grid = GridGeometry::centered_square(c.cfg.grid, c.cfg.size);
    std::vector<Vec3> lifts(grid.size());
    parallel_for(grid.size(), [&](std::size_t k) {
        int const i = static_cast<int>(k % grid.nu), j = static_cast<int>(k / grid.nu);
        lifts[k] = theta_map(flow_line(d, grid.w(i, j)), d);
    });
    auto const s = ImmersionSample::make(grid, std::move(lifts));
    checked_mesh_write(c, s);
    write_report(c.cfg.report, {{"g", d.g}, {"grid", io::grid_json(grid)}});
    c.out << "theta-map: " << grid.size() << " points, genus " << d.g << "\n";
    return kOk;
}

struct VerifyArgs {
    std::string mesh;
};

inline int run_verify(Context& c, VerifyArgs const& a) {
    auto const s = io::read_mesh(a.mesh);
    auto const v = verify_immersion(s, verify_options(c.cfg, std::min(s.grid.nu, s.grid.nv)));
    bool const ok = defects_within(c.cfg, v.report);
    json rep = io::defect_json(v.report);
    rep["grid"] = io::grid_json(s.grid);
    rep["thresholds"] = {{"conformality", c.cfg.tol.conformality},
                         {"lagrangian", c.cfg.tol.lagrangian},
                         {"harmonicity", c.cfg.tol.harmonicity}};
    rep["pass"] = ok;
    write_report(c.cfg.report, rep);
    c.out << "verify: conformality " << v.report.conformality_max << ", Lagrangian " << v.report.lagrangian_max
          << ", harmonicity " << v.report.harmonicity << (ok ? " (pass)\n" : " (FAIL)\n");
    if (!ok) throw VerificationFailure("verify: defects above thresholds");
    return kOk;
}

inline int run_selftest(Context& c) {
    json results = json::array();
    int failed = 0;
    for (auto const& run : acceptance::battery()) {
        auto const r = run();
        c.out << acceptance::line(r) << "\n" << std::flush;
        results.push_back({{"criterion", r.id}, {"title", r.title}, {"pass", r.pass}, {"detail", r.detail}});
        if (!r.pass) ++failed;
    }
    write_report(c.cfg.report, {{"criteria", results}, {"failed", failed}});
    if (failed) throw VerificationFailure("selftest: " + std::to_string(failed) + " criteria failed");
    return kOk;
}

// ---- driver ------------------------------------------------------------------------

inline void emit_error(std::ostream& err, bool as_json, int code, char const* kind, std::string const& msg) {
    if (as_json)
        err << json{{"error", {{"code", code}, {"kind", kind}, {"message", msg}}}}.dump() << "\n";
    else
        err << "error: " << msg << "\n";
}

inline int run(int argc, char const* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"Hamiltonian stationary Lagrangian surfaces in CP^2"};
    app.require_subcommand(1);
    app.fallthrough();
    std::string config_path;
    bool json_errors = false;
    std::optional<int> modes, grid;
    std::optional<double> size;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_path, report_path;
    app.add_option("--config", config_path, "JSON configuration file; flags override it");
    app.add_flag("--json-errors", json_errors, "print errors as JSON on stderr");
    app.add_option("--seed", seed, "seed for every random choice");
    app.add_option("--modes", modes, "loop truncation N");

    Genus0Args g0;
    auto* sg = app.add_subcommand("genus0", "homogeneous torus from the genus-0 closed forms");
    sg->add_option("--a", g0.a, "spectral parameter RE[,IM], 0 < |a| < 1");
    sg->add_flag("--minimal", g0.minimal, "the a = 0 minimal torus");
    sg->add_option("--recon", g0.recon, "also write the reconstruction data JSON");

    DressArgs dr;
    auto* sd = app.add_subcommand("dress", "dress the vacuum by exp of a plus potential");
    sd->add_option("--mu", dr.mu, "vacuum Maslov data RE,IM");
    sd->add_option("--potential", dr.potential, "loop JSON with non-negative modes");

    SymesArgs sy;
    auto* ss = app.add_subcommand("symes", "frames from a constant potential");
    ss->add_option("--eta", sy.eta, "loop JSON with modes >= -2");
    ss->add_option("--mu", sy.mu, "vacuum generator RE,IM when --eta is absent");

    LaxArgs lx;
    auto* sl = app.add_subcommand("lax", "RK4 Lax flow and isospectral drift");
    sl->add_option("--xi0", lx.xi0, "initial loop JSON");
    sl->add_option("--d", lx.d, "degree d, modes down to -(4d+2)");
    sl->add_option("--steps", lx.steps, "number of steps");
    sl->add_option("--dt", lx.dt, "step size");
    sl->add_option("--angle", lx.angle, "flow direction angle in the w-plane");

    FactorizeArgs fa;
    auto* sf = app.add_subcommand("factorize", "Iwasawa factorization of a loop");
    sf->add_option("--in", fa.in, "loop JSON")->required();

    ThetaArgs th;
    auto* st = app.add_subcommand("theta-map", "theta map along the flow line");
    st->add_option("--data", th.data, "reconstruction data JSON")->required();

    VerifyArgs vf;
    auto* sv = app.add_subcommand("verify", "finite-difference geometry checks of a mesh");
    sv->add_option("--mesh", vf.mesh, "mesh CSV")->required();

    auto* sst = app.add_subcommand("selftest", "run the acceptance battery");

    for (auto* s : {sg, sd, ss, sl, sf, st, sv, sst}) {
        s->add_option("--out", out_path, "output file");
        s->add_option("--report", report_path, "report JSON");
        if (s != sf && s != sv && s != sst && s != sl) {
            s->add_option("--grid", grid, "nodes per side");
            if (s != sg) s->add_option("--size", size, "side length of the square centered at 0");
        }
    }

    try {
        app.parse(argc, argv);
    } catch (CLI::CallForHelp const& e) {
        return app.exit(e, out, err);
    } catch (CLI::ParseError const& e) {
        if (e.get_exit_code() == 0) return app.exit(e, out, err);
        emit_error(err, json_errors, kInvalid, "usage", e.what());
        return kInvalid;
    }

    try {
        io::Config cfg;
        bool modes_given = modes.has_value();
        if (!config_path.empty()) {
            auto const j = io::parse_json(io::read_file(config_path), config_path);
            cfg = io::config_from_json(j);
            modes_given = modes_given || (j.is_object() && j.contains("modes"));
        }
        // dressed frames need more modes than the library default
        if (sd->parsed() && !modes_given) cfg.modes = fixtures::kDressModes;
        if (modes) cfg.modes = *modes;
        if (grid) cfg.grid = *grid;
        if (size) cfg.size = *size;
        if (seed) cfg.seed = *seed;
        if (out_path) cfg.out = *out_path;
        if (report_path) cfg.report = *report_path;
        cfg.validate();
        Context c{cfg, out};
        if (sg->parsed()) return run_genus0(c, g0);
        if (sd->parsed()) return run_dress(c, dr);
        if (ss->parsed()) return run_symes(c, sy);
        if (sl->parsed()) return run_lax(c, lx);
        if (sf->parsed()) return run_factorize(c, fa);
        if (st->parsed()) return run_theta_map(c, th);
        if (sv->parsed()) return run_verify(c, vf);
        return run_selftest(c);
    } catch (InvalidInput const& e) {
        emit_error(err, json_errors, kInvalid, "invalid_input", e.what());
        return kInvalid;
    } catch (ConvergenceFailure const& e) {
        emit_error(err, json_errors, kConvergence, "convergence_failure", e.what());
        return kConvergence;
    } catch (VerificationFailure const& e) {
        emit_error(err, json_errors, kVerification, "verification_failure", e.what());
        return kVerification;
    } catch (std::exception const& e) {
        emit_error(err, json_errors, kInvalid, "invalid_input", e.what());
        return kInvalid;
    }
}

}  // namespace hsl::cli
