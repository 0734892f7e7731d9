#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "geomverify.hpp"
#include "killing.hpp"
#include "theta.hpp"

namespace hsl::io {

using json = nlohmann::json;

// ---- small pieces ----------------------------------------------------------------

inline json to_json(cplx z) { return json::array({z.real(), z.imag()}); }

inline cplx cplx_from(json const& j) {
    if (j.is_number()) return {j.get<double>(), 0.0};
    if (!j.is_array() || j.size() != 2) throw InvalidInput("json: complex number must be [re, im]");
    return {j[0].get<double>(), j[1].get<double>()};
}

inline json mat_json(Mat3 const& m, bool imag) {
    json rows = json::array();
    for (int r = 0; r < 3; ++r) {
        json row = json::array();
        for (int c = 0; c < 3; ++c) row.push_back(imag ? m(r, c).imag() : m(r, c).real());
        rows.push_back(row);
    }
    return rows;
}

inline Mat3 mat_from(json const& re, json const& im) {
    auto check = [](json const& a) {
        if (!a.is_array() || a.size() != 3) throw InvalidInput("loop json: coefficient must be 3x3");
        for (auto const& r : a)
            if (!r.is_array() || r.size() != 3) throw InvalidInput("loop json: coefficient must be 3x3");
    };
    check(re);
    check(im);
    Mat3 m;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) m(r, c) = cplx(re[r][c].get<double>(), im[r][c].get<double>());
    return m;
}

inline std::string read_file(std::string const& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InvalidInput("cannot open " + path);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

inline void write_file(std::string const& path, std::string const& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InvalidInput("cannot write " + path);
    out << text;
    if (!out) throw InvalidInput("write failed: " + path);
}

inline json parse_json(std::string const& text, std::string const& what) {
    try {
        return json::parse(text);
    } catch (json::parse_error const& e) {
        throw InvalidInput(what + ": " + e.what());
    }
}

// ---- loops -----------------------------------------------------------------------

// All 2N+1 modes are written so that N survives the trip.
inline json loop_to_json(TwistedLoop const& l) {
    json modes = json::array();
    for (int k = -l.modes_limit(); k <= l.modes_limit(); ++k)
        modes.push_back({{"k", k}, {"re", mat_json(l[k], false)}, {"im", mat_json(l[k], true)}});
    return {{"modes", modes}, {"epsilon", l.epsilon()}, {"flags", {{"real", l.real}, {"plus", l.plus}}}};
}

// N is the largest |k| listed, or at least `min_modes`.
inline TwistedLoop loop_from_json(json const& j, int min_modes = 0) {
    try {
        if (!j.is_object() || !j.contains("modes") || !j["modes"].is_array())
            throw InvalidInput("loop json: missing \"modes\" array");
        int n = min_modes;
        for (auto const& m : j["modes"]) n = std::max(n, std::abs(m.at("k").get<int>()));
        double const eps = j.value("epsilon", kDefaultEpsilon);
        TwistedLoop l(n, eps);
        for (auto const& m : j["modes"]) l.at(m.at("k").get<int>()) = mat_from(m.at("re"), m.at("im"));
        if (j.contains("flags")) {
            l.real = j["flags"].value("real", false);
            l.plus = j["flags"].value("plus", false);
        }
        return l;
    } catch (json::exception const& e) {
        throw InvalidInput(std::string("loop json: ") + e.what());
    }
}

inline void write_loop(std::string const& path, TwistedLoop const& l) { write_file(path, loop_to_json(l).dump(2) + "\n"); }

inline TwistedLoop read_loop(std::string const& path, int min_modes = 0) {
    return loop_from_json(parse_json(read_file(path), path), min_modes);
}

// ---- mesh CSV ----------------------------------------------------------------------

inline constexpr char const* kMeshHeader = "u,v,w_re,w_im,z1_re,z1_im,z2_re,z2_im,z3_re,z3_im";

// rows ordered by grid index; u, v are node indices
inline std::string mesh_csv(ImmersionSample const& s) {
    std::string out = std::string(kMeshHeader) + "\n";
    auto const& g = s.grid;
    char buf[512];
    for (int j = 0; j < g.nv; ++j)
        for (int i = 0; i < g.nu; ++i) {
            cplx const w = g.w(i, j);
            auto const& z = s.lifts[g.index(i, j)];
            std::snprintf(buf, sizeof buf, "%d,%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", i, j, w.real(),
                          w.imag(), z[0].real(), z[0].imag(), z[1].real(), z[1].imag(), z[2].real(), z[2].imag());
            out += buf;
        }
    return out;
}

inline void write_mesh(std::string const& path, ImmersionSample const& s) { write_file(path, mesh_csv(s)); }

// The grid is recovered from the node coordinates: origin w(0,0), edges
// w(1,0) - w(0,0) and w(0,1) - w(0,0); the base node is the center.
inline ImmersionSample mesh_from_csv(std::string const& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw InvalidInput("mesh: empty file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kMeshHeader) throw InvalidInput("mesh: unexpected header '" + line + "'");
    struct Row {
        int i, j;
        cplx w;
        Vec3 z;
    };
    std::vector<Row> rows;
    int nu = 0, nv = 0;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        std::istringstream ls(line);
        std::string cell;
        std::vector<std::string> cells;
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        if (cells.size() != 10) throw InvalidInput("mesh: line " + std::to_string(lineno) + " needs 10 columns");
        double v[8];
        Row r{};
        try {
            r.i = std::stoi(cells[0]);
            r.j = std::stoi(cells[1]);
            for (int k = 0; k < 8; ++k) v[k] = std::stod(cells[k + 2]);
        } catch (std::exception const&) {
            throw InvalidInput("mesh: bad number on line " + std::to_string(lineno));
        }
        if (r.i < 0 || r.j < 0) throw InvalidInput("mesh: negative node index");
        r.w = {v[0], v[1]};
        r.z = {cplx(v[2], v[3]), cplx(v[4], v[5]), cplx(v[6], v[7])};
        nu = std::max(nu, r.i + 1);
        nv = std::max(nv, r.j + 1);
        rows.push_back(r);
    }
    if (rows.size() != static_cast<std::size_t>(nu) * nv) throw InvalidInput("mesh: rows do not fill a grid");
    if (nu < 2 || nv < 2) throw InvalidInput("mesh: need at least 2x2 nodes");
    GridGeometry g;
    g.nu = nu;
    g.nv = nv;
    std::vector<Vec3> lifts(g.size());
    std::vector<cplx> ws(g.size());
    std::vector<char> seen(g.size(), 0);
    for (auto const& r : rows) {
        std::size_t const idx = g.index(r.i, r.j);
        if (seen[idx]) throw InvalidInput("mesh: duplicate node");
        seen[idx] = 1;
        lifts[idx] = r.z;
        ws[idx] = r.w;
    }
    g.origin = ws[g.index(0, 0)];
    g.eu = ws[g.index(1, 0)] - g.origin;
    g.ev = ws[g.index(0, 1)] - g.origin;
    g.base_i = nu / 2;
    g.base_j = nv / 2;
    (void)g.uv_to_xy();  // throws if degenerate
    double const h = std::max(std::abs(g.eu), std::abs(g.ev));
    for (int j = 0; j < nv; ++j)
        for (int i = 0; i < nu; ++i)
            if (std::abs(ws[g.index(i, j)] - g.w(i, j)) > 1e-9 * (h + std::abs(ws[g.index(i, j)])))
                throw InvalidInput("mesh: node coordinates are not on a uniform grid");
    return ImmersionSample::make(g, std::move(lifts));
}

inline ImmersionSample read_mesh(std::string const& path) { return mesh_from_csv(read_file(path)); }

// ---- theta data ------------------------------------------------------------------

inline json cvec_json(CVec const& v) {
    json a = json::array();
    for (Eigen::Index k = 0; k < v.size(); ++k) a.push_back(to_json(v(k)));
    return a;
}

inline CVec cvec_from(json const& a, std::string const& what) {
    if (!a.is_array()) throw InvalidInput("recon json: " + what + " must be an array");
    CVec v(static_cast<Eigen::Index>(a.size()));
    for (std::size_t k = 0; k < a.size(); ++k) v(static_cast<Eigen::Index>(k)) = cplx_from(a[k]);
    return v;
}

inline json recon_to_json(ReconstructionData const& d) {
    json om = json::array();
    for (int r = 0; r < d.g; ++r) {
        json row = json::array();
        for (int c = 0; c < d.g; ++c) row.push_back(to_json(d.omega.omega()(r, c)));
        om.push_back(row);
    }
    return {{"g", d.g},
            {"omega", om},
            {"abel_shift2", cvec_json(d.abel_shift2)},
            {"abel_shift3", cvec_json(d.abel_shift3)},
            {"kappa", cvec_json(d.kappa)},
            {"c0", to_json(d.c0)},
            {"c1", to_json(d.c1)},
            {"c2", to_json(d.c2)},
            {"U", cvec_json(d.U)}};
}

inline ReconstructionData recon_from_json(json const& j) {
    try {
        ReconstructionData d;
        d.g = j.at("g").get<int>();
        if (d.g < 0) throw InvalidInput("recon json: negative genus");
        CMat om(d.g, d.g);
        auto const& rows = j.at("omega");
        if (!rows.is_array() || static_cast<int>(rows.size()) != d.g) throw InvalidInput("recon json: omega must be g x g");
        for (int r = 0; r < d.g; ++r) {
            if (!rows[r].is_array() || static_cast<int>(rows[r].size()) != d.g)
                throw InvalidInput("recon json: omega must be g x g");
            for (int c = 0; c < d.g; ++c) om(r, c) = cplx_from(rows[r][c]);
        }
        d.omega = PeriodMatrix(om);
        d.abel_shift2 = cvec_from(j.at("abel_shift2"), "abel_shift2");
        d.abel_shift3 = cvec_from(j.at("abel_shift3"), "abel_shift3");
        d.kappa = cvec_from(j.at("kappa"), "kappa");
        d.c0 = cplx_from(j.at("c0"));
        d.c1 = cplx_from(j.at("c1"));
        d.c2 = cplx_from(j.at("c2"));
        d.U = cvec_from(j.at("U"), "U");
        d.validate();
        return d;
    } catch (json::exception const& e) {
        throw InvalidInput(std::string("recon json: ") + e.what());
    }
}

// ---- reports ---------------------------------------------------------------------

inline json genus0_json(Genus0Data const& d) {
    return {{"a", to_json(d.a)},
            {"minimal_limit", d.minimal_limit},
            {"O2", to_json(d.O2)},
            {"O3", to_json(d.O3)},
            {"C_plus", to_json(d.Cplus)},
            {"C_minus", to_json(d.Cminus)},
            {"c1", to_json(d.c1)},
            {"c2", to_json(d.c2)},
            {"A1", to_json(d.A1)},
            {"A2", to_json(d.A2)},
            {"U1", {to_json(d.U1[0]), to_json(d.U1[1])}},
            {"U2", {to_json(d.U2[0]), to_json(d.U2[1])}},
            {"U", {to_json(d.U[0]), to_json(d.U[1])}},
            {"lattice", {to_json(d.gamma1), to_json(d.gamma2)}},
            {"identity_residual", conformal_lagrangian_identity(d)}};
}

inline json defect_json(DefectReport const& r) {
    json br = json::array();
    for (auto const& [i, j] : r.branch_candidates) br.push_back({i, j});
    return {{"conformality_max", r.conformality_max},
            {"conformality_mean", r.conformality_mean},
            {"lagrangian_max", r.lagrangian_max},
            {"lagrangian_mean", r.lagrangian_mean},
            {"harmonicity", r.harmonicity},
            {"harmonicity_excluded", r.harmonicity_excluded},
            {"maslov", {{"mu_x", r.maslov.mu_x}, {"mu_y", r.maslov.mu_y}, {"variation", r.maslov.variation}}},
            {"angle_path_defect", r.angle_path_defect},
            {"unwrap_failures", r.unwrap_failures},
            {"degenerate_points", r.degenerate_points},
            {"richardson", r.richardson},
            {"branch_candidates", br}};
}

inline json grid_json(GridGeometry const& g) {
    return {{"nu", g.nu},
            {"nv", g.nv},
            {"origin", to_json(g.origin)},
            {"eu", to_json(g.eu)},
            {"ev", to_json(g.ev)},
            {"base", {g.base_i, g.base_j}}};
}

// ---- config ----------------------------------------------------------------------

struct ToleranceConfig {
    double factorization = 1e-11;
    double fd = 1e-3;  // Richardson limit for finite differences
    double identity = 1e-10;
    double conformality = 1e-6;
    double lagrangian = 1e-6;
    double harmonicity = 1e-4;
};

struct Config {
    int modes = kDefaultModes;
    int grid = 32;
    double size = 0.5;
    ToleranceConfig tol;
    std::string out, report;
    std::uint64_t seed = 1;

    void validate() const {
        if (modes < 8) throw InvalidInput("config: truncation N must be at least 8");
        if (grid < 5) throw InvalidInput("config: grid must have at least 5 nodes per side");
        if (!(size > 0)) throw InvalidInput("config: size must be positive");
        for (double t : {tol.factorization, tol.fd, tol.identity, tol.conformality, tol.lagrangian, tol.harmonicity})
            if (!(t > 0)) throw InvalidInput("config: tolerances must be positive");
    }
};

inline Config config_from_json(json const& j, Config c = {}) {
    try {
        if (!j.is_object()) throw InvalidInput("config: top level must be an object");
        for (auto const& [key, val] : j.items()) {
            if (key == "modes") c.modes = val.get<int>();
            else if (key == "grid") c.grid = val.get<int>();
            else if (key == "size") c.size = val.get<double>();
            else if (key == "seed") c.seed = val.get<std::uint64_t>();
            else if (key == "out") c.out = val.get<std::string>();
            else if (key == "report") c.report = val.get<std::string>();
            else if (key == "tolerances") {
                for (auto const& [tk, tv] : val.items()) {
                    double const x = tv.get<double>();
                    if (tk == "factorization") c.tol.factorization = x;
                    else if (tk == "fd") c.tol.fd = x;
                    else if (tk == "identity") c.tol.identity = x;
                    else if (tk == "conformality") c.tol.conformality = x;
                    else if (tk == "lagrangian") c.tol.lagrangian = x;
                    else if (tk == "harmonicity") c.tol.harmonicity = x;
                    else throw InvalidInput("config: unknown tolerance '" + tk + "'");
                }
            } else
                throw InvalidInput("config: unknown key '" + key + "'");
        }
    } catch (json::exception const& e) {
        throw InvalidInput(std::string("config: ") + e.what());
    }
    c.validate();
    return c;
}

inline json config_to_json(Config const& c) {
    return {{"modes", c.modes},
            {"grid", c.grid},
            {"size", c.size},
            {"seed", c.seed},
            {"out", c.out},
            {"report", c.report},
            {"tolerances",
             {{"factorization", c.tol.factorization},
              {"fd", c.tol.fd},
              {"identity", c.tol.identity},
              {"conformality", c.tol.conformality},
              {"lagrangian", c.tol.lagrangian},
              {"harmonicity", c.tol.harmonicity}}}};
}

}  // namespace hsl::io
