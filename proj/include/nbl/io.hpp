#pragma once

#include "nbl/diagnostics.hpp"
#include "nbl/fem.hpp"
#include "nbl/mesh.hpp"
#include "nbl/solver.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>

namespace nbl {

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ---- nodal field: "field N", one value per line, metadata trailer ----

inline void write_field(std::ostream& os, const NodalField& f) {
    os.precision(17);
    os << "field " << f.values.size() << "\n";
    for (Eigen::Index i = 0; i < f.values.size(); ++i) os << f.values[i] << "\n";
    os << "p " << f.p << " label " << (f.label.empty() ? "field" : f.label) << "\n";
}

inline void write_field(const std::string& path, const NodalField& f) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open " + path);
    write_field(os, f);
}

inline NodalField read_field(std::istream& is, const DomainMesh& mesh) {
    std::string tag;
    size_t n = 0;
    if (!(is >> tag >> n) || tag != "field") throw IoError("bad field file header");
    if (n != mesh.vertices.size()) throw IoError("field size does not match mesh");
    NodalField f(mesh);
    for (size_t i = 0; i < n; ++i) is >> f.values[Eigen::Index(i)];
    if (!(is >> tag >> f.p) || tag != "p") throw IoError("bad field metadata line");
    if (!(is >> tag) || tag != "label") throw IoError("bad field metadata line");
    std::getline(is, f.label);
    if (!f.label.empty() && f.label.front() == ' ') f.label.erase(0, 1);
    if (!is) throw IoError("truncated field file");
    return f;
}

inline NodalField read_field(const std::string& path, const DomainMesh& mesh) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open " + path);
    return read_field(is, mesh);
}

// ---- branch directory ----

/// Writes one mesh+field file pair per exponent plus branch.json metadata.
inline void write_branch(const std::string& dir, const SolutionBranch& branch) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    nlohmann::json meta;
    meta["provenance"] = branch.provenance;
    meta["entries"] = nlohmann::json::array();
    std::map<const DomainMesh*, std::string> mesh_files;
    int mesh_count = 0;
    for (size_t k = 0; k < branch.entries.size(); ++k) {
        const auto& e = branch.entries[k];
        const DomainMesh* mesh = e.solution.u.mesh;
        if (!mesh_files.count(mesh)) {
            std::string name = "mesh_" + std::to_string(mesh_count++) + ".txt";
            write_mesh(dir + "/" + name, *mesh);
            mesh_files[mesh] = name;
        }
        std::ostringstream fname;
        fname << "field_p" << std::setprecision(10) << e.p << ".txt";
        write_field(dir + "/" + fname.str(), e.solution.u);
        nlohmann::json je;
        je["p"] = e.p;
        je["field"] = fname.str();
        je["mesh"] = mesh_files[mesh];
        je["iterations"] = e.solution.iterations;
        je["residual_norm"] = e.solution.residual_norm;
        je["dirichlet_energy"] = e.energy.dirichlet;
        je["boundary_lp"] = e.energy.boundary_lp;
        je["free_energy"] = e.energy.free_energy;
        je["warnings"] = e.solution.warnings;
        meta["entries"].push_back(je);
    }
    std::ofstream os(dir + "/branch.json");
    if (!os) throw IoError("cannot open " + dir + "/branch.json");
    os << meta.dump(2) << "\n";
}

/// Loaded branch owning its meshes.
struct LoadedBranch {
    std::vector<std::unique_ptr<DomainMesh>> meshes;
    SolutionBranch branch;
};

inline LoadedBranch read_branch(const std::string& dir) {
    std::ifstream is(dir + "/branch.json");
    if (!is) throw IoError("cannot open " + dir + "/branch.json");
    nlohmann::json meta = nlohmann::json::parse(is);
    LoadedBranch out;
    out.branch.provenance = meta.value("provenance", "");
    std::map<std::string, const DomainMesh*> meshes;
    for (const auto& je : meta["entries"]) {
        std::string mf = je["mesh"];
        if (!meshes.count(mf)) {
            out.meshes.push_back(std::make_unique<DomainMesh>(read_mesh(dir + "/" + mf)));
            meshes[mf] = out.meshes.back().get();
        }
        BranchEntry e;
        e.p = je["p"];
        e.solution.p = e.p;
        e.solution.u = read_field(dir + "/" + std::string(je["field"]), *meshes[mf]);
        e.solution.iterations = je.value("iterations", 0);
        e.solution.residual_norm = je.value("residual_norm", 0.0);
        e.energy.dirichlet = je.value("dirichlet_energy", 0.0);
        e.energy.boundary_lp = je.value("boundary_lp", 0.0);
        e.energy.free_energy = je.value("free_energy", 0.0);
        out.branch.entries.push_back(std::move(e));
    }
    return out;
}

// ---- report CSV / JSON ----

namespace detail {
inline std::string fmt(double v) {
    std::ostringstream os;
    os << std::setprecision(12) << v;
    return os.str();
}
} // namespace detail

inline void write_report_csv(const std::string& path,
                             const std::vector<ConcentrationReport>& reports) {
    size_t m_max = 0;
    for (const auto& r : reports) m_max = std::max(m_max, r.peaks.size());
    std::ofstream os(path);
    if (!os) throw IoError("cannot open " + path);
    os << "p,m,sup_norm,p_energy";
    for (size_t j = 1; j <= m_max; ++j) os << ",beta_" << j;
    for (size_t j = 1; j <= m_max; ++j) os << ",c_" << j;
    os << ",pohozaev_res,p4_sup,phi_grad_norm\n";
    for (const auto& r : reports) {
        os << detail::fmt(r.p) << "," << r.m << "," << detail::fmt(r.sup_norm) << ","
           << detail::fmt(r.p_energy);
        for (size_t j = 0; j < m_max; ++j)
            os << "," << (j < r.peaks.size() ? detail::fmt(r.peaks[j].beta) : "");
        for (size_t j = 0; j < m_max; ++j)
            os << "," << (j < r.peaks.size() ? detail::fmt(r.peaks[j].c) : "");
        os << "," << detail::fmt(r.pohozaev_residual_value) << ","
           << detail::fmt(r.properties.p4_sup) << "," << detail::fmt(r.phi_gradient_norm)
           << "\n";
    }
}

inline nlohmann::json report_to_json(const ConcentrationReport& r) {
    nlohmann::json j;
    j["p"] = r.p;
    j["m"] = r.m;
    j["sup_norm"] = r.sup_norm;
    j["p_energy"] = r.p_energy;
    j["pohozaev_residual"] = r.pohozaev_residual_value;
    j["phi_gradient_norm"] = r.phi_gradient_norm;
    j["note"] = r.note;
    j["properties"] = {{"min_separation_ratio", r.properties.min_separation_ratio},
                       {"max_boundary_distance_ratio", r.properties.max_boundary_distance_ratio},
                       {"p4_sup", r.properties.p4_sup}};
    j["energy"] = {{"p_dirichlet", r.energy.p_dirichlet},
                   {"target", r.energy.target},
                   {"lower_bound", r.energy.lower_bound},
                   {"ratio", r.energy.ratio},
                   {"lower_bound_holds", r.energy.lower_bound_holds},
                   {"deviation", r.energy.deviation}};
    j["peaks"] = nlohmann::json::array();
    for (const auto& pk : r.peaks) {
        nlohmann::json jp;
        jp["index"] = pk.index;
        jp["s"] = pk.s;
        jp["x"] = pk.location.x;
        jp["y"] = pk.location.y;
        jp["amplitude"] = pk.amplitude;
        jp["eps"] = pk.eps;
        jp["chart_radius"] = pk.chart_radius;
        jp["resolved"] = pk.resolved;
        jp["local_spacing"] = pk.local_spacing;
        jp["profile_error"] = pk.profile_error;
        jp["beta"] = pk.beta;
        jp["c"] = pk.c;
        j["peaks"].push_back(jp);
    }
    j["green_rep"] = nlohmann::json::array();
    for (const auto& gr : r.green_rep)
        j["green_rep"].push_back({{"A", gr.A},
                                  {"B", gr.B},
                                  {"C", gr.C},
                                  {"reconstruction_error", gr.reconstruction_error},
                                  {"log_m_hat", gr.log_m_hat}});
    return j;
}

inline void write_report_json(const std::string& path,
                              const std::vector<ConcentrationReport>& reports,
                              const TrendSummary& trend) {
    nlohmann::json j;
    j["reports"] = nlohmann::json::array();
    for (const auto& r : reports) j["reports"].push_back(report_to_json(r));
    j["trend"] = {{"resolved_ps", trend.resolved_ps},
                  {"extrap_sup_norm", trend.extrap_sup_norm},
                  {"extrap_p_energy", trend.extrap_p_energy},
                  {"extrap_beta", trend.extrap_beta},
                  {"extrap_c", trend.extrap_c},
                  {"fit_ok", trend.fit_ok},
                  {"sup_norm_limit", std::sqrt(M_E)},
                  {"p_energy_quantum", 2.0 * M_PI * M_E}};
    std::ofstream os(path);
    if (!os) throw IoError("cannot open " + path);
    os << j.dump(2) << "\n";
}

/// gnuplot-ready columns: p, value, limit
inline void write_plot_columns(const std::string& path,
                               const std::vector<ConcentrationReport>& reports) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open " + path);
    os << "# p  sup_norm  sqrt_e  p_energy  m_2pi_e\n";
    for (const auto& r : reports)
        os << detail::fmt(r.p) << "  " << detail::fmt(r.sup_norm) << "  "
           << detail::fmt(std::sqrt(M_E)) << "  " << detail::fmt(r.p_energy) << "  "
           << detail::fmt(r.m * 2.0 * M_PI * M_E) << "\n";
}

} // namespace nbl
