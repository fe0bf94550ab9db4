// Command-line front end: mesh generation, solution branches, Green/Robin
// tables, phi critical search, and concentration diagnostics.

#include "nbl/config.hpp"
#include "nbl/diagnostics.hpp"
#include "nbl/green.hpp"
#include "nbl/io.hpp"
#include "nbl/mesh.hpp"
#include "nbl/solver.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <memory>

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitSolver = 3;
constexpr int kExitDiagnostics = 4;

struct CommonArgs {
    std::string config_file;
    std::string domain;
    double a = -1, b = -1;
    double star_amp = -1;
    int star_lobes = -1;
    double h = -1;
    std::string grade;
    std::string outdir;
    long long seed = -1;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_file, "key=value config file");
    cmd->add_option("--domain", args.domain, "curve preset: disk | ellipse | star");
    cmd->add_option("--a", args.a, "ellipse semi-axis a");
    cmd->add_option("--b", args.b, "ellipse semi-axis b");
    cmd->add_option("--star-amp", args.star_amp, "star radial amplitude");
    cmd->add_option("--star-lobes", args.star_lobes, "star lobe count");
    cmd->add_option("--h", args.h, "target mesh size");
    cmd->add_option("--grade", args.grade, "boundary grading: s:factor[,s:factor..] or auto");
    cmd->add_option("--out", args.outdir, "output directory or file");
    cmd->add_option("--seed", args.seed, "jitter seed");
}

nbl::RunConfig merge_config(const CommonArgs& args) {
    nbl::RunConfig cfg;
    if (!args.config_file.empty()) cfg = nbl::RunConfig::from_file(args.config_file);
    if (const char* env = std::getenv("NBL_OUTPUT_ROOT")) cfg.outdir = env;
    if (!args.domain.empty()) cfg.preset = args.domain;
    if (args.a > 0) cfg.a = args.a;
    if (args.b > 0) cfg.b = args.b;
    if (args.star_amp >= 0) cfg.star_amp = args.star_amp;
    if (args.star_lobes > 0) cfg.star_lobes = args.star_lobes;
    if (args.h > 0) cfg.h = args.h;
    if (!args.grade.empty()) cfg.grade = args.grade;
    if (!args.outdir.empty()) cfg.outdir = args.outdir;
    if (args.seed >= 0) cfg.seed = uint64_t(args.seed);
    return cfg;
}

nbl::BoundaryCurve make_curve(const nbl::RunConfig& cfg) {
    if (cfg.preset == "disk") return nbl::BoundaryCurve::disk();
    if (cfg.preset == "ellipse") return nbl::BoundaryCurve::ellipse(cfg.a, cfg.b);
    if (cfg.preset == "star") return nbl::BoundaryCurve::star(cfg.star_amp, cfg.star_lobes);
    throw nbl::ConfigError("unknown domain preset: " + cfg.preset);
}

std::vector<nbl::GradedPoint> parse_grading(const std::string& spec, double /*h*/) {
    std::vector<nbl::GradedPoint> out;
    if (spec.empty() || spec == "auto") return out;
    std::stringstream ss(spec);
    std::string item;
    while (std::getline(ss, item, ',')) {
        size_t colon = item.find(':');
        if (colon == std::string::npos)
            throw nbl::ConfigError("grading entries look like s:factor, got " + item);
        nbl::GradedPoint g;
        g.s = std::stod(item.substr(0, colon));
        g.factor = std::stod(item.substr(colon + 1));
        out.push_back(g);
    }
    return out;
}

/// grading factor that resolves the bubble width at exponent p, floored at
/// the double-precision wall
double auto_factor(double h, double p) {
    double amp = nbl::finite_p_amplitude(p);
    double eps_target = 1.0 / (p * std::pow(amp, p - 1.0));
    double spacing = std::max(0.25 * eps_target, 5e-14);
    return std::max(1.0, h / spacing);
}

int cmd_mesh(const CommonArgs& args) {
    nbl::RunConfig cfg = merge_config(args);
    nbl::BoundaryCurve curve = make_curve(cfg);
    nbl::MeshOptions opt;
    opt.grading = parse_grading(cfg.grade, cfg.h);
    opt.jitter_seed = cfg.seed;
    if (!(cfg.h > 0)) throw nbl::ConfigError("mesh size h must be positive");
    nbl::DomainMesh mesh = nbl::generate_mesh(curve, cfg.h, opt);
    nbl::MeshStats st = mesh.validate(curve);
    std::string out = cfg.outdir.empty() ? "mesh.txt" : cfg.outdir;
    if (std::filesystem::path(out).extension() != ".txt") {
        std::filesystem::create_directories(out);
        out += "/mesh.txt";
    }
    nbl::write_mesh(out, mesh);
    std::cout << "mesh written to " << out << "\n"
              << "V=" << st.vertices << " E=" << st.edges << " F=" << st.triangles
              << " chi=" << st.euler << "\n"
              << "min_area=" << st.min_area << " max_diameter=" << st.max_diameter
              << " area=" << st.area << "\n";
    return 0;
}

int cmd_solve(const CLI::App* cmd, const CommonArgs& args, const std::string& p_list,
              const std::string& peaks, int m, const std::string& ansatz) {
    (void)cmd;
    nbl::RunConfig cfg = merge_config(args);
    if (!p_list.empty()) cfg.p_list = nbl::detail::parse_list(p_list);
    if (!peaks.empty()) cfg.peaks = peaks;
    if (m > 0) cfg.m = m;
    if (!ansatz.empty()) cfg.ansatz = ansatz;
    if (cfg.p_list.empty()) throw nbl::ConfigError("empty p list");
    for (size_t k = 1; k < cfg.p_list.size(); ++k)
        if (cfg.p_list[k] <= cfg.p_list[k - 1])
            throw nbl::ConfigError("p list must be strictly increasing");

    nbl::BoundaryCurve curve = make_curve(cfg);

    // peak sites: explicit list or phi-critical search
    std::vector<double> sites;
    if (cfg.peaks == "auto") {
        double h_green = std::max(cfg.h, 0.05);
        nbl::MeshOptions gopt;
        gopt.jitter_seed = cfg.seed;
        nbl::DomainMesh gmesh = nbl::generate_mesh(curve, h_green, gopt);
        nbl::LinearSystem gsys = nbl::assemble_system(gmesh, curve);
        nbl::GreenWorkspace ws(gmesh, curve, gsys);
        std::vector<double> start;
        for (int k = 0; k < cfg.m; ++k)
            start.push_back(curve.length() * (0.13 + double(k) / cfg.m));
        nbl::PhiConfiguration crit = nbl::phi_critical_search(ws, start);
        sites = crit.sites;
        std::cout << "phi-critical sites:";
        for (double s : sites) std::cout << " " << s;
        std::cout << " (|grad| = " << crit.gradient_norm << ")\n";
    } else {
        sites = nbl::detail::parse_list(cfg.peaks);
    }
    if (sites.empty()) throw nbl::ConfigError("no peak sites given");

    nbl::SolveConfig scfg;
    scfg.tolerance = cfg.newton_tol;
    scfg.max_iterations = cfg.newton_max_iter;

    // per-exponent meshes graded to the expected peak width
    std::vector<std::unique_ptr<nbl::DomainMesh>> meshes;
    nbl::SolutionBranch branch;
    branch.provenance = cfg.ansatz + " ansatz, per-p graded meshes";
    for (double p : cfg.p_list) {
        nbl::MeshOptions opt;
        opt.jitter_seed = cfg.seed;
        if (cfg.grade == "auto" || cfg.grade.empty()) {
            for (double s : sites) opt.grading.push_back({s, auto_factor(cfg.h, p)});
        } else {
            opt.grading = parse_grading(cfg.grade, cfg.h);
        }
        meshes.push_back(std::make_unique<nbl::DomainMesh>(nbl::generate_mesh(curve, cfg.h, opt)));
        const nbl::DomainMesh& mesh = *meshes.back();
        nbl::LinearSystem sys = nbl::assemble_system(mesh, curve);
        nbl::BoundarySolution sol;
        if (cfg.ansatz == "constant") {
            nbl::NodalField init(mesh, 1.0);
            sol = nbl::newton_solve(sys, init, p, scfg);
        } else if (sites.size() == 1) {
            nbl::AnsatzField ans =
                nbl::bubble_ansatz(mesh, curve, sites[0], p, nbl::finite_p_amplitude(p));
            sol = nbl::newton_solve(sys, ans.field, p, scfg);
            if (!ans.warning.empty()) sol.warnings.push_back(ans.warning);
        } else {
            sol = nbl::multi_peak_solve(sys, mesh, curve, sites, p, scfg);
        }
        nbl::BranchEntry be;
        be.p = p;
        be.energy = nbl::energy(sol.u, p, sys, scfg.quadrature);
        be.solution = std::move(sol);
        std::cout << "p=" << p << ": iters=" << be.solution.iterations
                  << " sup=" << be.solution.u.values.maxCoeff()
                  << " p*energy=" << p * be.energy.dirichlet << "\n";
        branch.entries.push_back(std::move(be));
    }
    std::string out = cfg.outdir.empty() ? "branch" : cfg.outdir;
    nbl::write_branch(out, branch);
    std::cout << "branch written to " << out << "\n";
    return 0;
}

int cmd_diagnose(const CommonArgs& args, const std::string& branch_dir) {
    nbl::RunConfig cfg = merge_config(args);
    nbl::BoundaryCurve curve = make_curve(cfg);
    nbl::LoadedBranch lb = nbl::read_branch(branch_dir);
    nbl::DiagnosticsConfig dcfg;
    dcfg.beta_fraction = cfg.beta_fraction;
    dcfg.peak_threshold = cfg.peak_threshold;
    dcfg.pohozaev_delta = cfg.pohozaev_delta;
    auto [reports, trend] = nbl::build_report(lb.branch, curve, dcfg);
    std::string out = cfg.outdir.empty() ? "report" : cfg.outdir;
    std::filesystem::create_directories(out);
    nbl::write_report_csv(out + "/report.csv", reports);
    nbl::write_report_json(out + "/report.json", reports, trend);
    nbl::write_plot_columns(out + "/trends.dat", reports);
    for (const auto& r : reports)
        std::cout << "p=" << r.p << " m=" << r.m << " sup=" << r.sup_norm
                  << " p*energy=" << r.p_energy
                  << (r.note.empty() ? "" : (" note: " + r.note)) << "\n";
    if (trend.fit_ok)
        std::cout << "extrapolated sup=" << trend.extrap_sup_norm
                  << " (sqrt(e)=" << std::sqrt(M_E) << ")  p*energy=" << trend.extrap_p_energy
                  << " (2 pi e=" << 2 * M_PI * M_E << ")\n";
    std::cout << "report written to " << out << "\n";
    return 0;
}

int cmd_green(const CommonArgs& args, int robin_samples, int phi_crit,
              const std::string& starts) {
    nbl::RunConfig cfg = merge_config(args);
    nbl::BoundaryCurve curve = make_curve(cfg);
    double h = cfg.h > 0 ? cfg.h : 0.05;
    std::string out = cfg.outdir.empty() ? "green.csv" : cfg.outdir;
    if (std::filesystem::path(out).extension() != ".csv") {
        std::filesystem::create_directories(out);
        out += "/green.csv";
    }
    std::ofstream os(out);
    if (!os) throw nbl::IoError("cannot open " + out);
    os << std::setprecision(12);

    if (robin_samples > 0) {
        std::vector<double> sample_s;
        nbl::MeshOptions opt;
        opt.jitter_seed = cfg.seed;
        for (int k = 0; k < robin_samples; ++k) {
            double s = curve.length() * k / robin_samples;
            sample_s.push_back(s);
            opt.grading.push_back({s, 64.0});
        }
        nbl::DomainMesh mesh = nbl::generate_mesh(curve, h, opt);
        nbl::LinearSystem sys = nbl::assemble_system(mesh, curve);
        nbl::GreenWorkspace ws(mesh, curve, sys);
        os << "s,robin\n";
        for (double s : sample_s) os << s << "," << ws.robin(s) << "\n";
        std::cout << "robin table (" << robin_samples << " samples) written to " << out << "\n";
        return 0;
    }
    if (phi_crit > 0) {
        nbl::MeshOptions opt;
        opt.jitter_seed = cfg.seed;
        nbl::DomainMesh mesh = nbl::generate_mesh(curve, h, opt);
        nbl::LinearSystem sys = nbl::assemble_system(mesh, curve);
        nbl::GreenWorkspace ws(mesh, curve, sys);
        std::vector<std::vector<double>> start_list;
        if (!starts.empty()) {
            start_list.push_back(nbl::detail::parse_list(starts));
        } else {
            std::vector<double> s0;
            for (int k = 0; k < phi_crit; ++k)
                s0.push_back(curve.length() * (0.13 + double(k) / phi_crit));
            start_list.push_back(s0);
        }
        auto found = nbl::phi_critical_search_multi(ws, phi_crit, start_list);
        os << "m";
        for (int k = 1; k <= phi_crit; ++k) os << ",s" << k;
        os << ",phi,grad_norm,iterations\n";
        for (const auto& c : found) {
            os << phi_crit;
            for (double s : c.sites) os << "," << s;
            os << "," << c.value << "," << c.gradient_norm << "," << c.iterations << "\n";
        }
        std::cout << "phi-critical rows: " << found.size() << " written to " << out << "\n";
        return 0;
    }
    throw nbl::ConfigError("green: pass --robin-samples K or --phi-crit m");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"boundary-concentration laboratory for the nonlinear Neumann problem"};
    app.require_subcommand(1);

    CommonArgs margs, sargs, dargs, gargs;
    std::string p_list, peaks = "", ansatz, branch_dir, starts;
    int m = 0, robin_samples = 0, phi_crit = 0;

    CLI::App* mesh_cmd = app.add_subcommand("mesh", "generate and write a mesh");
    add_common(mesh_cmd, margs);

    CLI::App* solve_cmd = app.add_subcommand("solve", "solve a branch over a p list");
    add_common(solve_cmd, sargs);
    solve_cmd->add_option("--p-list", p_list, "comma-separated increasing exponents");
    solve_cmd->add_option("--peaks", peaks, "peak sites s1,s2,... or auto");
    solve_cmd->add_option("--m", m, "peak count for --peaks auto");
    solve_cmd->add_option("--ansatz", ansatz, "bubble (default) or constant");

    CLI::App* diag_cmd = app.add_subcommand("diagnose", "concentration diagnostics for a branch");
    add_common(diag_cmd, dargs);
    diag_cmd->add_option("--branch", branch_dir, "branch directory")->required();

    CLI::App* green_cmd = app.add_subcommand("green", "Robin table / phi critical search");
    add_common(green_cmd, gargs);
    green_cmd->add_option("--robin-samples", robin_samples, "tabulate R at K boundary samples");
    green_cmd->add_option("--phi-crit", phi_crit, "search phi_m critical points");
    green_cmd->add_option("--starts", starts, "start sites for the search");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }

    try {
        if (mesh_cmd->parsed()) return cmd_mesh(margs);
        if (solve_cmd->parsed()) return cmd_solve(solve_cmd, sargs, p_list, peaks, m, ansatz);
        if (diag_cmd->parsed()) return cmd_diagnose(dargs, branch_dir);
        if (green_cmd->parsed()) return cmd_green(gargs, robin_samples, phi_crit, starts);
    } catch (const nbl::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const nbl::CurveError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const nbl::MeshError& e) {
        std::cerr << "mesh error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const nbl::SolveError& e) {
        std::cerr << "solver error: " << e.what() << " (p=" << e.p
                  << ", iterations=" << e.iterations << ", residual=" << e.last_residual << ")\n";
        return kExitSolver;
    } catch (const nbl::DiagnosticsError& e) {
        std::cerr << "diagnostics error: " << e.what() << "\n";
        return kExitDiagnostics;
    } catch (const nbl::IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return kExitDiagnostics;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    }
    return 0;
}
