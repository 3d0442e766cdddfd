#include <CLI11.hpp>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <sstream>

#include "mixsing/classify.hpp"
#include "mixsing/estimate.hpp"
#include "mixsing/polysys.hpp"
#include "mixsing/rates.hpp"
#include "mixsing/reduce.hpp"
#include "mixsing/transport.hpp"
#include "mixsing/witness.hpp"

namespace {

using mixsing::Error;
using nlohmann::json;

void emit(const std::string& text, const std::string& out_path) {
    if (out_path.empty()) {
        std::cout << text << "\n";
        return;
    }
    std::ofstream f(out_path);
    if (!f) throw mixsing::make_error("IoError", "cannot open " + out_path);
    f << text;
}

mixsing::TransportSpec parse_spec(int r, const std::string& kappa_csv) {
    if (kappa_csv.empty()) return mixsing::TransportSpec::order(r);
    std::vector<int> kappa;
    std::stringstream ss(kappa_csv);
    std::string tok;
    while (std::getline(ss, tok, ',')) kappa.push_back(std::stoi(tok));
    return mixsing::TransportSpec::index(std::move(kappa));
}

std::string deriv_key(const mixsing::DerivIndex& a) {
    return std::to_string(a[0]) + "," + std::to_string(a[1]) + "," + std::to_string(a[2]);
}

int jobs_from_env(int jobs_flag) {
    if (jobs_flag > 0) return jobs_flag;
    if (const char* env = std::getenv("MIXSING_JOBS")) return std::max(1, std::atoi(env));
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Singularity structure of finite mixtures: classification, "
                 "polynomial ladders, witnesses, and convergence-rate studies"};
    app.require_subcommand(1);

    int jobs_flag = 0;
    app.add_option("--jobs", jobs_flag, "worker pool size (default: logical cores)");

    // classify
    auto* c_classify = app.add_subcommand("classify", "singularity report for a mixing measure");
    std::string cl_measure, cl_out;
    int cl_k = 0;
    bool cl_gamma_overfit = false;
    c_classify->add_option("measure", cl_measure, "measure JSON path")->required();
    c_classify->add_option("--k", cl_k, "fit size for over-fitted classification (> k0)");
    c_classify->add_flag("--gamma-overfitted", cl_gamma_overfit, "gamma o-mixture table");
    c_classify->add_option("--out", cl_out, "output path (default stdout)");

    // polysys
    auto* c_poly = app.add_subcommand("polysys", "solvability of a singularity system");
    std::string ps_system = "skew";
    double ps_v0 = 1.0, ps_m0 = 2.0;
    int ps_l = 1, ps_r = 3, ps_starts = 500;
    std::uint64_t ps_seed = 0;
    bool ps_vm_free = false, ps_ladder = false;
    std::string ps_out;
    c_poly->add_option("--system", ps_system, "skew | gaussian")->check(CLI::IsMember({"skew", "gaussian"}));
    c_poly->add_option("--v0", ps_v0, "base scale (skew)");
    c_poly->add_option("--m0", ps_m0, "base shape (skew)");
    c_poly->add_option("--l", ps_l, "extra atoms")->check(CLI::PositiveNumber);
    c_poly->add_option("--r", ps_r, "system order")->check(CLI::PositiveNumber);
    c_poly->add_option("--starts", ps_starts, "multistart budget");
    c_poly->add_option("--seed", ps_seed, "solver seed");
    c_poly->add_flag("--vm-free", ps_vm_free, "restrict to the (v, m)-free rows");
    c_poly->add_flag("--ladder", ps_ladder, "run the full ladder up to --r");
    c_poly->add_option("--out", ps_out, "output path (default stdout)");

    // witness
    auto* c_wit = app.add_subcommand("witness", "singularity witness path diagnostics");
    std::string w_measure, w_rule = "s0_overfit", w_out;
    int w_s = 3;
    c_wit->add_option("measure", w_measure, "base measure JSON path")->required();
    c_wit->add_option("--rule", w_rule, "s0_overfit | s1 | s2 | s33")
        ->check(CLI::IsMember({"s0_overfit", "s1", "s2", "s33"}));
    c_wit->add_option("--s", w_s, "distance order for the sup-ratio")->check(CLI::PositiveNumber);
    c_wit->add_option("--out", w_out, "CSV output path (default stdout)");

    // rate-study
    auto* c_rate = app.add_subcommand("rate-study", "MLE convergence-rate experiment");
    std::string rs_preset = "s0-gauss", rs_csv, rs_json;
    std::uint64_t rs_seed = 0;
    bool rs_seed_set = false, rs_allow_slow = false;
    int rs_reps = 0;
    c_rate->add_option("--preset", rs_preset, "s0-gauss | o-gauss | s1-skew");
    c_rate->add_option("--seed", rs_seed, "override the preset seed")
        ->each([&](const std::string&) { rs_seed_set = true; });
    c_rate->add_option("--reps", rs_reps, "override repetitions");
    c_rate->add_flag("--allow-slow", rs_allow_slow, "report slopes below the 1/6 exponent cut");
    c_rate->add_option("--csv", rs_csv, "cell CSV output path (default stdout)");
    c_rate->add_option("--json", rs_json, "slope summary output path (default stdout)");

    // distance
    auto* c_dist = app.add_subcommand("distance", "transport distance between two measures");
    std::string d_a, d_b, d_kappa, d_out;
    int d_r = 1;
    bool d_plan = false;
    c_dist->add_option("a", d_a, "first measure JSON path")->required();
    c_dist->add_option("b", d_b, "second measure JSON path")->required();
    c_dist->add_option("--r", d_r, "order variant W_r")->check(CLI::PositiveNumber);
    c_dist->add_option("--kappa", d_kappa, "index variant, comma-separated exponents");
    c_dist->add_flag("--plan", d_plan, "include the optimal coupling");
    c_dist->add_option("--out", d_out, "output path (default stdout)");

    // reduce
    auto* c_red = app.add_subcommand("reduce", "reduced-basis table for skew derivatives");
    int red_order = 3;
    std::string red_out;
    c_red->add_option("--order", red_order, "derivative order")->check(CLI::Range(1, 6));
    c_red->add_option("--out", red_out, "output path (default stdout)");

    // sample
    auto* c_samp = app.add_subcommand("sample", "draw i.i.d. observations from a mixture");
    std::string s_measure, s_out;
    int s_n = 1000;
    std::uint64_t s_seed = 0;
    c_samp->add_option("measure", s_measure, "measure JSON path")->required();
    c_samp->add_option("--n", s_n, "sample size")->check(CLI::PositiveNumber);
    c_samp->add_option("--seed", s_seed, "sampling seed");
    c_samp->add_option("--out", s_out, "output path (default stdout)");

    // fit
    auto* c_fit = app.add_subcommand("fit", "constrained MLE from a data file");
    std::string f_data, f_family = "gaussian", f_out;
    int f_k = 1, f_starts = 8;
    std::uint64_t f_seed = 0;
    bool f_location_only = false;
    c_fit->add_option("data", f_data, "one observation per line")->required();
    c_fit->add_option("--family", f_family, "skew_normal | gaussian | gamma");
    c_fit->add_option("--k", f_k, "component count")->check(CLI::PositiveNumber);
    c_fit->add_option("--starts", f_starts, "multistart budget");
    c_fit->add_option("--seed", f_seed, "fit seed");
    c_fit->add_flag("--location-only", f_location_only, "gaussian: freeze variances");
    c_fit->add_option("--out", f_out, "output path (default stdout)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*c_classify) {
            auto g = mixsing::load_measure(cl_measure);
            mixsing::SingularityReport report;
            if (cl_k > 0)
                report = mixsing::classify_omixture(g, cl_k);
            else if (g.family() == mixsing::Family::Gamma)
                report = mixsing::classify_gamma(g, cl_gamma_overfit);
            else if (g.family() == mixsing::Family::SkewNormal)
                report = mixsing::classify_emixture(g);
            else
                throw mixsing::make_error("BadConfig",
                                          "gaussian exact fits are level 0; use --k for o-mixtures");
            emit(report.to_json(), cl_out);
            return report.boundary_warning ? 2 : 0;
        }

        if (*c_poly) {
            mixsing::SolveOptions opts;
            opts.starts = ps_starts;
            opts.seed = ps_seed;
            json out;
            out["system"] = ps_system;
            out["l"] = ps_l;
            out["r"] = ps_r;
            if (ps_ladder) {
                auto ladder = ps_system == "skew"
                                  ? mixsing::rho_ladder_skew(ps_v0, ps_m0, ps_l, ps_r, opts)
                                  : mixsing::rbar_ladder_gaussian(ps_l, ps_r, opts);
                out["first_unsolvable"] = ladder.value;
                out["exact"] = ladder.exact;
                json rungs = json::array();
                for (std::size_t i = 0; i < ladder.verdicts.size(); ++i)
                    rungs.push_back({{"r", ladder.first + static_cast<int>(i)},
                                     {"verdict", verdict_name(ladder.verdicts[i])}});
                out["rungs"] = rungs;
            } else {
                auto sys = ps_system == "skew"
                               ? mixsing::build_skew_system(ps_v0, ps_m0, ps_l + 1, ps_r)
                               : mixsing::build_gaussian_system(ps_l + 1, ps_r);
                if (ps_vm_free) sys = mixsing::select_equations(sys, mixsing::vm_free_rows(sys));
                auto rep = mixsing::check_solvable(sys, opts);
                out["verdict"] = mixsing::verdict_name(rep.verdict);
                out["best_residual"] = rep.best_residual;
                out["starts_used"] = rep.starts_used;
                out["vm_free"] = ps_vm_free;
            }
            emit(out.dump(2), ps_out);
            return 0;
        }

        if (*c_wit) {
            auto g0 = mixsing::load_measure(w_measure);
            mixsing::WitnessPath path;
            if (w_rule == "s0_overfit") path = mixsing::make_witness_s0_overfit(g0);
            else if (w_rule == "s1") path = mixsing::make_witness_s1(g0);
            else if (w_rule == "s2") path = mixsing::make_witness_s2(g0);
            else path = mixsing::make_witness_s33(g0);

            auto check = mixsing::verify_coefficients(path);
            auto report = mixsing::verify_density_ratio(g0, path, w_s,
                                                        mixsing::default_x_grid(g0));
            json summary;
            summary["rule"] = path.rule;
            summary["coefficients_pass"] = check.pass;
            summary["symbolic"] = check.symbolic;
            summary["residual"] = check.residual;
            summary["s"] = w_s;
            summary["decay_factor"] = report.decay_factor;
            summary["median_ratio"] = report.median_ratio;
            std::cerr << summary.dump(2) << "\n";
            emit(report.to_csv(), w_out);
            return 0;
        }

        if (*c_rate) {
            auto cfg = mixsing::preset_rate_study(rs_preset);
            if (rs_seed_set) cfg.seed = rs_seed;
            if (rs_reps > 0) cfg.reps = rs_reps;
            cfg.allow_slow = rs_allow_slow;
            cfg.jobs = jobs_from_env(jobs_flag);
            auto study = mixsing::run_rate_study(cfg);
            emit(study.to_csv(), rs_csv);
            emit(study.to_json(), rs_json);
            return 0;
        }

        if (*c_dist) {
            auto a = mixsing::load_measure(d_a);
            auto b = mixsing::load_measure(d_b);
            auto spec = parse_spec(d_r, d_kappa);
            auto res = mixsing::distance(spec, a, b);
            json out;
            out["value"] = res.value;
            out["power_value"] = res.power_value;
            if (d_plan) {
                json q = json::array();
                for (int i = 0; i < res.plan.q.rows(); ++i) {
                    json row = json::array();
                    for (int j = 0; j < res.plan.q.cols(); ++j) row.push_back(res.plan.q(i, j));
                    q.push_back(row);
                }
                out["plan"] = q;
            }
            emit(out.dump(2), d_out);
            return 0;
        }

        if (*c_red) {
            json table = json::object();
            for (int a1 = 0; a1 <= red_order; ++a1)
                for (int a2 = 0; a1 + a2 <= red_order; ++a2) {
                    int a3 = red_order - a1 - a2;
                    mixsing::DerivIndex alpha{a1, a2, a3};
                    json row = json::object();
                    for (const auto& [beta, coeff] : mixsing::reduce_skew(alpha))
                        row[deriv_key(beta)] = coeff.str();
                    table[deriv_key(alpha)] = row;
                }
            json out;
            out["order"] = red_order;
            out["table"] = table;
            emit(out.dump(2), red_out);
            return 0;
        }

        if (*c_samp) {
            auto g = mixsing::load_measure(s_measure);
            auto draws = mixsing::sample(g, s_n, s_seed);
            std::string csv = "x\n";
            char buf[40];
            for (double x : draws.x) {
                std::snprintf(buf, sizeof buf, "%.17g\n", x);
                csv += buf;
            }
            emit(csv, s_out);
            return 0;
        }

        if (*c_fit) {
            std::ifstream in(f_data);
            if (!in) throw mixsing::make_error("IoError", "cannot open " + f_data);
            std::vector<double> data;
            std::string line;
            while (std::getline(in, line)) {
                if (line.empty() || line == "x") continue;
                data.push_back(std::stod(line));
            }
            auto family = mixsing::family_from_name(f_family);
            mixsing::FitConfig cfg;
            cfg.starts = f_starts;
            cfg.seed = f_seed;
            cfg.location_only = f_location_only;
            auto fit = mixsing::fit_mle(data, family, f_k, mixsing::default_box(family), cfg);
            json out = json::parse(mixsing::measure_to_json(fit.g));
            out["loglik"] = fit.loglik;
            out["converged"] = fit.converged;
            emit(out.dump(2), f_out);
            return 0;
        }
    } catch (const Error& e) {
        json err;
        err["error"] = e.code();
        err["message"] = e.what();
        std::cerr << err.dump() << "\n";
        return 1;
    } catch (const std::exception& e) {
        json err;
        err["error"] = "Unhandled";
        err["message"] = e.what();
        std::cerr << err.dump() << "\n";
        return 1;
    }
    return 0;
}
