// Acceptance suite: one PASS/FAIL line per criterion, exit status 0 iff all pass.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "ym2/experiments.hpp"
#include "ym2/smooth.hpp"

using namespace ym2;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what) {
        pass = pass && ok;
        if (!detail.empty()) detail += "; ";
        detail += what + (ok ? "" : " [fail]");
    }
};

std::string fmt(const char* f, double a) {
    char buf[96];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

std::string fmt(const char* f, double a, double b) {
    char buf[128];
    std::snprintf(buf, sizeof buf, f, a, b);
    return buf;
}

std::string fmt(const char* f, double a, double b, double c) {
    char buf[160];
    std::snprintf(buf, sizeof buf, f, a, b, c);
    return buf;
}

McParams params(long n, std::uint64_t seed) {
    McParams p;
    p.n = n;
    p.seed = seed;
    p.substeps = 4;
    return p;
}

GridWindow bench_window() { return GridWindow::with_cells(-1.5, 1.5, -1.0, 1.0, 0.05, 0.5); }

Outcome wilson_decay_criterion() {
    Outcome o;
    auto w = GridWindow::with_cells(-1.5, 1.5, -1.0, 1.0, 0.05, 0.25);
    for (auto ctx : {make_group(GroupKind::U1), make_group(GroupKind::SU2)}) {
        for (double a : {0.25, 0.5, 1.0}) {
            auto est = wilson_decay(ctx, w, a, 1.0, params(100000, 101));
            double exact = heat_mean(ctx, a).trace().real() / ctx.dim();
            auto r = compare(est, MCEstimate::exact(exact));
            o.require(r.pass, ctx.name() + fmt(" a=%.2f z=%.2f", a, r.z));
        }
    }
    return o;
}

Outcome mm_criterion() {
    Outcome o;
    auto w = bench_window();
    auto fe = build_figure_eight(0.5, 0.5, w);
    for (auto ctx : {make_group(GroupKind::SU2), make_group(GroupKind::U1)}) {
        auto lhs = mm_lhs(ctx, w, fe, params(200000, 202));
        double rhs = mm_rhs_oracle(ctx, 0.5, 0.5);
        auto r = compare(lhs, MCEstimate::exact(rhs));
        o.require(r.pass, ctx.name() + fmt(" lhs=%.4f+-%.4f rhs=%.4f", lhs.mean.real(), lhs.stderr_, rhs) +
                              fmt(" z=%.2f", r.z));
    }
    return o;
}

Outcome insertion_criterion() {
    Outcome o;
    auto su2 = make_group(GroupKind::SU2);
    auto w = bench_window();
    auto fe = build_figure_eight(0.5, 0.5, w);
    std::vector<double> areas, se2;
    for (double width : {0.05, 0.1, 0.2}) {
        auto r = mm_insertion(su2, w, fe, width, 0.5, params(100000, 303));
        o.require(r.report_diff.pass && r.report_sum.pass,
                  fmt("w=%.2f z_diff=%.2f z_sum=%.2f", width, r.report_diff.z, r.report_sum.z));
        areas.push_back(r.q_area);
        se2.push_back(r.form_diff.stderr_ * r.form_diff.stderr_);
    }
    auto fit = fit_loglog(areas, se2);
    o.require(std::abs(fit.slope + 1.0) <= 0.2, fmt("stderr^2 slope=%.3f (target -1 +- 0.2)", fit.slope));
    return o;
}

Outcome deformation_criterion() {
    Outcome o;
    auto su2 = make_group(GroupKind::SU2);
    auto w = bench_window();
    auto fe = build_figure_eight(0.5, 0.5, w);
    std::vector<double> eps{0.4, 0.2, 0.1, 0.05}, gaps;
    for (double e : eps) {
        auto d = mm_deformation(su2, w, fe, e, params(100000, 404));
        o.require(d.report.pass, fmt("eps=%.2f est=%.4f oracle=%.4f", e, d.estimate.mean.real(), d.oracle) +
                                     fmt(" z=%.2f", d.report.z));
        gaps.push_back(std::abs(d.estimate.mean.real() - d.limit));
    }
    auto fit = fit_loglog(eps, gaps);
    o.require(fit.slope >= 0.4, fmt("limit-gap slope=%.3f+-%.3f (need >= 0.4)", fit.slope, fit.slope_stderr));
    return o;
}

Outcome ibp_criterion() {
    Outcome o;
    auto su2 = make_group(GroupKind::SU2);
    auto w = bench_window();
    auto fe = build_figure_eight(0.5, 0.5, w);
    auto eta = PerturbationOneForm::reflected_box(0.0, 0.2, 0.0, 0.5, su2.coords(su2.basis[0]));
    IbpObservable W;
    W.U = &fe.U;
    auto r = ibp_check(su2, w, fe.graph, W, eta, params(100000, 505));
    o.require(r.z < 3.0, fmt("z=%.2f lhs=%.4f rhs=%.4f", r.z, r.lhs.mean.real(), r.rhs.mean.real()));

    auto zero = ibp_check(su2, w, fe.graph, W, PerturbationOneForm{}, params(1000, 505));
    o.require(zero.lhs.mean == cd(0.0) && zero.rhs.mean == cd(0.0), "eta = 0 gives 0 = 0");
    auto one = WilsonFunctional::constant(1.0);
    IbpObservable C;
    C.U = &one;
    auto c = ibp_check(su2, w, fe.graph, C, eta, params(1000, 505));
    o.require(c.lhs.mean == cd(0.0) && c.pass, "constant U gives lhs = 0");
    return o;
}

Outcome girsanov_criterion() {
    Outcome o;
    auto su2 = make_group(GroupKind::SU2);
    auto w = bench_window();
    RectField alpha;
    Coords a = su2.zero_coords();
    a(0) = 0.8;
    a(2) = -0.4;
    alpha.add(0.0, 0.3, 0.0, 0.5, a);
    std::vector<Mat> g;
    for (int i = 0; i < w.nx; ++i) g.push_back(exp_map(su2, 0.7 * w.x_node(i) * su2.basis[1]));
    auto B = GridRegion::rect(w, 0.1, 0.4, 0.0, 1.0);
    Coords xi = su2.coords(su2.basis[0]);

    FieldFunctional lin = [&](const FieldSource& f) { return f_region(f, B).dot(xi); };
    auto exact = MCEstimate::exact(girsanov_linear_exact(su2, w, B, xi, alpha, g));
    auto r = girsanov_check(su2, w, lin, alpha, g, params(100000, 606));
    auto zl = compare(r.lhs, exact), zr = compare(r.rhs, exact);
    o.require(zl.pass && zr.pass, fmt("linear exact=%.4f z_shift=%.2f z_weight=%.2f", exact.mean.real(), zl.z, zr.z));

    FieldFunctional bounded = [&](const FieldSource& f) { return std::cos(f_region(f, B).dot(xi)); };
    auto b = girsanov_check(su2, w, bounded, alpha, g, params(100000, 607));
    o.require(b.report.pass, fmt("bounded z=%.2f", b.report.z));
    return o;
}

Outcome loop_expansion_criterion() {
    Outcome o;
    auto su2 = make_group(GroupKind::SU2);
    auto w = GridWindow::with_cells(-1.0, 1.0, -1.0, 1.0, 0.05, 0.25);
    std::vector<double> ts{0.1, 0.2, 0.4};
    auto rows = loop_expansion_scan(su2, w, ts, params(400000, 707));
    std::vector<double> areas, drift, centered;
    for (const auto& r : rows) {
        o.require(r.mean_gap < 3.0 * r.mean_gap_stderr,
                  fmt("a=%.1f mean gap=%.2e (3 stderr=%.2e)", r.area, r.mean_gap, 3.0 * r.mean_gap_stderr));
        areas.push_back(r.area);
        drift.push_back(r.drift_gap);
        centered.push_back(r.centered_l2);
    }
    auto fd = fit_loglog(areas, drift);
    o.require(fd.slope >= 1.2 && fd.slope <= 1.8, fmt("drift slope=%.3f+-%.3f (band [1.2, 1.8])", fd.slope, fd.slope_stderr));
    auto fc = fit_loglog(areas, centered);
    o.require(fc.slope >= 0.8 && fc.slope <= 1.2,
              fmt("centered slope=%.3f+-%.3f (band [0.8, 1.2])", fc.slope, fc.slope_stderr));
    return o;
}

Outcome perturbation_identity_criterion() {
    Outcome o;
    auto su2 = make_group(GroupKind::SU2);
    auto u1 = make_group(GroupKind::U1);
    Coords xi = Coords::Zero(3);
    xi(1) = 1.0;
    auto box = PerturbationOneForm::reflected_box(0.0, 0.3, 0.0, 0.5, xi);
    PerturbationOneForm eu;
    eu.eta_y.add(-0.2, 0.4, -0.5, 0.25, Coords::Constant(1, 1.5));

    const int reps = 200;
    std::vector<double> means, ses;
    double abelian = 0.0;
    for (double hx : {0.1, 0.05, 0.025}) {
        auto w = GridWindow::with_cells(-1.0, 1.0, -1.0, 1.0, hx, 0.25);
        auto c = HorizontalCurve::flat(w, -0.4, 0.6, 0.5);
        MCAccumulator acc;
        for (int r = 0; r < reps; ++r) {
            NoiseField f(su2, w, replica_seed(808, r));
            acc.add(perturbed_transport_identity_residual(f, c, box, 2));
            if (hx == 0.025) {
                NoiseField fu(u1, w, replica_seed(809, r));
                abelian = std::max(abelian, perturbed_transport_identity_residual(fu, c, eu, 2));
            }
        }
        auto e = acc.estimate();
        means.push_back(e.mean.real());
        ses.push_back(e.stderr_);
    }
    for (size_t k = 1; k < means.size(); ++k)
        o.require(means[k] < means[k - 1], fmt("SU2 mean residual %.2e -> %.2e", means[k - 1], means[k]));
    o.require(abelian < 1e-6, fmt("U1 max residual at hx=0.025: %.2e", abelian));
    return o;
}

Outcome oracle_vs_field_criterion() {
    Outcome o;
    auto w = bench_window();
    auto fe = build_figure_eight(0.5, 0.5, w);
    for (auto ctx : {make_group(GroupKind::SU2), make_group(GroupKind::U1)}) {
        auto field = figure_eight_mean(ctx, w, fe, params(100000, 909));
        auto lobes = oracle_figure_eight_mean(ctx, 0.5, 0.5, 16, params(100000, 910));
        auto exact = MCEstimate::exact(figure_eight_mean_oracle(ctx, 0.5, 0.5));
        auto a = compare(field, lobes), b = compare(field, exact), c = compare(lobes, exact);
        o.require(a.pass && b.pass && c.pass,
                  ctx.name() + fmt(" z(field,lobes)=%.2f z(field,exact)=%.2f z(lobes,exact)=%.2f", a.z, b.z, c.z));
    }
    return o;
}

Outcome smooth_lab_criterion() {
    Outcome o;
    for (auto ctx : {make_group(GroupKind::U1), make_group(GroupKind::SU2)}) {
        int failed = 0, total = 0;
        std::string names;
        for (const auto& c : run_smooth_lab(ctx)) {
            ++total;
            if (!c.pass) {
                ++failed;
                names += " " + c.name;
            }
        }
        o.require(failed == 0, ctx.name() + ": " + std::to_string(total - failed) + "/" + std::to_string(total) +
                                   " checks" + names);
    }
    return o;
}

Outcome determinism_criterion() {
    Outcome o;
    auto serialize = [](const ExperimentRun& r) {
        std::string s;
        for (const auto& rec : r.records) s += record_json(rec) + "\n";
        return s;
    };
    for (const char* name : {"mm-check", "girsanov-check", "loop-expansion", "smooth-loop", "oracle-vs-field"}) {
        auto cfg = ExperimentConfig::defaults(name);
        cfg.set("samples", "3000");
        cfg.set("seed", "11");
        if (std::string(name) == "mm-check") {
            cfg.set("insertion_widths", "0.1");
            cfg.set("deformation_eps", "0.2");
        }
        std::string first = serialize(run_experiment(cfg));
        std::string again = serialize(run_experiment(cfg));
        cfg.set("threads", "3");
        std::string threaded = serialize(run_experiment(cfg));
        // the thread count is echoed in params; compare records with that key neutralized
        auto strip = [](std::string s) {
            const std::string key = "\"threads\":\"";
            for (size_t p = s.find(key); p != std::string::npos; p = s.find(key, p + 1)) {
                size_t e = s.find('"', p + key.size());
                s.erase(p + key.size(), e - p - key.size());
            }
            return s;
        };
        o.require(first == again && strip(first) == strip(threaded), name);
    }
    return o;
}

}  // namespace

int main() {
    struct Criterion {
        int id;
        const char* name;
        std::function<Outcome()> run;
    };
    const std::vector<Criterion> all{
        {1, "wilson loop decay", wilson_decay_criterion},
        {2, "mm equation", mm_criterion},
        {3, "insertion identity", insertion_criterion},
        {4, "deformation limit", deformation_criterion},
        {5, "integration by parts", ibp_criterion},
        {6, "girsanov", girsanov_criterion},
        {7, "loop expansion", loop_expansion_criterion},
        {8, "pathwise perturbation identity", perturbation_identity_criterion},
        {9, "oracle vs field", oracle_vs_field_criterion},
        {10, "smooth lab", smooth_lab_criterion},
        {11, "determinism", determinism_criterion},
    };
    int failures = 0;
    for (const auto& c : all) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail = std::string("exception: ") + e.what();
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::printf("criterion %2d %-32s %s (%.1fs): %s\n", c.id, c.name, o.pass ? "PASS" : "FAIL", secs,
                    o.detail.c_str());
        std::fflush(stdout);
        failures += o.pass ? 0 : 1;
    }
    std::printf("%d of %zu criteria passed\n", static_cast<int>(all.size()) - failures, all.size());
    return failures == 0 ? 0 : 1;
}
