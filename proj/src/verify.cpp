#include "ym2/verify.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <limits>
#include <mutex>
#include <thread>

namespace ym2 {

void MCAccumulator::add(cd v) {
    ++n_;
    cd delta = v - mean_;
    mean_ += delta / static_cast<double>(n_);
    m2_ += std::real(std::conj(delta) * (v - mean_));
}

void MCAccumulator::merge(const MCAccumulator& o) {
    if (o.n_ == 0) return;
    if (n_ == 0) {
        *this = o;
        return;
    }
    const double na = static_cast<double>(n_), nb = static_cast<double>(o.n_);
    const double n = na + nb;
    cd delta = o.mean_ - mean_;
    mean_ += delta * (nb / n);
    m2_ += o.m2_ + std::norm(delta) * na * nb / n;
    n_ += o.n_;
}

MCEstimate MCAccumulator::estimate() const {
    MCEstimate e;
    e.mean = mean_;
    e.n = n_;
    e.stderr_ = n_ > 1 ? std::sqrt(m2_ / static_cast<double>(n_ - 1) / static_cast<double>(n_)) : 0.0;
    return e;
}

namespace {

ComparisonReport finish(const MCEstimate& lhs, const MCEstimate& rhs, double se, double threshold) {
    ComparisonReport r;
    r.lhs = lhs;
    r.rhs = rhs;
    r.diff_stderr = se;
    r.threshold = threshold;
    const double gap = std::abs(lhs.mean - rhs.mean);
    if (se > 0.0)
        r.z = gap / se;
    else
        r.z = gap < 1e-12 ? 0.0 : std::numeric_limits<double>::infinity();
    r.pass = r.z <= threshold;
    return r;
}

}  // namespace

ComparisonReport compare(const MCEstimate& lhs, const MCEstimate& rhs, double threshold_sigma) {
    return finish(lhs, rhs, std::hypot(lhs.stderr_, rhs.stderr_), threshold_sigma);
}

ComparisonReport compare_paired(const MCEstimate& lhs, const MCEstimate& rhs, const MCEstimate& diff,
                                double threshold_sigma) {
    return finish(lhs, rhs, diff.stderr_, threshold_sigma);
}

int worker_count() {
    if (const char* env = std::getenv("YM2_THREADS")) {
        int v = std::atoi(env);
        if (v >= 1) return v;
    }
    return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

std::vector<MCAccumulator> run_replicas(long n, std::uint64_t seed, int outputs, const ReplicaFn& fn, int threads) {
    if (n < 1) throw std::invalid_argument("run_replicas: n must be >= 1");
    const long blocks = (n + kReplicaBlock - 1) / kReplicaBlock;
    std::vector<std::vector<MCAccumulator>> partial(static_cast<size_t>(blocks),
                                                    std::vector<MCAccumulator>(static_cast<size_t>(outputs)));
    std::atomic<long> next{0};
    std::atomic<bool> stop{false};
    std::exception_ptr error;
    std::mutex error_mu;

    auto worker = [&] {
        std::vector<cd> out(static_cast<size_t>(outputs));
        try {
            for (long b = next++; b < blocks && !stop; b = next++) {
                auto& acc = partial[static_cast<size_t>(b)];
                const long k_end = std::min(n, (b + 1) * kReplicaBlock);
                for (long k = b * kReplicaBlock; k < k_end; ++k) {
                    std::fill(out.begin(), out.end(), cd(0.0, 0.0));
                    fn(replica_seed(seed, static_cast<std::uint64_t>(k)), out);
                    for (int o = 0; o < outputs; ++o) acc[o].add(out[o]);
                }
            }
        } catch (...) {
            std::lock_guard<std::mutex> lock(error_mu);
            if (!error) error = std::current_exception();
            stop = true;
        }
    };

    int t = threads > 0 ? threads : worker_count();
    t = static_cast<int>(std::min<long>(t, blocks));
    if (t <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int i = 0; i < t; ++i) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    if (error) std::rethrow_exception(error);

    std::vector<MCAccumulator> total(static_cast<size_t>(outputs));
    for (const auto& block : partial)
        for (int o = 0; o < outputs; ++o) total[o].merge(block[o]);
    return total;
}

double figure_eight_mean_oracle(const GroupContext& ctx, double t1, double t3) {
    return heat_mean(ctx, t1 + t3).trace().real();
}

double mm_rhs_oracle(const GroupContext& ctx, double t1, double t3) {
    return -(ctx.casimir * heat_mean(ctx, t1 + t3)).trace().real();
}

double deformation_oracle(const GroupContext& ctx, double t1, double t3, double q) {
    return (figure_eight_mean_oracle(ctx, t1 - q, t3) - figure_eight_mean_oracle(ctx, t1, t3 + q)) / q;
}

MCEstimate wilson_decay(const GroupContext& ctx, const GridWindow& w, double area, double width, const McParams& p) {
    if (!(area > 0.0 && width > 0.0)) throw GeometryError("wilson_decay: area and width must be positive");
    auto top = HorizontalCurve::flat(w, 0.0, width, area / width);
    const double dim = ctx.dim();
    auto acc = run_replicas(
        p.n, p.seed, 1,
        [&](std::uint64_t rs, std::vector<cd>& out) {
            NoiseField f(ctx, w, rs);
            out[0] = transport_horizontal(f, top, p.substeps).adjoint().trace() / dim;
        },
        p.threads);
    return acc[0].estimate();
}

MCEstimate figure_eight_mean(const GroupContext& ctx, const GridWindow& w, const FigureEight& fe, const McParams& p) {
    fe.graph.validate(w);
    auto acc = run_replicas(
        p.n, p.seed, 1,
        [&](std::uint64_t rs, std::vector<cd>& out) {
            NoiseField f(ctx, w, rs);
            out[0] = fe.U.evaluate(holonomies(f, fe.graph, p.substeps));
        },
        p.threads);
    return acc[0].estimate();
}

MCEstimate mm_lhs(const GroupContext& ctx, const GridWindow& w, const FigureEight& fe, const McParams& p) {
    fe.graph.validate(w);
    auto acc = run_replicas(
        p.n, p.seed, 1,
        [&](std::uint64_t rs, std::vector<cd>& out) {
            NoiseField f(ctx, w, rs);
            out[0] = fe.U.grad_dot(ctx, holonomies(f, fe.graph, p.substeps), fe.e1, fe.e2);
        },
        p.threads);
    return acc[0].estimate();
}

InsertionResult mm_insertion(const GroupContext& ctx, const GridWindow& w, const FigureEight& fe, double width,
                             double height, const McParams& p, bool zero_noise) {
    fe.graph.validate(w);
    if (!(width > 0.0 && width < fe.w1 && height > 0.0 && height <= fe.h2))
        throw GeometryError("insertion box must lie in the upper lobe away from the arc a");
    auto Q = GridRegion::rect(w, 0.0, width, 0.0, height);
    auto RQ = GridRegion::rect(w, 0.0, width, -height, 0.0);
    const double qa = Q.area(w);
    const NoiseField zero = NoiseField::zeros(ctx, w);
    auto acc = run_replicas(
        p.n, p.seed, 5,
        [&](std::uint64_t rs, std::vector<cd>& out) {
            NoiseField f = zero_noise ? zero : NoiseField(ctx, w, rs);
            auto om = holonomies(f, fe.graph, p.substeps);
            Mat fq = ctx.algebra(f_region(f, Q));
            Mat frq = ctx.algebra(f_region(f, RQ));
            cd lhs = fe.U.grad_dot(ctx, om, fe.e1, fe.e2);
            cd diff = -fe.U.grad_edge(om, fe.e2, fq - frq) / qa;
            cd sum = -(fe.U.grad_edge(om, fe.e2, fq) + fe.U.grad_edge(om, fe.e4, frq)) / qa;
            out[0] = lhs;
            out[1] = diff;
            out[2] = sum;
            out[3] = lhs - diff;
            out[4] = lhs - sum;
        },
        p.threads);
    InsertionResult r;
    r.q_area = qa;
    r.lhs = acc[0].estimate();
    r.form_diff = acc[1].estimate();
    r.form_sum = acc[2].estimate();
    r.diff_lhs_minus_diff = acc[3].estimate();
    r.diff_lhs_minus_sum = acc[4].estimate();
    r.report_diff = compare_paired(r.form_diff, r.lhs, r.diff_lhs_minus_diff);
    r.report_sum = compare_paired(r.form_sum, r.lhs, r.diff_lhs_minus_sum);
    return r;
}

DeformationResult mm_deformation(const GroupContext& ctx, const GridWindow& w, const FigureEight& fe, double eps,
                                 const McParams& p) {
    fe.graph.validate(w);
    if (!(eps < fe.w1)) throw GeometryError("deformation eps must be below w1");
    if (eps < w.hx() * (1.0 - 1e-9)) throw GeometryError("deformation eps is below one grid column");
    TamePath plus = deformed_e2(fe, w, eps);
    TamePath minus = deformed_e4(fe, w, eps);
    plus.validate(w);
    minus.validate(w);
    const double q_plus = eps * fe.h2, q_minus = eps * fe.h4;
    const double q = 0.5 * (q_plus + q_minus);
    auto acc = run_replicas(
        p.n, p.seed, 1,
        [&](std::uint64_t rs, std::vector<cd>& out) {
            NoiseField f(ctx, w, rs);
            auto om = holonomies(f, fe.graph, p.substeps);
            auto om_plus = om;
            om_plus[fe.e2] = transport_tame(f, plus, p.substeps);
            auto om_minus = om;
            om_minus[fe.e4] = transport_tame(f, minus, p.substeps);
            out[0] = (fe.U.evaluate(om_plus) - fe.U.evaluate(om_minus)) / q;
        },
        p.threads);
    DeformationResult r;
    r.eps = eps;
    r.q = q;
    r.estimate = acc[0].estimate();
    r.oracle = (figure_eight_mean_oracle(ctx, fe.t1 - q_plus, fe.t3) -
                figure_eight_mean_oracle(ctx, fe.t1, fe.t3 + q_minus)) /
               q;
    r.limit = mm_rhs_oracle(ctx, fe.t1, fe.t3);
    r.report = compare(r.estimate, MCEstimate::exact(r.oracle));
    return r;
}

cd IbpObservable::value(const HolonomyAssignment& om) const {
    if (insert_edge < 0) return U->evaluate(om);
    return U->grad_edge(om, insert_edge, insert_x);
}

cd IbpObservable::grad(const HolonomyAssignment& om, int sigma, const Mat& X) const {
    if (insert_edge < 0) return U->grad_edge(om, sigma, X);
    return U->grad2(om, sigma, X, insert_edge, insert_x);
}

ComparisonReport ibp_check(const GroupContext& ctx, const GridWindow& w, const TameGraph& g, const IbpObservable& W,
                           const PerturbationOneForm& eta, const McParams& p, double threshold) {
    g.validate(w);
    eta.check_support(w);
    const int ne = static_cast<int>(g.edges().size());
    auto acc = run_replicas(
        p.n, p.seed, 3,
        [&](std::uint64_t rs, std::vector<cd>& out) {
            NoiseField f(ctx, w, rs);
            auto om = holonomies(f, g, p.substeps);
            cd lhs = 0.0;
            for (int s = 0; s < ne; ++s) {
                Coords z = zeta_path(f, g.edges()[s].path, eta, p.substeps);
                if (z.squaredNorm() > 0.0) lhs += W.grad(om, s, ctx.algebra(z));
            }
            cd rhs = W.value(om) * eta.pair(f);
            out[0] = lhs;
            out[1] = rhs;
            out[2] = lhs - rhs;
        },
        p.threads);
    return compare_paired(acc[0].estimate(), acc[1].estimate(), acc[2].estimate(), threshold);
}

GirsanovResult girsanov_check(const GroupContext& ctx, const GridWindow& w, const FieldFunctional& psi,
                              const RectField& alpha, const std::vector<Mat>& g_cols, const McParams& p,
                              double threshold) {
    alpha.check_aligned(w);
    if (static_cast<int>(g_cols.size()) != w.nx) throw std::invalid_argument("girsanov_check: need one gauge per column");
    const RectField none;
    const double half_norm2 = 0.5 * alpha.norm2();
    auto acc = run_replicas(
        p.n, p.seed, 3,
        [&](std::uint64_t rs, std::vector<cd>& out) {
            NoiseField f(ctx, w, rs);
            ShiftedFieldView shifted(f, alpha, g_cols);
            ShiftedFieldView rotated(f, none, g_cols);
            double lhs = psi(shifted);
            double rhs = psi(rotated) * std::exp(-pair_with(f, alpha) - half_norm2);
            out[0] = lhs;
            out[1] = rhs;
            out[2] = lhs - rhs;
        },
        p.threads);
    GirsanovResult r;
    r.lhs = acc[0].estimate();
    r.rhs = acc[1].estimate();
    r.report = compare_paired(r.lhs, r.rhs, acc[2].estimate(), threshold);
    return r;
}

double girsanov_linear_exact(const GroupContext& ctx, const GridWindow& w, const GridRegion& B, const Coords& xi,
                             const RectField& alpha, const std::vector<Mat>& g_cols) {
    const int d = ctx.algebra_dim();
    double s = 0.0;
    for (const auto& run : B.runs) {
        Coords rotated = adjoint_coords(ctx, g_cols[static_cast<size_t>(run.i)], xi);
        for (int j = run.j0; j < run.j1; ++j) {
            Coords a = alpha.integral(w.x_node(run.i), w.x_node(run.i + 1), w.y_node(j), w.y_node(j + 1), d);
            s -= a.dot(rotated);
        }
    }
    return s;
}

std::vector<LoopExpansionRow> loop_expansion_scan(const GroupContext& ctx, const GridWindow& w,
                                                  const std::vector<double>& ts, const McParams& p) {
    const int D = ctx.dim();
    const int D2 = D * D;
    std::vector<LoopExpansionRow> rows;
    for (double t : ts) {
        auto top = HorizontalCurve::flat(w, 0.0, t, 1.0);
        auto Q = GridRegion::rect(w, 0.0, t, 0.0, 1.0);
        const double a = Q.area(w);
        const Mat half_kappa = 0.5 * a * ctx.casimir;
        auto acc = run_replicas(
            p.n, p.seed, 2 * D2 + 1,
            [&](std::uint64_t rs, std::vector<cd>& out) {
                NoiseField f(ctx, w, rs);
                auto inc = martingale_increments(f, top, p.substeps);
                GroupAccumulator hol(ctx);
                Mat running = ctx.zero();
                Mat iterated = ctx.zero();
                for (const auto& dm : inc) {
                    Mat X = ctx.algebra(dm);
                    iterated += running * X;
                    running += X;
                    hol.left_multiply(exp_map(ctx, -X));
                }
                Mat g = hol.value().adjoint();
                Mat r = g - ctx.identity() + ctx.algebra(f_hat_region(f, Q)) - half_kappa;
                for (int k = 0; k < D2; ++k) {
                    out[k] = g(k % D, k / D);
                    out[D2 + k] = r(k % D, k / D);
                }
                out[2 * D2] = iterated.squaredNorm();
            },
            p.threads);
        LoopExpansionRow row;
        row.t = t;
        row.area = a;
        const Mat target = heat_mean(ctx, a);
        double var = 0.0;
        for (int k = 0; k < D2; ++k) {
            auto eg = acc[k].estimate();
            auto er = acc[D2 + k].estimate();
            const int i = k % D, j = k / D;
            row.mean_gap = std::max(row.mean_gap, std::abs(eg.mean - target(i, j)));
            row.mean_gap_stderr = std::max(row.mean_gap_stderr, eg.stderr_);
            cd drift = eg.mean - (i == j ? 1.0 : 0.0) - half_kappa(i, j);
            row.drift_gap = std::max(row.drift_gap, std::abs(drift));
            var += er.stderr_ * er.stderr_ * static_cast<double>(er.n);
        }
        row.centered_l2 = std::sqrt(var);
        row.bdg_l2 = std::sqrt(acc[2 * D2].mean().real());
        rows.push_back(row);
    }
    return rows;
}

std::pair<Mat, Mat> oracle_sample_figure_eight(const GroupContext& ctx, double t1, double t3, int steps,
                                               CounterRng& rng) {
    Mat h1 = brownian_sample(ctx, t1, steps, rng);
    Mat h2 = brownian_sample(ctx, t3, steps, rng);
    return {h1, h2};
}

MCEstimate oracle_figure_eight_mean(const GroupContext& ctx, double t1, double t3, int steps, const McParams& p) {
    auto acc = run_replicas(
        p.n, p.seed, 1,
        [&](std::uint64_t rs, std::vector<cd>& out) {
            CounterRng rng(rs);
            auto [h1, h2] = oracle_sample_figure_eight(ctx, t1, t3, steps, rng);
            out[0] = (h2 * h1).trace();
        },
        p.threads);
    return acc[0].estimate();
}

MCEstimate strip_sensitivity(const GroupContext& ctx, const GridWindow& w, const FigureEight& fe, double eps,
                             const McParams& p) {
    auto acc = run_replicas(
        p.n, p.seed, 1,
        [&](std::uint64_t rs, std::vector<cd>& out) {
            NoiseField f(ctx, w, rs);
            MaskedFieldView masked(f, 0.0, eps);
            cd u = fe.U.evaluate(holonomies(f, fe.graph, p.substeps));
            cd um = fe.U.evaluate(holonomies(masked, fe.graph, p.substeps));
            out[0] = std::norm(u - um);
        },
        p.threads);
    auto sq = acc[0].estimate();
    MCEstimate e;
    e.n = sq.n;
    const double m = std::max(sq.mean.real(), 0.0);
    e.mean = std::sqrt(m);
    e.stderr_ = m > 0.0 ? sq.stderr_ / (2.0 * std::sqrt(m)) : 0.0;
    return e;
}

SlopeFit fit_loglog(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("fit_loglog: need at least two points");
    const size_t n = x.size();
    std::vector<double> lx(n), ly(n);
    for (size_t i = 0; i < n; ++i) {
        if (!(x[i] > 0.0 && y[i] > 0.0)) throw std::invalid_argument("fit_loglog: values must be positive");
        lx[i] = std::log(x[i]);
        ly[i] = std::log(y[i]);
    }
    double mx = 0.0, my = 0.0;
    for (size_t i = 0; i < n; ++i) {
        mx += lx[i];
        my += ly[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0;
    for (size_t i = 0; i < n; ++i) {
        sxx += (lx[i] - mx) * (lx[i] - mx);
        sxy += (lx[i] - mx) * (ly[i] - my);
    }
    SlopeFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    if (n > 2) {
        double ssr = 0.0;
        for (size_t i = 0; i < n; ++i) {
            double e = ly[i] - fit.intercept - fit.slope * lx[i];
            ssr += e * e;
        }
        fit.slope_stderr = std::sqrt(ssr / static_cast<double>(n - 2) / sxx);
    }
    return fit;
}

}  // namespace ym2
