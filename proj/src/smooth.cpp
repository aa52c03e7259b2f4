#include "ym2/smooth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include <boost/math/quadrature/gauss.hpp>

#include "ym2/verify.hpp"

namespace ym2 {

namespace {

constexpr double kPi = 3.14159265358979323846;

struct Node {
    double x, w;
};

// 20-point Gauss-Legendre on [-1, 1]
const std::vector<Node>& gauss_nodes() {
    static const std::vector<Node> nodes = [] {
        using G = boost::math::quadrature::gauss<double, 20>;
        std::vector<Node> out;
        const auto& a = G::abscissa();
        const auto& w = G::weights();
        for (size_t i = 0; i < a.size(); ++i) {
            out.push_back({a[i], w[i]});
            if (a[i] != 0.0) out.push_back({-a[i], w[i]});
        }
        return out;
    }();
    return nodes;
}

template <class F>
auto gauss_1d(F&& g, double a, double b, int panels) {
    const double len = (b - a) / panels;
    decltype(g(a)) sum = g(a) * 0.0;
    for (int p = 0; p < panels; ++p) {
        const double mid = a + (p + 0.5) * len;
        for (const auto& n : gauss_nodes()) sum += (0.5 * len * n.w) * g(mid + 0.5 * len * n.x);
    }
    return sum;
}

double cross(const Point& u, const Point& v) { return u.x * v.y - u.y * v.x; }

template <size_t K>
using State = std::array<Mat, K>;

template <size_t K>
State<K> axpy(const State<K>& y, double h, const State<K>& k) {
    State<K> out;
    for (size_t i = 0; i < K; ++i) out[i] = y[i] + h * k[i];
    return out;
}

// Classical RK4 along every piece; rhs(t, pos, vel, y) -> y'.
template <size_t K, class Rhs>
void rk4_path(const SmoothPath& p, int steps, State<K>& y, Rhs&& rhs) {
    if (steps < 1) throw std::invalid_argument("rk4_path: steps must be positive");
    for (const auto& piece : p) {
        const double dt = (piece.t1 - piece.t0) / steps;
        for (int s = 0; s < steps; ++s) {
            const double t = piece.t0 + s * dt;
            const double tm = t + 0.5 * dt, te = t + dt;
            const Point p0 = piece.pos(t), pm = piece.pos(tm), pe = piece.pos(te);
            const Point v0 = piece.vel(t), vm = piece.vel(tm), ve = piece.vel(te);
            State<K> k1 = rhs(t, p0, v0, y);
            State<K> k2 = rhs(tm, pm, vm, axpy(y, 0.5 * dt, k1));
            State<K> k3 = rhs(tm, pm, vm, axpy(y, 0.5 * dt, k2));
            State<K> k4 = rhs(te, pe, ve, axpy(y, dt, k3));
            for (size_t i = 0; i < K; ++i) y[i] += (dt / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
}

Point path_start(const SmoothPath& p) { return p.front().pos(p.front().t0); }
Point path_end(const SmoothPath& p) { return p.back().pos(p.back().t1); }

double rel_err(const Mat& a, const Mat& n) {
    const double scale = max_abs(n);
    const double d = max_abs(a - n);
    return scale > 0.0 ? d / scale : d;
}

// 5-point central difference of a matrix-valued function of one variable
template <class F>
Mat diff5(F&& g, double x, double h) {
    return (-g(x + 2 * h) + 8.0 * g(x + h) - 8.0 * g(x - h) + g(x - 2 * h)) / (12.0 * h);
}

Mat path_transport(const GroupContext& ctx, const SmoothConnection& A, const PathFamily& fam, double s, int steps) {
    PathPiece piece{[&fam, s](double t) { return fam.pos(s, t); }, [&fam, s](double t) { return fam.dt(s, t); }, 0.0,
                    1.0};
    return ode_transport(ctx, A, {piece}, steps);
}

}  // namespace

// ---- connections ----

SmoothConnection SmoothConnection::zero(const GroupContext& ctx) {
    const int n = ctx.dim();
    AlgebraFn z = [n](double, double) { return Mat::Zero(n, n).eval(); };
    SmoothConnection c{z, z, z, true};
    return c;
}

SmoothConnection SmoothConnection::dx_only(const GroupContext& ctx, AlgebraFn a1) {
    auto c = zero(ctx);
    c.A1 = std::move(a1);
    c.f = nullptr;
    c.axial = false;
    return c;
}

Mat SmoothConnection::operator()(const Point& p, const Point& v) const {
    return v.x * A1(p.x, p.y) + v.y * A2(p.x, p.y);
}

Mat SmoothConnection::curvature(double x, double y, double h) const {
    if (f) return f(x, y);
    Mat dxA2 = diff5([&](double s) { return A2(s, y); }, x, h);
    Mat dyA1 = diff5([&](double s) { return A1(x, s); }, y, h);
    Mat a1 = A1(x, y), a2 = A2(x, y);
    return dxA2 - dyA1 + a1 * a2 - a2 * a1;
}

bool SmoothConnection::check_axial(const std::vector<Point>& probes, double tol) const {
    for (const auto& p : probes) {
        if (max_abs(A1(p.x, 0.0)) >= tol) return false;
        if (max_abs(A2(p.x, p.y)) >= tol) return false;
    }
    return true;
}

SmoothConnection SmoothConnection::plus(const SmoothConnection& o, double s) const {
    SmoothConnection a = *this, b = o;
    SmoothConnection c;
    c.A1 = [a, b, s](double x, double y) { return (a.A1(x, y) + s * b.A1(x, y)).eval(); };
    c.A2 = [a, b, s](double x, double y) { return (a.A2(x, y) + s * b.A2(x, y)).eval(); };
    c.axial = a.axial && b.axial;
    return c;
}

SmoothConnection axial_from_curvature(const GroupContext& ctx, AlgebraFn f) {
    auto c = SmoothConnection::zero(ctx);
    c.A1 = [f](double x, double y) -> Mat {
        if (y == 0.0) return (0.0 * f(x, 0.0)).eval();
        return (-y * gauss_1d([&](double u) -> Mat { return f(x, u * y); }, 0.0, 1.0, 2)).eval();
    };
    c.f = f;
    c.axial = true;
    return c;
}

// ---- paths ----

PathPiece line_piece(const Point& a, const Point& b) {
    Point d{b.x - a.x, b.y - a.y};
    return {[a, d](double t) { return Point{a.x + t * d.x, a.y + t * d.y}; }, [d](double) { return d; }, 0.0, 1.0};
}

SmoothPath rectangle_loop(double x0, double x1, double y0, double y1) {
    return {line_piece({x0, y0}, {x1, y0}), line_piece({x1, y0}, {x1, y1}), line_piece({x1, y1}, {x0, y1}),
            line_piece({x0, y1}, {x0, y0})};
}

SmoothPath reversed(const SmoothPath& p) {
    SmoothPath out;
    for (auto it = p.rbegin(); it != p.rend(); ++it) {
        const PathPiece q = *it;
        const double a = q.t0, b = q.t1;
        out.push_back({[q, a, b](double t) { return q.pos(a + b - t); },
                       [q, a, b](double t) {
                           Point v = q.vel(a + b - t);
                           return Point{-v.x, -v.y};
                       },
                       a, b});
    }
    return out;
}

SmoothPath right_boundary(double w, double h) {
    return {line_piece({0.0, 0.0}, {w, 0.0}), line_piece({w, 0.0}, {w, h}), line_piece({w, h}, {0.0, h})};
}

// ---- transport ----

Mat ode_transport(const GroupContext& ctx, const SmoothConnection& A, const SmoothPath& p, int steps) {
    State<1> y{ctx.identity()};
    rk4_path(p, steps, y, [&](double, const Point& pos, const Point& vel, const State<1>& s) {
        return State<1>{(-A(pos, vel) * s[0]).eval()};
    });
    return y[0];
}

TransportIntegral transport_with_integral(const GroupContext& ctx, const SmoothConnection& A, const SmoothPath& p,
                                          int steps, const PathIntegrand& integrand) {
    State<2> y{ctx.identity(), ctx.zero()};
    rk4_path(p, steps, y, [&](double t, const Point& pos, const Point& vel, const State<2>& s) {
        return State<2>{(-A(pos, vel) * s[0]).eval(), integrand(t, pos, vel, s[0])};
    });
    return {y[0], y[1]};
}

// ---- gauge transformations ----

SmoothConnection gauge_transform(const SmoothConnection& A, const GaugeFn& g) {
    SmoothConnection out;
    out.A1 = [A, g](double x, double y) -> Mat {
        Mat gi = g.g(x, y).adjoint();
        return gi * A.A1(x, y) * g.g(x, y) + gi * g.gx(x, y);
    };
    out.A2 = [A, g](double x, double y) -> Mat {
        Mat gi = g.g(x, y).adjoint();
        return gi * A.A2(x, y) * g.g(x, y) + gi * g.gy(x, y);
    };
    return out;
}

double gauge_transport_residual(const GroupContext& ctx, const SmoothConnection& A, const GaugeFn& g,
                                const SmoothPath& p, int steps) {
    Mat lhs = ode_transport(ctx, gauge_transform(A, g), p, steps);
    Point a = path_start(p), b = path_end(p);
    Mat rhs = g.g(b.x, b.y).adjoint() * ode_transport(ctx, A, p, steps) * g.g(a.x, a.y);
    return max_abs(lhs - rhs);
}

double gauge_curvature_residual(const SmoothConnection& A, const GaugeFn& g, const std::vector<Point>& probes) {
    auto Ag = gauge_transform(A, g);
    double worst = 0.0;
    for (const auto& p : probes) {
        Mat gp = g.g(p.x, p.y);
        Mat expect = gp.adjoint() * A.curvature(p.x, p.y) * gp;
        worst = std::max(worst, max_abs(Ag.curvature(p.x, p.y) - expect));
    }
    return worst;
}

double connection_comparison(const GroupContext& ctx, const SmoothConnection& A, const SmoothConnection& B,
                             const SmoothPath& p, int steps) {
    State<2> y{ctx.identity(), ctx.identity()};
    rk4_path(p, steps, y, [&](double, const Point& pos, const Point& vel, const State<2>& s) {
        Mat a = A(pos, vel);
        Mat diff = B(pos, vel) - a;
        Mat Pinv = s[0].inverse();
        return State<2>{(-a * s[0]).eval(), (-(Pinv * diff * s[0]) * s[1]).eval()};
    });
    return max_abs(ode_transport(ctx, B, p, steps) - y[0] * y[1]);
}

DerivativeCheck connection_derivative(const GroupContext& ctx, const SmoothConnection& A,
                                      const SmoothConnection& eta, const SmoothPath& p, int steps, double s) {
    auto ti = transport_with_integral(ctx, A, p, steps,
                                      [&](double, const Point& pos, const Point& vel, const Mat& P) -> Mat {
                                          return P.inverse() * eta(pos, vel) * P;
                                      });
    DerivativeCheck out;
    out.analytic = -ti.transport * ti.integral;
    out.numeric = (ode_transport(ctx, A.plus(eta, s), p, steps) - ode_transport(ctx, A.plus(eta, -s), p, steps)) /
                  (2.0 * s);
    out.rel_error = rel_err(out.analytic, out.numeric);
    return out;
}

DerivativeCheck path_derivative(const GroupContext& ctx, const SmoothConnection& A, const PathFamily& fam, double s0,
                                int steps, double h) {
    PathPiece piece{[&fam, s0](double t) { return fam.pos(s0, t); }, [&fam, s0](double t) { return fam.dt(s0, t); },
                    0.0, 1.0};
    auto ti = transport_with_integral(ctx, A, {piece}, steps,
                                      [&](double t, const Point& pos, const Point& vel, const Mat& P) -> Mat {
                                          double c = cross(vel, fam.ds(s0, t));
                                          return c * (P.inverse() * A.curvature(pos.x, pos.y) * P);
                                      });
    DerivativeCheck out;
    out.analytic = ti.transport * ti.integral;
    Mat d = diff5([&](double s) { return path_transport(ctx, A, fam, s, steps); }, s0, h);
    // covariant correction for a moving end point
    out.numeric = d + A(fam.pos(s0, 1.0), fam.ds(s0, 1.0)) * ti.transport;
    out.rel_error = rel_err(out.analytic, out.numeric);
    return out;
}

// ---- axial gauge ----

AxialProjection axial_projection(const GroupContext& ctx, const SmoothConnection& A, double step) {
    for (double x : {-0.7, 0.3, 1.1})
        for (double y : {-0.4, 0.6})
            if (max_abs(A.A2(x, y)) > 0.0) throw std::invalid_argument("axial_projection: A must be A1 dx");
    const Mat id = ctx.identity();
    std::function<Mat(double)> gauge = [A, id, step](double x) -> Mat {
        const int n = std::max(1, static_cast<int>(std::ceil(std::abs(x) / step)));
        SmoothPath axis{line_piece({0.0, 0.0}, {x, 0.0})};
        State<1> y{id};
        rk4_path(axis, n, y, [&](double, const Point& pos, const Point& vel, const State<1>& s) {
            return State<1>{(-vel.x * A.A1(pos.x, 0.0) * s[0]).eval()};
        });
        return y[0];
    };
    AxialProjection out;
    out.gauge = gauge;
    out.projected = SmoothConnection::zero(ctx);
    out.projected.f = nullptr;
    out.projected.A1 = [A, gauge](double x, double y) -> Mat {
        Mat g = gauge(x);
        return g.inverse() * (A.A1(x, y) - A.A1(x, 0.0)) * g;
    };
    return out;
}

double axial_perturbation_residual(const GroupContext& ctx, const SmoothConnection& A, const SmoothConnection& eta,
                                   const SmoothPath& p, int steps) {
    auto proj = axial_projection(ctx, A.plus(eta));
    Mat lhs = ode_transport(ctx, proj.projected, p, steps);
    State<2> y{ctx.identity(), ctx.identity()};
    rk4_path(p, steps, y, [&](double, const Point& pos, const Point& vel, const State<2>& s) {
        Mat Pinv = s[0].inverse();
        return State<2>{(-A(pos, vel) * s[0]).eval(), (-(Pinv * eta(pos, vel) * s[0]) * s[1]).eval()};
    });
    Point a = path_start(p), b = path_end(p);
    Mat rhs = proj.gauge(b.x).inverse() * y[0] * y[1] * proj.gauge(a.x);
    return max_abs(lhs - rhs);
}

// ---- loop expansion ----

GroupFunction normalized_trace() {
    return [](const Mat& g) { return g.trace() / static_cast<double>(g.rows()); };
}

Mat integrate_rect(const AlgebraFn& g, double x0, double x1, double y0, double y1, int panels) {
    return gauss_1d([&](double x) -> Mat { return gauss_1d([&](double y) -> Mat { return g(x, y); }, y0, y1, panels); },
                    x0, x1, panels);
}

double integrate_rect_scalar(const std::function<double(double, double)>& g, double x0, double x1, double y0,
                             double y1, int panels) {
    return gauss_1d([&](double x) { return gauss_1d([&](double y) { return g(x, y); }, y0, y1, panels); }, x0, x1,
                    panels);
}

std::vector<LoopExpansionPoint> smooth_loop_expansion(const GroupContext& ctx, const SmoothConnection& A, double w,
                                                      double h, const std::vector<double>& eps,
                                                      const GroupFunction& psi, int steps) {
    if (!A.axial) throw std::invalid_argument("smooth_loop_expansion: A must be axial");
    std::vector<LoopExpansionPoint> out;
    const cd at_id = psi(ctx.identity());
    for (double e : eps) {
        const double ew = e * w, eh = e * h;
        auto loop = right_boundary(ew, eh);
        Mat hol = ode_transport(ctx, A, loop, steps);
        Mat fQ = integrate_rect([&](double x, double y) { return A.curvature(x, y); }, 0.0, ew, 0.0, eh, 2);
        Mat beta = ctx.zero();
        for (const auto& piece : loop)
            beta += gauss_1d([&](double t) -> Mat { return A(piece.pos(t), piece.vel(t)); }, piece.t0, piece.t1, 2);
        // (grad_X psi)(e) by differences along exp(sX)
        const double s = 1e-3;
        auto along = [&](double r) { return psi(exp_map(ctx, r * fQ)); };
        cd grad = (-along(2 * s) + 8.0 * along(s) - 8.0 * along(-s) + along(-2 * s)) / (12.0 * s);
        LoopExpansionPoint pt;
        pt.eps = e;
        pt.remainder = std::abs(psi(hol) - at_id + grad);
        pt.green_residual = max_abs(beta - fQ);
        out.push_back(pt);
    }
    return out;
}

// ---- homotopy gauges ----

Point homotopy_point(Homotopy h, const Point& x, double t) {
    if (h == Homotopy::Radial) return {t * x.x, t * x.y};
    if (t < 0.5) return {2 * t * x.x, 0.0};
    return {x.x, (2 * t - 1) * x.y};
}

Point homotopy_velocity(Homotopy h, const Point& x, double t) {
    if (h == Homotopy::Radial) return x;
    if (t < 0.5) return {2 * x.x, 0.0};
    return {0.0, 2 * x.y};
}

Point homotopy_variation(Homotopy h, const Point& x, const Point& v, double t) {
    (void)x;
    if (h == Homotopy::Radial) return {t * v.x, t * v.y};
    if (t < 0.5) return {2 * t * v.x, 0.0};
    return {v.x, (2 * t - 1) * v.y};
}

SmoothPath homotopy_path(Homotopy h, const Point& x) {
    if (h == Homotopy::Radial) return {line_piece({0.0, 0.0}, x)};
    auto first = line_piece({0.0, 0.0}, {x.x, 0.0});
    auto second = line_piece({x.x, 0.0}, x);
    // reparametrize onto [0, 1/2] and [1/2, 1]
    PathPiece a{[first](double t) { return first.pos(2 * t); },
                [first](double t) {
                    Point v = first.vel(2 * t);
                    return Point{2 * v.x, 2 * v.y};
                },
                0.0, 0.5};
    PathPiece b{[second](double t) { return second.pos(2 * t - 1); },
                [second](double t) {
                    Point v = second.vel(2 * t - 1);
                    return Point{2 * v.x, 2 * v.y};
                },
                0.5, 1.0};
    return {a, b};
}

Mat homotopy_gauge(const GroupContext& ctx, const SmoothConnection& A, Homotopy h, const Point& x, int steps) {
    return ode_transport(ctx, A, homotopy_path(h, x), steps);
}

SmoothConnection homotopy_project(const GroupContext& ctx, const SmoothConnection& A, Homotopy h, int steps) {
    auto component = [ctx, A, h, steps](double x, double y, Point v) -> Mat {
        Point px{x, y};
        auto ti = transport_with_integral(ctx, A, homotopy_path(h, px), steps,
                                          [&](double t, const Point& pos, const Point& vel, const Mat& P) -> Mat {
                                              double c = cross(vel, homotopy_variation(h, px, v, t));
                                              if (c == 0.0) return Mat::Zero(P.rows(), P.cols());
                                              return c * (P.inverse() * A.curvature(pos.x, pos.y) * P);
                                          });
        return ti.integral;
    };
    SmoothConnection out;
    out.A1 = [component](double x, double y) { return component(x, y, {1.0, 0.0}); };
    out.A2 = [component](double x, double y) { return component(x, y, {0.0, 1.0}); };
    return out;
}

double slice_residual(const SmoothConnection& A, Homotopy h, const std::vector<Point>& probes, int t_samples) {
    double worst = 0.0;
    for (const auto& x : probes)
        for (int k = 0; k < t_samples; ++k) {
            const double t = (k + 0.5) / t_samples;
            worst = std::max(worst, max_abs(A(homotopy_point(h, x, t), homotopy_velocity(h, x, t))));
        }
    return worst;
}

SmoothConnection reconstruct_from_curvature(const GroupContext& ctx, AlgebraFn F12, Homotopy h) {
    (void)ctx;
    auto component = [F12, h](double x, double y, Point v) -> Mat {
        Point px{x, y};
        auto integrand = [&](double t) -> Mat {
            Point pos = homotopy_point(h, px, t);
            return cross(homotopy_velocity(h, px, t), homotopy_variation(h, px, v, t)) * F12(pos.x, pos.y);
        };
        if (h == Homotopy::Radial) return gauss_1d(integrand, 0.0, 1.0, 2);
        return gauss_1d(integrand, 0.0, 0.5, 2) + gauss_1d(integrand, 0.5, 1.0, 2);
    };
    SmoothConnection out;
    out.A1 = [component](double x, double y) { return component(x, y, {1.0, 0.0}); };
    out.A2 = [component](double x, double y) { return component(x, y, {0.0, 1.0}); };
    return out;
}

Mat homotopy_potential(const SmoothConnection& eta, Homotopy h, const Point& x) {
    auto integrand = [&](double t) -> Mat { return eta(homotopy_point(h, x, t), homotopy_velocity(h, x, t)); };
    if (h == Homotopy::Radial) return gauss_1d(integrand, 0.0, 1.0, 2);
    return gauss_1d(integrand, 0.0, 0.5, 2) + gauss_1d(integrand, 0.5, 1.0, 2);
}

ProjectedFieldCheck projected_vector_field(const GroupContext& ctx, const SmoothConnection& A,
                                           const SmoothConnection& eta, Homotopy h, const Point& x, int steps,
                                           double s) {
    auto up = homotopy_project(ctx, A.plus(eta, s), h, steps);
    auto dn = homotopy_project(ctx, A.plus(eta, -s), h, steps);
    auto u = [&](double px, double py) { return homotopy_potential(eta, h, {px, py}); };
    const double dh = 1e-3;
    auto grad_u = [&](const Point& p, int i) -> Mat {
        if (i == 0) return diff5([&](double r) { return u(r, p.y); }, p.x, dh);
        return diff5([&](double r) { return u(p.x, r); }, p.y, dh);
    };

    ProjectedFieldCheck out;
    Mat u0 = u(x.x, x.y);
    double scale = 0.0, dp = 0.0, dm = 0.0;
    for (int i = 0; i < 2; ++i) {
        Mat a = i == 0 ? A.A1(x.x, x.y) : A.A2(x.x, x.y);
        Mat e = i == 0 ? eta.A1(x.x, x.y) : eta.A2(x.x, x.y);
        out.numeric[i] = i == 0 ? (up.A1(x.x, x.y) - dn.A1(x.x, x.y)) / (2 * s)
                                : (up.A2(x.x, x.y) - dn.A2(x.x, x.y)) / (2 * s);
        Mat ad = u0 * a - a * u0;
        Mat du = grad_u(x, i);
        out.plus_ad[i] = ad + e - du;
        out.minus_ad[i] = -ad + e - du;
        scale = std::max(scale, max_abs(out.numeric[i]));
        dp = std::max(dp, max_abs(out.numeric[i] - out.plus_ad[i]));
        dm = std::max(dm, max_abs(out.numeric[i] - out.minus_ad[i]));
    }
    out.rel_error_plus = scale > 0.0 ? dp / scale : dp;
    out.rel_error_minus = scale > 0.0 ? dm / scale : dm;

    const int samples = 17;
    for (int k = 0; k < samples; ++k) {
        const double t = (k + 0.5) / samples;
        Point p = homotopy_point(h, x, t), v = homotopy_velocity(h, x, t);
        Mat du_v = v.x * grad_u(p, 0) + v.y * grad_u(p, 1);
        out.reparam_residual = std::max(out.reparam_residual, max_abs(du_v - eta(p, v)));
    }
    return out;
}

// ---- diffeomorphisms ----

SmoothConnection pullback(const SmoothConnection& A, const PlaneMap& m) {
    auto comp = [A, m](double x, double y, int i) -> Mat {
        double J[2][2];
        m.jacobian(x, y, J);
        Point q = m.phi(x, y);
        return J[i][0] * A.A1(q.x, q.y) + J[i][1] * A.A2(q.x, q.y);
    };
    SmoothConnection out;
    out.A1 = [comp](double x, double y) { return comp(x, y, 0); };
    out.A2 = [comp](double x, double y) { return comp(x, y, 1); };
    return out;
}

PlaneMap shear_map(double c) {
    PlaneMap m;
    m.phi = [c](double x, double y) { return Point{x + c * y, y}; };
    m.jacobian = [c](double, double, double J[2][2]) {
        J[0][0] = 1.0;
        J[0][1] = 0.0;
        J[1][0] = c;
        J[1][1] = 1.0;
    };
    return m;
}

SmoothPath map_path(const SmoothPath& p, const PlaneMap& m) {
    SmoothPath out;
    for (const auto& piece : p) {
        out.push_back({[piece, m](double t) {
                           Point q = piece.pos(t);
                           return m.phi(q.x, q.y);
                       },
                       [piece, m](double t) {
                           Point q = piece.pos(t), v = piece.vel(t);
                           double J[2][2];
                           m.jacobian(q.x, q.y, J);
                           return Point{J[0][0] * v.x + J[1][0] * v.y, J[0][1] * v.x + J[1][1] * v.y};
                       },
                       piece.t0, piece.t1});
    }
    return out;
}

double curvature_norm2(const SmoothConnection& A, double x0, double x1, double y0, double y1, int panels) {
    return integrate_rect_scalar(
        [&](double x, double y) {
            Mat F = A.curvature(x, y);
            return inner(F, F);
        },
        x0, x1, y0, y1, panels);
}

double covariant_derivative_residual(const GroupContext& ctx, const SmoothConnection& A, const PathPiece& piece,
                                     const std::function<Mat(double)>& S, const std::function<Mat(double)>& dS,
                                     double t, int steps) {
    auto transport_to = [&](double r) {
        PathPiece sub = piece;
        sub.t1 = r;
        return ode_transport(ctx, A, {sub}, steps);
    };
    Mat lhs = dS(t) + A(piece.pos(t), piece.vel(t)) * S(t);
    Mat rhs = transport_to(t) * diff5([&](double r) { return (transport_to(r).inverse() * S(r)).eval(); }, t, 1e-3);
    return max_abs(lhs - rhs);
}

// ---- lab suite ----

namespace {

struct LabFields {
    Mat xa, xb, xc;
    SmoothConnection general, eta, axial, slice_radial;
    AlgebraFn f;
    GaugeFn gauge;
};

LabFields lab_fields(const GroupContext& ctx) {
    LabFields L;
    const int d = ctx.algebra_dim();
    L.xa = ctx.basis[0];
    L.xb = ctx.basis[std::min(1, d - 1)];
    L.xc = ctx.basis[std::min(2, d - 1)];
    Mat xa = L.xa, xb = L.xb, xc = L.xc;

    L.general.A1 = [=](double x, double y) { return (0.4 * std::sin(y) * xa + 0.3 * x * xb).eval(); };
    L.general.A2 = [=](double x, double y) { return (0.5 * std::cos(x) * xc + 0.2 * x * y * xa).eval(); };
    L.eta.A1 = [=](double x, double y) { return (0.6 * std::cos(x) * xb + 0.2 * y * xa).eval(); };
    L.eta.A2 = [=](double x, double y) { return (0.4 * std::sin(x * y) * xc).eval(); };
    L.f = [=](double x, double y) {
        return ((1.0 + 0.5 * std::sin(x) * std::cos(y)) * xa + 0.7 * x * y * xb + 0.3 * std::cos(x + y) * xc).eval();
    };
    L.axial = axial_from_curvature(ctx, L.f);

    auto phi = [=](double x, double y) { return ((1.0 + 0.3 * x) * xa + 0.5 * y * xb + 0.2 * x * y * xc).eval(); };
    L.slice_radial.A1 = [=](double x, double y) { return (-y * phi(x, y)).eval(); };
    L.slice_radial.A2 = [=](double x, double y) { return (x * phi(x, y)).eval(); };

    // g = exp(a(x, y) xb) exp(b(x, y) xa)
    auto ea = [ctx, xb](double x, double y) { return exp_map(ctx, (0.8 * std::sin(x + 0.5 * y)) * xb); };
    auto eb = [ctx, xa](double x, double y) { return exp_map(ctx, (0.6 * x * y - 0.3 * y) * xa); };
    L.gauge.g = [=](double x, double y) { return (ea(x, y) * eb(x, y)).eval(); };
    L.gauge.gx = [=](double x, double y) {
        double da = 0.8 * std::cos(x + 0.5 * y), db = 0.6 * y;
        return (da * xb * ea(x, y) * eb(x, y) + ea(x, y) * db * xa * eb(x, y)).eval();
    };
    L.gauge.gy = [=](double x, double y) {
        double da = 0.4 * std::cos(x + 0.5 * y), db = 0.6 * x - 0.3;
        return (da * xb * ea(x, y) * eb(x, y) + ea(x, y) * db * xa * eb(x, y)).eval();
    };
    return L;
}

SmoothPath lab_curve() {
    PathPiece c{[](double t) {
                    return Point{0.8 * std::cos(1.4 * kPi * t) - 0.2, 0.6 * std::sin(1.4 * kPi * t) + 0.1 * t};
                },
                [](double t) {
                    return Point{-0.8 * 1.4 * kPi * std::sin(1.4 * kPi * t),
                                 0.6 * 1.4 * kPi * std::cos(1.4 * kPi * t) + 0.1};
                },
                0.0, 1.0};
    return {c};
}

LabCheck below(std::string name, double value, double tol, std::string detail = {}) {
    return {std::move(name), value, tol, value < tol, std::move(detail)};
}

}  // namespace

std::vector<LabCheck> run_smooth_lab(const GroupContext& ctx) {
    std::vector<LabCheck> out;
    auto L = lab_fields(ctx);
    const std::vector<Point> probes{{0.3, 0.4}, {-0.5, 0.7}, {0.9, -0.6}, {-0.2, -0.8}};
    const auto curve = lab_curve();
    const int steps = 400;

    // axial round trip
    {
        double worst = 0.0;
        SmoothConnection noF = L.axial;
        noF.f = nullptr;
        for (const auto& p : probes) worst = std::max(worst, max_abs(noF.curvature(p.x, p.y) - L.f(p.x, p.y)));
        out.push_back(below("axial-curvature-round-trip", worst, 1e-8));
        out.push_back({"axial-flag", L.axial.check_axial(probes) ? 0.0 : 1.0, 0.5, L.axial.check_axial(probes), ""});
    }

    // transport basics
    {
        Mat P = ode_transport(ctx, L.general, curve, steps);
        out.push_back(below("transport-unitarity", unitarity_defect(P), 1e-10));
        Mat R = ode_transport(ctx, L.general, reversed(curve), steps);
        out.push_back(below("transport-reversal", max_abs(R * P - ctx.identity()), 1e-10));

        SmoothConnection rect = SmoothConnection::zero(ctx);
        rect.f = nullptr;
        Mat xa = L.xa;
        rect.A1 = [xa](double, double y) { return (-y * xa).eval(); };
        Mat hol = ode_transport(ctx, rect, rectangle_loop(0.0, 0.7, 0.0, 0.4), 200);
        out.push_back(below("abelian-rectangle-holonomy", max_abs(hol - exp_map(ctx, -0.28 * xa)), 1e-10));

        Mat ref = ode_transport(ctx, L.general, curve, 1280);
        double e1 = max_abs(ode_transport(ctx, L.general, curve, 10) - ref);
        double e2 = max_abs(ode_transport(ctx, L.general, curve, 20) - ref);
        double e3 = max_abs(ode_transport(ctx, L.general, curve, 40) - ref);
        double order = std::min(std::log2(e1 / e2), std::log2(e2 / e3));
        out.push_back({"transport-order", order, 3.5, order >= 3.5, "minimum order over two halvings"});
    }

    out.push_back(below("gauge-transport", gauge_transport_residual(ctx, L.general, L.gauge, curve, steps), 1e-7));
    out.push_back(below("gauge-curvature", gauge_curvature_residual(L.general, L.gauge, probes), 1e-6));
    out.push_back(
        below("connection-comparison", connection_comparison(ctx, L.general, L.general.plus(L.eta), curve, steps), 1e-7));
    out.push_back(
        below("connection-derivative", connection_derivative(ctx, L.general, L.eta, curve, steps).rel_error, 1e-5));

    {
        PathFamily fixed{[](double s, double t) { return Point{t, 0.5 * s * std::sin(kPi * t) + 0.3 * t}; },
                         [](double s, double t) { return Point{1.0, 0.5 * kPi * s * std::cos(kPi * t) + 0.3}; },
                         [](double, double t) { return Point{0.0, 0.5 * std::sin(kPi * t)}; }};
        out.push_back(below("path-derivative-fixed-ends", path_derivative(ctx, L.general, fixed, 0.4, steps).rel_error,
                            1e-5));
        PathFamily moving{[](double s, double t) { return Point{t * (1 + s), 0.4 * t + s * t * t}; },
                          [](double s, double t) { return Point{1 + s, 0.4 + 2 * s * t}; },
                          [](double, double t) { return Point{t, t * t}; }};
        out.push_back(below("path-derivative-moving-end", path_derivative(ctx, L.general, moving, 0.3, steps).rel_error,
                            1e-5));
    }

    {
        Mat xa = L.xa, xb = L.xb;
        std::function<Mat(double)> S = [xa, xb](double t) {
            return (std::cos(2 * t) * xa + t * t * xb + Mat::Identity(xa.rows(), xa.cols()) * cd(0.0, t)).eval();
        };
        std::function<Mat(double)> dS = [xa, xb](double t) {
            return (-2 * std::sin(2 * t) * xa + 2 * t * xb + Mat::Identity(xa.rows(), xa.cols()) * cd(0.0, 1.0)).eval();
        };
        out.push_back(below("covariant-derivative",
                            covariant_derivative_residual(ctx, L.general, curve[0], S, dS, 0.55, 2000), 1e-7));
    }

    {
        auto m = shear_map(0.5);
        Mat a = ode_transport(ctx, pullback(L.general, m), curve, steps);
        Mat b = ode_transport(ctx, L.general, map_path(curve, m), steps);
        out.push_back(below("pullback-naturality", max_abs(a - b), 1e-7));

        Mat xa = L.xa, xb = L.xb;
        SmoothConnection bump;
        auto env = [](double x, double y) { return std::exp(-0.5 * (x * x + y * y)); };
        bump.A1 = [=](double x, double y) { return (-0.5 * y * env(x, y) * (xa + 0.3 * x * xb)).eval(); };
        bump.A2 = [=](double x, double y) { return (0.5 * x * env(x, y) * (xa - 0.4 * y * xb)).eval(); };
        double base = curvature_norm2(bump, -8, 8, -8, 8, 16);
        double pulled = curvature_norm2(pullback(bump, m), -8, 8, -8, 8, 16);
        out.push_back(below("shear-norm-invariance", std::abs(pulled - base) / base, 1e-6));
    }

    {
        Mat xa = L.xa, xb = L.xb, xc = L.xc;
        auto Adx = SmoothConnection::dx_only(
            ctx, [=](double x, double y) { return (0.5 * std::cos(x) * xb + 0.3 * y * xa + 0.2 * x * y * xc).eval(); });
        auto proj = axial_projection(ctx, Adx);
        double on_axis = 0.0;
        for (const auto& p : probes) on_axis = std::max(on_axis, max_abs(proj.projected.A1(p.x, 0.0)));
        out.push_back(below("axial-projection-axial", on_axis, 1e-10));

        auto eta = SmoothConnection::dx_only(
            ctx, [=](double x, double y) { return (0.6 * std::cos(x) * xb + 0.2 * y * xa).eval(); });
        out.push_back(below("axial-perturbation", axial_perturbation_residual(ctx, L.axial, eta, curve, steps), 1e-7));

        auto hp = homotopy_project(ctx, Adx, Homotopy::CompleteAxial);
        double worst = 0.0;
        for (const auto& p : probes) {
            worst = std::max(worst, max_abs(hp.A1(p.x, p.y) - proj.projected.A1(p.x, p.y)));
            worst = std::max(worst, max_abs(hp.A2(p.x, p.y)));
        }
        out.push_back(below("complete-axial-matches-axial-projection", worst, 1e-8));
    }

    {
        std::vector<double> eps{0.4, 0.2, 0.1, 0.05};
        auto rows = smooth_loop_expansion(ctx, L.axial, 1.0, 0.8, eps, normalized_trace());
        std::vector<double> rem;
        double green = 0.0;
        for (const auto& r : rows) {
            rem.push_back(r.remainder);
            green = std::max(green, r.green_residual);
        }
        out.push_back(below("green-identity", green, 1e-6));
        auto fit = fit_loglog(eps, rem);
        out.push_back({"loop-remainder-slope", fit.slope, 4.0, fit.slope >= 3.6 && fit.slope <= 4.4,
                       "accepted band [3.6, 4.4]"});
    }

    {
        double radial = slice_residual(homotopy_project(ctx, L.general, Homotopy::Radial), Homotopy::Radial, probes);
        out.push_back(below("radial-slice", radial, 1e-6));
        double axial =
            slice_residual(homotopy_project(ctx, L.general, Homotopy::CompleteAxial), Homotopy::CompleteAxial, probes);
        out.push_back(below("complete-axial-slice", axial, 1e-6));
    }

    {
        const auto& S = L.slice_radial;
        auto back = reconstruct_from_curvature(ctx, [S](double x, double y) { return S.curvature(x, y); },
                                               Homotopy::Radial);
        auto ax = reconstruct_from_curvature(ctx, L.f, Homotopy::CompleteAxial);
        double wr = 0.0, wa = 0.0;
        for (const auto& p : probes) {
            wr = std::max({wr, max_abs(back.A1(p.x, p.y) - S.A1(p.x, p.y)), max_abs(back.A2(p.x, p.y) - S.A2(p.x, p.y))});
            wa = std::max({wa, max_abs(ax.A1(p.x, p.y) - L.axial.A1(p.x, p.y)), max_abs(ax.A2(p.x, p.y))});
        }
        out.push_back(below("radial-round-trip", wr, 1e-6));
        out.push_back(below("complete-axial-round-trip", wa, 1e-6));
    }

    {
        const Point x{0.6, -0.45};
        auto r = projected_vector_field(ctx, L.slice_radial, L.eta, Homotopy::Radial, x);
        auto a = projected_vector_field(ctx, L.axial, L.eta, Homotopy::CompleteAxial, x);
        char buf[160];
        std::snprintf(buf, sizeof buf, "minus-ad form rel. error: radial %.3g, complete-axial %.3g", r.rel_error_minus,
                      a.rel_error_minus);
        out.push_back(below("projected-field", std::max(r.rel_error_plus, a.rel_error_plus), 1e-4, buf));
        out.push_back(below("potential-reparametrization", std::max(r.reparam_residual, a.reparam_residual), 1e-6));
    }

    return out;
}

}  // namespace ym2
