#include <cmath>

#include "doctest.h"
#include "ym2/smooth.hpp"

using namespace ym2;

namespace {

constexpr double kPi = 3.14159265358979323846;

// composite Simpson on [a, b]
template <class F>
auto simpson(F&& g, double a, double b, int n = 2000) {
    const double h = (b - a) / n;
    auto sum = g(a) + g(b);
    for (int k = 1; k < n; ++k) sum += (k % 2 ? 4.0 : 2.0) * g(a + k * h);
    return (h / 3.0) * sum;
}

SmoothPath wiggle() {
    PathPiece c{[](double t) { return Point{t - 0.3, 0.4 * std::sin(2 * t) + 0.1}; },
                [](double t) { return Point{1.0, 0.8 * std::cos(2 * t)}; }, 0.0, 1.0};
    return {c};
}

std::vector<Point> probes() { return {{0.3, 0.4}, {-0.5, 0.7}, {0.9, -0.6}}; }

}  // namespace

TEST_CASE("axial connections from curvature") {
    auto u1 = make_group(GroupKind::U1);
    auto su2 = make_group(GroupKind::SU2);
    Mat x0 = su2.basis[0];
    auto none = axial_from_curvature(su2, [&](double, double) { return su2.zero(); });
    auto flat = axial_from_curvature(su2, [&](double, double) { return x0; });
    auto lin = axial_from_curvature(su2, [&](double x, double) { return (x * x0).eval(); });
    for (const auto& p : probes()) {
        CHECK(max_abs(none.A1(p.x, p.y)) == 0.0);
        CHECK(max_abs(flat.A1(p.x, p.y) + p.y * x0) < 1e-14);
        CHECK(max_abs(lin.A1(p.x, p.y) + p.x * p.y * x0) < 1e-14);
        CHECK(max_abs(flat.A2(p.x, p.y)) == 0.0);
    }
    CHECK(flat.check_axial(probes()));
    CHECK_FALSE(SmoothConnection::dx_only(u1, [&](double, double) { return u1.basis[0]; }).check_axial(probes()));
}

TEST_CASE("transport along smooth paths") {
    auto u1 = make_group(GroupKind::U1);
    auto su2 = make_group(GroupKind::SU2);
    CHECK(max_abs(ode_transport(su2, SmoothConnection::zero(su2), wiggle(), 50) - su2.identity()) == 0.0);

    // U1 rectangle: exp(-ab xi0)
    auto A = SmoothConnection::dx_only(u1, [&](double, double y) { return (-y * u1.basis[0]).eval(); });
    const double a = 0.7, b = 0.45;
    Mat hol = ode_transport(u1, A, rectangle_loop(0.0, a, 0.0, b), 100);
    CHECK(std::abs(hol(0, 0) - std::exp(-a * b * u1.basis[0](0, 0))) < 1e-12);

    Mat x1 = su2.basis[1], x2 = su2.basis[2];
    auto B = SmoothConnection::dx_only(su2, [=](double x, double y) { return (std::sin(y) * x1 + x * x2).eval(); });
    B.A2 = [=](double x, double) { return (0.5 * std::cos(x) * x1).eval(); };
    Mat P = ode_transport(su2, B, wiggle(), 200);
    Mat R = ode_transport(su2, B, reversed(wiggle()), 200);
    CHECK(max_abs(R * P - su2.identity()) < 1e-10);
    CHECK(unitarity_defect(P) < 1e-10);
}

TEST_CASE("gauge transformations of smooth connections") {
    auto u1 = make_group(GroupKind::U1);
    auto su2 = make_group(GroupKind::SU2);
    Mat x0 = su2.basis[0], x1 = su2.basis[1];
    SmoothConnection A;
    A.A1 = [=](double x, double y) { return (x * y * x0 + std::cos(y) * x1).eval(); };
    A.A2 = [=](double x, double) { return (std::sin(x) * x0).eval(); };
    GaugeFn id{[&](double, double) { return su2.identity(); }, [&](double, double) { return su2.zero(); },
               [&](double, double) { return su2.zero(); }};
    auto same = gauge_transform(A, id);
    for (const auto& p : probes()) CHECK(max_abs(same.A1(p.x, p.y) - A.A1(p.x, p.y)) < 1e-15);

    // abelian: A^g = A + g^{-1} dg and F unchanged
    Mat i0 = u1.basis[0];
    SmoothConnection C;
    C.A1 = [=](double x, double y) { return (x * y * i0).eval(); };
    C.A2 = [=](double x, double) { return (x * x * i0).eval(); };
    GaugeFn g{[=](double x, double y) { return exp_map(u1, (x + y * y) * i0); },
              [=](double x, double y) { return (i0 * exp_map(u1, (x + y * y) * i0)).eval(); },
              [=](double x, double y) { return (2 * y * i0 * exp_map(u1, (x + y * y) * i0)).eval(); }};
    auto Cg = gauge_transform(C, g);
    for (const auto& p : probes()) {
        CHECK(max_abs(Cg.A1(p.x, p.y) - C.A1(p.x, p.y) - i0) < 1e-14);
        CHECK(max_abs(Cg.A2(p.x, p.y) - C.A2(p.x, p.y) - 2 * p.y * i0) < 1e-14);
        CHECK(max_abs(Cg.curvature(p.x, p.y) - C.curvature(p.x, p.y)) < 1e-9);
    }
    CHECK(gauge_transport_residual(u1, C, g, wiggle(), 400) < 1e-10);
}

TEST_CASE("connection comparison and differentiation") {
    auto u1 = make_group(GroupKind::U1);
    auto su2 = make_group(GroupKind::SU2);
    Mat x0 = su2.basis[0], x2 = su2.basis[2];
    SmoothConnection A;
    A.A1 = [=](double x, double y) { return (std::sin(x + y) * x0).eval(); };
    A.A2 = [=](double x, double) { return (x * x2).eval(); };
    CHECK(connection_comparison(su2, A, A, wiggle(), 200) < 1e-14);

    auto zero = SmoothConnection::zero(su2);
    auto d0 = connection_derivative(su2, A, zero, wiggle(), 200);
    CHECK(max_abs(d0.analytic) == 0.0);
    CHECK(max_abs(d0.numeric) == 0.0);

    // abelian: //^B = exp(-int B<l'>) and d// = -// int eta<l'>
    Mat i0 = u1.basis[0];
    SmoothConnection B, eta;
    B.A1 = [=](double x, double y) { return (std::cos(x) * y * i0).eval(); };
    B.A2 = [=](double x, double) { return (x * i0).eval(); };
    eta.A1 = [=](double, double y) { return (y * y * i0).eval(); };
    eta.A2 = [=](double x, double y) { return (std::exp(x) * y * i0).eval(); };
    auto line = [&](const SmoothConnection& c) {
        const auto piece = wiggle()[0];
        return simpson([&](double t) { return c(piece.pos(t), piece.vel(t))(0, 0); }, 0.0, 1.0);
    };
    Mat PB = ode_transport(u1, B, wiggle(), 400);
    CHECK(std::abs(PB(0, 0) - std::exp(-line(B))) < 1e-11);
    CHECK(connection_comparison(u1, B, B.plus(eta), wiggle(), 400) < 1e-11);
    auto d = connection_derivative(u1, B, eta, wiggle(), 400);
    CHECK(std::abs(d.analytic(0, 0) + PB(0, 0) * line(eta)) < 1e-11);
    CHECK(d.rel_error < 1e-6);
}

TEST_CASE("path differentiation") {
    auto u1 = make_group(GroupKind::U1);
    auto su2 = make_group(GroupKind::SU2);
    PathFamily bump{[](double s, double t) { return Point{t, s * std::sin(kPi * t)}; },
                    [](double s, double t) { return Point{1.0, kPi * s * std::cos(kPi * t)}; },
                    [](double, double t) { return Point{0.0, std::sin(kPi * t)}; }};

    auto flat = path_derivative(su2, SmoothConnection::zero(su2), bump, 0.3, 100);
    CHECK(max_abs(flat.analytic) == 0.0);
    CHECK(max_abs(flat.numeric) < 1e-12);

    // U1, f = xi0: //_1 = exp(2 s xi0 / pi), d/ds = (2 / pi) xi0 //_1
    Mat i0 = u1.basis[0];
    auto A = axial_from_curvature(u1, [=](double, double) { return i0; });
    const double s0 = 0.3;
    auto r = path_derivative(u1, A, bump, s0, 400);
    cd expect = (2.0 / kPi) * i0(0, 0) * std::exp(2.0 * s0 / kPi * i0(0, 0));
    CHECK(std::abs(r.analytic(0, 0) - expect) < 1e-10);
    CHECK(std::abs(r.numeric(0, 0) - expect) < 1e-9);
}

TEST_CASE("axial projection") {
    auto u1 = make_group(GroupKind::U1);
    auto su2 = make_group(GroupKind::SU2);
    auto axial = axial_from_curvature(su2, [&](double x, double) { return (x * su2.basis[1]).eval(); });
    auto same = axial_projection(su2, axial);
    for (double x : {-0.8, 0.2, 1.3}) CHECK(max_abs(same.gauge(x) - su2.identity()) == 0.0);

    Mat i0 = u1.basis[0];
    auto A = SmoothConnection::dx_only(u1, [=](double x, double y) { return ((std::cos(x) + y) * i0).eval(); });
    auto proj = axial_projection(u1, A);
    for (double x : {-0.8, 0.2, 1.3})
        CHECK(std::abs(proj.gauge(x)(0, 0) - std::exp(-std::sin(x) * i0(0, 0))) < 1e-12);
    for (const auto& p : probes()) CHECK(max_abs(proj.projected.A1(p.x, p.y) - p.y * i0) < 1e-12);

    SmoothConnection notdx = A;
    notdx.A2 = [=](double, double) { return i0; };
    CHECK_THROWS_AS(axial_projection(u1, notdx), std::invalid_argument);
}

TEST_CASE("loop expansion of smooth holonomy") {
    auto u1 = make_group(GroupKind::U1);
    auto zero = axial_from_curvature(u1, [&](double, double) { return u1.zero(); });
    for (const auto& r : smooth_loop_expansion(u1, zero, 1.0, 1.0, {0.4, 0.1}, normalized_trace()))
        CHECK(r.remainder == 0.0);

    // constant f: remainder |e^{-th} - 1 + th| with th = eps^2 w h xi0
    const cd i0 = u1.basis[0](0, 0);
    auto A = axial_from_curvature(u1, [&](double, double) { return u1.basis[0]; });
    std::vector<double> eps{0.4, 0.2, 0.1, 0.05};
    auto rows = smooth_loop_expansion(u1, A, 1.0, 0.5, eps, normalized_trace());
    for (const auto& r : rows) {
        cd th = r.eps * r.eps * 0.5 * i0;
        CHECK(r.remainder == doctest::Approx(std::abs(std::exp(-th) - 1.0 + th)).epsilon(1e-6));
        CHECK(r.green_residual < 1e-14);
    }
    CHECK_THROWS(smooth_loop_expansion(u1, SmoothConnection::dx_only(u1, A.A1), 1, 1, eps, normalized_trace()));
}

TEST_CASE("homotopy gauges") {
    auto su2 = make_group(GroupKind::SU2);
    Mat x0 = su2.basis[0], x1 = su2.basis[1];
    auto phi = [=](double x, double y) { return ((1.0 + x) * x0 + y * x1).eval(); };
    SmoothConnection radial;
    radial.A1 = [=](double x, double y) { return (-y * phi(x, y)).eval(); };
    radial.A2 = [=](double x, double y) { return (x * phi(x, y)).eval(); };
    CHECK(slice_residual(radial, Homotopy::Radial, probes()) < 1e-15);

    // a slice connection is fixed by the projection
    auto pr = homotopy_project(su2, radial, Homotopy::Radial);
    for (const auto& p : probes()) {
        CHECK(max_abs(pr.A1(p.x, p.y) - radial.A1(p.x, p.y)) < 1e-8);
        CHECK(max_abs(pr.A2(p.x, p.y) - radial.A2(p.x, p.y)) < 1e-8);
    }
    // gauge along the homotopy is the identity in the slice
    CHECK(max_abs(homotopy_gauge(su2, radial, Homotopy::Radial, {0.4, -0.3}, 50) - su2.identity()) < 1e-15);

    auto Adx = SmoothConnection::dx_only(su2, [=](double x, double y) { return (std::cos(x) * x1 + y * x0).eval(); });
    auto ax = axial_projection(su2, Adx);
    auto hp = homotopy_project(su2, Adx, Homotopy::CompleteAxial);
    for (const auto& p : probes()) {
        CHECK(max_abs(hp.A1(p.x, p.y) - ax.projected.A1(p.x, p.y)) < 1e-8);
        CHECK(max_abs(hp.A2(p.x, p.y)) < 1e-12);
    }
    CHECK(slice_residual(hp, Homotopy::CompleteAxial, probes()) < 1e-6);

    auto none = reconstruct_from_curvature(su2, [&](double, double) { return su2.zero(); }, Homotopy::Radial);
    CHECK(max_abs(none.A1(0.3, 0.2)) == 0.0);
    auto rec = reconstruct_from_curvature(su2, [=](double, double) { return x1; }, Homotopy::CompleteAxial);
    for (const auto& p : probes()) {
        CHECK(max_abs(rec.A1(p.x, p.y) + p.y * x1) < 1e-14);
        CHECK(max_abs(rec.A2(p.x, p.y)) < 1e-14);
    }
}

TEST_CASE("projected vector field") {
    auto u1 = make_group(GroupKind::U1);
    auto su2 = make_group(GroupKind::SU2);
    const Point x{0.5, -0.4};

    auto radial_slice = [](const GroupContext& ctx) {
        Mat a = ctx.basis[0], b = ctx.basis[std::min(1, ctx.algebra_dim() - 1)];
        SmoothConnection A;
        A.A1 = [=](double x, double y) { return (-y * ((1 + x) * a + y * b)).eval(); };
        A.A2 = [=](double x, double y) { return (x * ((1 + x) * a + y * b)).eval(); };
        return A;
    };
    auto perturbation = [](const GroupContext& ctx) {
        Mat a = ctx.basis[0], c = ctx.basis[std::min(2, ctx.algebra_dim() - 1)];
        SmoothConnection eta;
        eta.A1 = [=](double x, double y) { return (std::cos(x) * c + y * a).eval(); };
        eta.A2 = [=](double x, double y) { return (x * y * c).eval(); };
        return eta;
    };

    auto zero = projected_vector_field(su2, radial_slice(su2), SmoothConnection::zero(su2), Homotopy::Radial, x);
    CHECK(max_abs(zero.numeric[0]) == 0.0);
    CHECK(max_abs(zero.plus_ad[1]) == 0.0);

    // abelian: both sign forms reduce to eta - du
    auto ab = projected_vector_field(u1, radial_slice(u1), perturbation(u1), Homotopy::Radial, x);
    CHECK(ab.rel_error_plus < 1e-6);
    CHECK(ab.rel_error_minus < 1e-6);

    auto nonab = projected_vector_field(su2, radial_slice(su2), perturbation(su2), Homotopy::Radial, x);
    CHECK(nonab.rel_error_plus < 1e-4);
    CHECK(nonab.rel_error_minus > 1e-2);
    CHECK(nonab.reparam_residual < 1e-6);
}

TEST_CASE("diffeomorphism naturality") {
    auto su2 = make_group(GroupKind::SU2);
    Mat x0 = su2.basis[0], x2 = su2.basis[2];
    SmoothConnection A;
    A.A1 = [=](double x, double y) { return (std::sin(y) * x0 + x * x2).eval(); };
    A.A2 = [=](double x, double y) { return (x * y * x0).eval(); };
    auto m = shear_map(-0.7);
    Mat a = ode_transport(su2, pullback(A, m), wiggle(), 300);
    Mat b = ode_transport(su2, A, map_path(wiggle(), m), 300);
    CHECK(max_abs(a - b) < 1e-12);
    // curvature pulls back as a two form with unit Jacobian
    auto pA = pullback(A, m);
    for (const auto& p : probes()) {
        Point q = m.phi(p.x, p.y);
        CHECK(max_abs(pA.curvature(p.x, p.y) - A.curvature(q.x, q.y)) < 1e-9);
    }
}

TEST_CASE("quadrature helpers") {
    CHECK(integrate_rect_scalar([](double x, double y) { return x * x * y; }, 0, 2, -1, 3, 1) ==
          doctest::Approx(8.0 / 3.0 * 4.0).epsilon(1e-14));
    CHECK(integrate_rect_scalar([](double x, double y) { return std::exp(-x * x - y * y); }, -6, 6, -6, 6, 6) ==
          doctest::Approx(kPi).epsilon(1e-12));
}

TEST_CASE("smooth lab suite") {
    for (auto ctx : {make_group(GroupKind::U1), make_group(GroupKind::SU2), make_group(GroupKind::SUN, 3)}) {
        CAPTURE(ctx.name());
        for (const auto& c : run_smooth_lab(ctx)) {
            CAPTURE(c.name);
            CAPTURE(c.value);
            CHECK(c.pass);
        }
    }
}
