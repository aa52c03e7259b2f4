#include <cmath>

#include "doctest.h"
#include "ym2/graph.hpp"

using namespace ym2;

namespace {

GridWindow bench_window() { return GridWindow::with_cells(-1.5, 1.5, -1.0, 1.0, 0.05, 0.5); }

HolonomyAssignment random_omega(const GroupContext& ctx, size_t n, CounterRng& rng) {
    HolonomyAssignment om;
    for (size_t k = 0; k < n; ++k) om.push_back(exp_map(ctx, sample_algebra_gaussian(ctx, 1.0, rng)));
    return om;
}

cd fd_left(const WilsonFunctional& U, HolonomyAssignment om, const GroupContext& ctx, int s, const Mat& X,
           double h = 1e-5) {
    const Mat base = om[s];
    om[s] = base * exp_map(ctx, h * X);
    cd up = U.evaluate(om);
    om[s] = base * exp_map(ctx, -h * X);
    cd dn = U.evaluate(om);
    return (up - dn) / (2 * h);
}

cd fd_right(const WilsonFunctional& U, HolonomyAssignment om, const GroupContext& ctx, int s, const Mat& X,
            double h = 1e-5) {
    const Mat base = om[s];
    om[s] = exp_map(ctx, h * X) * base;
    cd up = U.evaluate(om);
    om[s] = exp_map(ctx, -h * X) * base;
    cd dn = U.evaluate(om);
    return (up - dn) / (2 * h);
}

}  // namespace

TEST_CASE("figure-eight construction") {
    auto w = bench_window();
    auto fe = build_figure_eight(0.5, 0.5, w);
    CHECK(fe.graph.edges().size() == 6);
    CHECK(fe.graph.vertices().size() == 5);
    CHECK(fe.h2 == 0.5);
    REQUIRE(fe.graph.crossing().has_value());
    CHECK(fe.graph.crossing()->t1 == 0.5);
    CHECK(std::isinf(fe.graph.crossing()->t2));

    auto su2 = make_group(GroupKind::SU2);
    HolonomyAssignment id(6, su2.identity());
    CHECK(std::abs(fe.U.evaluate(id) - cd(2.0)) < 1e-15);
    CHECK(check_extended_gauge_invariance(su2, fe.graph, fe.U));
    WilsonFunctional single({WilsonFunctional::word(fe.graph, {"e1"})});
    CHECK_FALSE(check_extended_gauge_invariance(su2, fe.graph, single));
    CHECK(check_extended_gauge_invariance(su2, fe.graph, WilsonFunctional::constant(3.0)));

    CHECK_THROWS_AS(build_figure_eight(0.52, 0.5, w), GeometryError);
}

TEST_CASE("graph validation rejects overlapping edges") {
    auto w = bench_window();
    std::vector<NamedEdge> edges;
    edges.push_back({"p", TamePath({Segment::forward(HorizontalCurve::flat(w, 0.0, 0.5, 0.5))})});
    edges.push_back({"q", TamePath({Segment::forward(HorizontalCurve::flat(w, 0.25, 0.75, 0.5))})});
    CHECK_THROWS_AS(TameGraph(edges).validate(w), GeometryError);

    std::vector<NamedEdge> crossing;
    crossing.push_back({"h", TamePath({Segment::forward(HorizontalCurve::flat(w, -0.5, 0.5, 0.0))})});
    crossing.push_back({"v", TamePath({Segment::vertical(0.0, -0.5, 0.5)})});
    CHECK_THROWS_AS(TameGraph(crossing).validate(w), GeometryError);

    auto fe = build_figure_eight(0.5, 0.5, w);
    auto deformed = fe.graph.with_edge("e2", deformed_e2(fe, w, 0.1));
    CHECK_THROWS_AS(deformed.validate(w), GeometryError);
}

TEST_CASE("graph json round trip") {
    auto w = bench_window();
    auto fe = build_figure_eight(0.5, 0.5, w);
    std::string text = fe.graph.to_json();
    auto back = TameGraph::from_json(text);
    CHECK(back.to_json() == text);
    CHECK(back.edges().size() == fe.graph.edges().size());
    CHECK(std::isinf(back.crossing()->t4));
    CHECK(back.crossing()->t1 == fe.graph.crossing()->t1);
    auto stair_edges = std::vector<NamedEdge>{
        {"s", TamePath({Segment::forward(HorizontalCurve(w, 0.1, 0.25, {0.5, -0.5, 0.5}))})}};
    TameGraph stair(stair_edges);
    auto again = TameGraph::from_json(stair.to_json());
    CHECK(again.edges()[0].path.segments[0].curve.x_start == 0.1);
    CHECK(again.edges()[0].path.segments[0].curve.x_end == 0.25);
}

TEST_CASE("holonomies on the benchmark") {
    auto su2 = make_group(GroupKind::SU2);
    auto w = bench_window();
    auto fe = build_figure_eight(0.5, 0.5, w);
    auto zero = NoiseField::zeros(su2, w);
    for (const auto& m : holonomies(zero, fe.graph, 4)) CHECK(max_abs(m - su2.identity()) == 0.0);
    auto f = sample_field(su2, w, 12);
    auto om = holonomies(f, fe.graph, 4);
    CHECK(max_abs(om[fe.e2] - su2.identity()) == 0.0);
    CHECK(max_abs(om[fe.e4] - su2.identity()) == 0.0);
    CHECK(max_abs(om[fe.e1] - su2.identity()) == 0.0);
    auto rev = transport_tame(f, fe.graph.edges()[fe.a].path.reversed(), 4);
    CHECK(max_abs(rev - om[fe.a].adjoint()) < 1e-15);
}

TEST_CASE("insertion derivatives") {
    auto w = bench_window();
    auto fe = build_figure_eight(0.5, 0.5, w);
    CounterRng rng(3);
    for (auto ctx : {make_group(GroupKind::U1), make_group(GroupKind::SU2), make_group(GroupKind::SUN, 3)}) {
        CAPTURE(ctx.name());
        HolonomyAssignment id(6, ctx.identity());
        CHECK(std::abs(fe.U.grad_edge(id, fe.e1, ctx.zero())) == 0.0);
        CHECK(std::abs(fe.U.grad_right(id, fe.e1, ctx.zero())) == 0.0);
        CHECK(std::abs(WilsonFunctional::constant(2.0).grad_dot(ctx, id, fe.e1, fe.e2)) == 0.0);
        double worst = 0.0;
        for (int k = 0; k < 200; ++k) {
            auto om = random_omega(ctx, 6, rng);
            Mat X = sample_algebra_gaussian(ctx, 1.0, rng);
            for (int s = 0; s < 6; ++s) {
                worst = std::max(worst, std::abs(fe.U.grad_edge(om, s, X) - fd_left(fe.U, om, ctx, s, X)));
                worst = std::max(worst, std::abs(fe.U.grad_right(om, s, X) - fd_right(fe.U, om, ctx, s, X)));
            }
            // second derivative by differencing the exact first derivative
            Mat Y = sample_algebra_gaussian(ctx, 1.0, rng);
            for (int s1 : {fe.e1, fe.a, fe.e2}) {
                for (int s2 : {fe.e2, fe.a, fe.e3}) {
                    const double h = 1e-5;
                    auto shifted = om;
                    shifted[s1] = om[s1] * exp_map(ctx, h * X);
                    cd up = fe.U.grad_edge(shifted, s2, Y);
                    shifted[s1] = om[s1] * exp_map(ctx, -h * X);
                    cd dn = fe.U.grad_edge(shifted, s2, Y);
                    worst = std::max(worst, std::abs(fe.U.grad2(om, s1, X, s2, Y) - (up - dn) / (2 * h)));
                }
            }
        }
        CHECK(worst < 1e-7);
    }
}

TEST_CASE("grad_dot oracles and basis independence") {
    auto w = bench_window();
    auto fe = build_figure_eight(0.5, 0.5, w);
    auto u1 = make_group(GroupKind::U1);
    auto su2 = make_group(GroupKind::SU2);
    CHECK(std::abs(fe.U.grad_dot(u1, HolonomyAssignment(6, u1.identity()), fe.e1, fe.e2) - cd(1.0)) < 1e-14);
    CHECK(std::abs(fe.U.grad_dot(su2, HolonomyAssignment(6, su2.identity()), fe.e1, fe.e2) - cd(3.0)) < 1e-14);

    WilsonFunctional tr1({WilsonFunctional::word(fe.graph, {"e1"})});
    HolonomyAssignment id(6, su2.identity());
    CHECK(std::abs(tr1.grad_edge(id, fe.e1, su2.basis[0])) < 1e-15);

    CounterRng rng(8);
    Eigen::MatrixXd G(3, 3);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) G(i, j) = rng.normal();
    Eigen::MatrixXd R = Eigen::HouseholderQR<Eigen::MatrixXd>(G).householderQ();
    auto rot = rotated_basis(su2, R);
    for (int k = 0; k < 20; ++k) {
        auto om = random_omega(su2, 6, rng);
        CHECK(std::abs(fe.U.grad_dot(su2, om, fe.e1, fe.e2) - fe.U.grad_dot(rot, om, fe.e1, fe.e2)) < 1e-10);
    }
}

TEST_CASE("gauge transformations") {
    auto w = bench_window();
    auto fe = build_figure_eight(0.5, 0.5, w);
    auto su2 = make_group(GroupKind::SU2);
    CounterRng rng(19);
    const auto& g = fe.graph;
    const int nv = static_cast<int>(g.vertices().size());
    const int v0 = g.vertex_index({0.0, 0.0});
    for (int k = 0; k < 100; ++k) {
        auto om = random_omega(su2, 6, rng);
        DiscreteGauge ident(nv, su2.identity());
        auto same = apply_gauge(g, om, ident);
        for (int e = 0; e < 6; ++e) CHECK(max_abs(same[e] - om[e]) < 1e-15);

        DiscreteGauge u;
        for (int v = 0; v < nv; ++v) u.push_back(exp_map(su2, sample_algebra_gaussian(su2, 1.0, rng)));
        auto moved = apply_gauge(g, om, u);
        DiscreteGauge uinv;
        for (const auto& m : u) uinv.push_back(m.adjoint());
        auto back = apply_gauge(g, moved, uinv);
        for (int e = 0; e < 6; ++e) CHECK(max_abs(back[e] - om[e]) < 1e-13);
        CHECK(std::abs(fe.U.evaluate(moved) - fe.U.evaluate(om)) < 1e-10);

        // single-vertex gauge only touches incident edges
        DiscreteGauge single(nv, su2.identity());
        const int va = g.vertex_index({fe.w1, 0.0});
        single[va] = u[va];
        auto one = apply_gauge(g, om, single);
        for (int e = 0; e < 6; ++e) {
            bool incident = g.start_vertex(e) == va || g.end_vertex(e) == va;
            if (!incident) CHECK(max_abs(one[e] - om[e]) == 0.0);
        }

        // transformation law of the edge derivative
        Mat xi = sample_algebra_gaussian(su2, 1.0, rng);
        for (int s = 0; s < 6; ++s) {
            cd lhs = fe.U.grad_edge(moved, s, xi);
            cd rhs = fe.U.grad_edge(om, s, adjoint_group(u[g.start_vertex(s)], xi));
            CHECK(std::abs(lhs - rhs) < 1e-10);
        }

        // grad_dot with both edges leaving the crossing is gauge invariant
        CHECK(std::abs(fe.U.grad_dot(su2, moved, fe.e1, fe.e2) - fe.U.grad_dot(su2, om, fe.e1, fe.e2)) < 1e-10);
        (void)v0;
    }
}
