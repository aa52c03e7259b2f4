#pragma once

#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "ym2/transport.hpp"

namespace ym2 {

constexpr double kInfiniteArea = std::numeric_limits<double>::infinity();

// Simple crossing at `vertex`: edges e1..e4 leave the vertex along the positive x,
// positive y, negative x and negative y half-axes; faces t1..t4 lie in quadrants I..IV.
struct Crossing {
    Point vertex;
    std::string e1, e2, e3, e4;
    double t1 = kInfiniteArea, t2 = kInfiniteArea, t3 = kInfiniteArea, t4 = kInfiniteArea;
};

struct NamedEdge {
    std::string name;
    TamePath path;
};

class TameGraph {
public:
    TameGraph() = default;
    TameGraph(std::vector<NamedEdge> edges, std::optional<Crossing> crossing = std::nullopt);

    const std::vector<NamedEdge>& edges() const { return edges_; }
    const std::vector<Point>& vertices() const { return vertices_; }
    const std::optional<Crossing>& crossing() const { return crossing_; }
    int edge_index(const std::string& name) const;  // -1 when absent
    int vertex_index(const Point& p) const;          // -1 when absent
    int start_vertex(int edge) const { return start_[edge]; }
    int end_vertex(int edge) const { return end_[edge]; }

    // Grid check that distinct edges meet only at common endpoints; throws GeometryError.
    void validate(const GridWindow& w) const;
    // Same graph with edge `name` replaced; no intersection validation.
    TameGraph with_edge(const std::string& name, TamePath path) const;

    std::string to_json() const;
    static TameGraph from_json(const std::string& text);

private:
    std::vector<NamedEdge> edges_;
    std::vector<Point> vertices_;
    std::vector<int> start_, end_;
    std::optional<Crossing> crossing_;
};

// omega in K^G, indexed like TameGraph::edges().
using HolonomyAssignment = std::vector<Mat>;
// u : V(G) -> K, indexed like TameGraph::vertices().
using DiscreteGauge = std::vector<Mat>;

HolonomyAssignment holonomies(const FieldSource& f, const TameGraph& g, int substeps);
// omega^u(sigma) = u(sigma_f)^{-1} omega(sigma) u(sigma_i)
HolonomyAssignment apply_gauge(const TameGraph& g, const HolonomyAssignment& omega, const DiscreteGauge& u);

struct Letter {
    int edge = 0;
    int power = 1;  // +1 or -1
};

struct TraceWord {
    cd coeff{1.0, 0.0};
    std::vector<Letter> letters;  // product left to right
};

class WilsonFunctional {
public:
    WilsonFunctional() = default;
    explicit WilsonFunctional(std::vector<TraceWord> words) : words_(std::move(words)) {}

    // Word from edge names; a trailing "^-1" marks an inverse, e.g. {"b", "e2^-1"}.
    static TraceWord word(const TameGraph& g, const std::vector<std::string>& letters, cd coeff = 1.0);
    // c * tr(I)
    static WilsonFunctional constant(cd c);

    const std::vector<TraceWord>& words() const { return words_; }
    bool uses(int edge) const;

    cd evaluate(const HolonomyAssignment& omega) const;
    // d/dt U(omega(sigma) e^{tX})
    cd grad_edge(const HolonomyAssignment& omega, int sigma, const Mat& X) const;
    // d/dt U(e^{tX} omega(sigma))
    cd grad_right(const HolonomyAssignment& omega, int sigma, const Mat& X) const;
    // grad^{s1}_{X1} grad^{s2}_{X2} U
    cd grad2(const HolonomyAssignment& omega, int s1, const Mat& X1, int s2, const Mat& X2) const;
    // sum over the basis of grad^{s1}_xi grad^{s2}_xi U
    cd grad_dot(const GroupContext& ctx, const HolonomyAssignment& omega, int s1, int s2) const;

private:
    std::vector<TraceWord> words_;
};

// U constant in (x, y) under omega(e1) -> omega(e1) x, omega(e3) -> omega(e3) x,
// omega(e2) -> omega(e2) y, omega(e4) -> omega(e4) y, over random probes.
bool check_extended_gauge_invariance(const GroupContext& ctx, const TameGraph& g, const WilsonFunctional& U,
                                     int probes = 100, std::uint64_t seed = 1, double tol = 1e-10);

struct FigureEight {
    TameGraph graph;
    WilsonFunctional U;
    double t1 = 0, t3 = 0, w1 = 1, w3 = 1, h2 = 0, h4 = 0;
    int e1 = 0, e2 = 0, e3 = 0, e4 = 0, a = 0, b = 0;
};

// Lobes [0, w1] x [0, t1/w1] and [-w3, 0] x [-t3/w3, 0] touching at the origin.
FigureEight build_figure_eight(double t1, double t3, const GridWindow& w, double w1 = 1.0, double w3 = 1.0);

// e2 pushed right to 0 -> (eps, 0) -> (eps, h2) -> (0, h2) (the plus graph) and
// e4 pushed to 0 -> (eps, 0) -> (eps, -h4) -> (0, -h4) (the minus graph).
TamePath deformed_e2(const FigureEight& fe, const GridWindow& w, double eps);
TamePath deformed_e4(const FigureEight& fe, const GridWindow& w, double eps);

}  // namespace ym2
