#pragma once

#include <vector>

#include "ym2/noise.hpp"

namespace ym2 {

struct Point {
    double x = 0.0, y = 0.0;
};

bool same_point(const Point& a, const Point& b, double tol = 1e-12);

// Staircase graph x -> (x, y(x)) over [x_start, x_end], one height per grid column.
struct HorizontalCurve {
    double x_start = 0.0, x_end = 0.0;
    std::vector<double> heights;

    HorizontalCurve() = default;
    HorizontalCurve(const GridWindow& w, double x0, double x1, std::vector<double> col_heights);
    static HorizontalCurve flat(const GridWindow& w, double x0, double x1, double y);

    int first_col(const GridWindow& w) const { return w.col_of(x_start); }
    int columns() const { return static_cast<int>(heights.size()); }
    double height_at_col(int k) const { return heights[k]; }
    Point start() const { return {x_start, heights.front()}; }
    Point end() const { return {x_end, heights.back()}; }
    // Region between the curve and the x-axis over [x_start, x_end].
    GridRegion region(const GridWindow& w) const;
    void validate(const GridWindow& w) const;
};

struct Segment {
    enum class Kind { Forward, Backward, Vertical };
    Kind kind = Kind::Vertical;
    HorizontalCurve curve;      // Forward / Backward
    double x = 0.0, y0 = 0.0, y1 = 0.0;  // Vertical: (x, y0) -> (x, y1)

    static Segment forward(HorizontalCurve c);
    static Segment backward(HorizontalCurve c);
    static Segment vertical(double x, double y0, double y1);

    Point start() const;
    Point end() const;
    Segment reversed() const;
};

struct TamePath {
    std::vector<Segment> segments;

    TamePath() = default;
    explicit TamePath(std::vector<Segment> segs);
    Point start() const { return segments.front().start(); }
    Point end() const { return segments.back().end(); }
    TamePath reversed() const;
    TamePath then(const TamePath& next) const;
    // throws GeometryError on broken chaining or geometry outside the window
    void validate(const GridWindow& w) const;
};

// Increments Delta M = -f_hat(slab) of column-slab sub-pieces, column-major with
// `substeps` entries per column.
std::vector<Coords> martingale_increments(const FieldSource& f, const HorizontalCurve& c, int substeps);

// Transport at every substep boundary: nodes[0] = I, nodes.back() = //(curve).
struct TransportTrace {
    std::vector<Coords> increments;
    std::vector<Mat> nodes;
};

TransportTrace transport_trace(const FieldSource& f, const HorizontalCurve& c, int substeps);
Mat transport_horizontal(const FieldSource& f, const HorizontalCurve& c, int substeps);
Mat transport_segment(const FieldSource& f, const Segment& s, int substeps);
Mat transport_tame(const FieldSource& f, const TamePath& p, int substeps);

// Perturbation one-form: eta_y piecewise constant on grid rectangles,
// eta(x, y) = int_{-inf}^y eta_y(x, y') dy'.
struct PerturbationOneForm {
    RectField eta_y;

    bool zero() const { return eta_y.empty(); }
    Coords eta(double x, double y, int adim) const;
    // eta(x, y) - eta(x, 0)
    Coords eta_bar(double x, double y, int adim) const;
    // <f, eta_y>
    double pair(const FieldSource& f) const { return pair_with(f, eta_y); }
    double norm2() const { return eta_y.norm2(); }
    void check_support(const GridWindow& w) const;

    // eta_y = (1_{RQ} - 1_Q) xi for Q = [x0, x1] x [y0, y1] in the upper half-plane
    // and RQ its reflection across the x-axis.
    static PerturbationOneForm reflected_box(double x0, double x1, double y0, double y1, const Coords& xi);
};

// Solution of dg/dx + eta(x, 0) g = 0, g(0) = I, at abscissa x (RK4, step hx/4).
Mat g_eta(const GroupContext& ctx, const PerturbationOneForm& eta, const GridWindow& w, double x);
// g_eta at every column node x_node(0..nx).
std::vector<Mat> g_eta_nodes(const GroupContext& ctx, const PerturbationOneForm& eta, const GridWindow& w);

// k^eta along a forward curve: dk/dx + [Ad_{//_x^{-1}} eta(x, y(x))] k = 0, k(x_start) = I.
Mat k_eta(const FieldSource& f, const HorizontalCurve& c, const PerturbationOneForm& eta, int substeps);

// zeta_eta(path) in coordinates, defined so that d/ds //(path) under eta -> s eta equals -//(path) zeta.
Coords zeta_path(const FieldSource& f, const TamePath& p, const PerturbationOneForm& eta, int substeps);

// max-abs of //^{f_eta}(curve) - g(b)^{-1} //^f(curve) k^eta g(a).
double perturbed_transport_identity_residual(const FieldSource& f, const HorizontalCurve& c,
                                             const PerturbationOneForm& eta, int substeps);

}  // namespace ym2
