#include "ym2/transport.hpp"

#include <algorithm>
#include <cmath>

namespace ym2 {

namespace {

constexpr int kRetractPeriod = 1024;

// exp(hA) truncated at fourth order: one classical RK4 step of k' = A k with A constant.
Mat rk4_linear_step(const Mat& A, double h) {
    Mat hA = h * A;
    Mat term = hA;
    Mat out = Mat::Identity(A.rows(), A.cols()) + term;
    for (int k = 2; k <= 4; ++k) {
        term = term * hA / static_cast<double>(k);
        out += term;
    }
    return out;
}

struct ColumnSlab {
    int j0 = 0, j1 = 0;
    double sign = 1.0;  // +1 above the axis, -1 below (f_hat)
};

ColumnSlab slab_of(const GridWindow& w, double y) {
    ColumnSlab s;
    int r = w.row_of(y), z = w.zero_row();
    if (r >= z) {
        s.j0 = z;
        s.j1 = r;
        s.sign = 1.0;
    } else {
        s.j0 = r;
        s.j1 = z;
        s.sign = -1.0;
    }
    return s;
}

double column_mid(const GridWindow& w, int i) { return w.x_node(i) + 0.5 * w.hx(); }

void check_substeps(int substeps) {
    if (substeps < 1) throw std::invalid_argument("substeps must be >= 1");
}

}  // namespace

bool same_point(const Point& a, const Point& b, double tol) {
    return std::abs(a.x - b.x) <= tol && std::abs(a.y - b.y) <= tol;
}

HorizontalCurve::HorizontalCurve(const GridWindow& w, double x0, double x1, std::vector<double> col_heights)
    : x_start(x0), x_end(x1), heights(std::move(col_heights)) {
    validate(w);
}

HorizontalCurve HorizontalCurve::flat(const GridWindow& w, double x0, double x1, double y) {
    if (!(x0 < x1)) throw GeometryError("horizontal curve needs x_start < x_end");
    int n = w.col_of(x1) - w.col_of(x0);
    return HorizontalCurve(w, x0, x1, std::vector<double>(static_cast<size_t>(n), y));
}

GridRegion HorizontalCurve::region(const GridWindow& w) const {
    GridRegion g;
    int i0 = first_col(w);
    for (int k = 0; k < columns(); ++k) {
        ColumnSlab s = slab_of(w, heights[k]);
        if (s.j1 > s.j0) g.runs.push_back({i0 + k, s.j0, s.j1});
    }
    return g;
}

void HorizontalCurve::validate(const GridWindow& w) const {
    if (!(x_start < x_end)) throw GeometryError("horizontal curve needs x_start < x_end");
    int i0 = w.col_of(x_start), i1 = w.col_of(x_end);
    if (i1 - i0 != columns())
        throw GeometryError("horizontal curve has " + std::to_string(columns()) + " heights for " +
                            std::to_string(i1 - i0) + " columns");
    if (i0 < 0 || i1 > w.nx) throw GeometryError("horizontal curve leaves the window in x");
    for (double y : heights) {
        int r = w.row_of(y);
        if (r < 0 || r > w.ny) throw GeometryError("horizontal curve leaves the window in y");
    }
}

Segment Segment::forward(HorizontalCurve c) {
    Segment s;
    s.kind = Kind::Forward;
    s.curve = std::move(c);
    return s;
}

Segment Segment::backward(HorizontalCurve c) {
    Segment s;
    s.kind = Kind::Backward;
    s.curve = std::move(c);
    return s;
}

Segment Segment::vertical(double x, double y0, double y1) {
    Segment s;
    s.kind = Kind::Vertical;
    s.x = x;
    s.y0 = y0;
    s.y1 = y1;
    return s;
}

Point Segment::start() const {
    switch (kind) {
        case Kind::Forward: return curve.start();
        case Kind::Backward: return curve.end();
        case Kind::Vertical: return {x, y0};
    }
    return {};
}

Point Segment::end() const {
    switch (kind) {
        case Kind::Forward: return curve.end();
        case Kind::Backward: return curve.start();
        case Kind::Vertical: return {x, y1};
    }
    return {};
}

Segment Segment::reversed() const {
    Segment s = *this;
    switch (kind) {
        case Kind::Forward: s.kind = Kind::Backward; break;
        case Kind::Backward: s.kind = Kind::Forward; break;
        case Kind::Vertical: std::swap(s.y0, s.y1); break;
    }
    return s;
}

TamePath::TamePath(std::vector<Segment> segs) : segments(std::move(segs)) {
    if (segments.empty()) throw GeometryError("tame path needs at least one segment");
    for (size_t k = 1; k < segments.size(); ++k)
        if (!same_point(segments[k - 1].end(), segments[k].start()))
            throw GeometryError("tame path segments " + std::to_string(k - 1) + " and " + std::to_string(k) +
                                " do not chain");
}

TamePath TamePath::reversed() const {
    std::vector<Segment> out;
    for (auto it = segments.rbegin(); it != segments.rend(); ++it) out.push_back(it->reversed());
    return TamePath(std::move(out));
}

TamePath TamePath::then(const TamePath& next) const {
    std::vector<Segment> out = segments;
    out.insert(out.end(), next.segments.begin(), next.segments.end());
    return TamePath(std::move(out));
}

void TamePath::validate(const GridWindow& w) const {
    for (size_t k = 0; k < segments.size(); ++k) {
        const auto& s = segments[k];
        if (s.kind == Segment::Kind::Vertical) {
            int c = w.col_of(s.x);
            int r0 = w.row_of(s.y0), r1 = w.row_of(s.y1);
            if (c < 0 || c > w.nx || std::min(r0, r1) < 0 || std::max(r0, r1) > w.ny)
                throw GeometryError("vertical segment leaves the window");
        } else {
            s.curve.validate(w);
        }
        if (k > 0 && !same_point(segments[k - 1].end(), s.start()))
            throw GeometryError("tame path segments do not chain");
    }
}

std::vector<Coords> martingale_increments(const FieldSource& f, const HorizontalCurve& c, int substeps) {
    check_substeps(substeps);
    const auto& w = f.window();
    c.validate(w);
    const int d = f.group().algebra_dim();
    const int i0 = c.first_col(w);
    std::vector<Coords> out(static_cast<size_t>(c.columns()) * substeps, Coords::Zero(d));
    std::vector<Coords> sub;
    for (int k = 0; k < c.columns(); ++k) {
        ColumnSlab s = slab_of(w, c.heights[k]);
        for (int j = s.j0; j < s.j1; ++j) {
            f.sub_values(i0 + k, j, substeps, sub);
            for (int q = 0; q < substeps; ++q) out[static_cast<size_t>(k) * substeps + q] -= s.sign * sub[q];
        }
    }
    return out;
}

TransportTrace transport_trace(const FieldSource& f, const HorizontalCurve& c, int substeps) {
    const auto& ctx = f.group();
    TransportTrace t;
    t.increments = martingale_increments(f, c, substeps);
    t.nodes.reserve(t.increments.size() + 1);
    Mat cur = ctx.identity();
    t.nodes.push_back(cur);
    int count = 0;
    for (const auto& dm : t.increments) {
        cur = exp_map(ctx, ctx.algebra(-dm)) * cur;
        if (++count % kRetractPeriod == 0) cur = retract(ctx, cur);
        t.nodes.push_back(cur);
    }
    return t;
}

Mat transport_horizontal(const FieldSource& f, const HorizontalCurve& c, int substeps) {
    check_substeps(substeps);
    const auto& ctx = f.group();
    const auto& w = f.window();
    c.validate(w);
    const int i0 = c.first_col(w);
    GroupAccumulator acc(ctx, kRetractPeriod);
    thread_local std::vector<Coords> sub, inc;
    for (int k = 0; k < c.columns(); ++k) {
        ColumnSlab s = slab_of(w, c.heights[k]);
        if (s.j0 == s.j1) continue;
        inc.assign(static_cast<size_t>(substeps), ctx.zero_coords());
        for (int j = s.j0; j < s.j1; ++j) {
            f.sub_values(i0 + k, j, substeps, sub);
            for (int q = 0; q < substeps; ++q) inc[q] -= s.sign * sub[q];
        }
        for (int q = 0; q < substeps; ++q) acc.left_multiply(exp_map(ctx, ctx.algebra(-inc[q])));
    }
    return acc.value();
}

Mat transport_segment(const FieldSource& f, const Segment& s, int substeps) {
    switch (s.kind) {
        case Segment::Kind::Forward: return transport_horizontal(f, s.curve, substeps);
        case Segment::Kind::Backward: return transport_horizontal(f, s.curve, substeps).adjoint();
        case Segment::Kind::Vertical: return f.group().identity();
    }
    return f.group().identity();
}

Mat transport_tame(const FieldSource& f, const TamePath& p, int substeps) {
    p.validate(f.window());
    Mat h = f.group().identity();
    for (const auto& s : p.segments) {
        if (s.kind == Segment::Kind::Vertical) continue;
        h = transport_segment(f, s, substeps) * h;
    }
    return h;
}

Coords PerturbationOneForm::eta(double x, double y, int adim) const {
    Coords c = Coords::Zero(adim);
    for (const auto& p : eta_y.pieces) {
        if (!(x >= p.x0 && x < p.x1)) continue;
        double len = std::clamp(y - p.y0, 0.0, p.y1 - p.y0);
        if (len > 0.0) c += len * p.value;
    }
    return c;
}

Coords PerturbationOneForm::eta_bar(double x, double y, int adim) const { return eta(x, y, adim) - eta(x, 0.0, adim); }

void PerturbationOneForm::check_support(const GridWindow& w) const {
    for (const auto& p : eta_y.pieces) {
        if (p.x0 < w.x_min || p.x1 > w.x_max || p.y0 < w.y_min || p.y1 > w.y_max)
            throw GeometryError("perturbation support leaves the window");
    }
    eta_y.check_aligned(w);
}

PerturbationOneForm PerturbationOneForm::reflected_box(double x0, double x1, double y0, double y1, const Coords& xi) {
    if (!(x0 < x1 && 0.0 <= y0 && y0 < y1)) throw GeometryError("reflected box must lie in the upper half-plane");
    PerturbationOneForm e;
    e.eta_y.add(x0, x1, -y1, -y0, xi);
    e.eta_y.add(x0, x1, y0, y1, -xi);
    return e;
}

Mat g_eta(const GroupContext& ctx, const PerturbationOneForm& eta, const GridWindow& w, double x) {
    Mat g = ctx.identity();
    if (eta.zero() || x == 0.0) return g;
    const double dir = x > 0.0 ? 1.0 : -1.0;
    const double h = w.hx() / 4.0;
    double pos = 0.0;
    const int d = ctx.algebra_dim();
    while (dir * (x - pos) > 1e-14) {
        double step = std::min(h, dir * (x - pos));
        double mid = pos + dir * 0.5 * step;
        Coords e = eta.eta(mid, 0.0, d);
        if (e.squaredNorm() > 0.0) g = rk4_linear_step(-ctx.algebra(e), dir * step) * g;
        pos += dir * step;
    }
    return retract(ctx, g);
}

std::vector<Mat> g_eta_nodes(const GroupContext& ctx, const PerturbationOneForm& eta, const GridWindow& w) {
    std::vector<Mat> out(static_cast<size_t>(w.nx) + 1, ctx.identity());
    if (eta.zero()) return out;
    const int z = w.zero_col();
    const int d = ctx.algebra_dim();
    const double h = w.hx() / 4.0;
    for (int dir : {1, -1}) {
        Mat g = ctx.identity();
        for (int i = z; dir > 0 ? i < w.nx : i > 0; i += dir) {
            int col = dir > 0 ? i : i - 1;
            Coords e = eta.eta(column_mid(w, col), 0.0, d);
            if (e.squaredNorm() > 0.0) {
                Mat step = rk4_linear_step(-ctx.algebra(e), dir * h);
                for (int q = 0; q < 4; ++q) g = step * g;
                g = retract(ctx, g);
            }
            out[static_cast<size_t>(i + dir)] = g;
        }
    }
    return out;
}

Mat k_eta(const FieldSource& f, const HorizontalCurve& c, const PerturbationOneForm& eta, int substeps) {
    const auto& ctx = f.group();
    const auto& w = f.window();
    Mat k = ctx.identity();
    if (eta.zero()) return k;
    TransportTrace tr = transport_trace(f, c, substeps);
    const int d = ctx.algebra_dim();
    const int i0 = c.first_col(w);
    const int m = std::max(1, (4 + substeps - 1) / substeps);
    const double dx = w.hx() / substeps / m;
    // //_x inside a substep is exp(-theta dM) //_j, the exact holonomy for a linear M
    auto transport_at = [&](size_t j, double theta) -> Mat {
        return exp_map(ctx, ctx.algebra(-theta * tr.increments[j])) * tr.nodes[j];
    };
    for (int col = 0; col < c.columns(); ++col) {
        Coords e = eta.eta(column_mid(w, i0 + col), c.heights[col], d);
        if (e.squaredNorm() == 0.0) continue;
        const Mat E = ctx.algebra(e);
        for (int q = 0; q < substeps; ++q) {
            size_t j = static_cast<size_t>(col) * substeps + q;
            auto A = [&](double theta) {
                Mat p = transport_at(j, theta);
                return Mat(-(p.adjoint() * E * p));
            };
            for (int r = 0; r < m; ++r) {
                double t0 = static_cast<double>(r) / m, th = (r + 0.5) / m, t1 = (r + 1.0) / m;
                Mat A0 = A(t0), Ah = A(th), A1 = A(t1);
                Mat k1 = A0 * k;
                Mat k2 = Ah * (k + 0.5 * dx * k1);
                Mat k3 = Ah * (k + 0.5 * dx * k2);
                Mat k4 = A1 * (k + dx * k3);
                k += dx / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            }
        }
    }
    return retract(ctx, k);
}

namespace {

// int Ad_{//_x^{-1}} eta(x, y(x)) dx along a forward curve (Simpson per substep).
Mat zeta_curve(const FieldSource& f, const HorizontalCurve& c, const PerturbationOneForm& eta, int substeps) {
    const auto& ctx = f.group();
    const auto& w = f.window();
    const int d = ctx.algebra_dim();
    const int i0 = c.first_col(w);
    Mat z = ctx.zero();
    bool any = false;
    for (int col = 0; col < c.columns(); ++col)
        if (eta.eta(column_mid(w, i0 + col), c.heights[col], d).squaredNorm() > 0.0) any = true;
    if (!any) return z;
    TransportTrace tr = transport_trace(f, c, substeps);
    const double dx = w.hx() / substeps;
    for (int col = 0; col < c.columns(); ++col) {
        Coords e = eta.eta(column_mid(w, i0 + col), c.heights[col], d);
        if (e.squaredNorm() == 0.0) continue;
        const Mat E = ctx.algebra(e);
        for (int q = 0; q < substeps; ++q) {
            size_t j = static_cast<size_t>(col) * substeps + q;
            Mat pm = exp_map(ctx, ctx.algebra(-0.5 * tr.increments[j])) * tr.nodes[j];
            const Mat& p0 = tr.nodes[j];
            const Mat& p1 = tr.nodes[j + 1];
            z += dx / 6.0 * (adjoint_inverse(p0, E) + 4.0 * adjoint_inverse(pm, E) + adjoint_inverse(p1, E));
        }
    }
    return z;
}

}  // namespace

Coords zeta_path(const FieldSource& f, const TamePath& p, const PerturbationOneForm& eta, int substeps) {
    const auto& ctx = f.group();
    std::vector<Mat> zk(p.segments.size(), ctx.zero());
    bool any = false;
    for (size_t k = 0; k < p.segments.size(); ++k) {
        const auto& s = p.segments[k];
        if (s.kind == Segment::Kind::Vertical) continue;
        zk[k] = zeta_curve(f, s.curve, eta, substeps);
        if (max_abs(zk[k]) > 0.0) any = true;
    }
    if (!any) return ctx.zero_coords();
    Mat pre = ctx.identity();
    Mat Z = ctx.zero();
    for (size_t k = 0; k < p.segments.size(); ++k) {
        const auto& s = p.segments[k];
        if (s.kind == Segment::Kind::Vertical) continue;
        Mat pk = transport_segment(f, s, substeps);
        if (s.kind == Segment::Kind::Forward)
            Z += adjoint_inverse(pre, zk[k]);
        else
            Z -= adjoint_inverse(pk * pre, zk[k]);
        pre = pk * pre;
    }
    return ctx.coords(Z);
}

double perturbed_transport_identity_residual(const FieldSource& f, const HorizontalCurve& c,
                                             const PerturbationOneForm& eta, int substeps) {
    const auto& ctx = f.group();
    const auto& w = f.window();
    eta.check_support(w);
    std::vector<Mat> g = g_eta_nodes(ctx, eta, w);
    ShiftedFieldView shifted(f, eta.eta_y, std::vector<Mat>(g.begin(), g.end() - 1));
    Mat lhs = transport_horizontal(shifted, c, substeps);
    Mat ga = g[static_cast<size_t>(w.col_of(c.x_start))];
    Mat gb = g[static_cast<size_t>(w.col_of(c.x_end))];
    Mat rhs = gb.adjoint() * transport_horizontal(f, c, substeps) * k_eta(f, c, eta, substeps) * ga;
    return max_abs(lhs - rhs);
}

}  // namespace ym2
