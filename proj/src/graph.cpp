#include "ym2/graph.hpp"

#include <cmath>
#include <set>
#include <tuple>

#include "json.hpp"

namespace ym2 {

namespace {

using json = nlohmann::json;

// Unit grid edge: kind 0 = horizontal (i, j)-(i+1, j), 1 = vertical (i, j)-(i, j+1).
using UnitEdge = std::tuple<int, int, int>;
using Node = std::pair<int, int>;

struct Raster {
    std::set<UnitEdge> edges;
    std::set<Node> nodes;
};

void add_vertical(Raster& r, int i, int ja, int jb) {
    if (ja > jb) std::swap(ja, jb);
    for (int j = ja; j < jb; ++j) r.edges.insert({1, i, j});
    for (int j = ja; j <= jb; ++j) r.nodes.insert({i, j});
}

Raster rasterize(const TamePath& p, const GridWindow& w) {
    Raster r;
    for (const auto& s : p.segments) {
        if (s.kind == Segment::Kind::Vertical) {
            add_vertical(r, w.col_of(s.x), w.row_of(s.y0), w.row_of(s.y1));
            continue;
        }
        const auto& c = s.curve;
        int i0 = c.first_col(w);
        for (int k = 0; k < c.columns(); ++k) {
            int j = w.row_of(c.heights[k]);
            r.edges.insert({0, i0 + k, j});
            r.nodes.insert({i0 + k, j});
            r.nodes.insert({i0 + k + 1, j});
            if (k + 1 < c.columns()) add_vertical(r, i0 + k + 1, j, w.row_of(c.heights[k + 1]));
        }
    }
    return r;
}

Mat letter_matrix(const HolonomyAssignment& omega, const Letter& l) {
    return l.power > 0 ? omega[l.edge] : Mat(omega[l.edge].adjoint());
}

// Trace of the word with positions p1 and p2 (when >= 0) replaced.
cd word_trace(const TraceWord& w, const HolonomyAssignment& omega, int p1, const Mat& M1, int p2 = -1,
              const Mat& M2 = Mat()) {
    Mat prod;
    for (size_t k = 0; k < w.letters.size(); ++k) {
        const int pk = static_cast<int>(k);
        Mat m = pk == p1 ? M1 : (pk == p2 ? M2 : letter_matrix(omega, w.letters[k]));
        prod = k == 0 ? m : Mat(prod * m);
    }
    return prod.trace();
}

// first-order insertion at one letter: left (omega -> omega X) or right (omega -> X omega)
Mat insert_first(const Mat& om, int power, const Mat& X, bool right) {
    if (power > 0) return right ? Mat(X * om) : Mat(om * X);
    Mat inv = om.adjoint();
    return right ? Mat(-(inv * X)) : Mat(-(X * inv));
}

json path_to_json(const TamePath& p) {
    json segs = json::array();
    for (const auto& s : p.segments) {
        json j;
        if (s.kind == Segment::Kind::Vertical) {
            j["kind"] = "vertical";
            j["x"] = s.x;
            j["y0"] = s.y0;
            j["y1"] = s.y1;
        } else {
            j["kind"] = s.kind == Segment::Kind::Forward ? "forward" : "backward";
            j["x_start"] = s.curve.x_start;
            j["x_end"] = s.curve.x_end;
            j["heights"] = s.curve.heights;
        }
        segs.push_back(j);
    }
    return segs;
}

TamePath path_from_json(const json& segs) {
    std::vector<Segment> out;
    for (const auto& j : segs) {
        std::string kind = j.at("kind").get<std::string>();
        if (kind == "vertical") {
            out.push_back(Segment::vertical(j.at("x").get<double>(), j.at("y0").get<double>(), j.at("y1").get<double>()));
            continue;
        }
        HorizontalCurve c;
        c.x_start = j.at("x_start").get<double>();
        c.x_end = j.at("x_end").get<double>();
        c.heights = j.at("heights").get<std::vector<double>>();
        if (c.heights.empty()) throw GeometryError("horizontal segment without heights");
        if (kind == "forward")
            out.push_back(Segment::forward(std::move(c)));
        else if (kind == "backward")
            out.push_back(Segment::backward(std::move(c)));
        else
            throw std::invalid_argument("unknown segment kind '" + kind + "'");
    }
    return TamePath(std::move(out));
}

json area_to_json(double a) { return std::isinf(a) ? json(nullptr) : json(a); }
double area_from_json(const json& j) { return j.is_null() ? kInfiniteArea : j.get<double>(); }

}  // namespace

TameGraph::TameGraph(std::vector<NamedEdge> edges, std::optional<Crossing> crossing)
    : edges_(std::move(edges)), crossing_(std::move(crossing)) {
    for (size_t k = 0; k < edges_.size(); ++k) {
        for (size_t m = 0; m < k; ++m)
            if (edges_[m].name == edges_[k].name) throw std::invalid_argument("duplicate edge name " + edges_[k].name);
        for (const Point& p : {edges_[k].path.start(), edges_[k].path.end()}) {
            int v = vertex_index(p);
            if (v < 0) vertices_.push_back(p);
        }
        start_.push_back(vertex_index(edges_[k].path.start()));
        end_.push_back(vertex_index(edges_[k].path.end()));
    }
    if (crossing_) {
        for (const auto* n : {&crossing_->e1, &crossing_->e2, &crossing_->e3, &crossing_->e4}) {
            int e = edge_index(*n);
            if (e < 0) throw std::invalid_argument("crossing names unknown edge " + *n);
            if (!same_point(edges_[e].path.start(), crossing_->vertex))
                throw GeometryError("crossing edge " + *n + " does not leave the crossing vertex");
        }
    }
}

int TameGraph::edge_index(const std::string& name) const {
    for (size_t k = 0; k < edges_.size(); ++k)
        if (edges_[k].name == name) return static_cast<int>(k);
    return -1;
}

int TameGraph::vertex_index(const Point& p) const {
    for (size_t k = 0; k < vertices_.size(); ++k)
        if (same_point(vertices_[k], p)) return static_cast<int>(k);
    return -1;
}

void TameGraph::validate(const GridWindow& w) const {
    std::vector<Raster> r;
    for (const auto& e : edges_) {
        e.path.validate(w);
        r.push_back(rasterize(e.path, w));
    }
    auto node_of = [&](const Point& p) { return Node{w.col_of(p.x), w.row_of(p.y)}; };
    for (size_t a = 0; a < edges_.size(); ++a)
        for (size_t b = a + 1; b < edges_.size(); ++b) {
            for (const auto& u : r[a].edges)
                if (r[b].edges.count(u))
                    throw GeometryError("edges " + edges_[a].name + " and " + edges_[b].name + " share a grid segment");
            std::set<Node> ends_a = {node_of(edges_[a].path.start()), node_of(edges_[a].path.end())};
            std::set<Node> ends_b = {node_of(edges_[b].path.start()), node_of(edges_[b].path.end())};
            for (const auto& n : r[a].nodes)
                if (r[b].nodes.count(n) && !(ends_a.count(n) && ends_b.count(n)))
                    throw GeometryError("edges " + edges_[a].name + " and " + edges_[b].name +
                                        " meet away from their endpoints");
        }
}

TameGraph TameGraph::with_edge(const std::string& name, TamePath path) const {
    int e = edge_index(name);
    if (e < 0) throw std::invalid_argument("no edge named " + name);
    auto edges = edges_;
    edges[e].path = std::move(path);
    return TameGraph(std::move(edges), crossing_);
}

std::string TameGraph::to_json() const {
    json j;
    j["edges"] = json::array();
    for (const auto& e : edges_) j["edges"].push_back({{"name", e.name}, {"segments", path_to_json(e.path)}});
    if (crossing_) {
        const auto& c = *crossing_;
        j["crossing"] = {{"vertex", {c.vertex.x, c.vertex.y}},
                         {"edges", {c.e1, c.e2, c.e3, c.e4}},
                         {"faces", {area_to_json(c.t1), area_to_json(c.t2), area_to_json(c.t3), area_to_json(c.t4)}}};
    }
    return j.dump(2);
}

TameGraph TameGraph::from_json(const std::string& text) {
    json j = json::parse(text);
    std::vector<NamedEdge> edges;
    for (const auto& e : j.at("edges")) edges.push_back({e.at("name").get<std::string>(), path_from_json(e.at("segments"))});
    std::optional<Crossing> crossing;
    if (j.contains("crossing")) {
        const auto& c = j.at("crossing");
        Crossing x;
        x.vertex = {c.at("vertex").at(0).get<double>(), c.at("vertex").at(1).get<double>()};
        const auto& en = c.at("edges");
        x.e1 = en.at(0).get<std::string>();
        x.e2 = en.at(1).get<std::string>();
        x.e3 = en.at(2).get<std::string>();
        x.e4 = en.at(3).get<std::string>();
        const auto& fa = c.at("faces");
        x.t1 = area_from_json(fa.at(0));
        x.t2 = area_from_json(fa.at(1));
        x.t3 = area_from_json(fa.at(2));
        x.t4 = area_from_json(fa.at(3));
        crossing = x;
    }
    return TameGraph(std::move(edges), crossing);
}

HolonomyAssignment holonomies(const FieldSource& f, const TameGraph& g, int substeps) {
    HolonomyAssignment out;
    out.reserve(g.edges().size());
    for (const auto& e : g.edges()) out.push_back(transport_tame(f, e.path, substeps));
    return out;
}

HolonomyAssignment apply_gauge(const TameGraph& g, const HolonomyAssignment& omega, const DiscreteGauge& u) {
    if (u.size() != g.vertices().size()) throw std::invalid_argument("gauge must be defined on every vertex");
    HolonomyAssignment out(omega.size());
    for (size_t k = 0; k < omega.size(); ++k)
        out[k] = u[g.end_vertex(static_cast<int>(k))].adjoint() * omega[k] * u[g.start_vertex(static_cast<int>(k))];
    return out;
}

TraceWord WilsonFunctional::word(const TameGraph& g, const std::vector<std::string>& letters, cd coeff) {
    TraceWord w;
    w.coeff = coeff;
    for (const auto& s : letters) {
        Letter l;
        std::string name = s;
        const std::string inv = "^-1";
        if (name.size() > inv.size() && name.compare(name.size() - inv.size(), inv.size(), inv) == 0) {
            l.power = -1;
            name.resize(name.size() - inv.size());
        }
        l.edge = g.edge_index(name);
        if (l.edge < 0) throw std::invalid_argument("word uses unknown edge " + name);
        w.letters.push_back(l);
    }
    return w;
}

WilsonFunctional WilsonFunctional::constant(cd c) {
    TraceWord w;
    w.coeff = c;
    return WilsonFunctional({w});
}

bool WilsonFunctional::uses(int edge) const {
    for (const auto& w : words_)
        for (const auto& l : w.letters)
            if (l.edge == edge) return true;
    return false;
}

cd WilsonFunctional::evaluate(const HolonomyAssignment& omega) const {
    cd total = 0.0;
    for (const auto& w : words_) {
        if (w.letters.empty()) {
            total += w.coeff * static_cast<double>(omega.empty() ? 1 : omega.front().rows());
            continue;
        }
        total += w.coeff * word_trace(w, omega, -1, Mat());
    }
    return total;
}

cd WilsonFunctional::grad_edge(const HolonomyAssignment& omega, int sigma, const Mat& X) const {
    cd total = 0.0;
    for (const auto& w : words_)
        for (size_t p = 0; p < w.letters.size(); ++p) {
            const auto& l = w.letters[p];
            if (l.edge != sigma) continue;
            total += w.coeff * word_trace(w, omega, static_cast<int>(p), insert_first(omega[l.edge], l.power, X, false));
        }
    return total;
}

cd WilsonFunctional::grad_right(const HolonomyAssignment& omega, int sigma, const Mat& X) const {
    cd total = 0.0;
    for (const auto& w : words_)
        for (size_t p = 0; p < w.letters.size(); ++p) {
            const auto& l = w.letters[p];
            if (l.edge != sigma) continue;
            total += w.coeff * word_trace(w, omega, static_cast<int>(p), insert_first(omega[l.edge], l.power, X, true));
        }
    return total;
}

cd WilsonFunctional::grad2(const HolonomyAssignment& omega, int s1, const Mat& X1, int s2, const Mat& X2) const {
    cd total = 0.0;
    for (const auto& w : words_) {
        const int L = static_cast<int>(w.letters.size());
        for (int p = 0; p < L; ++p) {
            const auto& lp = w.letters[p];
            if (lp.edge != s1) continue;
            for (int q = 0; q < L; ++q) {
                const auto& lq = w.letters[q];
                if (lq.edge != s2) continue;
                if (p == q) {
                    // omega e^{s X1} e^{t X2}, or its inverse e^{-t X2} e^{-s X1} omega^{-1}
                    const Mat& om = omega[lp.edge];
                    Mat m = lp.power > 0 ? Mat(om * X1 * X2) : Mat(X2 * X1 * om.adjoint());
                    total += w.coeff * word_trace(w, omega, p, m);
                } else {
                    total += w.coeff * word_trace(w, omega, p, insert_first(omega[lp.edge], lp.power, X1, false), q,
                                                  insert_first(omega[lq.edge], lq.power, X2, false));
                }
            }
        }
    }
    return total;
}

cd WilsonFunctional::grad_dot(const GroupContext& ctx, const HolonomyAssignment& omega, int s1, int s2) const {
    cd total = 0.0;
    for (const auto& xi : ctx.basis) total += grad2(omega, s1, xi, s2, xi);
    return total;
}

bool check_extended_gauge_invariance(const GroupContext& ctx, const TameGraph& g, const WilsonFunctional& U,
                                     int probes, std::uint64_t seed, double tol) {
    if (!g.crossing()) throw std::invalid_argument("extended gauge invariance needs a crossing descriptor");
    const auto& c = *g.crossing();
    const int e1 = g.edge_index(c.e1), e2 = g.edge_index(c.e2), e3 = g.edge_index(c.e3), e4 = g.edge_index(c.e4);
    CounterRng rng(hash_key(seed, 0xe6a7));
    for (int k = 0; k < probes; ++k) {
        HolonomyAssignment omega;
        for (size_t e = 0; e < g.edges().size(); ++e) omega.push_back(exp_map(ctx, sample_algebra_gaussian(ctx, 1.0, rng)));
        Mat x = exp_map(ctx, sample_algebra_gaussian(ctx, 1.0, rng));
        Mat y = exp_map(ctx, sample_algebra_gaussian(ctx, 1.0, rng));
        HolonomyAssignment moved = omega;
        moved[e1] = omega[e1] * x;
        moved[e3] = omega[e3] * x;
        moved[e2] = omega[e2] * y;
        moved[e4] = omega[e4] * y;
        cd u0 = U.evaluate(omega), u1 = U.evaluate(moved);
        if (std::abs(u1 - u0) > tol * std::max(1.0, std::abs(u0))) return false;
    }
    return true;
}

FigureEight build_figure_eight(double t1, double t3, const GridWindow& w, double w1, double w3) {
    if (!(t1 > 0.0 && t3 > 0.0)) throw GeometryError("figure-eight lobe areas must be positive");
    FigureEight fe;
    fe.t1 = t1;
    fe.t3 = t3;
    fe.w1 = w1;
    fe.w3 = w3;
    fe.h2 = t1 / w1;
    fe.h4 = t3 / w3;
    if (!w.y_aligned(fe.h2)) throw GeometryError("lobe height t1/w1 = " + std::to_string(fe.h2) + " is not on the grid");
    if (!w.y_aligned(-fe.h4)) throw GeometryError("lobe height t3/w3 = " + std::to_string(fe.h4) + " is not on the grid");
    if (!w.x_aligned(w1) || !w.x_aligned(-w3)) throw GeometryError("lobe widths are not on the grid");

    std::vector<NamedEdge> edges;
    edges.push_back({"e1", TamePath({Segment::forward(HorizontalCurve::flat(w, 0.0, w1, 0.0))})});
    edges.push_back({"e2", TamePath({Segment::vertical(0.0, 0.0, fe.h2)})});
    edges.push_back({"e3", TamePath({Segment::backward(HorizontalCurve::flat(w, -w3, 0.0, 0.0))})});
    edges.push_back({"e4", TamePath({Segment::vertical(0.0, 0.0, -fe.h4)})});
    edges.push_back({"a", TamePath({Segment::vertical(w1, 0.0, fe.h2),
                                    Segment::backward(HorizontalCurve::flat(w, 0.0, w1, fe.h2))})});
    edges.push_back({"b", TamePath({Segment::backward(HorizontalCurve::flat(w, -w3, 0.0, -fe.h4)),
                                    Segment::vertical(-w3, -fe.h4, 0.0)})});
    Crossing c;
    c.vertex = {0.0, 0.0};
    c.e1 = "e1";
    c.e2 = "e2";
    c.e3 = "e3";
    c.e4 = "e4";
    c.t1 = t1;
    c.t3 = t3;
    fe.graph = TameGraph(std::move(edges), c);
    fe.graph.validate(w);
    fe.e1 = fe.graph.edge_index("e1");
    fe.e2 = fe.graph.edge_index("e2");
    fe.e3 = fe.graph.edge_index("e3");
    fe.e4 = fe.graph.edge_index("e4");
    fe.a = fe.graph.edge_index("a");
    fe.b = fe.graph.edge_index("b");
    fe.U = WilsonFunctional({WilsonFunctional::word(fe.graph, {"b", "e4", "e2^-1", "a", "e1", "e3^-1"})});
    return fe;
}

TamePath deformed_e2(const FigureEight& fe, const GridWindow& w, double eps) {
    if (!(eps > 0.0 && eps < fe.w1)) throw GeometryError("deformation width must lie in (0, w1)");
    return TamePath({Segment::forward(HorizontalCurve::flat(w, 0.0, eps, 0.0)), Segment::vertical(eps, 0.0, fe.h2),
                     Segment::backward(HorizontalCurve::flat(w, 0.0, eps, fe.h2))});
}

TamePath deformed_e4(const FigureEight& fe, const GridWindow& w, double eps) {
    if (!(eps > 0.0 && eps < fe.w1)) throw GeometryError("deformation width must lie in (0, w1)");
    return TamePath({Segment::forward(HorizontalCurve::flat(w, 0.0, eps, 0.0)), Segment::vertical(eps, 0.0, -fe.h4),
                     Segment::backward(HorizontalCurve::flat(w, 0.0, eps, -fe.h4))});
}

}  // namespace ym2
