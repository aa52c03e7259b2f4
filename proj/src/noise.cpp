#include "ym2/noise.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <mutex>

namespace ym2 {

namespace {

constexpr double kAlignTol = 1e-9;

int aligned_index(double v, double lo, double h, int n, const char* axis) {
    double r = (v - lo) / h;
    double k = std::round(r);
    if (std::abs(r - k) > kAlignTol * std::max(1.0, std::abs(r)))
        throw GeometryError(std::string(axis) + " = " + std::to_string(v) + " is not on a grid line");
    if (k < -0.5 || k > n + 0.5)
        throw GeometryError(std::string(axis) + " = " + std::to_string(v) + " lies outside the window");
    return static_cast<int>(k);
}

double overlap(double a0, double a1, double b0, double b1) {
    return std::max(0.0, std::min(a1, b1) - std::max(a0, b0));
}

void write_u32(std::ofstream& os, std::uint32_t v) {
    unsigned char b[4];
    for (int k = 0; k < 4; ++k) b[k] = static_cast<unsigned char>((v >> (8 * k)) & 0xff);
    os.write(reinterpret_cast<const char*>(b), 4);
}

void write_u64(std::ofstream& os, std::uint64_t v) {
    unsigned char b[8];
    for (int k = 0; k < 8; ++k) b[k] = static_cast<unsigned char>((v >> (8 * k)) & 0xff);
    os.write(reinterpret_cast<const char*>(b), 8);
}

void write_f64(std::ofstream& os, double d) {
    std::uint64_t v;
    std::memcpy(&v, &d, 8);
    write_u64(os, v);
}

std::uint64_t read_u64(std::ifstream& is) {
    unsigned char b[8];
    is.read(reinterpret_cast<char*>(b), 8);
    if (!is) throw std::runtime_error("noise dump truncated");
    std::uint64_t v = 0;
    for (int k = 0; k < 8; ++k) v |= static_cast<std::uint64_t>(b[k]) << (8 * k);
    return v;
}

std::uint32_t read_u32(std::ifstream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    if (!is) throw std::runtime_error("noise dump truncated");
    std::uint32_t v = 0;
    for (int k = 0; k < 4; ++k) v |= static_cast<std::uint32_t>(b[k]) << (8 * k);
    return v;
}

double read_f64(std::ifstream& is) {
    std::uint64_t v = read_u64(is);
    double d;
    std::memcpy(&d, &v, 8);
    return d;
}

const char kMagic[4] = {'Y', 'M', '2', 'F'};

}  // namespace

int GridWindow::col_of(double x) const { return aligned_index(x, x_min, hx(), nx, "x"); }
int GridWindow::row_of(double y) const { return aligned_index(y, y_min, hy(), ny, "y"); }

bool GridWindow::x_aligned(double x) const {
    try {
        col_of(x);
        return true;
    } catch (const GeometryError&) {
        return false;
    }
}

bool GridWindow::y_aligned(double y) const {
    try {
        row_of(y);
        return true;
    } catch (const GeometryError&) {
        return false;
    }
}

void GridWindow::validate() const {
    if (!(nx > 0 && ny > 0)) throw GeometryError("window needs positive cell counts nx, ny");
    if (!(x_min < 0.0 && 0.0 < x_max)) throw GeometryError("window must satisfy x_min < 0 < x_max");
    if (!(y_min < 0.0 && 0.0 < y_max)) throw GeometryError("window must satisfy y_min < 0 < y_max");
    if (!x_aligned(0.0)) throw GeometryError("x = 0 is not a grid line of the window");
    if (!y_aligned(0.0)) throw GeometryError("y = 0 is not a grid line of the window");
}

GridWindow GridWindow::with_cells(double x_min, double x_max, double y_min, double y_max, double hx, double hy) {
    GridWindow w;
    w.x_min = x_min;
    w.x_max = x_max;
    w.y_min = y_min;
    w.y_max = y_max;
    double rx = (x_max - x_min) / hx, ry = (y_max - y_min) / hy;
    w.nx = static_cast<int>(std::lround(rx));
    w.ny = static_cast<int>(std::lround(ry));
    if (std::abs(rx - w.nx) > 1e-9 * rx) throw GeometryError("window width is not a multiple of hx");
    if (std::abs(ry - w.ny) > 1e-9 * ry) throw GeometryError("window height is not a multiple of hy");
    w.validate();
    return w;
}

bool operator==(const GridWindow& a, const GridWindow& b) {
    return a.x_min == b.x_min && a.x_max == b.x_max && a.y_min == b.y_min && a.y_max == b.y_max && a.nx == b.nx &&
           a.ny == b.ny;
}

bool GridRegion::empty() const { return cell_count() == 0; }

long GridRegion::cell_count() const {
    long c = 0;
    for (const auto& r : runs) c += std::max(0, r.j1 - r.j0);
    return c;
}

GridRegion GridRegion::rect(const GridWindow& w, double x0, double x1, double y0, double y1) {
    if (x1 < x0) std::swap(x0, x1);
    if (y1 < y0) std::swap(y0, y1);
    int i0 = w.col_of(x0), i1 = w.col_of(x1), j0 = w.row_of(y0), j1 = w.row_of(y1);
    GridRegion g;
    if (j1 > j0)
        for (int i = i0; i < i1; ++i) g.runs.push_back({i, j0, j1});
    return g;
}

GridRegion GridRegion::whole(const GridWindow& w) {
    GridRegion g;
    for (int i = 0; i < w.nx; ++i) g.runs.push_back({i, 0, w.ny});
    return g;
}

GridRegion GridRegion::united(const GridRegion& other) const {
    if (!disjoint(other)) throw GeometryError("union of overlapping regions");
    GridRegion g = *this;
    g.runs.insert(g.runs.end(), other.runs.begin(), other.runs.end());
    return g;
}

bool GridRegion::disjoint(const GridRegion& other) const {
    for (const auto& a : runs)
        for (const auto& b : other.runs)
            if (a.i == b.i && std::max(a.j0, b.j0) < std::min(a.j1, b.j1)) return false;
    return true;
}

void GridRegion::check_inside(const GridWindow& w) const {
    for (const auto& r : runs)
        if (r.i < 0 || r.i >= w.nx || r.j0 < 0 || r.j1 > w.ny) throw GeometryError("region outside window");
}

void RectField::add(double x0, double x1, double y0, double y1, const Coords& value) {
    if (x1 < x0) std::swap(x0, x1);
    if (y1 < y0) std::swap(y0, y1);
    pieces.push_back({x0, x1, y0, y1, value});
}

Coords RectField::at(double x, double y, int adim) const {
    Coords c = Coords::Zero(adim);
    for (const auto& p : pieces)
        if (x >= p.x0 && x < p.x1 && y >= p.y0 && y < p.y1) c += p.value;
    return c;
}

Coords RectField::integral(double x0, double x1, double y0, double y1, int adim) const {
    Coords c = Coords::Zero(adim);
    for (const auto& p : pieces) {
        double a = overlap(x0, x1, p.x0, p.x1) * overlap(y0, y1, p.y0, p.y1);
        if (a > 0.0) c += a * p.value;
    }
    return c;
}

Coords RectField::integral_below(double x0, double x1, double y, int adim) const {
    Coords c = Coords::Zero(adim);
    for (const auto& p : pieces) {
        double a = overlap(x0, x1, p.x0, p.x1) * std::max(0.0, std::min(y, p.y1) - p.y0);
        if (a > 0.0) c += a * p.value;
    }
    return c;
}

double RectField::norm2() const {
    double s = 0.0;
    for (const auto& p : pieces) s += p.value.squaredNorm() * (p.x1 - p.x0) * (p.y1 - p.y0);
    return s;
}

void RectField::check_aligned(const GridWindow& w) const {
    for (const auto& p : pieces) {
        w.col_of(p.x0);
        w.col_of(p.x1);
        w.row_of(p.y0);
        w.row_of(p.y1);
    }
}

NoiseField::NoiseField(const GroupContext& ctx, const GridWindow& w, std::uint64_t seed, NoiseOptions opt)
    : ctx_(&ctx), window_(w), seed_(seed) {
    w.validate();
    if (static_cast<double>(w.nx) * static_cast<double>(w.ny) > static_cast<double>(opt.max_cells))
        throw GeometryError("nx*ny = " + std::to_string(static_cast<long long>(w.nx) * w.ny) +
                            " exceeds the cell budget " + std::to_string(opt.max_cells));
}

NoiseField NoiseField::zeros(const GroupContext& ctx, const GridWindow& w) {
    NoiseField f(ctx, w, 0);
    f.zero_ = true;
    return f;
}

Coords NoiseField::cell(int i, int j) const {
    const int d = ctx_->algebra_dim();
    Coords c(d);
    if (zero_) return Coords::Zero(d);
    if (!dense_.empty()) {
        const double* p = dense_.data() + cell_index(i, j) * d;
        for (int k = 0; k < d; ++k) c(k) = p[k];
        return c;
    }
    CounterRng rng(hash_key(seed_, cell_index(i, j), 0));
    double sd = std::sqrt(window_.cell_area());
    for (int k = 0; k < d; ++k) c(k) = sd * rng.normal();
    return c;
}

void NoiseField::sub_values(int i, int j, int substeps, std::vector<Coords>& out) const {
    const int d = ctx_->algebra_dim();
    out.resize(substeps);
    if (zero_) {
        for (auto& c : out) c = Coords::Zero(d);
        return;
    }
    Coords total = cell(i, j);
    if (substeps == 1) {
        out[0] = total;
        return;
    }
    // Gaussian bridge: i.i.d. draws shifted so they sum to the cell total.
    CounterRng rng(hash_key(seed_, cell_index(i, j), 1 + static_cast<std::uint64_t>(substeps)));
    double sd = std::sqrt(window_.cell_area() / substeps);
    Coords sum = Coords::Zero(d);
    for (int s = 0; s < substeps; ++s) {
        out[s].resize(d);
        for (int k = 0; k < d; ++k) out[s](k) = sd * rng.normal();
        sum += out[s];
    }
    Coords shift = (sum - total) / static_cast<double>(substeps);
    for (int s = 0; s < substeps; ++s) out[s] -= shift;
}

std::vector<Coords> NoiseField::refine(int i, int j, int substeps) const {
    if (substeps < 1) throw std::invalid_argument("substeps must be >= 1");
    std::uint64_t key = cell_index(i, j) * 4096u + static_cast<std::uint64_t>(substeps);
    {
        std::shared_lock lock(cache_->mu);
        auto it = cache_->entries.find(key);
        if (it != cache_->entries.end()) return *it->second;
    }
    auto v = std::make_shared<std::vector<Coords>>();
    sub_values(i, j, substeps, *v);
    std::unique_lock lock(cache_->mu);
    auto [it, inserted] = cache_->entries.emplace(key, v);
    return *it->second;
}

void NoiseField::materialize() {
    if (!dense_.empty() || zero_) return;
    const int d = ctx_->algebra_dim();
    std::vector<double> v(static_cast<size_t>(window_.nx) * window_.ny * d);
    for (int j = 0; j < window_.ny; ++j)
        for (int i = 0; i < window_.nx; ++i) {
            Coords c = cell(i, j);
            for (int k = 0; k < d; ++k) v[cell_index(i, j) * d + k] = c(k);
        }
    dense_ = std::move(v);
}

void NoiseField::dump(const std::string& path) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + path);
    const int d = ctx_->algebra_dim();
    os.write(kMagic, 4);
    write_u32(os, kDumpVersion);
    write_f64(os, window_.x_min);
    write_f64(os, window_.x_max);
    write_f64(os, window_.y_min);
    write_f64(os, window_.y_max);
    write_u32(os, static_cast<std::uint32_t>(window_.nx));
    write_u32(os, static_cast<std::uint32_t>(window_.ny));
    write_u32(os, static_cast<std::uint32_t>(d));
    write_u64(os, seed_);
    for (int j = 0; j < window_.ny; ++j)
        for (int i = 0; i < window_.nx; ++i) {
            Coords c = cell(i, j);
            for (int k = 0; k < d; ++k) write_f64(os, c(k));
        }
}

NoiseField NoiseField::restore(const GroupContext& ctx, const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot read " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0) throw std::runtime_error("not a noise dump: " + path);
    std::uint32_t version = read_u32(is);
    if (version != kDumpVersion) throw std::runtime_error("unsupported noise dump version");
    GridWindow w;
    w.x_min = read_f64(is);
    w.x_max = read_f64(is);
    w.y_min = read_f64(is);
    w.y_max = read_f64(is);
    w.nx = static_cast<int>(read_u32(is));
    w.ny = static_cast<int>(read_u32(is));
    int d = static_cast<int>(read_u32(is));
    if (d != ctx.algebra_dim()) throw std::runtime_error("noise dump algebra dimension does not match group");
    std::uint64_t seed = read_u64(is);
    NoiseField f(ctx, w, seed);
    f.dense_.resize(static_cast<size_t>(w.nx) * w.ny * d);
    for (auto& x : f.dense_) x = read_f64(is);
    return f;
}

NoiseField sample_field(const GroupContext& ctx, const GridWindow& w, std::uint64_t seed, NoiseOptions opt) {
    return NoiseField(ctx, w, seed, opt);
}

Coords f_region(const FieldSource& f, const GridRegion& B) {
    const auto& w = f.window();
    B.check_inside(w);
    Coords c = Coords::Zero(f.group().algebra_dim());
    for (const auto& r : B.runs)
        for (int j = r.j0; j < r.j1; ++j) c += f.cell(r.i, j);
    return c;
}

Coords f_hat_region(const FieldSource& f, const GridRegion& B) {
    const auto& w = f.window();
    B.check_inside(w);
    const int j0 = w.zero_row();
    Coords c = Coords::Zero(f.group().algebra_dim());
    for (const auto& r : B.runs)
        for (int j = r.j0; j < r.j1; ++j) {
            if (j >= j0)
                c += f.cell(r.i, j);
            else
                c -= f.cell(r.i, j);
        }
    return c;
}

std::vector<Coords> refine_column_strip(const NoiseField& f, int i, int j, int substeps) {
    return f.refine(i, j, substeps);
}

double pair_with(const FieldSource& f, const RectField& u) {
    const auto& w = f.window();
    const int d = f.group().algebra_dim();
    double s = 0.0;
    for (const auto& p : u.pieces) {
        GridRegion B = GridRegion::rect(w, p.x0, p.x1, p.y0, p.y1);
        s += f_region(f, B).dot(p.value.head(d));
    }
    return s;
}

ShiftedFieldView::ShiftedFieldView(const FieldSource& base, const RectField& eta_y, std::vector<Mat> g_cols)
    : base_(&base), eta_y_(&eta_y), g_cols_(std::move(g_cols)) {
    if (static_cast<int>(g_cols_.size()) < base.window().nx)
        throw std::invalid_argument("shifted view needs g at every column");
    eta_y.check_aligned(base.window());
    const Mat I = base.group().identity();
    for (const auto& g : g_cols_) rotate_.push_back((g.array() != I.array()).any() ? 1 : 0);
}

Coords ShiftedFieldView::cell(int i, int j) const {
    const auto& w = window();
    const auto& ctx = group();
    Coords c = base_->cell(i, j);
    if (!eta_y_->empty())
        c -= eta_y_->integral(w.x_node(i), w.x_node(i + 1), w.y_node(j), w.y_node(j + 1), ctx.algebra_dim());
    return rotate_[i] ? adjoint_inverse_coords(ctx, g_cols_[i], c) : c;
}

void ShiftedFieldView::sub_values(int i, int j, int substeps, std::vector<Coords>& out) const {
    const auto& w = window();
    const auto& ctx = group();
    base_->sub_values(i, j, substeps, out);
    const double hs = w.hx() / substeps;
    for (int s = 0; s < substeps; ++s) {
        if (!eta_y_->empty()) {
            double xa = w.x_node(i) + s * hs;
            out[s] -= eta_y_->integral(xa, xa + hs, w.y_node(j), w.y_node(j + 1), ctx.algebra_dim());
        }
        if (rotate_[i]) out[s] = adjoint_inverse_coords(ctx, g_cols_[i], out[s]);
    }
}

MaskedFieldView::MaskedFieldView(const FieldSource& base, double x0, double x1)
    : base_(&base), i0_(base.window().col_of(x0)), i1_(base.window().col_of(x1)) {}

Coords MaskedFieldView::cell(int i, int j) const {
    if (masked(i)) return Coords::Zero(group().algebra_dim());
    return base_->cell(i, j);
}

void MaskedFieldView::sub_values(int i, int j, int substeps, std::vector<Coords>& out) const {
    base_->sub_values(i, j, substeps, out);
    if (masked(i))
        for (auto& c : out) c.setZero();
}

}  // namespace ym2
