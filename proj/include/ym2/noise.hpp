#pragma once

#include <cstdint>
#include <memory>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "ym2/lie.hpp"

namespace ym2 {

class GeometryError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct GridWindow {
    double x_min = -1.0, x_max = 1.0, y_min = -1.0, y_max = 1.0;
    int nx = 20, ny = 20;

    double hx() const { return (x_max - x_min) / nx; }
    double hy() const { return (y_max - y_min) / ny; }
    double cell_area() const { return hx() * hy(); }
    double x_node(int i) const { return x_min + i * hx(); }
    double y_node(int j) const { return y_min + j * hy(); }
    // node index of a grid-aligned abscissa / ordinate; throws if misaligned or outside
    int col_of(double x) const;
    int row_of(double y) const;
    bool x_aligned(double x) const;
    bool y_aligned(double y) const;
    int zero_col() const { return col_of(0.0); }
    int zero_row() const { return row_of(0.0); }
    void validate() const;

    // Window with cell sizes (hx, hy) covering [x_min, x_max] x [y_min, y_max].
    static GridWindow with_cells(double x_min, double x_max, double y_min, double y_max, double hx, double hy);
};

bool operator==(const GridWindow& a, const GridWindow& b);

// Cells j in [j0, j1) of column i.
struct ColumnRun {
    int i = 0, j0 = 0, j1 = 0;
};

struct GridRegion {
    std::vector<ColumnRun> runs;

    bool empty() const;
    long cell_count() const;
    double area(const GridWindow& w) const { return static_cast<double>(cell_count()) * w.cell_area(); }

    static GridRegion rect(const GridWindow& w, double x0, double x1, double y0, double y1);
    static GridRegion whole(const GridWindow& w);
    GridRegion united(const GridRegion& other) const;
    bool disjoint(const GridRegion& other) const;
    void check_inside(const GridWindow& w) const;
};

// k-valued function constant on finitely many axis-aligned rectangles (sum of
// the rectangle values where they overlap).
struct RectField {
    struct Piece {
        double x0, x1, y0, y1;
        Coords value;
    };
    std::vector<Piece> pieces;

    bool empty() const { return pieces.empty(); }
    void add(double x0, double x1, double y0, double y1, const Coords& value);
    Coords at(double x, double y, int adim) const;
    // integral over [x0, x1] x [y0, y1]
    Coords integral(double x0, double x1, double y0, double y1, int adim) const;
    // integral over [x0, x1] x (-inf, y]
    Coords integral_below(double x0, double x1, double y, int adim) const;
    // L2 norm squared; pieces must be disjoint
    double norm2() const;
    void check_aligned(const GridWindow& w) const;
};

// Anything that can answer per-cell white-noise values.
class FieldSource {
public:
    virtual ~FieldSource() = default;
    virtual const GroupContext& group() const = 0;
    virtual const GridWindow& window() const = 0;
    virtual Coords cell(int i, int j) const = 0;
    // `substeps` sub-values of cell (i, j) splitting it in x; they sum to cell(i, j).
    virtual void sub_values(int i, int j, int substeps, std::vector<Coords>& out) const = 0;
};

struct NoiseOptions {
    long max_cells = 100000000;
};

class NoiseField : public FieldSource {
public:
    static constexpr std::uint32_t kDumpVersion = 1;

    NoiseField(const GroupContext& ctx, const GridWindow& w, std::uint64_t seed, NoiseOptions opt = {});

    static NoiseField zeros(const GroupContext& ctx, const GridWindow& w);
    static NoiseField restore(const GroupContext& ctx, const std::string& path);

    const GroupContext& group() const override { return *ctx_; }
    const GridWindow& window() const override { return window_; }
    std::uint64_t seed() const { return seed_; }
    Coords cell(int i, int j) const override;
    void sub_values(int i, int j, int substeps, std::vector<Coords>& out) const override;

    // Cached refinement: repeated calls return the same values.
    std::vector<Coords> refine(int i, int j, int substeps) const;

    void materialize();
    void dump(const std::string& path) const;

private:
    const GroupContext* ctx_;
    GridWindow window_;
    std::uint64_t seed_;
    std::vector<double> dense_;  // empty: values generated on demand from the seed
    bool zero_ = false;
    struct Cache {
        std::shared_mutex mu;
        std::unordered_map<std::uint64_t, std::shared_ptr<const std::vector<Coords>>> entries;
    };
    std::shared_ptr<Cache> cache_ = std::make_shared<Cache>();

    std::uint64_t cell_index(int i, int j) const {
        return static_cast<std::uint64_t>(j) * static_cast<std::uint64_t>(window_.nx) + static_cast<std::uint64_t>(i);
    }
};

NoiseField sample_field(const GroupContext& ctx, const GridWindow& w, std::uint64_t seed, NoiseOptions opt = {});

Coords f_region(const FieldSource& f, const GridRegion& B);
// f(B n H+) - f(B n H-)
Coords f_hat_region(const FieldSource& f, const GridRegion& B);
std::vector<Coords> refine_column_strip(const NoiseField& f, int i, int j, int substeps);

// <f, u> for a piecewise-constant u aligned with the grid.
double pair_with(const FieldSource& f, const RectField& u);

// f_eta(c) = Ad_{g(x_c)^{-1}} (f(c) - int_c eta_y), x_c the left edge of the cell.
// `g_cols[i]` is g at the left edge of column i.
class ShiftedFieldView : public FieldSource {
public:
    ShiftedFieldView(const FieldSource& base, const RectField& eta_y, std::vector<Mat> g_cols);
    const GroupContext& group() const override { return base_->group(); }
    const GridWindow& window() const override { return base_->window(); }
    Coords cell(int i, int j) const override;
    void sub_values(int i, int j, int substeps, std::vector<Coords>& out) const override;

private:
    const FieldSource* base_;
    const RectField* eta_y_;
    std::vector<Mat> g_cols_;
    std::vector<char> rotate_;  // 0 where g is exactly the identity
};

// Base field with every cell whose column lies in [x0, x1) set to zero.
class MaskedFieldView : public FieldSource {
public:
    MaskedFieldView(const FieldSource& base, double x0, double x1);
    const GroupContext& group() const override { return base_->group(); }
    const GridWindow& window() const override { return base_->window(); }
    Coords cell(int i, int j) const override;
    void sub_values(int i, int j, int substeps, std::vector<Coords>& out) const override;

private:
    bool masked(int i) const { return i >= i0_ && i < i1_; }
    const FieldSource* base_;
    int i0_, i1_;
};

}  // namespace ym2
