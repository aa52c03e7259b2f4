#include <cmath>
#include <cstdio>
#include <filesystem>

#include "doctest.h"
#include "ym2/noise.hpp"

using namespace ym2;

namespace {

GridWindow unit_window() { return GridWindow::with_cells(-1.0, 1.0, -1.0, 1.0, 0.1, 0.1); }

}  // namespace

TEST_CASE("window validation") {
    auto w = unit_window();
    CHECK(w.nx == 20);
    CHECK(w.zero_col() == 10);
    CHECK(w.zero_row() == 10);
    CHECK_THROWS_AS(GridWindow::with_cells(0.0, 1.0, -1.0, 1.0, 0.1, 0.1), GeometryError);
    CHECK_THROWS_AS(GridWindow::with_cells(-1.05, 1.0, -1.0, 1.0, 0.1, 0.1), GeometryError);
    CHECK_THROWS_AS(w.col_of(0.05), GeometryError);
    CHECK_THROWS_AS(w.col_of(1.2), GeometryError);
    CHECK(w.col_of(0.3) == 13);
}

TEST_CASE("regions") {
    auto w = unit_window();
    auto B = GridRegion::rect(w, 0.0, 0.5, 0.0, 0.5);
    CHECK(B.cell_count() == 25);
    CHECK(B.area(w) == doctest::Approx(0.25));
    auto C = GridRegion::rect(w, 0.5, 0.7, 0.0, 0.5);
    CHECK(B.disjoint(C));
    CHECK(B.united(C).cell_count() == 35);
    CHECK_THROWS_AS(B.united(B), GeometryError);
    CHECK_THROWS_AS(GridRegion::rect(w, 0.0, 0.55, 0.0, 0.5), GeometryError);
}

TEST_CASE("field determinism and budget") {
    auto su2 = make_group(GroupKind::SU2);
    auto w = unit_window();
    auto f1 = sample_field(su2, w, 77);
    auto f2 = sample_field(su2, w, 77);
    auto f3 = sample_field(su2, w, 78);
    for (int j = 0; j < w.ny; ++j)
        for (int i = 0; i < w.nx; ++i) CHECK((f1.cell(i, j).array() == f2.cell(i, j).array()).all());
    CHECK((f1.cell(3, 4) - f3.cell(3, 4)).norm() > 0.0);
    NoiseOptions tiny;
    tiny.max_cells = 100;
    CHECK_THROWS_AS(sample_field(su2, w, 1, tiny), GeometryError);
}

TEST_CASE("region queries") {
    auto su2 = make_group(GroupKind::SU2);
    auto w = unit_window();
    auto f = sample_field(su2, w, 3);
    CHECK(f_region(f, GridRegion{}).norm() == 0.0);

    Coords all = Coords::Zero(3);
    for (int j = 0; j < w.ny; ++j)
        for (int i = 0; i < w.nx; ++i) all += f.cell(i, j);
    CHECK((f_region(f, GridRegion::whole(w)) - all).norm() < 1e-12);

    auto B1 = GridRegion::rect(w, -0.4, 0.2, 0.0, 0.3);
    auto B2 = GridRegion::rect(w, 0.2, 0.6, -0.5, 0.3);
    CHECK((f_region(f, B1.united(B2)) - f_region(f, B1) - f_region(f, B2)).norm() < 1e-14);

    auto up = GridRegion::rect(w, 0.0, 0.5, 0.0, 0.4);
    auto down = GridRegion::rect(w, 0.0, 0.5, -0.4, 0.0);
    CHECK((f_hat_region(f, up) - f_region(f, up)).norm() == 0.0);
    CHECK((f_hat_region(f, down) + f_region(f, down)).norm() == 0.0);
    CHECK((f_hat_region(f, up.united(down)) - (f_region(f, up) - f_region(f, down))).norm() < 1e-14);

    GridRegion outside;
    outside.runs.push_back({25, 0, 2});
    CHECK_THROWS_AS(f_region(f, outside), GeometryError);
}

TEST_CASE("region statistics over seeds") {
    auto su2 = make_group(GroupKind::SU2);
    auto w = unit_window();
    auto B1 = GridRegion::rect(w, 0.0, 0.5, 0.0, 0.5);
    auto B2 = GridRegion::rect(w, -0.5, 0.0, -0.5, 0.0);
    const int n = 100000;
    double s1 = 0, s11 = 0, s2 = 0, s12 = 0, h1 = 0, h11 = 0;
    for (int k = 0; k < n; ++k) {
        auto f = sample_field(su2, w, replica_seed(1234, k));
        double a = f_region(f, B1)(0), b = f_region(f, B2)(0), c = f_hat_region(f, B2)(0);
        s1 += a;
        s11 += a * a;
        s2 += b;
        s12 += a * b;
        h1 += c;
        h11 += c * c;
    }
    double var = s11 / n - (s1 / n) * (s1 / n);
    CHECK(std::abs(var - 0.25) < 0.005);
    CHECK(std::abs(s12 / n - (s1 / n) * (s2 / n)) < 0.005);
    // f-hat has the same law; compare variances within 3 sigma of the variance estimator
    double vh = h11 / n - (h1 / n) * (h1 / n);
    double se_var = 0.25 * std::sqrt(2.0 / n);
    CHECK(std::abs(vh - 0.25) < 3.0 * se_var * std::sqrt(2.0));
}

TEST_CASE("refinement") {
    auto su2 = make_group(GroupKind::SU2);
    auto w = unit_window();
    auto f = sample_field(su2, w, 5);
    auto one = refine_column_strip(f, 4, 7, 1);
    REQUIRE(one.size() == 1);
    CHECK((one[0] - f.cell(4, 7)).norm() == 0.0);

    auto before = f_region(f, GridRegion::whole(w));
    auto sub = refine_column_strip(f, 4, 7, 8);
    Coords sum = Coords::Zero(3);
    for (const auto& c : sub) sum += c;
    CHECK((sum - f.cell(4, 7)).norm() < 1e-14);
    auto again = refine_column_strip(f, 4, 7, 8);
    for (int s = 0; s < 8; ++s) CHECK((again[s].array() == sub[s].array()).all());
    CHECK((f_region(f, GridRegion::whole(w)) - before).norm() == 0.0);

    const int n = 100000, S = 4;
    double ss = 0;
    std::vector<Coords> out;
    for (int k = 0; k < n; ++k) {
        auto g = sample_field(su2, w, replica_seed(99, k));
        g.sub_values(2, 3, S, out);
        ss += out[1](0) * out[1](0);
    }
    double target = w.cell_area() / S;
    CHECK(std::abs(ss / n / target - 1.0) < 0.02);
}

TEST_CASE("zero field and dump round trip") {
    auto su2 = make_group(GroupKind::SU2);
    auto w = unit_window();
    auto z = NoiseField::zeros(su2, w);
    CHECK(f_region(z, GridRegion::whole(w)).norm() == 0.0);
    std::vector<Coords> out;
    z.sub_values(1, 1, 4, out);
    for (const auto& c : out) CHECK(c.norm() == 0.0);

    auto f = sample_field(su2, w, 2024);
    auto path = (std::filesystem::temp_directory_path() / "ym2_noise_roundtrip.bin").string();
    f.dump(path);
    auto g = NoiseField::restore(su2, path);
    CHECK(g.window() == w);
    CHECK(g.seed() == 2024);
    for (int j = 0; j < w.ny; ++j)
        for (int i = 0; i < w.nx; ++i) CHECK((g.cell(i, j).array() == f.cell(i, j).array()).all());
    std::remove(path.c_str());
    auto u1 = make_group(GroupKind::U1);
    f.dump(path);
    CHECK_THROWS(NoiseField::restore(u1, path));
    std::remove(path.c_str());
}

TEST_CASE("shifted and masked views") {
    auto u1 = make_group(GroupKind::U1);
    auto w = unit_window();
    auto f = sample_field(u1, w, 8);
    std::vector<Mat> ident(w.nx, u1.identity());

    RectField none;
    ShiftedFieldView same(f, none, ident);
    for (int j = 0; j < w.ny; ++j)
        for (int i = 0; i < w.nx; ++i) CHECK((same.cell(i, j).array() == f.cell(i, j).array()).all());

    RectField eta;
    Coords one = Coords::Ones(1);
    eta.add(0.0, 0.3, 0.0, 0.5, one);
    ShiftedFieldView shifted(f, eta, ident);
    auto Q = GridRegion::rect(w, 0.0, 0.3, 0.0, 0.5);
    CHECK(std::abs(f_region(shifted, Q)(0) - (f_region(f, Q)(0) - 0.15)) < 1e-12);

    MaskedFieldView masked(f, 0.0, 0.2);
    CHECK(masked.cell(10, 3).norm() == 0.0);
    CHECK(masked.cell(12, 3).norm() == f.cell(12, 3).norm());
}
