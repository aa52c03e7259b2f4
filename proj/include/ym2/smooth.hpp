#pragma once

#include <functional>
#include <string>
#include <vector>

#include "ym2/transport.hpp"

namespace ym2 {

// k-valued function of (x, y)
using AlgebraFn = std::function<Mat(double x, double y)>;

// A = A1 dx + A2 dy with closed-form components.
struct SmoothConnection {
    AlgebraFn A1, A2;
    AlgebraFn f;  // exact curvature density F12 when known
    bool axial = false;

    static SmoothConnection zero(const GroupContext& ctx);
    static SmoothConnection dx_only(const GroupContext& ctx, AlgebraFn a1);

    Mat operator()(const Point& p, const Point& v) const;  // A<v> at p
    // F12 = d_x A2 - d_y A1 + [A1, A2]; 5-point differences unless f is set
    Mat curvature(double x, double y, double h = 1e-3) const;
    // |A1(x, 0)| and |A2| below tol at the probes
    bool check_axial(const std::vector<Point>& probes, double tol = 1e-12) const;
    SmoothConnection plus(const SmoothConnection& o, double s = 1.0) const;  // A + s o
};

// A(x, y) = -int_0^y f(x, y') dy' dx
SmoothConnection axial_from_curvature(const GroupContext& ctx, AlgebraFn f);

// Smooth piece t in [t0, t1] -> pos(t); a path is a list of chained pieces.
struct PathPiece {
    std::function<Point(double)> pos, vel;
    double t0 = 0.0, t1 = 1.0;
};
using SmoothPath = std::vector<PathPiece>;

PathPiece line_piece(const Point& a, const Point& b);
// Counterclockwise boundary of [x0, x1] x [y0, y1] starting at (x0, y0).
SmoothPath rectangle_loop(double x0, double x1, double y0, double y1);
SmoothPath reversed(const SmoothPath& p);
// (0, 0) -> (w, 0) -> (w, h) -> (0, h)
SmoothPath right_boundary(double w, double h);

// Solves d// + A<l'> // = 0, //(start) = I; RK4 with `steps` steps per piece.
Mat ode_transport(const GroupContext& ctx, const SmoothConnection& A, const SmoothPath& p, int steps);

// Along the path: // and int integrand(pos, vel, //) dt, integrated jointly by RK4.
struct TransportIntegral {
    Mat transport;
    Mat integral;
};
using PathIntegrand = std::function<Mat(double t, const Point& pos, const Point& vel, const Mat& P)>;
TransportIntegral transport_with_integral(const GroupContext& ctx, const SmoothConnection& A, const SmoothPath& p,
                                          int steps, const PathIntegrand& integrand);

// g with its partial derivatives
struct GaugeFn {
    std::function<Mat(double, double)> g, gx, gy;
};

// A^g = g^{-1} A g + g^{-1} dg
SmoothConnection gauge_transform(const SmoothConnection& A, const GaugeFn& g);
// | //^{A^g}(l) - g(l_b)^{-1} //^A(l) g(l_a) |
double gauge_transport_residual(const GroupContext& ctx, const SmoothConnection& A, const GaugeFn& g,
                                const SmoothPath& p, int steps);
// max over probes of | F^{A^g} - Ad_{g^{-1}} F^A |
double gauge_curvature_residual(const SmoothConnection& A, const GaugeFn& g, const std::vector<Point>& probes);

// k solves k' + Ad_{//^A^{-1}}(B - A)<l'> k = 0, k(0) = I; returns | //^B - //^A k |.
double connection_comparison(const GroupContext& ctx, const SmoothConnection& A, const SmoothConnection& B,
                             const SmoothPath& p, int steps);

struct DerivativeCheck {
    Mat analytic, numeric;
    double rel_error = 0.0;
};

// -//(l) int Ad_{//_t^{-1}} eta<l'> dt vs central difference of //^{A + s eta} in s.
DerivativeCheck connection_derivative(const GroupContext& ctx, const SmoothConnection& A,
                                      const SmoothConnection& eta, const SmoothPath& p, int steps, double s = 1e-5);

// (s, t) -> l_s(t) on t in [0, 1] with both partial derivatives.
struct PathFamily {
    std::function<Point(double s, double t)> pos, dt, ds;
};

// d/ds //_1(l_s) at s0 against the curvature integral. Moving end points use the covariant
// form: d/ds //_1 + A<l_s'(1)> //_1 = //_1 int Ad_{//_t^{-1}} F(l', l_s') dt.
DerivativeCheck path_derivative(const GroupContext& ctx, const SmoothConnection& A, const PathFamily& fam, double s0,
                                int steps, double h = 1e-4);

// Gauge solving dg/dx + A1(x, 0) g = 0, g(0) = I (A = A1 dx).
struct AxialProjection {
    SmoothConnection projected;  // Ad_{g^{-1}}(A1(x, y) - A1(x, 0)) dx
    std::function<Mat(double)> gauge;
};
AxialProjection axial_projection(const GroupContext& ctx, const SmoothConnection& A, double step = 1e-3);

// Axial A plus eta = eta1 dx: | //^{[(A + eta)]^{g_eta}}(l) - g_eta(b)^{-1} //^A(l) k g_eta(a) |.
double axial_perturbation_residual(const GroupContext& ctx, const SmoothConnection& A, const SmoothConnection& eta,
                                   const SmoothPath& p, int steps);

// psi on K with its value at I
using GroupFunction = std::function<cd(const Mat&)>;
GroupFunction normalized_trace();

struct LoopExpansionPoint {
    double eps = 0.0;
    double remainder = 0.0;       // |psi(//(eps l)) - psi(I) + (grad_{f(eps Q)} psi)(e)|
    double green_residual = 0.0;  // |beta(1) - f(eps Q)|
};

// l = right boundary of Q = [0, w] x [0, h], scaled by eps.
std::vector<LoopExpansionPoint> smooth_loop_expansion(const GroupContext& ctx, const SmoothConnection& A, double w,
                                                      double h, const std::vector<double>& eps,
                                                      const GroupFunction& psi, int steps = 400);

// int over [x0, x1] x [y0, y1] by tensor Gauss-Legendre on panels x panels cells.
Mat integrate_rect(const AlgebraFn& g, double x0, double x1, double y0, double y1, int panels = 1);
double integrate_rect_scalar(const std::function<double(double, double)>& g, double x0, double x1, double y0,
                             double y1, int panels = 1);

enum class Homotopy { Radial, CompleteAxial };

// sigma_x(t), d/dt sigma_x(t), and d/ds sigma_{x + s v}(t)
Point homotopy_point(Homotopy h, const Point& x, double t);
Point homotopy_velocity(Homotopy h, const Point& x, double t);
Point homotopy_variation(Homotopy h, const Point& x, const Point& v, double t);
SmoothPath homotopy_path(Homotopy h, const Point& x);

// g_A(x) = //_1^A(sigma_x)
Mat homotopy_gauge(const GroupContext& ctx, const SmoothConnection& A, Homotopy h, const Point& x, int steps);

// pi_sigma(A)<v_x> = int Ad_{//_tau^{-1}} F^A(sigma_x', d_v sigma_x) dtau (the projection formula
// with Ad_{g_A(x)^{-1}} Ad_{//_{1<-tau}} = Ad_{//_tau^{-1}}).
SmoothConnection homotopy_project(const GroupContext& ctx, const SmoothConnection& A, Homotopy h, int steps = 200);

// max over probes and t of |A<sigma_x'(t)>|
double slice_residual(const SmoothConnection& A, Homotopy h, const std::vector<Point>& probes, int t_samples = 33);

// A<v_x> = int F(sigma_x', d_v sigma_x) dt
SmoothConnection reconstruct_from_curvature(const GroupContext& ctx, AlgebraFn F12, Homotopy h);

// u(x) = int eta<sigma_x'> dt
Mat homotopy_potential(const SmoothConnection& eta, Homotopy h, const Point& x);

struct ProjectedFieldCheck {
    Mat numeric[2];      // d/ds pi(A + s eta) components at x
    Mat plus_ad[2];      // ad_u A + eta - du
    Mat minus_ad[2];     // -ad_u A + eta - du (printed form)
    double rel_error_plus = 0.0, rel_error_minus = 0.0;
    double reparam_residual = 0.0;  // |du<sigma_x'(t)> - eta<sigma_x'(t)>| over t
};
ProjectedFieldCheck projected_vector_field(const GroupContext& ctx, const SmoothConnection& A,
                                           const SmoothConnection& eta, Homotopy h, const Point& x, int steps = 200,
                                           double s = 1e-4);

// phi^* A for phi with Jacobian J (J[i][j] = d phi_j / d x_i)
struct PlaneMap {
    std::function<Point(double, double)> phi;
    std::function<void(double, double, double J[2][2])> jacobian;
};
SmoothConnection pullback(const SmoothConnection& A, const PlaneMap& m);
PlaneMap shear_map(double c);  // (x, y) -> (x + c y, y)
SmoothPath map_path(const SmoothPath& p, const PlaneMap& m);

// int |F12|^2 over a rectangle (curvature by differences)
double curvature_norm2(const SmoothConnection& A, double x0, double x1, double y0, double y1, int panels);

// | nabla_t S - // d/dt (//^{-1} S) | at parameter t of a single-piece path
double covariant_derivative_residual(const GroupContext& ctx, const SmoothConnection& A, const PathPiece& piece,
                                     const std::function<Mat(double)>& S, const std::function<Mat(double)>& dS,
                                     double t, int steps);

struct LabCheck {
    std::string name;
    double value = 0.0;
    double tolerance = 0.0;
    bool pass = false;
    std::string detail;
};

// Deterministic suite over closed-form test fields at the documented step sizes.
std::vector<LabCheck> run_smooth_lab(const GroupContext& ctx);

}  // namespace ym2
