#pragma once

#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ym2/rng.hpp"

namespace ym2 {

using cd = std::complex<double>;

constexpr int kMaxDim = 8;
constexpr int kMaxAlgebraDim = kMaxDim * kMaxDim;

// Complex D x D matrix with D <= 8; no heap allocation.
using Mat = Eigen::Matrix<cd, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor, kMaxDim, kMaxDim>;
// Coordinates of an algebra element in the orthonormal basis.
using Coords = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxAlgebraDim, 1>;

enum class GroupKind { U1, SU2, SUN, UN };

class DegenerateSample : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct GroupContext {
    GroupKind kind = GroupKind::U1;
    int n = 1;  // matrix dimension D
    std::vector<Mat> basis;
    Mat casimir;

    int dim() const { return n; }
    int algebra_dim() const { return static_cast<int>(basis.size()); }
    bool special() const { return kind == GroupKind::SU2 || kind == GroupKind::SUN; }
    std::string name() const;

    Mat identity() const { return Mat::Identity(n, n); }
    Mat zero() const { return Mat::Zero(n, n); }
    Coords zero_coords() const { return Coords::Zero(algebra_dim()); }

    // sum_i c_i xi_i
    Mat algebra(const Coords& c) const;
    // <X, xi_i> for each basis element
    Coords coords(const Mat& X) const;
};

GroupContext make_group(GroupKind kind, int n = 0);
// "u1", "su2", "sun:N", "un:N"
GroupContext parse_group(const std::string& spec);

// Rebuild the context with basis xi'_j = sum_i R_ij xi_i (R orthogonal).
GroupContext rotated_basis(const GroupContext& ctx, const Eigen::MatrixXd& R);

// <X, Y> = -Re tr(XY)
double inner(const Mat& X, const Mat& Y);
double algebra_norm(const Mat& X);

Mat exp_map(const GroupContext& ctx, const Mat& X);
// Scaling and squaring with a degree-13 Pade approximant; valid for any square matrix.
Mat exp_pade(const Mat& X);

Mat retract(const GroupContext& ctx, const Mat& M);

// Ad_g X = g X g^{-1}; g unitary.
Mat adjoint_group(const Mat& g, const Mat& X);
// Ad_{g^{-1}} X = g^{-1} X g; g unitary.
Mat adjoint_inverse(const Mat& g, const Mat& X);
Coords adjoint_coords(const GroupContext& ctx, const Mat& g, const Coords& c);
Coords adjoint_inverse_coords(const GroupContext& ctx, const Mat& g, const Coords& c);

Mat sample_algebra_gaussian(const GroupContext& ctx, double variance, CounterRng& rng);
Coords sample_coords(const GroupContext& ctx, double variance, CounterRng& rng);

Mat brownian_sample(const GroupContext& ctx, double t, int steps, CounterRng& rng);

// exp(kappa t / 2)
Mat heat_mean(const GroupContext& ctx, double t);

double max_abs(const Mat& M);
double unitarity_defect(const Mat& g);
bool is_skew_hermitian(const Mat& X, double tol);

// Multiplies left factors into an accumulator and repairs unitarity drift by
// polar retraction every `period` products.
class GroupAccumulator {
public:
    GroupAccumulator(const GroupContext& ctx, int period = 1024);
    void left_multiply(const Mat& h);
    const Mat& value() const { return value_; }

private:
    const GroupContext* ctx_;
    Mat value_;
    int period_;
    int count_ = 0;
};

}  // namespace ym2
