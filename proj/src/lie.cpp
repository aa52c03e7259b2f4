#include "ym2/lie.hpp"

#include <cmath>
#include <limits>

#include <unsupported/Eigen/MatrixFunctions>

namespace ym2 {

namespace {

Mat elementary(int n, int r, int c) {
    Mat E = Mat::Zero(n, n);
    E(r, c) = 1.0;
    return E;
}

void finish_context(GroupContext& ctx) {
    ctx.casimir = Mat::Zero(ctx.n, ctx.n);
    for (const auto& xi : ctx.basis) ctx.casimir += xi * xi;
}

// Generalized Gell-Mann basis of su(n), scaled to unit length.
std::vector<Mat> su_basis(int n) {
    const cd I(0.0, 1.0);
    const double r2 = std::sqrt(2.0);
    std::vector<Mat> out;
    for (int j = 0; j < n; ++j) {
        for (int k = j + 1; k < n; ++k) {
            out.push_back(I * (elementary(n, j, k) + elementary(n, k, j)) / r2);
            out.push_back((elementary(n, j, k) - elementary(n, k, j)) / r2);
        }
    }
    for (int l = 1; l < n; ++l) {
        Mat D = Mat::Zero(n, n);
        for (int j = 0; j < l; ++j) D(j, j) = 1.0;
        D(l, l) = -static_cast<double>(l);
        out.push_back(I * D / std::sqrt(static_cast<double>(l * (l + 1))));
    }
    return out;
}

}  // namespace

std::string GroupContext::name() const {
    switch (kind) {
        case GroupKind::U1: return "u1";
        case GroupKind::SU2: return "su2";
        case GroupKind::SUN: return "sun:" + std::to_string(n);
        case GroupKind::UN: return "un:" + std::to_string(n);
    }
    return "?";
}

Mat GroupContext::algebra(const Coords& c) const {
    Mat X = Mat::Zero(n, n);
    for (int i = 0; i < algebra_dim(); ++i) X += c(i) * basis[i];
    return X;
}

Coords GroupContext::coords(const Mat& X) const {
    Coords c(algebra_dim());
    for (int i = 0; i < algebra_dim(); ++i) c(i) = inner(X, basis[i]);
    return c;
}

GroupContext make_group(GroupKind kind, int n) {
    GroupContext ctx;
    ctx.kind = kind;
    switch (kind) {
        case GroupKind::U1:
            ctx.n = 1;
            ctx.basis.push_back(Mat::Constant(1, 1, cd(0.0, 1.0)));
            break;
        case GroupKind::SU2:
            ctx.n = 2;
            ctx.basis = su_basis(2);
            break;
        case GroupKind::SUN:
        case GroupKind::UN:
            if (n < 1) throw std::invalid_argument("group dimension must be >= 1");
            if (n > kMaxDim) throw std::invalid_argument("group dimension " + std::to_string(n) + " exceeds 8");
            ctx.n = n;
            ctx.basis = su_basis(n);
            if (kind == GroupKind::UN)
                ctx.basis.push_back(Mat::Identity(n, n) * cd(0.0, 1.0 / std::sqrt(static_cast<double>(n))));
            break;
    }
    finish_context(ctx);
    return ctx;
}

GroupContext parse_group(const std::string& spec) {
    if (spec == "u1") return make_group(GroupKind::U1);
    if (spec == "su2") return make_group(GroupKind::SU2);
    auto colon = spec.find(':');
    if (colon != std::string::npos) {
        std::string head = spec.substr(0, colon);
        int n = 0;
        try {
            n = std::stoi(spec.substr(colon + 1));
        } catch (const std::exception&) {
            throw std::invalid_argument("bad group size in '" + spec + "'");
        }
        if (head == "sun") return make_group(GroupKind::SUN, n);
        if (head == "un") return make_group(GroupKind::UN, n);
    }
    throw std::invalid_argument("unknown group '" + spec + "'");
}

GroupContext rotated_basis(const GroupContext& ctx, const Eigen::MatrixXd& R) {
    GroupContext out = ctx;
    const int d = ctx.algebra_dim();
    for (int j = 0; j < d; ++j) {
        Mat X = Mat::Zero(ctx.n, ctx.n);
        for (int i = 0; i < d; ++i) X += R(i, j) * ctx.basis[i];
        out.basis[j] = X;
    }
    finish_context(out);
    return out;
}

double inner(const Mat& X, const Mat& Y) {
    // -Re tr(XY) without forming the product
    double s = 0.0;
    for (int i = 0; i < X.rows(); ++i)
        for (int k = 0; k < X.cols(); ++k) s += (X(i, k) * Y(k, i)).real();
    return -s;
}

double algebra_norm(const Mat& X) { return std::sqrt(std::max(0.0, inner(X, X))); }

Mat exp_pade(const Mat& X) {
    Eigen::MatrixXcd Xd = X;
    Eigen::MatrixXcd E = Xd.exp();
    return E;
}

Mat exp_map(const GroupContext& ctx, const Mat& X) {
    if (ctx.n == 1) {
        Mat out(1, 1);
        out(0, 0) = std::exp(X(0, 0));
        return out;
    }
    if (ctx.kind == GroupKind::SU2) {
        // X traceless skew-Hermitian: X^2 = -theta^2 I, exp X = cos(theta) I + sin(theta)/theta X
        double th2 = std::max(0.0, (X(0, 0) * X(1, 1) - X(0, 1) * X(1, 0)).real());
        double th = std::sqrt(th2);
        double c = std::cos(th);
        double s = th > 1e-8 ? std::sin(th) / th : 1.0 - th2 / 6.0;
        Mat out = s * X;
        out(0, 0) += c;
        out(1, 1) += c;
        return out;
    }
    return exp_pade(X);
}

Mat retract(const GroupContext& ctx, const Mat& M) {
    Eigen::MatrixXcd Md = M;
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(Md, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    if (!(sv.size() > 0) || !(sv(sv.size() - 1) > 1e-12 * std::max(1.0, sv(0))) || !std::isfinite(sv(0)))
        throw DegenerateSample("retract: singular or non-finite matrix");
    Eigen::MatrixXcd U = svd.matrixU() * svd.matrixV().adjoint();
    if (ctx.special()) {
        cd det = U.determinant();
        double phase = std::arg(det) / static_cast<double>(ctx.n);
        U *= std::polar(1.0, -phase);
    }
    return U;
}

Mat adjoint_group(const Mat& g, const Mat& X) { return g * X * g.adjoint(); }

Mat adjoint_inverse(const Mat& g, const Mat& X) { return g.adjoint() * X * g; }

Coords adjoint_coords(const GroupContext& ctx, const Mat& g, const Coords& c) {
    return ctx.coords(adjoint_group(g, ctx.algebra(c)));
}

Coords adjoint_inverse_coords(const GroupContext& ctx, const Mat& g, const Coords& c) {
    return ctx.coords(adjoint_inverse(g, ctx.algebra(c)));
}

Coords sample_coords(const GroupContext& ctx, double variance, CounterRng& rng) {
    Coords c(ctx.algebra_dim());
    double sd = std::sqrt(std::max(0.0, variance));
    for (int i = 0; i < ctx.algebra_dim(); ++i) c(i) = sd * rng.normal();
    return c;
}

Mat sample_algebra_gaussian(const GroupContext& ctx, double variance, CounterRng& rng) {
    return ctx.algebra(sample_coords(ctx, variance, rng));
}

Mat brownian_sample(const GroupContext& ctx, double t, int steps, CounterRng& rng) {
    if (steps < 1) throw std::invalid_argument("brownian_sample: steps must be >= 1");
    GroupAccumulator acc(ctx);
    if (t <= 0.0) return acc.value();
    const double v = t / steps;
    for (int i = 0; i < steps; ++i) acc.left_multiply(exp_map(ctx, sample_algebra_gaussian(ctx, v, rng)));
    return acc.value();
}

Mat heat_mean(const GroupContext& ctx, double t) { return exp_pade(ctx.casimir * (0.5 * t)); }

double max_abs(const Mat& M) {
    double m = 0.0;
    for (int i = 0; i < M.rows(); ++i)
        for (int j = 0; j < M.cols(); ++j) m = std::max(m, std::abs(M(i, j)));
    return m;
}

double unitarity_defect(const Mat& g) {
    return max_abs(g.adjoint() * g - Mat::Identity(g.rows(), g.cols()));
}

bool is_skew_hermitian(const Mat& X, double tol) { return max_abs(X + X.adjoint()) < tol; }

GroupAccumulator::GroupAccumulator(const GroupContext& ctx, int period)
    : ctx_(&ctx), value_(ctx.identity()), period_(period) {}

void GroupAccumulator::left_multiply(const Mat& h) {
    value_ = h * value_;
    if (period_ > 0 && ++count_ % period_ == 0) value_ = retract(*ctx_, value_);
}

}  // namespace ym2
