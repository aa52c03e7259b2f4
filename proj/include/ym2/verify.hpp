#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "ym2/graph.hpp"

namespace ym2 {

struct MCEstimate {
    cd mean{0.0, 0.0};
    double stderr_ = 0.0;
    long n = 0;

    static MCEstimate exact(cd v) { return {v, 0.0, 0}; }
    bool is_exact() const { return n == 0; }
};

// Running mean and sum of squared deviations (complex values, |.|^2 spread).
class MCAccumulator {
public:
    void add(cd v);
    void merge(const MCAccumulator& o);
    long count() const { return n_; }
    cd mean() const { return mean_; }
    MCEstimate estimate() const;

private:
    long n_ = 0;
    cd mean_{0.0, 0.0};
    double m2_ = 0.0;
};

struct ComparisonReport {
    MCEstimate lhs, rhs;
    double diff_stderr = 0.0;
    double z = 0.0;
    double threshold = 3.0;
    bool pass = false;
};

// Independent estimates: combined stderr sqrt(se_l^2 + se_r^2); exact sides add nothing.
ComparisonReport compare(const MCEstimate& lhs, const MCEstimate& rhs, double threshold_sigma = 3.0);
// Estimates from shared replicas: z uses the stderr of the per-replica difference.
ComparisonReport compare_paired(const MCEstimate& lhs, const MCEstimate& rhs, const MCEstimate& diff,
                                double threshold_sigma = 3.0);

// Worker count: YM2_THREADS if set, else hardware concurrency.
int worker_count();

constexpr long kReplicaBlock = 1024;

// Runs n replicas; replica k gets seed replica_seed(seed, k) and writes `outputs` values.
// Blocks of kReplicaBlock replicas are merged in index order, so results do not depend
// on the thread count.
using ReplicaFn = std::function<void(std::uint64_t replica_seed, std::vector<cd>& out)>;
std::vector<MCAccumulator> run_replicas(long n, std::uint64_t seed, int outputs, const ReplicaFn& fn,
                                        int threads = 0);

struct McParams {
    long n = 100000;
    std::uint64_t seed = 1;
    int substeps = 4;
    int threads = 0;
};

// ---- oracles ----

// tr exp(kappa (t1 + t3) / 2)
double figure_eight_mean_oracle(const GroupContext& ctx, double t1, double t3);
// -tr(kappa exp(kappa (t1 + t3) / 2))
double mm_rhs_oracle(const GroupContext& ctx, double t1, double t3);
// [z(t1 - q, t3) - z(t1, t3 + q)] / q
double deformation_oracle(const GroupContext& ctx, double t1, double t3, double q);

// ---- estimators ----

// (1/D) tr //(boundary of [0, width] x [0, area / width]), counterclockwise from 0.
MCEstimate wilson_decay(const GroupContext& ctx, const GridWindow& w, double area, double width, const McParams& p);

MCEstimate figure_eight_mean(const GroupContext& ctx, const GridWindow& w, const FigureEight& fe, const McParams& p);
MCEstimate mm_lhs(const GroupContext& ctx, const GridWindow& w, const FigureEight& fe, const McParams& p);

struct InsertionResult {
    double q_area = 0.0;
    MCEstimate lhs;        // grad^{e1} . grad^{e2} U on the same replicas
    MCEstimate form_diff;  // -(1/|Q|) grad^{e2}_{f(Q) - f(RQ)} U
    MCEstimate form_sum;   // -(1/|Q|) (grad^{e2}_{f(Q)} U + grad^{e4}_{f(RQ)} U)
    MCEstimate diff_lhs_minus_diff, diff_lhs_minus_sum;
    ComparisonReport report_diff, report_sum;
};

// Q = [0, width] x [0, height]; RQ its reflection. `zero_noise` replaces every replica by the zero field.
InsertionResult mm_insertion(const GroupContext& ctx, const GridWindow& w, const FigureEight& fe, double width,
                             double height, const McParams& p, bool zero_noise = false);

struct DeformationResult {
    double eps = 0.0, q = 0.0;
    MCEstimate estimate;  // E[U(G+) - U(G-)] / q
    double oracle = 0.0;  // finite-q lobe oracle
    double limit = 0.0;   // q -> 0 value
    ComparisonReport report;
};

DeformationResult mm_deformation(const GroupContext& ctx, const GridWindow& w, const FigureEight& fe, double eps,
                                 const McParams& p);

// Observable for integration by parts: U itself, or grad^{edge}_X U when insert_edge >= 0.
struct IbpObservable {
    const WilsonFunctional* U = nullptr;
    int insert_edge = -1;
    Mat insert_x;

    cd value(const HolonomyAssignment& om) const;
    cd grad(const HolonomyAssignment& om, int sigma, const Mat& X) const;
};

// E[sum_sigma grad^sigma_{zeta(sigma)} W] vs E[W <f, eta_y>], shared replicas.
ComparisonReport ibp_check(const GroupContext& ctx, const GridWindow& w, const TameGraph& g, const IbpObservable& W,
                           const PerturbationOneForm& eta, const McParams& p, double threshold = 3.0);

// psi evaluated on a field
using FieldFunctional = std::function<double(const FieldSource&)>;

struct GirsanovResult {
    MCEstimate lhs;  // E[psi(f^g - Ad_{g^{-1}} alpha)]
    MCEstimate rhs;  // E[psi(f^g) exp(-<f, alpha> - |alpha|^2 / 2)]
    ComparisonReport report;
};

// g given at column left edges (size nx).
GirsanovResult girsanov_check(const GroupContext& ctx, const GridWindow& w, const FieldFunctional& psi,
                              const RectField& alpha, const std::vector<Mat>& g_cols, const McParams& p,
                              double threshold = 3.0);
// Exact E[<(f^g - Ad_{g^{-1}} alpha)(B), xi>] = -sum_c <int_c alpha, Ad_{g(x_c)} xi>.
double girsanov_linear_exact(const GroupContext& ctx, const GridWindow& w, const GridRegion& B, const Coords& xi,
                             const RectField& alpha, const std::vector<Mat>& g_cols);

struct LoopExpansionRow {
    double t = 0.0, area = 0.0;
    double mean_gap = 0.0;         // max-abs of E[g] - exp(kappa a / 2)
    double mean_gap_stderr = 0.0;  // largest entry stderr of E[g]
    double drift_gap = 0.0;        // max-abs of E[g] - I - kappa a / 2
    double centered_l2 = 0.0;      // sqrt(E |r - E r|^2), r = g - I + f_hat(Q) - kappa a / 2
    double bdg_l2 = 0.0;           // sqrt(E |sum_{i<j} dM_i dM_j|^2)
};

// Q_t = [0, t] x [0, 1]; g_t = //(top edge)^{-1}.
std::vector<LoopExpansionRow> loop_expansion_scan(const GroupContext& ctx, const GridWindow& w,
                                                  const std::vector<double>& ts, const McParams& p);

// Independent heat-kernel lobes h1 (area t1) and h2 (area t3).
std::pair<Mat, Mat> oracle_sample_figure_eight(const GroupContext& ctx, double t1, double t3, int steps,
                                               CounterRng& rng);
MCEstimate oracle_figure_eight_mean(const GroupContext& ctx, double t1, double t3, int steps, const McParams& p);

// sqrt(E|U - U_masked|^2) for the figure-eight Wilson loop when the strip [0, eps) x R is zeroed.
MCEstimate strip_sensitivity(const GroupContext& ctx, const GridWindow& w, const FigureEight& fe, double eps,
                             const McParams& p);

struct SlopeFit {
    double slope = 0.0, intercept = 0.0, slope_stderr = 0.0;
};

// Least-squares fit of log y against log x.
SlopeFit fit_loglog(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace ym2
