#include "ym2/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "json.hpp"
#include "ym2/smooth.hpp"

namespace ym2 {

namespace {

using json = nlohmann::ordered_json;
using Defaults = std::map<std::string, std::string>;

const Defaults& common_defaults() {
    static const Defaults d{{"group", "su2"},  {"seed", "1"},        {"samples", "100000"}, {"substeps", "4"},
                            {"threads", "0"},  {"threshold", "3"},   {"x_min", "-1.5"},     {"x_max", "1.5"},
                            {"y_min", "-1"},   {"y_max", "1"},       {"hx", "0.05"},        {"hy", "0.5"}};
    return d;
}

const std::map<std::string, Defaults>& experiment_defaults() {
    static const std::map<std::string, Defaults> d{
        {"wilson-decay", {{"areas", "0.25,0.5,1"}, {"width", "1"}, {"hy", "0.25"}}},
        {"mm-check",
         {{"t1", "0.5"},
          {"t3", "0.5"},
          {"samples", "200000"},
          {"insertion_widths", ""},
          {"insertion_height", "0.5"},
          {"insertion_slope", "-1.2,-0.8"},
          {"deformation_eps", ""},
          {"deformation_slope_min", "0.4"}}},
        {"mm-deformation", {{"t1", "0.5"}, {"t3", "0.5"}, {"eps", "0.1"}}},
        {"ibp-check",
         {{"t1", "0.5"},
          {"t3", "0.5"},
          {"eta_box", "0,0.2,0,0.5"},
          {"eta_dir", "0"},
          {"eta_scale", "1"},
          {"observable", "wilson"}}},
        {"girsanov-check",
         {{"psi", "both"},
          {"alpha_box", "0,0.3,0,0.5"},
          {"alpha", "0.8,0,-0.4"},
          {"gauge_slope", "0.7"},
          {"gauge_dir", "1"},
          {"region", "0.1,0.4,0,1"},
          {"xi_dir", "0"}}},
        {"loop-expansion",
         {{"ts", "0.1,0.2,0.4"}, {"hy", "0.25"}, {"drift_slope", "1.2,1.8"}, {"centered_slope", "0.8,1.2"}}},
        {"smooth-lab", {}},
        {"smooth-loop", {{"eps", "0.1"}, {"width", "1"}, {"height", "0.8"}}},
        {"oracle-vs-field", {{"t1", "0.5"}, {"t3", "0.5"}, {"lobe_steps", "16"}}},
    };
    return d;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string short_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}

// ---- record builders ----

struct Context {
    const ExperimentConfig& cfg;
    GroupContext ctx;
    McParams p;
    double threshold;

    explicit Context(const ExperimentConfig& c) : cfg(c), ctx(parse_group(c.get("group"))) {
        p.n = c.integer("samples");
        p.seed = static_cast<std::uint64_t>(c.integer("seed"));
        p.substeps = static_cast<int>(c.integer("substeps"));
        p.threads = static_cast<int>(c.integer("threads"));
        threshold = c.number("threshold");
    }

    GridWindow window() const {
        return GridWindow::with_cells(cfg.number("x_min"), cfg.number("x_max"), cfg.number("y_min"),
                                      cfg.number("y_max"), cfg.number("hx"), cfg.number("hy"));
    }

    ResultRecord base(const std::string& label) const {
        ResultRecord r;
        r.experiment = cfg.experiment();
        r.label = label;
        r.group = cfg.get("group");
        r.params = cfg.values();
        r.n = p.n;
        r.seed = p.seed;
        return r;
    }

    ResultRecord stochastic(const std::string& label, const ComparisonReport& rep) const {
        ResultRecord r = base(label);
        r.lhs = rep.lhs;
        r.rhs = rep.rhs;
        r.stderr_ = rep.diff_stderr;
        r.z = rep.z;
        r.threshold = rep.threshold;
        r.pass = rep.pass;
        return r;
    }

    ResultRecord deterministic(const std::string& label, double value, double reference, double tolerance,
                               bool pass) const {
        ResultRecord r = base(label);
        r.lhs = MCEstimate::exact(value);
        r.rhs = MCEstimate::exact(reference);
        r.tolerance = tolerance;
        r.pass = pass;
        r.n = 0;
        return r;
    }

    // log-log slope inside [lo, hi]
    ResultRecord slope(const std::string& label, const std::vector<double>& x, const std::vector<double>& y,
                       double lo, double hi) const {
        auto fit = fit_loglog(x, y);
        ResultRecord r = base(label);
        r.lhs = {fit.slope, fit.slope_stderr, static_cast<long>(x.size())};
        r.rhs = MCEstimate::exact(std::isfinite(hi) ? 0.5 * (lo + hi) : lo);
        r.stderr_ = fit.slope_stderr;
        r.tolerance = std::isfinite(hi) ? 0.5 * (hi - lo) : 0.0;
        r.pass = fit.slope >= lo && fit.slope <= hi;
        return r;
    }

    std::pair<double, double> band(const std::string& key) const {
        auto v = cfg.list(key);
        if (v.size() != 2 || !(v[0] <= v[1])) throw ConfigError(key + " must be 'lo,hi' with lo <= hi");
        return {v[0], v[1]};
    }

    std::vector<double> box(const std::string& key) const {
        auto v = cfg.list(key);
        if (v.size() != 4) throw ConfigError(key + " must be 'x0,x1,y0,y1'");
        return v;
    }

    const Mat& basis_dir(const std::string& key) const {
        const long k = cfg.integer(key);
        if (k < 0) throw ConfigError(key + " must be non-negative");
        return ctx.basis[static_cast<size_t>(k % ctx.algebra_dim())];
    }
};

FigureEight figure_eight(const Context& c, const GridWindow& w) {
    return build_figure_eight(c.cfg.number("t1"), c.cfg.number("t3"), w);
}

// ---- experiments ----

std::vector<ResultRecord> wilson_decay_experiment(const Context& c) {
    auto w = c.window();
    std::vector<ResultRecord> out;
    const double width = c.cfg.number("width");
    for (double a : c.cfg.list("areas")) {
        auto est = wilson_decay(c.ctx, w, a, width, c.p);
        const double exact = heat_mean(c.ctx, a).trace().real() / c.ctx.dim();
        out.push_back(c.stochastic("area=" + short_double(a), compare(est, MCEstimate::exact(exact), c.threshold)));
    }
    return out;
}

std::vector<ResultRecord> mm_deformation_records(const Context& c, const GridWindow& w, const FigureEight& fe,
                                                 double eps, bool with_limit,
                                                 DeformationResult* keep = nullptr) {
    auto d = mm_deformation(c.ctx, w, fe, eps, c.p);
    if (keep) *keep = d;
    std::vector<ResultRecord> out;
    out.push_back(c.stochastic("deformation eps=" + short_double(eps), d.report));
    if (with_limit) {
        // measurement only: the gap to the limit is not expected to vanish at finite eps
        auto lim = compare(d.estimate, MCEstimate::exact(d.limit), std::numeric_limits<double>::infinity());
        out.push_back(c.stochastic("deformation-limit eps=" + short_double(eps), lim));
    }
    return out;
}

std::vector<ResultRecord> mm_check_experiment(const Context& c) {
    auto w = c.window();
    auto fe = figure_eight(c, w);
    std::vector<ResultRecord> out;
    const double t1 = c.cfg.number("t1"), t3 = c.cfg.number("t3");
    auto lhs = mm_lhs(c.ctx, w, fe, c.p);
    out.push_back(c.stochastic("mm-lhs", compare(lhs, MCEstimate::exact(mm_rhs_oracle(c.ctx, t1, t3)), c.threshold)));

    auto widths = c.cfg.list("insertion_widths");
    std::vector<double> areas, se_diff, se_sum;
    for (double width : widths) {
        auto ins = mm_insertion(c.ctx, w, fe, width, c.cfg.number("insertion_height"), c.p);
        out.push_back(c.stochastic("insertion-diff width=" + short_double(width), ins.report_diff));
        out.push_back(c.stochastic("insertion-sum width=" + short_double(width), ins.report_sum));
        areas.push_back(ins.q_area);
        se_diff.push_back(ins.form_diff.stderr_ * ins.form_diff.stderr_);
        se_sum.push_back(ins.form_sum.stderr_ * ins.form_sum.stderr_);
    }
    if (widths.size() >= 2) {
        auto [lo, hi] = c.band("insertion_slope");
        out.push_back(c.slope("insertion-diff stderr^2 slope", areas, se_diff, lo, hi));
        out.push_back(c.slope("insertion-sum stderr^2 slope", areas, se_sum, lo, hi));
    }

    auto eps = c.cfg.list("deformation_eps");
    std::vector<double> gaps;
    for (double e : eps) {
        DeformationResult d;
        for (auto& r : mm_deformation_records(c, w, fe, e, false, &d)) out.push_back(std::move(r));
        gaps.push_back(std::abs(d.estimate.mean.real() - d.limit));
    }
    if (eps.size() >= 2)
        out.push_back(c.slope("deformation-limit gap slope", eps, gaps, c.cfg.number("deformation_slope_min"),
                              std::numeric_limits<double>::infinity()));
    return out;
}

std::vector<ResultRecord> mm_deformation_experiment(const Context& c) {
    auto w = c.window();
    auto fe = figure_eight(c, w);
    return mm_deformation_records(c, w, fe, c.cfg.number("eps"), true);
}

std::vector<ResultRecord> ibp_experiment(const Context& c) {
    auto w = c.window();
    auto fe = figure_eight(c, w);
    auto b = c.box("eta_box");
    Coords xi = c.ctx.coords(c.basis_dir("eta_dir")) * c.cfg.number("eta_scale");
    auto eta = PerturbationOneForm::reflected_box(b[0], b[1], b[2], b[3], xi);
    IbpObservable W;
    W.U = &fe.U;
    const auto& kind = c.cfg.get("observable");
    if (kind == "insertion") {
        W.insert_edge = fe.e1;
        W.insert_x = c.ctx.basis[0];
    } else if (kind != "wilson") {
        throw ConfigError("observable must be 'wilson' or 'insertion'");
    }
    return {c.stochastic("ibp " + kind, ibp_check(c.ctx, w, fe.graph, W, eta, c.p, c.threshold))};
}

std::vector<ResultRecord> girsanov_experiment(const Context& c) {
    auto w = c.window();
    auto ab = c.box("alpha_box");
    auto av = c.cfg.list("alpha");
    Coords a = c.ctx.zero_coords();
    for (int k = 0; k < std::min<int>(a.size(), static_cast<int>(av.size())); ++k) a(k) = av[k];
    RectField alpha;
    alpha.add(ab[0], ab[1], ab[2], ab[3], a);
    const Mat& gdir = c.basis_dir("gauge_dir");
    const double slope = c.cfg.number("gauge_slope");
    std::vector<Mat> g;
    for (int i = 0; i < w.nx; ++i) g.push_back(exp_map(c.ctx, slope * w.x_node(i) * gdir));
    auto rb = c.box("region");
    auto B = GridRegion::rect(w, rb[0], rb[1], rb[2], rb[3]);
    Coords xi = c.ctx.coords(c.basis_dir("xi_dir"));

    const auto& psi = c.cfg.get("psi");
    if (psi != "linear" && psi != "bounded" && psi != "both") throw ConfigError("psi must be linear, bounded or both");
    std::vector<ResultRecord> out;
    if (psi != "bounded") {
        FieldFunctional lin = [&](const FieldSource& f) { return f_region(f, B).dot(xi); };
        auto r = girsanov_check(c.ctx, w, lin, alpha, g, c.p, c.threshold);
        auto exact = MCEstimate::exact(girsanov_linear_exact(c.ctx, w, B, xi, alpha, g));
        out.push_back(c.stochastic("linear shifted vs exact", compare(r.lhs, exact, c.threshold)));
        out.push_back(c.stochastic("linear weighted vs exact", compare(r.rhs, exact, c.threshold)));
        out.push_back(c.stochastic("linear shifted vs weighted", r.report));
    }
    if (psi != "linear") {
        FieldFunctional bounded = [&](const FieldSource& f) { return std::cos(f_region(f, B).dot(xi)); };
        auto r = girsanov_check(c.ctx, w, bounded, alpha, g, c.p, c.threshold);
        out.push_back(c.stochastic("bounded shifted vs weighted", r.report));
    }
    return out;
}

std::vector<ResultRecord> loop_expansion_experiment(const Context& c) {
    auto w = c.window();
    auto ts = c.cfg.list("ts");
    auto rows = loop_expansion_scan(c.ctx, w, ts, c.p);
    std::vector<ResultRecord> out;
    std::vector<double> areas, drift, centered;
    for (const auto& r : rows) {
        ResultRecord rec = c.base("mean-gap a=" + short_double(r.area));
        rec.lhs = {r.mean_gap, r.mean_gap_stderr, c.p.n};
        rec.rhs = MCEstimate::exact(0.0);
        rec.stderr_ = r.mean_gap_stderr;
        rec.z = r.mean_gap_stderr > 0.0 ? r.mean_gap / r.mean_gap_stderr
                                        : (r.mean_gap == 0.0 ? 0.0 : std::numeric_limits<double>::infinity());
        rec.threshold = c.threshold;
        rec.pass = rec.z < c.threshold;
        out.push_back(rec);
        areas.push_back(r.area);
        drift.push_back(r.drift_gap);
        centered.push_back(r.centered_l2);
    }
    if (rows.size() >= 2) {
        auto [dl, dh] = c.band("drift_slope");
        out.push_back(c.slope("drift-gap slope", areas, drift, dl, dh));
        auto [cl, ch] = c.band("centered_slope");
        out.push_back(c.slope("centered-residual slope", areas, centered, cl, ch));
    }
    return out;
}

std::vector<ResultRecord> smooth_lab_experiment(const Context& c) {
    std::vector<ResultRecord> out;
    for (const auto& chk : run_smooth_lab(c.ctx)) {
        out.push_back(c.deterministic(chk.name, chk.value, chk.tolerance, chk.tolerance, chk.pass));
    }
    return out;
}

std::vector<ResultRecord> smooth_loop_experiment(const Context& c) {
    const Mat xa = c.ctx.basis[0];
    const Mat xb = c.ctx.basis[std::min(1, c.ctx.algebra_dim() - 1)];
    auto A = axial_from_curvature(c.ctx, [=](double x, double y) {
        return ((1.0 + 0.5 * std::sin(x) * std::cos(y)) * xa + 0.7 * x * y * xb).eval();
    });
    const double eps = c.cfg.number("eps");
    auto rows = smooth_loop_expansion(c.ctx, A, c.cfg.number("width"), c.cfg.number("height"), {eps},
                                      normalized_trace());
    const double green_tol = 1e-6;
    return {c.deterministic("loop-remainder eps=" + short_double(eps), rows[0].remainder, 0.0, green_tol,
                            rows[0].green_residual < green_tol)};
}

std::vector<ResultRecord> oracle_vs_field_experiment(const Context& c) {
    auto w = c.window();
    auto fe = figure_eight(c, w);
    const double t1 = c.cfg.number("t1"), t3 = c.cfg.number("t3");
    auto field = figure_eight_mean(c.ctx, w, fe, c.p);
    McParams q = c.p;
    q.seed = c.p.seed + 1;
    auto lobes = oracle_figure_eight_mean(c.ctx, t1, t3, static_cast<int>(c.cfg.integer("lobe_steps")), q);
    auto exact = MCEstimate::exact(figure_eight_mean_oracle(c.ctx, t1, t3));
    return {c.stochastic("field vs lobes", compare(field, lobes, c.threshold)),
            c.stochastic("field vs exact", compare(field, exact, c.threshold)),
            c.stochastic("lobes vs exact", compare(lobes, exact, c.threshold))};
}

}  // namespace

// ---- configuration ----

std::vector<std::string> experiment_names() {
    std::vector<std::string> out;
    for (const auto& [name, _] : experiment_defaults()) out.push_back(name);
    return out;
}

ExperimentConfig ExperimentConfig::defaults(const std::string& experiment) {
    auto it = experiment_defaults().find(experiment);
    if (it == experiment_defaults().end()) throw ConfigError("unknown experiment '" + experiment + "'");
    ExperimentConfig c;
    c.experiment_ = experiment;
    c.values_ = common_defaults();
    for (const auto& [k, v] : it->second) c.values_[k] = v;
    return c;
}

void ExperimentConfig::set(const std::string& key, const std::string& value) {
    auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("unknown config key '" + key + "' for " + experiment_);
    it->second = trim(value);
}

void ExperimentConfig::merge_text(const std::string& text) {
    const std::string body = trim(text);
    if (!body.empty() && body.front() == '{') {
        json j;
        try {
            j = json::parse(body);
        } catch (const json::parse_error& e) {
            throw ConfigError(std::string("config JSON: ") + e.what());
        }
        for (auto it = j.begin(); it != j.end(); ++it) {
            const auto& v = it.value();
            std::string s;
            if (v.is_string()) {
                s = v.get<std::string>();
            } else if (v.is_array()) {
                for (size_t k = 0; k < v.size(); ++k) {
                    if (k) s += ",";
                    s += v[k].is_string() ? v[k].get<std::string>() : v[k].dump();
                }
            } else {
                s = v.dump();
            }
            set(it.key(), s);
        }
        return;
    }
    std::istringstream in(body);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
        set(trim(line.substr(0, eq)), line.substr(eq + 1));
    }
}

void ExperimentConfig::merge_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    merge_text(ss.str());
}

const std::string& ExperimentConfig::get(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("missing config key '" + key + "'");
    return it->second;
}

double ExperimentConfig::number(const std::string& key) const {
    const auto& s = get(key);
    try {
        size_t used = 0;
        double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "' = '" + s + "' is not a number");
    }
}

long ExperimentConfig::integer(const std::string& key) const {
    const auto& s = get(key);
    try {
        size_t used = 0;
        long v = std::stol(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "' = '" + s + "' is not an integer");
    }
}

std::vector<double> ExperimentConfig::list(const std::string& key) const {
    std::vector<double> out;
    std::stringstream ss(get(key));
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) continue;
        try {
            size_t used = 0;
            out.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw ConfigError("config key '" + key + "' has non-numeric entry '" + item + "'");
        }
    }
    return out;
}

std::string ExperimentConfig::to_text() const {
    std::string out = "# " + experiment_ + "\n";
    for (const auto& [k, v] : values_) out += k + " = " + v + "\n";
    return out;
}

void ExperimentConfig::validate() const {
    if (integer("samples") < 100) throw ConfigError("samples must be at least 100");
    if (integer("substeps") < 1) throw ConfigError("substeps must be positive");
    if (integer("seed") < 0) throw ConfigError("seed must be non-negative");
    if (!(number("threshold") > 0.0)) throw ConfigError("threshold must be positive");
    try {
        parse_group(get("group"));
    } catch (const std::exception& e) {
        throw ConfigError("group: " + std::string(e.what()));
    }
}

// ---- records ----

std::string record_json(const ResultRecord& r) {
    json j;
    j["experiment"] = r.experiment;
    j["label"] = r.label;
    j["group"] = r.group;
    j["params"] = r.params;
    j["lhs"] = r.lhs.mean.real();
    j["lhs_im"] = r.lhs.mean.imag();
    j["lhs_stderr"] = r.lhs.stderr_;
    j["rhs"] = r.rhs.mean.real();
    j["rhs_im"] = r.rhs.mean.imag();
    j["rhs_stderr"] = r.rhs.stderr_;
    j["stderr"] = r.stderr_;
    j["z"] = r.z;
    j["threshold"] = r.threshold;
    j["tolerance"] = r.tolerance;
    j["pass"] = r.pass;
    j["n"] = r.n;
    j["seed"] = r.seed;
    return j.dump();
}

std::string csv_header() {
    return "experiment,label,group,lhs,lhs_im,lhs_stderr,rhs,rhs_im,rhs_stderr,stderr,z,threshold,tolerance,pass,n,seed";
}

std::string csv_row(const ResultRecord& r) {
    std::string out = r.experiment + ",\"" + r.label + "\"," + r.group;
    for (double v : {r.lhs.mean.real(), r.lhs.mean.imag(), r.lhs.stderr_, r.rhs.mean.real(), r.rhs.mean.imag(),
                     r.rhs.stderr_, r.stderr_, r.z, r.threshold, r.tolerance})
        out += "," + fmt_double(v);
    out += std::string(",") + (r.pass ? "true" : "false") + "," + std::to_string(r.n) + "," + std::to_string(r.seed);
    return out;
}

bool ExperimentRun::pass() const {
    return !records.empty() && std::all_of(records.begin(), records.end(), [](const auto& r) { return r.pass; });
}

ExperimentRun run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    const auto start = std::chrono::steady_clock::now();
    Context c(cfg);
    const auto& name = cfg.experiment();
    ExperimentRun run;
    if (name == "wilson-decay")
        run.records = wilson_decay_experiment(c);
    else if (name == "mm-check")
        run.records = mm_check_experiment(c);
    else if (name == "mm-deformation")
        run.records = mm_deformation_experiment(c);
    else if (name == "ibp-check")
        run.records = ibp_experiment(c);
    else if (name == "girsanov-check")
        run.records = girsanov_experiment(c);
    else if (name == "loop-expansion")
        run.records = loop_expansion_experiment(c);
    else if (name == "smooth-lab")
        run.records = smooth_lab_experiment(c);
    else if (name == "smooth-loop")
        run.records = smooth_loop_experiment(c);
    else if (name == "oracle-vs-field")
        run.records = oracle_vs_field_experiment(c);
    else
        throw ConfigError("unknown experiment '" + name + "'");
    run.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return run;
}

SweepResult run_sweep(const ExperimentConfig& cfg, const std::string& param, const std::vector<double>& values,
                      const std::string& metric, double min_slope, double max_slope) {
    if (!cfg.has(param)) throw ConfigError("sweep parameter '" + param + "' is not a key of " + cfg.experiment());
    if (values.size() < 3) throw ConfigError("sweep needs at least 3 values");
    bool inc = true, dec = true;
    for (size_t k = 1; k < values.size(); ++k) {
        inc = inc && values[k] > values[k - 1];
        dec = dec && values[k] < values[k - 1];
    }
    if (!inc && !dec) throw ConfigError("sweep values must be strictly monotone");
    if (metric != "gap" && metric != "stderr" && metric != "stderr2" && metric != "lhs")
        throw ConfigError("sweep metric must be gap, stderr, stderr2 or lhs");

    SweepResult out;
    out.param = param;
    out.metric = metric;
    out.values = values;
    for (double v : values) {
        ExperimentConfig c = cfg;
        c.set(param, fmt_double(v));
        auto run = run_experiment(c);
        const auto& last = run.records.back();
        double m = 0.0;
        if (metric == "gap")
            m = std::abs(last.lhs.mean - last.rhs.mean);
        else if (metric == "stderr")
            m = last.stderr_;
        else if (metric == "stderr2")
            m = last.stderr_ * last.stderr_;
        else
            m = std::abs(last.lhs.mean);
        out.metrics.push_back(m);
        for (auto& r : run.records) out.records.push_back(std::move(r));
    }
    out.fit = fit_loglog(values, out.metrics);
    out.band_lo = out.fit.slope - 2.0 * out.fit.slope_stderr;
    out.band_hi = out.fit.slope + 2.0 * out.fit.slope_stderr;
    out.pass = (std::isnan(min_slope) || out.fit.slope >= min_slope) &&
               (std::isnan(max_slope) || out.fit.slope <= max_slope);

    ResultRecord r;
    r.experiment = cfg.experiment();
    r.label = metric + " slope in " + param;
    r.group = cfg.get("group");
    r.params = cfg.values();
    r.lhs = {out.fit.slope, out.fit.slope_stderr, static_cast<long>(values.size())};
    r.rhs = MCEstimate::exact(std::isnan(min_slope) ? (std::isnan(max_slope) ? 0.0 : max_slope) : min_slope);
    r.stderr_ = out.fit.slope_stderr;
    r.pass = out.pass;
    r.n = cfg.integer("samples");
    r.seed = static_cast<std::uint64_t>(cfg.integer("seed"));
    out.records.push_back(r);
    return out;
}

}  // namespace ym2
