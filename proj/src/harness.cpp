#include "dotsketch/harness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>

#include "dotsketch/csv.hpp"

namespace dotsketch {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace fs = std::filesystem;

const char* to_string(RunMode mode) {
    switch (mode) {
        case RunMode::full: return "full";
        case RunMode::saa: return "saa";
        case RunMode::saa_replace: return "saa_replace";
        case RunMode::sa: return "sa";
    }
    return "unknown";
}

const char* to_string(StopMetric metric) {
    switch (metric) {
        case StopMetric::estimated: return "estimated";
        case StopMetric::audited: return "audited";
        case StopMetric::either: return "either";
    }
    return "unknown";
}

const char* to_string(PhantomKind kind) {
    switch (kind) {
        case PhantomKind::cup: return "cup";
        case PhantomKind::multi_blob: return "multi_blob";
        case PhantomKind::amoeba: return "amoeba";
    }
    return "unknown";
}

RunMode parse_run_mode(const std::string& s) {
    if (s == "full") return RunMode::full;
    if (s == "saa") return RunMode::saa;
    if (s == "saa_replace") return RunMode::saa_replace;
    if (s == "sa") return RunMode::sa;
    throw std::invalid_argument("unknown mode: " + s);
}

StopMetric parse_stop_metric(const std::string& s) {
    if (s == "estimated") return StopMetric::estimated;
    if (s == "audited") return StopMetric::audited;
    if (s == "either") return StopMetric::either;
    throw std::invalid_argument("unknown stop metric: " + s);
}

PhantomKind parse_phantom_kind(const std::string& s) {
    if (s == "cup") return PhantomKind::cup;
    if (s == "multi_blob") return PhantomKind::multi_blob;
    if (s == "amoeba") return PhantomKind::amoeba;
    throw std::invalid_argument("unknown phantom: " + s);
}

// ---------------------------------------------------------------------------
// configuration

void ExperimentConfig::validate() const {
    if (nx < 3 || ny < 3) throw std::invalid_argument("grid needs at least 3 x 3 nodes");
    if (!(half_width > 0.0) || !(depth > 0.0)) throw std::invalid_argument("domain extents must be positive");
    if (n_sources < 1 || n_sources > nx - 2) throw std::invalid_argument("n_sources must be in [1, nx-2]");
    if (n_detectors < 1 || n_detectors > nx - 2) throw std::invalid_argument("n_detectors must be in [1, nx-2]");
    if (!(diffusion > 0.0)) throw std::invalid_argument("diffusion must be positive");
    if (mu_in < 0.0 || mu_out < 0.0) throw std::invalid_argument("absorption must be non-negative");
    if (heterogeneity < 0.0) throw std::invalid_argument("heterogeneity must be non-negative");
    if (init_grid < 1) throw std::invalid_argument("init_grid must be positive");
    if (noise < 0.0) throw std::invalid_argument("noise must be non-negative");
    if (mode != RunMode::full) {
        if (source_samples < 1 || source_samples > n_sources) throw std::invalid_argument("source_samples out of range");
        if (detector_samples < 1 || detector_samples > n_detectors) {
            throw std::invalid_argument("detector_samples out of range");
        }
    }
    if (mode == RunMode::saa_replace &&
        (replace_count < 0 || replace_count >= std::min(source_samples, detector_samples))) {
        throw std::invalid_argument("replace_count must be in [0, min(source_samples, detector_samples))");
    }
    if (max_iterations < 0) throw std::invalid_argument("max_iterations must be non-negative");
    if (!(initial_radius > 0.0)) throw std::invalid_argument("initial_radius must be positive");
    if (!(gcv_weight > 0.0 && gcv_weight <= 1.0)) throw std::invalid_argument("gcv_weight must be in (0, 1]");
    if (trials < 1) throw std::invalid_argument("trials must be positive");
    pals_model(*this).validate();
}

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
    std::istringstream in(value);
    T out{};
    in >> out;
    if (!in || !(in >> std::ws).eof()) throw std::invalid_argument("bad value for " + key + ": " + value);
    return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1" || value == "yes") return true;
    if (value == "false" || value == "0" || value == "no") return false;
    throw std::invalid_argument("bad boolean for " + key + ": " + value);
}

std::string fmt(double v) {
    std::ostringstream out;
    out << std::setprecision(17) << v;
    return out.str();
}

}  // namespace

void apply_setting(ExperimentConfig& c, const std::string& key, const std::string& value) {
    auto i = [&](int& f) { f = parse_number<int>(key, value); };
    auto d = [&](double& f) { f = parse_number<double>(key, value); };
    auto u = [&](std::uint64_t& f) { f = parse_number<std::uint64_t>(key, value); };

    if (key == "nx") i(c.nx);
    else if (key == "ny") i(c.ny);
    else if (key == "half_width") d(c.half_width);
    else if (key == "depth") d(c.depth);
    else if (key == "n_sources") i(c.n_sources);
    else if (key == "n_detectors") i(c.n_detectors);
    else if (key == "diffusion") d(c.diffusion);
    else if (key == "mu_in") d(c.mu_in);
    else if (key == "mu_out") d(c.mu_out);
    else if (key == "heterogeneity") d(c.heterogeneity);
    else if (key == "speed_of_light") d(c.speed_of_light);
    else if (key == "phantom") c.phantom = parse_phantom_kind(value);
    else if (key == "init_grid") i(c.init_grid);
    else if (key == "gamma") d(c.gamma);
    else if (key == "epsilon") d(c.epsilon);
    else if (key == "tau") d(c.tau);
    else if (key == "init_alpha") d(c.init_alpha);
    else if (key == "init_beta") d(c.init_beta);
    else if (key == "noise") d(c.noise);
    else if (key == "data_seed") u(c.data_seed);
    else if (key == "mode") c.mode = parse_run_mode(value);
    else if (key == "source_samples") i(c.source_samples);
    else if (key == "detector_samples") i(c.detector_samples);
    else if (key == "replace_count") i(c.replace_count);
    else if (key == "stop_on") c.stop_on = parse_stop_metric(value);
    else if (key == "audit") c.audit = parse_bool(key, value);
    else if (key == "max_iterations") i(c.max_iterations);
    else if (key == "initial_radius") d(c.initial_radius);
    else if (key == "gcv_weight") d(c.gcv_weight);
    else if (key == "step_rule") c.step_rule = parse_step_rule(value);
    else if (key == "sketch_seed") u(c.sketch_seed);
    else if (key == "trials") i(c.trials);
    else if (key == "solver") {
        if (value == "direct") c.solver = SolverOptions::Method::direct;
        else if (value == "iterative") c.solver = SolverOptions::Method::iterative;
        else throw std::invalid_argument("unknown solver: " + value);
    } else {
        throw std::invalid_argument("unknown config key: " + key);
    }
}

ExperimentConfig parse_config(const std::string& text) {
    ExperimentConfig c;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected key = value");
        }
        apply_setting(c, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    c.validate();
    return c;
}

ExperimentConfig load_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

std::map<std::string, std::string> ExperimentConfig::to_map() const {
    std::map<std::string, std::string> m;
    m["nx"] = std::to_string(nx);
    m["ny"] = std::to_string(ny);
    m["half_width"] = fmt(half_width);
    m["depth"] = fmt(depth);
    m["n_sources"] = std::to_string(n_sources);
    m["n_detectors"] = std::to_string(n_detectors);
    m["diffusion"] = fmt(diffusion);
    m["mu_in"] = fmt(mu_in);
    m["mu_out"] = fmt(mu_out);
    m["heterogeneity"] = fmt(heterogeneity);
    m["speed_of_light"] = fmt(speed_of_light);
    m["phantom"] = to_string(phantom);
    m["init_grid"] = std::to_string(init_grid);
    m["gamma"] = fmt(gamma);
    m["epsilon"] = fmt(epsilon);
    m["tau"] = fmt(tau);
    m["init_alpha"] = fmt(init_alpha);
    m["init_beta"] = fmt(init_beta);
    m["noise"] = fmt(noise);
    m["data_seed"] = std::to_string(data_seed);
    m["mode"] = to_string(mode);
    m["source_samples"] = std::to_string(source_samples);
    m["detector_samples"] = std::to_string(detector_samples);
    m["replace_count"] = std::to_string(replace_count);
    m["stop_on"] = to_string(stop_on);
    m["audit"] = audit ? "true" : "false";
    m["max_iterations"] = std::to_string(max_iterations);
    m["initial_radius"] = fmt(initial_radius);
    m["gcv_weight"] = fmt(gcv_weight);
    m["step_rule"] = dotsketch::to_string(step_rule);
    m["sketch_seed"] = std::to_string(sketch_seed);
    m["trials"] = std::to_string(trials);
    m["solver"] = solver == SolverOptions::Method::direct ? "direct" : "iterative";
    return m;
}

std::string format_config(const ExperimentConfig& config) {
    std::ostringstream out;
    for (const auto& [k, v] : config.to_map()) out << k << " = " << v << '\n';
    return out.str();
}

// ---------------------------------------------------------------------------
// phantoms and data

namespace {

bool inside_triangle(double x, double y, const Eigen::Vector2d& a, const Eigen::Vector2d& b,
                     const Eigen::Vector2d& c) {
    auto side = [](const Eigen::Vector2d& p, const Eigen::Vector2d& q, double px, double py) {
        return (q.x() - p.x()) * (py - p.y()) - (q.y() - p.y()) * (px - p.x());
    };
    const double d1 = side(a, b, x, y);
    const double d2 = side(b, c, x, y);
    const double d3 = side(c, a, x, y);
    const bool neg = d1 < 0 || d2 < 0 || d3 < 0;
    const bool pos = d1 > 0 || d2 > 0 || d3 > 0;
    return !(neg && pos);
}

// Shapes are laid out on the unit-depth reference box [-1, 1] x [0, 1] and
// scaled to the actual domain.
bool in_shape(PhantomKind kind, double u, double v) {
    switch (kind) {
        case PhantomKind::cup: {
            const double dx = u, dy = v - 0.5;
            const bool disk = dx * dx + dy * dy <= 0.3 * 0.3;
            const bool notch = std::abs(dx) <= 0.1 && dy <= 0.0 && dy >= -0.3;
            return disk && !notch;
        }
        case PhantomKind::multi_blob: {
            const bool tri = inside_triangle(u, v, {-0.65, 0.65}, {-0.15, 0.65}, {-0.4, 0.25});
            const double dx = u - 0.4, dy = v - 0.5;
            return tri || dx * dx + dy * dy <= 0.2 * 0.2;
        }
        case PhantomKind::amoeba: {
            const double dx = u, dy = v - 0.5;
            const double r = std::hypot(dx, dy);
            const double th = std::atan2(dy, dx);
            const double rb = 0.3 * (1.0 + 0.25 * std::sin(3.0 * th) + 0.1 * std::cos(5.0 * th));
            return r <= rb;
        }
    }
    return false;
}

}  // namespace

VectorXd phantom_mask(PhantomKind kind, const Grid2D& grid) {
    VectorXd m(grid.size());
    const double a = grid.x(grid.nx() - 1);
    const double c = grid.y(grid.ny() - 1);
    for (int j = 0; j < grid.ny(); ++j) {
        for (int i = 0; i < grid.nx(); ++i) {
            m(grid.node(i, j)) = in_shape(kind, grid.x(i) / a, grid.y(j) / c) ? 1.0 : 0.0;
        }
    }
    return m;
}

VectorXd synth_phantom(PhantomKind kind, const Grid2D& grid, double mu_in, double mu_out, double heterogeneity,
                       std::uint64_t seed) {
    const VectorXd mask = phantom_mask(kind, grid);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    VectorXd mu(grid.size());
    for (Index n = 0; n < mu.size(); ++n) {
        const double base = mask(n) > 0.5 ? mu_in : mu_out;
        mu(n) = std::max(0.0, base * (1.0 + heterogeneity * normal(rng)));
    }
    return mu;
}

SyntheticData gen_data(const DotModel& model, const VectorXd& truth, double delta, std::uint64_t seed) {
    SyntheticData d;
    d.clean = model.measure_absorption(truth);
    d.noise = MatrixXd::Zero(d.clean.rows(), d.clean.cols());
    if (delta > 0.0) {
        std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
        std::normal_distribution<double> normal(0.0, 1.0);
        for (Index k = 0; k < d.noise.size(); ++k) d.noise.data()[k] = normal(rng);
        d.noise *= delta * d.clean.norm() / d.noise.norm();
    }
    d.measured = d.clean + d.noise;
    d.noise_floor = delta * delta;
    return d;
}

PalsModel pals_model(const ExperimentConfig& c) {
    PalsModel m;
    m.basis_count = c.init_grid * c.init_grid;
    m.gamma = c.gamma;
    m.epsilon = c.epsilon;
    m.tau = c.tau;
    m.mu_in = c.mu_in;
    m.mu_out = c.mu_out;
    return m;
}

ParamVector initial_guess(const ExperimentConfig& c) {
    const int g = c.init_grid;
    ParamVector p(VectorXd::Zero(4 * g * g));
    for (int j = 0; j < g; ++j) {
        for (int i = 0; i < g; ++i) {
            const double x = -c.half_width + 2.0 * c.half_width * (i + 0.5) / g;
            const double y = c.depth * (j + 0.5) / g;
            const double sign = (i + j) % 2 == 0 ? -1.0 : 1.0;
            p.set_basis(j * g + i, sign * c.init_alpha, c.init_beta, {x, y});
        }
    }
    return p;
}

DotModel make_model(const ExperimentConfig& c) {
    Grid2D grid = build_grid(c.nx, c.ny, c.half_width, c.depth);
    SourceDetectorLayout layout = place_sources_detectors(grid, c.n_sources, c.n_detectors);
    VectorXd diffusion = VectorXd::Constant(grid.size(), c.diffusion);
    SolverOptions solver;
    solver.method = c.solver;
    return DotModel(std::move(grid), std::move(layout), std::move(diffusion), pals_model(c), solver);
}

ExperimentSetup make_setup(const ExperimentConfig& config) {
    config.validate();
    ExperimentSetup s;
    s.config = config;
    s.model = std::make_unique<DotModel>(make_model(config));
    s.truth = synth_phantom(config.phantom, s.model->grid(), config.mu_in, config.mu_out, config.heterogeneity,
                            config.data_seed);
    s.data = gen_data(*s.model, s.truth, config.noise, config.data_seed);
    return s;
}

// ---------------------------------------------------------------------------
// runs

namespace {

// Normalized sketched least-squares problem: ||r||^2 equals the estimated
// misfit, so the optimizer never sees unsketched data.
class SketchedProblem final : public LeastSquaresProblem {
public:
    SketchedProblem(Objective& objective, SketchPair sketch) : objective_(objective), sketch_(std::move(sketch)) {}

    void set_sketch(SketchPair sketch) { sketch_ = std::move(sketch); }
    const SketchPair& sketch() const { return sketch_; }

    VectorXd residual(const VectorXd& p) override {
        const MatrixXd Rs = objective_.sketched_residual(ParamVector(p), sketch_);
        return factor() * Eigen::Map<const VectorXd>(Rs.data(), Rs.size());
    }

    MatrixXd jacobian(const VectorXd& p) override {
        return factor() * objective_.jacobian_sketched(ParamVector(p), sketch_);
    }

private:
    double factor() const { return std::sqrt(sketch_.estimator_scale() / objective_.data_norm2()); }

    Objective& objective_;
    SketchPair sketch_;
};

}  // namespace

double RunReport::final_true_misfit() const {
    for (auto it = history.rbegin(); it != history.rend(); ++it) {
        if (!std::isnan(it->true_misfit)) return it->true_misfit;
    }
    return std::numeric_limits<double>::quiet_NaN();
}

RunReport run_trial(const ExperimentSetup& setup, std::uint64_t trial_seed) {
    const ExperimentConfig& cfg = setup.config;
    const DotModel& model = *setup.model;
    const Index ns = model.n_sources();
    const Index nd = model.n_detectors();

    RunReport rep;
    rep.mode = cfg.mode;
    rep.seed = trial_seed;
    rep.nx = cfg.nx;
    rep.ny = cfg.ny;
    rep.n_sources = ns;
    rep.n_detectors = nd;

    const bool sketched = cfg.mode != RunMode::full;
    const bool audit = sketched && (cfg.audit || cfg.stop_on == StopMetric::audited);
    rep.source_samples = sketched ? cfg.source_samples : ns;
    rep.detector_samples = sketched ? cfg.detector_samples : nd;

    Objective objective(model, setup.data.measured, rep.ledger);
    std::uint64_t draw_counter = 0;
    auto draw = [&]() {
        return draw_sketch(ns, cfg.source_samples, nd, cfg.detector_samples, trial_seed + 7919 * draw_counter++);
    };
    SketchedProblem problem(objective, sketched ? draw() : identity_sketch(ns, nd));

    TrOptions opts;
    opts.initial_radius = cfg.initial_radius;
    opts.max_iterations = cfg.max_iterations;
    opts.step_rule = cfg.step_rule;
    opts.gcv_weight = cfg.gcv_weight;
    opts.tolerance = -1.0;  // stopping is decided here
    TrState state = make_tr_state(initial_guess(cfg).values(), opts);

    ensure_residual(problem, state);
    double true_misfit = sketched ? (audit ? objective.audit_misfit(ParamVector(state.p))
                                           : std::numeric_limits<double>::quiet_NaN())
                                  : state.misfit();
    auto push_row = [&](int iteration, double step_norm, double radius, bool accepted, long truncation) {
        HistoryRow row;
        row.iteration = iteration;
        row.estimated = state.misfit();
        row.true_misfit = true_misfit;
        row.solves = rep.ledger.totals().total();
        row.radius = radius;
        row.step_norm = step_norm;
        row.accepted = accepted;
        row.truncation = truncation;
        row.phase = rep.ledger.phase();
        rep.history.push_back(row);
        if (!std::isnan(true_misfit) && true_misfit <= cfg.final_tolerance()) rep.reached_true_tolerance = true;
    };
    push_row(0, 0.0, state.radius, true, 0);

    bool final_phase = cfg.mode != RunMode::saa_replace || cfg.replace_count == 0;
    std::string status = "max_iterations";

    for (;;) {
        if (!final_phase && state.misfit() <= cfg.intermediate_tolerance()) {
            // Full Jacobian at the current iterate drives the replacement.
            const MatrixXd J = objective.jacobian_full(ParamVector(state.p));
            rep.ledger.set_phase(SolveLedger::Phase::post_replacement);
            ReplacementResult rr = two_phase_replace(problem.sketch(), J, cfg.replace_count);
            rr.sketch.seed = problem.sketch().seed;
            rep.replacement_steps = rr.steps;
            problem.set_sketch(std::move(rr.sketch));
            state.invalidate();
            ensure_residual(problem, state);
            rep.replacement_iteration = state.iterations;
            final_phase = true;
        }
        if (final_phase) {
            const double tol = cfg.final_tolerance();
            const bool est_hit = state.misfit() <= tol;
            const bool true_hit = audit && true_misfit <= tol;
            bool hit = est_hit;
            if (sketched && cfg.stop_on == StopMetric::audited) hit = true_hit;
            if (sketched && cfg.stop_on == StopMetric::either) hit = est_hit || true_hit;
            if (hit) {
                rep.converged = true;
                status = "converged";
                break;
            }
        }
        if (state.iterations >= cfg.max_iterations) break;

        if (cfg.mode == RunMode::sa) {
            problem.set_sketch(draw());
            state.invalidate();
            ensure_residual(problem, state);
        }
        const double radius = state.radius;
        const TrStatus st = tr_iterate(problem, state, opts);
        const TrHistoryRow& tr = state.history.back();
        if (tr.accepted) {
            if (audit) true_misfit = objective.audit_misfit(ParamVector(state.p));
            else if (!sketched) true_misfit = state.misfit();
        }
        if (audit && tr.iteration > 0) {
            ++rep.audited_iterations;
            if (state.misfit() < true_misfit) ++rep.underestimates;
        }
        push_row(tr.iteration, tr.step_norm, radius, tr.accepted, static_cast<long>(tr.truncation));
        if (st == TrStatus::radius_collapsed || st == TrStatus::null_step) {
            status = to_string(st);
            break;
        }
    }

    rep.status = status;
    rep.iterations = state.iterations;
    rep.params = state.p;
    rep.image = model.absorption(ParamVector(state.p));
    rep.sketch = problem.sketch();
    return rep;
}

AggregateReport aggregate(const ExperimentConfig& config, std::vector<RunReport> trials) {
    AggregateReport a;
    a.config = config;
    a.trials = std::move(trials);
    const double n = static_cast<double>(a.trials.size());
    if (a.trials.empty()) return a;
    for (const auto& t : a.trials) {
        const auto tot = t.ledger.totals();
        a.mean_iterations += t.iterations / n;
        a.mean_function_evals += tot.function_evals / n;
        a.mean_jacobian_evals += tot.jacobian_evals / n;
        a.mean_solves += tot.total() / n;
        a.mean_underestimation_ratio += t.underestimation_ratio() / n;
        a.mean_underestimates += t.underestimates / n;
        a.mean_audited_iterations += t.audited_iterations / n;
        a.convergence_rate += (t.converged ? 1.0 : 0.0) / n;
        a.true_tolerance_rate += (t.reached_true_tolerance ? 1.0 : 0.0) / n;
    }
    return a;
}

AggregateReport run_experiment(const ExperimentSetup& setup) {
    std::vector<RunReport> trials;
    for (int t = 0; t < setup.config.trials; ++t) trials.push_back(run_trial(setup, setup.config.sketch_seed + t));
    return aggregate(setup.config, std::move(trials));
}

AggregateReport run_experiment(const ExperimentConfig& config) { return run_experiment(make_setup(config)); }

// ---------------------------------------------------------------------------
// outputs

void write_pgm(const fs::path& path, const VectorXd& field, int nx, int ny, double lo, double hi) {
    if (field.size() != static_cast<Index>(nx) * ny) throw std::invalid_argument("write_pgm: size mismatch");
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << "P2\n" << nx << ' ' << ny << "\n255\n";
    const double span = hi > lo ? hi - lo : 1.0;
    for (int j = 0; j < ny; ++j) {
        for (int i = 0; i < nx; ++i) {
            const double t = std::clamp((field(j * nx + i) - lo) / span, 0.0, 1.0);
            out << static_cast<int>(std::lround(255.0 * t)) << (i + 1 < nx ? ' ' : '\n');
        }
    }
}

namespace {

void write_summary(const fs::path& path, const std::map<std::string, std::string>& kv) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    for (const auto& [k, v] : kv) out << k << '=' << v << '\n';
}

void add_counts(std::map<std::string, std::string>& kv, const std::string& prefix, const SolveLedger::Counts& c) {
    kv[prefix + "forward_solves"] = std::to_string(c.forward_solves);
    kv[prefix + "adjoint_solves"] = std::to_string(c.adjoint_solves);
    kv[prefix + "function_evals"] = std::to_string(c.function_evals);
    kv[prefix + "jacobian_evals"] = std::to_string(c.jacobian_evals);
    kv[prefix + "full_jacobian_events"] = std::to_string(c.full_jacobian_events);
    kv[prefix + "solves"] = std::to_string(c.total());
}

}  // namespace

void emit_outputs(const RunReport& r, const fs::path& dir) {
    fs::create_directories(dir);
    {
        std::ofstream out(dir / "history.csv");
        out << std::setprecision(17);
        out << "iteration,estimated_misfit,true_misfit,solves,radius,step_norm,accepted,truncation,phase\n";
        for (const auto& h : r.history) {
            out << h.iteration << ',' << h.estimated << ',';
            if (std::isnan(h.true_misfit)) out << "nan";
            else out << h.true_misfit;
            out << ',' << h.solves << ',' << h.radius << ',' << h.step_norm << ',' << (h.accepted ? 1 : 0) << ',' << h.truncation << ','
                << (h.phase == SolveLedger::Phase::pre_replacement ? "pre" : "post") << '\n';
        }
    }
    const MatrixXd img = Eigen::Map<const MatrixXd>(r.image.data(), r.nx, r.ny).transpose();
    write_matrix_csv(dir / "image.csv", img);
    write_pgm(dir / "image.pgm", r.image, r.nx, r.ny, r.image.minCoeff(), r.image.maxCoeff());
    write_matrix_csv(dir / "params.csv", MatrixXd(r.params));
    write_sketch_csv(r.sketch, dir);

    std::map<std::string, std::string> kv;
    kv["mode"] = to_string(r.mode);
    kv["seed"] = std::to_string(r.seed);
    kv["status"] = r.status;
    kv["converged"] = r.converged ? "true" : "false";
    kv["reached_true_tolerance"] = r.reached_true_tolerance ? "true" : "false";
    kv["iterations"] = std::to_string(r.iterations);
    kv["replacement_iteration"] = std::to_string(r.replacement_iteration);
    kv["final_estimated_misfit"] = fmt(r.history.empty() ? 0.0 : r.history.back().estimated);
    kv["final_true_misfit"] = fmt(r.final_true_misfit());
    kv["underestimates"] = std::to_string(r.underestimates);
    kv["audited_iterations"] = std::to_string(r.audited_iterations);
    kv["audit_solves"] = std::to_string(r.ledger.audit_solves());
    kv["source_samples"] = std::to_string(r.source_samples);
    kv["detector_samples"] = std::to_string(r.detector_samples);
    kv["n_sources"] = std::to_string(r.n_sources);
    kv["n_detectors"] = std::to_string(r.n_detectors);
    add_counts(kv, "", r.ledger.totals());
    add_counts(kv, "pre_", r.ledger.counts(SolveLedger::Phase::pre_replacement));
    add_counts(kv, "post_", r.ledger.counts(SolveLedger::Phase::post_replacement));
    write_summary(dir / "summary.txt", kv);
}

void emit_aggregate(const AggregateReport& a, const fs::path& dir) {
    fs::create_directories(dir);
    for (std::size_t t = 0; t < a.trials.size(); ++t) {
        emit_outputs(a.trials[t], dir / ("trial_" + std::to_string(t)));
    }
    std::map<std::string, std::string> kv = a.config.to_map();
    kv["trials_run"] = std::to_string(a.trials.size());
    kv["mean_iterations"] = fmt(a.mean_iterations);
    kv["mean_function_evals"] = fmt(a.mean_function_evals);
    kv["mean_jacobian_evals"] = fmt(a.mean_jacobian_evals);
    kv["mean_solves"] = fmt(a.mean_solves);
    kv["mean_underestimation_ratio"] = fmt(a.mean_underestimation_ratio);
    kv["mean_underestimates"] = fmt(a.mean_underestimates);
    kv["mean_audited_iterations"] = fmt(a.mean_audited_iterations);
    kv["convergence_rate"] = fmt(a.convergence_rate);
    kv["true_tolerance_rate"] = fmt(a.true_tolerance_rate);
    write_summary(dir / "summary.txt", kv);
}

std::map<std::string, std::string> read_summary(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::map<std::string, std::string> kv;
    std::string line;
    while (std::getline(in, line)) {
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    return kv;
}

}  // namespace dotsketch
