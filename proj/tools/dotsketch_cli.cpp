// Command-line front end: synth, run, sweep, report.

#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dotsketch/csv.hpp"
#include "dotsketch/harness.hpp"

namespace fs = std::filesystem;
using namespace dotsketch;

namespace {

fs::path output_root(const std::string& requested) {
    if (!requested.empty()) return requested;
    if (const char* env = std::getenv("DOTSKETCH_OUT")) return env;
    return "out";
}

ExperimentConfig build_config(const std::string& file, const std::vector<std::string>& overrides) {
    ExperimentConfig c = file.empty() ? ExperimentConfig{} : load_config(file);
    for (const auto& kv : overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw std::invalid_argument("--set expects key=value, got " + kv);
        apply_setting(c, kv.substr(0, eq), kv.substr(eq + 1));
    }
    c.validate();
    return c;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
}

std::vector<std::string> split(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream in(s);
    std::string tok;
    while (std::getline(in, tok, ',')) {
        if (!tok.empty()) out.push_back(tok);
    }
    return out;
}

void print_report_row(const std::string& name, const std::map<std::string, std::string>& kv) {
    auto get = [&](const char* k) {
        auto it = kv.find(k);
        return it == kv.end() ? std::string("-") : it->second;
    };
    std::cout << std::left << std::setw(28) << name << std::setw(13) << get("mode") << std::setw(4)
              << (get("mode") == "saa_replace" ? get("replace_count") : "-") << std::setw(12) << get("mean_iterations").substr(0, 10) << std::setw(12)
              << get("mean_function_evals").substr(0, 10) << std::setw(12)
              << get("mean_jacobian_evals").substr(0, 10) << std::setw(12) << get("mean_solves").substr(0, 10)
              << std::setw(12) << get("convergence_rate").substr(0, 6) << std::setw(12)
              << get("true_tolerance_rate").substr(0, 6) << get("mean_underestimation_ratio").substr(0, 6) << '\n';
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Sketched optical tomography experiments"};
    app.require_subcommand(1);

    std::string config_file;
    std::vector<std::string> overrides;
    std::string out_dir;

    auto* synth = app.add_subcommand("synth", "Write the phantom and synthetic data");
    auto* run = app.add_subcommand("run", "Run one trial");
    auto* sweep = app.add_subcommand("sweep", "Run all trials for several modes and replacement counts");
    auto* report = app.add_subcommand("report", "Tabulate aggregate summaries below a directory");

    for (auto* sc : {synth, run, sweep}) {
        sc->add_option("-c,--config", config_file, "key = value config file");
        sc->add_option("-s,--set", overrides, "override one setting, key=value");
        sc->add_option("-o,--out", out_dir, "output directory (default $DOTSKETCH_OUT or ./out)");
    }
    std::uint64_t seed = 0;
    bool seed_given = false;
    run->add_option("--seed", seed, "sketch seed for this trial")->each([&](const std::string&) { seed_given = true; });

    std::string modes = "full,saa,saa_replace,sa";
    std::string replace = "";
    sweep->add_option("--modes", modes, "comma-separated run modes");
    sweep->add_option("--replace", replace, "comma-separated replacement counts for saa_replace");

    std::string report_dir;
    report->add_option("dir", report_dir, "directory to scan")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*synth) {
            const ExperimentConfig c = build_config(config_file, overrides);
            const ExperimentSetup s = make_setup(c);
            const fs::path dir = output_root(out_dir) / "synth";
            fs::create_directories(dir);
            const Eigen::MatrixXd truth = Eigen::Map<const Eigen::MatrixXd>(s.truth.data(), c.nx, c.ny).transpose();
            write_matrix_csv(dir / "truth.csv", truth);
            write_pgm(dir / "truth.pgm", s.truth, c.nx, c.ny, s.truth.minCoeff(), s.truth.maxCoeff());
            write_matrix_csv(dir / "data_clean.csv", s.data.clean);
            write_matrix_csv(dir / "data.csv", s.data.measured);
            write_text(dir / "config.txt", format_config(c));
            std::cout << "wrote " << dir.string() << '\n';
        } else if (*run) {
            const ExperimentConfig c = build_config(config_file, overrides);
            const ExperimentSetup s = make_setup(c);
            const RunReport r = run_trial(s, seed_given ? seed : c.sketch_seed);
            const fs::path dir = output_root(out_dir) / (std::string("run_") + to_string(c.mode));
            emit_outputs(r, dir);
            write_text(dir / "config.txt", format_config(c));
            std::cout << "status=" << r.status << " iterations=" << r.iterations << " solves=" << r.total_solves()
                      << " final_estimated=" << r.history.back().estimated
                      << " final_true=" << r.final_true_misfit() << '\n'
                      << "wrote " << dir.string() << '\n';
        } else if (*sweep) {
            const ExperimentConfig base = build_config(config_file, overrides);
            const ExperimentSetup setup = make_setup(base);
            const fs::path root = output_root(out_dir) / "sweep";
            std::vector<int> counts;
            for (const auto& t : split(replace)) counts.push_back(std::stoi(t));
            if (counts.empty()) counts.push_back(base.replace_count);
            for (const auto& m : split(modes)) {
                const RunMode mode = parse_run_mode(m);
                const std::vector<int> ss = mode == RunMode::saa_replace ? counts : std::vector<int>{0};
                for (int s : ss) {
                    ExperimentSetup local;
                    local.config = base;
                    local.config.mode = mode;
                    if (mode == RunMode::saa_replace) local.config.replace_count = s;
                    local.config.validate();
                    // share model, truth and data across runs
                    local.model = std::make_unique<DotModel>(*setup.model);
                    local.truth = setup.truth;
                    local.data = setup.data;
                    const AggregateReport a = run_experiment(local);
                    const std::string name = std::string(to_string(mode)) + (mode == RunMode::saa_replace
                                                                                 ? "_s" + std::to_string(s)
                                                                                 : "");
                    emit_aggregate(a, root / name);
                    std::cout << name << ": mean_iterations=" << a.mean_iterations
                              << " mean_solves=" << a.mean_solves << " convergence_rate=" << a.convergence_rate
                              << '\n';
                }
            }
        } else if (*report) {
            std::cout << std::left << std::setw(28) << "run" << std::setw(13) << "mode" << std::setw(4) << "s"
                      << std::setw(12) << "iters" << std::setw(12) << "F" << std::setw(12) << "J" << std::setw(12)
                      << "solves" << std::setw(12) << "conv" << std::setw(12) << "true_tol" << "under" << '\n';
            std::vector<fs::path> found;
            for (const auto& e : fs::recursive_directory_iterator(report_dir)) {
                if (e.is_regular_file() && e.path().filename() == "summary.txt") found.push_back(e.path());
            }
            std::sort(found.begin(), found.end());
            for (const auto& p : found) {
                const auto kv = read_summary(p);
                if (!kv.count("mean_iterations")) continue;
                print_report_row(fs::relative(p.parent_path(), report_dir).string(), kv);
            }
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
