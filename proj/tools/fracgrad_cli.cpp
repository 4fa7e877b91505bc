// fracgrad command line: optimize | train | sweep.

#include "fracgrad/bench_data.hpp"
#include "fracgrad/errors.hpp"
#include "fracgrad/experiment.hpp"
#include "fracgrad/fgd_optimizer.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>

using namespace fracgrad;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitNumeric = 1;
constexpr int kExitUsage = 2;

const char* kSchemas = R"(Output files (columns are stable within a major version):
  optimize  <out>/trajectory.csv   iteration,value,gradient_norm,update_norm,k1..kd
            <out>/summary.json     function, cfg, converged, diverged, iterations,
                                   final_point, final_value, distance_to_minimum,
                                   escaped (doublewell only)
  train     <out>/runs/alpha<a>_M<m>_seed<s>_iterations.csv
                                   iteration,epoch,loss,train_accuracy,test_accuracy,
                                   test_loss,alpha,M,seed
            <out>/runs/alpha<a>_M<m>_seed<s>_epochs.json
                                   epoch, mean_loss, train_accuracy, test_accuracy,
                                   test_loss, seconds (cumulative wall clock)
            <out>/summary.json     cfg, per-seed finals, averages
            <out>/checkpoints/seed<s>/model.json + model.bin
  sweep     <out>/sweep_matrix.csv panel,M,alpha=<a>,...  (panels: train, test)
            <out>/sweep_runs.csv   alpha,M,seed,status,final_loss,train_accuracy,
                                   test_accuracy,seconds
Exit codes: 0 all runs finite, 1 numeric failure, 2 usage error.
FRACGRAD_THREADS caps worker threads for train and sweep.)";

struct FgdFlags {
    double alpha = 0.9;
    int terms = 1;
    double mu = 0.1;
    double phi = 1e-8;
    double momentum = 0.0;
    std::string gradient_point = "current";

    void add_to(CLI::App& app) {
        app.add_option("--alpha", alpha, "fractional order in (0, 1]")->capture_default_str();
        app.add_option("--M", terms, "series terms")->capture_default_str();
        app.add_option("--mu", mu, "learning rate")->capture_default_str();
        app.add_option("--phi", phi, "step-size guard")->capture_default_str();
        app.add_option("--momentum", momentum, "velocity decay, 0 disables")->capture_default_str();
        app.add_option("--gradient-point", gradient_point, "current|previous")->capture_default_str();
    }

    FgdConfig build() const {
        FgdConfig cfg;
        cfg.alpha = alpha;
        cfg.terms = terms;
        cfg.mu = mu;
        cfg.phi = phi;
        cfg.momentum = momentum;
        cfg.gradient_point = parse_gradient_point(gradient_point);
        cfg.validate();
        return cfg;
    }
};

struct TrainFlags {
    std::size_t epochs = 6;
    std::size_t batch = 10;
    std::vector<std::uint64_t> seeds{1};
    std::string dataset = "synth:400";
    std::string net = "toy";
    std::string out = "out";
    std::string loss = "standard";
    std::uint64_t data_seed = 1;
    double noise = 0.2;
    std::size_t image_side = 224;
    std::size_t eval_every = 1;

    void add_to(CLI::App& app) {
        app.add_option("--epochs", epochs)->capture_default_str();
        app.add_option("--batch", batch, "batch size m")->capture_default_str();
        app.add_option("--seeds", seeds, "comma-separated seeds")->delimiter(',')->capture_default_str();
        app.add_option("--dataset", dataset, "synth:<n> or folder:<manifest.csv>")->capture_default_str();
        app.add_option("--net", net, "toy|vgg16")->capture_default_str();
        app.add_option("--out", out, "output directory")->capture_default_str();
        app.add_option("--loss", loss, "standard|as-printed")->capture_default_str();
        app.add_option("--data-seed", data_seed, "seed of the synthetic dataset")->capture_default_str();
        app.add_option("--noise", noise, "pixel noise of the synthetic dataset")->capture_default_str();
        app.add_option("--image-side", image_side, "resize target for folder datasets")->capture_default_str();
        app.add_option("--eval-every", eval_every, "test evaluation period in iterations")->capture_default_str();
    }

    RunConfig build(const FgdConfig& fgd) const {
        RunConfig rc;
        rc.fgd = fgd;
        rc.epochs = epochs;
        rc.batch = batch;
        rc.seeds = seeds;
        rc.dataset = dataset;
        rc.net = net;
        rc.out = out;
        rc.loss = parse_loss_form(loss);
        rc.data_seed = data_seed;
        rc.noise = noise;
        rc.image_side = image_side;
        rc.eval_every = eval_every;
        rc.validate();
        return rc;
    }
};

std::size_t thread_count(std::size_t requested) { return requested ? requested : default_thread_count(); }

int cmd_optimize(const FgdConfig& cfg, const std::string& fn, double tol, std::size_t max_iter,
                 const std::vector<double>& x0, std::uint64_t seed, const std::string& derivs,
                 const std::filesystem::path& out) {
    const AnalyticFunction f = find_test_function(fn);
    const bool doublewell = fn == "doublewell";
    DerivativeSource source;
    if (derivs == "analytic") source = DerivativeSource::analytic;
    else if (derivs == "history") source = DerivativeSource::history;
    else throw ArgumentError("--derivs must be analytic or history");

    Tensor start(f.point_shape(), 10.0);
    if (!x0.empty()) {
        if (x0.size() != start.size())
            throw ArgumentError(fn + " takes " + std::to_string(start.size()) + " coordinates in --x0");
        start = Tensor(f.point_shape(), x0);
    } else if (doublewell) {
        start = Tensor::of({shallow_basin_start(seed)});
    }

    json summary = {{"function", fn}, {"cfg", json::parse(cfg_json(cfg))}, {"start", start.vec()},
                    {"tol", tol},     {"max_iter", max_iter},               {"derivs", derivs}};
    Trajectory traj;
    std::vector<double> final_point;
    int code = kExitOk;
    try {
        traj = run_to_convergence(f, start, cfg, tol, max_iter, source);
        final_point = traj.rows.back().point.vec();
        summary["converged"] = traj.converged;
        summary["diverged"] = false;
        summary["iterations"] = traj.iterations;
        summary["final_value"] = traj.rows.back().value;
    } catch (const DivergenceError& e) {
        final_point = e.last_finite();
        summary["converged"] = false;
        summary["diverged"] = true;
        summary["iterations"] = e.iteration();
        summary["error"] = e.what();
        code = kExitNumeric;
    }
    summary["final_point"] = final_point;
    double dist = 0.0;
    for (std::size_t i = 0; i < final_point.size(); ++i)
        dist += std::pow(final_point[i] - (*f.true_minimum())[i], 2);
    summary["distance_to_minimum"] = std::sqrt(dist);
    if (doublewell) summary["escaped"] = code == kExitOk && final_point[0] < double_well_geometry().barrier;

    std::filesystem::create_directories(out);
    std::ostringstream csv;
    write_trajectory_csv(csv, traj);
    write_file_atomically(out / "trajectory.csv", csv.str());
    write_file_atomically(out / "summary.json", summary.dump(2) + "\n");
    std::cout << summary.dump(2) << "\n";
    return code;
}

int cmd_train(const RunConfig& rc, std::size_t threads) {
    const Dataset data = resolve_dataset(rc);
    const auto runs = train_seeds(rc, data, thread_count(threads));
    bool all_ok = true;
    for (const auto& r : runs) {
        std::printf("seed %llu: %s loss %.6g train %.4f test %.4f (%.2fs)\n", static_cast<unsigned long long>(r.seed),
                    r.ok ? "ok" : "FAILED", r.final_loss, r.final_train_accuracy, r.final_test_accuracy, r.seconds);
        if (!r.ok) std::fprintf(stderr, "seed %llu: %s\n", static_cast<unsigned long long>(r.seed), r.error.c_str());
        all_ok = all_ok && r.ok;
    }
    const Averages a = average_runs(runs);
    std::printf("average over %zu runs: loss %.6g train %.4f test %.4f (%.2fs)\n", a.runs, a.loss, a.train_accuracy,
                a.test_accuracy, a.seconds);
    return all_ok ? kExitOk : kExitNumeric;
}

int cmd_sweep(const SweepGrid& grid, const RunConfig& rc, bool baseline, std::size_t threads) {
    const Dataset data = resolve_dataset(rc);
    const SweepResult s = run_sweep(grid, rc, data, baseline, thread_count(threads));
    write_sweep_outputs(rc.out, s);
    std::ostringstream matrix;
    write_sweep_matrix(matrix, s);
    std::cout << matrix.str();
    bool all_ok = true;
    for (const auto& r : s.runs) {
        if (!r.ok)
            std::fprintf(stderr, "alpha %g M %d seed %llu: %s\n", r.alpha, r.terms,
                         static_cast<unsigned long long>(r.seed), r.error.c_str());
        all_ok = all_ok && r.ok;
    }
    return all_ok ? kExitOk : kExitNumeric;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Fractional-order gradient descent: optimizer runs, CNN training and alpha/M sweeps"};
    app.footer(kSchemas);
    app.require_subcommand(1);

    FgdFlags fgd;
    auto* optimize = app.add_subcommand("optimize", "run the optimizer on a catalog test function");
    fgd.add_to(*optimize);
    std::string fn;
    double tol = 1e-6;
    std::size_t max_iter = 10000;
    std::vector<double> x0;
    std::uint64_t seed = 1;
    std::string derivs = "analytic";
    std::string opt_out = "out";
    optimize->add_option("--fn", fn, "quad3|quad0|quadm2|quartic|illcond|doublewell")->required();
    optimize->add_option("--tol", tol, "stop when gradient norm or distance to the minimum is below")
        ->capture_default_str();
    optimize->add_option("--max-iter", max_iter)->capture_default_str();
    optimize->add_option("--x0", x0, "start point, comma-separated (default 10 per coordinate)")->delimiter(',');
    optimize->add_option("--seed", seed, "doublewell: seeds the start in the shallow basin")->capture_default_str();
    optimize->add_option("--derivs", derivs, "analytic|history")->capture_default_str();
    optimize->add_option("--out", opt_out, "output directory")->capture_default_str();

    TrainFlags train_flags;
    std::size_t threads = 0;
    auto* train = app.add_subcommand("train", "train a network for each seed");
    fgd.add_to(*train);
    train_flags.add_to(*train);
    train->add_option("--threads", threads, "worker threads (0 = FRACGRAD_THREADS or all cores)");

    TrainFlags sweep_flags;
    sweep_flags.seeds = {1, 2, 3, 4, 5, 6};
    std::vector<double> alphas{0.1, 0.3, 0.5, 0.7, 0.9};
    std::vector<int> terms{1, 2, 3, 4};
    bool no_baseline = false;
    auto* sweep = app.add_subcommand("sweep", "train every alpha x M x seed cell");
    fgd.add_to(*sweep);
    sweep_flags.add_to(*sweep);
    sweep->add_option("--alphas", alphas, "comma-separated orders")->delimiter(',')->capture_default_str();
    sweep->add_option("--Ms", terms, "comma-separated term counts")->delimiter(',')->capture_default_str();
    sweep->add_flag("--no-baseline", no_baseline, "omit the alpha=1, M=1 reference cell");
    sweep->add_option("--threads", threads, "worker threads (0 = FRACGRAD_THREADS or all cores)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (optimize->parsed())
            return cmd_optimize(fgd.build(), fn, tol, max_iter, x0, seed, derivs, opt_out);
        if (train->parsed()) return cmd_train(train_flags.build(fgd.build()), threads);
        SweepGrid grid{alphas, terms, sweep_flags.seeds};
        grid.validate();
        return cmd_sweep(grid, sweep_flags.build(fgd.build()), !no_baseline, threads);
    } catch (const NumericError& e) {
        std::fprintf(stderr, "numeric failure: %s\n", e.what());
        return kExitNumeric;
    } catch (const ArgumentError& e) {
        std::fprintf(stderr, "usage: %s\n", e.what());
        return kExitUsage;
    } catch (const DomainError& e) {
        std::fprintf(stderr, "usage: %s\n", e.what());
        return kExitUsage;
    } catch (const IngestionError& e) {
        std::fprintf(stderr, "dataset: %s\n", e.what());
        return kExitUsage;
    } catch (const FormatError& e) {
        std::fprintf(stderr, "dataset: %s\n", e.what());
        return kExitUsage;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitNumeric;
    }
}
