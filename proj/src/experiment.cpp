#include "fracgrad/experiment.hpp"

#include "fracgrad/checkpoint.hpp"
#include "fracgrad/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <ostream>
#include <random>
#include <sstream>
#include <thread>

namespace fracgrad {

using nlohmann::json;

void RunConfig::validate() const {
    fgd.validate();
    if (batch < 1) throw ArgumentError("batch size must be >= 1");
    if (epochs < 1) throw ArgumentError("epochs must be >= 1");
    if (seeds.empty()) throw ArgumentError("at least one seed is required");
    if (eval_every < 1) throw ArgumentError("eval period must be >= 1");
    if (net != "toy" && net != "vgg16") throw ArgumentError("unknown network '" + net + "' (expected toy|vgg16)");
}

Dataset resolve_dataset(const RunConfig& cfg) {
    const std::string& sel = cfg.dataset;
    if (sel.rfind("synth:", 0) == 0) {
        std::size_t n = 0;
        try {
            n = std::stoul(sel.substr(6));
        } catch (const std::exception&) {
            throw ArgumentError("bad dataset selector '" + sel + "'");
        }
        return synth_dataset(n, cfg.data_seed, cfg.noise);
    }
    if (sel.rfind("folder:", 0) == 0) {
        const std::filesystem::path manifest = sel.substr(7);
        return load_image_folder(manifest.parent_path(), manifest, cfg.image_side);
    }
    throw ArgumentError("dataset selector must be synth:<n> or folder:<manifest.csv>, got '" + sel + "'");
}

Network build_network(const RunConfig& cfg, const Dataset& data) {
    if (data.size() == 0) throw ArgumentError("dataset is empty");
    const Shape& s = data.images[0].shape();
    if (s.size() != 3 || s[0] != s[1]) throw ShapeError("images must be square [H,W,C]");
    if (cfg.net == "toy") return make_toy_vgg(s[0], s[2], data.labels[0].size());
    if (cfg.net == "vgg16") return make_vgg16(s[0], s[2], data.labels[0].size());
    throw ArgumentError("network selector must be toy or vgg16, got '" + cfg.net + "'");
}

RunResult train_run(const RunConfig& cfg, const Dataset& data, std::uint64_t seed, std::optional<Network>* trained) {
    cfg.validate();
    RunResult result;
    result.alpha = cfg.fgd.alpha;
    result.terms = cfg.fgd.terms;
    result.seed = seed;

    Network net = build_network(cfg, data);
    net.init_uniform(seed);
    std::vector<ParamState> states = make_param_states(net, cfg.fgd);

    std::vector<std::size_t> train = data.indices(Split::train);
    const std::vector<std::size_t> test = data.indices(Split::test);
    if (train.empty()) throw ArgumentError("dataset has no training samples");
    const Tensor train_x = stack_images(data, train), train_t = stack_labels(data, train);
    std::optional<Tensor> test_x, test_t;
    if (!test.empty()) {
        test_x = stack_images(data, test);
        test_t = stack_labels(data, test);
    }
    auto eval_test = [&]() -> Evaluation {
        return test_x ? evaluate(net, *test_x, *test_t, cfg.loss) : Evaluation{};
    };

    std::mt19937_64 order_rng(seed ^ 0x5DEECE66DULL);
    std::vector<std::size_t> order(train.size());
    double seconds = 0.0;
    std::size_t iteration = 0;
    Evaluation latest_test{};
    try {
        for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
            for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
            std::shuffle(order.begin(), order.end(), order_rng);
            double loss_sum = 0.0;
            std::size_t batches = 0;
            for (std::size_t b = 0; b < order.size(); b += cfg.batch) {
                const std::vector<std::size_t> rows(order.begin() + static_cast<std::ptrdiff_t>(b),
                                                    order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), b + cfg.batch)));
                const Tensor x = gather_rows(train_x, rows), t = gather_rows(train_t, rows);
                const auto t0 = std::chrono::steady_clock::now();
                const TrainStepResult step = train_step(net, x, t, states, cfg.fgd, cfg.loss);
                seconds += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
                ++iteration;
                const bool last = epoch == cfg.epochs && b + cfg.batch >= order.size();
                if (iteration % cfg.eval_every == 0 || last) latest_test = eval_test();
                result.iterations.push_back(
                    {iteration, epoch, step.loss, step.accuracy, latest_test.accuracy, latest_test.loss});
                loss_sum += step.loss;
                ++batches;
            }
            const Evaluation tr = evaluate(net, train_x, train_t, cfg.loss);
            const Evaluation te = eval_test();
            result.epochs.push_back({epoch, loss_sum / static_cast<double>(batches), tr.accuracy, te.accuracy,
                                     te.loss, seconds});
        }
    } catch (const Error& e) {
        result.ok = false;
        result.error = std::string(e.what()) + "; last good iteration " + std::to_string(iteration);
    }
    result.seconds = seconds;
    if (!result.epochs.empty()) {
        const EpochRecord& last = result.epochs.back();
        result.final_loss = last.mean_loss;
        result.final_train_accuracy = last.train_accuracy;
        result.final_test_accuracy = last.test_accuracy;
    }
    if (result.ok && !(std::isfinite(result.final_loss))) {
        result.ok = false;
        result.error = "non-finite final loss";
    }
    if (trained) trained->emplace(std::move(net));
    return result;
}

namespace {

// Shortest text that reads back to the same double.
std::string fmt_double(double v) {
    char buf[32];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

std::string run_prefix(const RunResult& r) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "alpha%g_M%d_seed%llu", r.alpha, r.terms, static_cast<unsigned long long>(r.seed));
    return buf;
}

template <class Fn>
void parallel_for(std::size_t count, std::size_t threads, Fn&& fn) {
    threads = std::max<std::size_t>(1, std::min(threads, count));
    if (threads == 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t)
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < count; i = next++) fn(i);
        });
    for (auto& th : pool) th.join();
}

void write_run_files(const std::filesystem::path& dir, const RunResult& run) {
    std::filesystem::create_directories(dir);
    std::ostringstream csv;
    write_iterations_csv(csv, run);
    write_file_atomically(dir / (run_prefix(run) + "_iterations.csv"), csv.str());
    write_file_atomically(dir / (run_prefix(run) + "_epochs.json"), epochs_json(run));
}

json averages_json(const Averages& a) {
    return {{"runs", a.runs},
            {"final_loss", a.loss},
            {"train_accuracy", a.train_accuracy},
            {"test_accuracy", a.test_accuracy},
            {"seconds", a.seconds}};
}

void warm_up(const RunConfig& cfg, const Dataset& data) {
    Network net = build_network(cfg, data);
    net.init_uniform(0);
    auto states = make_param_states(net, cfg.fgd);
    const auto train = data.indices(Split::train);
    const std::vector<std::size_t> rows(train.begin(), train.begin() + static_cast<std::ptrdiff_t>(std::min(train.size(), cfg.batch)));
    if (!rows.empty()) train_step(net, stack_images(data, rows), stack_labels(data, rows), states, cfg.fgd, cfg.loss);
}

} // namespace

void write_iterations_csv(std::ostream& out, const RunResult& run) {
    out << "iteration,epoch,loss,train_accuracy,test_accuracy,test_loss,alpha,M,seed\n";
    for (const auto& r : run.iterations)
        out << r.iteration << ',' << r.epoch << ',' << fmt_double(r.loss) << ',' << fmt_double(r.train_accuracy) << ','
            << fmt_double(r.test_accuracy) << ',' << fmt_double(r.test_loss) << ',' << fmt_double(run.alpha) << ','
            << run.terms << ',' << run.seed << '\n';
}

std::string epochs_json(const RunResult& run) {
    json epochs = json::array();
    for (const auto& e : run.epochs)
        epochs.push_back({{"epoch", e.epoch},
                          {"mean_loss", e.mean_loss},
                          {"train_accuracy", e.train_accuracy},
                          {"test_accuracy", e.test_accuracy},
                          {"test_loss", e.test_loss},
                          {"seconds", e.seconds}});
    json j = {{"alpha", run.alpha}, {"M", run.terms}, {"seed", run.seed}, {"ok", run.ok}, {"epochs", epochs}};
    if (!run.ok) j["error"] = run.error;
    return j.dump(2) + "\n";
}

Averages average_runs(const std::vector<RunResult>& runs) {
    Averages a;
    for (const auto& r : runs) {
        if (!r.ok) continue;
        a.loss += r.final_loss;
        a.train_accuracy += r.final_train_accuracy;
        a.test_accuracy += r.final_test_accuracy;
        a.seconds += r.seconds;
        ++a.runs;
    }
    if (a.runs) {
        const double n = static_cast<double>(a.runs);
        a.loss /= n;
        a.train_accuracy /= n;
        a.test_accuracy /= n;
        a.seconds /= n;
    }
    return a;
}

std::vector<RunResult> train_seeds(const RunConfig& cfg, const Dataset& data, std::size_t threads) {
    cfg.validate();
    warm_up(cfg, data);
    std::vector<RunResult> runs(cfg.seeds.size());
    parallel_for(cfg.seeds.size(), threads, [&](std::size_t i) {
        std::optional<Network> trained;
        runs[i] = train_run(cfg, data, cfg.seeds[i], &trained);
        if (!cfg.out.empty()) {
            write_run_files(cfg.out / "runs", runs[i]);
            if (trained && runs[i].ok)
                save_checkpoint(cfg.out / "checkpoints" / ("seed" + std::to_string(cfg.seeds[i])), *trained, cfg.fgd);
        }
    });
    if (!cfg.out.empty()) {
        json per_seed = json::array();
        for (const auto& r : runs)
            per_seed.push_back({{"seed", r.seed},
                                {"ok", r.ok},
                                {"final_loss", r.final_loss},
                                {"train_accuracy", r.final_train_accuracy},
                                {"test_accuracy", r.final_test_accuracy},
                                {"seconds", r.seconds}});
        json summary = {{"cfg", json::parse(cfg_json(cfg.fgd))},
                        {"epochs", cfg.epochs},
                        {"batch", cfg.batch},
                        {"dataset", cfg.dataset},
                        {"net", cfg.net},
                        {"loss", std::string(to_string(cfg.loss))},
                        {"runs", per_seed},
                        {"average", averages_json(average_runs(runs))}};
        write_file_atomically(cfg.out / "summary.json", summary.dump(2) + "\n");
    }
    return runs;
}

std::vector<SweepCell> sweep_cells(const SweepGrid& grid, bool include_baseline) {
    grid.validate();
    std::vector<SweepCell> cells;
    bool has_baseline = false;
    for (int m : grid.terms)
        for (double a : grid.alphas) {
            cells.push_back({a, m});
            has_baseline = has_baseline || (a == 1.0 && m == 1);
        }
    if (include_baseline && !has_baseline) cells.push_back({1.0, 1});
    return cells;
}

SweepResult run_sweep(const SweepGrid& grid, const RunConfig& cfg, const Dataset& data, bool include_baseline,
                      std::size_t threads) {
    cfg.validate();
    const auto cells = sweep_cells(grid, include_baseline);
    SweepResult sweep;
    sweep.terms = grid.terms;
    sweep.alphas = grid.alphas;
    if (include_baseline && std::find(sweep.alphas.begin(), sweep.alphas.end(), 1.0) == sweep.alphas.end())
        sweep.alphas.push_back(1.0);
    if (include_baseline && std::find(sweep.terms.begin(), sweep.terms.end(), 1) == sweep.terms.end())
        sweep.terms.insert(sweep.terms.begin(), 1);

    warm_up(cfg, data);
    const std::size_t total = cells.size() * grid.seeds.size();
    sweep.runs.resize(total);
    parallel_for(total, threads, [&](std::size_t i) {
        const SweepCell& cell = cells[i / grid.seeds.size()];
        const std::uint64_t seed = grid.seeds[i % grid.seeds.size()];
        RunConfig rc = cfg;
        rc.fgd.alpha = cell.alpha;
        rc.fgd.terms = cell.terms;
        try {
            sweep.runs[i] = train_run(rc, data, seed);
        } catch (const Error& e) {
            RunResult failed;
            failed.alpha = cell.alpha;
            failed.terms = cell.terms;
            failed.seed = seed;
            failed.ok = false;
            failed.error = e.what();
            sweep.runs[i] = std::move(failed);
        }
        if (!cfg.out.empty()) write_run_files(cfg.out / "runs", sweep.runs[i]);
    });
    return sweep;
}

void write_sweep_matrix(std::ostream& out, const SweepResult& sweep) {
    out << "panel,M";
    for (double a : sweep.alphas) out << ",alpha=" << fmt_double(a);
    out << '\n';
    for (const char* panel : {"train", "test"}) {
        const bool train = panel[1] == 'r';
        for (int m : sweep.terms) {
            out << panel << ',' << m;
            for (double a : sweep.alphas) {
                double sum = 0.0;
                std::size_t n = 0;
                for (const auto& r : sweep.runs)
                    if (r.ok && r.alpha == a && r.terms == m) {
                        sum += train ? r.final_train_accuracy : r.final_test_accuracy;
                        ++n;
                    }
                out << ',';
                if (n) out << fmt_double(sum / static_cast<double>(n));
            }
            out << '\n';
        }
    }
}

void write_sweep_runs(std::ostream& out, const SweepResult& sweep) {
    out << "alpha,M,seed,status,final_loss,train_accuracy,test_accuracy,seconds\n";
    for (const auto& r : sweep.runs)
        out << fmt_double(r.alpha) << ',' << r.terms << ',' << r.seed << ',' << (r.ok ? "ok" : "failed") << ','
            << fmt_double(r.final_loss) << ',' << fmt_double(r.final_train_accuracy) << ','
            << fmt_double(r.final_test_accuracy) << ',' << fmt_double(r.seconds) << '\n';
}

void write_sweep_outputs(const std::filesystem::path& dir, const SweepResult& sweep) {
    std::filesystem::create_directories(dir);
    std::ostringstream matrix, runs;
    write_sweep_matrix(matrix, sweep);
    write_sweep_runs(runs, sweep);
    write_file_atomically(dir / "sweep_matrix.csv", matrix.str());
    write_file_atomically(dir / "sweep_runs.csv", runs.str());
}

double shallow_basin_start(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    return std::uniform_real_distribution<double>(0.3, 1.6)(rng);
}

EscapeReport escape_statistic(const FgdConfig& cfg, std::size_t trials, std::uint64_t seed, std::size_t max_iter,
                              DerivativeSource source) {
    const AnalyticFunction f = make_double_well();
    const double barrier = double_well_geometry().barrier;
    EscapeReport report{cfg.alpha, cfg.terms, trials, 0, 0};
    for (std::size_t t = 0; t < trials; ++t) {
        const Tensor start = Tensor::of({shallow_basin_start(seed + t)});
        try {
            const Trajectory traj = run_to_convergence(f, start, cfg, 1e-8, max_iter, source);
            if (traj.rows.back().point[0] < barrier) ++report.escaped;
        } catch (const DivergenceError&) {
            ++report.diverged;
        }
    }
    return report;
}

std::size_t default_thread_count() {
    if (const char* env = std::getenv("FRACGRAD_THREADS")) {
        try {
            const long n = std::stol(env);
            if (n > 0) return static_cast<std::size_t>(n);
        } catch (const std::exception&) {
        }
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

void write_file_atomically(const std::filesystem::path& target, const std::string& bytes) {
    auto tmp = target;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw FormatError("cannot write " + tmp.string());
    }
    std::filesystem::rename(tmp, target);
}

std::string cfg_json(const FgdConfig& cfg) {
    return json{{"alpha", cfg.alpha},
                {"M", cfg.terms},
                {"mu", cfg.mu},
                {"phi", cfg.phi},
                {"gradient_point", std::string(to_string(cfg.gradient_point))},
                {"momentum", cfg.momentum}}
        .dump();
}

} // namespace fracgrad
