#pragma once

// Training runs, alpha/M sweeps and the double-well escape probe, plus the
// CSV/JSON files they emit. The CLI is a thin layer over this.

#include "fracgrad/bench_data.hpp"
#include "fracgrad/fgd_optimizer.hpp"
#include "fracgrad/frac_math.hpp"
#include "fracgrad/nn.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace fracgrad {

struct RunConfig {
    FgdConfig fgd;
    std::size_t epochs = 6;
    std::size_t batch = 10;
    std::vector<std::uint64_t> seeds{1};
    /// "synth:<n>" or "folder:<manifest.csv>" (image paths relative to the manifest).
    std::string dataset = "synth:400";
    /// "toy" or "vgg16".
    std::string net = "toy";
    std::filesystem::path out;
    LossForm loss = LossForm::standard;
    std::uint64_t data_seed = 1;
    double noise = 0.2;
    std::size_t image_side = 224; ///< resize target for folder datasets
    std::size_t eval_every = 1;   ///< test-set evaluation period in iterations

    void validate() const;
};

Dataset resolve_dataset(const RunConfig& cfg);
Network build_network(const RunConfig& cfg, const Dataset& data);

struct IterationRecord {
    std::size_t iteration = 0;
    std::size_t epoch = 0;
    double loss = 0.0;
    double train_accuracy = 0.0; ///< on the batch just trained
    double test_accuracy = 0.0;  ///< latest test-set evaluation
    double test_loss = 0.0;
};

struct EpochRecord {
    std::size_t epoch = 0;
    double mean_loss = 0.0;
    double train_accuracy = 0.0; ///< whole training split after the epoch
    double test_accuracy = 0.0;
    double test_loss = 0.0;
    double seconds = 0.0; ///< cumulative training wall clock
};

struct RunResult {
    double alpha = 0.0;
    int terms = 0;
    std::uint64_t seed = 0;
    std::vector<IterationRecord> iterations;
    std::vector<EpochRecord> epochs;
    double final_loss = 0.0;
    double final_train_accuracy = 0.0;
    double final_test_accuracy = 0.0;
    double seconds = 0.0;
    bool ok = true;
    std::string error;
};

/// Trains one network from `seed` (weights and sample order). Numeric failures
/// are reported through `ok`/`error` with the last good iteration.
RunResult train_run(const RunConfig& cfg, const Dataset& data, std::uint64_t seed,
                    std::optional<Network>* trained = nullptr);

/// Per-iteration CSV:
/// iteration,epoch,loss,train_accuracy,test_accuracy,test_loss,alpha,M,seed
void write_iterations_csv(std::ostream& out, const RunResult& run);
/// Run identity plus an "epochs" array with mean loss, accuracies and
/// cumulative seconds.
std::string epochs_json(const RunResult& run);

struct Averages {
    double loss = 0.0;
    double train_accuracy = 0.0;
    double test_accuracy = 0.0;
    double seconds = 0.0;
    std::size_t runs = 0;
};

/// Arithmetic means over the successful runs.
Averages average_runs(const std::vector<RunResult>& runs);

/// Runs every seed of `cfg` (after an untimed warm-up step) and writes
/// <out>/runs/*.csv|json, <out>/summary.json and <out>/checkpoints/seed<s>/.
std::vector<RunResult> train_seeds(const RunConfig& cfg, const Dataset& data, std::size_t threads);

struct SweepCell {
    double alpha;
    int terms;
};

struct SweepResult {
    std::vector<double> alphas; ///< matrix columns
    std::vector<int> terms;     ///< matrix rows
    std::vector<RunResult> runs;
};

/// Cells of the sweep: alpha x M, plus the (1, 1) integer-order baseline when
/// requested and absent from the grid.
std::vector<SweepCell> sweep_cells(const SweepGrid& grid, bool include_baseline);

/// Runs every cell x seed. A failing run is recorded and the sweep continues.
SweepResult run_sweep(const SweepGrid& grid, const RunConfig& cfg, const Dataset& data, bool include_baseline,
                      std::size_t threads);

/// Matrix CSV: `panel,M,alpha=<a>...`; panels "train" then "test"; cells
/// hold the mean final accuracy, empty where no run exists.
void write_sweep_matrix(std::ostream& out, const SweepResult& sweep);
/// Long form: alpha,M,seed,status,final_loss,train_accuracy,test_accuracy,seconds
void write_sweep_runs(std::ostream& out, const SweepResult& sweep);
void write_sweep_outputs(const std::filesystem::path& dir, const SweepResult& sweep);

struct EscapeReport {
    double alpha = 0.0;
    int terms = 0;
    std::size_t trials = 0;
    std::size_t escaped = 0;
    std::size_t diverged = 0;
    double rate() const noexcept { return trials ? static_cast<double>(escaped) / static_cast<double>(trials) : 0.0; }
};

/// Starts `trials` runs uniformly in the shallow basin [0.3, 1.6] of the
/// double well; a run escapes when it finishes left of the barrier.
EscapeReport escape_statistic(const FgdConfig& cfg, std::size_t trials, std::uint64_t seed,
                              std::size_t max_iter = 2000, DerivativeSource source = DerivativeSource::analytic);

/// Start point drawn in the shallow basin for a given seed.
double shallow_basin_start(std::uint64_t seed);

/// Worker count: FRACGRAD_THREADS if set and positive, else hardware concurrency.
std::size_t default_thread_count();

/// Writes `bytes` to `target` through a temporary file and rename.
void write_file_atomically(const std::filesystem::path& target, const std::string& bytes);

/// FgdConfig as a JSON object string.
std::string cfg_json(const FgdConfig& cfg);

} // namespace fracgrad
