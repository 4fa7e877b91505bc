#pragma once

#include "fracgrad/deriv_oracle.hpp"
#include "fracgrad/tensor.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace fracgrad {

// ---- analytic test functions -------------------------------------------

AnalyticFunction make_shifted_quadratic(double center, std::string name = {});
/// (k - c)^4 + (k - c)^2
AnalyticFunction make_quartic(double center, std::string name = {});
/// 0.5 (k1 - 1)^2 + 50 (k2 + 1)^2, condition number 100.
AnalyticFunction make_ill_conditioned_2d();
/// k^4 - 2 k^2 + 0.5 k: global minimum near -1.06, shallow basin near 0.93.
AnalyticFunction make_double_well();

struct DoubleWellGeometry {
    double global_min;
    double barrier; ///< local maximum separating the basins
    double local_min;
};
DoubleWellGeometry double_well_geometry();

/// quad3, quad0, quadm2, quartic, illcond, doublewell. All declare
/// derivatives to order 4 and their global minimum.
std::vector<AnalyticFunction> make_test_functions();
/// Throws ArgumentError for unknown names.
AnalyticFunction find_test_function(const std::string& name);

// ---- image datasets ----------------------------------------------------

enum class Split { train, test };

/// Two-class image set; images are [H, W, C] in [0, 1], labels one-hot [2].
struct Dataset {
    std::vector<Tensor> images;
    std::vector<Tensor> labels;
    std::vector<Split> split;

    std::size_t size() const noexcept { return images.size(); }
    std::vector<std::size_t> indices(Split which) const;
    /// Throws FormatError when the parallel arrays or invariants disagree.
    void validate() const;
};

/// Stack selected images into [n, H, W, C] and labels into [n, 2].
Tensor stack_images(const Dataset& data, const std::vector<std::size_t>& rows);
Tensor stack_labels(const Dataset& data, const std::vector<std::size_t>& rows);

Tensor one_hot(std::size_t label, std::size_t classes = 2);

inline constexpr double kTrainFraction = 0.7;

/// n 16x16x1 images, half horizontal-band (class 0), half vertical-band
/// (class 1), plus Gaussian pixel noise of the given standard deviation,
/// clamped to [0, 1]. Exactly round(0.7 n) samples are tagged train.
Dataset synth_dataset(std::size_t n, std::uint64_t seed, double noise = 0.2, std::size_t side = 16);

/// Reads a `filename,label` manifest; paths are relative to `root`. Images are
/// converted to one channel, resized to side x side and scaled to [0, 1]. The
/// first round(0.7 n_c) rows of each class, in manifest order, form the
/// training split.
Dataset load_image_folder(const std::filesystem::path& root, const std::filesystem::path& manifest,
                          std::size_t side = 224);

// ---- sweep grid --------------------------------------------------------

struct SweepGrid {
    std::vector<double> alphas;
    std::vector<int> terms;
    std::vector<std::uint64_t> seeds;

    std::size_t repeats() const noexcept { return seeds.size(); }
    void validate() const;

    /// alpha in {0.1, 0.3, 0.5, 0.7, 0.9}, M in {1..4}, six repeats.
    static SweepGrid reference_grid();
};

} // namespace fracgrad
