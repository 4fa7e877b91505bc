#include "fracgrad/bench_data.hpp"

#include "fracgrad/errors.hpp"
#include "fracgrad/image_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <random>

namespace fracgrad {

namespace {

constexpr int kCatalogOrder = 4;

// Newton iteration on the double-well derivative 4k^3 - 4k + 0.5.
double double_well_root(double k) {
    for (int i = 0; i < 100; ++i) {
        const double step = (4 * k * k * k - 4 * k + 0.5) / (12 * k * k - 4);
        k -= step;
        if (std::abs(step) < 1e-16) break;
    }
    return k;
}

} // namespace

AnalyticFunction make_shifted_quadratic(double center, std::string name) {
    if (name.empty()) name = "quadratic";
    return AnalyticFunction(std::move(name), {ShiftedPolynomial(center, {0.0, 0.0, 1.0})}, kCatalogOrder,
                            std::vector<double>{center});
}

AnalyticFunction make_quartic(double center, std::string name) {
    if (name.empty()) name = "quartic";
    return AnalyticFunction(std::move(name), {ShiftedPolynomial(center, {0.0, 0.0, 1.0, 0.0, 1.0})}, kCatalogOrder,
                            std::vector<double>{center});
}

AnalyticFunction make_ill_conditioned_2d() {
    return AnalyticFunction("illcond",
                            {ShiftedPolynomial(1.0, {0.0, 0.0, 0.5}), ShiftedPolynomial(-1.0, {0.0, 0.0, 50.0})},
                            kCatalogOrder, std::vector<double>{1.0, -1.0});
}

DoubleWellGeometry double_well_geometry() {
    return {double_well_root(-1.0), double_well_root(0.1), double_well_root(1.0)};
}

AnalyticFunction make_double_well() {
    return AnalyticFunction("doublewell", {ShiftedPolynomial(0.0, {0.0, 0.5, -2.0, 0.0, 1.0})}, kCatalogOrder,
                            std::vector<double>{double_well_geometry().global_min});
}

std::vector<AnalyticFunction> make_test_functions() {
    return {make_shifted_quadratic(3.0, "quad3"),  make_shifted_quadratic(0.0, "quad0"),
            make_shifted_quadratic(-2.0, "quadm2"), make_quartic(0.0, "quartic"),
            make_ill_conditioned_2d(),              make_double_well()};
}

AnalyticFunction find_test_function(const std::string& name) {
    for (auto& f : make_test_functions())
        if (f.name() == name) return f;
    throw ArgumentError("unknown function '" + name + "'");
}

std::vector<std::size_t> Dataset::indices(Split which) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < split.size(); ++i)
        if (split[i] == which) out.push_back(i);
    return out;
}

void Dataset::validate() const {
    if (images.size() != labels.size() || images.size() != split.size())
        throw FormatError("dataset arrays have different lengths");
    for (std::size_t i = 0; i < images.size(); ++i) {
        if (!images[i].same_shape(images[0])) throw FormatError("dataset image " + std::to_string(i) + " changes shape");
        for (double v : images[i].values())
            if (!(v >= 0.0 && v <= 1.0)) throw FormatError("dataset image " + std::to_string(i) + " leaves [0, 1]");
        double sum = 0.0;
        for (double v : labels[i].values()) {
            if (v != 0.0 && v != 1.0) throw FormatError("dataset label " + std::to_string(i) + " is not one-hot");
            sum += v;
        }
        if (sum != 1.0) throw FormatError("dataset label " + std::to_string(i) + " is not one-hot");
    }
}

namespace {

Tensor stack(const std::vector<Tensor>& items, const std::vector<std::size_t>& rows) {
    if (rows.empty()) throw ShapeError("cannot stack an empty selection");
    const Tensor& first = items.at(rows[0]);
    Shape s{rows.size()};
    s.insert(s.end(), first.shape().begin(), first.shape().end());
    std::vector<double> data;
    data.reserve(rows.size() * first.size());
    for (std::size_t r : rows) {
        const Tensor& t = items.at(r);
        require_same_shape(first, t, "stack");
        data.insert(data.end(), t.vec().begin(), t.vec().end());
    }
    return Tensor(std::move(s), std::move(data));
}

} // namespace

Tensor stack_images(const Dataset& data, const std::vector<std::size_t>& rows) { return stack(data.images, rows); }
Tensor stack_labels(const Dataset& data, const std::vector<std::size_t>& rows) { return stack(data.labels, rows); }

Tensor one_hot(std::size_t label, std::size_t classes) {
    if (label >= classes) throw ArgumentError("label " + std::to_string(label) + " outside 0.." + std::to_string(classes - 1));
    Tensor t({classes}, 0.0);
    t[label] = 1.0;
    return t;
}

Dataset synth_dataset(std::size_t n, std::uint64_t seed, double noise, std::size_t side) {
    if (n < 20 || n % 2) throw ArgumentError("synthetic dataset size must be even and >= 20, got " + std::to_string(n));
    if (side < 4 || side % 4) throw ArgumentError("synthetic image side must be a positive multiple of 4");

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> offset(0.4, 0.6), amplitude(0.2, 0.35);
    std::normal_distribution<double> gauss(0.0, 1.0);

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), rng);
    const auto n_train = static_cast<std::size_t>(std::lround(kTrainFraction * static_cast<double>(n)));

    // Bands two pixels wide: +1 on even pairs, -1 on odd pairs.
    auto band = [](std::size_t i) { return (i / 2) % 2 == 0 ? 1.0 : -1.0; };

    Dataset d;
    d.images.reserve(n);
    for (std::size_t pos = 0; pos < n; ++pos) {
        const std::size_t label = order[pos] % 2;
        const double o = offset(rng), a = amplitude(rng);
        Tensor img({side, side, 1});
        for (std::size_t y = 0; y < side; ++y)
            for (std::size_t x = 0; x < side; ++x) {
                const double pattern = label == 0 ? band(y) : band(x);
                double v = o + a * pattern;
                if (noise > 0.0) v += noise * gauss(rng);
                img[y * side + x] = std::clamp(v, 0.0, 1.0);
            }
        d.images.push_back(std::move(img));
        d.labels.push_back(one_hot(label));
        d.split.push_back(pos < n_train ? Split::train : Split::test);
    }
    return d;
}

namespace {

std::string trim(std::string s) {
    const auto not_space = [](unsigned char c) { return !std::isspace(c); };
    s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
    s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
    return s;
}

} // namespace

Dataset load_image_folder(const std::filesystem::path& root, const std::filesystem::path& manifest, std::size_t side) {
    std::ifstream in(manifest);
    if (!in) throw IngestionError("cannot open manifest " + manifest.string(), {});

    struct Row {
        std::filesystem::path file;
        std::size_t label;
    };
    std::vector<Row> rows;
    std::vector<std::size_t> missing;
    std::string line;
    bool header = true;
    std::size_t index = 0;
    while (std::getline(in, line)) {
        line = trim(line);
        if (line.empty()) continue;
        if (header) {
            header = false;
            if (line != "filename,label") throw FormatError("manifest header must be 'filename,label'");
            continue;
        }
        const auto comma = line.rfind(',');
        if (comma == std::string::npos) throw FormatError("manifest row " + std::to_string(index) + " lacks a label");
        const std::string label = trim(line.substr(comma + 1));
        if (label != "0" && label != "1")
            throw FormatError("manifest row " + std::to_string(index) + ": label must be 0 or 1, got '" + label + "'");
        Row r{root / trim(line.substr(0, comma)), static_cast<std::size_t>(label[0] - '0')};
        if (!std::filesystem::is_regular_file(r.file)) missing.push_back(index);
        rows.push_back(std::move(r));
        ++index;
    }
    if (!missing.empty()) {
        std::string msg = "manifest references missing files at rows";
        for (auto m : missing) msg += " " + std::to_string(m) + " (" + rows[m].file.string() + ")";
        throw IngestionError(msg, missing);
    }

    Dataset d;
    std::size_t per_class[2] = {0, 0};
    for (const Row& r : rows) ++per_class[r.label];
    const std::size_t train_quota[2] = {
        static_cast<std::size_t>(std::lround(kTrainFraction * static_cast<double>(per_class[0]))),
        static_cast<std::size_t>(std::lround(kTrainFraction * static_cast<double>(per_class[1])))};
    std::size_t seen[2] = {0, 0};
    for (const Row& r : rows) {
        const Image img = resize_bilinear(to_luma(read_image(r.file)), side, side);
        d.images.emplace_back(Shape{side, side, 1}, img.pixels);
        d.labels.push_back(one_hot(r.label));
        d.split.push_back(seen[r.label]++ < train_quota[r.label] ? Split::train : Split::test);
    }
    return d;
}

void SweepGrid::validate() const {
    if (alphas.empty() || terms.empty() || seeds.empty()) throw ArgumentError("sweep grid must be non-empty");
    for (double a : alphas)
        if (!(a > 0.0 && a <= 1.0)) throw ArgumentError("sweep alpha outside (0, 1]: " + std::to_string(a));
    for (int m : terms)
        if (m < 1) throw ArgumentError("sweep M must be >= 1");
}

SweepGrid SweepGrid::reference_grid() { return {{0.1, 0.3, 0.5, 0.7, 0.9}, {1, 2, 3, 4}, {1, 2, 3, 4, 5, 6}}; }

} // namespace fracgrad
