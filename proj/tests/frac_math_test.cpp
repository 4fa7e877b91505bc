#include "fracgrad/errors.hpp"
#include "fracgrad/frac_math.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numbers>

using namespace fracgrad;

namespace {

// 30-digit reference values of Gamma (mpmath, dps = 30).
struct GammaRef {
    double x;
    double value;
};
constexpr GammaRef kGammaRefs[] = {
    {0.1, 9.5135076986687318363},  {0.3, 2.9915689876875906283},  {0.5, 1.7724538509055160273},
    {0.7, 1.2980553326475577857},  {1.0, 1.0},                    {1.1, 0.95135076986687318363},
    {1.3, 0.89747069630627718849}, {1.5, 0.88622692545275801365}, {1.9, 0.96176583190738741941},
    {2.1, 1.046485846853560502},   {2.5, 1.3293403881791370205},  {3.3, 2.6834373819557687936},
    {4.5, 11.631728396567448929},  {4.9, 20.667385961857848256},  {5.0, 24.0},
    {7.25, 1155.3810139199896872}, {12.5, 136843365.46556585726},
};

double rel_err(double got, double want) { return std::abs(got - want) / std::abs(want); }

FgdConfig cfg_of(double alpha, int terms, double phi) {
    FgdConfig c;
    c.alpha = alpha;
    c.terms = terms;
    c.phi = phi;
    return c;
}

DerivativeStack scalar_stack(std::initializer_list<double> ds) {
    DerivativeStack s;
    for (double d : ds) s.values.push_back(Tensor::scalar(d));
    return s;
}

} // namespace

TEST(Gamma, MatchesHighPrecisionReference) {
    for (const auto& r : kGammaRefs) EXPECT_LE(rel_err(fracgrad::gamma(r.x), r.value), 1e-12) << "x = " << r.x;
}

TEST(Gamma, ExactAtSmallIntegersAndHalf) {
    EXPECT_EQ(fracgrad::gamma(1.0), 1.0);
    EXPECT_EQ(fracgrad::gamma(2.0), 1.0);
    EXPECT_EQ(fracgrad::gamma(5.0), 24.0);
    EXPECT_LE(rel_err(fracgrad::gamma(1.5), std::sqrt(std::numbers::pi) / 2.0), 1e-12);
    EXPECT_LE(rel_err(fracgrad::gamma(1.1), 0.951350769866873), 1e-12);
}

TEST(Gamma, Recurrence) {
    for (double x : {0.1, 0.5, 1.0, 1.5, 2.5}) EXPECT_LE(rel_err(fracgrad::gamma(x + 1.0), x * fracgrad::gamma(x)), 1e-12) << x;
}

TEST(Gamma, RejectsNonPositiveAndNonFinite) {
    EXPECT_THROW(fracgrad::gamma(0.0), DomainError);
    EXPECT_THROW(fracgrad::gamma(-1.5), DomainError);
    EXPECT_THROW(fracgrad::gamma(std::numeric_limits<double>::quiet_NaN()), DomainError);
    EXPECT_THROW(fracgrad::gamma(std::numeric_limits<double>::infinity()), DomainError);
}

TEST(FgdConfig, Validation) {
    EXPECT_NO_THROW(cfg_of(1.0, 1, 0.0).validate());
    EXPECT_THROW(cfg_of(0.0, 1, 0.0).validate(), DomainError);
    EXPECT_THROW(cfg_of(1.2, 1, 0.0).validate(), DomainError);
    EXPECT_THROW(cfg_of(0.5, 0, 0.0).validate(), DomainError);
    EXPECT_THROW(cfg_of(0.5, 1, -1e-8).validate(), DomainError);
    FgdConfig c = cfg_of(0.5, 1, 0.0);
    c.mu = 0.0;
    EXPECT_THROW(c.validate(), DomainError);
    c.mu = 0.1;
    c.momentum = 1.0;
    EXPECT_THROW(c.validate(), DomainError);
    const FgdConfig preset = FgdConfig::momentum_preset(0.9, 4);
    EXPECT_EQ(preset.mu, 0.0005);
    EXPECT_EQ(preset.momentum, 0.9);
}

// Expected values come from a 40-digit evaluation of the series.
TEST(FractionalGradient, SingleTerm) {
    const Tensor out = fractional_gradient(scalar_stack({3.2}), Tensor::scalar(0.4), cfg_of(0.5, 1, 0.0));
    EXPECT_NEAR(out[0], 2.2836788686755471534, 1e-12);
}

TEST(FractionalGradient, TwoTerms) {
    const Tensor out = fractional_gradient(scalar_stack({3.2, 2.0}), Tensor::scalar(0.4), cfg_of(0.5, 2, 0.0));
    EXPECT_NEAR(out[0], 2.6642920134548049911, 1e-12);
}

TEST(FractionalGradient, ReducesToGradientAtIntegerOrder) {
    for (double g : {-7.5, -1e-300, 0.0, 0.3, 12345.678})
        for (double step : {0.0, 1e-12, 0.4, 3.0}) {
            const Tensor out = fractional_gradient(scalar_stack({g}), Tensor::scalar(step), cfg_of(1.0, 1, 0.0));
            EXPECT_EQ(out[0], g) << "g=" << g << " step=" << step;
        }
}

TEST(FractionalGradient, LinearInEachDerivative) {
    const FgdConfig cfg = cfg_of(0.7, 3, 1e-8);
    const Tensor step = Tensor::scalar(0.25);
    const double base = fractional_gradient(scalar_stack({1.5, -0.8, 2.0}), step, cfg)[0];
    const double doubled = fractional_gradient(scalar_stack({1.5, -1.6, 2.0}), step, cfg)[0];
    const double term2 = fractional_gradient(scalar_stack({0.0, -0.8, 0.0}), step, cfg)[0];
    EXPECT_NEAR(doubled - base, term2, 1e-15);
}

TEST(FractionalGradient, PreservesShape) {
    for (const Shape& shape : {Shape{}, Shape{5}, Shape{2, 3}, Shape{2, 3, 3, 4}}) {
        DerivativeStack s{{Tensor(shape, 1.0), Tensor(shape, 0.5)}};
        const Tensor out = fractional_gradient(s, Tensor(shape, 0.1), cfg_of(0.9, 2, 1e-8));
        EXPECT_EQ(out.shape(), shape);
    }
}

TEST(FractionalGradient, IncreasingInPhi) {
    double last = -1.0;
    for (double phi : {0.0, 1e-8, 1e-4, 1e-2, 0.1, 1.0}) {
        const double v = fractional_gradient(scalar_stack({2.0}), Tensor::scalar(0.05), cfg_of(0.6, 1, phi))[0];
        EXPECT_GT(v, last) << phi;
        last = v;
    }
}

TEST(FractionalGradient, ShapeMismatch) {
    DerivativeStack s{{Tensor({3}, 1.0)}};
    EXPECT_THROW(fractional_gradient(s, Tensor({4}, 0.1), cfg_of(0.5, 1, 0.0)), ShapeError);
    DerivativeStack ragged{{Tensor({3}, 1.0), Tensor({2}, 1.0)}};
    EXPECT_THROW(fractional_gradient(ragged, Tensor({3}, 0.1), cfg_of(0.5, 2, 0.0)), ShapeError);
    EXPECT_THROW(fractional_gradient(s, Tensor({3}, 0.1), cfg_of(0.5, 2, 0.0)), ShapeError);
}

TEST(FractionalGradient, ZeroStepWithPositiveExponentIsFinite) {
    const Tensor out = fractional_gradient(scalar_stack({2.0, 1.0}), Tensor::scalar(0.0), cfg_of(0.5, 2, 0.0));
    EXPECT_EQ(out[0], 0.0);
}

TEST(FractionalGradientDecreasing, StopsBeforeGrowingTerm) {
    const FgdConfig cfg = cfg_of(0.5, 3, 0.0);
    // Term 2 at step 0.4 is 0.3806; a huge third derivative makes term 3 larger.
    int used = 0;
    const Tensor guarded = fractional_gradient_decreasing(scalar_stack({3.2, 2.0, 1e6}), Tensor::scalar(0.4), cfg, &used);
    EXPECT_NEAR(guarded[0], 2.6642920134548049911, 1e-12);
    EXPECT_EQ(used, 2);

    const Tensor plain = fractional_gradient(scalar_stack({3.2, 2.0, 1e-3}), Tensor::scalar(0.4), cfg);
    EXPECT_EQ(fractional_gradient_decreasing(scalar_stack({3.2, 2.0, 1e-3}), Tensor::scalar(0.4), cfg, &used)[0],
              plain[0]);
    EXPECT_EQ(used, 3);
}

TEST(SeriesTailBound, MatchesLastTerm) {
    EXPECT_EQ(series_tail_bound(scalar_stack({0.0}), Tensor::scalar(0.7), cfg_of(0.5, 1, 0.0)), 0.0);
    EXPECT_NEAR(series_tail_bound(scalar_stack({3.2, 2.0}), Tensor::scalar(0.4), cfg_of(0.5, 2, 0.0)),
                0.38061314477925783777, 1e-12);
    EXPECT_NEAR(series_tail_bound(scalar_stack({3.2}), Tensor::scalar(0.4), cfg_of(0.5, 1, 0.0)),
                2.2836788686755471534, 1e-12);
}

TEST(SeriesTailBound, MaxOverElements) {
    DerivativeStack s{{Tensor::of({1.0, 1.0}), Tensor::of({-4.0, 1.0})}};
    const double b = series_tail_bound(s, Tensor::of({1.0, 1.0}), cfg_of(1.0, 2, 0.0));
    EXPECT_DOUBLE_EQ(b, 4.0);
}

TEST(GradientPoint, ParseRoundTrip) {
    EXPECT_EQ(parse_gradient_point("current"), GradientPoint::current);
    EXPECT_EQ(parse_gradient_point(to_string(GradientPoint::previous)), GradientPoint::previous);
    EXPECT_THROW(parse_gradient_point("next"), ArgumentError);
}
