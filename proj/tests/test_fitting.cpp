#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "test_support.hpp"
#include "txsched/fitting.hpp"

#include <cmath>
#include <random>

using namespace txsched;
using namespace txsched::testing;

namespace {

std::vector<FitSample> synth(double a, double b, const std::vector<double>& xs) {
    std::vector<FitSample> points;
    for (double x : xs) points.push_back({x, a * std::pow(x, -b)});
    return points;
}

}  // namespace

TEST_CASE("two exact points solve in closed form") {
    const auto fit = fit_power_law({{1.0, 2.0}, {4.0, 1.0}});
    CHECK(fit.amplitude == doctest::Approx(2.0).epsilon(1e-10));
    CHECK(fit.decay == doctest::Approx(0.5).epsilon(1e-10));
    CHECK(fit.rmse <= 1e-12);
}

TEST_CASE("recovers the reference constants from noiseless points") {
    const auto fit =
        fit_power_law(synth(8.58, 0.86, {30, 50, 70, 100, 300, 500, 700, 1000}));
    CHECK(close(fit.amplitude, 8.58, 1e-3));
    CHECK(close(fit.decay, 0.86, 1e-3));
    CHECK(fit.rmse <= 1e-8);
}

TEST_CASE("flat observations give a zero decay") {
    const auto fit = fit_power_law({{10, 0.25}, {100, 0.25}, {1000, 0.25}});
    CHECK(fit.decay == doctest::Approx(0.0));
    CHECK(fit.amplitude == doctest::Approx(0.25).epsilon(1e-9));
}

TEST_CASE("zero errors fall back to the grid initializer") {
    const auto fit = fit_power_law({{1.0, 1.0}, {10.0, 0.0}, {100.0, 0.0}});
    CHECK(fit.amplitude >= 0.0);
    CHECK(fit.decay >= 0.0);
    CHECK(std::isfinite(fit.rmse));
}

TEST_CASE("input validation") {
    CHECK_THROWS_AS(fit_power_law({{5.0, 1.0}}), std::invalid_argument);
    CHECK_THROWS_AS(fit_power_law({{5.0, 1.0}, {5.0, 0.9}}), std::invalid_argument);
    CHECK_THROWS_AS(fit_power_law({{0.5, 1.0}, {5.0, 0.9}}), std::invalid_argument);
    CHECK_THROWS_AS(fit_power_law({{1.0, -0.1}, {5.0, 0.9}}), std::invalid_argument);
}

TEST_CASE("refinement never loses to the log-linear initializer") {
    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int i = 0; i < 100; ++i) {
        const double a = 0.5 + 9 * unit(rng);
        const double b = 0.2 + unit(rng);
        std::vector<FitSample> points;
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        for (int p = 0; p < 8; ++p) {
            const double x = std::pow(10.0, 1.0 + 2.5 * p / 7.0);
            const double noise = 1.0 + 0.1 * (unit(rng) - 0.5);
            points.push_back({x, a * std::pow(x, -b) * noise});
            sx += std::log(x);
            sy += std::log(points.back().observed_error);
            sxx += std::log(x) * std::log(x);
            sxy += std::log(x) * std::log(points.back().observed_error);
        }
        const double n = static_cast<double>(points.size());
        const double b0 = std::max(-(n * sxy - sx * sy) / (n * sxx - sx * sx), 0.0);
        const double a0 = std::exp((sy + b0 * sx) / n);
        double init_mse = 0.0;
        for (const auto& p : points) {
            const double r = a0 * std::pow(p.samples, -b0) - p.observed_error;
            init_mse += r * r;
        }
        const auto fit = fit_power_law(points);
        CHECK(fit.rmse * fit.rmse * n <= init_mse * (1.0 + 1e-12));
    }
}

TEST_CASE("scaling the observations scales the amplitude only") {
    std::mt19937_64 rng(43);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int i = 0; i < 50; ++i) {
        const double a = 0.5 + 5 * unit(rng);
        const double b = 0.2 + unit(rng);
        const double k = 0.1 + 5 * unit(rng);
        const std::vector<double> xs{10, 30, 100, 300, 1000};
        const auto base = fit_power_law(synth(a, b, xs));
        auto scaled_points = synth(a, b, xs);
        for (auto& p : scaled_points) p.observed_error *= k;
        const auto scaled = fit_power_law(scaled_points);
        CHECK(close(scaled.amplitude, k * base.amplitude, 1e-6));
        CHECK(close(scaled.decay, base.decay, 1e-6));
    }
}
