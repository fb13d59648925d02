#include "txsched/fitting.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>

namespace txsched {

namespace {

double mean_square_residual(const std::vector<FitSample>& pts, double a, double b) {
    double acc = 0.0;
    for (const auto& p : pts) {
        const double r = a * std::pow(p.samples, -b) - p.observed_error;
        acc += r * r;
    }
    return acc / static_cast<double>(pts.size());
}

// Best amplitude for a fixed decay (linear least squares in a).
double amplitude_for(const std::vector<FitSample>& pts, double b) {
    double num = 0.0, den = 0.0;
    for (const auto& p : pts) {
        const double basis = std::pow(p.samples, -b);
        num += p.observed_error * basis;
        den += basis * basis;
    }
    return den > 0.0 ? std::max(num / den, 0.0) : 0.0;
}

}  // namespace

FitResult fit_power_law(const std::vector<FitSample>& points) {
    std::set<double> distinct;
    for (const auto& p : points) {
        if (!(p.samples >= 1.0)) throw std::invalid_argument("fit_power_law: samples must be >= 1");
        if (!(p.observed_error >= 0.0))
            throw std::invalid_argument("fit_power_law: observed_error must be >= 0");
        distinct.insert(p.samples);
    }
    if (distinct.size() < 2)
        throw std::invalid_argument("fit_power_law: need at least 2 distinct sample counts");

    bool all_positive = true;
    for (const auto& p : points) all_positive &= p.observed_error > 0.0;

    double a, b;
    if (all_positive) {
        // ln e = ln a - b ln x.
        const auto n = static_cast<double>(points.size());
        double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
        for (const auto& p : points) {
            const double lx = std::log(p.samples);
            const double ly = std::log(p.observed_error);
            sx += lx;
            sy += ly;
            sxx += lx * lx;
            sxy += lx * ly;
        }
        const double denom = n * sxx - sx * sx;
        b = std::max(-(n * sxy - sx * sy) / denom, 0.0);
        a = std::exp((sy + b * sx) / n);
    } else {
        b = 0.0;
        double best = std::numeric_limits<double>::infinity();
        for (int i = 0; i <= 60; ++i) {
            const double cand = 3.0 * i / 60.0;
            const double msr = mean_square_residual(points, amplitude_for(points, cand), cand);
            if (msr < best) {
                best = msr;
                b = cand;
            }
        }
        a = amplitude_for(points, b);
    }

    // Damped Gauss-Newton on the plain residuals.
    double damping = 1e-3;
    double msr = mean_square_residual(points, a, b);
    for (int it = 0; it < 200; ++it) {
        Eigen::Matrix2d jtj = Eigen::Matrix2d::Zero();
        Eigen::Vector2d jtr = Eigen::Vector2d::Zero();
        for (const auto& p : points) {
            const double basis = std::pow(p.samples, -b);
            const double residual = a * basis - p.observed_error;
            Eigen::Vector2d jac(basis, -a * basis * std::log(p.samples));
            jtj += jac * jac.transpose();
            jtr += jac * residual;
        }
        const Eigen::Vector2d step =
            (jtj + damping * Eigen::Matrix2d::Identity()).ldlt().solve(-jtr);
        const double a_try = std::max(a + step[0], 0.0);
        const double b_try = std::max(b + step[1], 0.0);
        const double msr_try = mean_square_residual(points, a_try, b_try);
        if (msr_try < msr) {
            a = a_try;
            b = b_try;
            msr = msr_try;
            damping = std::max(damping * 0.1, 1e-12);
            if (step.norm() <= 1e-14 * (1.0 + std::hypot(a, b))) break;
        } else {
            damping *= 10.0;
            if (damping > 1e12) break;
        }
    }

    return {a, b, std::sqrt(msr)};
}

}  // namespace txsched
