#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "fockfringe/errors.hpp"
#include "fockfringe/estimation.hpp"

namespace fockfringe {

namespace {

constexpr double kScanLow = 0.01;
constexpr double kScanHigh = 10.0;
constexpr int kScanPoints = 64;
constexpr double kRefineTolerance = 1e-7;

std::vector<double> model_occupied(double peak_mean, int max_atoms, ProfileDimension dimension) {
    return tf_weighted_poisson({peak_mean, dimension}, max_atoms).occupied_fractions();
}

} // namespace

PeakOccupationFit fit_tf_poisson(std::span<const double> occupied_fractions, std::span<const double> errors,
                                 ProfileDimension dimension) {
    const auto k = occupied_fractions.size();
    if (k < 1) {
        throw ArityError("TF-Poisson fit needs at least one occupied fraction");
    }
    if (!errors.empty() && errors.size() != k) {
        throw DomainError("fraction and uncertainty arrays differ in length");
    }
    std::vector<double> target(occupied_fractions.begin(), occupied_fractions.end());
    double total = 0.0;
    int nonzero = 0;
    for (double v : target) {
        if (!(v >= 0.0) || !std::isfinite(v)) {
            throw DomainError("occupied fractions must be finite and non-negative");
        }
        total += v;
        nonzero += v > 1e-12 ? 1 : 0;
    }
    if (!(total > 0.0)) {
        throw DegenerateError("no occupied sites to fit");
    }
    for (auto& v : target) {
        v /= total;
    }

    const bool weighted = !errors.empty() && std::all_of(errors.begin(), errors.end(), [](double e) {
        return e > 0.0 && std::isfinite(e);
    });
    std::vector<double> w(k, 1.0);
    if (weighted) {
        for (std::size_t i = 0; i < k; ++i) {
            w[i] = 1.0 / (errors[i] * errors[i]);
        }
    }
    const int max_atoms = static_cast<int>(k);
    auto objective = [&](double n0) {
        const auto model = model_occupied(n0, max_atoms, dimension);
        double sum = 0.0;
        for (std::size_t i = 0; i < k; ++i) {
            const double r = model[i] - target[i];
            sum += w[i] * r * r;
        }
        return sum;
    };

    std::vector<double> grid(kScanPoints);
    std::size_t best = 0;
    double best_cost = std::numeric_limits<double>::infinity();
    for (int s = 0; s < kScanPoints; ++s) {
        grid[static_cast<std::size_t>(s)] = kScanLow * std::pow(kScanHigh / kScanLow, static_cast<double>(s) / (kScanPoints - 1));
        const double c = objective(grid[static_cast<std::size_t>(s)]);
        if (c < best_cost) {
            best_cost = c;
            best = static_cast<std::size_t>(s);
        }
    }

    constexpr double inv_phi = 0.6180339887498949;
    double lo = grid[best == 0 ? 0 : best - 1];
    double hi = grid[std::min(best + 1, grid.size() - 1)];
    double a = hi - inv_phi * (hi - lo);
    double b = lo + inv_phi * (hi - lo);
    double fa = objective(a);
    double fb = objective(b);
    while (hi - lo > kRefineTolerance) {
        if (fa < fb) {
            hi = b;
            b = a;
            fb = fa;
            a = hi - inv_phi * (hi - lo);
            fa = objective(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + inv_phi * (hi - lo);
            fb = objective(b);
        }
    }

    PeakOccupationFit fit;
    fit.peak_mean = 0.5 * (lo + hi);
    fit.cost = objective(fit.peak_mean);
    if (best_cost < fit.cost) {
        fit.peak_mean = grid[best];
        fit.cost = best_cost;
    }
    fit.degenerate = nonzero < 2;
    if (fit.degenerate) {
        fit.uncertainty = std::numeric_limits<double>::infinity();
        return fit;
    }

    const double h = 1e-5 * fit.peak_mean;
    const auto up = model_occupied(fit.peak_mean + h, max_atoms, dimension);
    const auto down = model_occupied(fit.peak_mean - h, max_atoms, dimension);
    double information = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        const double d = (up[i] - down[i]) / (2.0 * h);
        information += w[i] * d * d;
    }
    double variance = information > 0.0 ? 1.0 / information : std::numeric_limits<double>::infinity();
    if (!weighted) {
        variance *= k > 1 ? fit.cost / static_cast<double>(k - 1) : std::numeric_limits<double>::infinity();
    }
    fit.uncertainty = std::sqrt(variance);
    return fit;
}

PeakOccupationFit fit_tf_poisson(const CtFitResult& result, ProfileDimension dimension) {
    return fit_tf_poisson(result.fractions, result.fraction_errors, dimension);
}

PowerLawFit fit_power_law(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) {
        throw DomainError("power-law x and y arrays differ in length");
    }
    const auto n = x.size();
    if (n < 2) {
        throw ArityError("power-law fit needs at least two points");
    }
    std::vector<double> lx(n);
    std::vector<double> ly(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (!(x[i] > 0.0) || !(y[i] > 0.0)) {
            throw DomainError("power-law fit needs strictly positive data");
        }
        lx[i] = std::log(x[i]);
        ly[i] = std::log(y[i]);
    }
    const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / static_cast<double>(n);
    const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / static_cast<double>(n);
    double sxx = 0.0;
    double sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (lx[i] - mx) * (lx[i] - mx);
        sxy += (lx[i] - mx) * (ly[i] - my);
    }
    if (!(sxx > 0.0)) {
        throw DegenerateError("power-law fit needs at least two distinct x values");
    }
    PowerLawFit fit;
    fit.exponent = sxy / sxx;
    const double intercept = my - fit.exponent * mx;
    fit.prefactor = std::exp(intercept);
    if (n > 2) {
        double ssr = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double r = ly[i] - intercept - fit.exponent * lx[i];
            ssr += r * r;
        }
        const double s2 = ssr / static_cast<double>(n - 2);
        fit.exponent_error = std::sqrt(s2 / sxx);
        fit.prefactor_error = fit.prefactor * std::sqrt(s2 * (1.0 / static_cast<double>(n) + mx * mx / sxx));
    } else {
        fit.exponent_error = std::numeric_limits<double>::infinity();
        fit.prefactor_error = std::numeric_limits<double>::infinity();
    }
    return fit;
}

} // namespace fockfringe
