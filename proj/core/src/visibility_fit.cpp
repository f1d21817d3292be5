#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "fockfringe/constants.hpp"
#include "fockfringe/errors.hpp"
#include "fockfringe/estimation.hpp"
#include "fockfringe/least_squares.hpp"

namespace fockfringe {

namespace {

constexpr std::size_t kMinFreePoints = 8;
constexpr int kScanPoints = 160;
constexpr int kScanIterations = 20;
constexpr double kLogitLimit = 40.0;
constexpr double kReportFloor = 1e-6;
constexpr double kTieTolerance = 1e-9;

// Softmax over N = 1..N_max with the N = 1 logit pinned at zero.
std::vector<double> softmax_fractions(const Eigen::VectorXd& params, int max_atoms) {
    std::vector<double> f(static_cast<std::size_t>(max_atoms));
    double largest = 0.0;
    for (int k = 1; k < max_atoms; ++k) {
        largest = std::max(largest, params[k - 1]);
    }
    double sum = 0.0;
    for (int k = 0; k < max_atoms; ++k) {
        const double logit = k == 0 ? 0.0 : params[k - 1];
        f[static_cast<std::size_t>(k)] = std::exp(logit - largest);
        sum += f[static_cast<std::size_t>(k)];
    }
    for (auto& v : f) {
        v /= sum;
    }
    return f;
}

Eigen::VectorXd logits_from_fractions(const std::vector<double>& f) {
    Eigen::VectorXd z(static_cast<Eigen::Index>(f.size()) - 1);
    for (std::size_t k = 1; k < f.size(); ++k) {
        z[static_cast<Eigen::Index>(k) - 1] =
            std::clamp(std::log(std::max(f[k], 1e-300) / f[0]), -kLogitLimit, kLogitLimit);
    }
    return z;
}

// Weights 1/sigma^2 scaled to mean 1. `scale` receives the divisor, so
// scale * w recovers 1/sigma^2 (1 when the trace has no usable errors).
std::vector<double> normalized_weights(const VisibilityTrace& trace, const std::vector<std::size_t>& used,
                                       double* scale = nullptr) {
    std::vector<double> sigma;
    sigma.reserve(used.size());
    bool all_positive = true;
    for (auto i : used) {
        sigma.push_back(trace.contrast_error[i]);
        all_positive = all_positive && trace.contrast_error[i] > 0.0 && std::isfinite(trace.contrast_error[i]);
    }
    std::vector<double> w(used.size(), 1.0);
    if (all_positive && !sigma.empty()) {
        std::vector<double> sorted = sigma;
        std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(sorted.size() / 2), sorted.end());
        const double floor = 1e-3 * sorted[sorted.size() / 2];
        double mean = 0.0;
        for (std::size_t j = 0; j < sigma.size(); ++j) {
            const double s = std::max(sigma[j], floor);
            w[j] = 1.0 / (s * s);
            mean += w[j];
        }
        mean /= static_cast<double>(w.size());
        for (auto& v : w) {
            v /= mean;
        }
        if (scale) {
            *scale = mean;
        }
    } else if (scale) {
        *scale = 1.0;
    }
    return w;
}

std::vector<std::size_t> usable_points(const VisibilityTrace& trace) {
    std::vector<std::size_t> used;
    for (std::size_t i = 0; i < trace.size(); ++i) {
        if (!trace.failed[i] && std::isfinite(trace.contrast[i])) {
            used.push_back(i);
        }
    }
    return used;
}

struct ModelLayout {
    int max_atoms = 4;
    bool free_interaction = true;
    double fixed_interaction = 0.0;

    Eigen::Index logits() const { return max_atoms - 1; }
    Eigen::Index size() const { return logits() + (free_interaction ? 2 : 1); }
    Eigen::Index gamma_index() const { return size() - 1; }

    VisibilityModelPoint unpack(const Eigen::VectorXd& p) const {
        VisibilityModelPoint point;
        point.fractions = softmax_fractions(p, max_atoms);
        point.interaction = free_interaction ? p[logits()] : fixed_interaction;
        point.dephasing = p[gamma_index()];
        return point;
    }

    Eigen::VectorXd pack(const std::vector<double>& f, double interaction, double dephasing) const {
        Eigen::VectorXd p(size());
        p.head(logits()) = logits_from_fractions(f);
        if (free_interaction) {
            p[logits()] = interaction;
        }
        p[gamma_index()] = dephasing;
        return p;
    }
};

struct Candidate {
    LeastSquaresResult solved;
    VisibilityModelPoint point;
};

std::vector<std::vector<double>> starting_fractions(int max_atoms) {
    std::vector<std::vector<double>> starts;
    for (int dominant = 0; dominant < max_atoms; ++dominant) {
        std::vector<double> f(static_cast<std::size_t>(max_atoms),
                              max_atoms > 1 ? 0.15 / (max_atoms - 1) : 1.0);
        f[static_cast<std::size_t>(dominant)] = max_atoms > 1 ? 0.85 : 1.0;
        starts.push_back(f);
    }
    starts.emplace_back(static_cast<std::size_t>(max_atoms), 1.0 / max_atoms);
    for (double mean : {0.5, 1.0, 2.0}) {
        std::vector<double> f(static_cast<std::size_t>(max_atoms));
        double sum = 0.0;
        for (int k = 0; k < max_atoms; ++k) {
            f[static_cast<std::size_t>(k)] = poisson_pmf(k + 1, mean);
            sum += f[static_cast<std::size_t>(k)];
        }
        for (auto& v : f) {
            v /= sum;
        }
        starts.push_back(f);
    }
    return starts;
}

} // namespace

double CtFitResult::fraction(int atoms) const {
    if (atoms < 1 || atoms > max_atoms()) {
        return 0.0;
    }
    return fractions[static_cast<std::size_t>(atoms - 1)];
}

OccupationDistribution CtFitResult::distribution() const {
    std::vector<double> f{0.0};
    f.insert(f.end(), fractions.begin(), fractions.end());
    return OccupationDistribution::normalized(std::move(f));
}

double visibility_model(const VisibilityModelPoint& point, double time) {
    const double c = std::cos(point.interaction * time);
    double numerator = 0.0;
    double denominator = 0.0;
    double power = 1.0;
    for (std::size_t k = 0; k < point.fractions.size(); ++k) {
        const double weight = point.fractions[k] * static_cast<double>(k + 1);
        numerator += weight * power;
        denominator += weight;
        power *= c;
    }
    return std::exp(-point.dephasing * time) * std::abs(numerator) / denominator;
}

double visibility_model_cost(const VisibilityTrace& trace, const VisibilityModelPoint& point) {
    trace.validate();
    const auto used = usable_points(trace);
    const auto w = normalized_weights(trace, used);
    double cost = 0.0;
    for (std::size_t j = 0; j < used.size(); ++j) {
        const auto i = used[j];
        const double r = visibility_model(point, trace.times[i]) - trace.contrast[i];
        cost += w[j] * r * r;
    }
    return 0.5 * cost;
}

CtFitResult fit_visibility_model(const VisibilityTrace& trace, const VisibilityFitOptions& options) {
    trace.validate();
    if (options.max_atoms < 1 || options.max_atoms > kMaxAtomsPerSite) {
        throw CapacityError("N_max must lie in 1.." + std::to_string(kMaxAtomsPerSite));
    }
    const auto used = usable_points(trace);
    ModelLayout layout;
    layout.max_atoms = options.max_atoms;
    layout.free_interaction = !options.fixed_interaction.has_value();
    if (options.fixed_interaction) {
        if (!(*options.fixed_interaction > 0.0)) {
            throw DomainError("fixed interaction must be positive");
        }
        layout.fixed_interaction = *options.fixed_interaction;
    }
    const std::size_t needed = layout.free_interaction ? kMinFreePoints : static_cast<std::size_t>(layout.size()) + 1;
    if (used.size() < needed) {
        throw ArityError("visibility fit needs at least " + std::to_string(needed) + " usable points, got " +
                         std::to_string(used.size()));
    }
    if (std::all_of(used.begin(), used.end(), [&](std::size_t i) { return trace.low_signal[i]; })) {
        throw DegenerateError("every usable point is low-signal; occupation statistics are unidentifiable");
    }

    std::vector<double> times;
    std::vector<double> values;
    for (auto i : used) {
        times.push_back(trace.times[i]);
        values.push_back(trace.contrast[i]);
    }
    const auto weights = normalized_weights(trace, used);
    std::vector<double> root_w(weights.size());
    std::transform(weights.begin(), weights.end(), root_w.begin(), [](double w) { return std::sqrt(w); });

    const auto [t_min, t_max] = std::minmax_element(times.begin(), times.end());
    const double span = *t_max - *t_min;
    if (!(span > 0.0)) {
        throw DegenerateError("visibility trace spans zero time");
    }
    std::vector<double> sorted = times;
    std::sort(sorted.begin(), sorted.end());
    double min_step = span;
    for (std::size_t i = 1; i < sorted.size(); ++i) {
        const double step = sorted[i] - sorted[i - 1];
        if (step > 0.0) {
            min_step = std::min(min_step, step);
        }
    }
    const double u_low = constants::pi / span;
    const double u_high = constants::pi / min_step;

    auto make_problem = [&](const ModelLayout& model) {
        LeastSquaresProblem problem;
        problem.residual_count = times.size();
        problem.residual = [&, model](const Eigen::VectorXd& p, Eigen::VectorXd& r) {
            const VisibilityModelPoint point = model.unpack(p);
            for (std::size_t j = 0; j < times.size(); ++j) {
                r[static_cast<Eigen::Index>(j)] = root_w[j] * (visibility_model(point, times[j]) - values[j]);
            }
        };
        problem.project = [model](Eigen::VectorXd& p) {
            for (Eigen::Index k = 0; k < model.logits(); ++k) {
                p[k] = std::clamp(p[k], -kLogitLimit, kLogitLimit);
            }
            if (model.free_interaction) {
                p[model.logits()] = std::max(p[model.logits()], 1e-9);
            }
            p[model.gamma_index()] = std::max(p[model.gamma_index()], 0.0);
        };
        return problem;
    };

    const double gamma_start = 0.1 / span;
    const auto starts = starting_fractions(layout.max_atoms);

    // Candidate interaction energies: U is multimodal, so scan it with the
    // other parameters relaxed briefly and keep the two deepest minima.
    std::vector<double> u_guesses;
    if (layout.free_interaction) {
        ModelLayout pinned = layout;
        pinned.free_interaction = false;
        LeastSquaresOptions quick;
        quick.max_iterations = kScanIterations;
        std::vector<double> grid(kScanPoints);
        std::vector<double> scan_cost(kScanPoints);
        const auto& scan_start = starts[static_cast<std::size_t>(layout.max_atoms) + 2]; // Poisson mean 1
        for (int s = 0; s < kScanPoints; ++s) {
            grid[static_cast<std::size_t>(s)] =
                u_low * std::pow(u_high / u_low, static_cast<double>(s) / (kScanPoints - 1));
            pinned.fixed_interaction = grid[static_cast<std::size_t>(s)];
            const auto problem = make_problem(pinned);
            scan_cost[static_cast<std::size_t>(s)] =
                levenberg_marquardt(problem, pinned.pack(scan_start, 0.0, gamma_start), quick).cost;
        }
        std::vector<std::size_t> minima;
        for (std::size_t s = 0; s < grid.size(); ++s) {
            const bool left_ok = s == 0 || scan_cost[s] <= scan_cost[s - 1];
            const bool right_ok = s + 1 == grid.size() || scan_cost[s] <= scan_cost[s + 1];
            if (left_ok && right_ok) {
                minima.push_back(s);
            }
        }
        std::stable_sort(minima.begin(), minima.end(),
                         [&](std::size_t a, std::size_t b) { return scan_cost[a] < scan_cost[b]; });
        for (std::size_t k = 0; k < minima.size() && u_guesses.size() < 2; ++k) {
            u_guesses.push_back(grid[minima[k]]);
        }
        if (u_guesses.size() < 2) {
            u_guesses.push_back(u_guesses.empty() ? std::sqrt(u_low * u_high) : 0.5 * u_guesses.front());
        }
    } else {
        u_guesses.push_back(layout.fixed_interaction);
    }

    std::optional<Candidate> best;
    const auto problem = make_problem(layout);
    for (double u0 : u_guesses) {
        for (const auto& f0 : starts) {
            Candidate c;
            c.solved = levenberg_marquardt(problem, layout.pack(f0, u0, gamma_start));
            c.point = layout.unpack(c.solved.params);
            if (!std::isfinite(c.solved.cost)) {
                continue;
            }
            if (!best) {
                best = std::move(c);
                continue;
            }
            const double scale = std::max(best->solved.cost, std::numeric_limits<double>::min());
            const double gap = (c.solved.cost - best->solved.cost) / scale;
            if (gap < -kTieTolerance || (std::abs(gap) <= kTieTolerance && c.point.dephasing < best->point.dephasing)) {
                best = std::move(c);
            }
        }
    }
    if (!best) {
        throw DegenerateError("visibility fit produced no finite solution");
    }

    // Delta-method transform from (logits, U, Gamma) to (f_1..f_Nmax, U, Gamma).
    const int n_atoms = layout.max_atoms;
    const auto& f = best->point.fractions;
    Eigen::MatrixXd transform = Eigen::MatrixXd::Zero(n_atoms + 2, layout.size());
    for (int a = 0; a < n_atoms; ++a) {
        for (int k = 1; k < n_atoms; ++k) {
            const double delta = a == k ? 1.0 : 0.0;
            transform(a, k - 1) = f[static_cast<std::size_t>(a)] * (delta - f[static_cast<std::size_t>(k)]);
        }
    }
    if (layout.free_interaction) {
        transform(n_atoms, layout.logits()) = 1.0;
    }
    transform(n_atoms + 1, layout.gamma_index()) = 1.0;

    CtFitResult result;
    result.covariance = transform * best->solved.covariance * transform.transpose();
    result.fractions = f;
    for (auto& v : result.fractions) {
        if (v < kReportFloor) {
            v = 0.0;
        }
    }
    const double kept = std::accumulate(result.fractions.begin(), result.fractions.end(), 0.0);
    for (auto& v : result.fractions) {
        v /= kept;
    }
    for (int a = 0; a < n_atoms; ++a) {
        result.fraction_errors.push_back(std::sqrt(std::max(result.covariance(a, a), 0.0)));
    }
    result.interaction = best->point.interaction;
    result.interaction_error = std::sqrt(std::max(result.covariance(n_atoms, n_atoms), 0.0));
    result.interaction_fixed = !layout.free_interaction;
    result.dephasing = best->point.dephasing;
    result.dephasing_error = std::sqrt(std::max(result.covariance(n_atoms + 1, n_atoms + 1), 0.0));
    double weight_scale = 1.0;
    normalized_weights(trace, used, &weight_scale);
    result.chi_squared = 2.0 * best->solved.cost * weight_scale;
    result.degrees_of_freedom = static_cast<int>(times.size()) - static_cast<int>(layout.size());
    result.reduced_chi_squared =
        result.degrees_of_freedom > 0 ? result.chi_squared / result.degrees_of_freedom : 0.0;
    double sum_sq = 0.0;
    for (std::size_t j = 0; j < times.size(); ++j) {
        const double r = visibility_model(best->point, times[j]) - values[j];
        sum_sq += r * r;
    }
    result.residual_rms = std::sqrt(sum_sq / static_cast<double>(times.size()));
    result.converged = best->solved.converged;
    return result;
}

} // namespace fockfringe
