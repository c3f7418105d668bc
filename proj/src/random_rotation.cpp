#include "rotquant/random_rotation.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <random>

#include "rotquant/error.hpp"
#include "rotquant/hadamard.hpp"

namespace rotquant {

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b) {
    auto mix = [](std::uint64_t z) {
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    };
    return mix(mix(mix(base) ^ a) ^ (b * 0xd1b54a32d192ed03ULL));
}

Eigen::MatrixXd sample_orthogonal(std::size_t n, std::uint64_t seed) {
    if (n == 0) throw ArgumentError("sample_orthogonal: dimension must be positive");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    const auto dim = static_cast<Eigen::Index>(n);
    Eigen::MatrixXd g(dim, dim);
    for (Eigen::Index j = 0; j < dim; ++j)
        for (Eigen::Index i = 0; i < dim; ++i) g(i, j) = normal(rng);

    Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
    Eigen::MatrixXd q = qr.householderQ();
    const auto& r = qr.matrixQR();
    for (Eigen::Index j = 0; j < dim; ++j) {
        if (r(j, j) < 0) q.col(j) = -q.col(j);
    }
    return q;
}

HaarRotation::HaarRotation(std::size_t n, std::uint64_t seed) : n_(n), seed_(seed) {
    if (n == 0) throw ArgumentError("HaarRotation: dimension must be positive");
}

void HaarRotation::apply(std::span<double> x) const {
    if (x.size() != n_) throw ShapeError("HaarRotation: vector length does not match dimension");
    // Q = H_0 H_1 ... H_{n-2} D, where H_j reflects coordinates j..n-1 and D
    // makes R's diagonal positive. Coordinate j is first touched by D_jj and
    // then by H_j, so the reflectors can be generated from the last one back.
    std::mt19937_64 rng(seed_);
    std::normal_distribution<double> normal;
    std::vector<double> v(n_);
    for (std::size_t j = n_; j-- > 0;) {
        const std::size_t k = n_ - j;
        double norm2 = 0.0;
        for (std::size_t t = 0; t < k; ++t) {
            v[t] = normal(rng);
            norm2 += v[t] * v[t];
        }
        const double sign = v[0] >= 0.0 ? 1.0 : -1.0;
        // R_jj = -sign(g_0) * |g|; D_jj flips Q's column when that is negative.
        // For the last coordinate there is no reflector and R_jj = g_0.
        const double d = (k == 1) ? sign : -sign;
        x[j] *= d;
        if (k == 1) continue;
        v[0] += sign * std::sqrt(norm2);
        double vv = 0.0, vx = 0.0;
        for (std::size_t t = 0; t < k; ++t) {
            vv += v[t] * v[t];
            vx += v[t] * x[j + t];
        }
        if (vv == 0.0) continue;
        const double f = 2.0 * vx / vv;
        for (std::size_t t = 0; t < k; ++t) x[j + t] -= f * v[t];
    }
}

Eigen::MatrixXd HaarRotation::matrix() const {
    const auto dim = static_cast<Eigen::Index>(n_);
    Eigen::MatrixXd q(dim, dim);
    std::vector<double> col(n_);
    for (std::size_t c = 0; c < n_; ++c) {
        std::fill(col.begin(), col.end(), 0.0);
        col[c] = 1.0;
        apply(col);
        for (std::size_t r = 0; r < n_; ++r) q(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = col[r];
    }
    return q;
}

std::vector<double> OutlierVector::materialize() const {
    if (dimension == 0) throw ArgumentError("outlier vector dimension must be positive");
    std::vector<double> x(dimension, 0.0);
    x[0] = peak;
    if (noise_std > 0.0) {
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> normal(0.0, noise_std);
        for (std::size_t i = 1; i < dimension; ++i) x[i] = normal(rng);
    }
    return x;
}

namespace {

double max_abs(std::span<const double> v) {
    double m = 0.0;
    for (double e : v) m = std::max(m, std::abs(e));
    return m;
}

HadamardOperator hadamard_for(std::size_t n) {
    auto recipe = exact_recipe(n);
    if (!recipe) {
        throw UnsupportedOrderError("no Hadamard construction for order " + std::to_string(n) +
                                    "; nearest constructible order is " +
                                    std::to_string(find_constructible_order(n).order()));
    }
    return HadamardOperator(*recipe);
}

}  // namespace

double max_abs_after(Transform transform, const OutlierVector& x, std::uint64_t rotation_seed) {
    auto v = x.materialize();
    if (transform == Transform::hadamard) {
        hadamard_for(x.dimension).apply(v, true);
    } else {
        HaarRotation(x.dimension, rotation_seed).apply(v);
    }
    return max_abs(v);
}

double theory_hadamard(std::size_t n, double peak) { return peak / std::sqrt(static_cast<double>(n)); }

double theory_rotation(std::size_t n, double peak) {
    const double dn = static_cast<double>(n);
    return peak * std::sqrt(2.0 * std::log(dn) / dn);
}

std::vector<ReductionReport> reduction_sweep(std::span<const std::size_t> dims, double peak, double noise_std,
                                             std::size_t trials, std::uint64_t seed) {
    if (trials == 0) throw ArgumentError("reduction_sweep: trials must be positive");
    if (noise_std < 0.0) throw ArgumentError("reduction_sweep: noise std must be non-negative");
    std::vector<ReductionReport> reports;
    for (std::size_t n : dims) {
        const HadamardOperator hadamard = hadamard_for(n);
        ReductionReport r;
        r.n = n;
        r.trials = trials;
        r.theory_hadamard = theory_hadamard(n, peak);
        r.theory_rotation = theory_rotation(n, peak);
        double sum_h = 0.0, sum_q = 0.0, sum_q2 = 0.0;
        for (std::size_t t = 0; t < trials; ++t) {
            OutlierVector x{n, peak, noise_std, derive_seed(seed, n, 2 * t)};
            auto base = x.materialize();

            auto h = base;
            hadamard.apply(h, true);
            sum_h += max_abs(h);

            auto q = std::move(base);
            HaarRotation(n, derive_seed(seed, n, 2 * t + 1)).apply(q);
            const double mq = max_abs(q);
            sum_q += mq;
            sum_q2 += mq * mq;
        }
        const double k = static_cast<double>(trials);
        r.empirical_max_hadamard = sum_h / k;
        r.empirical_max_rotation = sum_q / k;
        r.empirical_rotation_std =
            trials > 1 ? std::sqrt(std::max(0.0, (sum_q2 - sum_q * sum_q / k) / (k - 1.0))) : 0.0;
        reports.push_back(r);
    }
    return reports;
}

void write_sweep_csv(std::ostream& out, std::span<const ReductionReport> reports) {
    out << "n,theory_h,theory_q,emp_h,emp_q_mean,emp_q_std,trials\n";
    out << std::setprecision(17);
    for (const auto& r : reports) {
        out << r.n << ',' << r.theory_hadamard << ',' << r.theory_rotation << ',' << r.empirical_max_hadamard << ','
            << r.empirical_max_rotation << ',' << r.empirical_rotation_std << ',' << r.trials << '\n';
    }
}

MaxEntryBoundCheck orthogonal_max_entry_bound_check(std::size_t n, std::size_t trials, std::uint64_t seed) {
    if (n == 0) throw ArgumentError("bound check: dimension must be positive");
    MaxEntryBoundCheck check;
    const double bound = 1.0 / std::sqrt(static_cast<double>(n));
    check.min_max_entry = std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < trials; ++t) {
        const double m = sample_orthogonal(n, derive_seed(seed, n, t)).cwiseAbs().maxCoeff();
        check.min_max_entry = std::min(check.min_max_entry, m);
        if (m < bound - 1e-12) ++check.violations;
    }
    check.holds = check.violations == 0;
    if (auto recipe = exact_recipe(n); recipe && n <= 1024) {
        check.hadamard_constructible = true;
        check.hadamard_attains_bound = true;
        for (double v : build(*recipe).dense(true)) {
            if (std::abs(v) != bound) check.hadamard_attains_bound = false;
        }
    }
    return check;
}

}  // namespace rotquant
