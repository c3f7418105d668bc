#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace rotquant {

// Mixes a base seed with up to two indices (splitmix64 finalizer), so trials
// can be run in any order and still draw the same numbers.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0);

// Haar-distributed orthogonal matrix: QR of a Gaussian matrix with the signs
// of R's diagonal folded into Q.
Eigen::MatrixXd sample_orthogonal(std::size_t n, std::uint64_t seed);

// Haar rotation applied in O(n^2) time and O(n) memory. It is the same
// Householder QR of a Gaussian matrix, with each reflector drawn fresh when
// it is needed instead of being stored.
class HaarRotation {
public:
    HaarRotation(std::size_t n, std::uint64_t seed);

    std::size_t dimension() const { return n_; }
    void apply(std::span<double> x) const;
    Eigen::MatrixXd matrix() const;

private:
    std::size_t n_;
    std::uint64_t seed_;
};

// x = (c, e_1, ..., e_{n-1}) with e_i ~ N(0, sigma^2).
struct OutlierVector {
    std::size_t dimension = 0;
    double peak = 200.0;
    double noise_std = 0.1;
    std::uint64_t seed = 0;

    std::vector<double> materialize() const;
};

enum class Transform { hadamard, rotation };

// max_i |(T x)_i| with T the normalized Hadamard matrix of order n or a Haar
// rotation drawn from rotation_seed.
double max_abs_after(Transform transform, const OutlierVector& x, std::uint64_t rotation_seed = 0);

struct ReductionReport {
    std::size_t n = 0;
    std::size_t trials = 0;
    double empirical_max_hadamard = 0.0;  // mean over trials
    double empirical_max_rotation = 0.0;  // mean over trials
    double empirical_rotation_std = 0.0;  // sample standard deviation over trials
    double theory_hadamard = 0.0;         // c / sqrt(n)
    double theory_rotation = 0.0;         // c * sqrt(2 ln n / n)
};

double theory_hadamard(std::size_t n, double peak);
double theory_rotation(std::size_t n, double peak);

std::vector<ReductionReport> reduction_sweep(std::span<const std::size_t> dims, double peak, double noise_std,
                                             std::size_t trials, std::uint64_t seed);

// Columns: n,theory_h,theory_q,emp_h,emp_q_mean,emp_q_std,trials
void write_sweep_csv(std::ostream& out, std::span<const ReductionReport> reports);

struct MaxEntryBoundCheck {
    bool holds = true;                  // every sample had max |Q_ij| >= 1/sqrt(n) - 1e-12
    double min_max_entry = 0.0;         // smallest max |Q_ij| seen
    std::size_t violations = 0;
    bool hadamard_constructible = false;
    bool hadamard_attains_bound = false;  // every |H_ij| / sqrt(n) == 1/sqrt(n)
};

MaxEntryBoundCheck orthogonal_max_entry_bound_check(std::size_t n, std::size_t trials, std::uint64_t seed);

}  // namespace rotquant
