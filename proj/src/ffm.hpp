#pragma once

#include "polymat.hpp"
#include "rng.hpp"

#include <cstdint>
#include <vector>

namespace ffdn {

// One mixing stage of the cascade: the signal passes through mix and then
// through per-line delays post_delays (samples, >= 0).
struct CascadeStage {
    Mat mix;
    std::vector<int> post_delays;
};

// Factorized FFM  A(z) = D_{m_K} U_K ... U_2 D_{m_1} U_1 D_{m_0}.
// pre_delays is m_0, stages hold (U_k, m_k) in application order.
// Stage matrices are validated orthogonal at construction.
class FfmCascade {
public:
    FfmCascade(int size, std::vector<int> pre_delays, std::vector<CascadeStage> stages);

    static FfmCascade scalar(const Mat& u);

    int size() const { return size_; }
    const std::vector<int>& pre_delays() const { return pre_delays_; }
    const std::vector<CascadeStage>& stages() const { return stages_; }
    int stage_count() const { return static_cast<int>(stages_.size()); }

    // Number of nonzero internal delay vectors (pre_delays included).
    int delay_stage_count() const;
    // Sum of all internal delays; equals the McMillan degree.
    long total_internal_delay() const;

private:
    int size_;
    std::vector<int> pre_delays_;
    std::vector<CascadeStage> stages_;
};

struct ElementalFactorization {
    int size = 0;
    std::vector<Eigen::VectorXd> vectors;  // unit norm, one per stage
};

struct VelvetSpec {
    int size = 0;
    int stages = 0;
    double density = 1.0;  // average pulses per sample per filter, (0, 1]
    std::uint64_t jitter_seed = 0;
};

struct OperationCounts {
    long adds = 0;
    long mults = 0;
    long delay_rw = 0;
};

// V(z) = I - v v^T + z^-1 v v^T for a unit vector v.
PolynomialMatrix elemental_block(const Eigen::VectorXd& v);

// Product V_K(z) ... V_1(z); paraunitary with McMillan degree K.
PolynomialMatrix ebfm(const ElementalFactorization& factors);

// Same product in cascade form (Householder rotations around single-line
// delays), for running through the time-domain engine.
FfmCascade ebfm_cascade(const ElementalFactorization& factors);

ElementalFactorization random_elemental(int size, int stages, std::uint64_t seed);

// Single-stage cascade D_{m1} U D_{m0}.
FfmCascade dfm(const std::vector<int>& m1, const Mat& u, const std::vector<int>& m0);

// Random dense iteration: K stages with delays m_k = N^{k-1} [0, 1, ..., N-1]
// and Haar-random mixing matrices.
FfmCascade rdfm(int size, int stages, std::uint64_t unitary_seed);

// Orthonormal Sylvester-Hadamard matrix; sizes 1, 2, 4, 8, ... (2^p).
Mat hadamard_matrix(int size);

// Hadamard iteration with minimal delays: every expanded coefficient is
// +-N^{-(K+1)/2} and every entry carries N^K pulses.
FfmCascade hadamard_ffm(int size, int stages);

// Sparse Hadamard iteration at pulse density rho; delays are stratified
// velvet positions scaled per stage, jittered, and retried until the
// N^K tap positions per entry are collision-free.
FfmCascade vfm(const VelvetSpec& spec);

PolynomialMatrix expand(const FfmCascade& c);

// Reversed cascade with transposed mixing matrices; expands to A^-1(1/z).
FfmCascade invert(const FfmCascade& c);

// Per-sample cost of running the cascade, calibrated to the published
// reference figures: Hadamard stages cost K N log2 N additions and a single
// final N-multiplication pass; general stages cost N^2 multiply-adds each;
// delay traffic is 2 N (K + 1) for K nonzero delay vectors.
OperationCounts operation_count(const FfmCascade& c, bool hadamard);

// Pulses-per-filter column of the reference cost table. Reproduces the
// table as printed (N^{2(K-1)} for Hadamard/velvet rows, 1 for scalar);
// note the constructions themselves give N^K pulses per entry.
long table_pulses_per_filter(int size, int delay_stages, bool hadamard);

// Tap positions common to every entry of a Hadamard/velvet cascade.
std::vector<long> cascade_tap_positions(const FfmCascade& c);

}  // namespace ffdn
