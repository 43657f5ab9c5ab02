#pragma once

#include "engine.hpp"

#include <cstdint>
#include <vector>

namespace ffdn {

// Everything needed to evaluate the generalized characteristic polynomial
// p(z) = z^deg_a det(P(z)) and its reversal: the attenuated loop filter,
// the main delays with their gains, and the input/output taps.
class GcpContext {
public:
    GcpContext(const FfdnConfig& cfg, const AttenuationRealization& att);

    int size() const { return loop_.size; }
    long deg_a() const { return deg_a_; }
    long total_order() const { return total_order_; }
    const FfdnConfig& config() const { return cfg_; }
    const LoopFilter& loop() const { return loop_; }

    // P(z) = diag(z^m / g_m) - A_eff(z) and its derivative.
    void assemble(cplx z, CMat& p, CMat& dp) const;
    // Reversed counterpart P~(z) = diag(g_m z^m) - A_eff^-1(1/z).
    void assemble_reversed(cplx z, CMat& p, CMat& dp) const;

    // Logarithmic derivative p'(z)/p(z); interior form for |z| <= 1 and the
    // reversed form outside, per the two-sided evaluation rule.
    cplx log_derivative(cplx z) const;
    cplx log_derivative_interior(cplx z) const;
    cplx log_derivative_exterior(cplx z) const;

    // p(z)/p'(z) (the plain Newton correction).
    cplx newton_correction(cplx z) const;
    // p~'(z)/p~(z) of the reversed polynomial, |z| < 1 usage region.
    cplx reversed_newton_correction(cplx z) const;

private:
    FfdnConfig cfg_;
    LoopFilter loop_;
    long deg_a_ = 0;
    long total_order_ = 0;
};

struct EaiOptions {
    int max_sweeps = 100;
    double tol = 1e-10;
    bool gauss_seidel = true;
    std::uint64_t nudge_seed = 0x5eed;
};

struct ModalDecomposition {
    std::vector<cplx> poles;
    std::vector<cplx> residues;  // empty until compute_residues
    double direct = 0.0;
    int iterations_used = 0;
    double max_step_at_convergence = 0.0;
    std::vector<std::uint8_t> converged;

    bool all_converged() const;
};

// Simultaneous root iteration with pairwise deflation. Poles start on the
// unit circle with a golden-angle offset; a pole is frozen once its step
// drops below tol. Non-convergence is reported via the per-pole flags.
ModalDecomposition eai_solve(const GcpContext& ctx, const EaiOptions& opts = {});

// Residues via left/right null vectors of P(lambda):
// rho = (c^T x)(y^T b) / (y^T P'(lambda) x). Requires distinct poles; a
// cluster with pairwise distance below 1e-9 raises a numeric error.
void compute_residues(const GcpContext& ctx, ModalDecomposition& md);

// h[0] = d, h[n] = Re sum_i rho_i lambda_i^{n-1}.
std::vector<double> modal_reconstruction(const ModalDecomposition& md, long length);

struct DecayDistribution {
    std::vector<double> t60;  // per decaying pole, seconds
    long flagged = 0;         // poles with |lambda| >= 1
    std::vector<double> bin_centers;
    std::vector<double> probability;  // normalized histogram over t60
    double max_rel_deviation = 0.0;   // vs. target, when given
};

DecayDistribution decay_distribution(const ModalDecomposition& md, double sample_rate,
                                     double target_t60 = 0.0, int bins = 100);

}  // namespace ffdn
