#pragma once

#include "ffm.hpp"

#include <vector>

namespace ffdn {

struct FfdnConfig {
    std::vector<int> delays;       // main delays in samples, each >= 1
    Eigen::VectorXd input_gains;   // b
    Eigen::VectorXd output_gains;  // c
    double direct_gain = 0.0;      // d
    FfmCascade ffm;
    double sample_rate = 48000.0;

    int size() const { return ffm.size(); }
    void validate() const;
};

// deg A(z) + sum of main delays: the minimal delay-element count.
long total_order(const FfdnConfig& cfg);

struct RtPoint {
    double freq_hz = 0.0;
    double t60_s = 0.0;
};

struct AttenuationSpec {
    enum class Mode { lossless, broadband, frequency_dependent };
    Mode mode = Mode::lossless;
    double gain_per_sample = 1.0;  // broadband, linear, in (0, 1]
    std::vector<RtPoint> rt_curve;

    static AttenuationSpec lossless() { return {}; }
    static AttenuationSpec broadband(double gain);
    static AttenuationSpec frequency_dependent(std::vector<RtPoint> curve);
    // Flat reverberation-time target handled through the lumped design path.
    static AttenuationSpec flat_t60(double t60_s);
};

// Per-sample gain implied by a T60 target: -60 / (f_s T60) in dB.
double gain_per_sample_db(double t60_s, double sample_rate);

// ---------------------------------------------------------------------------
// Group delay

struct GroupDelayMatrix {
    int size = 0;
    int grid_count = 0;
    std::vector<Mat> theta;                 // per grid point, samples
    std::vector<Eigen::ArrayXXi> valid;     // 0 where the entry magnitude vanishes
    std::vector<Mat> weight;                // |A_ij(w)|^2, 0 where invalid
};

struct GroupDelayPair {
    std::vector<Eigen::VectorXd> left;   // Theta_L per grid point
    std::vector<Eigen::VectorXd> right;  // Theta_R per grid point
    double residual_error = 0.0;         // max |L_i + R_j - Theta_ij| over valid
    double mean_abs_residual = 0.0;
};

// Entry-wise group delay of the expanded FFM response; entries whose
// magnitude falls below 1e-6 at a grid point are flagged invalid.
GroupDelayMatrix group_delay_matrix(const FfmCascade& ffm, const FrequencyGrid& grid);

// Rank-1 outer-sum fit Theta_L(w) (+) Theta_R(w)^T ~= Theta_A(w), solved per
// frequency as an energy-weighted additive least squares. The weighting
// suppresses the unbounded phase derivatives near spectral nulls of sparse
// entries; on exactly additive data it coincides with the
// exponentiate-and-SVD construction. Theta_L is normalized so its minimum
// over lines and frequencies is zero.
GroupDelayPair approximate_group_delay(const GroupDelayMatrix& theta);

// ---------------------------------------------------------------------------
// Attenuation realization

struct AttenuationRealization {
    enum class Kind {
        lossless,
        per_stage_exact,  // broadband: gains folded into every delay stage
        per_line_scalar,  // lumped scalar per main line (flat targets)
        per_line_fir,     // lumped minimum-phase FIR per main line
    };
    Kind kind = Kind::lossless;
    double gain_per_sample = 1.0;
    std::vector<double> line_gains;
    std::vector<std::vector<double>> line_firs;
    GroupDelayPair group_delay;  // populated for the lumped kinds
};

AttenuationRealization design_attenuation(const FfdnConfig& cfg, const AttenuationSpec& spec);

// ---------------------------------------------------------------------------
// Effective loop filter: the FFM with attenuation folded in. This is what
// both renderers run and what the modal solver differentiates.

struct LoopFilter {
    struct Stage {
        Mat mix;
        std::vector<int> delays;
        std::vector<double> gains;  // per line, paired with delays
    };
    int size = 0;
    std::vector<int> pre_delays;
    std::vector<double> pre_gains;
    std::vector<Stage> stages;
    std::vector<double> input_scale;             // scalar Gamma per line (empty = 1)
    std::vector<std::vector<double>> input_fir;  // FIR Gamma per line (empty = none)
    std::vector<int> main_delays;
    std::vector<double> main_gains;              // gain of each main delay line

    bool has_fir() const { return !input_fir.empty(); }
    // z^-1 degree of det A_eff: internal delays plus Gamma orders.
    long det_degree() const;
    long cascade_degree() const;
};

LoopFilter make_loop_filter(const FfdnConfig& cfg, const AttenuationRealization& att);

// A_eff(z) and its z-derivative.
void loop_eval(const LoopFilter& loop, cplx z, CMat& a, CMat& da);
// A_eff^-1(1/z) and its z-derivative (reversed cascade; Gamma inverted pointwise).
void loop_eval_inverse(const LoopFilter& loop, cplx z, CMat& ainv, CMat& dainv);

// Expanded coefficient form of the effective loop (attenuation folded).
PolynomialMatrix expand_loop(const LoopFilter& loop);

// ---------------------------------------------------------------------------
// Rendering

enum class EngineKind { cascade, fast_convolution };

struct RenderResult {
    std::vector<double> samples;
    EngineKind engine_used = EngineKind::cascade;
    bool fell_back = false;
};

std::vector<double> render_cascade(const FfdnConfig& cfg, const AttenuationRealization& att,
                                   long length);

// Block feedback loop with the FFM applied per frequency bin (overlap-save).
// Falls back to the cascade engine when no valid block size exists, i.e.
// when the largest power of two not exceeding min(delays) does not exceed
// the expanded FFM order.
RenderResult render_fast_convolution(const FfdnConfig& cfg, const AttenuationRealization& att,
                                     long length);

RenderResult render(const FfdnConfig& cfg, const AttenuationRealization& att, long length,
                    EngineKind engine);

}  // namespace ffdn
