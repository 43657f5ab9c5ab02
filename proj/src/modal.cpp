#include "modal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

namespace ffdn {

namespace {

bool finite(cplx v) { return std::isfinite(v.real()) && std::isfinite(v.imag()); }

}  // namespace

GcpContext::GcpContext(const FfdnConfig& cfg, const AttenuationRealization& att)
    : cfg_(cfg), loop_(make_loop_filter(cfg, att)) {
    deg_a_ = loop_.det_degree();
    long sum_m = 0;
    for (int m : cfg_.delays) sum_m += m;
    total_order_ = deg_a_ + sum_m;
}

void GcpContext::assemble(cplx z, CMat& p, CMat& dp) const {
    const int n = loop_.size;
    loop_eval(loop_, z, p, dp);
    p = -p;
    dp = -dp;
    for (int i = 0; i < n; ++i) {
        const int m = loop_.main_delays[static_cast<std::size_t>(i)];
        const double g = loop_.main_gains[static_cast<std::size_t>(i)];
        const cplx zm = std::pow(z, m - 1);
        p(i, i) += zm * z / g;
        dp(i, i) += static_cast<double>(m) * zm / g;
    }
}

void GcpContext::assemble_reversed(cplx z, CMat& p, CMat& dp) const {
    const int n = loop_.size;
    loop_eval_inverse(loop_, z, p, dp);
    p = -p;
    dp = -dp;
    for (int i = 0; i < n; ++i) {
        const int m = loop_.main_delays[static_cast<std::size_t>(i)];
        const double g = loop_.main_gains[static_cast<std::size_t>(i)];
        const cplx zm = std::pow(z, m - 1);
        p(i, i) += g * zm * z;
        dp(i, i) += g * static_cast<double>(m) * zm;
    }
}

cplx GcpContext::log_derivative_interior(cplx z) const {
    CMat p, dp;
    assemble(z, p, dp);
    Eigen::PartialPivLU<CMat> lu(p);
    const cplx trace = lu.solve(dp).trace();
    return trace + static_cast<double>(deg_a_) / z;
}

cplx GcpContext::reversed_newton_correction(cplx z) const {
    CMat p, dp;
    assemble_reversed(z, p, dp);
    Eigen::PartialPivLU<CMat> lu(p);
    cplx acc = lu.solve(dp).trace();
    // d/dz log det A_eff(1/z): the cascade determinant is a delay monomial,
    // the Gamma filters contribute their own logarithmic derivatives.
    acc += static_cast<double>(loop_.cascade_degree()) / z;
    if (loop_.has_fir()) {
        for (int i = 0; i < loop_.size; ++i) {
            const auto& taps = loop_.input_fir[static_cast<std::size_t>(i)];
            cplx v = 0.0, d = 0.0;
            for (std::size_t l = taps.size(); l-- > 0;) {
                d = d * z + static_cast<double>(l) * taps[l];
                v = v * z + taps[l];
            }
            acc += (d / z) / v;  // (sum l t_l z^{l-1}) / (sum t_l z^l)
        }
    }
    return acc;
}

cplx GcpContext::log_derivative_exterior(cplx z) const {
    const cplx y = 1.0 / z;
    const cplx reversed = reversed_newton_correction(y);
    return static_cast<double>(total_order_) / z - reversed / (z * z);
}

cplx GcpContext::log_derivative(cplx z) const {
    return std::abs(z) <= 1.0 ? log_derivative_interior(z) : log_derivative_exterior(z);
}

cplx GcpContext::newton_correction(cplx z) const { return 1.0 / log_derivative(z); }

bool ModalDecomposition::all_converged() const {
    return std::all_of(converged.begin(), converged.end(), [](std::uint8_t c) { return c != 0; });
}

ModalDecomposition eai_solve(const GcpContext& ctx, const EaiOptions& opts) {
    const long count = ctx.total_order();
    if (count < 1) throw std::invalid_argument("system order must be at least 1");

    ModalDecomposition md;
    md.direct = ctx.config().direct_gain;
    md.poles.resize(static_cast<std::size_t>(count));
    md.converged.assign(static_cast<std::size_t>(count), 0);
    std::vector<double> last_step(static_cast<std::size_t>(count), 0.0);

    // Uniform on the unit circle, rotated by a golden-angle fraction of the
    // spacing so initial symmetry does not lock the iteration.
    constexpr double kGolden = 0.38196601125010515;
    for (long k = 0; k < count; ++k) {
        const double angle = 2.0 * M_PI * (static_cast<double>(k) + kGolden) / static_cast<double>(count);
        md.poles[static_cast<std::size_t>(k)] = cplx(std::cos(angle), std::sin(angle));
    }

    std::mt19937_64 nudge_rng(opts.nudge_seed);
    std::uniform_real_distribution<double> unit(-0.5, 0.5);
    auto nudge = [&]() { return cplx(unit(nudge_rng), unit(nudge_rng)) * 1e-6; };

    std::vector<cplx> next(md.poles);
    constexpr double kMaxStep = 0.5;

    int sweep = 0;
    for (; sweep < opts.max_sweeps; ++sweep) {
        bool all_done = true;
        std::vector<cplx>& work = opts.gauss_seidel ? md.poles : next;
        if (!opts.gauss_seidel) next = md.poles;

        for (long k = 0; k < count; ++k) {
            if (md.converged[static_cast<std::size_t>(k)]) continue;
            const cplx zk = md.poles[static_cast<std::size_t>(k)];

            cplx w = ctx.log_derivative(zk);  // p'/p
            if (!finite(w)) {
                work[static_cast<std::size_t>(k)] = zk + nudge();
                all_done = false;
                continue;
            }
            cplx deflation = 0.0;
            for (long l = 0; l < count; ++l) {
                if (l == k) continue;
                const cplx diff = zk - md.poles[static_cast<std::size_t>(l)];
                if (diff == cplx(0.0, 0.0)) { deflation = cplx(1e30, 0.0); break; }
                deflation += 1.0 / diff;
            }
            cplx step = 1.0 / (w - deflation);
            if (!finite(step)) {
                work[static_cast<std::size_t>(k)] = zk + nudge();
                all_done = false;
                continue;
            }
            if (std::abs(step) > kMaxStep) step *= kMaxStep / std::abs(step);
            work[static_cast<std::size_t>(k)] = zk - step;
            last_step[static_cast<std::size_t>(k)] = std::abs(step);
            if (std::abs(step) < opts.tol)
                md.converged[static_cast<std::size_t>(k)] = 1;
            else
                all_done = false;
        }
        if (!opts.gauss_seidel) md.poles = next;
        if (all_done) { ++sweep; break; }
    }
    md.iterations_used = sweep;
    md.max_step_at_convergence = *std::max_element(last_step.begin(), last_step.end());
    return md;
}

void compute_residues(const GcpContext& ctx, ModalDecomposition& md) {
    const long count = static_cast<long>(md.poles.size());
    for (long i = 0; i < count; ++i)
        for (long j = i + 1; j < count; ++j)
            if (std::abs(md.poles[static_cast<std::size_t>(i)] - md.poles[static_cast<std::size_t>(j)]) < 1e-9)
                throw std::runtime_error("near-defective pole cluster; residues ill-conditioned");

    const Eigen::VectorXcd b = ctx.config().input_gains.cast<cplx>();
    const Eigen::VectorXcd c = ctx.config().output_gains.cast<cplx>();
    md.residues.resize(md.poles.size());
    CMat p, dp;
    for (std::size_t k = 0; k < md.poles.size(); ++k) {
        ctx.assemble(md.poles[k], p, dp);
        Eigen::JacobiSVD<CMat> svd(p, Eigen::ComputeFullU | Eigen::ComputeFullV);
        const int n = ctx.size();
        const Eigen::VectorXcd x = svd.matrixV().col(n - 1);           // right null vector
        const Eigen::VectorXcd y = svd.matrixU().col(n - 1).conjugate();  // y^T P = 0
        const cplx denom = y.transpose() * (dp * x);
        if (std::abs(denom) < 1e-300)
            throw std::runtime_error("defective pole encountered in residue computation");
        md.residues[k] = (c.transpose() * x).value() * (y.transpose() * b).value() / denom;
    }
}

std::vector<double> modal_reconstruction(const ModalDecomposition& md, long length) {
    if (md.residues.size() != md.poles.size())
        throw std::invalid_argument("residues not computed");
    std::vector<double> h(static_cast<std::size_t>(length), 0.0);
    if (length > 0) h[0] = md.direct;
    std::vector<cplx> power(md.poles.size(), cplx(1.0, 0.0));  // lambda^{n-1} at n=1
    for (long n = 1; n < length; ++n) {
        cplx acc = 0.0;
        for (std::size_t k = 0; k < md.poles.size(); ++k) {
            acc += md.residues[k] * power[k];
            power[k] *= md.poles[k];
        }
        h[static_cast<std::size_t>(n)] = acc.real();
    }
    return h;
}

DecayDistribution decay_distribution(const ModalDecomposition& md, double sample_rate,
                                     double target_t60, int bins) {
    DecayDistribution out;
    for (const cplx& pole : md.poles) {
        const double mag = std::abs(pole);
        if (mag >= 1.0) {
            ++out.flagged;
            continue;
        }
        // T60 = -60 / (f_s * 20 log10 |lambda|)
        out.t60.push_back(-3.0 / (sample_rate * std::log10(mag)));
    }
    if (target_t60 > 0.0) {
        double max_dev = 0.0;
        for (double t : out.t60) max_dev = std::max(max_dev, std::abs(t - target_t60) / target_t60);
        // Non-decaying modes in a lossy design count as unbounded deviation.
        if (out.flagged > 0) max_dev = std::numeric_limits<double>::infinity();
        out.max_rel_deviation = max_dev;
    }
    if (out.t60.empty() || bins < 1) return out;

    const auto [lo_it, hi_it] = std::minmax_element(out.t60.begin(), out.t60.end());
    const double lo = *lo_it, hi = *hi_it;
    const double width = (hi > lo) ? (hi - lo) / bins : 1.0;
    out.bin_centers.resize(static_cast<std::size_t>(bins));
    out.probability.assign(static_cast<std::size_t>(bins), 0.0);
    for (int k = 0; k < bins; ++k)
        out.bin_centers[static_cast<std::size_t>(k)] = lo + (k + 0.5) * width;
    for (double t : out.t60) {
        int idx = (hi > lo) ? static_cast<int>((t - lo) / width) : 0;
        idx = std::clamp(idx, 0, bins - 1);
        out.probability[static_cast<std::size_t>(idx)] += 1.0;
    }
    for (double& p : out.probability) p /= static_cast<double>(out.t60.size());
    return out;
}

}  // namespace ffdn
