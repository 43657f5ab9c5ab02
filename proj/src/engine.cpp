#include "engine.hpp"

#include "fft.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace ffdn {

namespace {

constexpr double kZeroMagnitude = 1e-6;   // group delay undefined below this
constexpr double kUnstableLimit = 1e6;

}  // namespace

void FfdnConfig::validate() const {
    const int n = ffm.size();
    if (static_cast<int>(delays.size()) != n)
        throw std::invalid_argument("main delay count must match FFM size");
    for (int m : delays)
        if (m < 1) throw std::invalid_argument("main delays must be >= 1 samples");
    if (input_gains.size() != n || output_gains.size() != n)
        throw std::invalid_argument("gain vector length must match FFM size");
    if (!(sample_rate > 0.0)) throw std::invalid_argument("sample rate must be positive");
}

long total_order(const FfdnConfig& cfg) {
    return cfg.ffm.total_internal_delay() +
           std::accumulate(cfg.delays.begin(), cfg.delays.end(), 0L);
}

AttenuationSpec AttenuationSpec::broadband(double gain) {
    if (!(gain > 0.0) || gain > 1.0)
        throw std::invalid_argument("broadband gain must be in (0, 1]");
    AttenuationSpec s;
    s.mode = Mode::broadband;
    s.gain_per_sample = gain;
    return s;
}

AttenuationSpec AttenuationSpec::frequency_dependent(std::vector<RtPoint> curve) {
    if (curve.empty()) throw std::invalid_argument("empty reverberation-time curve");
    for (const RtPoint& p : curve)
        if (!(p.t60_s > 0.0)) throw std::invalid_argument("T60 must be positive");
    AttenuationSpec s;
    s.mode = Mode::frequency_dependent;
    s.rt_curve = std::move(curve);
    std::sort(s.rt_curve.begin(), s.rt_curve.end(),
              [](const RtPoint& a, const RtPoint& b) { return a.freq_hz < b.freq_hz; });
    return s;
}

AttenuationSpec AttenuationSpec::flat_t60(double t60_s) {
    return frequency_dependent({RtPoint{0.0, t60_s}});
}

double gain_per_sample_db(double t60_s, double sample_rate) {
    if (!(t60_s > 0.0)) throw std::invalid_argument("T60 must be positive");
    return -60.0 / (sample_rate * t60_s);
}

// ---------------------------------------------------------------------------
// Group delay

GroupDelayMatrix group_delay_matrix(const FfmCascade& ffm, const FrequencyGrid& grid) {
    const PolynomialMatrix a = expand(ffm);
    const int n = a.size();
    const int g = grid.count();

    const auto resp = sample_on_grid(a, g);
    // tau_ij(w) = Re[(sum_l l F_l e^{-jwl}) / (sum_l F_l e^{-jwl})]
    std::vector<Mat> weighted(a.coeffs().size());
    for (int l = 0; l <= a.order(); ++l) weighted[static_cast<std::size_t>(l)] = l * a.coeff(l);
    const auto num = sample_on_grid(PolynomialMatrix(n, weighted), g);

    GroupDelayMatrix out;
    out.size = n;
    out.grid_count = g;
    out.theta.assign(static_cast<std::size_t>(g), Mat::Zero(n, n));
    out.valid.assign(static_cast<std::size_t>(g), Eigen::ArrayXXi::Ones(n, n));
    out.weight.assign(static_cast<std::size_t>(g), Mat::Zero(n, n));
    for (int k = 0; k < g; ++k) {
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) {
                const cplx denom = resp[static_cast<std::size_t>(k)](i, j);
                if (std::abs(denom) < kZeroMagnitude) {
                    out.valid[static_cast<std::size_t>(k)](i, j) = 0;
                } else {
                    out.theta[static_cast<std::size_t>(k)](i, j) =
                        (num[static_cast<std::size_t>(k)](i, j) / denom).real();
                    out.weight[static_cast<std::size_t>(k)](i, j) = std::norm(denom);
                }
            }
        }
    }
    return out;
}

GroupDelayPair approximate_group_delay(const GroupDelayMatrix& theta) {
    const int n = theta.size;
    const int g = theta.grid_count;
    GroupDelayPair pair;
    pair.left.assign(static_cast<std::size_t>(g), Eigen::VectorXd::Zero(n));
    pair.right.assign(static_cast<std::size_t>(g), Eigen::VectorXd::Zero(n));

    for (int k = 0; k < g; ++k) {
        const Mat& th = theta.theta[static_cast<std::size_t>(k)];
        const Mat& w = theta.weight[static_cast<std::size_t>(k)];
        if (theta.valid[static_cast<std::size_t>(k)].sum() == 0)
            throw std::runtime_error("group delay undefined for every entry at a grid point");

        // Normal equations of the weighted additive model in (row, col);
        // the system is gauge-singular (row + a, col - a), so take the
        // minimum-norm solution and fix the constant globally below.
        Mat m = Mat::Zero(2 * n, 2 * n);
        Eigen::VectorXd rhs = Eigen::VectorXd::Zero(2 * n);
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) {
                const double wij = w(i, j);
                m(i, i) += wij;
                m(i, n + j) += wij;
                m(n + j, i) += wij;
                m(n + j, n + j) += wij;
                rhs(i) += wij * th(i, j);
                rhs(n + j) += wij * th(i, j);
            }
        }
        Eigen::JacobiSVD<Mat> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
        svd.setThreshold(1e-10);
        const Eigen::VectorXd sol = svd.solve(rhs);
        pair.left[static_cast<std::size_t>(k)] = sol.head(n);
        pair.right[static_cast<std::size_t>(k)] = sol.tail(n);
    }

    // Canonical constant split: shift so min Theta_L over lines and grid is 0.
    double min_left = pair.left[0](0);
    for (const auto& l : pair.left) min_left = std::min(min_left, l.minCoeff());
    for (auto& l : pair.left) l.array() -= min_left;
    for (auto& r : pair.right) r.array() += min_left;

    // Residuals: max over valid entries, mean weighted by entry energy.
    double max_res = 0.0, sum_res = 0.0, sum_w = 0.0;
    for (int k = 0; k < g; ++k) {
        const Mat& th = theta.theta[static_cast<std::size_t>(k)];
        const Mat& w = theta.weight[static_cast<std::size_t>(k)];
        const Eigen::ArrayXXi& valid = theta.valid[static_cast<std::size_t>(k)];
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) {
                if (!valid(i, j)) continue;
                const double res = std::abs(pair.left[static_cast<std::size_t>(k)](i) +
                                            pair.right[static_cast<std::size_t>(k)](j) - th(i, j));
                max_res = std::max(max_res, res);
                sum_res += w(i, j) * res;
                sum_w += w(i, j);
            }
        }
    }
    pair.residual_error = max_res;
    pair.mean_abs_residual = sum_w > 0.0 ? sum_res / sum_w : 0.0;
    return pair;
}

// ---------------------------------------------------------------------------
// Attenuation design

namespace {

double interp_t60(const std::vector<RtPoint>& curve, double freq_hz) {
    if (curve.size() == 1) return curve.front().t60_s;
    if (freq_hz <= curve.front().freq_hz) return curve.front().t60_s;
    if (freq_hz >= curve.back().freq_hz) return curve.back().t60_s;
    for (std::size_t i = 1; i < curve.size(); ++i) {
        if (freq_hz <= curve[i].freq_hz) {
            const double t = (freq_hz - curve[i - 1].freq_hz) /
                             (curve[i].freq_hz - curve[i - 1].freq_hz);
            return curve[i - 1].t60_s + t * (curve[i].t60_s - curve[i - 1].t60_s);
        }
    }
    return curve.back().t60_s;
}

bool curve_is_flat(const std::vector<RtPoint>& curve) {
    for (const RtPoint& p : curve)
        if (std::abs(p.t60_s - curve.front().t60_s) > 1e-12 * curve.front().t60_s) return false;
    return true;
}

// Minimum-phase FIR with the given magnitude samples over the full circle
// (real cepstrum folding), truncated to taps coefficients.
std::vector<double> minimum_phase_fir(const std::vector<double>& magnitude, int taps) {
    const std::size_t n = magnitude.size();
    std::vector<fft::cplx> cep(n);
    for (std::size_t k = 0; k < n; ++k)
        cep[k] = std::log(std::max(magnitude[k], 1e-12));
    fft::inverse(cep);
    // Fold the even cepstrum onto the causal side.
    std::vector<fft::cplx> folded(n, 0.0);
    folded[0] = cep[0];
    for (std::size_t k = 1; k < n / 2; ++k) folded[k] = cep[k] + std::conj(cep[n - k]);
    folded[n / 2] = cep[n / 2];
    fft::forward(folded);
    for (auto& v : folded) v = std::exp(v);
    fft::inverse(folded);
    std::vector<double> h(static_cast<std::size_t>(taps));
    for (int k = 0; k < taps; ++k) h[static_cast<std::size_t>(k)] = folded[static_cast<std::size_t>(k)].real();
    return h;
}

constexpr int kGroupDelayGrid = 256;
constexpr int kFirGrid = 4096;
constexpr int kFirTaps = 33;  // order 32

}  // namespace

AttenuationRealization design_attenuation(const FfdnConfig& cfg, const AttenuationSpec& spec) {
    cfg.validate();
    AttenuationRealization out;
    switch (spec.mode) {
        case AttenuationSpec::Mode::lossless:
            out.kind = AttenuationRealization::Kind::lossless;
            return out;
        case AttenuationSpec::Mode::broadband:
            if (!(spec.gain_per_sample > 0.0) || spec.gain_per_sample > 1.0)
                throw std::invalid_argument("broadband gain must be in (0, 1]");
            out.kind = AttenuationRealization::Kind::per_stage_exact;
            out.gain_per_sample = spec.gain_per_sample;
            return out;
        case AttenuationSpec::Mode::frequency_dependent:
            break;
    }
    if (spec.rt_curve.empty()) throw std::invalid_argument("empty reverberation-time curve");
    for (const RtPoint& p : spec.rt_curve)
        if (!(p.t60_s > 0.0)) throw std::invalid_argument("T60 must be positive");

    const int n = cfg.size();
    const FrequencyGrid grid(kGroupDelayGrid);
    const GroupDelayMatrix theta = group_delay_matrix(cfg.ffm, grid);
    out.group_delay = approximate_group_delay(theta);

    if (curve_is_flat(spec.rt_curve)) {
        // Flat target: one scalar per line with the frequency-averaged group
        // delay in the exponent. Keeps the system order unchanged, which is
        // what makes the modal decay study meaningful.
        const double db_per_sample = gain_per_sample_db(spec.rt_curve.front().t60_s, cfg.sample_rate);
        out.kind = AttenuationRealization::Kind::per_line_scalar;
        out.line_gains.resize(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) {
            double mean_theta = 0.0;
            for (int k = 0; k < kGroupDelayGrid; ++k)
                mean_theta += out.group_delay.left[static_cast<std::size_t>(k)](i) +
                              out.group_delay.right[static_cast<std::size_t>(k)](i);
            mean_theta /= kGroupDelayGrid;
            const double exponent = cfg.delays[static_cast<std::size_t>(i)] + mean_theta;
            out.line_gains[static_cast<std::size_t>(i)] =
                std::pow(10.0, db_per_sample * exponent / 20.0);
        }
        return out;
    }

    // Colored target: per-line minimum-phase FIR matched to
    // gamma(w)^(m_i + Theta_L,i(w) + Theta_R,i(w)).
    out.kind = AttenuationRealization::Kind::per_line_fir;
    out.line_firs.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        std::vector<double> mag(kFirGrid);
        for (int k = 0; k < kFirGrid; ++k) {
            // Mirror-symmetric magnitude: use |w| folded to [0, pi].
            const double frac = static_cast<double>(k) / kFirGrid;
            const double wrapped = frac <= 0.5 ? frac : 1.0 - frac;
            const double freq_hz = wrapped * cfg.sample_rate;
            const double db = gain_per_sample_db(interp_t60(spec.rt_curve, freq_hz), cfg.sample_rate);
            // Theta grid is coarser; interpolate linearly on the circle.
            const double pos = wrapped * kGroupDelayGrid;
            const int k0 = static_cast<int>(pos) % kGroupDelayGrid;
            const int k1 = (k0 + 1) % kGroupDelayGrid;
            const double t = pos - std::floor(pos);
            const double gd = (1.0 - t) * (out.group_delay.left[static_cast<std::size_t>(k0)](i) +
                                           out.group_delay.right[static_cast<std::size_t>(k0)](i)) +
                              t * (out.group_delay.left[static_cast<std::size_t>(k1)](i) +
                                   out.group_delay.right[static_cast<std::size_t>(k1)](i));
            const double exponent = cfg.delays[static_cast<std::size_t>(i)] + gd;
            mag[static_cast<std::size_t>(k)] = std::pow(10.0, db * exponent / 20.0);
        }
        out.line_firs[static_cast<std::size_t>(i)] = minimum_phase_fir(mag, kFirTaps);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Loop filter

long LoopFilter::cascade_degree() const {
    long total = std::accumulate(pre_delays.begin(), pre_delays.end(), 0L);
    for (const Stage& s : stages) total += std::accumulate(s.delays.begin(), s.delays.end(), 0L);
    return total;
}

long LoopFilter::det_degree() const {
    long total = cascade_degree();
    for (const auto& fir : input_fir) total += static_cast<long>(fir.size()) - 1;
    return total;
}

LoopFilter make_loop_filter(const FfdnConfig& cfg, const AttenuationRealization& att) {
    cfg.validate();
    const int n = cfg.size();
    LoopFilter loop;
    loop.size = n;
    loop.pre_delays = cfg.ffm.pre_delays();
    loop.pre_gains.assign(static_cast<std::size_t>(n), 1.0);
    loop.main_delays = cfg.delays;
    loop.main_gains.assign(static_cast<std::size_t>(n), 1.0);
    for (const CascadeStage& s : cfg.ffm.stages())
        loop.stages.push_back({s.mix, s.post_delays, std::vector<double>(static_cast<std::size_t>(n), 1.0)});

    switch (att.kind) {
        case AttenuationRealization::Kind::lossless:
            break;
        case AttenuationRealization::Kind::per_stage_exact: {
            const double g = att.gain_per_sample;
            auto pow_gain = [g](int m) { return std::pow(g, m); };
            for (int i = 0; i < n; ++i) {
                loop.pre_gains[static_cast<std::size_t>(i)] = pow_gain(loop.pre_delays[static_cast<std::size_t>(i)]);
                loop.main_gains[static_cast<std::size_t>(i)] = pow_gain(loop.main_delays[static_cast<std::size_t>(i)]);
            }
            for (auto& s : loop.stages)
                for (int i = 0; i < n; ++i)
                    s.gains[static_cast<std::size_t>(i)] = pow_gain(s.delays[static_cast<std::size_t>(i)]);
            break;
        }
        case AttenuationRealization::Kind::per_line_scalar:
            loop.input_scale = att.line_gains;
            break;
        case AttenuationRealization::Kind::per_line_fir:
            loop.input_fir = att.line_firs;
            break;
    }
    return loop;
}

namespace {

void scalar_fir_eval(const std::vector<double>& taps, cplx z, cplx& value, cplx& deriv) {
    // value = sum t_l z^-l, deriv = sum -l t_l z^-l-1 by Horner in 1/z.
    const cplx zi = 1.0 / z;
    cplx v = 0.0, d = 0.0;
    for (std::size_t l = taps.size(); l-- > 0;) {
        v = v * zi + taps[l];
        d = d * zi + static_cast<double>(l) * taps[l];
    }
    value = v;
    deriv = -d * zi / z;
}

}  // namespace

void loop_eval(const LoopFilter& loop, cplx z, CMat& a, CMat& da) {
    const int n = loop.size;
    a = CMat::Identity(n, n);
    da = CMat::Zero(n, n);
    const cplx zi = 1.0 / z;

    auto apply_delays = [&](const std::vector<int>& delays, const std::vector<double>& gains) {
        for (int i = 0; i < n; ++i) {
            const int m = delays[static_cast<std::size_t>(i)];
            const double g = gains[static_cast<std::size_t>(i)];
            const cplx w = g * std::pow(zi, m);
            const cplx dw = -static_cast<double>(m) * w * zi;  // d/dz g z^-m
            da.row(i) = w * da.row(i) + dw * a.row(i);
            a.row(i) *= w;
        }
    };

    if (!loop.input_scale.empty()) {
        for (int i = 0; i < n; ++i) {
            a(i, i) = loop.input_scale[static_cast<std::size_t>(i)];
        }
    } else if (loop.has_fir()) {
        for (int i = 0; i < n; ++i) {
            cplx v, d;
            scalar_fir_eval(loop.input_fir[static_cast<std::size_t>(i)], z, v, d);
            a(i, i) = v;
            da(i, i) = d;
        }
    }

    apply_delays(loop.pre_delays, loop.pre_gains);
    for (const LoopFilter::Stage& s : loop.stages) {
        a = s.mix * a;
        da = s.mix * da;
        apply_delays(s.delays, s.gains);
    }
}

void loop_eval_inverse(const LoopFilter& loop, cplx z, CMat& ainv, CMat& dainv) {
    const int n = loop.size;
    ainv = CMat::Identity(n, n);
    dainv = CMat::Zero(n, n);
    const cplx zi = 1.0 / z;

    auto apply_delays = [&](const std::vector<int>& delays, const std::vector<double>& gains) {
        for (int i = 0; i < n; ++i) {
            const int m = delays[static_cast<std::size_t>(i)];
            const cplx w = std::pow(zi, m) / gains[static_cast<std::size_t>(i)];
            const cplx dw = -static_cast<double>(m) * w * zi;
            dainv.row(i) = w * dainv.row(i) + dw * ainv.row(i);
            ainv.row(i) *= w;
        }
    };

    // A^-1(1/z) = D~_{m_0} U_1^T D~_{m_1} ... U_K^T D~_{m_K} with inverted gains.
    const auto& stages = loop.stages;
    if (!stages.empty()) {
        apply_delays(stages.back().delays, stages.back().gains);
        for (std::size_t s = stages.size(); s-- > 0;) {
            ainv = stages[s].mix.transpose() * ainv;
            dainv = stages[s].mix.transpose() * dainv;
            const std::vector<int>& d = (s > 0) ? stages[s - 1].delays : loop.pre_delays;
            const std::vector<double>& g = (s > 0) ? stages[s - 1].gains : loop.pre_gains;
            apply_delays(d, g);
        }
    } else {
        apply_delays(loop.pre_delays, loop.pre_gains);
    }

    // Left-multiply by diag(1 / Gamma_i(1/z)).
    if (!loop.input_scale.empty()) {
        for (int i = 0; i < n; ++i) {
            const double s = loop.input_scale[static_cast<std::size_t>(i)];
            ainv.row(i) /= s;
            dainv.row(i) /= s;
        }
    } else if (loop.has_fir()) {
        for (int i = 0; i < n; ++i) {
            const auto& taps = loop.input_fir[static_cast<std::size_t>(i)];
            // Gamma_i(1/z) = sum t_l z^l by Horner in z.
            cplx v = 0.0, d = 0.0;
            for (std::size_t l = taps.size(); l-- > 0;) {
                d = d * z + static_cast<double>(l) * taps[l];
                v = v * z + taps[l];
            }
            d /= z;  // sum l t_l z^{l-1}
            const cplx w = 1.0 / v;
            const cplx dw = -d / (v * v);
            dainv.row(i) = w * dainv.row(i) + dw * ainv.row(i);
            ainv.row(i) *= w;
        }
    }
}

PolynomialMatrix expand_loop(const LoopFilter& loop) {
    const int n = loop.size;
    std::vector<Mat> coeffs{Mat::Identity(n, n)};

    auto apply_delays = [&](const std::vector<int>& delays, const std::vector<double>& gains) {
        const int max_d = *std::max_element(delays.begin(), delays.end());
        const std::size_t old_len = coeffs.size();
        if (max_d > 0) coeffs.resize(old_len + static_cast<std::size_t>(max_d), Mat::Zero(n, n));
        for (std::size_t k = old_len; k-- > 0;) {
            for (int i = 0; i < n; ++i) {
                const std::size_t dst = k + static_cast<std::size_t>(delays[static_cast<std::size_t>(i)]);
                const double g = gains[static_cast<std::size_t>(i)];
                if (dst != k) {
                    coeffs[dst].row(i) = g * coeffs[k].row(i);
                    coeffs[k].row(i).setZero();
                } else if (g != 1.0) {
                    coeffs[k].row(i) *= g;
                }
            }
        }
    };

    // Gamma first (rightmost factor): scale or convolve columns.
    if (!loop.input_scale.empty()) {
        for (int j = 0; j < n; ++j) coeffs[0].col(j) *= loop.input_scale[static_cast<std::size_t>(j)];
    }

    apply_delays(loop.pre_delays, loop.pre_gains);
    for (const LoopFilter::Stage& s : loop.stages) {
        for (Mat& m : coeffs) m = s.mix * m;
        apply_delays(s.delays, s.gains);
    }

    if (loop.has_fir()) {
        std::size_t max_ord = 0;
        for (const auto& f : loop.input_fir) max_ord = std::max(max_ord, f.size() - 1);
        std::vector<Mat> full(coeffs.size() + max_ord, Mat::Zero(n, n));
        for (std::size_t k = 0; k < coeffs.size(); ++k)
            for (int j = 0; j < n; ++j) {
                const auto& taps = loop.input_fir[static_cast<std::size_t>(j)];
                for (std::size_t l = 0; l < taps.size(); ++l)
                    full[k + l].col(j) += coeffs[k].col(j) * taps[l];
            }
        coeffs = std::move(full);
    }
    return PolynomialMatrix(n, std::move(coeffs));
}

// ---------------------------------------------------------------------------
// Rendering

namespace {

class Ring {
public:
    Ring(int length, double gain) : buf_(static_cast<std::size_t>(length), 0.0), gain_(gain) {}
    double process(double x) {
        if (buf_.empty()) return gain_ * x;
        const double out = buf_[head_];
        buf_[head_] = x;
        head_ = (head_ + 1) % buf_.size();
        return gain_ * out;
    }
    // Value that will be produced k calls from now (k < length), before any
    // further writes.
    double peek(std::size_t k) const { return gain_ * buf_[(head_ + k) % buf_.size()]; }
    void poke(std::size_t k, double x) { buf_[(head_ + k) % buf_.size()] = x; }
    void advance(std::size_t k) { head_ = (head_ + k) % buf_.size(); }

private:
    std::vector<double> buf_;
    std::size_t head_ = 0;
    double gain_;
};

class FirState {
public:
    explicit FirState(const std::vector<double>& taps)
        : taps_(taps), hist_(taps.size(), 0.0) {}
    double process(double x) {
        hist_[pos_] = x;
        double acc = 0.0;
        std::size_t idx = pos_;
        for (double t : taps_) {
            acc += t * hist_[idx];
            idx = (idx == 0) ? hist_.size() - 1 : idx - 1;
        }
        pos_ = (pos_ + 1) % hist_.size();
        return acc;
    }

private:
    std::vector<double> taps_;
    std::vector<double> hist_;
    std::size_t pos_ = 0;
};

// Sample-serial runtime of the effective loop filter.
class CascadeRuntime {
public:
    explicit CascadeRuntime(const LoopFilter& loop) : loop_(loop) {
        const int n = loop.size;
        for (int i = 0; i < n; ++i)
            pre_.emplace_back(loop.pre_delays[static_cast<std::size_t>(i)],
                              loop.pre_gains[static_cast<std::size_t>(i)]);
        for (const auto& s : loop.stages) {
            std::vector<Ring> rings;
            for (int i = 0; i < n; ++i)
                rings.emplace_back(s.delays[static_cast<std::size_t>(i)], s.gains[static_cast<std::size_t>(i)]);
            stage_rings_.push_back(std::move(rings));
        }
        if (loop.has_fir())
            for (const auto& taps : loop.input_fir) firs_.emplace_back(taps);
    }

    void process(Eigen::VectorXd& v) {
        const int n = loop_.size;
        if (!loop_.input_scale.empty())
            for (int i = 0; i < n; ++i) v(i) *= loop_.input_scale[static_cast<std::size_t>(i)];
        if (!firs_.empty())
            for (int i = 0; i < n; ++i) v(i) = firs_[static_cast<std::size_t>(i)].process(v(i));
        for (int i = 0; i < n; ++i) v(i) = pre_[static_cast<std::size_t>(i)].process(v(i));
        for (std::size_t s = 0; s < stage_rings_.size(); ++s) {
            v = loop_.stages[s].mix * v;
            for (int i = 0; i < n; ++i) v(i) = stage_rings_[s][static_cast<std::size_t>(i)].process(v(i));
        }
    }

private:
    const LoopFilter& loop_;
    std::vector<Ring> pre_;
    std::vector<std::vector<Ring>> stage_rings_;
    std::vector<FirState> firs_;
};

[[noreturn]] void unstable(long n) {
    throw std::runtime_error("render diverged (sample magnitude above 1e6 at sample " +
                             std::to_string(n) + "); check gains and FFM spec");
}

}  // namespace

std::vector<double> render_cascade(const FfdnConfig& cfg, const AttenuationRealization& att,
                                   long length) {
    if (length < 1) throw std::invalid_argument("render length must be >= 1");
    cfg.validate();
    const LoopFilter loop = make_loop_filter(cfg, att);
    const int n = cfg.size();

    std::vector<Ring> main;
    for (int i = 0; i < n; ++i)
        main.emplace_back(cfg.delays[static_cast<std::size_t>(i)], loop.main_gains[static_cast<std::size_t>(i)]);
    CascadeRuntime ffm_rt(loop);

    std::vector<double> out(static_cast<std::size_t>(length), 0.0);
    Eigen::VectorXd s(n);
    for (long t = 0; t < length; ++t) {
        const double x = (t == 0) ? 1.0 : 0.0;
        for (int i = 0; i < n; ++i) s(i) = main[static_cast<std::size_t>(i)].peek(0);
        const double y = cfg.output_gains.dot(s) + cfg.direct_gain * x;
        if (std::abs(y) > kUnstableLimit) unstable(t);
        out[static_cast<std::size_t>(t)] = y;
        ffm_rt.process(s);
        for (int i = 0; i < n; ++i)
            main[static_cast<std::size_t>(i)].process(s(i) + cfg.input_gains(i) * x);
    }
    return out;
}

RenderResult render_fast_convolution(const FfdnConfig& cfg, const AttenuationRealization& att,
                                     long length) {
    if (length < 1) throw std::invalid_argument("render length must be >= 1");
    cfg.validate();
    const LoopFilter loop = make_loop_filter(cfg, att);
    const PolynomialMatrix a = expand_loop(loop);
    const int n = cfg.size();
    const long order = a.order();

    const int min_delay = *std::min_element(cfg.delays.begin(), cfg.delays.end());
    long block = 1;
    while (block * 2 <= min_delay) block *= 2;
    const long nominal = static_cast<long>(fft::next_pow2(static_cast<std::size_t>(4 * (order + 1)))) / 2;
    block = std::min(block, nominal);

    if (block <= order) {
        // Feedback latency renders block processing impossible; take the
        // sample-serial path instead.
        RenderResult res;
        res.samples = render_cascade(cfg, att, length);
        res.engine_used = EngineKind::cascade;
        res.fell_back = true;
        return res;
    }

    const long fft_len = static_cast<long>(fft::next_pow2(static_cast<std::size_t>(block + order + 1)));

    // Bin responses A(e^{j 2 pi k / F}).
    std::vector<CMat> bins(static_cast<std::size_t>(fft_len), CMat::Zero(n, n));
    {
        std::vector<fft::cplx> seq(static_cast<std::size_t>(fft_len));
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                std::fill(seq.begin(), seq.end(), fft::cplx(0.0, 0.0));
                for (long l = 0; l <= order; ++l) seq[static_cast<std::size_t>(l)] = a.coeff(static_cast<int>(l))(i, j);
                fft::forward(seq);
                for (long k = 0; k < fft_len; ++k) bins[static_cast<std::size_t>(k)](i, j) = seq[static_cast<std::size_t>(k)];
            }
    }

    std::vector<Ring> main;
    for (int i = 0; i < n; ++i)
        main.emplace_back(cfg.delays[static_cast<std::size_t>(i)], loop.main_gains[static_cast<std::size_t>(i)]);

    // Per-line input history for overlap-save.
    std::vector<std::vector<double>> history(static_cast<std::size_t>(n),
                                             std::vector<double>(static_cast<std::size_t>(fft_len), 0.0));
    std::vector<std::vector<fft::cplx>> spectra(static_cast<std::size_t>(n),
                                                std::vector<fft::cplx>(static_cast<std::size_t>(fft_len)));
    std::vector<std::vector<fft::cplx>> out_spec(static_cast<std::size_t>(n),
                                                 std::vector<fft::cplx>(static_cast<std::size_t>(fft_len)));

    std::vector<double> out(static_cast<std::size_t>(length), 0.0);
    Eigen::MatrixXd s_block(n, block);

    for (long start = 0; start < length; start += block) {
        const long this_block = std::min(block, length - start);
        // Delay-line outputs for the whole block are already determined
        // because every main delay is >= block.
        for (long t = 0; t < this_block; ++t)
            for (int i = 0; i < n; ++i)
                s_block(i, t) = main[static_cast<std::size_t>(i)].peek(static_cast<std::size_t>(t));

        for (long t = 0; t < this_block; ++t) {
            const long idx = start + t;
            const double x = (idx == 0) ? 1.0 : 0.0;
            const double y = cfg.output_gains.dot(s_block.col(t)) + cfg.direct_gain * x;
            if (std::abs(y) > kUnstableLimit) unstable(idx);
            out[static_cast<std::size_t>(idx)] = y;
        }

        // Slide the block into each line history and transform.
        for (int i = 0; i < n; ++i) {
            auto& h = history[static_cast<std::size_t>(i)];
            std::move(h.begin() + this_block, h.end(), h.begin());
            for (long t = 0; t < this_block; ++t)
                h[static_cast<std::size_t>(fft_len - this_block + t)] = s_block(i, t);
            auto& spec = spectra[static_cast<std::size_t>(i)];
            for (long k = 0; k < fft_len; ++k) spec[static_cast<std::size_t>(k)] = h[static_cast<std::size_t>(k)];
            fft::forward(spec);
        }

        // Mix per bin and transform back.
        Eigen::VectorXcd vin(n), vout(n);
        for (long k = 0; k < fft_len; ++k) {
            for (int i = 0; i < n; ++i) vin(i) = spectra[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)];
            vout = bins[static_cast<std::size_t>(k)] * vin;
            for (int i = 0; i < n; ++i) out_spec[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)] = vout(i);
        }
        for (int i = 0; i < n; ++i) fft::inverse(out_spec[static_cast<std::size_t>(i)]);

        // Write the feedback block into the main delays.
        for (long t = 0; t < this_block; ++t) {
            const long idx = start + t;
            const double x = (idx == 0) ? 1.0 : 0.0;
            for (int i = 0; i < n; ++i) {
                const double fb =
                    out_spec[static_cast<std::size_t>(i)][static_cast<std::size_t>(fft_len - this_block + t)].real();
                main[static_cast<std::size_t>(i)].poke(0, fb + cfg.input_gains(i) * x);
                main[static_cast<std::size_t>(i)].advance(1);
            }
        }
    }

    RenderResult res;
    res.samples = std::move(out);
    res.engine_used = EngineKind::fast_convolution;
    return res;
}

RenderResult render(const FfdnConfig& cfg, const AttenuationRealization& att, long length,
                    EngineKind engine) {
    if (engine == EngineKind::cascade) {
        RenderResult res;
        res.samples = render_cascade(cfg, att, length);
        res.engine_used = EngineKind::cascade;
        return res;
    }
    return render_fast_convolution(cfg, att, length);
}

}  // namespace ffdn
