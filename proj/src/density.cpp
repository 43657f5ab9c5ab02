#include "density.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ffdn {

namespace {

// P(|x| > sigma) for Gaussian x: erfc(1/sqrt(2)).
constexpr double kGaussianExceedance = 0.31731050786291404;

std::vector<double> convolve(const std::vector<double>& a, const std::vector<double>& b) {
    std::vector<double> out(a.size() + b.size() - 1, 0.0);
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
    return out;
}

std::vector<double> delay_by(std::vector<double> h, int m) {
    h.insert(h.begin(), static_cast<std::size_t>(m), 0.0);
    return h;
}

}  // namespace

std::vector<double> echo_path_response(const FfdnConfig& cfg, const EchoPath& path) {
    cfg.validate();
    if (path.indices.empty()) throw std::invalid_argument("echo path must visit at least one line");
    const int n = cfg.size();
    for (int q : path.indices)
        if (q < 1 || q > n) throw std::invalid_argument("echo path index out of range");

    const PolynomialMatrix a = expand(cfg.ffm);
    auto entry_taps = [&a](int row, int col) {
        std::vector<double> taps(static_cast<std::size_t>(a.order()) + 1);
        for (int l = 0; l <= a.order(); ++l) taps[static_cast<std::size_t>(l)] = a.coeff(l)(row, col);
        while (taps.size() > 1 && taps.back() == 0.0) taps.pop_back();
        return taps;
    };

    const std::size_t p = path.indices.size();
    std::vector<double> h{cfg.input_gains(path.indices[0] - 1)};
    for (std::size_t k = 0; k + 1 < p; ++k) {
        h = delay_by(std::move(h), cfg.delays[static_cast<std::size_t>(path.indices[k] - 1)]);
        h = convolve(h, entry_taps(path.indices[k + 1] - 1, path.indices[k] - 1));
    }
    h = delay_by(std::move(h), cfg.delays[static_cast<std::size_t>(path.indices[p - 1] - 1)]);
    const double out_gain = cfg.output_gains(path.indices[p - 1] - 1);
    for (double& v : h) v *= out_gain;
    return h;
}

EchoDensityProfile echo_density(const std::vector<double>& ir, int window, int hop) {
    if (window < 64) throw std::invalid_argument("analysis window must be at least 64 samples");
    if (static_cast<long>(ir.size()) <= window)
        throw std::invalid_argument("impulse response shorter than the analysis window");
    if (hop < 1) throw std::invalid_argument("hop must be positive");
    bool any = false;
    for (double v : ir)
        if (v != 0.0) { any = true; break; }
    if (!any) throw std::invalid_argument("all-zero impulse response");

    const long len = static_cast<long>(ir.size());
    const int half = window / 2;

    EchoDensityProfile profile;
    profile.window = window;
    profile.density.assign(ir.size(), 0.0);

    auto density_at = [&](long n) {
        const long lo = std::max<long>(0, n - half);
        const long hi = std::min<long>(len, n + half);
        double energy = 0.0;
        for (long k = lo; k < hi; ++k) energy += ir[static_cast<std::size_t>(k)] * ir[static_cast<std::size_t>(k)];
        const long count = hi - lo;
        const double sigma = std::sqrt(energy / static_cast<double>(count));
        if (sigma == 0.0) return 0.0;
        long above = 0;
        for (long k = lo; k < hi; ++k)
            if (std::abs(ir[static_cast<std::size_t>(k)]) > sigma) ++above;
        return static_cast<double>(above) / (static_cast<double>(count) * kGaussianExceedance);
    };

    if (hop == 1) {
        for (long n = 0; n < len; ++n) profile.density[static_cast<std::size_t>(n)] = density_at(n);
    } else {
        long prev_n = 0;
        double prev_v = density_at(0);
        profile.density[0] = prev_v;
        for (long n = hop; n - hop < len - 1; n += hop) {
            const long cur_n = std::min(n, len - 1);
            const double cur_v = density_at(cur_n);
            for (long k = prev_n + 1; k <= cur_n; ++k) {
                const double t = static_cast<double>(k - prev_n) / static_cast<double>(cur_n - prev_n);
                profile.density[static_cast<std::size_t>(k)] = prev_v + t * (cur_v - prev_v);
            }
            prev_n = cur_n;
            prev_v = cur_v;
            if (cur_n == len - 1) break;
        }
    }
    profile.mixing_time = mixing_time(profile);
    return profile;
}

std::optional<long> mixing_time(const EchoDensityProfile& profile, double threshold) {
    const long len = static_cast<long>(profile.density.size());
    if (len == 0) return std::nullopt;
    const int smooth = std::max(1, profile.window / 4);
    const int half = smooth / 2;
    // Moving average with clamped edges, then first threshold crossing.
    double acc = 0.0;
    long lo = 0, hi = 0;
    for (long n = 0; n < len; ++n) {
        const long want_lo = std::max<long>(0, n - half);
        const long want_hi = std::min<long>(len, n + half + 1);
        while (hi < want_hi) acc += profile.density[static_cast<std::size_t>(hi++)];
        while (lo < want_lo) acc -= profile.density[static_cast<std::size_t>(lo++)];
        if (acc / static_cast<double>(hi - lo) >= threshold) return n;
    }
    return std::nullopt;
}

const char* family_name(FfmFamily f) {
    switch (f) {
        case FfmFamily::ebfm: return "ebfm";
        case FfmFamily::dfm: return "dfm";
        case FfmFamily::rdfm: return "rdfm";
        case FfmFamily::vfm: return "vfm";
        case FfmFamily::sfm4: return "sfm4";
        case FfmFamily::sfm16: return "sfm16";
    }
    return "?";
}

std::optional<FfmFamily> family_from_name(const std::string& name) {
    for (FfmFamily f : {FfmFamily::ebfm, FfmFamily::dfm, FfmFamily::rdfm, FfmFamily::vfm,
                        FfmFamily::sfm4, FfmFamily::sfm16})
        if (name == family_name(f)) return f;
    return std::nullopt;
}

namespace {

// Study parameters mirroring the published comparison: four-line networks
// except the 16-line scalar reference.
constexpr int kMcSize = 4;
constexpr int kEbfmStages = 64;
constexpr int kDfmDelayMax = 50;
constexpr int kRdfmStages = 3;
constexpr int kVfmStages = 2;
constexpr double kVfmDensity = 1.0 / 30.0;
constexpr double kMcSampleRate = 48000.0;
constexpr int kMcWindow = 960;  // 20 ms
constexpr int kMcHop = 16;
constexpr long kMcMaxLen = 8 * 48000;

FfmCascade make_family(FfmFamily family, Rng& rng) {
    const std::uint64_t sub = rng();
    switch (family) {
        case FfmFamily::ebfm:
            return ebfm_cascade(random_elemental(kMcSize, kEbfmStages, sub));
        case FfmFamily::dfm: {
            Rng r(sub);
            std::uniform_int_distribution<int> d(0, kDfmDelayMax);
            std::vector<int> m1(kMcSize), m0(kMcSize);
            for (int& v : m1) v = d(r);
            for (int& v : m0) v = d(r);
            return dfm(m1, random_orthogonal(kMcSize, r), m0);
        }
        case FfmFamily::rdfm:
            return rdfm(kMcSize, kRdfmStages, sub);
        case FfmFamily::vfm:
            return vfm({kMcSize, kVfmStages, kVfmDensity, sub});
        case FfmFamily::sfm4: {
            Rng r(sub);
            return FfmCascade::scalar(random_orthogonal(kMcSize, r));
        }
        case FfmFamily::sfm16: {
            Rng r(sub);
            return FfmCascade::scalar(random_orthogonal(16, r));
        }
    }
    throw std::logic_error("unknown family");
}

long family_mixing_time(FfmFamily family, const std::vector<int>& delays4,
                        const std::vector<int>& delays16, Rng& rng) {
    FfmCascade ffm = make_family(family, rng);
    const int n = ffm.size();
    FfdnConfig cfg{(n == 16) ? delays16 : delays4,
                   Eigen::VectorXd::Ones(n),
                   Eigen::VectorXd::Ones(n),
                   0.0,
                   std::move(ffm),
                   kMcSampleRate};

    const AttenuationRealization att;  // lossless
    long len = 48000;
    while (true) {
        const auto ir = render_cascade(cfg, att, len);
        const auto profile = echo_density(ir, kMcWindow, kMcHop);
        if (profile.mixing_time) return *profile.mixing_time;
        if (len >= kMcMaxLen) return len;  // censored at the cap
        len *= 2;
    }
}

MixingStats summarize(std::vector<double> values) {
    MixingStats s;
    std::sort(values.begin(), values.end());
    auto quantile = [&values](double q) {
        const double pos = q * (static_cast<double>(values.size()) - 1.0);
        const std::size_t i = static_cast<std::size_t>(pos);
        if (i + 1 >= values.size()) return values.back();
        const double t = pos - static_cast<double>(i);
        return values[i] + t * (values[i + 1] - values[i]);
    };
    s.median = quantile(0.5);
    s.q25 = quantile(0.25);
    s.q75 = quantile(0.75);
    s.values = std::move(values);
    return s;
}

}  // namespace

MonteCarloResult monte_carlo_mixing(const std::vector<FfmFamily>& families, int trials,
                                    std::uint64_t seed) {
    if (trials < 10) throw std::invalid_argument("need at least 10 trials");
    std::vector<FfmFamily> all = families;
    if (std::find(all.begin(), all.end(), FfmFamily::sfm4) == all.end())
        all.push_back(FfmFamily::sfm4);  // the baseline always runs

    std::map<FfmFamily, std::vector<double>> absolute;
    std::map<FfmFamily, std::vector<double>> relative;

    Rng master(seed);
    for (int t = 0; t < trials; ++t) {
        const std::uint64_t trial_seed = master();
        Rng trial_rng(trial_seed);
        std::uniform_int_distribution<int> delay_dist(1000, 8000);
        std::vector<int> delays4(kMcSize), delays16(16);
        for (int& v : delays4) v = delay_dist(trial_rng);
        for (int& v : delays16) v = delay_dist(trial_rng);

        std::map<FfmFamily, long> times;
        for (FfmFamily f : all) {
            Rng frng(trial_seed ^ (0x9E3779B97F4A7C15ULL * (static_cast<std::uint64_t>(f) + 1)));
            times[f] = family_mixing_time(f, delays4, delays16, frng);
        }
        const double base = static_cast<double>(times[FfmFamily::sfm4]);
        for (FfmFamily f : all) {
            absolute[f].push_back(static_cast<double>(times[f]));
            relative[f].push_back(static_cast<double>(times[f]) / base);
        }
    }

    MonteCarloResult result;
    result.trials = trials;
    for (auto& [f, vals] : absolute) result.mixing_samples[f] = summarize(std::move(vals));
    for (auto& [f, vals] : relative) result.relative_to_sfm4[f] = summarize(std::move(vals));
    return result;
}

}  // namespace ffdn
