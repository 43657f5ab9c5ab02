#include "engine.hpp"

#include <doctest.h>

#include <cmath>

using namespace ffdn;

namespace {

FfdnConfig make_config(FfmCascade ffm, std::vector<int> delays, double fs = 48000.0) {
    const int n = ffm.size();
    return FfdnConfig{std::move(delays), Eigen::VectorXd::Ones(n), Eigen::VectorXd::Ones(n),
                      0.0,               std::move(ffm),           fs};
}

double rms_diff(const std::vector<double>& a, const std::vector<double>& b) {
    REQUIRE(a.size() == b.size());
    double acc = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) acc += (a[k] - b[k]) * (a[k] - b[k]);
    return std::sqrt(acc / static_cast<double>(a.size()));
}

// Plain direct-form FDN with a scalar feedback matrix, used as an
// independent reference for the renderers.
std::vector<double> reference_scalar_fdn(const std::vector<int>& delays, const Mat& u,
                                         const Eigen::VectorXd& b, const Eigen::VectorXd& c,
                                         double d, long length) {
    const int n = static_cast<int>(delays.size());
    std::vector<std::vector<double>> lines;
    std::vector<std::size_t> heads(static_cast<std::size_t>(n), 0);
    for (int i = 0; i < n; ++i)
        lines.emplace_back(static_cast<std::size_t>(delays[static_cast<std::size_t>(i)]), 0.0);
    std::vector<double> out(static_cast<std::size_t>(length), 0.0);
    Eigen::VectorXd s(n), fb(n);
    for (long t = 0; t < length; ++t) {
        const double x = (t == 0) ? 1.0 : 0.0;
        for (int i = 0; i < n; ++i) s(i) = lines[static_cast<std::size_t>(i)][heads[static_cast<std::size_t>(i)]];
        out[static_cast<std::size_t>(t)] = c.dot(s) + d * x;
        fb = u * s;
        for (int i = 0; i < n; ++i) {
            lines[static_cast<std::size_t>(i)][heads[static_cast<std::size_t>(i)]] = fb(i) + b(i) * x;
            heads[static_cast<std::size_t>(i)] =
                (heads[static_cast<std::size_t>(i)] + 1) % lines[static_cast<std::size_t>(i)].size();
        }
    }
    return out;
}

}  // namespace

TEST_CASE("total_order: scalar, dfm, velvet") {
    Rng rng(1);
    const FfdnConfig scalar = make_config(FfmCascade::scalar(random_orthogonal(3, rng)), {1, 2, 3});
    CHECK(total_order(scalar) == 6);

    const FfdnConfig with_dfm = make_config(
        dfm({6, 0, 7, 5}, random_orthogonal(4, rng), {12, 8, 0, 2}), {100, 100, 100, 100});
    CHECK(total_order(with_dfm) == 440);

    const FfdnConfig velvet =
        make_config(vfm({4, 2, 1.0 / 30.0, 3}), {1000, 2300, 3700, 5000});
    // Four main delays plus the sparse cascade: same order of magnitude as
    // the reference design (N ~ 10000 at densities around 1/30).
    CHECK(total_order(velvet) > 6000);
    CHECK(total_order(velvet) < 16000);
}

TEST_CASE("render_cascade: single loop impulse train") {
    FfdnConfig cfg = make_config(FfmCascade::scalar(Mat::Identity(1, 1)), {5});
    const auto ir = render_cascade(cfg, {}, 26);
    for (long t = 0; t < 26; ++t) {
        const bool pulse = t > 0 && t % 5 == 0;
        CHECK(ir[static_cast<std::size_t>(t)] == doctest::Approx(pulse ? 1.0 : 0.0));
    }
    CHECK(ir[0] == 0.0);  // sample zero carries only the direct gain

    cfg.direct_gain = 0.25;
    const auto with_direct = render_cascade(cfg, {}, 2);
    CHECK(with_direct[0] == doctest::Approx(0.25));
}

TEST_CASE("render_cascade: broadband loop gains follow g^n") {
    const double g = 0.999;
    FfdnConfig cfg = make_config(FfmCascade::scalar(Mat::Identity(1, 1)), {7});
    const auto att = design_attenuation(cfg, AttenuationSpec::broadband(g));
    const auto ir = render_cascade(cfg, att, 50);
    for (long t = 1; t < 50; ++t) {
        if (t % 7 == 0)
            CHECK(ir[static_cast<std::size_t>(t)] == doctest::Approx(std::pow(g, t)).epsilon(1e-12));
        else
            CHECK(ir[static_cast<std::size_t>(t)] == 0.0);
    }
}

TEST_CASE("render_cascade: lossless velvet energy grows linearly") {
    FfdnConfig cfg = make_config(vfm({4, 2, 1.0 / 30.0, 11}), {311, 433, 547, 683});
    const long len = 48000;
    const auto ir = render_cascade(cfg, {}, len);
    double half = 0.0, full = 0.0;
    for (long t = 0; t < len; ++t) {
        full += ir[static_cast<std::size_t>(t)] * ir[static_cast<std::size_t>(t)];
        if (t < len / 2) half += ir[static_cast<std::size_t>(t)] * ir[static_cast<std::size_t>(t)];
    }
    CHECK(full / half > 1.6);
    CHECK(full / half < 2.4);
}

TEST_CASE("render: diverging configuration aborts with a diagnostic") {
    FfdnConfig cfg = make_config(FfmCascade::scalar(Mat::Identity(1, 1)), {3});
    cfg.input_gains(0) = 1e7;
    CHECK_THROWS_WITH_AS(render_cascade(cfg, {}, 16), doctest::Contains("diverged"),
                         std::runtime_error);
}

TEST_CASE("fast convolution matches the cascade engine") {
    Rng rng(2);
    // Scalar, delay, dense, Hadamard and velvet FFMs, lossless and lossy.
    std::vector<FfdnConfig> configs;
    configs.push_back(make_config(FfmCascade::scalar(random_orthogonal(4, rng)), {64, 81, 105, 131}));
    configs.push_back(make_config(dfm({6, 0, 7, 5}, random_orthogonal(4, rng), {12, 8, 0, 2}),
                                  {100, 133, 171, 203}));
    configs.push_back(make_config(rdfm(3, 2, 5), {150, 217, 281}));
    configs.push_back(make_config(hadamard_ffm(4, 2), {90, 117, 141, 173}));
    configs.push_back(make_config(vfm({4, 2, 1.0 / 30.0, 7}), {1024, 1311, 1535, 1777}));
    configs.push_back(make_config(ebfm_cascade(random_elemental(4, 16, 9)), {75, 99, 123, 149}));

    for (std::size_t idx = 0; idx < configs.size(); ++idx) {
        CAPTURE(idx);
        const FfdnConfig& cfg = configs[idx];
        for (int mode = 0; mode < 3; ++mode) {
            AttenuationSpec spec;
            if (mode == 1) spec = AttenuationSpec::broadband(0.9995);
            if (mode == 2) spec = AttenuationSpec::flat_t60(0.8);
            const auto att = design_attenuation(cfg, spec);
            const long len = 12000;
            const auto a = render_cascade(cfg, att, len);
            const auto b = render_fast_convolution(cfg, att, len);
            CHECK_FALSE(b.fell_back);
            CHECK(rms_diff(a, b.samples) < 1e-9);
        }
    }
}

TEST_CASE("fast convolution matches a hand-rolled scalar FDN") {
    Rng rng(3);
    const Mat u = random_orthogonal(4, rng);
    const std::vector<int> delays{61, 73, 89, 97};
    FfdnConfig cfg = make_config(FfmCascade::scalar(u), delays);
    cfg.direct_gain = 0.5;
    const long len = 6000;
    const auto ref = reference_scalar_fdn(delays, u, cfg.input_gains, cfg.output_gains,
                                          cfg.direct_gain, len);
    const auto fast = render_fast_convolution(cfg, {}, len);
    const auto slow = render_cascade(cfg, {}, len);
    CHECK(rms_diff(ref, fast.samples) < 1e-9);
    CHECK(rms_diff(ref, slow) < 1e-12);
}

TEST_CASE("fast convolution: zero input gains give silence after the direct sample") {
    FfdnConfig cfg = make_config(hadamard_ffm(4, 1), {50, 61, 72, 83});
    cfg.input_gains.setZero();
    cfg.direct_gain = 0.7;
    const auto res = render_fast_convolution(cfg, {}, 500);
    CHECK(res.samples[0] == doctest::Approx(0.7));
    for (std::size_t k = 1; k < res.samples.size(); ++k) CHECK(res.samples[k] == 0.0);
}

TEST_CASE("fast convolution falls back when the FFM order exceeds the feedback latency") {
    // Velvet order ~480 but main delays of only ~32 samples: no valid block.
    FfdnConfig cfg = make_config(vfm({4, 2, 1.0 / 30.0, 5}), {32, 41, 53, 67});
    const auto res = render_fast_convolution(cfg, {}, 2000);
    CHECK(res.fell_back);
    CHECK(res.engine_used == EngineKind::cascade);
    const auto direct = render_cascade(cfg, {}, 2000);
    CHECK(rms_diff(res.samples, direct) == 0.0);
}

TEST_CASE("broadband attenuation is the exact delay-proportional identity") {
    const double g = 0.9993;
    FfdnConfig cfg = make_config(vfm({4, 1, 1.0 / 10.0, 21}), {97, 131, 167, 199});
    const auto lossless = render_cascade(cfg, {}, 4000);
    const auto att = design_attenuation(cfg, AttenuationSpec::broadband(g));
    const auto lossy = render_cascade(cfg, att, 4000);
    double inv_gain = 1.0;
    for (std::size_t t = 0; t < lossy.size(); ++t) {
        CHECK(std::abs(lossy[t] * inv_gain - lossless[t]) < 1e-9);
        inv_gain /= g;
    }
}

TEST_CASE("gain_per_sample_db: direct evaluation") {
    CHECK(gain_per_sample_db(5.0, 48000.0) == doctest::Approx(-2.5e-4));
    CHECK_THROWS_AS(gain_per_sample_db(-1.0, 48000.0), std::invalid_argument);
}

TEST_CASE("flat T60 on a scalar FFM reduces to delay-proportional gains") {
    Rng rng(4);
    FfdnConfig cfg = make_config(FfmCascade::scalar(random_orthogonal(3, rng)), {120, 240, 480});
    const auto att = design_attenuation(cfg, AttenuationSpec::flat_t60(2.0));
    REQUIRE(att.kind == AttenuationRealization::Kind::per_line_scalar);
    const double db = gain_per_sample_db(2.0, 48000.0);
    for (int i = 0; i < 3; ++i) {
        const double expected = std::pow(10.0, db * cfg.delays[static_cast<std::size_t>(i)] / 20.0);
        CHECK(att.line_gains[static_cast<std::size_t>(i)] == doctest::Approx(expected).epsilon(1e-9));
    }
    CHECK_THROWS_AS(design_attenuation(cfg, AttenuationSpec::flat_t60(-2.0)),
                    std::invalid_argument);
}

TEST_CASE("group delay of a DFM is the constant outer sum") {
    Rng rng(5);
    const std::vector<int> m1{6, 0, 7, 5}, m0{12, 8, 0, 2};
    const FfmCascade c = dfm(m1, random_orthogonal(4, rng), m0);
    const GroupDelayMatrix theta = group_delay_matrix(c, FrequencyGrid(64));
    for (int k = 0; k < theta.grid_count; ++k) {
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j) {
                REQUIRE(theta.valid[static_cast<std::size_t>(k)](i, j) == 1);
                CHECK(theta.theta[static_cast<std::size_t>(k)](i, j) ==
                      doctest::Approx(m1[static_cast<std::size_t>(i)] + m0[static_cast<std::size_t>(j)])
                          .epsilon(1e-9));
            }
    }
}

TEST_CASE("group delay of pure delays: diagonal defined, off-diagonal flagged") {
    const FfmCascade c(3, {4, 7, 9}, {{Mat::Identity(3, 3), {0, 0, 0}}});
    const GroupDelayMatrix theta = group_delay_matrix(c, FrequencyGrid(32));
    for (int k = 0; k < theta.grid_count; ++k)
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) {
                if (i == j) {
                    CHECK(theta.valid[static_cast<std::size_t>(k)](i, j) == 1);
                    const double expected = (i == 0) ? 4.0 : (i == 1) ? 7.0 : 9.0;
                    CHECK(theta.theta[static_cast<std::size_t>(k)](i, j) == doctest::Approx(expected));
                } else {
                    CHECK(theta.valid[static_cast<std::size_t>(k)](i, j) == 0);
                }
            }
}

TEST_CASE("rank-1 fit: DFM recovers its delay vectors exactly") {
    Rng rng(6);
    const std::vector<int> m1{6, 0, 7, 5}, m0{12, 8, 0, 2};
    const FfmCascade c = dfm(m1, random_orthogonal(4, rng), m0);
    const auto pair = approximate_group_delay(group_delay_matrix(c, FrequencyGrid(64)));
    CHECK(pair.residual_error < 1e-9);
    for (std::size_t k = 0; k < pair.left.size(); ++k)
        for (int i = 0; i < 4; ++i) {
            CHECK(pair.left[k](i) == doctest::Approx(m1[static_cast<std::size_t>(i)]).epsilon(1e-8));
            CHECK(pair.right[k](i) == doctest::Approx(m0[static_cast<std::size_t>(i)]).epsilon(1e-8));
        }
}

TEST_CASE("rank-1 fit: constant matrices are exact, and the fit beats zero") {
    GroupDelayMatrix theta;
    theta.size = 3;
    theta.grid_count = 4;
    theta.theta.assign(4, Mat::Constant(3, 3, 17.0));
    theta.valid.assign(4, Eigen::ArrayXXi::Ones(3, 3));
    theta.weight.assign(4, Mat::Constant(3, 3, 0.5));
    const auto pair = approximate_group_delay(theta);
    CHECK(pair.residual_error < 1e-9);

    // Sanity bound: the fit can never lose to Theta_L = Theta_R = 0.
    const FfmCascade c = ebfm_cascade(random_elemental(4, 4, 31));
    const GroupDelayMatrix gd = group_delay_matrix(c, FrequencyGrid(64));
    const auto fit = approximate_group_delay(gd);
    double zero_residual = 0.0;
    for (int k = 0; k < gd.grid_count; ++k)
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j)
                if (gd.valid[static_cast<std::size_t>(k)](i, j))
                    zero_residual = std::max(zero_residual,
                                             std::abs(gd.theta[static_cast<std::size_t>(k)](i, j)));
    CHECK(fit.residual_error <= zero_residual);
}

TEST_CASE("velvet group-delay residual grows with the stage count") {
    // Reference trend: mean absolute residual about 0, 2, 10, 40 samples for
    // K = 0..3 at density 1/30.
    double previous = 0.0;
    for (int k = 0; k <= 3; ++k) {
        const FfmCascade c = vfm({4, k, 1.0 / 30.0, 77});
        const auto pair = approximate_group_delay(group_delay_matrix(c, FrequencyGrid(128)));
        if (k == 0) CHECK(pair.mean_abs_residual < 1e-9);
        if (k == 3) {
            CHECK(pair.mean_abs_residual > 10.0);
            CHECK(pair.mean_abs_residual < 150.0);
        }
        CHECK(pair.mean_abs_residual >= previous - 1e-9);
        previous = pair.mean_abs_residual;
    }
}

TEST_CASE("colored T60 targets produce matching minimum-phase attenuation filters") {
    FfdnConfig cfg = make_config(hadamard_ffm(4, 1), {400, 520, 680, 810});
    const auto spec = AttenuationSpec::frequency_dependent(
        {{0.0, 2.0}, {6000.0, 1.2}, {20000.0, 0.6}});
    const auto att = design_attenuation(cfg, spec);
    REQUIRE(att.kind == AttenuationRealization::Kind::per_line_fir);
    REQUIRE(att.line_firs.size() == 4);

    // Realized magnitude must track the target within a fraction of a dB
    // over the band (smooth target, order-32 minimum phase fit).
    for (int i = 0; i < 4; ++i) {
        const auto& taps = att.line_firs[static_cast<std::size_t>(i)];
        REQUIRE(taps.size() == 33);
        for (double f_hz : {500.0, 3000.0, 9000.0, 16000.0}) {
            const double w = 2.0 * M_PI * f_hz / cfg.sample_rate;
            cplx resp = 0.0;
            for (std::size_t l = 0; l < taps.size(); ++l)
                resp += taps[l] * std::exp(cplx(0.0, -w * static_cast<double>(l)));
            const GroupDelayPair& gd = att.group_delay;
            const int grid = static_cast<int>(gd.left.size());
            const int kk = static_cast<int>(std::lround(f_hz / cfg.sample_rate * grid)) % grid;
            const double t60 = (f_hz <= 6000.0)
                                   ? 2.0 + (1.2 - 2.0) * (f_hz / 6000.0)
                                   : 1.2 + (0.6 - 1.2) * ((f_hz - 6000.0) / 14000.0);
            const double exponent = cfg.delays[static_cast<std::size_t>(i)] +
                                    gd.left[static_cast<std::size_t>(kk)](i) +
                                    gd.right[static_cast<std::size_t>(kk)](i);
            const double target_db = gain_per_sample_db(t60, cfg.sample_rate) * exponent;
            const double got_db = 20.0 * std::log10(std::abs(resp));
            CHECK(std::abs(got_db - target_db) < 0.5);
        }
    }

    // Both engines agree on the filtered render as well.
    const auto a = render_cascade(cfg, att, 8000);
    const auto b = render_fast_convolution(cfg, att, 8000);
    CHECK_FALSE(b.fell_back);
    CHECK(rms_diff(a, b.samples) < 1e-9);
}

TEST_CASE("loop filter evaluation matches the expanded polynomial") {
    FfdnConfig cfg = make_config(rdfm(3, 2, 13), {40, 50, 60});
    const auto att = design_attenuation(cfg, AttenuationSpec::broadband(0.999));
    const LoopFilter loop = make_loop_filter(cfg, att);
    const PolynomialMatrix expanded = expand_loop(loop);

    for (int t = 0; t < 8; ++t) {
        const double w = 2.0 * M_PI * t / 8.0 + 0.013;
        const cplx z = std::exp(cplx(0.02, w));
        CMat a, da;
        loop_eval(loop, z, a, da);
        CHECK((a - evaluate(expanded, z)).cwiseAbs().maxCoeff() < 1e-10);

        // Derivative against a central difference.
        const cplx h(1e-6, 0.0);
        const CMat fd = (evaluate(expanded, z + h) - evaluate(expanded, z - h)) / (2.0 * h);
        CHECK((da - fd).cwiseAbs().maxCoeff() < 1e-4);
    }
}

TEST_CASE("inverse loop evaluation is the true inverse at 1/z") {
    FfdnConfig cfg = make_config(rdfm(3, 2, 17), {40, 50, 60});
    for (int mode = 0; mode < 3; ++mode) {
        AttenuationSpec spec;
        if (mode == 1) spec = AttenuationSpec::broadband(0.999);
        if (mode == 2) spec = AttenuationSpec::flat_t60(0.5);
        const auto att = design_attenuation(cfg, spec);
        const LoopFilter loop = make_loop_filter(cfg, att);
        for (int t = 0; t < 6; ++t) {
            const double w = 2.0 * M_PI * t / 6.0 + 0.1;
            const cplx z = std::exp(cplx(0.03, w));
            CMat a, da, ai, dai;
            loop_eval(loop, 1.0 / z, a, da);
            loop_eval_inverse(loop, z, ai, dai);
            CHECK((ai * a - CMat::Identity(3, 3)).cwiseAbs().maxCoeff() < 1e-10);
        }
    }
}
