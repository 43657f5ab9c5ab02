#include "ffm.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>

namespace ffdn {

namespace {

constexpr double kOrthTol = 1e-10;

void check_orthogonal(const Mat& u) {
    const int n = static_cast<int>(u.rows());
    if (u.rows() != u.cols()) throw std::invalid_argument("mixing matrix must be square");
    const double dev = (u.transpose() * u - Mat::Identity(n, n)).cwiseAbs().maxCoeff();
    if (dev >= kOrthTol) throw std::invalid_argument("mixing matrix is not orthogonal");
}

void check_delays(const std::vector<int>& d, int n) {
    if (static_cast<int>(d.size()) != n) throw std::invalid_argument("delay vector length mismatch");
    for (int v : d)
        if (v < 0) throw std::invalid_argument("delays must be non-negative");
}

bool any_nonzero(const std::vector<int>& d) {
    return std::any_of(d.begin(), d.end(), [](int v) { return v != 0; });
}

// Row i of the running product delayed by delays[i].
void apply_row_delays(std::vector<Mat>& coeffs, const std::vector<int>& delays, int n) {
    const int max_d = *std::max_element(delays.begin(), delays.end());
    if (max_d == 0) return;
    const std::size_t old_len = coeffs.size();
    coeffs.resize(old_len + static_cast<std::size_t>(max_d), Mat::Zero(n, n));
    for (std::size_t k = old_len; k-- > 0;) {
        for (int i = 0; i < n; ++i) {
            const std::size_t dst = k + static_cast<std::size_t>(delays[static_cast<std::size_t>(i)]);
            if (dst != k) {
                coeffs[dst].row(i) = coeffs[k].row(i);
                coeffs[k].row(i).setZero();
            }
        }
    }
}

}  // namespace

FfmCascade::FfmCascade(int size, std::vector<int> pre_delays, std::vector<CascadeStage> stages)
    : size_(size), pre_delays_(std::move(pre_delays)), stages_(std::move(stages)) {
    if (size <= 0) throw std::invalid_argument("cascade size must be positive");
    check_delays(pre_delays_, size);
    for (const CascadeStage& s : stages_) {
        if (s.mix.rows() != size) throw std::invalid_argument("stage size mismatch");
        check_orthogonal(s.mix);
        check_delays(s.post_delays, size);
    }
}

FfmCascade FfmCascade::scalar(const Mat& u) {
    const int n = static_cast<int>(u.rows());
    return FfmCascade(n, std::vector<int>(n, 0), {{u, std::vector<int>(n, 0)}});
}

int FfmCascade::delay_stage_count() const {
    int count = any_nonzero(pre_delays_) ? 1 : 0;
    for (const CascadeStage& s : stages_)
        if (any_nonzero(s.post_delays)) ++count;
    return count;
}

long FfmCascade::total_internal_delay() const {
    long total = std::accumulate(pre_delays_.begin(), pre_delays_.end(), 0L);
    for (const CascadeStage& s : stages_)
        total += std::accumulate(s.post_delays.begin(), s.post_delays.end(), 0L);
    return total;
}

PolynomialMatrix elemental_block(const Eigen::VectorXd& v) {
    if (std::abs(v.norm() - 1.0) > 1e-12)
        throw std::invalid_argument("elemental block vector must have unit norm");
    const int n = static_cast<int>(v.size());
    const Mat proj = v * v.transpose();
    return PolynomialMatrix(n, {Mat::Identity(n, n) - proj, proj});
}

PolynomialMatrix ebfm(const ElementalFactorization& factors) {
    if (factors.size <= 0) throw std::invalid_argument("factorization size must be positive");
    PolynomialMatrix acc = PolynomialMatrix::identity(factors.size);
    for (const auto& v : factors.vectors) {
        if (v.size() != factors.size)
            throw std::invalid_argument("elemental vector dimension mismatch");
        acc = multiply(elemental_block(v), acc);
    }
    return acc;
}

namespace {

// Householder reflection mapping v to e_1 (R v = e_1 for unit v).
Mat reflection_to_e1(const Eigen::VectorXd& v) {
    const int n = static_cast<int>(v.size());
    Eigen::VectorXd w = v;
    w(0) += (v(0) >= 0.0) ? 1.0 : -1.0;
    const double wn2 = w.squaredNorm();
    Mat r = Mat::Identity(n, n) - (2.0 / wn2) * (w * w.transpose());
    // R v = -sign(v_0) e_1; fold the sign so R v = e_1 exactly.
    if (v(0) >= 0.0) r = -r;
    return r;
}

}  // namespace

FfmCascade ebfm_cascade(const ElementalFactorization& factors) {
    const int n = factors.size;
    if (n <= 0) throw std::invalid_argument("factorization size must be positive");
    std::vector<int> e1_delay(static_cast<std::size_t>(n), 0);
    e1_delay[0] = 1;

    // V(z) = R^T diag(z^-1, 1, ..., 1) R, so the product of K blocks is a
    // cascade of K single-line delays with merged rotations in between.
    std::vector<CascadeStage> stages;
    Mat prev = Mat::Identity(n, n);
    for (const auto& v : factors.vectors) {
        if (v.size() != n) throw std::invalid_argument("elemental vector dimension mismatch");
        if (std::abs(v.norm() - 1.0) > 1e-12)
            throw std::invalid_argument("elemental block vector must have unit norm");
        const Mat r = reflection_to_e1(v);
        stages.push_back({r * prev.transpose(), e1_delay});
        prev = r;
    }
    stages.push_back({prev.transpose(), std::vector<int>(static_cast<std::size_t>(n), 0)});
    return FfmCascade(n, std::vector<int>(static_cast<std::size_t>(n), 0), std::move(stages));
}

ElementalFactorization random_elemental(int size, int stages, std::uint64_t seed) {
    Rng rng(seed);
    ElementalFactorization f;
    f.size = size;
    f.vectors.reserve(static_cast<std::size_t>(stages));
    for (int k = 0; k < stages; ++k) f.vectors.push_back(random_unit_vector(size, rng));
    return f;
}

FfmCascade dfm(const std::vector<int>& m1, const Mat& u, const std::vector<int>& m0) {
    const int n = static_cast<int>(u.rows());
    return FfmCascade(n, m0, {{u, m1}});
}

namespace {

std::vector<int> ramp_delays(int n, long scale) {
    std::vector<int> d(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) d[static_cast<std::size_t>(i)] = static_cast<int>(scale * i);
    return d;
}

}  // namespace

FfmCascade rdfm(int size, int stages, std::uint64_t unitary_seed) {
    if (stages < 1) throw std::invalid_argument("rdfm needs at least one stage");
    Rng rng(unitary_seed);
    std::vector<CascadeStage> cascade;
    long len = 1;  // tap count of the running product
    Mat u = random_orthogonal(size, rng);
    for (int k = 1; k <= stages; ++k) {
        cascade.push_back({u, ramp_delays(size, len)});
        len *= size;
        u = random_orthogonal(size, rng);
    }
    cascade.push_back({u, std::vector<int>(static_cast<std::size_t>(size), 0)});
    return FfmCascade(size, std::vector<int>(static_cast<std::size_t>(size), 0), std::move(cascade));
}

Mat hadamard_matrix(int size) {
    if (size < 1 || (size & (size - 1)) != 0)
        throw std::invalid_argument("Hadamard matrix available for power-of-two sizes only");
    Mat h(1, 1);
    h(0, 0) = 1.0;
    for (int n = 1; n < size; n *= 2) {
        Mat next(2 * n, 2 * n);
        next << h, h, h, -h;
        h = next;
    }
    return h / std::sqrt(static_cast<double>(size));
}

namespace {

FfmCascade hadamard_like(int size, int stages, const std::vector<std::vector<int>>& delays) {
    const Mat h = hadamard_matrix(size);
    std::vector<CascadeStage> cascade;
    for (int k = 1; k <= stages; ++k) cascade.push_back({h, delays[static_cast<std::size_t>(k - 1)]});
    cascade.push_back({h, std::vector<int>(static_cast<std::size_t>(size), 0)});
    return FfmCascade(size, std::vector<int>(static_cast<std::size_t>(size), 0), std::move(cascade));
}

}  // namespace

FfmCascade hadamard_ffm(int size, int stages) {
    if (stages < 0) throw std::invalid_argument("stage count must be non-negative");
    std::vector<std::vector<int>> delays;
    long len = 1;
    for (int k = 1; k <= stages; ++k) {
        delays.push_back(ramp_delays(size, len));
        len *= size;
    }
    return hadamard_like(size, stages, delays);
}

std::vector<long> cascade_tap_positions(const FfmCascade& c) {
    std::set<long> taps{0};
    auto merge = [&taps](const std::vector<int>& d) {
        std::set<long> next;
        for (long t : taps)
            for (int m : d) next.insert(t + m);
        taps = std::move(next);
    };
    merge(c.pre_delays());
    for (const CascadeStage& s : c.stages()) merge(s.post_delays);
    return {taps.begin(), taps.end()};
}

FfmCascade vfm(const VelvetSpec& spec) {
    const int n = spec.size;
    const int k_stages = spec.stages;
    const double rho = spec.density;
    if (rho <= 0.0 || rho > 1.0) throw std::invalid_argument("velvet density must be in (0, 1]");
    if (k_stages < 0) throw std::invalid_argument("stage count must be non-negative");
    if (n < 1 || (n & (n - 1)) != 0)
        throw std::invalid_argument("velvet FFM needs a power-of-two size");

    Rng rng(spec.jitter_seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    // Stratified velvet positions: one pulse per 1/rho grid slot, then the
    // later stages reuse them scaled by N^{k-1} with a small jitter. A draw
    // is rejected when tap positions of different stage paths collide, so
    // the expanded entries keep exactly N^K equal-magnitude pulses.
    for (int attempt = 0; attempt < 1000; ++attempt) {
        std::vector<int> m1(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i)
            m1[static_cast<std::size_t>(i)] =
                static_cast<int>(std::floor((i + unit(rng)) * (1.0 / rho)));

        std::vector<std::vector<int>> delays;
        long scale = 1;
        double prev_len = 1.0 / rho;  // L_{k-1} = ceil(N^{k-1} / rho)
        bool ok = true;
        for (int k = 1; k <= k_stages; ++k) {
            std::vector<int> mk(static_cast<std::size_t>(n));
            const int jitter_range =
                (k == 1) ? 0 : static_cast<int>(std::floor(prev_len / 10.0));
            for (int i = 0; i < n; ++i) {
                long d = scale * m1[static_cast<std::size_t>(i)];
                if (jitter_range > 0) {
                    std::uniform_int_distribution<int> jit(-jitter_range, jitter_range);
                    d += jit(rng);
                }
                mk[static_cast<std::size_t>(i)] = static_cast<int>(std::max(0L, d));
            }
            delays.push_back(std::move(mk));
            scale *= n;
            prev_len *= n;
        }

        FfmCascade cascade = hadamard_like(n, k_stages, delays);
        long expected = 1;
        for (int k = 0; k < k_stages; ++k) expected *= n;
        if (static_cast<long>(cascade_tap_positions(cascade).size()) != expected) ok = false;
        if (ok) return cascade;
    }
    throw std::runtime_error("velvet delay draw failed to avoid tap collisions");
}

PolynomialMatrix expand(const FfmCascade& c) {
    const int n = c.size();
    std::vector<Mat> coeffs{Mat::Identity(n, n)};
    apply_row_delays(coeffs, c.pre_delays(), n);
    for (const CascadeStage& s : c.stages()) {
        for (Mat& m : coeffs) m = s.mix * m;
        apply_row_delays(coeffs, s.post_delays, n);
    }
    return PolynomialMatrix(n, std::move(coeffs));
}

FfmCascade invert(const FfmCascade& c) {
    const int n = c.size();
    const auto& stages = c.stages();
    const int k = static_cast<int>(stages.size());
    // A^-1(1/z) = D_{m_0} U_1^T D_{m_1} U_2^T ... U_K^T D_{m_K}
    if (k == 0) return FfmCascade(n, c.pre_delays(), {});
    std::vector<int> pre = stages[static_cast<std::size_t>(k - 1)].post_delays;
    std::vector<CascadeStage> inv_stages;
    for (int s = k - 1; s >= 0; --s) {
        const std::vector<int>& next_delays =
            (s > 0) ? stages[static_cast<std::size_t>(s - 1)].post_delays : c.pre_delays();
        inv_stages.push_back({stages[static_cast<std::size_t>(s)].mix.transpose(), next_delays});
    }
    return FfmCascade(n, std::move(pre), std::move(inv_stages));
}

OperationCounts operation_count(const FfmCascade& c, bool hadamard) {
    const long n = c.size();
    const long k_delays = c.delay_stage_count();
    OperationCounts counts;
    if (hadamard) {
        counts.adds = k_delays * n * static_cast<long>(std::lround(std::log2(static_cast<double>(n))));
        counts.mults = n;
    } else {
        const long s = c.stage_count();
        counts.adds = s * n * n;
        counts.mults = s * n * n;
    }
    counts.delay_rw = (k_delays > 0) ? 2 * n * (k_delays + 1) : 0;
    return counts;
}

long table_pulses_per_filter(int size, int delay_stages, bool hadamard) {
    if (!hadamard || delay_stages == 0) return 1;
    long p = 1;
    for (int i = 0; i < 2 * (delay_stages - 1); ++i) p *= size;
    return p;
}

}  // namespace ffdn
