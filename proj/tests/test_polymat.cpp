#include "polymat.hpp"

#include "ffm.hpp"
#include "rng.hpp"

#include <doctest.h>

#include <cmath>

using namespace ffdn;

namespace {

PolynomialMatrix random_poly(int n, int order, Rng& rng) {
    std::normal_distribution<double> dist(0.0, 1.0);
    std::vector<Mat> coeffs;
    for (int k = 0; k <= order; ++k) {
        Mat m(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) m(i, j) = dist(rng);
        coeffs.push_back(m);
    }
    return PolynomialMatrix(n, std::move(coeffs));
}

// Term-wise summation oracle for evaluate().
CMat eval_by_summation(const PolynomialMatrix& a, cplx z) {
    CMat acc = CMat::Zero(a.size(), a.size());
    for (int k = 0; k <= a.order(); ++k) acc += a.coeff(k).cast<cplx>() * std::pow(z, -k);
    return acc;
}

// Scalar polynomial helpers (coefficient lists in powers of z^-1) used as a
// symbolic determinant oracle.
using Poly = std::vector<double>;

Poly poly_mul(const Poly& a, const Poly& b) {
    Poly out(a.size() + b.size() - 1, 0.0);
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
    return out;
}

Poly poly_add(Poly a, const Poly& b, double sign = 1.0) {
    if (b.size() > a.size()) a.resize(b.size(), 0.0);
    for (std::size_t i = 0; i < b.size(); ++i) a[i] += sign * b[i];
    return a;
}

Poly entry_poly(const PolynomialMatrix& a, int i, int j) {
    Poly p(static_cast<std::size_t>(a.order()) + 1, 0.0);
    for (int k = 0; k <= a.order(); ++k) p[static_cast<std::size_t>(k)] = a.coeff(k)(i, j);
    return p;
}

// Cofactor expansion over the first row; fine for n <= 3.
Poly symbolic_determinant(const PolynomialMatrix& a) {
    const int n = a.size();
    if (n == 1) return entry_poly(a, 0, 0);
    if (n == 2)
        return poly_add(poly_mul(entry_poly(a, 0, 0), entry_poly(a, 1, 1)),
                        poly_mul(entry_poly(a, 0, 1), entry_poly(a, 1, 0)), -1.0);
    REQUIRE(n == 3);
    // Leibniz with cyclic column minors: every term carries a + sign.
    Poly det{0.0};
    for (int j = 0; j < 3; ++j) {
        const int c1 = (j + 1) % 3, c2 = (j + 2) % 3;
        Poly minor = poly_add(poly_mul(entry_poly(a, 1, c1), entry_poly(a, 2, c2)),
                              poly_mul(entry_poly(a, 1, c2), entry_poly(a, 2, c1)), -1.0);
        det = poly_add(det, poly_mul(entry_poly(a, 0, j), minor));
    }
    return det;
}

double max_abs_diff(const Poly& a, const Poly& b) {
    double m = 0.0;
    for (std::size_t k = 0; k < std::max(a.size(), b.size()); ++k) {
        const double va = k < a.size() ? a[k] : 0.0;
        const double vb = k < b.size() ? b[k] : 0.0;
        m = std::max(m, std::abs(va - vb));
    }
    return m;
}

}  // namespace

TEST_CASE("multiply: identity and delay composition") {
    Rng rng(1);
    const PolynomialMatrix a = random_poly(3, 4, rng);
    const PolynomialMatrix id = PolynomialMatrix::identity(3);
    const PolynomialMatrix prod = multiply(id, a);
    REQUIRE(prod.order() == a.order());
    for (int k = 0; k <= a.order(); ++k)
        CHECK((prod.coeff(k) - a.coeff(k)).cwiseAbs().maxCoeff() == 0.0);

    const PolynomialMatrix d1 = PolynomialMatrix::diagonal_delays({1, 0});
    const PolynomialMatrix d2 = PolynomialMatrix::diagonal_delays({0, 1});
    const PolynomialMatrix both = multiply(d1, d2);
    REQUIRE(both.order() == 1);
    CHECK((both.coeff(0)).cwiseAbs().maxCoeff() == 0.0);
    CHECK((both.coeff(1) - Mat::Identity(2, 2)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("multiply: product of elemental blocks stays paraunitary") {
    Rng rng(7);
    const PolynomialMatrix v1 = elemental_block(random_unit_vector(4, rng));
    const PolynomialMatrix v2 = elemental_block(random_unit_vector(4, rng));
    const PolynomialMatrix prod = multiply(v1, v2);
    const auto report = is_paraunitary(prod, FrequencyGrid(64), 1e-10);
    CHECK(report.paraunitary);
    CHECK(report.max_deviation < 1e-10);
    CHECK_THROWS_AS(multiply(v1, PolynomialMatrix::identity(3)), std::invalid_argument);
}

TEST_CASE("evaluate matches the summation oracle") {
    const PolynomialMatrix id = PolynomialMatrix::identity(3);
    CHECK((evaluate(id, cplx(0.3, -2.0)) - CMat::Identity(3, 3)).cwiseAbs().maxCoeff() == 0.0);

    const PolynomialMatrix delays = PolynomialMatrix::diagonal_delays({3, 1, 2});
    CHECK((evaluate(delays, cplx(1.0, 0.0)) - CMat::Identity(3, 3)).cwiseAbs().maxCoeff() <
          1e-15);

    Rng rng(2);
    const PolynomialMatrix a = random_poly(4, 6, rng);
    for (int t = 0; t < 16; ++t) {
        const double w = 2.0 * M_PI * t / 16.0;
        const cplx z(std::cos(w), std::sin(w));
        CHECK((evaluate(a, z) - eval_by_summation(a, z)).cwiseAbs().maxCoeff() < 1e-12);
    }
    CHECK_THROWS_AS(evaluate(a, cplx(0.0, 0.0)), std::domain_error);
}

TEST_CASE("sampling on a uniform grid equals pointwise evaluation") {
    Rng rng(3);
    const PolynomialMatrix a = random_poly(3, 9, rng);
    const FrequencyGrid grid(32);
    const auto samples = sample_on_grid(a, grid.count());
    for (int k = 0; k < grid.count(); ++k)
        CHECK((samples[static_cast<std::size_t>(k)] - evaluate(a, grid.points[static_cast<std::size_t>(k)]))
                  .cwiseAbs()
                  .maxCoeff() < 1e-10);
}

TEST_CASE("is_paraunitary: identity, delays, and a scaled identity") {
    const auto id_report = is_paraunitary(PolynomialMatrix::identity(4), FrequencyGrid(8));
    CHECK(id_report.paraunitary);
    CHECK(id_report.max_deviation == 0.0);

    const auto delay_report =
        is_paraunitary(PolynomialMatrix::diagonal_delays({5, 2, 9}), FrequencyGrid(32));
    CHECK(delay_report.paraunitary);
    CHECK(delay_report.max_deviation < 1e-12);

    const auto scaled = PolynomialMatrix::scalar(0.5 * Mat::Identity(2, 2));
    const auto scaled_report = is_paraunitary(scaled, FrequencyGrid(4));
    CHECK_FALSE(scaled_report.paraunitary);
    CHECK(scaled_report.max_deviation == doctest::Approx(0.75));

    // Insufficient grid for the polynomial order must be rejected.
    const PolynomialMatrix d = PolynomialMatrix::diagonal_delays({4, 4});
    CHECK_THROWS_AS(is_paraunitary(d, FrequencyGrid(7)), std::invalid_argument);
}

TEST_CASE("determinant: identity, diagonal delays, FFT interpolation") {
    const auto det_id = determinant(PolynomialMatrix::identity(3));
    REQUIRE(det_id.size() == 1);
    CHECK(det_id[0] == doctest::Approx(1.0));

    const auto det_delays = determinant(PolynomialMatrix::diagonal_delays({1, 2}));
    REQUIRE(det_delays.size() == 4);
    CHECK(det_delays[3] == doctest::Approx(1.0));
    for (int k = 0; k < 3; ++k) CHECK(std::abs(det_delays[static_cast<std::size_t>(k)]) < 1e-12);
}

TEST_CASE("determinant matches the symbolic cofactor oracle") {
    Rng rng(4);
    for (int n : {2, 3}) {
        for (int trial = 0; trial < 4; ++trial) {
            const PolynomialMatrix a = random_poly(n, 3, rng);
            const Poly oracle = symbolic_determinant(a);
            Poly trimmed = oracle;
            double max_mag = 0.0;
            for (double v : trimmed) max_mag = std::max(max_mag, std::abs(v));
            while (trimmed.size() > 1 && std::abs(trimmed.back()) <= 1e-9 * max_mag)
                trimmed.pop_back();
            const auto fast = determinant(a);
            CHECK(max_abs_diff(fast, trimmed) < 1e-9 * std::max(1.0, max_mag));
        }
    }
}

TEST_CASE("determinant degree of a cascade equals the sum of internal delays") {
    Rng rng(5);
    for (int trial = 0; trial < 3; ++trial) {
        const FfmCascade c = rdfm(2 + trial % 2, 2, rng());
        const auto det = determinant(expand(c));
        CHECK(static_cast<long>(det.size()) - 1 == c.total_internal_delay());
    }
}

TEST_CASE("mcmillan_degree: paper block, identity, delay matrix") {
    Rng rng(6);
    const PolynomialMatrix block = elemental_block(random_unit_vector(4, rng));
    CHECK(mcmillan_degree(block) == 1);
    CHECK(mcmillan_degree(PolynomialMatrix::identity(5)) == 0);

    const FfmCascade d = dfm({6, 0, 7, 5}, hadamard_matrix(4), {12, 8, 0, 2});
    CHECK(mcmillan_degree(expand(d)) == 40);

    // Non-lossless input is rejected rather than guessed.
    const auto scaled = PolynomialMatrix::scalar(0.5 * Mat::Identity(2, 2));
    CHECK_THROWS_AS(mcmillan_degree(scaled), std::invalid_argument);
}

TEST_CASE("property: multiply is associative on random triples") {
    Rng rng(8);
    for (int trial = 0; trial < 6; ++trial) {
        const int n = 2 + static_cast<int>(rng() % 3);
        const PolynomialMatrix a = random_poly(n, static_cast<int>(rng() % 9), rng);
        const PolynomialMatrix b = random_poly(n, static_cast<int>(rng() % 9), rng);
        const PolynomialMatrix c = random_poly(n, static_cast<int>(rng() % 9), rng);
        const PolynomialMatrix left = multiply(multiply(a, b), c);
        const PolynomialMatrix right = multiply(a, multiply(b, c));
        REQUIRE(left.order() == right.order());
        for (int k = 0; k <= left.order(); ++k)
            CHECK((left.coeff(k) - right.coeff(k)).cwiseAbs().maxCoeff() < 1e-12 * 100.0);
    }
}

TEST_CASE("property: paraunitary energy conservation (Parseval)") {
    Rng rng(9);
    for (int trial = 0; trial < 4; ++trial) {
        const PolynomialMatrix a = ebfm(random_elemental(4, 6, rng()));
        const Eigen::VectorXd x = random_unit_vector(4, rng);
        // Impulse through A: output sequence y_k = F_k x; total energy 1.
        double energy = 0.0;
        for (int k = 0; k <= a.order(); ++k) energy += (a.coeff(k) * x).squaredNorm();
        CHECK(energy == doctest::Approx(1.0).epsilon(1e-10));
    }
}

TEST_CASE("property: determinant is multiplicative") {
    Rng rng(10);
    const PolynomialMatrix a = random_poly(2, 3, rng);
    const PolynomialMatrix b = random_poly(2, 2, rng);
    const auto det_ab = determinant(multiply(a, b));
    const Poly prod = poly_mul(symbolic_determinant(a), symbolic_determinant(b));
    double scale = 0.0;
    for (double v : prod) scale = std::max(scale, std::abs(v));
    CHECK(max_abs_diff(det_ab, prod) < 1e-8 * std::max(1.0, scale));
}

TEST_CASE("property: McMillan degree is additive for paraunitary factors") {
    Rng rng(11);
    for (int trial = 0; trial < 3; ++trial) {
        const PolynomialMatrix a = ebfm(random_elemental(3, 2 + trial, rng()));
        const PolynomialMatrix b = ebfm(random_elemental(3, 1 + trial, rng()));
        CHECK(mcmillan_degree(multiply(a, b)) == mcmillan_degree(a) + mcmillan_degree(b));
    }
}

TEST_CASE("text serialization round-trips bit-exactly") {
    Rng rng(12);
    const PolynomialMatrix a = random_poly(3, 5, rng);
    const PolynomialMatrix back = polymat_from_text(to_text(a));
    REQUIRE(back.size() == a.size());
    REQUIRE(back.order() == a.order());
    for (int k = 0; k <= a.order(); ++k)
        CHECK((back.coeff(k) - a.coeff(k)).cwiseAbs().maxCoeff() == 0.0);

    CHECK_THROWS_AS(polymat_from_text("not a header"), std::invalid_argument);
    CHECK_THROWS_AS(polymat_from_text("2 1\n1 0\n0 1\n"), std::invalid_argument);
}

TEST_CASE("trailing zero coefficients are trimmed") {
    std::vector<Mat> coeffs{Mat::Identity(2, 2), Mat::Zero(2, 2), Mat::Zero(2, 2)};
    const PolynomialMatrix a(2, coeffs);
    CHECK(a.order() == 0);
    const PolynomialMatrix z = PolynomialMatrix::zero(3);
    CHECK(z.is_zero());
    CHECK(z.order() == 0);
}
