#include "ffm.hpp"

#include <doctest.h>

#include <cmath>
#include <set>

using namespace ffdn;

namespace {

ParaunitarityReport check_pu(const PolynomialMatrix& a, double tol = 1e-9) {
    return is_paraunitary(a, FrequencyGrid(std::max(2 * a.order() + 1, 16)), tol);
}

long count_pulses(const PolynomialMatrix& a, int i, int j) {
    long count = 0;
    for (int l = 0; l <= a.order(); ++l)
        if (a.coeff(l)(i, j) != 0.0) ++count;
    return count;
}

}  // namespace

TEST_CASE("elemental block: basis vector, degree, paraunitarity") {
    Eigen::VectorXd e1 = Eigen::VectorXd::Zero(2);
    e1(0) = 1.0;
    const PolynomialMatrix v = elemental_block(e1);
    REQUIRE(v.order() == 1);
    CHECK((v.coeff(0) - (Mat(2, 2) << 0, 0, 0, 1).finished()).cwiseAbs().maxCoeff() == 0.0);
    CHECK((v.coeff(1) - (Mat(2, 2) << 1, 0, 0, 0).finished()).cwiseAbs().maxCoeff() == 0.0);

    Rng rng(1);
    const PolynomialMatrix any = elemental_block(random_unit_vector(5, rng));
    CHECK(mcmillan_degree(any) == 1);

    Eigen::VectorXd half = Eigen::VectorXd::Constant(4, 0.5);
    const auto report = is_paraunitary(elemental_block(half), FrequencyGrid(16), 1e-12);
    CHECK(report.paraunitary);
    CHECK(report.max_deviation < 1e-12);

    Eigen::VectorXd bad = Eigen::VectorXd::Constant(4, 0.6);
    CHECK_THROWS_AS(elemental_block(bad), std::invalid_argument);
}

TEST_CASE("ebfm: degenerate cases and degree") {
    ElementalFactorization empty{3, {}};
    const PolynomialMatrix id = ebfm(empty);
    CHECK(id.order() == 0);
    CHECK((id.coeff(0) - Mat::Identity(3, 3)).cwiseAbs().maxCoeff() == 0.0);

    Eigen::VectorXd e1 = Eigen::VectorXd::Zero(2), e2 = Eigen::VectorXd::Zero(2);
    e1(0) = 1.0;
    e2(1) = 1.0;
    const PolynomialMatrix both = ebfm({2, {e1, e2}});
    REQUIRE(both.order() == 1);
    CHECK((both.coeff(1) - Mat::Identity(2, 2)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("ebfm: random K=64 is paraunitary and concentrates energy in time") {
    const PolynomialMatrix a = ebfm(random_elemental(4, 64, 42));
    CHECK(check_pu(a).paraunitary);
    CHECK(mcmillan_degree(a) == 64);

    // Random elemental vectors bunch the energy into a narrow band around
    // the centroid (roughly K/N) instead of spreading it over the full
    // degree-64 span; that is exactly why plain randomization disappoints.
    std::vector<double> energy(static_cast<std::size_t>(a.order()) + 1);
    double total = 0.0, centroid = 0.0;
    for (int k = 0; k <= a.order(); ++k) {
        energy[static_cast<std::size_t>(k)] = a.coeff(k).squaredNorm();
        total += energy[static_cast<std::size_t>(k)];
        centroid += k * energy[static_cast<std::size_t>(k)];
    }
    centroid /= total;
    CHECK(centroid < 32.0);
    double band = 0.0;
    for (int k = 0; k <= a.order(); ++k)
        if (std::abs(k - centroid) <= 4.0) band += energy[static_cast<std::size_t>(k)];
    CHECK(band / total > 0.5);
}

TEST_CASE("ebfm cascade form expands to the elemental product") {
    const auto factors = random_elemental(4, 6, 7);
    const PolynomialMatrix direct = ebfm(factors);
    const PolynomialMatrix via_cascade = expand(ebfm_cascade(factors));
    REQUIRE(via_cascade.order() == direct.order());
    for (int k = 0; k <= direct.order(); ++k)
        CHECK((via_cascade.coeff(k) - direct.coeff(k)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(ebfm_cascade(factors).total_internal_delay() == 6);
}

TEST_CASE("dfm: pulse positions follow m1 (+) m0") {
    Rng rng(3);
    const std::vector<int> m1{6, 0, 7, 5}, m0{12, 8, 0, 2};
    const Mat u = random_orthogonal(4, rng);
    const PolynomialMatrix a = expand(dfm(m1, u, m0));

    const int expected[4][4] = {{18, 14, 6, 8}, {12, 8, 0, 2}, {19, 15, 7, 9}, {17, 13, 5, 7}};
    for (int i = 0; i < 4; ++i) {
        for (int j = 0; j < 4; ++j) {
            CHECK(count_pulses(a, i, j) == 1);
            for (int l = 0; l <= a.order(); ++l)
                if (a.coeff(l)(i, j) != 0.0) CHECK(l == expected[i][j]);
        }
    }
    CHECK(check_pu(a).paraunitary);

    const std::vector<int> zero{0, 0, 0, 0};
    const PolynomialMatrix plain = expand(dfm(zero, u, zero));
    CHECK(plain.order() == 0);
    CHECK((plain.coeff(0) - u).cwiseAbs().maxCoeff() < 1e-15);

    CHECK_THROWS_AS(dfm(m1, 2.0 * u, m0), std::invalid_argument);
}

TEST_CASE("rdfm: ramp delays, density, paraunitarity") {
    const FfmCascade c = rdfm(3, 3, 11);
    REQUIRE(c.stage_count() == 4);
    CHECK(c.stages()[1].post_delays == std::vector<int>{0, 3, 6});
    CHECK(c.stages()[2].post_delays == std::vector<int>{0, 9, 18});

    const FfmCascade c4 = rdfm(4, 3, 5);
    const PolynomialMatrix a = expand(c4);
    CHECK(a.order() <= 64);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) CHECK(count_pulses(a, i, j) == 64);
    CHECK(check_pu(a).paraunitary);
}

TEST_CASE("rdfm intermediates are delay-distinct across rows") {
    // Each delayed intermediate D_m X has at most one nonzero row per
    // coefficient matrix; that is what makes the next mixing stage dense.
    const FfmCascade c = rdfm(3, 2, 19);
    for (int upto = 1; upto <= 2; ++upto) {
        std::vector<CascadeStage> partial(c.stages().begin(), c.stages().begin() + upto);
        const FfmCascade inter(3, c.pre_delays(), std::move(partial));
        const PolynomialMatrix x = expand(inter);
        for (int l = 0; l <= x.order(); ++l) {
            int rows_nonzero = 0;
            for (int i = 0; i < 3; ++i)
                if (x.coeff(l).row(i).cwiseAbs().maxCoeff() > 0.0) ++rows_nonzero;
            CHECK(rows_nonzero <= 1);
        }
    }
}

TEST_CASE("hadamard matrix: Sylvester sizes only") {
    const Mat h2 = hadamard_matrix(2);
    CHECK((h2 * h2.transpose() - Mat::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-15);
    CHECK_THROWS_AS(hadamard_matrix(12), std::invalid_argument);
    CHECK_THROWS_AS(hadamard_matrix(3), std::invalid_argument);
}

TEST_CASE("hadamard_ffm: pulse counts and uniform magnitudes") {
    const PolynomialMatrix a42 = expand(hadamard_ffm(4, 2));
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) CHECK(count_pulses(a42, i, j) == 16);

    // K = 1, N = 2: every coefficient is +-2^{-(1+1)/2} = +-1/2.
    const PolynomialMatrix a21 = expand(hadamard_ffm(2, 1));
    for (int l = 0; l <= a21.order(); ++l)
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j)
                CHECK(std::abs(a21.coeff(l)(i, j)) == doctest::Approx(0.5));

    // Magnitudes are bit-identical across all nonzero taps and sit at
    // N^{-(K+1)/2} up to rounding of the orthonormal Hadamard entries.
    const PolynomialMatrix a23 = expand(hadamard_ffm(2, 3));
    const double expected = std::pow(2.0, -2.0);
    std::set<double> magnitudes;
    for (int l = 0; l <= a23.order(); ++l)
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j)
                if (a23.coeff(l)(i, j) != 0.0) magnitudes.insert(std::abs(a23.coeff(l)(i, j)));
    CHECK(magnitudes.size() == 1);
    CHECK(*magnitudes.begin() == doctest::Approx(expected).epsilon(1e-14));

    CHECK(check_pu(expand(hadamard_ffm(8, 2))).paraunitary);
}

TEST_CASE("vfm: pulse count, filter order, density, seeds") {
    const VelvetSpec spec{4, 2, 1.0 / 30.0, 17};
    const FfmCascade c = vfm(spec);
    const PolynomialMatrix a = expand(c);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) CHECK(count_pulses(a, i, j) == 16);
    CHECK(a.order() > 300);
    CHECK(a.order() < 650);

    // Measured pulse density within 30% of the requested rho.
    const double measured = 16.0 / (a.order() + 1);
    CHECK(measured > 0.7 / 30.0);
    CHECK(measured < 1.3 / 30.0);
    CHECK(check_pu(a).paraunitary);

    // Same spec, different seed: same counts and magnitudes, different taps.
    const PolynomialMatrix b = expand(vfm({4, 2, 1.0 / 30.0, 18}));
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) CHECK(count_pulses(b, i, j) == 16);
    CHECK(b.order() != a.order());

    CHECK_THROWS_AS(vfm({4, 2, 1.5, 1}), std::invalid_argument);
    CHECK_THROWS_AS(vfm({4, 2, 0.0, 1}), std::invalid_argument);
}

TEST_CASE("vfm at density 1 reduces to the minimal Hadamard delays") {
    const FfmCascade velvet = vfm({4, 2, 1.0, 9});
    const FfmCascade hada = hadamard_ffm(4, 2);
    REQUIRE(velvet.stage_count() == hada.stage_count());
    for (int s = 0; s < hada.stage_count(); ++s)
        CHECK(velvet.stages()[static_cast<std::size_t>(s)].post_delays ==
              hada.stages()[static_cast<std::size_t>(s)].post_delays);
}

TEST_CASE("expand: trivial cascade and paraunitarity of random cascades") {
    const FfmCascade trivial = FfmCascade::scalar(Mat::Identity(3, 3));
    const PolynomialMatrix id = expand(trivial);
    CHECK(id.order() == 0);
    CHECK((id.coeff(0) - Mat::Identity(3, 3)).cwiseAbs().maxCoeff() == 0.0);

    const FfmCascade r = rdfm(4, 3, 23);
    CHECK(check_pu(expand(r)).paraunitary);
}

TEST_CASE("invert: scalar, dfm pattern, paraconjugate identity") {
    Rng rng(13);
    const Mat u = random_orthogonal(3, rng);
    const FfmCascade inv_scalar = invert(FfmCascade::scalar(u));
    CHECK((expand(inv_scalar).coeff(0) - u.transpose()).cwiseAbs().maxCoeff() < 1e-15);

    const std::vector<int> m1{6, 0, 7, 5}, m0{12, 8, 0, 2};
    const Mat u4 = random_orthogonal(4, rng);
    const FfmCascade inv_dfm = invert(dfm(m1, u4, m0));
    CHECK(inv_dfm.pre_delays() == m1);
    REQUIRE(inv_dfm.stage_count() == 1);
    CHECK(inv_dfm.stages()[0].post_delays == m0);
    CHECK((inv_dfm.stages()[0].mix - u4.transpose()).cwiseAbs().maxCoeff() == 0.0);

    // expand(invert(c)) evaluated at z equals A(z)^-1 at 1/z: the product
    // A^-1(1/z)|_{z -> conj on circle} A(z) is the identity on the circle.
    const FfmCascade c = rdfm(4, 2, 3);
    const PolynomialMatrix a = expand(c);
    const PolynomialMatrix ai = expand(invert(c));
    const FrequencyGrid grid(64);
    for (int k = 0; k < 8; ++k) {
        const cplx z = grid.points[static_cast<std::size_t>(k * 8)];
        const CMat prod = evaluate(ai, 1.0 / z) * evaluate(a, z);
        CHECK((prod - CMat::Identity(4, 4)).cwiseAbs().maxCoeff() < 1e-10);
    }
}

TEST_CASE("operation_count reproduces the published table") {
    struct Cell {
        int n, k;
        long adds, mults, rw, pulses;
    };
    const Cell cells[] = {
        {2, 2, 4, 2, 12, 4},      {2, 3, 6, 2, 16, 16},     {2, 4, 8, 2, 20, 64},
        {4, 2, 16, 4, 24, 16},    {4, 3, 24, 4, 32, 256},   {4, 4, 32, 4, 40, 4096},
        {8, 2, 48, 8, 48, 64},    {8, 3, 72, 8, 64, 4096},  {8, 4, 96, 8, 80, 262144},
    };
    for (const Cell& cell : cells) {
        const FfmCascade c = hadamard_ffm(cell.n, cell.k);
        const auto counts = operation_count(c, true);
        CHECK(counts.adds == cell.adds);
        CHECK(counts.mults == cell.mults);
        CHECK(counts.delay_rw == cell.rw);
        CHECK(table_pulses_per_filter(cell.n, c.delay_stage_count(), true) == cell.pulses);
    }

    // Scalar 16x16 reference column.
    const FfmCascade scalar = FfmCascade::scalar(hadamard_matrix(16));
    const auto counts = operation_count(scalar, false);
    CHECK(counts.adds == 256);
    CHECK(counts.mults == 256);
    CHECK(counts.delay_rw == 0);
    CHECK(table_pulses_per_filter(16, scalar.delay_stage_count(), false) == 1);
}

TEST_CASE("cascade validation rejects bad stages") {
    Rng rng(5);
    const Mat u = random_orthogonal(3, rng);
    CHECK_THROWS_AS(FfmCascade(3, {0, 0, 0}, {{2.0 * u, {0, 0, 0}}}), std::invalid_argument);
    CHECK_THROWS_AS(FfmCascade(3, {0, 0}, {}), std::invalid_argument);
    CHECK_THROWS_AS(FfmCascade(3, {0, 0, -1}, {}), std::invalid_argument);
}
