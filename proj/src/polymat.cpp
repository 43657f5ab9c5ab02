#include "polymat.hpp"

#include "fft.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace ffdn {

namespace {

bool all_zero(const Mat& m) { return m.cwiseAbs().maxCoeff() == 0.0; }

}  // namespace

PolynomialMatrix::PolynomialMatrix(int size, std::vector<Mat> coeffs) : size_(size) {
    if (size <= 0) throw std::invalid_argument("polynomial matrix size must be positive");
    if (coeffs.empty()) coeffs.push_back(Mat::Zero(size, size));
    for (const Mat& m : coeffs)
        if (m.rows() != size || m.cols() != size)
            throw std::invalid_argument("coefficient matrix dimension mismatch");
    while (coeffs.size() > 1 && all_zero(coeffs.back())) coeffs.pop_back();
    coeffs_ = std::move(coeffs);
}

PolynomialMatrix PolynomialMatrix::identity(int size) {
    return PolynomialMatrix(size, {Mat::Identity(size, size)});
}

PolynomialMatrix PolynomialMatrix::zero(int size) {
    return PolynomialMatrix(size, {Mat::Zero(size, size)});
}

PolynomialMatrix PolynomialMatrix::scalar(const Mat& m) {
    if (m.rows() != m.cols()) throw std::invalid_argument("scalar stage must be square");
    return PolynomialMatrix(static_cast<int>(m.rows()), {m});
}

PolynomialMatrix PolynomialMatrix::diagonal_delays(const std::vector<int>& delays) {
    const int n = static_cast<int>(delays.size());
    if (n == 0) throw std::invalid_argument("empty delay vector");
    int max_delay = 0;
    for (int d : delays) {
        if (d < 0) throw std::invalid_argument("negative delay");
        max_delay = std::max(max_delay, d);
    }
    std::vector<Mat> coeffs(static_cast<std::size_t>(max_delay) + 1, Mat::Zero(n, n));
    for (int i = 0; i < n; ++i) coeffs[static_cast<std::size_t>(delays[i])](i, i) = 1.0;
    return PolynomialMatrix(n, std::move(coeffs));
}

bool PolynomialMatrix::is_zero() const { return order() == 0 && all_zero(coeffs_[0]); }

FrequencyGrid::FrequencyGrid(int count) {
    if (count < 1) throw std::invalid_argument("frequency grid needs at least one point");
    points.resize(static_cast<std::size_t>(count));
    for (int k = 0; k < count; ++k) {
        const double w = 2.0 * M_PI * k / count;
        points[static_cast<std::size_t>(k)] = cplx(std::cos(w), std::sin(w));
    }
}

PolynomialMatrix multiply(const PolynomialMatrix& a, const PolynomialMatrix& b) {
    if (a.size() != b.size()) throw std::invalid_argument("polynomial matrix size mismatch");
    const int n = a.size();
    if (a.is_zero() || b.is_zero()) return PolynomialMatrix::zero(n);
    std::vector<Mat> out(static_cast<std::size_t>(a.order() + b.order()) + 1, Mat::Zero(n, n));
    for (int i = 0; i <= a.order(); ++i)
        for (int j = 0; j <= b.order(); ++j)
            out[static_cast<std::size_t>(i + j)] += a.coeff(i) * b.coeff(j);
    return PolynomialMatrix(n, std::move(out));
}

CMat evaluate(const PolynomialMatrix& a, cplx z) {
    if (z == cplx(0.0, 0.0) && a.order() > 0)
        throw std::domain_error("cannot evaluate at z = 0: negative powers undefined");
    const cplx zi = (a.order() > 0) ? 1.0 / z : cplx(0.0, 0.0);
    CMat acc = a.coeff(a.order()).cast<cplx>();
    for (int k = a.order() - 1; k >= 0; --k) acc = acc * zi + a.coeff(k).cast<cplx>();
    return acc;
}

std::vector<CMat> sample_on_grid(const PolynomialMatrix& a, int grid_count) {
    if (grid_count < 1) throw std::invalid_argument("grid count must be positive");
    const int n = a.size();
    std::vector<CMat> out(static_cast<std::size_t>(grid_count), CMat::Zero(n, n));
    // A(e^{jw_k}) = sum_l F_l e^{-j w_k l} is the forward DFT of the tap
    // sequence of each entry, taken mod grid_count. Aliasing cannot occur
    // for callers that respect grid_count >= order + 1.
    std::vector<fft::cplx> seq(static_cast<std::size_t>(grid_count));
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            std::fill(seq.begin(), seq.end(), fft::cplx(0.0, 0.0));
            for (int l = 0; l <= a.order(); ++l)
                seq[static_cast<std::size_t>(l % grid_count)] += a.coeff(l)(i, j);
            fft::forward(seq);
            for (int k = 0; k < grid_count; ++k) out[static_cast<std::size_t>(k)](i, j) = seq[static_cast<std::size_t>(k)];
        }
    }
    return out;
}

ParaunitarityReport is_paraunitary(const PolynomialMatrix& a, const FrequencyGrid& grid,
                                   double tol) {
    if (grid.count() < 2 * a.order() + 1)
        throw std::invalid_argument("grid too coarse to certify paraunitarity");
    const int n = a.size();
    const auto samples = sample_on_grid(a, grid.count());
    double max_dev = 0.0;
    for (const CMat& s : samples) {
        const CMat gram = s.adjoint() * s - CMat::Identity(n, n);
        max_dev = std::max(max_dev, gram.cwiseAbs().maxCoeff());
    }
    return {max_dev <= tol, max_dev};
}

std::vector<double> determinant(const PolynomialMatrix& a) {
    const int n = a.size();
    const int degree_bound = n * a.order();
    const int grid = static_cast<int>(fft::next_pow2(static_cast<std::size_t>(degree_bound) + 1));
    const auto samples = sample_on_grid(a, grid);

    std::vector<fft::cplx> dets(static_cast<std::size_t>(grid));
    for (int k = 0; k < grid; ++k)
        dets[static_cast<std::size_t>(k)] = samples[static_cast<std::size_t>(k)].determinant();
    fft::inverse(dets);

    std::vector<double> coeffs(static_cast<std::size_t>(grid));
    double max_mag = 0.0;
    for (int k = 0; k < grid; ++k) {
        coeffs[static_cast<std::size_t>(k)] = dets[static_cast<std::size_t>(k)].real();
        max_mag = std::max(max_mag, std::abs(coeffs[static_cast<std::size_t>(k)]));
    }
    const double trim = 1e-9 * max_mag;
    while (coeffs.size() > 1 && std::abs(coeffs.back()) <= trim) coeffs.pop_back();
    return coeffs;
}

int mcmillan_degree(const PolynomialMatrix& a) {
    FrequencyGrid grid(std::max(2 * a.order() + 1, 2));
    const auto report = is_paraunitary(a, grid, 1e-8);
    if (!report.paraunitary)
        throw std::invalid_argument("mcmillan_degree requires a lossless (paraunitary) matrix");
    return static_cast<int>(determinant(a).size()) - 1;
}

std::string to_text(const PolynomialMatrix& a) {
    std::ostringstream os;
    os << a.size() << ' ' << a.order() << '\n';
    char buf[64];
    for (int k = 0; k <= a.order(); ++k) {
        for (int i = 0; i < a.size(); ++i) {
            for (int j = 0; j < a.size(); ++j) {
                std::snprintf(buf, sizeof buf, "%.17g", a.coeff(k)(i, j));
                os << buf << (j + 1 < a.size() ? " " : "");
            }
            os << '\n';
        }
    }
    return os.str();
}

PolynomialMatrix polymat_from_text(const std::string& text) {
    std::istringstream is(text);
    int n = 0, order = -1;
    if (!(is >> n >> order) || n <= 0 || order < 0)
        throw std::invalid_argument("malformed polynomial matrix header");
    std::vector<Mat> coeffs(static_cast<std::size_t>(order) + 1, Mat::Zero(n, n));
    for (int k = 0; k <= order; ++k)
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                if (!(is >> coeffs[static_cast<std::size_t>(k)](i, j)))
                    throw std::invalid_argument("truncated polynomial matrix body");
    return PolynomialMatrix(n, std::move(coeffs));
}

}  // namespace ffdn
