#pragma once

#include <Eigen/Dense>

#include <complex>
#include <iosfwd>
#include <string>
#include <vector>

namespace ffdn {

using Mat = Eigen::MatrixXd;
using CMat = Eigen::MatrixXcd;
using cplx = std::complex<double>;

// Square FIR matrix A(z) = F_0 + F_1 z^-1 + ... + F_L z^-L stored as the
// dense coefficient matrices F_k. Immutable after construction; trailing
// all-zero coefficients are trimmed so order() is tight.
class PolynomialMatrix {
public:
    PolynomialMatrix(int size, std::vector<Mat> coeffs);

    static PolynomialMatrix identity(int size);
    static PolynomialMatrix zero(int size);
    static PolynomialMatrix scalar(const Mat& m);
    // diag(z^-d_1, ..., z^-d_N)
    static PolynomialMatrix diagonal_delays(const std::vector<int>& delays);

    int size() const { return size_; }
    int order() const { return static_cast<int>(coeffs_.size()) - 1; }
    const Mat& coeff(int k) const { return coeffs_[static_cast<std::size_t>(k)]; }
    const std::vector<Mat>& coeffs() const { return coeffs_; }

    bool is_zero() const;

private:
    int size_;
    std::vector<Mat> coeffs_;
};

// Uniformly spaced points e^{j 2 pi k / count} on the unit circle.
struct FrequencyGrid {
    explicit FrequencyGrid(int count);
    int count() const { return static_cast<int>(points.size()); }
    std::vector<cplx> points;
};

struct ParaunitarityReport {
    bool paraunitary = false;
    double max_deviation = 0.0;
};

PolynomialMatrix multiply(const PolynomialMatrix& a, const PolynomialMatrix& b);

// Horner evaluation of sum_k F_k z^-k. z = 0 with order > 0 is a domain error.
CMat evaluate(const PolynomialMatrix& a, cplx z);

// Frequency response at all grid points of a uniform grid (FFT-based).
std::vector<CMat> sample_on_grid(const PolynomialMatrix& a, int grid_count);

// Checks max ||A^H A - I||_inf over the grid. Requires
// grid.count >= 2*order + 1 so the polynomial identity is certified.
ParaunitarityReport is_paraunitary(const PolynomialMatrix& a, const FrequencyGrid& grid,
                                   double tol = 1e-9);

// det A(z) as a coefficient list in powers of z^-1, via unit-circle sampling
// and inverse DFT interpolation. Trailing coefficients below 1e-9 of the
// largest magnitude are trimmed.
std::vector<double> determinant(const PolynomialMatrix& a);

// Degree of det A(z); valid for lossless (paraunitary) input only and
// throws std::invalid_argument otherwise.
int mcmillan_degree(const PolynomialMatrix& a);

// Plain-text serialization: header "N L" then L+1 blocks of N rows of N
// space-separated values at 17 significant digits.
std::string to_text(const PolynomialMatrix& a);
PolynomialMatrix polymat_from_text(const std::string& text);

}  // namespace ffdn
