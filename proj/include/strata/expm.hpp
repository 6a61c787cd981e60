#pragma once

#include "strata/error.hpp"

#include <Eigen/Dense>

#include <array>
#include <cmath>

namespace strata {

namespace detail {

// Degree m diagonal Pade approximant of exp, returned as numerator/denominator
// pieces U (odd part) and V (even part): exp(A) ~ (V - U)^{-1} (V + U).
inline void pade_terms(const Eigen::MatrixXd& A, int degree, Eigen::MatrixXd& U, Eigen::MatrixXd& V) {
    static constexpr std::array<double, 4> b3{120.0, 60.0, 12.0, 1.0};
    static constexpr std::array<double, 6> b5{30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0};
    static constexpr std::array<double, 8> b7{17297280.0, 8648640.0, 1995840.0, 277200.0,
                                              25200.0,    1512.0,    56.0,      1.0};
    static constexpr std::array<double, 10> b9{17643225600.0, 8821612800.0, 2075673600.0, 302702400.0,
                                               30270240.0,    2162160.0,    110880.0,     3960.0,
                                               90.0,          1.0};
    static constexpr std::array<double, 14> b13{
        64764752532480000.0, 32382376266240000.0, 7771770303897600.0, 1187353796428800.0,
        129060195264000.0,   10559470521600.0,    670442572800.0,     33522128640.0,
        1323241920.0,        40840800.0,          960960.0,           16380.0,
        182.0,               1.0};

    const auto n = A.rows();
    const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
    const Eigen::MatrixXd A2 = A * A;

    switch (degree) {
    case 3:
        U = A * (b3[3] * A2 + b3[1] * I);
        V = b3[2] * A2 + b3[0] * I;
        return;
    case 5: {
        const Eigen::MatrixXd A4 = A2 * A2;
        U = A * (b5[5] * A4 + b5[3] * A2 + b5[1] * I);
        V = b5[4] * A4 + b5[2] * A2 + b5[0] * I;
        return;
    }
    case 7: {
        const Eigen::MatrixXd A4 = A2 * A2;
        const Eigen::MatrixXd A6 = A4 * A2;
        U = A * (b7[7] * A6 + b7[5] * A4 + b7[3] * A2 + b7[1] * I);
        V = b7[6] * A6 + b7[4] * A4 + b7[2] * A2 + b7[0] * I;
        return;
    }
    case 9: {
        const Eigen::MatrixXd A4 = A2 * A2;
        const Eigen::MatrixXd A6 = A4 * A2;
        const Eigen::MatrixXd A8 = A6 * A2;
        U = A * (b9[9] * A8 + b9[7] * A6 + b9[5] * A4 + b9[3] * A2 + b9[1] * I);
        V = b9[8] * A8 + b9[6] * A6 + b9[4] * A4 + b9[2] * A2 + b9[0] * I;
        return;
    }
    default: {
        const Eigen::MatrixXd A4 = A2 * A2;
        const Eigen::MatrixXd A6 = A4 * A2;
        U = A * (A6 * (b13[13] * A6 + b13[11] * A4 + b13[9] * A2) + b13[7] * A6 + b13[5] * A4 +
                 b13[3] * A2 + b13[1] * I);
        V = A6 * (b13[12] * A6 + b13[10] * A4 + b13[8] * A2) + b13[6] * A6 + b13[4] * A4 + b13[2] * A2 +
            b13[0] * I;
        return;
    }
    }
}

} // namespace detail

/// exp(A) by scaling and squaring with Pade approximants (Higham 2005 degree
/// selection). Throws NumericalFailure if the result is not finite.
inline Eigen::MatrixXd expm(const Eigen::MatrixXd& A) {
    require(A.rows() == A.cols(), ErrorKind::DimensionMismatch, "expm needs a square matrix");
    require(A.allFinite(), ErrorKind::NumericalFailure, "expm input is not finite");
    const auto n = A.rows();
    if (n == 0) return A;

    static constexpr std::array<int, 4> degrees{3, 5, 7, 9};
    static constexpr std::array<double, 4> thetas{1.495585217958292e-2, 2.539398330063230e-1,
                                                  9.504178996162932e-1, 2.097847961257068e0};
    constexpr double theta13 = 5.371920351148152e0;

    const double norm1 = A.cwiseAbs().colwise().sum().maxCoeff();
    Eigen::MatrixXd U, V;
    int squarings = 0;
    bool done = false;
    for (std::size_t k = 0; k < degrees.size() && !done; ++k) {
        if (norm1 <= thetas[k]) {
            detail::pade_terms(A, degrees[k], U, V);
            done = true;
        }
    }
    if (!done) {
        squarings = std::max(0, static_cast<int>(std::ceil(std::log2(norm1 / theta13))));
        const Eigen::MatrixXd scaled = A / std::ldexp(1.0, squarings);
        detail::pade_terms(scaled, 13, U, V);
    }

    Eigen::PartialPivLU<Eigen::MatrixXd> lu(V - U);
    Eigen::MatrixXd R = lu.solve(V + U);
    for (int i = 0; i < squarings; ++i) R = R * R;
    require(R.allFinite(), ErrorKind::NumericalFailure, "matrix exponential did not produce finite values");
    return R;
}

/// e^{K t} for t >= 0.
inline Eigen::MatrixXd matrix_exponential(const Eigen::MatrixXd& K, double t) {
    require(std::isfinite(t) && t >= 0.0, ErrorKind::InvalidArgument, "time must be finite and nonnegative");
    return expm(K * t);
}

/// Frechet derivative L(A, E) of exp at A in direction E, read off the upper
/// right block of exp([[A, E], [0, A]]).
inline Eigen::MatrixXd expm_frechet(const Eigen::MatrixXd& A, const Eigen::MatrixXd& E) {
    require(A.rows() == A.cols() && E.rows() == A.rows() && E.cols() == A.cols(), ErrorKind::DimensionMismatch,
            "Frechet derivative needs square matrices of equal size");
    const auto n = A.rows();
    Eigen::MatrixXd block = Eigen::MatrixXd::Zero(2 * n, 2 * n);
    block.topLeftCorner(n, n) = A;
    block.topRightCorner(n, n) = E;
    block.bottomRightCorner(n, n) = A;
    return expm(block).topRightCorner(n, n);
}

} // namespace strata
