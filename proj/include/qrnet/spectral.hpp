#pragma once

#include "qrnet/types.hpp"

namespace qrnet {

// Max real part of the spectrum. Balances the matrix, then runs the
// Hessenberg/Schur eigensolver.
double spectral_abscissa(const Matrix& A);

}  // namespace qrnet
