#pragma once

#include "qrnet/types.hpp"

namespace qrnet {

// Chebyshev-Gauss-Lobatto nodes xi_j = cos(j*pi/n), j = 0..n (descending from +1 to -1).
Vector chebyshev_nodes(int n);

// First-order spectral differentiation matrix on the (n+1)-point grid above.
// Diagonal entries use the negative-row-sum trick so constants differentiate
// to exactly zero.
Matrix chebyshev_diff_matrix(int n);

// Clenshaw-Curtis quadrature weights on the same grid (integrate over [-1,1]).
Vector clenshaw_curtis_weights(int n);

}  // namespace qrnet
