#pragma once

// Small dense solvers used by the oracles (systems of at most a few hundred
// unknowns).

#include <span>
#include <vector>

#include "vattn/core.hpp"

namespace vattn::linalg {

/// Solves A x = b in place by Gaussian elimination with partial pivoting.
/// A is n x n row-major.  Returns false if a pivot magnitude falls below
/// `pivot_tol` times the largest entry of A.
bool solve(std::vector<double> A, std::vector<double>& b, std::size_t n, double pivot_tol = 1e-14);

/// Pseudo-inverse rows of a set of linearly independent vectors.  `columns`
/// holds k vectors of length n as rows; the result W (k x n) satisfies
/// W * columns^T = I and its rows span the same space.  Two passes of
/// modified Gram-Schmidt.  Returns false if a vector is dependent on the
/// earlier ones to relative tolerance `rank_tol`.
bool pseudo_inverse_rows(const Matrix& columns, Matrix& W, double rank_tol = 1e-12);

}  // namespace vattn::linalg
