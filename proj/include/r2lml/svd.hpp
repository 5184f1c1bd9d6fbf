#pragma once

#include "r2lml/common.hpp"

namespace r2lml {

struct ThinSvd {
    Matrix u;             // rows x r
    Vector singular;      // r, descending
    Matrix v;             // cols x r
};

/// Thin SVD by divide-and-conquer, falling back to one-sided Jacobi when the
/// former returns non-finite values on finite input.
ThinSvd thin_svd(const Matrix& m);

/// Singular values only, with the same fallback.
Vector singular_values(const Matrix& m);

} // namespace r2lml
