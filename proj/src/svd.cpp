#include "r2lml/svd.hpp"

namespace r2lml {

namespace {

template <class Svd>
ThinSvd unpack(const Svd& svd, bool vectors) {
    ThinSvd out;
    out.singular = svd.singularValues();
    if (vectors) {
        out.u = svd.matrixU();
        out.v = svd.matrixV();
    }
    return out;
}

bool finite(const ThinSvd& s) { return s.singular.allFinite() && s.u.allFinite() && s.v.allFinite(); }

ThinSvd decompose(const Matrix& m, bool vectors) {
    if (!m.allFinite()) throw Error("SVD failure: matrix has non-finite entries");
    if (m.size() == 0) return {Matrix(m.rows(), 0), Vector(0), Matrix(m.cols(), 0)};
    const unsigned options = vectors ? Eigen::ComputeThinU | Eigen::ComputeThinV : 0;
    ThinSvd out = unpack(Eigen::BDCSVD<Matrix>(m, options), vectors);
    if (finite(out)) return out;
    out = unpack(Eigen::JacobiSVD<Matrix>(m, options), vectors);
    if (!finite(out)) throw Error("SVD failure: no finite decomposition");
    return out;
}

} // namespace

ThinSvd thin_svd(const Matrix& m) { return decompose(m, true); }

Vector singular_values(const Matrix& m) { return decompose(m, false).singular; }

} // namespace r2lml
