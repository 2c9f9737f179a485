#include "mlsm/tensor.hpp"

#include <string>

#include "mlsm/error.hpp"

namespace mlsm {

namespace {

std::string shape_string(Index r, Index c) { return std::to_string(r) + "x" + std::to_string(c); }

}  // namespace

Tensor3::Tensor3(Dims dims) : dims_(dims), data_(RowMatrix::Zero(dims.d1, dims.d2 * dims.d3)) {
    if (dims.d1 < 0 || dims.d2 < 0 || dims.d3 < 0) throw DimensionError("negative tensor dimension");
}

Tensor3::Tensor3(Dims dims, RowMatrix mode1) : dims_(dims), data_(std::move(mode1)) {
    if (data_.rows() != dims.d1 || data_.cols() != dims.d2 * dims.d3)
        throw DimensionError("mode-1 storage is " + shape_string(data_.rows(), data_.cols()) +
                             ", expected " + shape_string(dims.d1, dims.d2 * dims.d3));
}

Matrix unfold(const Tensor3& x, Mode mode) {
    const Dims& d = x.dims();
    if (mode == Mode::One) return x.mode1();
    Matrix out(d.d2, d.d1 * d.d3);
    for (Index k = 0; k < d.d3; ++k)
        out.middleCols(d.d1 * k, d.d1) = x.slice(k).transpose();
    return out;
}

Tensor3 refold(const Eigen::Ref<const Matrix>& m, Mode mode, Dims dims) {
    const Index rows = mode == Mode::One ? dims.d1 : dims.d2;
    const Index cols = mode == Mode::One ? dims.d2 * dims.d3 : dims.d1 * dims.d3;
    if (m.rows() != rows || m.cols() != cols)
        throw DimensionError("refold: matrix is " + shape_string(m.rows(), m.cols()) + ", expected " +
                             shape_string(rows, cols));
    if (mode == Mode::One) return Tensor3(dims, RowMatrix(m));
    RowMatrix storage(dims.d1, dims.d2 * dims.d3);
    for (Index k = 0; k < dims.d3; ++k)
        storage.middleCols(dims.d2 * k, dims.d2) = m.middleCols(dims.d1 * k, dims.d1).transpose();
    return Tensor3(dims, std::move(storage));
}

Tensor3 tucker_linpred(const Tensor3& core, const Matrix& theta, const Matrix& phi, const Matrix& alpha,
                       const Matrix& beta) {
    const Dims& c = core.dims();
    const Index n = theta.rows();
    const Index layers = c.d3;
    if (theta.cols() != c.d1 || phi.cols() != c.d2 || phi.rows() != n)
        throw DimensionError("tucker_linpred: loading matrices do not match the core");
    if (alpha.rows() != n || alpha.cols() != layers || beta.rows() != n || beta.cols() != layers)
        throw DimensionError("tucker_linpred: intercepts must be n x T");
    RowMatrix storage(n, n * layers);
    for (Index t = 0; t < layers; ++t) {
        Matrix block = theta * core.slice(t) * phi.transpose();
        block.colwise() += beta.col(t);
        block.rowwise() += alpha.col(t).transpose();
        storage.middleCols(n * t, n) = block;
    }
    return Tensor3(Dims{n, n, layers}, std::move(storage));
}

Matrix kron_rightmul(const Eigen::Ref<const Matrix>& v, const Eigen::Ref<const Matrix>& b) {
    const Index n = b.rows();
    if (n == 0 || v.rows() % n != 0)
        throw DimensionError("kron_rightmul: row count " + std::to_string(v.rows()) + " is not a multiple of " +
                             std::to_string(n));
    const Index layers = v.rows() / n;
    Matrix out(v.cols(), layers * b.cols());
    for (Index t = 0; t < layers; ++t)
        out.middleCols(b.cols() * t, b.cols()).noalias() = v.middleRows(n * t, n).transpose() * b;
    return out;
}

CenteringOps::CenteringOps(Index n, Index layers) : n_(n), layers_(layers) {
    if (n <= 0 || layers <= 0) throw DimensionError("CenteringOps needs positive n and T");
}

Matrix CenteringOps::left(const Eigen::Ref<const Matrix>& m) const {
    if (m.rows() != n_) throw DimensionError("J_n: expected " + std::to_string(n_) + " rows");
    Matrix out = m;
    out.rowwise() -= m.colwise().mean();
    return out;
}

Matrix CenteringOps::right(const Eigen::Ref<const Matrix>& m) const {
    if (m.cols() != n_ * layers_) throw DimensionError("J_{n,T}: expected " + std::to_string(n_ * layers_) + " columns");
    Matrix out = m;
    for (Index t = 0; t < layers_; ++t) {
        auto block = out.middleCols(n_ * t, n_);
        const Vector means = block.rowwise().mean();
        block.colwise() -= means;
    }
    return out;
}

Matrix CenteringOps::rows_blockwise(const Eigen::Ref<const Matrix>& v) const {
    if (v.rows() != n_ * layers_) throw DimensionError("J_{n,T}: expected " + std::to_string(n_ * layers_) + " rows");
    Matrix out = v;
    for (Index t = 0; t < layers_; ++t) {
        auto block = out.middleRows(n_ * t, n_);
        const Eigen::RowVectorXd means = block.colwise().mean();
        block.rowwise() -= means;
    }
    return out;
}

Matrix two_sided_center(const Eigen::Ref<const Matrix>& m, const CenteringOps& ops) {
    if (m.rows() != ops.n() || m.cols() != ops.n() * ops.layers())
        throw DimensionError("two_sided_center: expected " + shape_string(ops.n(), ops.n() * ops.layers()) +
                             ", got " + shape_string(m.rows(), m.cols()));
    return ops.right(ops.left(m));
}

}  // namespace mlsm
