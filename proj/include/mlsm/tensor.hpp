#pragma once

#include <span>

#include <Eigen/Dense>

namespace mlsm {

using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class Mode { One = 1, Two = 2 };

struct Dims {
    Index d1 = 0;
    Index d2 = 0;
    Index d3 = 0;

    Index size() const { return d1 * d2 * d3; }
    bool operator==(const Dims&) const = default;
};

// Dense order-3 array. Entry (i1, i2, i3) lives at row i1, column i2 + d2 * i3
// of a row-major d1 x (d2 d3) matrix, so the mode-1 unfolding is the storage
// itself. Indices are 0-based throughout the C++ API.
class Tensor3 {
public:
    Tensor3() = default;
    explicit Tensor3(Dims dims);
    Tensor3(Dims dims, RowMatrix mode1);

    const Dims& dims() const { return dims_; }

    double operator()(Index i1, Index i2, Index i3) const { return data_(i1, i2 + dims_.d2 * i3); }
    double& operator()(Index i1, Index i2, Index i3) { return data_(i1, i2 + dims_.d2 * i3); }

    /// Zero-copy view of the mode-1 unfolding.
    const RowMatrix& mode1() const { return data_; }

    /// Frontal slice X(:, :, i3) as a d1 x d2 block of the storage.
    auto slice(Index i3) const { return data_.middleCols(dims_.d2 * i3, dims_.d2); }

    std::span<const double> values() const { return {data_.data(), static_cast<std::size_t>(data_.size())}; }
    std::span<double> values() { return {data_.data(), static_cast<std::size_t>(data_.size())}; }

    bool operator==(const Tensor3& other) const { return dims_ == other.dims_ && data_ == other.data_; }

private:
    Dims dims_{};
    RowMatrix data_;
};

/// Mode-m unfolding, m in {1, 2}; [M1]_{i1, i2 + d2 i3} = [M2]_{i2, i1 + d1 i3} = X(i1, i2, i3).
Matrix unfold(const Tensor3& x, Mode mode);

/// Inverse of unfold. Throws DimensionError when the shape disagrees with dims.
Tensor3 refold(const Eigen::Ref<const Matrix>& m, Mode mode, Dims dims);

/// X(i, j, t) = theta_i' Lambda_t phi_j + beta(i, t) + alpha(j, t), with Lambda_t = core(:, :, t).
Tensor3 tucker_linpred(const Tensor3& core, const Matrix& theta, const Matrix& phi, const Matrix& alpha,
                       const Matrix& beta);

/// V' (I_T kron B) for V with n T rows and B with n rows, computed block by block.
Matrix kron_rightmul(const Eigen::Ref<const Matrix>& v, const Eigen::Ref<const Matrix>& b);

// J_n = I_n - 11'/n and J_{n,T} = I_T kron J_n, applied as mean subtraction.
class CenteringOps {
public:
    CenteringOps(Index n, Index layers);

    Index n() const { return n_; }
    Index layers() const { return layers_; }

    /// J_n M: subtract each column's mean.
    Matrix left(const Eigen::Ref<const Matrix>& m) const;
    /// M J_{n,T}': within each block of n columns, subtract each row's block mean.
    Matrix right(const Eigen::Ref<const Matrix>& m) const;
    /// J_{n,T} V for V with n T rows: subtract the mean of each length-n row block.
    Matrix rows_blockwise(const Eigen::Ref<const Matrix>& v) const;

private:
    Index n_;
    Index layers_;
};

/// J_n M J_{n,T}' for M of shape n x nT.
Matrix two_sided_center(const Eigen::Ref<const Matrix>& m, const CenteringOps& ops);

}  // namespace mlsm
