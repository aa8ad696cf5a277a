#pragma once
// Dense numeric kernels shared by transforms, learners and preconditions.
// All functions accept any Eigen dense expression and are templated on its scalar.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <vector>

#include "kdsynth/errors.hpp"

namespace kdsynth::ml {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using RowVectorX = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

inline constexpr double kConstantTolerance = 1e-12;

// Population standard deviation of each column.
template <typename Derived>
RowVectorX<typename Derived::Scalar> column_stddev(const Eigen::MatrixBase<Derived>& X) {
    using Scalar = typename Derived::Scalar;
    if (X.rows() == 0) return RowVectorX<Scalar>::Zero(X.cols());
    RowVectorX<Scalar> mean = X.colwise().mean();
    return ((X.rowwise() - mean).array().square().colwise().sum() / Scalar(X.rows())).sqrt();
}

// Zero mean, unit variance per column; constant columns are only centred.
template <typename Derived>
MatrixX<typename Derived::Scalar> standardize_columns(const Eigen::MatrixBase<Derived>& X) {
    using Scalar = typename Derived::Scalar;
    RowVectorX<Scalar> mean = X.colwise().mean();
    RowVectorX<Scalar> sd = column_stddev(X);
    for (Eigen::Index j = 0; j < sd.size(); ++j)
        if (sd(j) <= Scalar(kConstantTolerance)) sd(j) = Scalar(1);
    return (X.rowwise() - mean).array().rowwise() / sd.array();
}

// Columns whose spread is below tolerance.
template <typename Derived>
std::vector<Eigen::Index> constant_columns(const Eigen::MatrixBase<Derived>& X) {
    std::vector<Eigen::Index> out;
    auto sd = column_stddev(X);
    for (Eigen::Index j = 0; j < sd.size(); ++j)
        if (!(sd(j) > kConstantTolerance)) out.push_back(j);
    return out;
}

// Fits two-class LDA (pooled within-class covariance, ridge 1e-6 * trace)
// and returns the accuracy of its decision rule on the same rows.
template <typename Derived>
double lda_training_accuracy(const Eigen::MatrixBase<Derived>& X,
                             const Eigen::Ref<const Eigen::VectorXi>& y) {
    using Scalar = typename Derived::Scalar;
    const Eigen::Index n = X.rows(), d = X.cols();
    if (y.size() != n) throw Error("label count does not match row count");
    if (d < 1) throw DegenerateData("LDA needs at least one feature");
    Eigen::Index n1 = (y.array() == 1).count();
    Eigen::Index n0 = n - n1;
    if (n0 == 0 || n1 == 0) throw SingleClass("LDA needs both classes present");

    RowVectorX<Scalar> mu0 = RowVectorX<Scalar>::Zero(d), mu1 = RowVectorX<Scalar>::Zero(d);
    for (Eigen::Index i = 0; i < n; ++i) (y(i) == 1 ? mu1 : mu0) += X.row(i);
    mu0 /= Scalar(n0);
    mu1 /= Scalar(n1);

    MatrixX<Scalar> centered(n, d);
    for (Eigen::Index i = 0; i < n; ++i) centered.row(i) = X.row(i) - (y(i) == 1 ? mu1 : mu0);
    MatrixX<Scalar> S = centered.transpose() * centered / Scalar(std::max<Eigen::Index>(n - 2, 1));
    Scalar tr = S.trace();
    if (!(tr > Scalar(0))) throw DegenerateData("all features have zero within-class variance");
    S.diagonal().array() += Scalar(1e-6) * tr;

    VectorX<Scalar> w = S.ldlt().solve((mu1 - mu0).transpose());
    Scalar bias = -Scalar(0.5) * (mu0 + mu1).dot(w.transpose()) +
                  std::log(Scalar(n1) / Scalar(n0));
    VectorX<Scalar> score = X * w;
    Eigen::Index correct = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
        int pred = score(i) + bias > Scalar(0) ? 1 : 0;
        if (pred == y(i)) ++correct;
    }
    return double(correct) / double(n);
}

template <typename Scalar>
struct PcaModel {
    RowVectorX<Scalar> mean;
    MatrixX<Scalar> components; // d x k, columns ordered by decreasing variance
    VectorX<Scalar> variances;  // k
};

// Sign convention: the largest-magnitude entry of each eigenvector is positive.
template <typename Derived>
void normalize_signs(Eigen::MatrixBase<Derived>& vectors) {
    for (Eigen::Index j = 0; j < vectors.cols(); ++j) {
        Eigen::Index arg = 0;
        vectors.col(j).cwiseAbs().maxCoeff(&arg);
        if (vectors(arg, j) < 0) vectors.col(j) *= -1;
    }
}

template <typename Derived>
PcaModel<typename Derived::Scalar> pca_fit(const Eigen::MatrixBase<Derived>& X,
                                           Eigen::Index components) {
    using Scalar = typename Derived::Scalar;
    if (X.rows() < 2) throw EmptyData("PCA needs at least two rows");
    components = std::min(components, X.cols());
    PcaModel<Scalar> model;
    model.mean = X.colwise().mean();
    MatrixX<Scalar> centered = X.rowwise() - model.mean;
    MatrixX<Scalar> cov = centered.transpose() * centered / Scalar(X.rows() - 1);
    Eigen::SelfAdjointEigenSolver<MatrixX<Scalar>> eig(cov);
    if (eig.info() != Eigen::Success) throw EigenFailure("covariance eigendecomposition failed");
    const Eigen::Index d = X.cols();
    model.components.resize(d, components);
    model.variances.resize(components);
    for (Eigen::Index j = 0; j < components; ++j) {
        model.components.col(j) = eig.eigenvectors().col(d - 1 - j);
        model.variances(j) = std::max(Scalar(0), eig.eigenvalues()(d - 1 - j));
    }
    normalize_signs(model.components);
    return model;
}

template <typename Scalar, typename Derived>
MatrixX<Scalar> pca_transform(const PcaModel<Scalar>& model, const Eigen::MatrixBase<Derived>& X) {
    return (X.rowwise() - model.mean) * model.components;
}

// exp(-gamma * |a_i - b_j|^2) for every row pair.
template <typename DerivedA, typename DerivedB>
MatrixX<typename DerivedA::Scalar> rbf_kernel(const Eigen::MatrixBase<DerivedA>& A,
                                              const Eigen::MatrixBase<DerivedB>& B,
                                              typename DerivedA::Scalar gamma) {
    using Scalar = typename DerivedA::Scalar;
    VectorX<Scalar> a2 = A.rowwise().squaredNorm();
    VectorX<Scalar> b2 = B.rowwise().squaredNorm();
    MatrixX<Scalar> d2 = (-Scalar(2) * (A * B.transpose())).colwise() + a2;
    d2.rowwise() += b2.transpose();
    return (-gamma * d2.array().max(Scalar(0))).exp().matrix();
}

// Centred RBF kernel PCA; returns n x min(components, rank) projections.
template <typename Derived>
MatrixX<typename Derived::Scalar> kernel_pca(const Eigen::MatrixBase<Derived>& X,
                                             Eigen::Index components,
                                             typename Derived::Scalar gamma) {
    using Scalar = typename Derived::Scalar;
    const Eigen::Index n = X.rows();
    if (n < 2) throw EmptyData("kernel PCA needs at least two rows");
    MatrixX<Scalar> K = rbf_kernel(X, X, gamma);
    VectorX<Scalar> row_mean = K.rowwise().mean();
    Scalar all_mean = row_mean.mean();
    K.colwise() -= row_mean;
    K.rowwise() -= row_mean.transpose();
    K.array() += all_mean;

    Eigen::SelfAdjointEigenSolver<MatrixX<Scalar>> eig(K);
    if (eig.info() != Eigen::Success) throw EigenFailure("kernel eigendecomposition did not converge");
    const auto& values = eig.eigenvalues();
    Scalar top = std::max(Scalar(1), values(n - 1));
    Eigen::Index rank = 0;
    for (Eigen::Index j = n - 1; j >= 0 && values(j) > Scalar(1e-10) * top; --j) ++rank;
    Eigen::Index k = std::min(components, rank);
    if (k == 0) throw EigenFailure("centred kernel matrix is degenerate (rank 0)");
    MatrixX<Scalar> vectors(n, k);
    for (Eigen::Index j = 0; j < k; ++j) vectors.col(j) = eig.eigenvectors().col(n - 1 - j);
    normalize_signs(vectors);
    for (Eigen::Index j = 0; j < k; ++j) vectors.col(j) *= std::sqrt(values(n - 1 - j));
    return vectors;
}

template <typename Scalar>
Scalar sigmoid(Scalar z) {
    if (z >= 0) return Scalar(1) / (Scalar(1) + std::exp(-z));
    Scalar e = std::exp(z);
    return e / (Scalar(1) + e);
}

// Mean logistic loss plus 0.5 * l2 * |w|^2; writes the gradient.
template <typename DerivedX>
typename DerivedX::Scalar logistic_objective(const Eigen::MatrixBase<DerivedX>& X,
                                             const Eigen::Ref<const Eigen::VectorXi>& y,
                                             const VectorX<typename DerivedX::Scalar>& w,
                                             typename DerivedX::Scalar b,
                                             typename DerivedX::Scalar l2,
                                             VectorX<typename DerivedX::Scalar>& grad_w,
                                             typename DerivedX::Scalar& grad_b) {
    using Scalar = typename DerivedX::Scalar;
    const Eigen::Index n = X.rows();
    VectorX<Scalar> z = (X * w).array() + b;
    VectorX<Scalar> residual(n);
    Scalar loss = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
        // log(1 + exp(z)) - y z, computed stably
        Scalar zi = z(i);
        Scalar softplus = zi > 0 ? zi + std::log1p(std::exp(-zi)) : std::log1p(std::exp(zi));
        loss += softplus - Scalar(y(i)) * zi;
        residual(i) = sigmoid(zi) - Scalar(y(i));
    }
    loss /= Scalar(n);
    grad_w = X.transpose() * residual / Scalar(n) + l2 * w;
    grad_b = residual.sum() / Scalar(n);
    return loss + Scalar(0.5) * l2 * w.squaredNorm();
}

// Mean negative Bernoulli log-likelihood with probabilities clipped to [eps, 1 - eps].
template <typename DerivedP>
double log_loss(const Eigen::MatrixBase<DerivedP>& p, const Eigen::Ref<const Eigen::VectorXi>& y,
                double eps = 1e-12) {
    if (p.size() != y.size() || p.size() == 0) throw Error("log_loss: size mismatch or empty input");
    double total = 0;
    for (Eigen::Index i = 0; i < p.size(); ++i) {
        double q = std::clamp(double(p(i)), eps, 1.0 - eps);
        total += y(i) == 1 ? std::log(q) : std::log(1.0 - q);
    }
    return -total / double(p.size());
}

template <typename DerivedP>
double accuracy_at_half(const Eigen::MatrixBase<DerivedP>& p,
                        const Eigen::Ref<const Eigen::VectorXi>& y) {
    Eigen::Index correct = 0;
    for (Eigen::Index i = 0; i < p.size(); ++i)
        if ((p(i) >= 0.5 ? 1 : 0) == y(i)) ++correct;
    return p.size() ? double(correct) / double(p.size()) : 0.0;
}

} // namespace kdsynth::ml
