#include "kdsynth/ml/transforms.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <string>

#include "kdsynth/errors.hpp"
#include "kdsynth/ml/linalg.hpp"

namespace kdsynth::transforms {

namespace {

std::vector<std::string> numbered(const std::string& prefix, Eigen::Index n) {
    std::vector<std::string> out;
    for (Eigen::Index j = 0; j < n; ++j) out.push_back(prefix + std::to_string(j));
    return out;
}

Dataset with_features(const Dataset& ds, Eigen::MatrixXd X, std::vector<std::string> columns) {
    Dataset out;
    out.X = std::move(X);
    out.y = ds.y;
    out.columns = std::move(columns);
    out.split = ds.split;
    return out;
}

} // namespace

Dataset standardize(const Dataset& ds) {
    return with_features(ds, ml::standardize_columns(ds.X), ds.columns);
}

Dataset feature_kernel(const Dataset& ds, int landmarks, double gamma, std::uint64_t seed) {
    if (ds.rows() == 0 || ds.cols() == 0) throw EmptyData("feature kernel on empty data");
    if (landmarks < 1) throw Error("feature kernel needs at least one landmark");
    std::vector<Eigen::Index> rows(static_cast<std::size_t>(ds.rows()));
    std::iota(rows.begin(), rows.end(), Eigen::Index{0});
    std::mt19937_64 rng(seed);
    std::shuffle(rows.begin(), rows.end(), rng);
    const auto k = std::min<Eigen::Index>(landmarks, ds.rows());
    Eigen::MatrixXd L(k, ds.cols());
    for (Eigen::Index j = 0; j < k; ++j) L.row(j) = ds.X.row(rows[static_cast<std::size_t>(j)]);
    return with_features(ds, ml::rbf_kernel(ds.X, L, gamma), numbered("rbf", k));
}

Dataset pca(const Dataset& ds, int components) {
    if (ds.cols() <= 2)
        throw TooFewFeatures("PCA needs more than 2 features, got " + std::to_string(ds.cols()));
    auto model = ml::pca_fit(ds.X, components);
    Eigen::MatrixXd Z = ml::pca_transform(model, ds.X);
    return with_features(ds, std::move(Z), numbered("pc", model.components.cols()));
}

Dataset kernel_pca(const Dataset& ds, int components, double gamma) {
    Eigen::MatrixXd Z = ml::kernel_pca(ds.X, components, gamma);
    auto names = numbered("kpc", Z.cols());
    return with_features(ds, std::move(Z), std::move(names));
}

Dataset feature_product(const Dataset& ds) {
    if (ds.cols() < 2) throw TooFewFeatures("feature product needs at least 2 features");
    Eigen::MatrixXd X(ds.rows(), ds.cols() + 1);
    X.leftCols(ds.cols()) = ds.X;
    X.col(ds.cols()) = ds.X.rowwise().prod();
    auto names = ds.columns;
    std::string name = "product";
    for (int k = 1; std::find(names.begin(), names.end(), name) != names.end(); ++k)
        name = "product" + std::to_string(k);
    names.push_back(name);
    return with_features(ds, std::move(X), std::move(names));
}

std::vector<Dataset> random_feature_subsets(const Dataset& ds, int n_subsets, int size,
                                            std::uint64_t seed) {
    if (size < 1 || size > ds.cols())
        throw SizeTooLarge("subset size " + std::to_string(size) + " not in [1, " +
                           std::to_string(ds.cols()) + "]");
    std::mt19937_64 rng(seed);
    std::vector<Dataset> out;
    for (int s = 0; s < n_subsets; ++s) {
        std::vector<Eigen::Index> cols(static_cast<std::size_t>(ds.cols()));
        std::iota(cols.begin(), cols.end(), Eigen::Index{0});
        std::shuffle(cols.begin(), cols.end(), rng);
        cols.resize(static_cast<std::size_t>(size));
        std::sort(cols.begin(), cols.end());
        out.push_back(ds.select_columns(cols));
    }
    return out;
}

} // namespace kdsynth::transforms

namespace kdsynth::ml {

bool lda_separable(const Dataset& ds, double threshold) {
    return lda_training_accuracy(ds.X, ds.y) >= threshold;
}

} // namespace kdsynth::ml
