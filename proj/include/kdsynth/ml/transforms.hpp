#pragma once
// Dataset-level transforms backing the pipeline operation nodes.

#include <cstdint>
#include <vector>

#include "kdsynth/dataset.hpp"

namespace kdsynth::transforms {

Dataset standardize(const Dataset& ds);

// Replaces the features with `landmarks` RBF similarities to seeded random rows.
Dataset feature_kernel(const Dataset& ds, int landmarks, double gamma, std::uint64_t seed);

// Top principal components; TooFewFeatures when d <= 2.
Dataset pca(const Dataset& ds, int components);

// Centred RBF kernel PCA, min(components, rank) output columns.
Dataset kernel_pca(const Dataset& ds, int components, double gamma);

// Appends the row-wise product of all feature columns.
Dataset feature_product(const Dataset& ds);

// `n_subsets` seeded draws of `size` columns without replacement.
std::vector<Dataset> random_feature_subsets(const Dataset& ds, int n_subsets, int size,
                                            std::uint64_t seed);

} // namespace kdsynth::transforms

namespace kdsynth::ml {

bool lda_separable(const Dataset& ds, double threshold);

} // namespace kdsynth::ml
