#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace kdsynth {

inline constexpr const char* kLabelColumn = "label";

struct Split {
    std::vector<Eigen::Index> train;
    std::vector<Eigen::Index> test;
};

// Binary classification data: X is n x d, y in {0,1}.
struct Dataset {
    Eigen::MatrixXd X;
    Eigen::VectorXi y;
    std::vector<std::string> columns;
    std::optional<Split> split;

    Eigen::Index rows() const { return X.rows(); }
    Eigen::Index cols() const { return X.cols(); }

    Dataset select_rows(const std::vector<Eigen::Index>& rows) const;
    Dataset select_columns(const std::vector<Eigen::Index>& cols) const;
};

// Throws unless |y| == n, labels are binary, names match columns and no NaN is present.
void check_dataset(const Dataset& ds);

// CSV with a header row; the `label` column holds the class and is written last.
Dataset read_dataset_csv(const std::filesystem::path& path);
Dataset parse_dataset_csv(std::istream& in, const std::string& origin = "<csv>");
void write_dataset_csv(const Dataset& ds, std::ostream& out);
void write_dataset_csv(const Dataset& ds, const std::filesystem::path& path);

// The 10x10 integer grid x, y in [-5, 4]; label 1 when both coordinates
// share the same sign (zero counted as non-negative).
Dataset make_xor_grid();

struct CirclesOptions {
    double inner_radius = 0.5;
    double outer_radius = 2.5;
    double noise = 0.15;
    int per_class = 500;
};

// Two concentric noisy rings: inner ring label 0, outer ring label 1.
Dataset make_circles(std::uint64_t seed, const CirclesOptions& options = {});

// Stratified holdout: `test_fraction` of each class goes to the test set.
Split stratified_holdout(const Eigen::VectorXi& y, double test_fraction, std::uint64_t seed);

} // namespace kdsynth
