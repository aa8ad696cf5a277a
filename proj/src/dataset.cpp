#include "kdsynth/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include "kdsynth/errors.hpp"

namespace kdsynth {

Dataset Dataset::select_rows(const std::vector<Eigen::Index>& rows) const {
    Dataset out;
    out.columns = columns;
    out.X.resize(static_cast<Eigen::Index>(rows.size()), X.cols());
    out.y.resize(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        out.X.row(static_cast<Eigen::Index>(i)) = X.row(rows[i]);
        out.y(static_cast<Eigen::Index>(i)) = y(rows[i]);
    }
    return out;
}

Dataset Dataset::select_columns(const std::vector<Eigen::Index>& cols) const {
    Dataset out;
    out.y = y;
    out.split = split;
    out.X.resize(X.rows(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t j = 0; j < cols.size(); ++j) {
        out.X.col(static_cast<Eigen::Index>(j)) = X.col(cols[j]);
        out.columns.push_back(columns[static_cast<std::size_t>(cols[j])]);
    }
    return out;
}

void check_dataset(const Dataset& ds) {
    if (ds.y.size() != ds.X.rows()) throw Error("dataset: label count differs from row count");
    if (static_cast<Eigen::Index>(ds.columns.size()) != ds.X.cols())
        throw Error("dataset: column names do not match column count");
    if (!ds.X.allFinite()) throw NonNumeric("dataset contains NaN or infinite values");
    for (Eigen::Index i = 0; i < ds.y.size(); ++i)
        if (ds.y(i) != 0 && ds.y(i) != 1) throw Error("dataset: labels must be 0 or 1");
}

namespace {

std::string trim(std::string s) {
    auto not_space = [](unsigned char c) { return !std::isspace(c); };
    s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
    s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
    return s;
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

std::string format_number(double v) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, end);
}

} // namespace

Dataset parse_dataset_csv(std::istream& in, const std::string& origin) {
    std::string line;
    if (!std::getline(in, line)) throw NonNumeric(origin + ": empty CSV");
    auto header = split_csv(trim(line));
    auto label_it = std::find(header.begin(), header.end(), kLabelColumn);
    if (label_it == header.end()) throw MissingColumn(origin + ": no 'label' column");
    const auto label_idx = static_cast<std::size_t>(label_it - header.begin());

    Dataset ds;
    for (std::size_t j = 0; j < header.size(); ++j)
        if (j != label_idx) ds.columns.push_back(header[j]);

    std::vector<std::vector<double>> rows;
    std::vector<int> labels;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        line = trim(line);
        if (line.empty()) continue;
        auto cells = split_csv(line);
        if (cells.size() != header.size())
            throw NonNumeric(origin + ":" + std::to_string(line_no) + ": expected " +
                             std::to_string(header.size()) + " fields");
        std::vector<double> row;
        for (std::size_t j = 0; j < cells.size(); ++j) {
            char* end = nullptr;
            double v = std::strtod(cells[j].c_str(), &end);
            if (cells[j].empty() || end != cells[j].c_str() + cells[j].size() || !std::isfinite(v))
                throw NonNumeric(origin + ":" + std::to_string(line_no) + ": non-numeric value '" +
                                 cells[j] + "'");
            if (j == label_idx) {
                if (v != 0.0 && v != 1.0)
                    throw NonNumeric(origin + ":" + std::to_string(line_no) + ": label must be 0 or 1");
                labels.push_back(static_cast<int>(v));
            } else {
                row.push_back(v);
            }
        }
        rows.push_back(std::move(row));
    }
    ds.X.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(ds.columns.size()));
    ds.y.resize(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t j = 0; j < rows[i].size(); ++j)
            ds.X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
        ds.y(static_cast<Eigen::Index>(i)) = labels[i];
    }
    return ds;
}

Dataset read_dataset_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open dataset '" + path.string() + "'");
    return parse_dataset_csv(in, path.string());
}

void write_dataset_csv(const Dataset& ds, std::ostream& out) {
    for (const auto& c : ds.columns) out << c << ',';
    out << kLabelColumn << '\n';
    for (Eigen::Index i = 0; i < ds.rows(); ++i) {
        for (Eigen::Index j = 0; j < ds.cols(); ++j) out << format_number(ds.X(i, j)) << ',';
        out << ds.y(i) << '\n';
    }
}

void write_dataset_csv(const Dataset& ds, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    write_dataset_csv(ds, out);
    if (!out) throw IoError("write failed for '" + path.string() + "'");
}

Dataset make_xor_grid() {
    Dataset ds;
    ds.columns = {"x", "y"};
    ds.X.resize(100, 2);
    ds.y.resize(100);
    Eigen::Index i = 0;
    for (int x = -5; x <= 4; ++x) {
        for (int y = -5; y <= 4; ++y) {
            ds.X(i, 0) = x;
            ds.X(i, 1) = y;
            ds.y(i) = (x < 0) == (y < 0) ? 1 : 0;
            ++i;
        }
    }
    return ds;
}

Dataset make_circles(std::uint64_t seed, const CirclesOptions& options) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
    std::normal_distribution<double> noise(0.0, options.noise);
    const Eigen::Index n = 2 * options.per_class;
    Dataset ds;
    ds.columns = {"x", "y"};
    ds.X.resize(n, 2);
    ds.y.resize(n);
    Eigen::Index i = 0;
    for (int label = 0; label < 2; ++label) {
        double radius = label == 0 ? options.inner_radius : options.outer_radius;
        for (int k = 0; k < options.per_class; ++k, ++i) {
            double t = angle(rng);
            double r = radius + noise(rng);
            ds.X(i, 0) = r * std::cos(t);
            ds.X(i, 1) = r * std::sin(t);
            ds.y(i) = label;
        }
    }
    return ds;
}

Split stratified_holdout(const Eigen::VectorXi& y, double test_fraction, std::uint64_t seed) {
    if (!(test_fraction > 0.0 && test_fraction < 1.0))
        throw Error("holdout fraction must be in (0, 1)");
    std::mt19937_64 rng(seed);
    Split split;
    for (int label = 0; label < 2; ++label) {
        std::vector<Eigen::Index> idx;
        for (Eigen::Index i = 0; i < y.size(); ++i)
            if (y(i) == label) idx.push_back(i);
        std::shuffle(idx.begin(), idx.end(), rng);
        auto n_test = static_cast<std::size_t>(std::llround(test_fraction * double(idx.size())));
        split.test.insert(split.test.end(), idx.begin(), idx.begin() + static_cast<long>(n_test));
        split.train.insert(split.train.end(), idx.begin() + static_cast<long>(n_test), idx.end());
    }
    std::sort(split.train.begin(), split.train.end());
    std::sort(split.test.begin(), split.test.end());
    if (split.train.empty() || split.test.empty()) throw NoSplit("holdout produced an empty side");
    return split;
}

} // namespace kdsynth
