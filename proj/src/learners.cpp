#include "kdsynth/ml/learners.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "kdsynth/errors.hpp"
#include "kdsynth/ml/linalg.hpp"

namespace kdsynth::ml {

std::string_view to_string(ModelKind kind) {
    switch (kind) {
    case ModelKind::Linear: return "linear";
    case ModelKind::Rbf: return "rbf";
    case ModelKind::BoostedStumps: return "boosted_stumps";
    }
    return "?";
}

std::optional<ModelKind> parse_model_kind(std::string_view name) {
    if (name == "linear") return ModelKind::Linear;
    if (name == "rbf") return ModelKind::Rbf;
    if (name == "boosted_stumps") return ModelKind::BoostedStumps;
    return std::nullopt;
}

double Tree::predict(const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
    int i = 0;
    while (nodes[static_cast<std::size_t>(i)].feature >= 0) {
        const auto& n = nodes[static_cast<std::size_t>(i)];
        i = x(n.feature) <= n.threshold ? n.left : n.right;
    }
    return nodes[static_cast<std::size_t>(i)].value;
}

namespace {

double get(const Hyperparams& hp, const std::string& key, double fallback) {
    auto it = hp.find(key);
    return it == hp.end() ? fallback : it->second;
}

struct LogisticFit {
    Eigen::VectorXd w;
    double b = 0;
    bool converged = false;
};

// Gradient descent with Armijo backtracking and step growth on success.
LogisticFit fit_logistic(const Eigen::MatrixXd& X, const Eigen::VectorXi& y, double l2,
                         int max_iter, double tol) {
    LogisticFit fit;
    fit.w = Eigen::VectorXd::Zero(X.cols());
    Eigen::VectorXd g;
    double gb = 0;
    double loss = logistic_objective(X, y, fit.w, fit.b, l2, g, gb);
    double step = 1.0;
    for (int it = 0; it < max_iter; ++it) {
        double gnorm2 = g.squaredNorm() + gb * gb;
        if (std::sqrt(gnorm2) < tol) {
            fit.converged = true;
            break;
        }
        bool accepted = false;
        while (step > 1e-12) {
            Eigen::VectorXd w_new = fit.w - step * g;
            double b_new = fit.b - step * gb;
            Eigen::VectorXd g_new;
            double gb_new = 0;
            double loss_new = logistic_objective(X, y, w_new, b_new, l2, g_new, gb_new);
            if (loss_new <= loss - 0.5 * step * gnorm2) {
                fit.w = std::move(w_new);
                fit.b = b_new;
                g = std::move(g_new);
                gb = gb_new;
                loss = loss_new;
                step = std::min(step * 2.0, 1e4);
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) {
            fit.converged = std::sqrt(gnorm2) < 1e3 * tol;
            break;
        }
    }
    return fit;
}

Eigen::MatrixXd apply_scaling(const TrainedModel& m, const Eigen::MatrixXd& X) {
    return (X.rowwise() - m.mean).array().rowwise() / m.scale.array();
}

// Exact greedy regression tree on gradient/hessian statistics.
class TreeBuilder {
public:
    TreeBuilder(const Eigen::MatrixXd& X, const std::vector<std::vector<Eigen::Index>>& order,
                const Eigen::VectorXd& g, const Eigen::VectorXd& h, int max_depth, double lambda)
        : X_(X), order_(order), g_(g), h_(h), max_depth_(max_depth), lambda_(lambda) {}

    Tree build() {
        std::vector<char> member(static_cast<std::size_t>(X_.rows()), 1);
        grow(member, 0);
        return std::move(tree_);
    }

private:
    int grow(const std::vector<char>& member, int depth) {
        double G = 0, H = 0;
        for (Eigen::Index i = 0; i < X_.rows(); ++i)
            if (member[static_cast<std::size_t>(i)]) {
                G += g_(i);
                H += h_(i);
            }
        int index = static_cast<int>(tree_.nodes.size());
        tree_.nodes.push_back(TreeNode{-1, 0, -1, -1, -G / (H + lambda_)});
        if (depth >= max_depth_) return index;

        double parent = G * G / (H + lambda_);
        double best_gain = 1e-12;
        int best_feature = -1;
        double best_threshold = 0;
        for (Eigen::Index j = 0; j < X_.cols(); ++j) {
            double GL = 0, HL = 0;
            const auto& ord = order_[static_cast<std::size_t>(j)];
            Eigen::Index prev = -1;
            for (Eigen::Index i : ord) {
                if (!member[static_cast<std::size_t>(i)]) continue;
                if (prev >= 0 && X_(i, j) > X_(prev, j)) {
                    double GR = G - GL, HR = H - HL;
                    if (HL > 1e-6 && HR > 1e-6) {
                        double gain = GL * GL / (HL + lambda_) + GR * GR / (HR + lambda_) - parent;
                        if (gain > best_gain) {
                            best_gain = gain;
                            best_feature = static_cast<int>(j);
                            best_threshold = 0.5 * (X_(prev, j) + X_(i, j));
                        }
                    }
                }
                GL += g_(i);
                HL += h_(i);
                prev = i;
            }
        }
        if (best_feature < 0) return index;

        std::vector<char> left(member.size(), 0), right(member.size(), 0);
        for (std::size_t i = 0; i < member.size(); ++i) {
            if (!member[i]) continue;
            (X_(static_cast<Eigen::Index>(i), best_feature) <= best_threshold ? left : right)[i] = 1;
        }
        int l = grow(left, depth + 1);
        int r = grow(right, depth + 1);
        auto& node = tree_.nodes[static_cast<std::size_t>(index)];
        node.feature = best_feature;
        node.threshold = best_threshold;
        node.left = l;
        node.right = r;
        return index;
    }

    const Eigen::MatrixXd& X_;
    const std::vector<std::vector<Eigen::Index>>& order_;
    const Eigen::VectorXd& g_;
    const Eigen::VectorXd& h_;
    int max_depth_;
    double lambda_;
    Tree tree_;
};

Eigen::VectorXd raw_scores(const TrainedModel& m, const Eigen::MatrixXd& X) {
    switch (m.kind) {
    case ModelKind::Linear:
        return (apply_scaling(m, X) * m.weights).array() + m.bias;
    case ModelKind::Rbf: {
        Eigen::MatrixXd phi = rbf_kernel(apply_scaling(m, X), m.landmarks, m.gamma);
        return (phi * m.weights).array() + m.bias;
    }
    case ModelKind::BoostedStumps: {
        Eigen::VectorXd f = Eigen::VectorXd::Constant(X.rows(), m.base_score);
        for (const auto& t : m.trees)
            for (Eigen::Index i = 0; i < X.rows(); ++i) f(i) += m.learning_rate * t.predict(X.row(i));
        return f;
    }
    }
    return {};
}

std::vector<Hyperparams> expand_grid(const Grid& grid, const Hyperparams& fixed) {
    std::vector<Hyperparams> out{fixed};
    for (const auto& [key, values] : grid) {
        std::vector<Hyperparams> next;
        for (const auto& base : out)
            for (double v : values) {
                Hyperparams h = base;
                h[key] = v;
                next.push_back(std::move(h));
            }
        out = std::move(next);
    }
    return out;
}

} // namespace

TrainedModel fit(const Eigen::MatrixXd& X, const Eigen::VectorXi& y, ModelKind kind,
                 const Hyperparams& hyperparams, bool hard_output, std::uint64_t seed) {
    if (X.rows() == 0) throw EmptyData("cannot fit on zero rows");
    TrainedModel m;
    m.kind = kind;
    m.hyperparams = hyperparams;
    m.hard_output = hard_output;
    m.mean = X.colwise().mean();
    m.scale = column_stddev(X);
    for (Eigen::Index j = 0; j < m.scale.size(); ++j)
        if (m.scale(j) <= kConstantTolerance) m.scale(j) = 1.0;
    const double n = double(X.rows());

    switch (kind) {
    case ModelKind::Linear: {
        double C = get(hyperparams, "C", 1.0);
        auto lf = fit_logistic(apply_scaling(m, X), y, 1.0 / (C * n),
                               static_cast<int>(get(hyperparams, "max_iter", 1000)), 1e-6);
        m.weights = std::move(lf.w);
        m.bias = lf.b;
        m.converged = lf.converged;
        break;
    }
    case ModelKind::Rbf: {
        double C = get(hyperparams, "C", 1.0);
        m.gamma = get(hyperparams, "gamma", 1.0);
        auto count = std::min<Eigen::Index>(
            static_cast<Eigen::Index>(get(hyperparams, "landmarks", 100)), X.rows());
        std::vector<Eigen::Index> rows(static_cast<std::size_t>(X.rows()));
        std::iota(rows.begin(), rows.end(), Eigen::Index{0});
        std::mt19937_64 rng(seed);
        std::shuffle(rows.begin(), rows.end(), rng);
        Eigen::MatrixXd Xs = apply_scaling(m, X);
        m.landmarks.resize(count, X.cols());
        for (Eigen::Index k = 0; k < count; ++k) m.landmarks.row(k) = Xs.row(rows[static_cast<std::size_t>(k)]);
        Eigen::MatrixXd phi = rbf_kernel(Xs, m.landmarks, m.gamma);
        auto lf = fit_logistic(phi, y, 1.0 / (C * n),
                               static_cast<int>(get(hyperparams, "max_iter", 500)), 1e-5);
        m.weights = std::move(lf.w);
        m.bias = lf.b;
        m.converged = lf.converged;
        break;
    }
    case ModelKind::BoostedStumps: {
        const int rounds = static_cast<int>(get(hyperparams, "n_rounds", 50));
        const int depth = static_cast<int>(get(hyperparams, "max_depth", 2));
        const double lambda = get(hyperparams, "lambda", 1.0);
        m.learning_rate = get(hyperparams, "learning_rate", 0.3);
        double prior = std::clamp(double(y.sum()) / n, 1e-6, 1.0 - 1e-6);
        m.base_score = std::log(prior / (1.0 - prior));
        std::vector<std::vector<Eigen::Index>> order(static_cast<std::size_t>(X.cols()));
        for (Eigen::Index j = 0; j < X.cols(); ++j) {
            auto& ord = order[static_cast<std::size_t>(j)];
            ord.resize(static_cast<std::size_t>(X.rows()));
            std::iota(ord.begin(), ord.end(), Eigen::Index{0});
            std::stable_sort(ord.begin(), ord.end(),
                             [&](Eigen::Index a, Eigen::Index b) { return X(a, j) < X(b, j); });
        }
        Eigen::VectorXd F = Eigen::VectorXd::Constant(X.rows(), m.base_score);
        Eigen::VectorXd g(X.rows()), h(X.rows());
        for (int r = 0; r < rounds; ++r) {
            for (Eigen::Index i = 0; i < X.rows(); ++i) {
                double p = sigmoid(F(i));
                g(i) = p - y(i);
                h(i) = std::max(p * (1 - p), 1e-12);
            }
            Tree t = TreeBuilder(X, order, g, h, depth, lambda).build();
            for (Eigen::Index i = 0; i < X.rows(); ++i) F(i) += m.learning_rate * t.predict(X.row(i));
            m.trees.push_back(std::move(t));
        }
        break;
    }
    }
    return m;
}

Eigen::VectorXd predict_proba(const TrainedModel& model, const Eigen::MatrixXd& X) {
    Eigen::VectorXd s = raw_scores(model, X);
    Eigen::VectorXd p(s.size());
    for (Eigen::Index i = 0; i < s.size(); ++i) {
        double q = model.hard_output ? (s(i) > 0 ? 1.0 : 0.0) : sigmoid(s(i));
        p(i) = std::clamp(q, kProbabilityClip, 1.0 - kProbabilityClip);
    }
    return p;
}

TrainResult train(const Dataset& ds, const TrainSettings& settings) {
    if (!ds.split) throw NoSplit("training requires a train/test split");
    Dataset train_part = ds.select_rows(ds.split->train);
    TrainResult result;
    Hyperparams chosen = settings.fixed;
    if (!settings.grid.empty()) {
        Split inner = stratified_holdout(train_part.y, 0.25, settings.seed ^ 0x9e3779b97f4a7c15ULL);
        Dataset fit_part = train_part.select_rows(inner.train);
        Dataset val_part = train_part.select_rows(inner.test);
        double best = std::numeric_limits<double>::infinity();
        for (auto& candidate : expand_grid(settings.grid, settings.fixed)) {
            TrainedModel m = fit(fit_part.X, fit_part.y, settings.kind, candidate,
                                 settings.hard_output, settings.seed);
            double score = log_loss(predict_proba(m, val_part.X), val_part.y);
            if (score < best) {
                best = score;
                chosen = candidate;
            }
            result.trials.push_back(GridTrial{std::move(candidate), score});
        }
    }
    result.model = fit(train_part.X, train_part.y, settings.kind, chosen, settings.hard_output,
                       settings.seed);
    return result;
}

Metrics evaluate(const TrainedModel& model, const Dataset& ds) {
    if (!ds.split) throw NoSplit("evaluation requires a train/test split");
    Dataset test = ds.select_rows(ds.split->test);
    Eigen::VectorXd p = predict_proba(model, test.X);
    return Metrics{log_loss(p, test.y), accuracy_at_half(p, test.y)};
}

} // namespace kdsynth::ml
