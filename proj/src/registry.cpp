#include "kdsynth/registry.hpp"

#include "kdsynth/constraint_solver.hpp"
#include "kdsynth/errors.hpp"
#include "kdsynth/feature_synthesis.hpp"
#include "kdsynth/ml/linalg.hpp"
#include "kdsynth/ml/transforms.hpp"
#include "kdsynth/trace.hpp"

namespace kdsynth {

void Registry::add_operation(std::string key, OperationFn fn) { operations_.insert_or_assign(std::move(key), std::move(fn)); }
void Registry::add_predicate(std::string key, PredicateFn fn) { predicates_.insert_or_assign(std::move(key), std::move(fn)); }

const OperationFn& Registry::operation(std::string_view key) const {
    auto it = operations_.find(key);
    if (it == operations_.end()) throw UnknownOperation("no operation registered as '" + std::string(key) + "'");
    return it->second;
}

const PredicateFn& Registry::predicate(std::string_view key) const {
    auto it = predicates_.find(key);
    if (it == predicates_.end()) throw UnknownPredicate("no predicate registered as '" + std::string(key) + "'");
    return it->second;
}

bool Registry::has_operation(std::string_view key) const { return operations_.find(key) != operations_.end(); }
bool Registry::has_predicate(std::string_view key) const { return predicates_.find(key) != predicates_.end(); }

ImplCatalog Registry::catalog() const {
    ImplCatalog c;
    for (const auto& [k, fn] : operations_) c.operations.insert(k);
    for (const auto& [k, fn] : predicates_) c.predicates.insert(k);
    return c;
}

ImplCatalog pipeline_catalog() { return builtin_registry().catalog(); }

namespace {

const Dataset& input_of(const Pipeline& p, const KnowledgeNode& node) {
    if (!p.cached_output) throw MissingContext("'" + node.id + "' has no input data");
    return *p.cached_output;
}

void set_output(Pipeline& p, Dataset ds) { p.cached_output = std::make_shared<const Dataset>(std::move(ds)); }

const Dataset& data_for(const PredicateContext& c) {
    if (!c.data.data_output)
        throw MissingContext("precondition '" + c.precondition.id + "' needs the cached data output");
    return *c.data.data_output;
}

const Pipeline& pipeline_for(const PredicateContext& c) {
    if (!c.data.pipeline) throw MissingContext("precondition '" + c.precondition.id + "' needs the partial pipeline");
    return *c.data.pipeline;
}

std::string required_param(const KnowledgeNode& n, std::string_view key) {
    auto v = n.param_string(key, "");
    if (v.empty()) throw Error("node '" + n.id + "' lacks parameter '" + std::string(key) + "'");
    return v;
}

Split holdout_for(const Pipeline& p, const Dataset& ds, std::uint64_t master) {
    for (std::size_t i = 0; i < p.ops.size(); ++i) {
        if (p.ops[i].impl != "split_holdout") continue;
        double fraction = 0.5;
        if (auto it = p.ops[i].params.find("fraction"); it != p.ops[i].params.end()) {
            if (auto d = std::get_if<double>(&it->second)) fraction = *d;
            else if (auto n = std::get_if<std::int64_t>(&it->second)) fraction = double(*n);
        }
        return stratified_holdout(ds.y, fraction, derive_seed(master, pipeline_id(p.ops, i + 1)));
    }
    throw NoSplit("pipeline has no evaluation-method selection before training");
}

std::vector<FeatureTemplate> parse_types(const std::string& text) {
    std::vector<FeatureTemplate> out;
    for (const auto& name : split_list(text, ',')) {
        auto t = parse_feature_template(name);
        if (!t) throw Error("unknown feature type '" + name + "'");
        out.push_back(*t);
    }
    return out;
}

void train_model(const ExecContext& ctx, Pipeline& p) {
    const auto& node = ctx.node;
    Dataset ds = input_of(p, node);
    ds.split = holdout_for(p, ds, ctx.master_seed);

    ml::TrainSettings settings;
    auto kind = ml::parse_model_kind(required_param(node, "kind"));
    if (!kind) throw Error("node '" + node.id + "': unknown model kind");
    settings.kind = *kind;
    settings.hard_output = node.param_string("output", "probability") == "label";
    settings.seed = ctx.seed;
    for (const auto& [k, v] : node.params) {
        if (auto d = std::get_if<double>(&v)) settings.fixed[k] = *d;
        else if (auto n = std::get_if<std::int64_t>(&v)) settings.fixed[k] = double(*n);
    }
    for (const auto& [k, grid] : node.hyperparams) settings.grid[k] = grid;

    Dataset train_rows = ds.select_rows(ds.split->train);
    if (!ml::constant_columns(train_rows.X).empty()) p.flags.insert("constant_feature");

    auto result = ml::train(ds, settings);
    if (!result.model.converged) p.flags.insert("nonconvergence");

    ml::Hyperparams chosen;
    for (const auto& [k, grid] : settings.grid) chosen[k] = result.model.hyperparams.at(k);
    p.ops.back().hyperparams = chosen;
    if (ctx.trace && !settings.grid.empty()) {
        Fields f{{"pipe", p.id}, {"node", node.id}};
        for (const auto& [k, v] : chosen) f.emplace_back("hp." + k, format_exact(v));
        for (const auto& t : result.trials)
            if (t.params == result.model.hyperparams) {
                f.emplace_back("val_logloss", format_exact(t.validation_logloss));
                break;
            }
        f.emplace_back("trials", std::to_string(result.trials.size()));
        ctx.trace->emit(EventKind::Hpo, std::move(f));
    }
    p.model = std::make_shared<const ml::TrainedModel>(std::move(result.model));
    set_output(p, std::move(ds));
}

Registry make_builtin() {
    Registry r;

    r.add_operation("load_data", [](const ExecContext& ctx, Pipeline& p) {
        if (!ctx.source) throw MissingContext("no dataset supplied to '" + ctx.node.id + "'");
        check_dataset(*ctx.source);
        if (ctx.source->rows() == 0) throw EmptyData("dataset has no rows");
        Dataset ds = *ctx.source;
        ds.split.reset();
        set_output(p, std::move(ds));
    });
    r.add_operation("standardize", [](const ExecContext& ctx, Pipeline& p) {
        set_output(p, transforms::standardize(input_of(p, ctx.node)));
    });
    r.add_operation("nop", [](const ExecContext& ctx, Pipeline& p) { input_of(p, ctx.node); });
    r.add_operation("split_holdout", [](const ExecContext&, Pipeline&) {});
    r.add_operation("select_model", [](const ExecContext&, Pipeline&) {});
    r.add_operation("feature_kernel", [](const ExecContext& ctx, Pipeline& p) {
        const auto& n = ctx.node;
        set_output(p, transforms::feature_kernel(input_of(p, n), static_cast<int>(n.param_int("landmarks", 10)),
                                                 n.param_double("gamma", 1.0), ctx.seed));
    });
    r.add_operation("feature_product", [](const ExecContext& ctx, Pipeline& p) {
        set_output(p, transforms::feature_product(input_of(p, ctx.node)));
    });
    r.add_operation("random_feature_subsets", [](const ExecContext& ctx, Pipeline& p) {
        const auto& n = ctx.node;
        auto subsets = transforms::random_feature_subsets(input_of(p, n), static_cast<int>(n.param_int("n_subsets", 2)),
                                                          static_cast<int>(n.param_int("size", 2)), ctx.seed);
        auto index = n.param_int("index", 0);
        if (index < 0 || index >= static_cast<std::int64_t>(subsets.size()))
            throw Error("node '" + n.id + "': subset index out of range");
        set_output(p, std::move(subsets[static_cast<std::size_t>(index)]));
    });
    r.add_operation("pca", [](const ExecContext& ctx, Pipeline& p) {
        set_output(p, transforms::pca(input_of(p, ctx.node), static_cast<int>(ctx.node.param_int("components", 3))));
    });
    r.add_operation("kernel_pca", [](const ExecContext& ctx, Pipeline& p) {
        const auto& n = ctx.node;
        set_output(p, transforms::kernel_pca(input_of(p, n), static_cast<int>(n.param_int("components", 2)),
                                             n.param_double("gamma", 1.0)));
    });
    r.add_operation("dfs_op", [](const ExecContext& ctx, Pipeline& p) {
        const auto& n = ctx.node;
        const Dataset& in = input_of(p, n);
        if (!ctx.features) throw MissingContext("'" + n.id + "' needs a feature knowledge base");
        auto types = parse_types(n.param_string("types", "Identity,Entity"));
        auto features = dfs(single_table(in), *ctx.features, types, static_cast<int>(n.param_int("depth", 1)),
                            ctx.compute_feature_values);
        if (!ctx.compute_feature_values) {
            p.cached_output.reset();
            throw MissingContext("feature values were not computed");
        }
        Dataset out;
        out.X = features.matrix();
        out.y = in.y;
        out.columns = features.names();
        out.split = in.split;
        if (!ml::constant_columns(out.X).empty()) p.flags.insert("constant_feature");
        set_output(p, std::move(out));
    });
    r.add_operation("train_model", train_model);
    r.add_operation("evaluate", [](const ExecContext& ctx, Pipeline& p) {
        const Dataset& ds = input_of(p, ctx.node);
        if (!p.model) throw MissingContext("'" + ctx.node.id + "' needs a trained model");
        p.metrics = ml::evaluate(*p.model, ds);
    });

    r.add_predicate("lda_separable", [](const PredicateContext& c) {
        return ml::lda_separable(data_for(c), c.precondition.param_double("threshold", 0.95));
    });
    r.add_predicate("lda_not_separable", [](const PredicateContext& c) {
        return !ml::lda_separable(data_for(c), c.precondition.param_double("threshold", 0.95));
    });
    r.add_predicate("model_selected", [](const PredicateContext& c) {
        return pipeline_for(c).contains(required_param(c.precondition, "node"));
    });
    r.add_predicate("pipeline_not_contains", [](const PredicateContext& c) {
        return !pipeline_for(c).contains(required_param(c.precondition, "node"));
    });
    r.add_predicate("prev_op_not", [](const PredicateContext& c) {
        const auto* last = pipeline_for(c).last();
        return !last || last->node != required_param(c.precondition, "node");
    });
    r.add_predicate("n_features_gt", [](const PredicateContext& c) {
        auto n = c.precondition.param_int("n", 0);
        if (c.data.mode == SynthesisMode::FeatureStep) {
            if (!c.data.table_data) throw MissingContext("n_features_gt needs table data");
            return static_cast<std::int64_t>(c.data.table_data->current_table().feature_columns().size()) > n;
        }
        return static_cast<std::int64_t>(data_for(c).cols()) > n;
    });
    return r;
}

} // namespace

const Registry& builtin_registry() {
    static const Registry registry = make_builtin();
    return registry;
}

} // namespace kdsynth
