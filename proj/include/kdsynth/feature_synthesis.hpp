#pragma once
// Deep feature synthesis over (linked) tables using the four AST templates:
//   identity  g_s(t, i)
//   entity    r_s(g_s(t, i), r_t(f_t(c_t, g_t(t, i))))
//   direct    g_t(parent, idx(keys, c_t(keys)))           via child -> parent link
//   reverse   r_s(g_s(t, i), r_t(g_t(child, idx(fk, c_t(fk)))))  via parent <- child link

#include <Eigen/Dense>

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "kdsynth/constraint_solver.hpp"
#include "kdsynth/dataset.hpp"

namespace kdsynth {

struct Table {
    std::string name;
    std::vector<std::string> columns;
    Eigen::MatrixXd values; // rows x columns
    std::vector<std::string> keys; // key / foreign-key columns, not feature inputs

    Eigen::Index rows() const { return values.rows(); }
    std::optional<Eigen::Index> column_index(std::string_view column) const;
    const Eigen::MatrixXd::ConstColXpr column(std::string_view column) const;
    bool is_key(std::string_view column) const;
    // Columns usable as feature inputs: not keys and not the label.
    std::vector<std::string> feature_columns() const;
};

struct TableLink {
    std::string child;
    std::string foreign_key; // column of child
    std::string parent;
    std::string parent_key;  // column of parent
};

struct TableData {
    std::map<std::string, Table, std::less<>> tables;
    std::vector<TableLink> links;
    std::string current;

    const Table& table(std::string_view name) const;
    const Table& current_table() const { return table(current); }
};

// Throws MissingColumn / MissingLink on dangling references and Error on link cycles.
void check_tables(const TableData& td);

TableData single_table(const Dataset& ds, std::string name = "data");
Table read_table_csv(const std::filesystem::path& path, std::string name,
                     std::vector<std::string> keys = {});

enum class FeatureTemplate { Identity, Entity, Direct, Reverse };

std::string_view to_string(FeatureTemplate t);
std::optional<FeatureTemplate> parse_feature_template(std::string_view name);
// Slot names of a template in tree order.
const std::vector<std::string>& template_slots(FeatureTemplate t);

using Mask = std::vector<bool>;
using Indices = std::vector<Eigen::Index>;

struct ComponentFn {
    std::string name;
    std::string role; // g_s, g_t, r_s, r_t, f_t, idx, c_t
    std::function<double(const Eigen::VectorXd&, Eigen::Index)> get_scalar;             // g_s
    std::function<Eigen::VectorXd(const Eigen::MatrixXd&, const Indices&)> get_tensor;   // g_t
    std::function<double(double, double)> reduce_scalar;                                 // r_s
    std::function<double(const Eigen::VectorXd&)> reduce_tensor;                        // r_t
    std::function<Eigen::VectorXd(const Mask&, const Eigen::VectorXd&)> filter;          // f_t
    std::function<Indices(const Eigen::VectorXd&, const Mask&)> index;                   // idx
    std::function<Mask(const Eigen::VectorXd&)> condition;                               // c_t
};

class ComponentRegistry {
public:
    void add(ComponentFn fn);
    const ComponentFn& get(std::string_view name) const; // throws UnknownComponent
    ImplCatalog catalog() const; // component names plus builtin predicates

private:
    std::map<std::string, ComponentFn, std::less<>> fns_;
};

const ComponentRegistry& builtin_components();
ImplCatalog feature_catalog();

struct SlotBinding {
    std::string node;
    const ComponentFn* fn = nullptr;
};

struct FeatureAst {
    FeatureTemplate kind = FeatureTemplate::Identity;
    std::map<std::string, SlotBinding> slots;

    const ComponentFn& at(const std::string& slot) const;
};

// components: slot -> component node; the node's impl resolves the function.
FeatureAst materialize(FeatureTemplate kind, const std::map<std::string, const KnowledgeNode*>& components,
                       const ComponentRegistry& registry = builtin_components());
// Convenience form where node id and impl key coincide.
FeatureAst materialize(FeatureTemplate kind, const std::map<std::string, std::string>& components,
                       const ComponentRegistry& registry = builtin_components());

// `column` belongs to the current table for identity/entity/reverse (the
// reverse key is the parent key of `link`) and to the linked table for direct.
Eigen::VectorXd execute_feature(const FeatureAst& ast, const TableData& td, std::string_view column,
                                const TableLink* link = nullptr);

struct Feature {
    std::string name;
    FeatureAst ast;
    std::string table;
    std::string column;
    std::optional<Eigen::VectorXd> values;

    std::vector<std::string> slot_functions() const; // impls in template slot order
};

struct FeatureSet {
    std::vector<Feature> features;

    std::vector<std::string> names() const;
    // Values as an n x k matrix; throws Error when any value is missing.
    Eigen::MatrixXd matrix() const;
};

// One query per input column (per link for direct/reverse); appends every
// returned component combination as a feature.
void build_features(FeatureTemplate kind, const TableData& td, const KnowledgeSystem& ks,
                    FeatureSet& features, bool compute_values = true);

// build_features per type over td.current, first recursing into linked
// tables while depth > 1.
FeatureSet dfs(const TableData& td, const KnowledgeSystem& ks,
               const std::vector<FeatureTemplate>& types, int depth = 1, bool compute_values = true);

} // namespace kdsynth
