#include "kdsynth/feature_synthesis.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "kdsynth/errors.hpp"

namespace kdsynth {

std::optional<Eigen::Index> Table::column_index(std::string_view column) const {
    auto it = std::find(columns.begin(), columns.end(), column);
    if (it == columns.end()) return std::nullopt;
    return static_cast<Eigen::Index>(it - columns.begin());
}

const Eigen::MatrixXd::ConstColXpr Table::column(std::string_view name) const {
    auto j = column_index(name);
    if (!j) throw MissingColumn("table '" + this->name + "' has no column '" + std::string(name) + "'");
    return values.col(*j);
}

bool Table::is_key(std::string_view column) const {
    return std::find(keys.begin(), keys.end(), column) != keys.end();
}

std::vector<std::string> Table::feature_columns() const {
    std::vector<std::string> out;
    for (const auto& c : columns)
        if (c != kLabelColumn && !is_key(c)) out.push_back(c);
    return out;
}

const Table& TableData::table(std::string_view name) const {
    auto it = tables.find(name);
    if (it == tables.end()) throw MissingLink("unknown table '" + std::string(name) + "'");
    return it->second;
}

void check_tables(const TableData& td) {
    for (const auto& [name, t] : td.tables) {
        if (static_cast<Eigen::Index>(t.columns.size()) != t.values.cols())
            throw Error("table '" + name + "': column names do not match values");
        for (const auto& k : t.keys)
            if (!t.column_index(k)) throw MissingColumn("table '" + name + "': key column '" + k + "' missing");
    }
    if (!td.current.empty()) td.table(td.current);
    std::map<std::string, std::vector<std::string>> parents;
    for (const auto& l : td.links) {
        td.table(l.child).column(l.foreign_key);
        td.table(l.parent).column(l.parent_key);
        parents[l.child].push_back(l.parent);
    }
    // link cycles
    std::map<std::string, int> state;
    std::function<void(const std::string&)> visit = [&](const std::string& t) {
        state[t] = 1;
        for (const auto& p : parents[t]) {
            if (state[p] == 1) throw Error("table links form a cycle through '" + p + "'");
            if (state[p] == 0) visit(p);
        }
        state[t] = 2;
    };
    for (const auto& [name, t] : td.tables)
        if (state[name] == 0) visit(name);
}

TableData single_table(const Dataset& ds, std::string name) {
    TableData td;
    Table t;
    t.name = name;
    t.columns = ds.columns;
    t.values = ds.X;
    td.tables.emplace(name, std::move(t));
    td.current = std::move(name);
    return td;
}

Table read_table_csv(const std::filesystem::path& path, std::string name, std::vector<std::string> keys) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open table '" + path.string() + "'");
    std::string line;
    if (!std::getline(in, line)) throw NonNumeric(path.string() + ": empty CSV");
    Table t;
    t.name = std::move(name);
    t.keys = std::move(keys);
    for (auto& c : split_list(line, ',')) {
        while (!c.empty() && std::isspace(static_cast<unsigned char>(c.back()))) c.pop_back();
        t.columns.push_back(c);
    }
    std::vector<std::vector<double>> rows;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        auto cells = split_list(line, ',');
        if (cells.size() != t.columns.size())
            throw NonNumeric(path.string() + ":" + std::to_string(line_no) + ": wrong field count");
        std::vector<double> row;
        for (const auto& c : cells) {
            char* end = nullptr;
            double v = std::strtod(c.c_str(), &end);
            if (c.empty() || end == c.c_str()) throw NonNumeric(path.string() + ":" + std::to_string(line_no) + ": non-numeric '" + c + "'");
            row.push_back(v);
        }
        rows.push_back(std::move(row));
    }
    t.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(t.columns.size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < rows[i].size(); ++j)
            t.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    for (const auto& k : t.keys)
        if (!t.column_index(k)) throw MissingColumn(path.string() + ": key column '" + k + "' missing");
    return t;
}

// ---- templates -------------------------------------------------------------

std::string_view to_string(FeatureTemplate t) {
    switch (t) {
    case FeatureTemplate::Identity: return "Identity";
    case FeatureTemplate::Entity: return "Entity";
    case FeatureTemplate::Direct: return "Direct";
    case FeatureTemplate::Reverse: return "Reverse";
    }
    return "?";
}

std::optional<FeatureTemplate> parse_feature_template(std::string_view name) {
    for (auto t : {FeatureTemplate::Identity, FeatureTemplate::Entity, FeatureTemplate::Direct,
                   FeatureTemplate::Reverse})
        if (to_string(t) == name) return t;
    return std::nullopt;
}

const std::vector<std::string>& template_slots(FeatureTemplate t) {
    static const std::vector<std::string> identity{"g_s"};
    static const std::vector<std::string> entity{"g_s", "r_s", "r_t", "f_t", "c_t", "g_t"};
    static const std::vector<std::string> direct{"g_t", "idx", "c_t"};
    static const std::vector<std::string> reverse{"g_s", "r_s", "r_t", "idx", "c_t", "g_t"};
    switch (t) {
    case FeatureTemplate::Identity: return identity;
    case FeatureTemplate::Entity: return entity;
    case FeatureTemplate::Direct: return direct;
    case FeatureTemplate::Reverse: return reverse;
    }
    return identity;
}

void ComponentRegistry::add(ComponentFn fn) {
    auto name = fn.name;
    fns_.insert_or_assign(std::move(name), std::move(fn));
}

const ComponentFn& ComponentRegistry::get(std::string_view name) const {
    auto it = fns_.find(name);
    if (it == fns_.end()) throw UnknownComponent("unknown feature component '" + std::string(name) + "'");
    return it->second;
}

ImplCatalog ComponentRegistry::catalog() const {
    ImplCatalog c = builtin_registry().catalog();
    c.operations.clear();
    for (const auto& [name, fn] : fns_) c.operations.insert(name);
    return c;
}

const ComponentRegistry& builtin_components() {
    static const ComponentRegistry registry = [] {
        ComponentRegistry r;
        ComponentFn f;

        f = {};
        f.name = "cell_value";
        f.role = "g_s";
        f.get_scalar = [](const Eigen::VectorXd& v, Eigen::Index i) { return v(i); };
        r.add(f);

        f = {};
        f.name = "row_vector";
        f.role = "g_t";
        f.get_tensor = [](const Eigen::MatrixXd& m, const Indices& rows) {
            Eigen::VectorXd out(static_cast<Eigen::Index>(rows.size()) * m.cols());
            Eigen::Index k = 0;
            for (auto i : rows)
                for (Eigen::Index j = 0; j < m.cols(); ++j) out(k++) = m(i, j);
            return out;
        };
        r.add(f);

        f = {};
        f.name = "always_true";
        f.role = "c_t";
        f.condition = [](const Eigen::VectorXd& v) { return Mask(static_cast<std::size_t>(v.size()), true); };
        r.add(f);

        f = {};
        f.name = "filter_t";
        f.role = "f_t";
        f.filter = [](const Mask& mask, const Eigen::VectorXd& v) {
            std::vector<double> kept;
            for (Eigen::Index i = 0; i < v.size(); ++i)
                if (mask[static_cast<std::size_t>(i)]) kept.push_back(v(i));
            return Eigen::VectorXd(Eigen::Map<Eigen::VectorXd>(kept.data(), static_cast<Eigen::Index>(kept.size())));
        };
        r.add(f);

        f = {};
        f.name = "index_where";
        f.role = "idx";
        f.index = [](const Eigen::VectorXd& v, const Mask& mask) {
            Indices out;
            for (Eigen::Index i = 0; i < v.size(); ++i)
                if (mask[static_cast<std::size_t>(i)]) out.push_back(i);
            return out;
        };
        r.add(f);

        f = {};
        f.name = "product_t";
        f.role = "r_t";
        f.reduce_tensor = [](const Eigen::VectorXd& v) { return v.size() ? v.prod() : 1.0; };
        r.add(f);

        f = {};
        f.name = "mean_t";
        f.role = "r_t";
        f.reduce_tensor = [](const Eigen::VectorXd& v) { return v.size() ? v.mean() : 0.0; };
        r.add(f);

        f = {};
        f.name = "right_proj";
        f.role = "r_s";
        f.reduce_scalar = [](double, double b) { return b; };
        r.add(f);

        f = {};
        f.name = "sum2";
        f.role = "r_s";
        f.reduce_scalar = [](double a, double b) { return a + b; };
        r.add(f);
        return r;
    }();
    return registry;
}

ImplCatalog feature_catalog() { return builtin_components().catalog(); }

const ComponentFn& FeatureAst::at(const std::string& slot) const {
    auto it = slots.find(slot);
    if (it == slots.end() || !it->second.fn) throw SlotMismatch("feature AST has no slot '" + slot + "'");
    return *it->second.fn;
}

namespace {

void check_slots(FeatureTemplate kind, const std::vector<std::string>& given) {
    const auto& want = template_slots(kind);
    std::set<std::string> w(want.begin(), want.end()), g(given.begin(), given.end());
    for (const auto& s : w)
        if (!g.contains(s))
            throw SlotMismatch(std::string(to_string(kind)) + " template: missing slot '" + s + "'");
    for (const auto& s : g)
        if (!w.contains(s))
            throw SlotMismatch(std::string(to_string(kind)) + " template: unexpected slot '" + s + "'");
}

const ComponentFn& resolve(const std::string& slot, const std::string& impl, const ComponentRegistry& registry) {
    const auto& fn = registry.get(impl);
    if (fn.role != slot)
        throw SlotMismatch("component '" + impl + "' fills " + fn.role + ", not " + slot);
    return fn;
}

} // namespace

FeatureAst materialize(FeatureTemplate kind, const std::map<std::string, const KnowledgeNode*>& components,
                       const ComponentRegistry& registry) {
    std::vector<std::string> given;
    for (const auto& [slot, node] : components) given.push_back(slot);
    check_slots(kind, given);
    FeatureAst ast;
    ast.kind = kind;
    for (const auto& [slot, node] : components) {
        if (!node || !node->impl_key) throw UnknownComponent("slot '" + slot + "' has no implementation");
        ast.slots[slot] = SlotBinding{node->id, &resolve(slot, *node->impl_key, registry)};
    }
    return ast;
}

FeatureAst materialize(FeatureTemplate kind, const std::map<std::string, std::string>& components,
                       const ComponentRegistry& registry) {
    std::vector<std::string> given;
    for (const auto& [slot, impl] : components) given.push_back(slot);
    check_slots(kind, given);
    FeatureAst ast;
    ast.kind = kind;
    for (const auto& [slot, impl] : components) ast.slots[slot] = SlotBinding{impl, &resolve(slot, impl, registry)};
    return ast;
}

namespace {

Eigen::MatrixXd feature_submatrix(const Table& t) {
    auto cols = t.feature_columns();
    Eigen::MatrixXd m(t.rows(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t j = 0; j < cols.size(); ++j) m.col(static_cast<Eigen::Index>(j)) = t.column(cols[j]);
    return m;
}

Mask matching(const Mask& base, const Eigen::VectorXd& keys, double key) {
    Mask out = base;
    for (Eigen::Index i = 0; i < keys.size(); ++i)
        out[static_cast<std::size_t>(i)] = out[static_cast<std::size_t>(i)] && keys(i) == key;
    return out;
}

} // namespace

Eigen::VectorXd execute_feature(const FeatureAst& ast, const TableData& td, std::string_view column,
                                const TableLink* link) {
    const Table& cur = td.current_table();
    switch (ast.kind) {
    case FeatureTemplate::Identity: {
        Eigen::VectorXd col = cur.column(column);
        const auto& gs = ast.at("g_s");
        Eigen::VectorXd out(col.size());
        for (Eigen::Index i = 0; i < col.size(); ++i) out(i) = gs.get_scalar(col, i);
        return out;
    }
    case FeatureTemplate::Entity: {
        Eigen::VectorXd col = cur.column(column);
        Eigen::MatrixXd sub = feature_submatrix(cur);
        const auto &gs = ast.at("g_s"), &rs = ast.at("r_s"), &rt = ast.at("r_t"), &ft = ast.at("f_t"),
                   &ct = ast.at("c_t"), &gt = ast.at("g_t");
        Eigen::VectorXd out(cur.rows());
        for (Eigen::Index i = 0; i < cur.rows(); ++i) {
            Eigen::VectorXd row = gt.get_tensor(sub, Indices{i});
            out(i) = rs.reduce_scalar(gs.get_scalar(col, i), rt.reduce_tensor(ft.filter(ct.condition(row), row)));
        }
        return out;
    }
    case FeatureTemplate::Direct: {
        if (!link || link->child != td.current)
            throw MissingLink("direct feature needs a link from '" + td.current + "' to a parent table");
        const Table& parent = td.table(link->parent);
        Eigen::VectorXd fk = cur.column(link->foreign_key);
        Eigen::VectorXd keys = parent.column(link->parent_key);
        Eigen::MatrixXd values = parent.column(column);
        const auto &gt = ast.at("g_t"), &idx = ast.at("idx"), &ct = ast.at("c_t");
        Mask base = ct.condition(keys);
        Eigen::VectorXd out(cur.rows());
        for (Eigen::Index i = 0; i < cur.rows(); ++i) {
            Eigen::VectorXd hit = gt.get_tensor(values, idx.index(keys, matching(base, keys, fk(i))));
            if (hit.size() == 0)
                throw NonNumeric("no '" + parent.name + "' row with key " + std::to_string(fk(i)));
            out(i) = hit(0);
        }
        return out;
    }
    case FeatureTemplate::Reverse: {
        if (!link || link->parent != td.current)
            throw MissingLink("reverse feature needs a link from a child table to '" + td.current + "'");
        const Table& child = td.table(link->child);
        Eigen::VectorXd own_keys = cur.column(link->parent_key);
        Eigen::VectorXd fk = child.column(link->foreign_key);
        Eigen::MatrixXd values = child.column(column);
        const auto &gs = ast.at("g_s"), &rs = ast.at("r_s"), &rt = ast.at("r_t"), &idx = ast.at("idx"),
                   &ct = ast.at("c_t"), &gt = ast.at("g_t");
        Mask base = ct.condition(fk);
        Eigen::VectorXd out(cur.rows());
        for (Eigen::Index i = 0; i < cur.rows(); ++i) {
            double key = gs.get_scalar(own_keys, i);
            Eigen::VectorXd vals = gt.get_tensor(values, idx.index(fk, matching(base, fk, own_keys(i))));
            out(i) = rs.reduce_scalar(key, rt.reduce_tensor(vals));
        }
        return out;
    }
    }
    return {};
}

std::vector<std::string> Feature::slot_functions() const {
    std::vector<std::string> out;
    for (const auto& slot : template_slots(ast.kind)) {
        auto it = ast.slots.find(slot);
        out.push_back(it == ast.slots.end() || !it->second.fn ? "?" : it->second.fn->name);
    }
    return out;
}

std::vector<std::string> FeatureSet::names() const {
    std::vector<std::string> out;
    for (const auto& f : features) out.push_back(f.name);
    return out;
}

Eigen::MatrixXd FeatureSet::matrix() const {
    if (features.empty()) return {};
    Eigen::Index n = -1;
    for (const auto& f : features) {
        if (!f.values) throw Error("feature '" + f.name + "' has no computed values");
        if (n >= 0 && f.values->size() != n) throw Error("features have different lengths");
        n = f.values->size();
    }
    Eigen::MatrixXd m(n, static_cast<Eigen::Index>(features.size()));
    for (std::size_t j = 0; j < features.size(); ++j) m.col(static_cast<Eigen::Index>(j)) = *features[j].values;
    return m;
}

namespace {

std::string lowercase(std::string_view s) {
    std::string out(s);
    for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

// Current table extended with the non-identity features already synthesized on it.
TableData working_copy(const TableData& td, const FeatureSet& features) {
    TableData work = td;
    Table& t = work.tables.at(work.current);
    std::vector<const Feature*> extra;
    for (const auto& f : features.features)
        if (f.table == td.current && f.ast.kind != FeatureTemplate::Identity && f.values &&
            f.values->size() == t.rows() && !t.column_index(f.name))
            extra.push_back(&f);
    if (extra.empty()) return work;
    Eigen::MatrixXd grown(t.rows(), t.values.cols() + static_cast<Eigen::Index>(extra.size()));
    grown.leftCols(t.values.cols()) = t.values;
    for (std::size_t k = 0; k < extra.size(); ++k) {
        grown.col(t.values.cols() + static_cast<Eigen::Index>(k)) = *extra[k]->values;
        t.columns.push_back(extra[k]->name);
    }
    t.values = std::move(grown);
    return work;
}

void add_features(FeatureTemplate kind, const TableData& work, const KnowledgeSystem& ks,
                  FeatureSet& features, bool compute_values, const std::string& column,
                  const std::string& qualified, const TableLink* link) {
    auto sd = SynthesisData::feature_step(std::string(to_string(kind)), work, qualified);
    auto reply = ks.query(sd);
    for (const auto& tuple : reply.tuples) {
        std::map<std::string, const KnowledgeNode*> comps;
        for (std::size_t g = 0; g < tuple.size(); ++g) comps[reply.groups[g]] = reply.nodes.at(tuple[g]);
        Feature f;
        f.ast = materialize(kind, comps);
        f.table = work.current;
        f.column = qualified;
        f.name = "f_" + lowercase(to_string(kind)) + "_" + join(f.slot_functions(), '-') + "_" + qualified +
                 "_" + std::to_string(features.features.size());
        if (compute_values) f.values = execute_feature(f.ast, work, column, link);
        features.features.push_back(std::move(f));
    }
}

} // namespace

void build_features(FeatureTemplate kind, const TableData& td, const KnowledgeSystem& ks,
                    FeatureSet& features, bool compute_values) {
    TableData work = working_copy(td, features);
    const Table& cur = work.current_table();
    switch (kind) {
    case FeatureTemplate::Identity:
    case FeatureTemplate::Entity:
        for (const auto& c : cur.feature_columns())
            add_features(kind, work, ks, features, compute_values, c, c, nullptr);
        break;
    case FeatureTemplate::Direct:
        for (const auto& l : work.links) {
            if (l.child != work.current) continue;
            for (const auto& c : work.table(l.parent).feature_columns())
                add_features(kind, work, ks, features, compute_values, c, l.parent + "." + c, &l);
        }
        break;
    case FeatureTemplate::Reverse:
        for (const auto& l : work.links) {
            if (l.parent != work.current) continue;
            for (const auto& c : work.table(l.child).feature_columns())
                add_features(kind, work, ks, features, compute_values, c, l.child + "." + c, &l);
        }
        break;
    }
}

namespace {

FeatureSet dfs_from(const TableData& td, const KnowledgeSystem& ks, const std::vector<FeatureTemplate>& types,
                    int depth, bool compute_values, std::set<std::string> visited) {
    visited.insert(td.current);
    TableData work = td;
    if (depth > 1) {
        std::vector<std::string> neighbours;
        for (const auto& l : td.links) {
            if (l.child == td.current) neighbours.push_back(l.parent);
            if (l.parent == td.current) neighbours.push_back(l.child);
        }
        for (const auto& nb : neighbours) {
            if (visited.contains(nb)) continue;
            TableData sub = work;
            sub.current = nb;
            FeatureSet inner = dfs_from(sub, ks, types, depth - 1, compute_values, visited);
            // expose the linked table's new features as its columns
            TableData grown = working_copy(sub, inner);
            work.tables.at(nb) = grown.tables.at(nb);
        }
    }
    FeatureSet out;
    for (auto kind : types) build_features(kind, work, ks, out, compute_values);
    return out;
}

} // namespace

FeatureSet dfs(const TableData& td, const KnowledgeSystem& ks, const std::vector<FeatureTemplate>& types,
               int depth, bool compute_values) {
    if (depth < 1) throw Error("dfs depth must be at least 1");
    check_tables(td);
    return dfs_from(td, ks, types, depth, compute_values, {});
}

} // namespace kdsynth
