#include "conceptgcn/graph_data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "conceptgcn/errors.hpp"

namespace conceptgcn {

using json = nlohmann::json;

void AttributedGraph::validate() const {
    const std::size_t n = labels.size();
    if (adjacency.rows() != n || adjacency.cols() != n) {
        throw ContractError("graph: adjacency " + shape_of(adjacency) + " does not match " +
                            std::to_string(n) + " labels");
    }
    if (features.rows() != n) {
        throw ContractError("graph: feature rows " + std::to_string(features.rows()) +
                            " != node count " + std::to_string(n));
    }
    if (!node_names.empty() && node_names.size() != n) {
        throw ContractError("graph: node_names length mismatch");
    }
    for (int y : labels) {
        if (y < 0 || static_cast<std::size_t>(y) >= class_count) {
            throw ContractError("graph: label " + std::to_string(y) + " outside [0," +
                                std::to_string(class_count) + ")");
        }
    }
    for (std::size_t r = 0; r < n; ++r) {
        const auto cols = adjacency.row_cols(r);
        if (std::binary_search(cols.begin(), cols.end(), r)) {
            throw ContractError("graph: adjacency has a self loop at node " + std::to_string(r));
        }
        for (double v : adjacency.row_values(r)) {
            if (v != 1.0) throw ContractError("graph: adjacency is not binary");
        }
    }
    if (asymmetry(adjacency) != 0.0) throw ContractError("graph: adjacency is not symmetric");
}

DatasetStats stats_of(const AttributedGraph& g) {
    return {g.node_count(), g.edge_count(), g.feature_count(), g.class_count};
}

std::vector<std::size_t> class_histogram(const AttributedGraph& g) {
    std::vector<std::size_t> counts(g.class_count, 0);
    for (int y : g.labels) ++counts[static_cast<std::size_t>(y)];
    return counts;
}

SparseMatrixCSR adjacency_from_pairs(std::size_t n,
                                     const std::vector<std::pair<std::size_t, std::size_t>>& pairs,
                                     IngestReport* report) {
    std::set<std::pair<std::size_t, std::size_t>> seen;
    std::vector<Triplet> triplets;
    triplets.reserve(pairs.size() * 2);
    for (const auto& [a, b] : pairs) {
        if (a >= n || b >= n) {
            throw ContractError("adjacency_from_pairs: endpoint out of range");
        }
        if (a == b) {
            if (report) ++report->dropped_self;
            continue;
        }
        const auto key = std::minmax(a, b);
        if (!seen.insert({key.first, key.second}).second) {
            if (report) ++report->duplicate_records;
            continue;
        }
        triplets.push_back({a, b, 1.0});
        triplets.push_back({b, a, 1.0});
    }
    return SparseMatrixCSR::from_triplets(n, n, std::move(triplets),
                                          SparseMatrixCSR::Duplicates::max);
}

namespace {

std::vector<std::string> split_tokens(const std::string& line) {
    std::vector<std::string> tokens;
    std::istringstream in(line);
    std::string tok;
    while (in >> tok) tokens.push_back(tok);
    return tokens;
}

double parse_number(const std::string& tok, std::size_t line_no, const char* what) {
    try {
        std::size_t used = 0;
        const double v = std::stod(tok, &used);
        if (used != tok.size() || !std::isfinite(v)) throw std::invalid_argument(tok);
        return v;
    } catch (const std::exception&) {
        throw ParseError(std::string(what) + " line " + std::to_string(line_no) +
                         ": cannot parse feature value '" + tok + "'");
    }
}

}  // namespace

namespace {

// Shared tail of the text parsers: class ids follow sorted label names.
AttributedGraph assemble(std::string name, std::vector<std::string> ids,
                         const std::vector<std::string>& label_names, std::size_t width,
                         std::vector<double> feature_data,
                         const std::vector<std::pair<std::size_t, std::size_t>>& pairs,
                         IngestReport& rep) {
    AttributedGraph g;
    g.name = std::move(name);
    const std::size_t n = ids.size();
    g.adjacency = adjacency_from_pairs(n, pairs, &rep);
    g.features = DenseMatrix(n, width, std::move(feature_data));
    std::set<std::string> distinct(label_names.begin(), label_names.end());
    g.class_names.assign(distinct.begin(), distinct.end());
    g.class_count = g.class_names.size();
    g.labels.reserve(n);
    for (const auto& l : label_names) {
        const auto it = std::lower_bound(g.class_names.begin(), g.class_names.end(), l);
        g.labels.push_back(static_cast<int>(it - g.class_names.begin()));
    }
    g.node_names = std::move(ids);
    g.validate();
    return g;
}

}  // namespace

AttributedGraph parse_linqs(std::istream& content, std::istream& cites, IngestReport* report,
                            std::string name) {
    std::vector<std::string> ids;
    std::vector<std::string> label_names;
    std::vector<double> feature_data;
    std::unordered_map<std::string, std::size_t> index_of;
    std::size_t width = 0;
    bool have_width = false;

    std::string line;
    std::size_t line_no = 0;
    while (std::getline(content, line)) {
        ++line_no;
        const auto tokens = split_tokens(line);
        if (tokens.empty()) continue;
        if (tokens.size() < 2) {
            throw ParseError("content line " + std::to_string(line_no) +
                             ": expected '<id> features... <label>'");
        }
        const std::size_t m = tokens.size() - 2;
        if (!have_width) {
            width = m;
            have_width = true;
        } else if (m != width) {
            throw ParseError("content line " + std::to_string(line_no) + ": " +
                             std::to_string(m) + " features, expected " + std::to_string(width));
        }
        if (!index_of.emplace(tokens.front(), ids.size()).second) {
            throw ParseError("content line " + std::to_string(line_no) + ": duplicate node id '" +
                             tokens.front() + "'");
        }
        ids.push_back(tokens.front());
        label_names.push_back(tokens.back());
        for (std::size_t k = 1; k + 1 < tokens.size(); ++k) {
            feature_data.push_back(parse_number(tokens[k], line_no, "content"));
        }
    }
    if (ids.empty()) throw ParseError("content: no nodes found");

    IngestReport local;
    IngestReport& rep = report ? *report : local;
    rep = IngestReport{};

    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    line_no = 0;
    while (std::getline(cites, line)) {
        ++line_no;
        const auto tokens = split_tokens(line);
        if (tokens.empty()) continue;
        if (tokens.size() != 2) {
            throw ParseError("cites line " + std::to_string(line_no) +
                             ": expected '<cited> <citing>'");
        }
        ++rep.citation_records;
        const auto a = index_of.find(tokens[0]);
        const auto b = index_of.find(tokens[1]);
        if (a == index_of.end() || b == index_of.end()) {
            ++rep.dropped_unknown;
            continue;
        }
        pairs.emplace_back(a->second, b->second);
    }

    return assemble(std::move(name), std::move(ids), label_names, width,
                    std::move(feature_data), pairs, rep);
}

AttributedGraph parse_pubmed_tab(std::istream& nodes, std::istream& cites, IngestReport* report,
                                 std::string name) {
    std::string line;
    std::size_t line_no = 0;
    auto next_line = [&](std::istream& in) {
        ++line_no;
        return static_cast<bool>(std::getline(in, line));
    };

    // Two header lines: the table name, then the declared attributes.
    if (!next_line(nodes) || !next_line(nodes)) throw ParseError("node table: missing header");
    std::unordered_map<std::string, std::size_t> column_of;
    for (const auto& decl : split_tokens(line)) {
        // numeric:<name>:<default>
        if (decl.rfind("numeric:", 0) != 0) continue;
        const auto end = decl.find(':', 8);
        column_of.emplace(decl.substr(8, end == std::string::npos ? end : end - 8), column_of.size());
    }
    const std::size_t width = column_of.size();
    if (width == 0) throw ParseError("node table: header declares no numeric attributes");

    std::vector<std::string> ids;
    std::vector<std::string> label_names;
    std::vector<double> feature_data;
    std::unordered_map<std::string, std::size_t> index_of;
    while (next_line(nodes)) {
        const auto tokens = split_tokens(line);
        if (tokens.empty()) continue;
        const std::string where = "node table line " + std::to_string(line_no);
        if (!index_of.emplace(tokens.front(), ids.size()).second) {
            throw ParseError(where + ": duplicate node id '" + tokens.front() + "'");
        }
        ids.push_back(tokens.front());
        feature_data.resize(ids.size() * width, 0.0);
        double* row = feature_data.data() + (ids.size() - 1) * width;
        bool labelled = false;
        for (std::size_t k = 1; k < tokens.size(); ++k) {
            const auto eq = tokens[k].find('=');
            if (eq == std::string::npos) throw ParseError(where + ": expected name=value");
            const std::string key = tokens[k].substr(0, eq);
            const std::string value = tokens[k].substr(eq + 1);
            if (key == "label") {
                label_names.push_back(value);
                labelled = true;
            } else if (key != "summary") {
                const auto col = column_of.find(key);
                if (col == column_of.end()) {
                    throw ParseError(where + ": undeclared attribute '" + key + "'");
                }
                row[col->second] = parse_number(value, line_no, "node table");
            }
        }
        if (!labelled) throw ParseError(where + ": no label");
    }
    if (ids.empty()) throw ParseError("node table: no nodes found");

    IngestReport local;
    IngestReport& rep = report ? *report : local;
    rep = IngestReport{};

    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    line_no = 0;
    if (!next_line(cites) || !next_line(cites)) throw ParseError("cites table: missing header");
    while (next_line(cites)) {
        // <edge id> paper:<src> | paper:<dst>
        const auto tokens = split_tokens(line);
        if (tokens.empty()) continue;
        if (tokens.size() != 4 || tokens[2] != "|") {
            throw ParseError("cites table line " + std::to_string(line_no) +
                             ": expected '<id> paper:<a> | paper:<b>'");
        }
        ++rep.citation_records;
        auto endpoint = [&](const std::string& t) {
            const auto colon = t.find(':');
            return index_of.find(colon == std::string::npos ? t : t.substr(colon + 1));
        };
        const auto a = endpoint(tokens[1]);
        const auto b = endpoint(tokens[3]);
        if (a == index_of.end() || b == index_of.end()) {
            ++rep.dropped_unknown;
            continue;
        }
        pairs.emplace_back(a->second, b->second);
    }
    return assemble(std::move(name), std::move(ids), label_names, width,
                    std::move(feature_data), pairs, rep);
}

AttributedGraph load_pubmed_tab(const std::filesystem::path& node_path,
                                const std::filesystem::path& cites_path, IngestReport* report) {
    std::ifstream nodes(node_path);
    if (!nodes) throw ParseError("cannot open " + node_path.string());
    std::ifstream cites(cites_path);
    if (!cites) throw ParseError("cannot open " + cites_path.string());
    return parse_pubmed_tab(nodes, cites, report, "pubmed");
}

AttributedGraph load_linqs(const std::filesystem::path& content_path,
                           const std::filesystem::path& cites_path, IngestReport* report) {
    std::ifstream content(content_path);
    if (!content) throw ParseError("cannot open " + content_path.string());
    std::ifstream cites(cites_path);
    if (!cites) throw ParseError("cannot open " + cites_path.string());
    return parse_linqs(content, cites, report, content_path.stem().string());
}

namespace {

const json& require_key(const json& doc, const char* key) {
    const auto it = doc.find(key);
    if (it == doc.end()) throw SchemaError(std::string("graph json: missing key '") + key + "'");
    return *it;
}

std::size_t require_count(const json& doc, const char* key) {
    const json& v = require_key(doc, key);
    if (!v.is_number_integer() || v.get<long long>() < 0) {
        throw SchemaError(std::string("graph json: '") + key + "' must be a non-negative integer");
    }
    return v.get<std::size_t>();
}

}  // namespace

AttributedGraph parse_json_graph(const std::string& text, IngestReport* report) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw SchemaError(std::string("graph json: not valid JSON: ") + e.what());
    }
    if (!doc.is_object()) throw SchemaError("graph json: top level must be an object");

    AttributedGraph g;
    const json& name = require_key(doc, "name");
    if (!name.is_string()) throw SchemaError("graph json: 'name' must be a string");
    g.name = name.get<std::string>();
    const std::size_t n = require_count(doc, "num_nodes");
    const std::size_t m = require_count(doc, "num_features");
    g.class_count = require_count(doc, "num_classes");

    const json& features = require_key(doc, "features");
    if (!features.is_array() || features.size() != n) {
        throw SchemaError("graph json: 'features' must be an array of num_nodes rows");
    }
    std::vector<double> data;
    data.reserve(n * m);
    for (std::size_t i = 0; i < n; ++i) {
        const json& row = features[i];
        if (!row.is_array() || row.size() != m) {
            throw SchemaError("graph json: 'features' row " + std::to_string(i) +
                              " must hold num_features numbers");
        }
        for (const json& v : row) {
            if (!v.is_number()) {
                throw SchemaError("graph json: 'features' row " + std::to_string(i) +
                                  " has a non-numeric entry");
            }
            data.push_back(v.get<double>());
        }
    }
    g.features = DenseMatrix(n, m, std::move(data));

    const json& labels = require_key(doc, "labels");
    if (!labels.is_array() || labels.size() != n) {
        throw SchemaError("graph json: 'labels' must be an array of num_nodes integers");
    }
    for (const json& y : labels) {
        if (!y.is_number_integer()) throw SchemaError("graph json: 'labels' entries must be integers");
        const long long v = y.get<long long>();
        if (v < 0 || static_cast<std::size_t>(v) >= g.class_count) {
            throw SchemaError("graph json: 'labels' entry " + std::to_string(v) +
                              " outside [0,num_classes)");
        }
        g.labels.push_back(static_cast<int>(v));
    }

    const json& edges = require_key(doc, "edges");
    if (!edges.is_array()) throw SchemaError("graph json: 'edges' must be an array of pairs");
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    pairs.reserve(edges.size());
    for (const json& e : edges) {
        if (!e.is_array() || e.size() != 2 || !e[0].is_number_integer() ||
            !e[1].is_number_integer()) {
            throw SchemaError("graph json: 'edges' entries must be [src,dst] integer pairs");
        }
        const long long a = e[0].get<long long>();
        const long long b = e[1].get<long long>();
        if (a < 0 || b < 0 || static_cast<std::size_t>(a) >= n ||
            static_cast<std::size_t>(b) >= n) {
            throw SchemaError("graph json: 'edges' endpoint outside [0,num_nodes)");
        }
        pairs.emplace_back(static_cast<std::size_t>(a), static_cast<std::size_t>(b));
    }
    if (const auto it = doc.find("edge_weights"); it != doc.end()) {
        if (!it->is_array() || it->size() != edges.size()) {
            throw SchemaError("graph json: 'edge_weights' must align with 'edges'");
        }
    }
    IngestReport local;
    IngestReport& rep = report ? *report : local;
    rep = IngestReport{};
    rep.citation_records = pairs.size();
    g.adjacency = adjacency_from_pairs(n, pairs, &rep);

    if (const auto it = doc.find("node_names"); it != doc.end()) {
        if (!it->is_array() || it->size() != n) {
            throw SchemaError("graph json: 'node_names' must be an array of num_nodes strings");
        }
        for (const json& s : *it) {
            if (!s.is_string()) throw SchemaError("graph json: 'node_names' entries must be strings");
            g.node_names.push_back(s.get<std::string>());
        }
    } else {
        for (std::size_t i = 0; i < n; ++i) g.node_names.push_back(std::to_string(i));
    }
    g.validate();
    return g;
}

AttributedGraph load_json_graph(const std::filesystem::path& path, IngestReport* report) {
    std::ifstream in(path);
    if (!in) throw SchemaError("graph json: cannot open " + path.string());
    std::stringstream buffer;
    buffer << in.rdbuf();
    AttributedGraph g = parse_json_graph(buffer.str(), report);
    return g;
}

namespace {

json number_value(double v) {
    if (v == std::floor(v) && std::abs(v) < 9.0e15) return json(static_cast<long long>(v));
    return json(v);
}

}  // namespace

std::string to_json_graph(const AttributedGraph& g, const SparseMatrixCSR* weighted) {
    json doc;
    doc["name"] = g.name;
    doc["num_nodes"] = g.node_count();
    doc["num_features"] = g.feature_count();
    doc["num_classes"] = g.class_count;
    json features = json::array();
    for (std::size_t i = 0; i < g.features.rows(); ++i) {
        json row = json::array();
        for (double v : g.features.row(i)) row.push_back(number_value(v));
        features.push_back(std::move(row));
    }
    doc["features"] = std::move(features);
    doc["labels"] = g.labels;
    const SparseMatrixCSR& source = weighted ? *weighted : g.adjacency;
    if (source.rows() != g.node_count()) {
        throw DimensionError("to_json_graph: edge matrix " + shape_of(source) +
                             " does not match graph");
    }
    json edges = json::array();
    json weights = json::array();
    for (std::size_t r = 0; r < source.rows(); ++r) {
        const auto cols = source.row_cols(r);
        const auto vals = source.row_values(r);
        for (std::size_t k = 0; k < cols.size(); ++k) {
            if (cols[k] <= r) continue;
            edges.push_back({r, cols[k]});
            weights.push_back(vals[k]);
        }
    }
    doc["edges"] = std::move(edges);
    if (weighted) {
        doc["edge_weights"] = std::move(weights);
        // The edge list holds each pair once and no self pairs; keep the
        // diagonal separately so the matrix can be rebuilt exactly.
        json diagonal = json::array();
        bool any = false;
        for (std::size_t r = 0; r < source.rows(); ++r) {
            const double d = source.at(r, r);
            any = any || d != 0.0;
            diagonal.push_back(d);
        }
        if (any) doc["self_weights"] = std::move(diagonal);
    }
    if (!g.node_names.empty()) doc["node_names"] = g.node_names;
    return doc.dump();
}

SparseMatrixCSR parse_weighted_edges(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw SchemaError(std::string("graph json: not valid JSON: ") + e.what());
    }
    if (!doc.is_object()) throw SchemaError("graph json: top level must be an object");
    const std::size_t n = require_count(doc, "num_nodes");
    const json& edges = require_key(doc, "edges");
    const json& weights = require_key(doc, "edge_weights");
    if (!edges.is_array() || !weights.is_array() || edges.size() != weights.size()) {
        throw SchemaError("graph json: 'edge_weights' must align with 'edges'");
    }
    std::vector<Triplet> triplets;
    triplets.reserve(2 * edges.size() + n);
    try {
        for (std::size_t k = 0; k < edges.size(); ++k) {
            const auto a = edges[k].at(0).get<std::size_t>();
            const auto b = edges[k].at(1).get<std::size_t>();
            const double w = weights[k].get<double>();
            if (a >= n || b >= n || a == b) {
                throw SchemaError("graph json: edge " + std::to_string(k) + " is not a valid pair");
            }
            triplets.push_back({a, b, w});
            triplets.push_back({b, a, w});
        }
        if (const auto it = doc.find("self_weights"); it != doc.end()) {
            if (!it->is_array() || it->size() != n) {
                throw SchemaError("graph json: 'self_weights' must hold num_nodes numbers");
            }
            for (std::size_t i = 0; i < n; ++i) triplets.push_back({i, i, (*it)[i].get<double>()});
        }
    } catch (const json::exception& e) {
        throw SchemaError(std::string("graph json: bad weighted edge data: ") + e.what());
    }
    return SparseMatrixCSR::from_triplets(n, n, std::move(triplets));
}

void save_json_graph(const AttributedGraph& g, const std::filesystem::path& path,
                     const SparseMatrixCSR* weighted) {
    std::ofstream out(path);
    if (!out) throw SchemaError("graph json: cannot write " + path.string());
    out << to_json_graph(g, weighted);
}

SparseMatrixCSR with_self_loops(const SparseMatrixCSR& adjacency) {
    std::vector<Triplet> triplets;
    triplets.reserve(adjacency.nnz() + adjacency.rows());
    for (std::size_t r = 0; r < adjacency.rows(); ++r) {
        for (std::size_t c : adjacency.row_cols(r)) triplets.push_back({r, c, 1.0});
        triplets.push_back({r, r, 1.0});
    }
    return SparseMatrixCSR::from_triplets(adjacency.rows(), adjacency.cols(), std::move(triplets),
                                          SparseMatrixCSR::Duplicates::max);
}

SparseMatrixCSR normalize_adjacency(const SparseMatrixCSR& adjacency) {
    return symmetric_normalize(with_self_loops(adjacency));
}

SparseMatrixCSR normalize_adjacency(const AttributedGraph& g) {
    return normalize_adjacency(g.adjacency);
}

std::vector<std::size_t> mask_indices(const std::vector<bool>& mask) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < mask.size(); ++i)
        if (mask[i]) out.push_back(i);
    return out;
}

std::size_t mask_count(const std::vector<bool>& mask) {
    return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), true));
}

DataSplit make_splits(const AttributedGraph& g, double train_ratio, double val_ratio,
                      std::uint64_t seed) {
    if (!(train_ratio > 0.0) || !(val_ratio > 0.0) || !(train_ratio + val_ratio < 1.0)) {
        throw ContractError("make_splits: need 0 < train_ratio, 0 < val_ratio, sum < 1");
    }
    const std::size_t n = g.node_count();
    std::vector<std::vector<std::size_t>> members(g.class_count);
    for (std::size_t i = 0; i < n; ++i) members[static_cast<std::size_t>(g.labels[i])].push_back(i);

    DataSplit split{std::vector<bool>(n, false), std::vector<bool>(n, false),
                    std::vector<bool>(n, false)};
    std::mt19937_64 rng(seed);
    for (std::size_t c = 0; c < members.size(); ++c) {
        auto& nodes = members[c];
        if (nodes.size() < 3) {
            throw SplitError("make_splits: class " + std::to_string(c) + " has " +
                             std::to_string(nodes.size()) + " members, cannot stratify");
        }
        std::shuffle(nodes.begin(), nodes.end(), rng);
        const auto size = static_cast<double>(nodes.size());
        std::size_t n_train = std::max<std::size_t>(1, std::llround(train_ratio * size));
        n_train = std::min(n_train, nodes.size() - 1);
        std::size_t n_val = std::max<std::size_t>(1, std::llround(val_ratio * size));
        n_val = std::min(n_val, nodes.size() - n_train);
        for (std::size_t k = 0; k < nodes.size(); ++k) {
            if (k < n_train) {
                split.train_mask[nodes[k]] = true;
            } else if (k < n_train + n_val) {
                split.val_mask[nodes[k]] = true;
            } else {
                split.test_mask[nodes[k]] = true;
            }
        }
    }
    return split;
}

}  // namespace conceptgcn
