#include "conceptgcn/tape.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "conceptgcn/errors.hpp"

namespace conceptgcn {
namespace {

void accumulate(DenseMatrix& dst, const DenseMatrix& src) {
    auto d = dst.values();
    const auto s = src.values();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
}

bool zero_row(std::span<const double> r) {
    return std::all_of(r.begin(), r.end(), [](double x) { return x == 0.0; });
}

// a^T * g, skipping zero rows of g.
DenseMatrix matmul_tn(const DenseMatrix& a, const DenseMatrix& g) {
    DenseMatrix out(a.cols(), g.cols());
    const std::size_t n = g.cols();
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const auto arow = a.row(i);
        const auto grow = g.row(i);
        if (zero_row(grow)) continue;
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double v = arow[k];
            double* __restrict dst = out.row(k).data();
            const double* __restrict g_row = grow.data();
            for (std::size_t j = 0; j < n; ++j) dst[j] += v * g_row[j];
        }
    }
    return out;
}

// g * b^T.
DenseMatrix matmul_nt(const DenseMatrix& g, const DenseMatrix& b) {
    DenseMatrix out(g.rows(), b.rows());
    for (std::size_t i = 0; i < g.rows(); ++i) {
        const auto grow = g.row(i);
        if (zero_row(grow)) continue;
        auto dst = out.row(i);
        for (std::size_t k = 0; k < b.rows(); ++k) {
            const auto brow = b.row(k);
            double acc = 0.0;
            for (std::size_t j = 0; j < grow.size(); ++j) acc += grow[j] * brow[j];
            dst[k] = acc;
        }
    }
    return out;
}

void require_same_shape(const char* op, const DenseMatrix& a, const DenseMatrix& b) {
    if (!a.same_shape(b)) {
        throw DimensionError(std::string(op) + ": shape mismatch " + shape_of(a) + " vs " +
                             shape_of(b));
    }
}

double leaky(double x, double slope) { return x > 0.0 ? x : slope * x; }

const char* op_name(OpTag op) {
    static constexpr const char* names[] = {
        "constant",  "parameter", "matmul",     "spmm",          "add",
        "add_row",   "scale",     "hadamard",   "sum",           "slice_rows",
        "concat_cols", "relu",    "leaky_relu", "mask_multiply", "row_softmax",
        "softmax_cross_entropy",  "graph_attention"};
    return names[static_cast<std::size_t>(op)];
}

}  // namespace

NodeId Tape::push(OpTag op, std::vector<std::size_t> parents, DenseMatrix value,
                  std::function<void(Tape&, std::size_t)> backward_fn) {
    if (!all_finite(value)) {
        throw NumericError(std::string("tape: non-finite value produced by ") + op_name(op) +
                           " (node " + std::to_string(nodes_.size()) + ")");
    }
    DiffNode node;
    node.op = op;
    node.requires_grad = op == OpTag::parameter ||
                         std::any_of(parents.begin(), parents.end(),
                                     [this](std::size_t p) { return nodes_[p].requires_grad; });
    node.parents = std::move(parents);
    node.value = std::move(value);
    if (node.requires_grad) node.backward_fn = std::move(backward_fn);
    nodes_.push_back(std::move(node));
    return NodeId{nodes_.size() - 1};
}

DenseMatrix& Tape::grad_slot(std::size_t index) {
    DiffNode& n = nodes_[index];
    if (!n.grad.same_shape(n.value)) {
        n.grad = DenseMatrix(n.value.rows(), n.value.cols());
    }
    return n.grad;
}

const DenseMatrix& Tape::grad(NodeId id) const {
    const DiffNode& n = nodes_.at(id.index);
    if (!backward_done_) throw ContractError("tape: grad requested before backward");
    if (!n.requires_grad) throw ContractError("tape: node does not carry a gradient");
    return n.grad;
}

NodeId Tape::constant(DenseMatrix value) {
    return push(OpTag::constant, {}, std::move(value), nullptr);
}

NodeId Tape::parameter(DenseMatrix value) {
    return push(OpTag::parameter, {}, std::move(value), nullptr);
}

void Tape::backward(NodeId loss) {
    if (loss.index >= nodes_.size()) throw ContractError("backward: unknown loss node");
    const DenseMatrix& lv = nodes_[loss.index].value;
    if (lv.rows() != 1 || lv.cols() != 1) {
        throw ContractError("backward: loss must be 1x1, got " + shape_of(lv));
    }
    if (backward_done_) throw ContractError("backward: tape already differentiated");
    backward_done_ = true;
    if (nodes_[loss.index].requires_grad) {
        grad_slot(loss.index)(0, 0) = 1.0;
        for (std::size_t i = loss.index + 1; i-- > 0;) {
            DiffNode& n = nodes_[i];
            if (!n.requires_grad || n.grad.empty() || !n.backward_fn) continue;
            n.backward_fn(*this, i);
        }
    }
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        if (nodes_[i].requires_grad) grad_slot(i);
    }
}

NodeId Tape::matmul(NodeId a, NodeId b) {
    DenseMatrix v = conceptgcn::matmul(value(a), value(b));
    return push(OpTag::matmul, {a.index, b.index}, std::move(v), [](Tape& t, std::size_t self) {
        const auto& n = t.nodes_[self];
        const std::size_t pa = n.parents[0], pb = n.parents[1];
        if (t.needs(pa)) accumulate(t.grad_slot(pa), matmul_nt(n.grad, t.nodes_[pb].value));
        if (t.needs(pb)) accumulate(t.grad_slot(pb), matmul_tn(t.nodes_[pa].value, n.grad));
    });
}

NodeId Tape::spmm(SharedSparse s, NodeId d) {
    if (!s) throw ContractError("spmm: null sparse operand");
    DenseMatrix v = conceptgcn::spmm(*s, value(d));
    return push(OpTag::spmm, {d.index}, std::move(v), [s](Tape& t, std::size_t self) {
        const auto& n = t.nodes_[self];
        accumulate(t.grad_slot(n.parents[0]), spmm_transposed(*s, n.grad));
    });
}

NodeId Tape::add(NodeId a, NodeId b) {
    require_same_shape("add", value(a), value(b));
    DenseMatrix v = value(a);
    accumulate(v, value(b));
    return push(OpTag::add, {a.index, b.index}, std::move(v), [](Tape& t, std::size_t self) {
        const auto& n = t.nodes_[self];
        for (std::size_t p : n.parents)
            if (t.needs(p)) accumulate(t.grad_slot(p), n.grad);
    });
}

NodeId Tape::add_row(NodeId m, NodeId row) {
    const DenseMatrix& mv = value(m);
    const DenseMatrix& rv = value(row);
    if (rv.rows() != 1 || rv.cols() != mv.cols()) {
        throw DimensionError("add_row: cannot broadcast " + shape_of(rv) + " over " +
                             shape_of(mv));
    }
    DenseMatrix v = mv;
    for (std::size_t i = 0; i < v.rows(); ++i) {
        auto r = v.row(i);
        for (std::size_t j = 0; j < r.size(); ++j) r[j] += rv(0, j);
    }
    return push(OpTag::add_row, {m.index, row.index}, std::move(v), [](Tape& t, std::size_t self) {
        const auto& n = t.nodes_[self];
        const std::size_t pm = n.parents[0], pr = n.parents[1];
        if (t.needs(pm)) accumulate(t.grad_slot(pm), n.grad);
        if (t.needs(pr)) {
            DenseMatrix& g = t.grad_slot(pr);
            for (std::size_t i = 0; i < n.grad.rows(); ++i) {
                const auto r = n.grad.row(i);
                for (std::size_t j = 0; j < r.size(); ++j) g(0, j) += r[j];
            }
        }
    });
}

NodeId Tape::scale(NodeId a, double factor) {
    DenseMatrix v = value(a);
    for (double& x : v.values()) x *= factor;
    return push(OpTag::scale, {a.index}, std::move(v), [factor](Tape& t, std::size_t self) {
        const auto& n = t.nodes_[self];
        DenseMatrix& g = t.grad_slot(n.parents[0]);
        for (std::size_t i = 0; i < g.size(); ++i) g.values()[i] += factor * n.grad.values()[i];
    });
}

NodeId Tape::hadamard(NodeId a, NodeId b) {
    require_same_shape("hadamard", value(a), value(b));
    DenseMatrix v = value(a);
    for (std::size_t i = 0; i < v.size(); ++i) v.values()[i] *= value(b).values()[i];
    return push(OpTag::hadamard, {a.index, b.index}, std::move(v), [](Tape& t, std::size_t self) {
        const auto& n = t.nodes_[self];
        const std::size_t pa = n.parents[0], pb = n.parents[1];
        const auto gv = n.grad.values();
        if (t.needs(pa)) {
            const auto bv = t.nodes_[pb].value.values();
            auto dst = t.grad_slot(pa).values();
            for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += gv[i] * bv[i];
        }
        if (t.needs(pb)) {
            const auto av = t.nodes_[pa].value.values();
            auto dst = t.grad_slot(pb).values();
            for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += gv[i] * av[i];
        }
    });
}

NodeId Tape::sum(NodeId a) {
    double total = 0.0;
    for (double x : value(a).values()) total += x;
    return push(OpTag::sum, {a.index}, DenseMatrix(1, 1, total), [](Tape& t, std::size_t self) {
        const auto& n = t.nodes_[self];
        const double g = n.grad(0, 0);
        for (double& x : t.grad_slot(n.parents[0]).values()) x += g;
    });
}

NodeId Tape::slice_rows(NodeId a, std::size_t begin, std::size_t end) {
    const DenseMatrix& av = value(a);
    if (begin > end || end > av.rows()) {
        throw DimensionError("slice_rows: range [" + std::to_string(begin) + "," +
                             std::to_string(end) + ") out of " + shape_of(av));
    }
    const std::size_t c = av.cols();
    std::vector<double> data(av.values().begin() + static_cast<std::ptrdiff_t>(begin * c),
                             av.values().begin() + static_cast<std::ptrdiff_t>(end * c));
    return push(OpTag::slice_rows, {a.index}, DenseMatrix(end - begin, c, std::move(data)),
                [begin](Tape& t, std::size_t self) {
                    const auto& n = t.nodes_[self];
                    DenseMatrix& g = t.grad_slot(n.parents[0]);
                    const std::size_t c = g.cols();
                    for (std::size_t i = 0; i < n.grad.size(); ++i)
                        g.values()[begin * c + i] += n.grad.values()[i];
                });
}

NodeId Tape::concat_cols(std::span<const NodeId> parts) {
    if (parts.empty()) throw ContractError("concat_cols: no parts");
    const std::size_t rows = value(parts.front()).rows();
    std::size_t cols = 0;
    std::vector<std::size_t> parents;
    for (NodeId p : parts) {
        if (value(p).rows() != rows) {
            throw DimensionError("concat_cols: row mismatch " + shape_of(value(parts.front())) +
                                 " vs " + shape_of(value(p)));
        }
        cols += value(p).cols();
        parents.push_back(p.index);
    }
    DenseMatrix v(rows, cols);
    std::size_t offset = 0;
    for (NodeId p : parts) {
        const DenseMatrix& pv = value(p);
        for (std::size_t i = 0; i < rows; ++i)
            std::copy(pv.row(i).begin(), pv.row(i).end(), v.row(i).begin() + offset);
        offset += pv.cols();
    }
    return push(OpTag::concat_cols, std::move(parents), std::move(v), [](Tape& t, std::size_t self) {
        const auto& n = t.nodes_[self];
        std::size_t offset = 0;
        for (std::size_t p : n.parents) {
            const std::size_t w = t.nodes_[p].value.cols();
            if (t.needs(p)) {
                DenseMatrix& g = t.grad_slot(p);
                for (std::size_t i = 0; i < g.rows(); ++i) {
                    const auto src = n.grad.row(i);
                    auto dst = g.row(i);
                    for (std::size_t j = 0; j < w; ++j) dst[j] += src[offset + j];
                }
            }
            offset += w;
        }
    });
}

NodeId Tape::relu(NodeId a) {
    DenseMatrix v = value(a);
    for (double& x : v.values()) x = x > 0.0 ? x : 0.0;
    return push(OpTag::relu, {a.index}, std::move(v), [](Tape& t, std::size_t self) {
        const auto& n = t.nodes_[self];
        const auto in = t.nodes_[n.parents[0]].value.values();
        auto dst = t.grad_slot(n.parents[0]).values();
        for (std::size_t i = 0; i < dst.size(); ++i)
            if (in[i] > 0.0) dst[i] += n.grad.values()[i];
    });
}

NodeId Tape::leaky_relu(NodeId a, double negative_slope) {
    DenseMatrix v = value(a);
    for (double& x : v.values()) x = leaky(x, negative_slope);
    return push(OpTag::leaky_relu, {a.index}, std::move(v),
                [negative_slope](Tape& t, std::size_t self) {
                    const auto& n = t.nodes_[self];
                    const auto in = t.nodes_[n.parents[0]].value.values();
                    auto dst = t.grad_slot(n.parents[0]).values();
                    for (std::size_t i = 0; i < dst.size(); ++i)
                        dst[i] += n.grad.values()[i] * (in[i] > 0.0 ? 1.0 : negative_slope);
                });
}

NodeId Tape::mask_multiply(NodeId a, DenseMatrix mask) {
    require_same_shape("mask_multiply", value(a), mask);
    DenseMatrix v = value(a);
    for (std::size_t i = 0; i < v.size(); ++i) v.values()[i] *= mask.values()[i];
    return push(OpTag::mask_multiply, {a.index}, std::move(v),
                [mask = std::move(mask)](Tape& t, std::size_t self) {
                    const auto& n = t.nodes_[self];
                    auto dst = t.grad_slot(n.parents[0]).values();
                    for (std::size_t i = 0; i < dst.size(); ++i)
                        dst[i] += n.grad.values()[i] * mask.values()[i];
                });
}

NodeId Tape::row_softmax(NodeId a) {
    DenseMatrix v = value(a);
    for (std::size_t i = 0; i < v.rows(); ++i) {
        auto r = v.row(i);
        if (r.empty()) continue;
        const double mx = *std::max_element(r.begin(), r.end());
        double total = 0.0;
        for (double& x : r) {
            x = std::exp(x - mx);
            total += x;
        }
        for (double& x : r) x /= total;
    }
    return push(OpTag::row_softmax, {a.index}, std::move(v), [](Tape& t, std::size_t self) {
        const auto& n = t.nodes_[self];
        DenseMatrix& g = t.grad_slot(n.parents[0]);
        for (std::size_t i = 0; i < g.rows(); ++i) {
            const auto y = n.value.row(i);
            const auto gy = n.grad.row(i);
            double dot = 0.0;
            for (std::size_t j = 0; j < y.size(); ++j) dot += gy[j] * y[j];
            auto dst = g.row(i);
            for (std::size_t j = 0; j < y.size(); ++j) dst[j] += y[j] * (gy[j] - dot);
        }
    });
}

NodeId Tape::softmax_cross_entropy(NodeId logits, std::span<const int> labels,
                                   std::span<const std::size_t> rows) {
    const DenseMatrix& lv = value(logits);
    if (rows.empty()) throw ContractError("softmax_cross_entropy: empty mask");
    if (labels.size() != lv.rows()) {
        throw DimensionError("softmax_cross_entropy: " + std::to_string(labels.size()) +
                             " labels for logits " + shape_of(lv));
    }
    const std::size_t c = lv.cols();
    // Softmax of each selected row, kept for the backward pass.
    DenseMatrix probs(rows.size(), c);
    double total = 0.0;
    for (std::size_t k = 0; k < rows.size(); ++k) {
        const std::size_t r = rows[k];
        if (r >= lv.rows()) throw DimensionError("softmax_cross_entropy: row out of range");
        const int y = labels[r];
        if (y < 0 || static_cast<std::size_t>(y) >= c) {
            throw ContractError("softmax_cross_entropy: label " + std::to_string(y) +
                                " outside [0," + std::to_string(c) + ")");
        }
        const auto in = lv.row(r);
        const double mx = *std::max_element(in.begin(), in.end());
        double z = 0.0;
        for (double x : in) z += std::exp(x - mx);
        const double log_z = std::log(z);
        auto p = probs.row(k);
        for (std::size_t j = 0; j < c; ++j) p[j] = std::exp(in[j] - mx - log_z);
        total += -(in[static_cast<std::size_t>(y)] - mx - log_z);
    }
    const double count = static_cast<double>(rows.size());
    std::vector<std::size_t> row_copy(rows.begin(), rows.end());
    std::vector<int> label_copy;
    label_copy.reserve(rows.size());
    for (std::size_t r : rows) label_copy.push_back(labels[r]);
    return push(OpTag::softmax_cross_entropy, {logits.index}, DenseMatrix(1, 1, total / count),
                [probs = std::move(probs), row_copy = std::move(row_copy),
                 label_copy = std::move(label_copy), count](Tape& t, std::size_t self) {
                    const auto& n = t.nodes_[self];
                    const double g = n.grad(0, 0) / count;
                    DenseMatrix& dst = t.grad_slot(n.parents[0]);
                    for (std::size_t k = 0; k < row_copy.size(); ++k) {
                        auto out = dst.row(row_copy[k]);
                        const auto p = probs.row(k);
                        for (std::size_t j = 0; j < p.size(); ++j) out[j] += g * p[j];
                        out[static_cast<std::size_t>(label_copy[k])] -= g;
                    }
                });
}

std::vector<double> attention_coefficients(const SparseMatrixCSR& structure,
                                           const DenseMatrix& score_l,
                                           const DenseMatrix& score_r, double negative_slope) {
    if (score_l.rows() != structure.rows() || score_l.cols() != 1 ||
        score_r.rows() != structure.cols() || score_r.cols() != 1) {
        throw DimensionError("attention: scores " + shape_of(score_l) + ", " +
                             shape_of(score_r) + " do not match structure " +
                             shape_of(structure));
    }
    std::vector<double> alpha(structure.nnz());
    const auto rp = structure.row_ptr();
    const auto ci = structure.col_idx();
    for (std::size_t i = 0; i < structure.rows(); ++i) {
        if (rp[i] == rp[i + 1]) continue;
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t k = rp[i]; k < rp[i + 1]; ++k) {
            alpha[k] = leaky(score_l(i, 0) + score_r(ci[k], 0), negative_slope);
            mx = std::max(mx, alpha[k]);
        }
        double total = 0.0;
        for (std::size_t k = rp[i]; k < rp[i + 1]; ++k) {
            alpha[k] = std::exp(alpha[k] - mx);
            total += alpha[k];
        }
        for (std::size_t k = rp[i]; k < rp[i + 1]; ++k) alpha[k] /= total;
    }
    return alpha;
}

NodeId Tape::graph_attention(SharedSparse structure, NodeId z, NodeId score_l, NodeId score_r,
                             double negative_slope) {
    if (!structure) throw ContractError("graph_attention: null structure");
    const DenseMatrix& zv = value(z);
    if (zv.rows() != structure->cols()) {
        throw DimensionError("graph_attention: features " + shape_of(zv) +
                             " do not match structure " + shape_of(*structure));
    }
    std::vector<double> alpha =
        attention_coefficients(*structure, value(score_l), value(score_r), negative_slope);
    DenseMatrix out(structure->rows(), zv.cols());
    const auto rp = structure->row_ptr();
    const auto ci = structure->col_idx();
    for (std::size_t i = 0; i < structure->rows(); ++i) {
        auto dst = out.row(i);
        for (std::size_t k = rp[i]; k < rp[i + 1]; ++k) {
            const auto src = zv.row(ci[k]);
            for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += alpha[k] * src[j];
        }
    }
    return push(
        OpTag::graph_attention, {z.index, score_l.index, score_r.index}, std::move(out),
        [structure, alpha = std::move(alpha), negative_slope](Tape& t, std::size_t self) {
            const auto& n = t.nodes_[self];
            const std::size_t pz = n.parents[0], pl = n.parents[1], pr = n.parents[2];
            const DenseMatrix& zv = t.nodes_[pz].value;
            const DenseMatrix& sl = t.nodes_[pl].value;
            const DenseMatrix& sr = t.nodes_[pr].value;
            const bool want_z = t.needs(pz), want_l = t.needs(pl), want_r = t.needs(pr);
            DenseMatrix* dz = want_z ? &t.grad_slot(pz) : nullptr;
            DenseMatrix* dl = want_l ? &t.grad_slot(pl) : nullptr;
            DenseMatrix* dr = want_r ? &t.grad_slot(pr) : nullptr;
            const auto rp = structure->row_ptr();
            const auto ci = structure->col_idx();
            std::vector<double> dalpha;
            for (std::size_t i = 0; i < structure->rows(); ++i) {
                const auto g = n.grad.row(i);
                const std::size_t begin = rp[i], end = rp[i + 1];
                dalpha.assign(end - begin, 0.0);
                double weighted = 0.0;
                for (std::size_t k = begin; k < end; ++k) {
                    const auto zj = zv.row(ci[k]);
                    double dot = 0.0;
                    for (std::size_t j = 0; j < g.size(); ++j) dot += g[j] * zj[j];
                    dalpha[k - begin] = dot;
                    weighted += alpha[k] * dot;
                    if (dz) {
                        auto dst = dz->row(ci[k]);
                        for (std::size_t j = 0; j < g.size(); ++j) dst[j] += alpha[k] * g[j];
                    }
                }
                if (!dl && !dr) continue;
                for (std::size_t k = begin; k < end; ++k) {
                    const double de = alpha[k] * (dalpha[k - begin] - weighted);
                    const double pre = sl(i, 0) + sr(ci[k], 0);
                    const double dpre = de * (pre > 0.0 ? 1.0 : negative_slope);
                    if (dl) (*dl)(i, 0) += dpre;
                    if (dr) (*dr)(ci[k], 0) += dpre;
                }
            }
        });
}

}  // namespace conceptgcn
