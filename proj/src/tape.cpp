#include "cbsa/tape.hpp"

#include <cmath>

#include "cbsa/error.hpp"

namespace cbsa {

Var Tape::push(Tensor value, Op op, int p0, int p1, int p2) {
    Node n;
    n.value = std::move(value);
    if (recording_) {
        n.op = op;
        n.p0 = p0;
        n.p1 = p1;
        n.p2 = p2;
        n.needs_grad = (p0 >= 0 && nodes_[p0].needs_grad) ||
                       (p1 >= 0 && nodes_[p1].needs_grad) ||
                       (p2 >= 0 && nodes_[p2].needs_grad);
    }
    nodes_.push_back(std::move(n));
    return Var{static_cast<int>(nodes_.size()) - 1};
}

Var Tape::leaf(Tensor value, bool requires_grad) {
    Var v = push(std::move(value), Op::Leaf);
    nodes_[v.id].needs_grad = recording_ && requires_grad;
    return v;
}

Var Tape::matmul(Var a, Var b) {
    return push(cbsa::matmul(value(a), value(b)), Op::MatMul, a.id, b.id);
}

Var Tape::transpose(Var a) {
    return push(cbsa::transpose(value(a)), Op::Transpose, a.id);
}

Var Tape::add(Var a, Var b) {
    return push(cbsa::add(value(a), value(b)), Op::Add, a.id, b.id);
}

Var Tape::sub(Var a, Var b) {
    return push(cbsa::sub(value(a), value(b)), Op::Sub, a.id, b.id);
}

Var Tape::mul(Var a, Var b) {
    return push(cbsa::mul(value(a), value(b)), Op::Mul, a.id, b.id);
}

Var Tape::add_rowvec(Var a, Var v) {
    return push(cbsa::add_rowvec(value(a), value(v)), Op::AddRowVec, a.id, v.id);
}

Var Tape::affine(Var a, double scale, double shift) {
    Var v = push(cbsa::affine(value(a), scale, shift), Op::Affine, a.id);
    nodes_[v.id].d0 = scale;
    nodes_[v.id].d1 = shift;
    return v;
}

Var Tape::sigmoid(Var a) {
    return push(cbsa::sigmoid(value(a)), Op::Sigmoid, a.id);
}

Var Tape::tanh(Var a) {
    return push(cbsa::tanh_t(value(a)), Op::Tanh, a.id);
}

Var Tape::log(Var a) {
    return push(cbsa::log_t(value(a)), Op::Log, a.id);
}

Var Tape::pow(Var a, double exponent) {
    Var v = push(cbsa::pow_t(value(a), exponent), Op::PowConst, a.id);
    nodes_[v.id].d0 = exponent;
    return v;
}

Var Tape::clamp(Var a, double lo, double hi) {
    Var v = push(cbsa::clamp(value(a), lo, hi), Op::Clamp, a.id);
    nodes_[v.id].d0 = lo;
    nodes_[v.id].d1 = hi;
    return v;
}

Var Tape::softmax_rows(Var a, double temperature) {
    Var v = push(cbsa::softmax_rows(value(a), temperature), Op::SoftmaxRows, a.id);
    nodes_[v.id].d0 = temperature;
    return v;
}

Var Tape::l2_normalize_rows(Var a) {
    return push(cbsa::l2_normalize_rows(value(a)), Op::L2NormRows, a.id);
}

Var Tape::layer_norm(Var x, Var gain, Var bias, double eps) {
    Var v = push(cbsa::layer_norm_rows(value(x), value(gain), value(bias), eps),
                 Op::LayerNorm, x.id, gain.id, bias.id);
    nodes_[v.id].d0 = eps;
    return v;
}

Var Tape::gather_rows(Var a, std::vector<int> idx) {
    Var v = push(cbsa::gather_rows(value(a), idx), Op::GatherRows, a.id);
    nodes_[v.id].aux = std::move(idx);
    return v;
}

Var Tape::slice_rows(Var a, int r0, int r1) {
    if (r0 < 0 || r1 > value(a).rows() || r0 >= r1)
        throw ShapeError("slice_rows: bad range [" + std::to_string(r0) + "," +
                         std::to_string(r1) + ") for " + value(a).shape_str());
    std::vector<int> idx(static_cast<std::size_t>(r1 - r0));
    for (int i = r0; i < r1; ++i) idx[i - r0] = i;
    return gather_rows(a, std::move(idx));
}

Var Tape::slice_cols(Var a, int c0, int c1) {
    Var v = push(cbsa::slice_cols(value(a), c0, c1), Op::SliceCols, a.id);
    nodes_[v.id].d0 = c0;
    return v;
}

Var Tape::concat_rows(Var a, Var b) {
    return push(cbsa::concat_rows(value(a), value(b)), Op::ConcatRows, a.id, b.id);
}

Var Tape::concat_cols(Var a, Var b) {
    return push(cbsa::concat_cols(value(a), value(b)), Op::ConcatCols, a.id, b.id);
}

Var Tape::row_sums(Var a) {
    return push(cbsa::row_sums(value(a)), Op::RowSums, a.id);
}

Var Tape::sum(Var a) { return push(cbsa::sum_t(value(a)), Op::Sum, a.id); }

Var Tape::mean(Var a) { return push(cbsa::mean_t(value(a)), Op::Mean, a.id); }

Var Tape::pick_per_row(Var a, std::vector<int> idx) {
    Var v = push(cbsa::pick_per_row(value(a), idx), Op::PickPerRow, a.id);
    nodes_[v.id].aux = std::move(idx);
    return v;
}

Tensor& Tape::grad_buf(int id) {
    Node& n = nodes_[id];
    if (n.grad.empty()) n.grad = Tensor(n.value.shape());
    return n.grad;
}

void Tape::backward(Var root) {
    if (!recording_)
        throw ContractError("backward: tape is not recording");
    if (!root.valid() || root.id >= static_cast<int>(nodes_.size()))
        throw ContractError("backward: invalid root");
    if (nodes_[root.id].value.size() != 1)
        throw ContractError("backward: root must be scalar, got shape " +
                            nodes_[root.id].value.shape_str());
    if (!nodes_[root.id].needs_grad) return;  // no differentiable inputs

    grad_buf(root.id)[0] += 1.0;
    for (int id = root.id; id >= 0; --id) {
        const Node& n = nodes_[id];
        if (!n.needs_grad || n.grad.empty() || n.op == Op::Leaf) continue;
        accumulate(n);
    }
}

void Tape::accumulate(const Node& n) {
    const Tensor& g = n.grad;
    const Tensor& y = n.value;
    auto want = [&](int pid) { return pid >= 0 && nodes_[pid].needs_grad; };

    switch (n.op) {
        case Op::Leaf:
            break;
        case Op::MatMul: {
            const Tensor& a = nodes_[n.p0].value;
            const Tensor& b = nodes_[n.p1].value;
            if (want(n.p0)) {
                // ga += g . b^T
                Tensor& ga = grad_buf(n.p0);
                const int m = a.rows(), k = a.cols(), nn = b.cols();
                for (int i = 0; i < m; ++i)
                    for (int kk = 0; kk < k; ++kk) {
                        double s = 0.0;
                        for (int j = 0; j < nn; ++j) s += g.at(i, j) * b.at(kk, j);
                        ga.at(i, kk) += s;
                    }
            }
            if (want(n.p1)) {
                // gb += a^T . g
                Tensor& gb = grad_buf(n.p1);
                const int m = a.rows(), k = a.cols(), nn = b.cols();
                for (int i = 0; i < m; ++i) {
                    for (int kk = 0; kk < k; ++kk) {
                        const double av = a.at(i, kk);
                        if (av == 0.0) continue;
                        for (int j = 0; j < nn; ++j) gb.at(kk, j) += av * g.at(i, j);
                    }
                }
            }
            break;
        }
        case Op::Transpose: {
            if (want(n.p0)) {
                Tensor& ga = grad_buf(n.p0);
                for (int i = 0; i < y.rows(); ++i)
                    for (int j = 0; j < y.cols(); ++j) ga.at(j, i) += g.at(i, j);
            }
            break;
        }
        case Op::Add:
            if (want(n.p0)) {
                Tensor& ga = grad_buf(n.p0);
                for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
            }
            if (want(n.p1)) {
                Tensor& gb = grad_buf(n.p1);
                for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
            }
            break;
        case Op::Sub:
            if (want(n.p0)) {
                Tensor& ga = grad_buf(n.p0);
                for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
            }
            if (want(n.p1)) {
                Tensor& gb = grad_buf(n.p1);
                for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
            }
            break;
        case Op::Mul: {
            const Tensor& a = nodes_[n.p0].value;
            const Tensor& b = nodes_[n.p1].value;
            if (want(n.p0)) {
                Tensor& ga = grad_buf(n.p0);
                for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * b[i];
            }
            if (want(n.p1)) {
                Tensor& gb = grad_buf(n.p1);
                for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * a[i];
            }
            break;
        }
        case Op::AddRowVec: {
            if (want(n.p0)) {
                Tensor& ga = grad_buf(n.p0);
                for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
            }
            if (want(n.p1)) {
                Tensor& gv = grad_buf(n.p1);
                for (int i = 0; i < g.rows(); ++i)
                    for (int j = 0; j < g.cols(); ++j) gv[j] += g.at(i, j);
            }
            break;
        }
        case Op::Affine:
            if (want(n.p0)) {
                Tensor& ga = grad_buf(n.p0);
                for (std::size_t i = 0; i < g.size(); ++i) ga[i] += n.d0 * g[i];
            }
            break;
        case Op::Sigmoid:
            if (want(n.p0)) {
                Tensor& ga = grad_buf(n.p0);
                for (std::size_t i = 0; i < g.size(); ++i)
                    ga[i] += g[i] * y[i] * (1.0 - y[i]);
            }
            break;
        case Op::Tanh:
            if (want(n.p0)) {
                Tensor& ga = grad_buf(n.p0);
                for (std::size_t i = 0; i < g.size(); ++i)
                    ga[i] += g[i] * (1.0 - y[i] * y[i]);
            }
            break;
        case Op::Log:
            if (want(n.p0)) {
                const Tensor& a = nodes_[n.p0].value;
                Tensor& ga = grad_buf(n.p0);
                for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] / a[i];
            }
            break;
        case Op::PowConst:
            if (want(n.p0)) {
                const Tensor& a = nodes_[n.p0].value;
                const double e = n.d0;
                Tensor& ga = grad_buf(n.p0);
                if (e != 0.0) {
                    for (std::size_t i = 0; i < g.size(); ++i) {
                        double d;
                        if (a[i] == 0.0) {
                            // One-sided subgradient at the domain edge.
                            d = (e == 1.0) ? 1.0 : 0.0;
                        } else {
                            d = e * std::pow(a[i], e - 1.0);
                        }
                        ga[i] += g[i] * d;
                    }
                }
            }
            break;
        case Op::Clamp:
            if (want(n.p0)) {
                const Tensor& a = nodes_[n.p0].value;
                Tensor& ga = grad_buf(n.p0);
                for (std::size_t i = 0; i < g.size(); ++i)
                    if (a[i] >= n.d0 && a[i] <= n.d1) ga[i] += g[i];
            }
            break;
        case Op::SoftmaxRows:
            if (want(n.p0)) {
                Tensor& ga = grad_buf(n.p0);
                const double inv_t = 1.0 / n.d0;
                for (int i = 0; i < y.rows(); ++i) {
                    double dotv = 0.0;
                    for (int j = 0; j < y.cols(); ++j) dotv += g.at(i, j) * y.at(i, j);
                    for (int j = 0; j < y.cols(); ++j)
                        ga.at(i, j) += inv_t * y.at(i, j) * (g.at(i, j) - dotv);
                }
            }
            break;
        case Op::L2NormRows:
            if (want(n.p0)) {
                const Tensor& a = nodes_[n.p0].value;
                Tensor& ga = grad_buf(n.p0);
                for (int i = 0; i < y.rows(); ++i) {
                    const double norm = row_norm(a, i);
                    double dotv = 0.0;
                    for (int j = 0; j < y.cols(); ++j) dotv += g.at(i, j) * y.at(i, j);
                    for (int j = 0; j < y.cols(); ++j)
                        ga.at(i, j) += (g.at(i, j) - y.at(i, j) * dotv) / norm;
                }
            }
            break;
        case Op::LayerNorm: {
            const Tensor& x = nodes_[n.p0].value;
            const Tensor& gain = nodes_[n.p1].value;
            const int m = x.rows(), d = x.cols();
            const double eps = n.d0;
            for (int i = 0; i < m; ++i) {
                double mean = 0.0;
                for (int j = 0; j < d; ++j) mean += x.at(i, j);
                mean /= d;
                double var = 0.0;
                for (int j = 0; j < d; ++j) {
                    const double dv = x.at(i, j) - mean;
                    var += dv * dv;
                }
                var /= d;
                const double inv = 1.0 / std::sqrt(var + eps);
                double mean_dxh = 0.0, mean_dxh_xh = 0.0;
                for (int j = 0; j < d; ++j) {
                    const double xh = (x.at(i, j) - mean) * inv;
                    const double dxh = g.at(i, j) * gain[j];
                    mean_dxh += dxh;
                    mean_dxh_xh += dxh * xh;
                }
                mean_dxh /= d;
                mean_dxh_xh /= d;
                if (want(n.p0)) {
                    Tensor& gx = grad_buf(n.p0);
                    for (int j = 0; j < d; ++j) {
                        const double xh = (x.at(i, j) - mean) * inv;
                        const double dxh = g.at(i, j) * gain[j];
                        gx.at(i, j) += inv * (dxh - mean_dxh - xh * mean_dxh_xh);
                    }
                }
                if (want(n.p1)) {
                    Tensor& gg = grad_buf(n.p1);
                    for (int j = 0; j < d; ++j)
                        gg[j] += g.at(i, j) * (x.at(i, j) - mean) * inv;
                }
                if (want(n.p2)) {
                    Tensor& gb = grad_buf(n.p2);
                    for (int j = 0; j < d; ++j) gb[j] += g.at(i, j);
                }
            }
            break;
        }
        case Op::GatherRows:
            if (want(n.p0)) {
                Tensor& ga = grad_buf(n.p0);
                for (std::size_t r = 0; r < n.aux.size(); ++r)
                    for (int j = 0; j < g.cols(); ++j)
                        ga.at(n.aux[r], j) += g.at(static_cast<int>(r), j);
            }
            break;
        case Op::SliceCols:
            if (want(n.p0)) {
                Tensor& ga = grad_buf(n.p0);
                const int c0 = static_cast<int>(n.d0);
                for (int i = 0; i < g.rows(); ++i)
                    for (int j = 0; j < g.cols(); ++j) ga.at(i, c0 + j) += g.at(i, j);
            }
            break;
        case Op::ConcatRows: {
            const int ra = nodes_[n.p0].value.rows();
            if (want(n.p0)) {
                Tensor& ga = grad_buf(n.p0);
                for (int i = 0; i < ra; ++i)
                    for (int j = 0; j < g.cols(); ++j) ga.at(i, j) += g.at(i, j);
            }
            if (want(n.p1)) {
                Tensor& gb = grad_buf(n.p1);
                for (int i = ra; i < g.rows(); ++i)
                    for (int j = 0; j < g.cols(); ++j) gb.at(i - ra, j) += g.at(i, j);
            }
            break;
        }
        case Op::ConcatCols: {
            const int ca = nodes_[n.p0].value.cols();
            if (want(n.p0)) {
                Tensor& ga = grad_buf(n.p0);
                for (int i = 0; i < g.rows(); ++i)
                    for (int j = 0; j < ca; ++j) ga.at(i, j) += g.at(i, j);
            }
            if (want(n.p1)) {
                Tensor& gb = grad_buf(n.p1);
                for (int i = 0; i < g.rows(); ++i)
                    for (int j = ca; j < g.cols(); ++j) gb.at(i, j - ca) += g.at(i, j);
            }
            break;
        }
        case Op::RowSums:
            if (want(n.p0)) {
                Tensor& ga = grad_buf(n.p0);
                for (int i = 0; i < ga.rows(); ++i)
                    for (int j = 0; j < ga.cols(); ++j) ga.at(i, j) += g.at(i, 0);
            }
            break;
        case Op::Sum:
            if (want(n.p0)) {
                Tensor& ga = grad_buf(n.p0);
                const double gv = g[0];
                for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += gv;
            }
            break;
        case Op::Mean:
            if (want(n.p0)) {
                Tensor& ga = grad_buf(n.p0);
                const double gv = g[0] / static_cast<double>(ga.size());
                for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += gv;
            }
            break;
        case Op::PickPerRow:
            if (want(n.p0)) {
                Tensor& ga = grad_buf(n.p0);
                for (int i = 0; i < y.rows(); ++i) ga.at(i, n.aux[i]) += g.at(i, 0);
            }
            break;
    }
}

void Tape::reset() { nodes_.clear(); }

Var Graph::use(Param& p) {
    auto it = bound_.find(&p);
    if (it != bound_.end()) return it->second;
    Var v = tape_.leaf(p.value, p.trainable);
    bound_.emplace(&p, v);
    if (p.trainable && tape_.recording()) grad_targets_.emplace_back(&p, v);
    return v;
}

Var Graph::shared_constant(const Tensor& t) {
    auto it = bound_.find(&t);
    if (it != bound_.end()) return it->second;
    Var v = tape_.leaf(t, false);
    bound_.emplace(&t, v);
    return v;
}

void Graph::backward(Var root) {
    tape_.backward(root);
    for (auto& [param, var] : grad_targets_) {
        const Tensor& g = tape_.grad(var);
        if (g.empty()) continue;  // parameter not reachable from this root
        for (std::size_t i = 0; i < g.size(); ++i) param->grad[i] += g[i];
    }
}

}  // namespace cbsa
