#include "layl/tape.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "layl/errors.hpp"
#include "layl/scalar_math.hpp"

namespace layl {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

namespace {

// pre * n * post decomposition around `axis`.
void axis_split(const std::vector<int>& shape, int axis, int64_t& pre, int64_t& n, int64_t& post) {
    pre = 1;
    post = 1;
    for (int i = 0; i < axis; ++i) pre *= shape[size_t(i)];
    n = shape[size_t(axis)];
    for (size_t i = size_t(axis) + 1; i < shape.size(); ++i) post *= shape[i];
}

std::vector<int> drop_axis(const std::vector<int>& shape, int axis, bool keepdims) {
    std::vector<int> out = shape;
    if (keepdims)
        out[size_t(axis)] = 1;
    else
        out.erase(out.begin() + axis);
    if (out.empty()) out.push_back(1);
    return out;
}

}  // namespace

int Tape::push(Node n) {
    nodes_.push_back(std::move(n));
    return int(nodes_.size()) - 1;
}

const Tape::Node& Tape::node(Val v) const {
    if (!v.valid() || v.id >= int(nodes_.size())) throw ContractError("invalid tape handle");
    return nodes_[size_t(v.id)];
}

const Tensor& Tape::value(Val v) const { return node(v).value; }

double Tape::scalar_value(Val v) const {
    const Tensor& t = value(v);
    if (t.numel() != 1) throw ContractError("scalar_value on non-scalar " + t.shape_str());
    return t.data[0];
}

const Tensor& Tape::adjoint(Val v) const {
    const Node& n = node(v);
    if (!n.adj_set) throw ContractError("adjoint requested before backward reached this value");
    return n.adj;
}

bool Tape::adjoint_set(Val v) const { return node(v).adj_set; }

size_t Tape::approx_bytes() const {
    size_t bytes = 0;
    for (const Node& n : nodes_)
        bytes += (n.value.data.size() + n.adj.data.size()) * sizeof(double);
    return bytes;
}

void Tape::clear() { nodes_.clear(); }

void Tape::check_same_shape(const Tensor& a, const Tensor& b, const char* op) const {
    if (!a.same_shape(b))
        throw ContractError(std::string(op) + ": shape mismatch " + a.shape_str() + " vs " +
                            b.shape_str());
}

Val Tape::leaf(int group_id) {
    if (!params_) throw ContractError("leaf() requires a bound ParamStore");
    Node n;
    n.op = OpKind::Leaf;
    n.group = group_id;
    n.value = params_->value_tensor(group_id);
    return {push(std::move(n))};
}

Val Tape::constant(Tensor t) {
    Node n;
    n.op = OpKind::Const;
    n.value = std::move(t);
    return {push(std::move(n))};
}

#define LAYL_BINOP(NAME, KIND, EXPR)                                  \
    Val Tape::NAME(Val a, Val b) {                                    \
        const Tensor& ta = value(a);                                  \
        const Tensor& tb = value(b);                                  \
        check_same_shape(ta, tb, #NAME);                              \
        Node n;                                                       \
        n.op = OpKind::KIND;                                          \
        n.a = a.id;                                                   \
        n.b = b.id;                                                   \
        n.value = Tensor(ta.shape);                                   \
        for (int64_t i = 0; i < ta.numel(); ++i) {                    \
            double x = ta.at(i), y = tb.at(i);                        \
            (void)x;                                                  \
            (void)y;                                                  \
            n.value.at(i) = (EXPR);                                   \
        }                                                             \
        return {push(std::move(n))};                                  \
    }

LAYL_BINOP(add, Add, x + y)
LAYL_BINOP(sub, Sub, x - y)
LAYL_BINOP(mul, Mul, x* y)
LAYL_BINOP(div, Div, x / y)
LAYL_BINOP(max, Max, (x >= y) ? x : y)
LAYL_BINOP(min, Min, (x <= y) ? x : y)
#undef LAYL_BINOP

#define LAYL_UNOP(NAME, KIND, EXPR)               \
    Val Tape::NAME(Val a) {                       \
        const Tensor& ta = value(a);              \
        Node n;                                   \
        n.op = OpKind::KIND;                      \
        n.a = a.id;                               \
        n.value = Tensor(ta.shape);               \
        for (int64_t i = 0; i < ta.numel(); ++i) { \
            double x = ta.at(i);                  \
            n.value.at(i) = (EXPR);               \
        }                                         \
        return {push(std::move(n))};              \
    }

LAYL_UNOP(neg, Neg, -x)
LAYL_UNOP(exp, Exp, std::exp(x))
LAYL_UNOP(sigmoid, Sigmoid, stable_sigmoid(x))
LAYL_UNOP(softplus, Softplus, stable_softplus(x))
LAYL_UNOP(sin, Sin, std::sin(x))
LAYL_UNOP(cos, Cos, std::cos(x))
#undef LAYL_UNOP

Val Tape::log(Val a) {
    const Tensor& ta = value(a);
    Node n;
    n.op = OpKind::Log;
    n.a = a.id;
    n.value = Tensor(ta.shape);
    for (int64_t i = 0; i < ta.numel(); ++i) {
        if (ta.at(i) <= 0.0) throw DomainError("log of non-positive input");
        n.value.at(i) = std::log(ta.at(i));
    }
    return {push(std::move(n))};
}

Val Tape::sqrt(Val a) {
    const Tensor& ta = value(a);
    Node n;
    n.op = OpKind::Sqrt;
    n.a = a.id;
    n.value = Tensor(ta.shape);
    for (int64_t i = 0; i < ta.numel(); ++i) {
        if (ta.at(i) < 0.0) throw DomainError("sqrt of negative input");
        n.value.at(i) = std::sqrt(ta.at(i));
    }
    return {push(std::move(n))};
}

Val Tape::power(Val a, double exponent) {
    const Tensor& ta = value(a);
    bool integral = exponent == std::floor(exponent);
    Node n;
    n.op = OpKind::Power;
    n.a = a.id;
    n.attr = exponent;
    n.value = Tensor(ta.shape);
    for (int64_t i = 0; i < ta.numel(); ++i) {
        if (ta.at(i) < 0.0 && !integral)
            throw DomainError("power of negative input with non-integral exponent");
        n.value.at(i) = std::pow(ta.at(i), exponent);
    }
    return {push(std::move(n))};
}

Val Tape::max_reduce(Val a) {
    const Tensor& ta = value(a);
    Node n;
    n.op = OpKind::MaxReduce;
    n.a = a.id;
    int64_t best = 0;
    for (int64_t i = 1; i < ta.numel(); ++i)
        if (ta.at(i) > ta.at(best)) best = i;
    n.argext = best;
    n.value = Tensor::scalar(ta.at(best));
    return {push(std::move(n))};
}

Val Tape::min_reduce(Val a) {
    const Tensor& ta = value(a);
    Node n;
    n.op = OpKind::MinReduce;
    n.a = a.id;
    int64_t best = 0;
    for (int64_t i = 1; i < ta.numel(); ++i)
        if (ta.at(i) < ta.at(best)) best = i;
    n.argext = best;
    n.value = Tensor::scalar(ta.at(best));
    return {push(std::move(n))};
}

Val Tape::sum(Val a) {
    const Tensor& ta = value(a);
    double s = 0.0;
    for (double x : ta.data) s += x;
    Node n;
    n.op = OpKind::Sum;
    n.a = a.id;
    n.value = Tensor::scalar(s);
    return {push(std::move(n))};
}

Val Tape::mean(Val a) {
    const Tensor& ta = value(a);
    double s = 0.0;
    for (double x : ta.data) s += x;
    Node n;
    n.op = OpKind::Mean;
    n.a = a.id;
    n.value = Tensor::scalar(s / double(ta.numel()));
    return {push(std::move(n))};
}

Val Tape::sum_axis(Val a, int axis, bool keepdims) {
    const Tensor& ta = value(a);
    if (axis < 0 || axis >= ta.rank()) throw ContractError("sum_axis: axis out of range");
    int64_t pre, cnt, post;
    axis_split(ta.shape, axis, pre, cnt, post);
    Node n;
    n.op = OpKind::SumAxis;
    n.a = a.id;
    n.axis = axis;
    n.keepdims = keepdims;
    n.value = Tensor(drop_axis(ta.shape, axis, keepdims));
    for (int64_t p = 0; p < pre; ++p)
        for (int64_t q = 0; q < post; ++q) {
            double s = 0.0;
            for (int64_t i = 0; i < cnt; ++i) s += ta.at((p * cnt + i) * post + q);
            n.value.at(p * post + q) = s;
        }
    return {push(std::move(n))};
}

Val Tape::mean_axis(Val a, int axis, bool keepdims) {
    const Tensor& ta = value(a);
    if (axis < 0 || axis >= ta.rank()) throw ContractError("mean_axis: axis out of range");
    int64_t pre, cnt, post;
    axis_split(ta.shape, axis, pre, cnt, post);
    Node n;
    n.op = OpKind::MeanAxis;
    n.a = a.id;
    n.axis = axis;
    n.keepdims = keepdims;
    n.value = Tensor(drop_axis(ta.shape, axis, keepdims));
    for (int64_t p = 0; p < pre; ++p)
        for (int64_t q = 0; q < post; ++q) {
            double s = 0.0;
            for (int64_t i = 0; i < cnt; ++i) s += ta.at((p * cnt + i) * post + q);
            n.value.at(p * post + q) = s / double(cnt);
        }
    return {push(std::move(n))};
}

Val Tape::matmul(Val a, Val b) {
    const Tensor& ta = value(a);
    const Tensor& tb = value(b);
    if (ta.rank() < 2 || tb.rank() != 2)
        throw ContractError("matmul expects x[..., k] and w[k, n]");
    int k = ta.shape.back();
    if (k != tb.dim(0))
        throw ContractError("matmul: inner dims disagree " + ta.shape_str() + " vs " +
                            tb.shape_str());
    Node n;
    n.op = OpKind::Matmul;
    n.a = a.id;
    n.b = b.id;
    n.value = matmul_values(ta, tb);
    return {push(std::move(n))};
}

Val Tape::concat(const std::vector<Val>& parts, int axis) {
    if (parts.empty()) throw ContractError("concat of zero tensors");
    const Tensor& t0 = value(parts[0]);
    if (axis < 0 || axis >= t0.rank()) throw ContractError("concat: axis out of range");

    std::vector<int> out_shape = t0.shape;
    out_shape[size_t(axis)] = 0;
    for (Val p : parts) {
        const Tensor& t = value(p);
        if (t.rank() != t0.rank()) throw ContractError("concat: rank mismatch");
        for (int i = 0; i < t.rank(); ++i)
            if (i != axis && t.dim(i) != t0.dim(i))
                throw ContractError("concat: non-axis dims disagree");
        out_shape[size_t(axis)] += t.dim(axis);
    }

    Node n;
    n.op = OpKind::Concat;
    n.axis = axis;
    for (Val p : parts) n.inputs.push_back(p.id);
    n.value = Tensor(out_shape);

    int64_t pre, total, post;
    axis_split(out_shape, axis, pre, total, post);
    int64_t offset = 0;
    for (Val p : parts) {
        const Tensor& t = value(p);
        int64_t cnt = t.dim(axis);
        for (int64_t pr = 0; pr < pre; ++pr)
            for (int64_t i = 0; i < cnt; ++i)
                for (int64_t q = 0; q < post; ++q)
                    n.value.at((pr * total + offset + i) * post + q) =
                        t.at((pr * cnt + i) * post + q);
        offset += cnt;
    }
    return {push(std::move(n))};
}

Val Tape::broadcast(Val a, std::vector<int> target) {
    Node n;
    n.op = OpKind::Broadcast;
    n.a = a.id;
    n.value = broadcast_to(value(a), target);
    return {push(std::move(n))};
}

Val Tape::record(OpKind kind, const std::vector<Val>& inputs, double attr, int axis,
                 bool keepdims, std::vector<int> shape) {
    auto need = [&](size_t n) {
        if (inputs.size() != n)
            throw ContractError("record: wrong input count for this op kind");
    };
    switch (kind) {
        case OpKind::Add: need(2); return add(inputs[0], inputs[1]);
        case OpKind::Sub: need(2); return sub(inputs[0], inputs[1]);
        case OpKind::Mul: need(2); return mul(inputs[0], inputs[1]);
        case OpKind::Div: need(2); return div(inputs[0], inputs[1]);
        case OpKind::Neg: need(1); return neg(inputs[0]);
        case OpKind::Exp: need(1); return exp(inputs[0]);
        case OpKind::Log: need(1); return log(inputs[0]);
        case OpKind::Power: need(1); return power(inputs[0], attr);
        case OpKind::Sqrt: need(1); return sqrt(inputs[0]);
        case OpKind::Sigmoid: need(1); return sigmoid(inputs[0]);
        case OpKind::Softplus: need(1); return softplus(inputs[0]);
        case OpKind::Sin: need(1); return sin(inputs[0]);
        case OpKind::Cos: need(1); return cos(inputs[0]);
        case OpKind::Max: need(2); return max(inputs[0], inputs[1]);
        case OpKind::Min: need(2); return min(inputs[0], inputs[1]);
        case OpKind::MaxReduce: need(1); return max_reduce(inputs[0]);
        case OpKind::MinReduce: need(1); return min_reduce(inputs[0]);
        case OpKind::Sum:
            need(1);
            return axis < 0 ? sum(inputs[0]) : sum_axis(inputs[0], axis, keepdims);
        case OpKind::Mean:
            need(1);
            return axis < 0 ? mean(inputs[0]) : mean_axis(inputs[0], axis, keepdims);
        case OpKind::SumAxis: need(1); return sum_axis(inputs[0], axis, keepdims);
        case OpKind::MeanAxis: need(1); return mean_axis(inputs[0], axis, keepdims);
        case OpKind::Matmul: need(2); return matmul(inputs[0], inputs[1]);
        case OpKind::Concat: return concat(inputs, axis);
        case OpKind::Broadcast: need(1); return broadcast(inputs[0], std::move(shape));
        default:
            throw ContractError("record: op kind not in the recordable primitive set");
    }
}

Tensor& Tape::grab_adj(int id) {
    Node& n = nodes_[size_t(id)];
    if (!n.adj_set) {
        n.adj = Tensor(n.value.shape);
        n.adj_set = true;
    }
    return n.adj;
}

void Tape::backward(Val out) {
    const Node& on = node(out);
    if (on.value.numel() != 1)
        throw ContractError("backward: output must be scalar, got " + on.value.shape_str());

    for (Node& n : nodes_) {
        n.adj = Tensor();
        n.adj_set = false;
    }
    grab_adj(out.id).data[0] = 1.0;

    for (int id = out.id; id >= 0; --id) {
        Node& n = nodes_[size_t(id)];
        if (!n.adj_set) continue;
        const Tensor& g = n.adj;
        switch (n.op) {
            case OpKind::Leaf:
                if (params_) params_->accumulate_grad(n.group, g);
                break;
            case OpKind::Const:
                break;
            case OpKind::Add: {
                Tensor& da = grab_adj(n.a);
                Tensor& db = grab_adj(n.b);
                for (int64_t i = 0; i < g.numel(); ++i) {
                    da.at(i) += g.at(i);
                    db.at(i) += g.at(i);
                }
                break;
            }
            case OpKind::Sub: {
                Tensor& da = grab_adj(n.a);
                Tensor& db = grab_adj(n.b);
                for (int64_t i = 0; i < g.numel(); ++i) {
                    da.at(i) += g.at(i);
                    db.at(i) -= g.at(i);
                }
                break;
            }
            case OpKind::Mul: {
                const Tensor& va = nodes_[size_t(n.a)].value;
                const Tensor& vb = nodes_[size_t(n.b)].value;
                Tensor& da = grab_adj(n.a);
                Tensor& db = grab_adj(n.b);
                for (int64_t i = 0; i < g.numel(); ++i) {
                    da.at(i) += g.at(i) * vb.at(i);
                    db.at(i) += g.at(i) * va.at(i);
                }
                break;
            }
            case OpKind::Div: {
                const Tensor& va = nodes_[size_t(n.a)].value;
                const Tensor& vb = nodes_[size_t(n.b)].value;
                Tensor& da = grab_adj(n.a);
                Tensor& db = grab_adj(n.b);
                for (int64_t i = 0; i < g.numel(); ++i) {
                    da.at(i) += g.at(i) / vb.at(i);
                    db.at(i) -= g.at(i) * va.at(i) / (vb.at(i) * vb.at(i));
                }
                break;
            }
            case OpKind::Neg: {
                Tensor& da = grab_adj(n.a);
                for (int64_t i = 0; i < g.numel(); ++i) da.at(i) -= g.at(i);
                break;
            }
            case OpKind::Exp: {
                Tensor& da = grab_adj(n.a);
                for (int64_t i = 0; i < g.numel(); ++i) da.at(i) += g.at(i) * n.value.at(i);
                break;
            }
            case OpKind::Log: {
                const Tensor& va = nodes_[size_t(n.a)].value;
                Tensor& da = grab_adj(n.a);
                for (int64_t i = 0; i < g.numel(); ++i) da.at(i) += g.at(i) / va.at(i);
                break;
            }
            case OpKind::Power: {
                const Tensor& va = nodes_[size_t(n.a)].value;
                Tensor& da = grab_adj(n.a);
                for (int64_t i = 0; i < g.numel(); ++i)
                    da.at(i) += g.at(i) * n.attr * std::pow(va.at(i), n.attr - 1.0);
                break;
            }
            case OpKind::Sqrt: {
                Tensor& da = grab_adj(n.a);
                for (int64_t i = 0; i < g.numel(); ++i)
                    da.at(i) += g.at(i) * 0.5 / n.value.at(i);
                break;
            }
            case OpKind::Sigmoid: {
                Tensor& da = grab_adj(n.a);
                for (int64_t i = 0; i < g.numel(); ++i) {
                    double s = n.value.at(i);
                    da.at(i) += g.at(i) * s * (1.0 - s);
                }
                break;
            }
            case OpKind::Softplus: {
                const Tensor& va = nodes_[size_t(n.a)].value;
                Tensor& da = grab_adj(n.a);
                for (int64_t i = 0; i < g.numel(); ++i)
                    da.at(i) += g.at(i) * stable_sigmoid(va.at(i));
                break;
            }
            case OpKind::Sin: {
                const Tensor& va = nodes_[size_t(n.a)].value;
                Tensor& da = grab_adj(n.a);
                for (int64_t i = 0; i < g.numel(); ++i)
                    da.at(i) += g.at(i) * std::cos(va.at(i));
                break;
            }
            case OpKind::Cos: {
                const Tensor& va = nodes_[size_t(n.a)].value;
                Tensor& da = grab_adj(n.a);
                for (int64_t i = 0; i < g.numel(); ++i)
                    da.at(i) -= g.at(i) * std::sin(va.at(i));
                break;
            }
            case OpKind::Max: {
                const Tensor& va = nodes_[size_t(n.a)].value;
                const Tensor& vb = nodes_[size_t(n.b)].value;
                Tensor& da = grab_adj(n.a);
                Tensor& db = grab_adj(n.b);
                for (int64_t i = 0; i < g.numel(); ++i) {
                    if (va.at(i) >= vb.at(i))
                        da.at(i) += g.at(i);
                    else
                        db.at(i) += g.at(i);
                }
                break;
            }
            case OpKind::Min: {
                const Tensor& va = nodes_[size_t(n.a)].value;
                const Tensor& vb = nodes_[size_t(n.b)].value;
                Tensor& da = grab_adj(n.a);
                Tensor& db = grab_adj(n.b);
                for (int64_t i = 0; i < g.numel(); ++i) {
                    if (va.at(i) <= vb.at(i))
                        da.at(i) += g.at(i);
                    else
                        db.at(i) += g.at(i);
                }
                break;
            }
            case OpKind::MaxReduce:
            case OpKind::MinReduce: {
                Tensor& da = grab_adj(n.a);
                da.at(n.argext) += g.data[0];
                break;
            }
            case OpKind::Sum: {
                Tensor& da = grab_adj(n.a);
                for (int64_t i = 0; i < da.numel(); ++i) da.at(i) += g.data[0];
                break;
            }
            case OpKind::Mean: {
                Tensor& da = grab_adj(n.a);
                double s = g.data[0] / double(da.numel());
                for (int64_t i = 0; i < da.numel(); ++i) da.at(i) += s;
                break;
            }
            case OpKind::SumAxis:
            case OpKind::MeanAxis: {
                const Tensor& va = nodes_[size_t(n.a)].value;
                Tensor& da = grab_adj(n.a);
                int64_t pre, cnt, post;
                axis_split(va.shape, n.axis, pre, cnt, post);
                double scale = n.op == OpKind::MeanAxis ? 1.0 / double(cnt) : 1.0;
                for (int64_t p = 0; p < pre; ++p)
                    for (int64_t i = 0; i < cnt; ++i)
                        for (int64_t q = 0; q < post; ++q)
                            da.at((p * cnt + i) * post + q) += scale * g.at(p * post + q);
                break;
            }
            case OpKind::Matmul: {
                const Tensor& va = nodes_[size_t(n.a)].value;
                const Tensor& vb = nodes_[size_t(n.b)].value;
                int k = va.shape.back();
                int ncols = vb.dim(1);
                int64_t rows = va.numel() / k;
                Tensor& da = grab_adj(n.a);
                Tensor& db = grab_adj(n.b);
                Eigen::Map<const RowMat> A(va.data.data(), rows, k);
                Eigen::Map<const RowMat> B(vb.data.data(), k, ncols);
                Eigen::Map<const RowMat> G(g.data.data(), rows, ncols);
                Eigen::Map<RowMat> dA(da.data.data(), rows, k);
                Eigen::Map<RowMat> dB(db.data.data(), k, ncols);
                dA.noalias() += G * B.transpose();
                dB.noalias() += A.transpose() * G;
                break;
            }
            case OpKind::Concat: {
                int64_t pre, total, post;
                axis_split(n.value.shape, n.axis, pre, total, post);
                int64_t offset = 0;
                for (int in_id : n.inputs) {
                    const Tensor& vi = nodes_[size_t(in_id)].value;
                    Tensor& di = grab_adj(in_id);
                    int64_t cnt = vi.dim(n.axis);
                    for (int64_t p = 0; p < pre; ++p)
                        for (int64_t i = 0; i < cnt; ++i)
                            for (int64_t q = 0; q < post; ++q)
                                di.at((p * cnt + i) * post + q) +=
                                    g.at((p * total + offset + i) * post + q);
                    offset += cnt;
                }
                break;
            }
            case OpKind::Broadcast: {
                const Tensor& va = nodes_[size_t(n.a)].value;
                Tensor r = reduce_broadcast(g, va.shape);
                Tensor& da = grab_adj(n.a);
                for (int64_t i = 0; i < da.numel(); ++i) da.at(i) += r.at(i);
                break;
            }
        }
    }
}

}  // namespace layl
