#pragma once
#include <cstdint>
#include <deque>
#include <vector>

#include "layl/params.hpp"
#include "layl/tensor.hpp"

namespace layl {

enum class OpKind {
    Leaf,
    Const,
    Add,
    Sub,
    Mul,
    Div,
    Neg,
    Exp,
    Log,
    Power,
    Sqrt,
    Sigmoid,
    Softplus,
    Sin,
    Cos,
    Max,        // elementwise; ties route gradient to the first argument
    Min,
    MaxReduce,  // full reduction; ties pick the first element in flat order
    MinReduce,
    Sum,        // full reduction to a scalar
    SumAxis,
    Mean,
    MeanAxis,
    Matmul,     // x[..., k] @ w[k, n]
    Concat,
    Broadcast,
};

struct Val {
    int id = -1;
    bool valid() const { return id >= 0; }
};

// Eager reverse-mode tape over dense tensors. Single-writer: one pass builds
// the graph, backward() walks it in reverse record order, so gradient
// accumulation order is fixed and replays are bit-identical.
class Tape {
public:
    explicit Tape(ParamStore* params = nullptr) : params_(params) {}

    Val leaf(int group_id);
    Val constant(Tensor t);

    Val add(Val a, Val b);
    Val sub(Val a, Val b);
    Val mul(Val a, Val b);
    Val div(Val a, Val b);
    Val neg(Val a);
    Val exp(Val a);
    Val log(Val a);
    Val power(Val a, double exponent);
    Val sqrt(Val a);
    Val sigmoid(Val a);
    Val softplus(Val a);
    Val sin(Val a);
    Val cos(Val a);
    Val max(Val a, Val b);
    Val min(Val a, Val b);
    Val max_reduce(Val a);
    Val min_reduce(Val a);
    Val sum(Val a);
    Val sum_axis(Val a, int axis, bool keepdims);
    Val mean(Val a);
    Val mean_axis(Val a, int axis, bool keepdims);
    Val matmul(Val a, Val b);
    Val concat(const std::vector<Val>& parts, int axis);
    Val broadcast(Val a, std::vector<int> target);

    // Generic entry point over the primitive set above. Attribute-carrying
    // kinds read `attr` (Power exponent), `axis`/`keepdims`, or `shape`
    // (Broadcast target).
    Val record(OpKind kind, const std::vector<Val>& inputs, double attr = 0.0,
               int axis = -1, bool keepdims = false, std::vector<int> shape = {});

    // Propagates from a scalar output; accumulates leaf gradients into the
    // bound ParamStore (frozen groups included).
    void backward(Val out);

    const Tensor& value(Val v) const;
    double scalar_value(Val v) const;
    const Tensor& adjoint(Val v) const;  // valid after backward()
    bool adjoint_set(Val v) const;

    size_t node_count() const { return nodes_.size(); }
    size_t approx_bytes() const;
    void clear();

private:
    struct Node {
        OpKind op;
        int a = -1, b = -1;
        std::vector<int> inputs;  // Concat only
        double attr = 0.0;
        int axis = -1;
        bool keepdims = false;
        int group = -1;           // Leaf only
        int64_t argext = -1;      // MaxReduce / MinReduce winner
        Tensor value;
        Tensor adj;
        bool adj_set = false;
    };

    int push(Node n);
    const Node& node(Val v) const;
    Tensor& grab_adj(int id);
    void check_same_shape(const Tensor& a, const Tensor& b, const char* op) const;

    // deque keeps node addresses stable while the graph grows, so value
    // references stay valid across subsequent recordings.
    std::deque<Node> nodes_;
    ParamStore* params_ = nullptr;
};

}  // namespace layl
