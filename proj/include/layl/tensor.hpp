#pragma once
#include <cstdint>
#include <string>
#include <vector>

namespace layl {

// Dense row-major tensor of doubles, rank <= 4.
struct Tensor {
    std::vector<int> shape;
    std::vector<double> data;

    Tensor() = default;
    explicit Tensor(std::vector<int> s);
    Tensor(std::vector<int> s, std::vector<double> d);

    static Tensor scalar(double v) { return Tensor({1}, {v}); }
    static Tensor zeros(std::vector<int> s) { return Tensor(std::move(s)); }
    static Tensor full(std::vector<int> s, double v);

    int64_t numel() const { return int64_t(data.size()); }
    int rank() const { return int(shape.size()); }
    int dim(int i) const { return shape[size_t(i)]; }
    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    double& at(int64_t i) { return data[size_t(i)]; }
    double at(int64_t i) const { return data[size_t(i)]; }

    std::string shape_str() const;
};

int64_t shape_numel(const std::vector<int>& shape);
std::string shape_to_string(const std::vector<int>& shape);

// Numpy-style expansion: shapes are aligned on trailing dimensions, missing
// leading dims of x count as 1, and each dim must match the target or be 1.
bool broadcast_compatible(const std::vector<int>& from, const std::vector<int>& to);
Tensor broadcast_to(const Tensor& x, const std::vector<int>& target);
// Adjoint of broadcast_to: sum `grad` (shaped `target`) back down to `from`.
Tensor reduce_broadcast(const Tensor& grad, const std::vector<int>& from);

// x[..., k] @ w[k, n]. Shared kernel so taped and plain rendering paths
// produce bit-identical contractions.
Tensor matmul_values(const Tensor& x, const Tensor& w);

}  // namespace layl
