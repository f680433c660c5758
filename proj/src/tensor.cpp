#include "layl/tensor.hpp"

#include <Eigen/Dense>
#include <sstream>

#include "layl/errors.hpp"

namespace layl {

int64_t shape_numel(const std::vector<int>& shape) {
    int64_t n = 1;
    for (int d : shape) n *= d;
    return n;
}

std::string shape_to_string(const std::vector<int>& shape) {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
    os << "]";
    return os.str();
}

Tensor::Tensor(std::vector<int> s) : shape(std::move(s)) {
    for (int d : shape)
        if (d <= 0) throw ContractError("tensor dims must be positive, got " + shape_str());
    data.assign(size_t(shape_numel(shape)), 0.0);
}

Tensor::Tensor(std::vector<int> s, std::vector<double> d) : shape(std::move(s)), data(std::move(d)) {
    if (shape_numel(shape) != int64_t(data.size()))
        throw ContractError("tensor data size does not match shape " + shape_str());
}

Tensor Tensor::full(std::vector<int> s, double v) {
    Tensor t(std::move(s));
    for (double& x : t.data) x = v;
    return t;
}

std::string Tensor::shape_str() const { return shape_to_string(shape); }

static std::vector<int> pad_shape(const std::vector<int>& s, size_t rank) {
    std::vector<int> out(rank, 1);
    for (size_t i = 0; i < s.size(); ++i) out[rank - s.size() + i] = s[i];
    return out;
}

bool broadcast_compatible(const std::vector<int>& from, const std::vector<int>& to) {
    if (from.size() > to.size()) return false;
    std::vector<int> f = pad_shape(from, to.size());
    for (size_t i = 0; i < to.size(); ++i)
        if (f[i] != to[i] && f[i] != 1) return false;
    return true;
}

Tensor broadcast_to(const Tensor& x, const std::vector<int>& target) {
    if (!broadcast_compatible(x.shape, target))
        throw ContractError("cannot broadcast " + x.shape_str() + " to " + shape_to_string(target));
    if (x.shape == target) return x;

    size_t rank = target.size();
    std::vector<int> from = pad_shape(x.shape, rank);

    // Strides of the source with 0 in broadcast dims.
    std::vector<int64_t> src_stride(rank, 0);
    int64_t s = 1;
    for (size_t i = rank; i-- > 0;) {
        src_stride[i] = (from[i] == 1) ? 0 : s;
        s *= from[i];
    }

    Tensor out(target);
    std::vector<int64_t> idx(rank, 0);
    const int64_t n = out.numel();
    for (int64_t lin = 0; lin < n; ++lin) {
        int64_t src = 0;
        for (size_t i = 0; i < rank; ++i) src += idx[i] * src_stride[i];
        out.data[size_t(lin)] = x.data[size_t(src)];
        for (size_t i = rank; i-- > 0;) {
            if (++idx[i] < target[i]) break;
            idx[i] = 0;
        }
    }
    return out;
}

Tensor matmul_values(const Tensor& x, const Tensor& w) {
    using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    if (x.rank() < 2 || w.rank() != 2)
        throw ContractError("matmul_values expects x[..., k] and w[k, n]");
    int k = x.shape.back();
    if (k != w.dim(0)) throw ContractError("matmul_values: inner dims disagree");
    int n = w.dim(1);
    int64_t rows = x.numel() / k;
    std::vector<int> out_shape(x.shape.begin(), x.shape.end() - 1);
    out_shape.push_back(n);
    Tensor out(out_shape);
    Eigen::Map<const RowMat> A(x.data.data(), rows, k);
    Eigen::Map<const RowMat> B(w.data.data(), k, n);
    Eigen::Map<RowMat> C(out.data.data(), rows, n);
    C.noalias() = A * B;
    return out;
}

Tensor reduce_broadcast(const Tensor& grad, const std::vector<int>& from) {
    if (grad.shape == from) return grad;
    if (!broadcast_compatible(from, grad.shape))
        throw ContractError("reduce_broadcast shape mismatch");

    size_t rank = grad.shape.size();
    std::vector<int> f = pad_shape(from, rank);

    std::vector<int64_t> dst_stride(rank, 0);
    int64_t s = 1;
    for (size_t i = rank; i-- > 0;) {
        dst_stride[i] = (f[i] == 1) ? 0 : s;
        s *= f[i];
    }

    Tensor out(from);
    std::vector<int64_t> idx(rank, 0);
    const int64_t n = grad.numel();
    for (int64_t lin = 0; lin < n; ++lin) {
        int64_t dst = 0;
        for (size_t i = 0; i < rank; ++i) dst += idx[i] * dst_stride[i];
        out.data[size_t(dst)] += grad.data[size_t(lin)];
        for (size_t i = rank; i-- > 0;) {
            if (++idx[i] < grad.shape[i]) break;
            idx[i] = 0;
        }
    }
    return out;
}

}  // namespace layl
