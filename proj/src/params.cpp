#include "layl/params.hpp"

#include "layl/errors.hpp"

namespace layl {

int ParamStore::add_group(const std::string& name, std::vector<int> shape,
                          std::vector<double> init, double lr_multiplier) {
    if (by_name_.count(name)) throw ContractError("duplicate parameter group: " + name);
    if (shape_numel(shape) != int64_t(init.size()))
        throw ContractError("parameter group " + name + ": init size does not match shape");
    ParamGroup g;
    g.name = name;
    g.shape = std::move(shape);
    g.value = std::move(init);
    g.grad.assign(g.value.size(), 0.0);
    g.lr_multiplier = lr_multiplier;
    int id = int(groups_.size());
    groups_.push_back(std::move(g));
    by_name_[name] = id;
    return id;
}

int ParamStore::group_id(const std::string& name) const {
    auto it = by_name_.find(name);
    return it == by_name_.end() ? -1 : it->second;
}

void ParamStore::zero_grads() {
    for (auto& g : groups_)
        for (double& x : g.grad) x = 0.0;
}

int64_t ParamStore::total_params() const {
    int64_t n = 0;
    for (const auto& g : groups_) n += int64_t(g.value.size());
    return n;
}

Tensor ParamStore::value_tensor(int id) const {
    const ParamGroup& g = group(id);
    return Tensor(g.shape, g.value);
}

void ParamStore::accumulate_grad(int id, const Tensor& g) {
    ParamGroup& pg = group(id);
    if (g.shape != pg.shape)
        throw ContractError("gradient shape mismatch for group " + pg.name);
    for (size_t i = 0; i < pg.grad.size(); ++i) pg.grad[i] += g.data[i];
}

}  // namespace layl
