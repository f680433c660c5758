#pragma once
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "layl/tensor.hpp"

namespace layl {

// One named flat parameter array with its gradient buffer.
struct ParamGroup {
    std::string name;
    std::vector<int> shape;
    std::vector<double> value;
    std::vector<double> grad;
    double lr_multiplier = 1.0;
    bool frozen = false;
};

// Ordered registry of parameter groups. Insertion order is the canonical
// order used for serialization and optimizer state.
class ParamStore {
public:
    int add_group(const std::string& name, std::vector<int> shape,
                  std::vector<double> init, double lr_multiplier = 1.0);

    int group_id(const std::string& name) const;      // -1 if absent
    bool has_group(const std::string& name) const { return group_id(name) >= 0; }

    ParamGroup& group(int id) { return groups_[size_t(id)]; }
    const ParamGroup& group(int id) const { return groups_[size_t(id)]; }
    int group_count() const { return int(groups_.size()); }

    void zero_grads();
    int64_t total_params() const;

    Tensor value_tensor(int id) const;

    // Accumulate a gradient tensor into the group's buffer. Frozen groups
    // still receive gradients; freezing is an optimizer concern.
    void accumulate_grad(int id, const Tensor& g);

private:
    std::vector<ParamGroup> groups_;
    std::map<std::string, int> by_name_;
};

}  // namespace layl
