#pragma once
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "layl/params.hpp"

namespace layl {

struct FdGroupReport {
    std::string group;
    int checked = 0;
    double max_rel = 0.0;
    double mean_rel = 0.0;
};

struct FdReport {
    std::vector<FdGroupReport> groups;
    double max_rel = 0.0;
    bool within(double tol) const { return max_rel <= tol; }
    std::string to_string() const;
};

// Central finite-difference verification of analytic gradients.
//
// loss_value  — evaluates the scalar loss at the current parameters; must be
//               deterministic (it is called twice up front and the check is
//               aborted with a diagnostic if the two values differ).
// loss_grad   — zeroes gradients, runs forward + backward, leaves gradients
//               in the store, and returns the loss value.
// indices     — optional per-group subset of parameter indices to probe;
//               groups absent from the map are probed exhaustively.
//
// Frozen groups are skipped. Relative error per parameter is
// |g_ad - g_fd| / max(|g_ad|, |g_fd|, 1e-8).
FdReport finite_diff_check(ParamStore& params,
                           const std::function<double()>& loss_value,
                           const std::function<double()>& loss_grad,
                           double h = 1e-4,
                           const std::map<std::string, std::vector<int64_t>>& indices = {});

}  // namespace layl
