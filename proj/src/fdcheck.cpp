#include "layl/fdcheck.hpp"

#include <cmath>
#include <sstream>

#include "layl/errors.hpp"

namespace layl {

std::string FdReport::to_string() const {
    std::ostringstream os;
    for (const auto& g : groups) {
        os << g.group << ": checked " << g.checked << ", max rel " << g.max_rel
           << ", mean rel " << g.mean_rel << "\n";
    }
    os << "overall max rel " << max_rel << "\n";
    return os.str();
}

FdReport finite_diff_check(ParamStore& params,
                           const std::function<double()>& loss_value,
                           const std::function<double()>& loss_grad,
                           double h,
                           const std::map<std::string, std::vector<int64_t>>& indices) {
    double v1 = loss_value();
    double v2 = loss_value();
    if (v1 != v2) {
        std::ostringstream os;
        os << "finite_diff_check aborted: loss is not deterministic under a fixed seed ("
           << v1 << " vs " << v2 << ")";
        throw ContractError(os.str());
    }

    loss_grad();
    std::vector<std::vector<double>> analytic(size_t(params.group_count()));
    for (int gi = 0; gi < params.group_count(); ++gi) analytic[size_t(gi)] = params.group(gi).grad;

    FdReport report;
    for (int gi = 0; gi < params.group_count(); ++gi) {
        ParamGroup& grp = params.group(gi);
        if (grp.frozen) continue;

        std::vector<int64_t> probe;
        auto it = indices.find(grp.name);
        if (it != indices.end()) {
            probe = it->second;
        } else {
            probe.resize(grp.value.size());
            for (size_t i = 0; i < probe.size(); ++i) probe[i] = int64_t(i);
        }

        FdGroupReport gr;
        gr.group = grp.name;
        double rel_sum = 0.0;
        for (int64_t idx : probe) {
            double saved = grp.value[size_t(idx)];
            grp.value[size_t(idx)] = saved + h;
            double up = loss_value();
            grp.value[size_t(idx)] = saved - h;
            double down = loss_value();
            grp.value[size_t(idx)] = saved;

            double g_fd = (up - down) / (2.0 * h);
            double g_ad = analytic[size_t(gi)][size_t(idx)];
            double denom = std::max({std::fabs(g_ad), std::fabs(g_fd), 1e-8});
            double rel = std::fabs(g_ad - g_fd) / denom;
            gr.max_rel = std::max(gr.max_rel, rel);
            rel_sum += rel;
            ++gr.checked;
        }
        if (gr.checked > 0) gr.mean_rel = rel_sum / double(gr.checked);
        report.max_rel = std::max(report.max_rel, gr.max_rel);
        report.groups.push_back(std::move(gr));
    }
    return report;
}

}  // namespace layl
