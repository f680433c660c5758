#include "layl/losses.hpp"

#include <cmath>

#include "layl/errors.hpp"
#include "layl/params.hpp"
#include "layl/tape.hpp"

namespace layl {

double NoiseSchedule::alpha(double t) const { return std::cos(M_PI * t / 2.0); }
double NoiseSchedule::sigma(double t) const { return std::sin(M_PI * t / 2.0); }

MockGuidance::MockGuidance(NoiseSchedule schedule) : schedule_(schedule) {}

size_t MockGuidance::add_target(std::vector<double> image, int width, int height) {
    if (int64_t(image.size()) != int64_t(width) * height * 3)
        throw ContractError("MockGuidance: target size does not match dimensions");
    double mean = 0.0;
    for (double v : image) mean += v;
    mean /= double(image.size());
    targets_.push_back({std::move(image), width, height, mean});
    return targets_.size() - 1;
}

void MockGuidance::set_target(std::vector<double> image, int width, int height) {
    targets_.clear();
    active_ = 0;
    add_target(std::move(image), width, height);
}

void MockGuidance::set_active_target(size_t index) {
    if (index >= targets_.size()) throw ContractError("MockGuidance: target index out of range");
    active_ = index;
}

std::vector<double> MockGuidance::denoise(const std::vector<double>& z_t, int width, int height,
                                          double t, const std::string& /*prompt*/,
                                          double cfg_strength) {
    if (targets_.empty()) throw ContractError("MockGuidance: no target configured");
    const Target& target = targets_[active_];
    if (target.width != width || target.height != height ||
        z_t.size() != target.image.size())
        throw ContractError("MockGuidance: image dimensions do not match the target");

    double alpha = schedule_.alpha(t);
    double sigma = schedule_.sigma(t);
    if (sigma < 1e-6) throw DomainError("mock denoise: degenerate noise level (sigma < 1e-6)");

    std::vector<double> eps_hat(z_t.size());
    for (size_t i = 0; i < z_t.size(); ++i) {
        double eps_c = (z_t[i] - alpha * target.image[i]) / sigma;
        if (cfg_strength != 0.0) {
            double eps_u = (z_t[i] - alpha * target.mean) / sigma;
            eps_hat[i] = eps_c + cfg_strength * (eps_c - eps_u);
        } else {
            eps_hat[i] = eps_c;
        }
    }
    return eps_hat;
}

double MockGuidance::score(const std::vector<double>& image, int width, int height,
                           const std::string& /*text*/) {
    if (targets_.empty()) throw ContractError("MockGuidance: no target configured");
    const Target& target = targets_[active_];
    if (target.width != width || target.height != height ||
        image.size() != target.image.size())
        throw ContractError("MockGuidance: image dimensions do not match the target");
    double mse = 0.0;
    for (size_t i = 0; i < image.size(); ++i) {
        double d = image[i] - target.image[i];
        mse += d * d;
    }
    mse /= double(image.size());
    return 100.0 * (1.0 - mse);
}

SdsResult sds_pixel_gradient(const std::vector<double>& image, int width, int height,
                             const std::string& prompt, GuidanceProvider& provider,
                             const NoiseSchedule& schedule, double cfg_strength, Rng& rng) {
    if (int64_t(image.size()) != int64_t(width) * height * 3)
        throw ContractError("sds_pixel_gradient: image size does not match dimensions");

    SdsResult out;
    out.t = schedule.sample_t(rng);
    double alpha = schedule.alpha(out.t);
    double sigma = schedule.sigma(out.t);
    if (sigma < 1e-6) throw DomainError("sds: degenerate noise level (sigma < 1e-6)");
    out.weight = sigma * sigma;

    std::vector<double> z(image.size());
    for (size_t i = 0; i < image.size(); ++i) z[i] = alpha * image[i] + sigma * rng.normal();

    std::vector<double> eps_hat = provider.denoise(z, width, height, out.t, prompt, cfg_strength);
    if (eps_hat.size() != image.size())
        throw ContractError("sds_pixel_gradient: provider returned a wrong-sized prediction");

    out.pixel_grad.resize(image.size());
    for (size_t i = 0; i < image.size(); ++i) {
        double eps_eff = (z[i] - alpha * image[i]) / sigma;
        out.pixel_grad[i] = out.weight * (eps_hat[i] - eps_eff);
        out.surrogate += out.pixel_grad[i] * image[i];
    }
    return out;
}

namespace {

// Runs a scalar loss graph over one flat buffer and returns value + gradient.
template <typename BuildFn>
LossWithGrad loss_via_tape(const std::vector<double>& input, const BuildFn& build) {
    ParamStore ps;
    int gid = ps.add_group("input", {int(input.size())}, input);
    Tape t(&ps);
    Val loss = build(t, t.leaf(gid));
    LossWithGrad out;
    out.value = t.scalar_value(loss);
    t.backward(loss);
    out.grad = ps.group(gid).grad;
    return out;
}

}  // namespace

LossWithGrad empty_loss(const std::vector<double>& alpha_map, const LossWeights& w) {
    if (alpha_map.empty()) throw ContractError("empty_loss: empty alpha map");
    std::vector<int> shape{int(alpha_map.size())};
    return loss_via_tape(alpha_map, [&](Tape& t, Val a) {
        auto c = [&](double v) { return t.broadcast(t.constant(Tensor::scalar(v)), shape); };
        Val bin = t.sigmoid(t.div(t.sub(a, c(0.5)), c(w.soft_bin_temperature)));
        Val mn = t.min_reduce(bin);
        Val mx = t.max_reduce(bin);
        Val denom = t.add(t.sub(mx, mn), t.constant(Tensor::scalar(w.soft_bin_eps)));
        Val normed = t.div(t.sub(bin, t.broadcast(mn, shape)), t.broadcast(denom, shape));
        Val mean_bin = t.mean(normed);
        Val margin = t.sub(t.constant(Tensor::scalar(w.empty_margin)), mean_bin);
        return t.max(margin, t.constant(Tensor::scalar(0.0)));
    });
}

LossWithGrad acc_loss(const std::vector<double>& alpha_map, const LossWeights& w) {
    if (alpha_map.empty()) throw ContractError("acc_loss: empty alpha map");
    std::vector<int> shape{int(alpha_map.size())};
    return loss_via_tape(alpha_map, [&](Tape& t, Val a) {
        auto c = [&](double v) { return t.broadcast(t.constant(Tensor::scalar(v)), shape); };
        Val pressure = t.mean(t.mul(a, t.sub(c(1.0), a)));
        return t.mul(pressure, t.constant(Tensor::scalar(w.lambda_acc)));
    });
}

LossWithGrad recon_loss(const std::vector<double>& rgb, const std::vector<double>& target,
                        const LossWeights& w) {
    if (rgb.size() != target.size() || rgb.empty())
        throw ContractError("recon_loss: image shapes disagree");
    return loss_via_tape(rgb, [&](Tape& t, Val x) {
        Val diff = t.sub(x, t.constant(Tensor({int(target.size())}, target)));
        Val mse = t.mean(t.mul(diff, diff));
        return t.mul(mse, t.constant(Tensor::scalar(w.lambda_rec)));
    });
}

}  // namespace layl
