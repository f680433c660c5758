#pragma once
#include <string>
#include <vector>

#include "layl/rng.hpp"

namespace layl {

// Variance-preserving cosine schedule: alpha(t)^2 + sigma(t)^2 = 1.
struct NoiseSchedule {
    double t_min = 0.02;
    double t_max = 0.98;

    double alpha(double t) const;
    double sigma(double t) const;
    double sample_t(Rng& rng) const { return rng.uniform(t_min, t_max); }
};

// Guidance oracle: either predicts the noise in z_t for a prompt, or scores
// a rendered image against a text description.
class GuidanceProvider {
public:
    virtual ~GuidanceProvider() = default;
    virtual std::vector<double> denoise(const std::vector<double>& z_t, int width, int height,
                                        double t, const std::string& prompt,
                                        double cfg_strength) = 0;
    virtual double score(const std::vector<double>& image, int width, int height,
                         const std::string& text) = 0;
};

// Closed-form denoiser around one or more target images: inverts the noising
// map toward the active target. The optional guidance blend pulls away from
// an "unconditional" flat image at the target's mean value.
class MockGuidance final : public GuidanceProvider {
public:
    explicit MockGuidance(NoiseSchedule schedule = {});

    size_t add_target(std::vector<double> image, int width, int height);
    void set_target(std::vector<double> image, int width, int height);
    void set_active_target(size_t index);
    size_t target_count() const { return targets_.size(); }

    std::vector<double> denoise(const std::vector<double>& z_t, int width, int height, double t,
                                const std::string& prompt, double cfg_strength) override;
    double score(const std::vector<double>& image, int width, int height,
                 const std::string& text) override;

private:
    struct Target {
        std::vector<double> image;
        int width = 0, height = 0;
        double mean = 0.0;
    };
    NoiseSchedule schedule_;
    std::vector<Target> targets_;
    size_t active_ = 0;
};

struct LossWeights {
    double lambda_acc = 0.01;
    double lambda_empty = 0.05;
    double lambda_rec = 0.05;
    double empty_margin = 0.1;
    double soft_bin_temperature = 0.01;
    double soft_bin_eps = 1e-7;
};

struct SdsResult {
    std::vector<double> pixel_grad;  // same shape as the image
    double t = 0.0;
    double weight = 0.0;     // w(t) = sigma(t)^2
    double surrogate = 0.0;  // sum(g * x); its pixel derivative is exactly g
};

// Score-distillation pixel gradient g = w(t) (eps_hat - eps). The residual is
// measured against the noise actually contained in the rounded z_t, so a
// provider that inverts the noising map exactly produces an exactly zero
// gradient at its fixed point.
SdsResult sds_pixel_gradient(const std::vector<double>& image, int width, int height,
                             const std::string& prompt, GuidanceProvider& provider,
                             const NoiseSchedule& schedule, double cfg_strength, Rng& rng);

struct LossWithGrad {
    double value = 0.0;
    std::vector<double> grad;
};

// Margin penalty on the soft-binarized, min-max normalized alpha map;
// returns the raw margin value (weighting is the trainer's concern).
LossWithGrad empty_loss(const std::vector<double>& alpha_map, const LossWeights& w);

// lambda_acc * mean(alpha * (1 - alpha)).
LossWithGrad acc_loss(const std::vector<double>& alpha_map, const LossWeights& w);

// lambda_rec * mean squared error over pixels and channels.
LossWithGrad recon_loss(const std::vector<double>& rgb, const std::vector<double>& target,
                        const LossWeights& w);

}  // namespace layl
