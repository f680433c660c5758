#pragma once
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "layl/losses.hpp"
#include "layl/renderer.hpp"

namespace layl {

enum class RunMode { Generate, Arrange, Decompose };

struct TrainConfig {
    int steps = 3000;
    uint64_t seed = 0;
    RunMode mode = RunMode::Generate;
    std::string prompt;

    double start_lr = 1e-9;
    double peak_lr = 1e-4;
    double end_lr = 1e-6;
    // Schedule anchors at the reference run length; warmup and blob decay
    // scale linearly with the actual step count.
    int reference_steps = 15000;
    int warmup_reference = 3000;
    int blob_decay_reference = 1000;

    double layout_lr_multiplier = 10.0;
    double beta1 = 0.9;
    double beta2 = 0.99;
    double adam_eps = 1e-8;

    LossWeights loss;
    NoiseSchedule schedule;
    double cfg_strength = 0.0;
    double textureless_probability = 0.1;

    RenderConfig render;
    CameraRanges camera;

    // When > 0, cameras come from a fixed azimuth ring instead of the free
    // ranges (index drawn uniformly per step).
    int view_ring_count = 0;
    double view_ring_elevation_deg = -30.0;

    int step_retries = 2;

    int warmup_steps() const;
    int blob_decay_steps() const;
};

// Log-linear warmup to the peak, then log-linear decay to the end rate.
double lr_at(int step, const TrainConfig& cfg);

// Adam with per-group learning-rate multipliers; frozen groups are skipped
// entirely.
class AdamOptimizer {
public:
    AdamOptimizer(double beta1, double beta2, double eps)
        : beta1_(beta1), beta2_(beta2), eps_(eps) {}

    void step(ParamStore& params, double lr);
    int64_t step_count() const { return t_; }

    std::vector<double> serialize(const ParamStore& params) const;
    void deserialize(const ParamStore& params, const std::vector<double>& blob);

private:
    void ensure_state(const ParamStore& params);

    double beta1_, beta2_, eps_;
    int64_t t_ = 0;
    std::vector<std::vector<double>> m_, v_;
};

struct StepReport {
    int step = 0;
    int layout = 0;
    int view_index = -1;
    double lr = 0.0;
    double loss_total = 0.0;
    double loss_sds = 0.0;
    double loss_rec = 0.0;
    double sds_t = 0.0;
    std::vector<double> loss_empty;  // raw margin values per field
    std::vector<double> loss_acc;    // lambda-weighted values per field
    bool textureless = false;
};

std::string step_report_json(const StepReport& r);

// One optimization run: layout sampling, rendering, loss assembly, and the
// per-mode freeze/reconstruction behavior.
class Trainer {
public:
    Trainer(SceneModel& model, TrainConfig cfg, GuidanceProvider& provider);

    // Ring mode only: invoked with the drawn view index before the guidance
    // call, e.g. to point a mock provider at that view's target.
    void set_view_callback(std::function<void(int)> cb) { view_callback_ = std::move(cb); }

    // Decompose mode: volume whose renders layout 0 must reconstruct.
    void set_target_field(const Field* target) { target_field_ = target; }

    const std::vector<Camera>& view_ring() const { return ring_; }

    StepReport train_step(int step);

    // Applies mode setup (arrange freezes fields), asserts the 8NK layout
    // parameter count, and runs all steps with per-step retries on
    // retriable guidance failures.
    std::vector<StepReport> run(const std::function<void(const StepReport&)>& on_step = {});

    std::vector<double> optimizer_state() const { return opt_.serialize(model_.params()); }

private:
    void apply_blob_schedule(int step);

    SceneModel& model_;
    TrainConfig cfg_;
    GuidanceProvider& provider_;
    Rng rng_;
    AdamOptimizer opt_;
    std::vector<Camera> ring_;
    std::function<void(int)> view_callback_;
    const Field* target_field_ = nullptr;
    std::vector<double> blob_amp0_;  // initial blob amplitude per field (-1: not an MLP)
};

}  // namespace layl
