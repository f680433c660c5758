#pragma once
#include <functional>
#include <vector>

#include "layl/camera.hpp"
#include "layl/compositor.hpp"
#include "layl/tape.hpp"

namespace layl {

enum class ShadingMode { Albedo, Textureless };
enum class BackgroundMode { RandomUniform, Fixed };

struct RenderConfig {
    int width = 64;
    int height = 64;
    int samples_per_ray = 64;
    double near = 0.1;
    double far = 6.0;
    ShadingMode shading = ShadingMode::Albedo;
    BackgroundMode background = BackgroundMode::Fixed;
    Vec3 background_color{1.0, 1.0, 1.0};

    void validate() const;
};

// Precomputed rays, stratified sample positions, and the background draw for
// one render. Both the value pass and the gradient pass consume the same
// plan, so they see identical sample points.
struct RenderPlan {
    int width = 0;
    int height = 0;
    int samples = 0;
    double t_near = 0.0;
    double delta = 0.0;  // per-bin segment length (far - near) / samples
    std::vector<Ray> rays;
    std::vector<double> ts;  // H*W*S jittered positions
    ShadingMode shading = ShadingMode::Albedo;
    Vec3 background{};

    int ray_count() const { return int(rays.size()); }
};

RenderPlan make_render_plan(const Camera& camera, const RenderConfig& cfg, Rng& rng);

struct RenderOutput {
    int width = 0;
    int height = 0;
    std::vector<double> rgb;    // H*W*3
    std::vector<double> alpha;  // H*W
    std::vector<std::vector<double>> per_field_alpha;  // K x H*W (composited renders only)
    Vec3 background{};
};

// Tape handles for one shard: rgb [R,3], alpha [R], per-field alpha K x [R].
struct SceneTapeOutputs {
    Val rgb;
    Val alpha;
    std::vector<Val> field_alpha;
};

SceneTapeOutputs eval_scene_on_tape(Tape& tape, const SceneModel& model, int layout,
                                    const RenderPlan& plan, int ray_begin, int ray_end);

constexpr int kDefaultShardRays = 128;

RenderOutput render_with_plan(const SceneModel& model, int layout, const RenderPlan& plan,
                              int shard_rays = kDefaultShardRays);
RenderOutput render(const SceneModel& model, int layout, const Camera& camera,
                    const RenderConfig& cfg, Rng& rng);

// Externally supplied d(loss)/d(pixel) buffers; empty vectors mean no
// gradient for that output.
struct PixelGradients {
    std::vector<double> rgb;                           // H*W*3
    std::vector<std::vector<double>> field_alpha;      // K x H*W
};

// Recomputes the forward pass shard by shard and accumulates parameter
// gradients, reducing shards in a fixed order.
void backprop_render(SceneModel& model, int layout, const RenderPlan& plan,
                     const PixelGradients& grads, int shard_rays = kDefaultShardRays);

// Forward render followed by a gradient pass whose pixel gradients are
// produced from the assembled image. Shard tapes are kept for the backward
// sweep while they fit in `keep_tape_budget_bytes`, otherwise the forward
// pass is recomputed per shard. Either way shards reduce in a fixed order.
using PixelGradFn = std::function<PixelGradients(const RenderOutput&)>;
RenderOutput render_and_backprop(SceneModel& model, int layout, const RenderPlan& plan,
                                 const PixelGradFn& grad_fn,
                                 int shard_rays = kDefaultShardRays,
                                 size_t keep_tape_budget_bytes = size_t(400) << 20);

// Single-field volume render without layout transforms or compositing.
RenderOutput render_field_with_plan(const Field& field, const RenderPlan& plan,
                                    int shard_rays = kDefaultShardRays);
RenderOutput render_field(const Field& field, const Camera& camera, const RenderConfig& cfg,
                          Rng& rng);

// Renders one field alone, placed by a world-to-local transform (e.g. its
// layout transform), using the bare single-volume path.
RenderOutput render_field_placed(const Field& field, const RigidScaleTransform& to_local,
                                 const Camera& camera, const RenderConfig& cfg, Rng& rng);

}  // namespace layl
