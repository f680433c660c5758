#include "layl/renderer.hpp"

#include <cmath>
#include <memory>

#include "layl/errors.hpp"
#include "layl/scalar_math.hpp"

namespace layl {

void RenderConfig::validate() const {
    if (width < 1 || height < 1) throw ConfigError("render: image dims must be positive");
    if (samples_per_ray < 2) throw ConfigError("render: samples_per_ray must be >= 2");
    if (!(near < far)) throw ConfigError("render: near must be < far");
    if (near <= 0.0) throw ConfigError("render: near must be positive");
}

RenderPlan make_render_plan(const Camera& camera, const RenderConfig& cfg, Rng& rng) {
    cfg.validate();
    RenderPlan plan;
    plan.width = cfg.width;
    plan.height = cfg.height;
    plan.samples = cfg.samples_per_ray;
    plan.t_near = cfg.near;
    plan.delta = (cfg.far - cfg.near) / double(cfg.samples_per_ray);
    plan.shading = cfg.shading;

    // Draw order: background first, then one jitter per (ray, bin).
    if (cfg.background == BackgroundMode::RandomUniform)
        plan.background = {rng.uniform(), rng.uniform(), rng.uniform()};
    else
        plan.background = cfg.background_color;

    plan.rays = generate_rays(camera, cfg.width, cfg.height);
    plan.ts.resize(plan.rays.size() * size_t(plan.samples));
    for (size_t r = 0; r < plan.rays.size(); ++r)
        for (int i = 0; i < plan.samples; ++i)
            plan.ts[r * size_t(plan.samples) + size_t(i)] =
                cfg.near + (double(i) + rng.uniform()) * plan.delta;
    return plan;
}

namespace {

Val bcast_scalar(Tape& t, double v, const std::vector<int>& shape) {
    return t.broadcast(t.constant(Tensor::scalar(v)), shape);
}

// Strictly lower triangular ones: cum[r,i] = sum_{j<i} x[r,j].
Tensor exclusive_prefix_matrix(int s) {
    Tensor L({s, s});
    for (int j = 0; j < s; ++j)
        for (int i = j + 1; i < s; ++i) L.data[size_t(j) * size_t(s) + size_t(i)] = 1.0;
    return L;
}

// Transposed rotation matrix [3,3] on the tape from a quaternion leaf [1,4],
// normalized with gradients flowing through the normalization.
Val rotation_transpose_on_tape(Tape& t, Val q) {
    Val n2 = t.sum(t.mul(q, q));
    Val norm = t.sqrt(n2);
    if (t.scalar_value(norm) <= 1e-12)
        throw DomainError("layout quaternion has near-zero norm");
    Val qn = t.div(q, t.broadcast(norm, {1, 4}));

    auto comp = [&](int c) {
        Tensor onehot({4, 1});
        onehot.data[size_t(c)] = 1.0;
        return t.matmul(qn, t.constant(std::move(onehot)));  // [1,1]
    };
    Val x = comp(0), y = comp(1), z = comp(2), w = comp(3);

    std::vector<int> s11{1, 1};
    Val one = bcast_scalar(t, 1.0, s11);
    Val two = bcast_scalar(t, 2.0, s11);

    Val r00 = t.sub(one, t.mul(two, t.add(t.mul(y, y), t.mul(z, z))));
    Val r01 = t.mul(two, t.sub(t.mul(x, y), t.mul(z, w)));
    Val r02 = t.mul(two, t.add(t.mul(x, z), t.mul(y, w)));
    Val r10 = t.mul(two, t.add(t.mul(x, y), t.mul(z, w)));
    Val r11 = t.sub(one, t.mul(two, t.add(t.mul(x, x), t.mul(z, z))));
    Val r12 = t.mul(two, t.sub(t.mul(y, z), t.mul(x, w)));
    Val r20 = t.mul(two, t.sub(t.mul(x, z), t.mul(y, w)));
    Val r21 = t.mul(two, t.add(t.mul(y, z), t.mul(x, w)));
    Val r22 = t.sub(one, t.mul(two, t.add(t.mul(x, x), t.mul(y, y))));

    Val row0 = t.concat({r00, r10, r20}, 1);
    Val row1 = t.concat({r01, r11, r21}, 1);
    Val row2 = t.concat({r02, r12, r22}, 1);
    return t.concat({row0, row1, row2}, 0);  // [3,3]
}

struct ShardConstants {
    Val origins;  // [R,1,3]
    Val dirs;     // [R,1,3]
    Val ts;       // [R,S,1]
};

ShardConstants shard_constants(Tape& t, const RenderPlan& plan, int begin, int end) {
    int r = end - begin;
    int s = plan.samples;
    Tensor origins({r, 1, 3}), dirs({r, 1, 3}), ts({r, s, 1});
    for (int i = 0; i < r; ++i) {
        const Ray& ray = plan.rays[size_t(begin + i)];
        origins.data[size_t(3 * i)] = ray.origin.x;
        origins.data[size_t(3 * i) + 1] = ray.origin.y;
        origins.data[size_t(3 * i) + 2] = ray.origin.z;
        dirs.data[size_t(3 * i)] = ray.direction.x;
        dirs.data[size_t(3 * i) + 1] = ray.direction.y;
        dirs.data[size_t(3 * i) + 2] = ray.direction.z;
        for (int j = 0; j < s; ++j)
            ts.data[size_t(i) * size_t(s) + size_t(j)] =
                plan.ts[size_t(begin + i) * size_t(s) + size_t(j)];
    }
    return {t.constant(std::move(origins)), t.constant(std::move(dirs)),
            t.constant(std::move(ts))};
}

}  // namespace

SceneTapeOutputs eval_scene_on_tape(Tape& t, const SceneModel& model, int layout,
                                    const RenderPlan& plan, int ray_begin, int ray_end) {
    if (layout < 0 || layout >= model.layout_count())
        throw ContractError("eval_scene_on_tape: layout index out of range");
    if (ray_begin < 0 || ray_end > plan.ray_count() || ray_begin >= ray_end)
        throw ContractError("eval_scene_on_tape: bad ray range");

    const int R = ray_end - ray_begin;
    const int S = plan.samples;
    const int K = model.field_count();
    const std::vector<int> rs{R, S};
    const std::vector<int> rs3{R, S, 3};
    const bool want_albedo = plan.shading == ShadingMode::Albedo;

    ShardConstants c = shard_constants(t, plan, ray_begin, ray_end);

    std::vector<Val> tau(static_cast<size_t>(K));
    std::vector<std::array<Val, 3>> rho(static_cast<size_t>(K));
    for (int k = 0; k < K; ++k) {
        auto gids = model.transform_groups(layout, k);
        Val rt = rotation_transpose_on_tape(t, t.leaf(gids[0]));
        Val trans = t.leaf(gids[1]);  // [1,3]
        Val scale = t.leaf(gids[2]);  // [1,1]

        Val o_rot = t.matmul(c.origins, rt);  // [R,1,3]
        Val o_k = t.mul(t.broadcast(scale, {R, 1, 3}),
                        t.sub(o_rot, t.broadcast(trans, {R, 1, 3})));
        Val d_k = t.mul(t.broadcast(scale, {R, 1, 3}), t.matmul(c.dirs, rt));
        Val pos = t.add(t.broadcast(o_k, rs3),
                        t.mul(t.broadcast(c.ts, rs3), t.broadcast(d_k, rs3)));

        TapeFieldOutput fo = model.field(k).tape_query(t, pos, want_albedo);
        tau[size_t(k)] = fo.density;
        if (want_albedo) rho[size_t(k)] = fo.albedo;
    }

    Val tau_total = tau[0];
    for (int k = 1; k < K; ++k) tau_total = t.add(tau_total, tau[size_t(k)]);

    std::array<Val, 3> rho_prime{};
    if (want_albedo) {
        Val guard = t.max(tau_total, bcast_scalar(t, kCombineEps, rs));
        for (int ch = 0; ch < 3; ++ch) {
            Val acc;
            for (int k = 0; k < K; ++k) {
                Val w = t.div(tau[size_t(k)], guard);
                Val term = t.mul(w, rho[size_t(k)][size_t(ch)]);
                acc = acc.valid() ? t.add(acc, term) : term;
            }
            rho_prime[size_t(ch)] = acc;
        }
    } else {
        for (int ch = 0; ch < 3; ++ch) rho_prime[size_t(ch)] = bcast_scalar(t, 1.0, rs);
    }

    Val ltri = t.constant(exclusive_prefix_matrix(S));
    Val delta = bcast_scalar(t, plan.delta, rs);
    Val ones = bcast_scalar(t, 1.0, rs);

    auto accumulate_alpha = [&](Val density, Val* weights_out) {
        Val od = t.mul(density, delta);
        Val trans = t.exp(t.neg(t.matmul(od, ltri)));
        Val a = t.sub(ones, t.exp(t.neg(od)));
        Val w = t.mul(trans, a);
        if (weights_out) *weights_out = w;
        return t.sum_axis(w, 1, false);  // [R]
    };

    SceneTapeOutputs out;
    Val weights;
    out.alpha = accumulate_alpha(tau_total, &weights);

    Val alpha_keep = t.sum_axis(weights, 1, true);  // [R,1]
    Val bg_weight = t.sub(t.broadcast(t.constant(Tensor::scalar(1.0)), {R, 1}), alpha_keep);
    std::array<Val, 3> color{};
    const double bg[3] = {plan.background.x, plan.background.y, plan.background.z};
    for (int ch = 0; ch < 3; ++ch) {
        Val col = t.sum_axis(t.mul(weights, rho_prime[size_t(ch)]), 1, true);  // [R,1]
        color[size_t(ch)] = t.add(col, t.mul(bg_weight, bcast_scalar(t, bg[ch], {R, 1})));
    }
    out.rgb = t.concat({color[0], color[1], color[2]}, 1);  // [R,3]

    out.field_alpha.reserve(size_t(K));
    for (int k = 0; k < K; ++k)
        out.field_alpha.push_back(accumulate_alpha(tau[size_t(k)], nullptr));
    return out;
}

namespace {

// Rendering only reads parameter values; backward is never invoked on these
// tapes, so the const cast stays write-free.
ParamStore* render_store(const SceneModel& model) {
    return const_cast<ParamStore*>(&model.params());
}

}  // namespace

RenderOutput render_with_plan(const SceneModel& model, int layout, const RenderPlan& plan,
                              int shard_rays) {
    const int total = plan.ray_count();
    const int K = model.field_count();
    RenderOutput out;
    out.width = plan.width;
    out.height = plan.height;
    out.background = plan.background;
    out.rgb.resize(size_t(total) * 3);
    out.alpha.resize(size_t(total));
    out.per_field_alpha.assign(size_t(K), std::vector<double>(size_t(total)));

    for (int begin = 0; begin < total; begin += shard_rays) {
        int end = std::min(begin + shard_rays, total);
        Tape tape(render_store(model));
        SceneTapeOutputs o = eval_scene_on_tape(tape, model, layout, plan, begin, end);
        const Tensor& rgb = tape.value(o.rgb);
        const Tensor& alpha = tape.value(o.alpha);
        for (int i = 0; i < end - begin; ++i) {
            for (int ch = 0; ch < 3; ++ch)
                out.rgb[size_t(begin + i) * 3 + size_t(ch)] = rgb.at(3 * i + ch);
            out.alpha[size_t(begin + i)] = alpha.at(i);
        }
        for (int k = 0; k < K; ++k) {
            const Tensor& fa = tape.value(o.field_alpha[size_t(k)]);
            for (int i = 0; i < end - begin; ++i)
                out.per_field_alpha[size_t(k)][size_t(begin + i)] = fa.at(i);
        }
    }
    return out;
}

RenderOutput render(const SceneModel& model, int layout, const Camera& camera,
                    const RenderConfig& cfg, Rng& rng) {
    RenderPlan plan = make_render_plan(camera, cfg, rng);
    return render_with_plan(model, layout, plan);
}

namespace {

// Validates gradient buffer sizes; returns false when nothing propagates.
bool check_pixel_gradients(const PixelGradients& grads, int total, int k_fields) {
    bool any = false;
    if (!grads.rgb.empty()) {
        if (grads.rgb.size() != size_t(total) * 3)
            throw ContractError("backprop_render: rgb gradient size mismatch");
        any = true;
    }
    for (const auto& fa : grads.field_alpha) {
        if (fa.empty()) continue;
        if (fa.size() != size_t(total))
            throw ContractError("backprop_render: alpha gradient size mismatch");
        any = true;
    }
    if (int(grads.field_alpha.size()) > k_fields)
        throw ContractError("backprop_render: more alpha gradients than fields");
    return any;
}

// sum(g * output) has exactly g as its output adjoint, which keeps
// backward()'s scalar contract while injecting pixel gradients.
void seed_and_backward(Tape& tape, const SceneTapeOutputs& o, const PixelGradients& grads,
                       int begin, int end) {
    int r = end - begin;
    Val total_loss;
    auto add_term = [&](Val term) {
        total_loss = total_loss.valid() ? tape.add(total_loss, term) : term;
    };
    if (!grads.rgb.empty()) {
        Tensor g({r, 3});
        for (int i = 0; i < r; ++i)
            for (int ch = 0; ch < 3; ++ch)
                g.at(3 * i + ch) = grads.rgb[size_t(begin + i) * 3 + size_t(ch)];
        add_term(tape.sum(tape.mul(o.rgb, tape.constant(std::move(g)))));
    }
    for (size_t k = 0; k < grads.field_alpha.size(); ++k) {
        if (grads.field_alpha[k].empty()) continue;
        Tensor g({r});
        for (int i = 0; i < r; ++i) g.at(i) = grads.field_alpha[k][size_t(begin + i)];
        add_term(tape.sum(tape.mul(o.field_alpha[k], tape.constant(std::move(g)))));
    }
    tape.backward(total_loss);
}

void copy_shard_outputs(const Tape& tape, const SceneTapeOutputs& o, int begin, int end,
                        RenderOutput& out) {
    const Tensor& rgb = tape.value(o.rgb);
    const Tensor& alpha = tape.value(o.alpha);
    for (int i = 0; i < end - begin; ++i) {
        for (int ch = 0; ch < 3; ++ch)
            out.rgb[size_t(begin + i) * 3 + size_t(ch)] = rgb.at(3 * i + ch);
        out.alpha[size_t(begin + i)] = alpha.at(i);
    }
    for (size_t k = 0; k < o.field_alpha.size(); ++k) {
        const Tensor& fa = tape.value(o.field_alpha[k]);
        for (int i = 0; i < end - begin; ++i)
            out.per_field_alpha[k][size_t(begin + i)] = fa.at(i);
    }
}

}  // namespace

void backprop_render(SceneModel& model, int layout, const RenderPlan& plan,
                     const PixelGradients& grads, int shard_rays) {
    const int total = plan.ray_count();
    if (!check_pixel_gradients(grads, total, model.field_count())) return;

    for (int begin = 0; begin < total; begin += shard_rays) {
        int end = std::min(begin + shard_rays, total);
        Tape tape(&model.params());
        SceneTapeOutputs o = eval_scene_on_tape(tape, model, layout, plan, begin, end);
        seed_and_backward(tape, o, grads, begin, end);
    }
}

RenderOutput render_and_backprop(SceneModel& model, int layout, const RenderPlan& plan,
                                 const PixelGradFn& grad_fn, int shard_rays,
                                 size_t keep_tape_budget_bytes) {
    const int total = plan.ray_count();
    const int K = model.field_count();
    RenderOutput out;
    out.width = plan.width;
    out.height = plan.height;
    out.background = plan.background;
    out.rgb.resize(size_t(total) * 3);
    out.alpha.resize(size_t(total));
    out.per_field_alpha.assign(size_t(K), std::vector<double>(size_t(total)));

    struct Shard {
        int begin, end;
        std::unique_ptr<Tape> tape;
        SceneTapeOutputs outputs;
    };
    std::vector<Shard> kept;
    bool keeping = true;
    size_t kept_bytes = 0;

    for (int begin = 0; begin < total; begin += shard_rays) {
        int end = std::min(begin + shard_rays, total);
        auto tape = std::make_unique<Tape>(&model.params());
        SceneTapeOutputs o = eval_scene_on_tape(*tape, model, layout, plan, begin, end);
        copy_shard_outputs(*tape, o, begin, end, out);
        if (keeping) {
            // Adjoint buffers roughly double the footprint during backward.
            kept_bytes += tape->approx_bytes() * 2;
            if (kept_bytes > keep_tape_budget_bytes) {
                keeping = false;
                kept.clear();
            } else {
                kept.push_back({begin, end, std::move(tape), o});
            }
        }
    }

    PixelGradients grads = grad_fn(out);
    if (!check_pixel_gradients(grads, total, K)) return out;

    if (keeping) {
        for (Shard& s : kept) seed_and_backward(*s.tape, s.outputs, grads, s.begin, s.end);
    } else {
        for (int begin = 0; begin < total; begin += shard_rays) {
            int end = std::min(begin + shard_rays, total);
            Tape tape(&model.params());
            SceneTapeOutputs o = eval_scene_on_tape(tape, model, layout, plan, begin, end);
            seed_and_backward(tape, o, grads, begin, end);
        }
    }
    return out;
}

RenderOutput render_field_with_plan(const Field& field, const RenderPlan& plan, int shard_rays) {
    const int total = plan.ray_count();
    const int S = plan.samples;
    RenderOutput out;
    out.width = plan.width;
    out.height = plan.height;
    out.background = plan.background;
    out.rgb.resize(size_t(total) * 3);
    out.alpha.resize(size_t(total));

    Tensor ltri = exclusive_prefix_matrix(S);
    const double bg[3] = {plan.background.x, plan.background.y, plan.background.z};

    for (int begin = 0; begin < total; begin += shard_rays) {
        int end = std::min(begin + shard_rays, total);
        int r = end - begin;
        size_t count = size_t(r) * size_t(S);

        std::vector<double> positions(count * 3);
        for (int i = 0; i < r; ++i) {
            const Ray& ray = plan.rays[size_t(begin + i)];
            for (int j = 0; j < S; ++j) {
                double ts = plan.ts[size_t(begin + i) * size_t(S) + size_t(j)];
                size_t at = (size_t(i) * size_t(S) + size_t(j)) * 3;
                positions[at] = ray.origin.x + ts * ray.direction.x;
                positions[at + 1] = ray.origin.y + ts * ray.direction.y;
                positions[at + 2] = ray.origin.z + ts * ray.direction.z;
            }
        }

        std::vector<double> density, albedo;
        field.query_batch(positions, count, density, albedo);

        Tensor od({r, S});
        for (size_t i = 0; i < count; ++i) od.at(int64_t(i)) = density[i] * plan.delta;
        Tensor odcum = matmul_values(od, ltri);

        for (int i = 0; i < r; ++i) {
            double alpha = 0.0;
            double col[3] = {0.0, 0.0, 0.0};
            for (int j = 0; j < S; ++j) {
                int64_t idx = int64_t(i) * S + j;
                double trans = std::exp(-odcum.at(idx));
                double a = 1.0 - std::exp(-od.at(idx));
                double w = trans * a;
                if (plan.shading == ShadingMode::Albedo) {
                    for (int ch = 0; ch < 3; ++ch)
                        col[ch] += w * albedo[size_t(idx) * 3 + size_t(ch)];
                } else {
                    for (int ch = 0; ch < 3; ++ch) col[ch] += w * 1.0;
                }
                alpha += w;
            }
            out.alpha[size_t(begin + i)] = alpha;
            for (int ch = 0; ch < 3; ++ch)
                out.rgb[size_t(begin + i) * 3 + size_t(ch)] = col[ch] + (1.0 - alpha) * bg[ch];
        }
    }
    return out;
}

RenderOutput render_field(const Field& field, const Camera& camera, const RenderConfig& cfg,
                          Rng& rng) {
    RenderPlan plan = make_render_plan(camera, cfg, rng);
    return render_field_with_plan(field, plan);
}

namespace {

class PlacedField final : public Field {
public:
    PlacedField(const Field& base, RigidScaleTransform to_local)
        : base_(base), to_local_(to_local) {}

    FieldKind kind() const override { return base_.kind(); }
    FieldQueryResult query(const Vec3& p) const override {
        return base_.query(transform_point(p, to_local_));
    }
    TapeFieldOutput tape_query(Tape&, Val, bool) const override {
        throw ContractError("placed field views are render-only");
    }
    std::vector<double> serialize() const override {
        throw ContractError("placed field views are render-only");
    }

private:
    const Field& base_;
    RigidScaleTransform to_local_;
};

}  // namespace

RenderOutput render_field_placed(const Field& field, const RigidScaleTransform& to_local,
                                 const Camera& camera, const RenderConfig& cfg, Rng& rng) {
    PlacedField view(field, to_local);
    return render_field(view, camera, cfg, rng);
}

}  // namespace layl
