#include "layl/trainer.hpp"

#include <cmath>

#include "json.hpp"
#include "layl/errors.hpp"

namespace layl {

int TrainConfig::warmup_steps() const {
    double scaled = double(warmup_reference) * double(steps) / double(reference_steps);
    return std::max(1, int(std::lround(scaled)));
}

int TrainConfig::blob_decay_steps() const {
    double scaled = double(blob_decay_reference) * double(steps) / double(reference_steps);
    return std::max(1, int(std::lround(scaled)));
}

double lr_at(int step, const TrainConfig& cfg) {
    if (step < 0 || step > cfg.steps) throw ContractError("lr_at: step out of range");
    int warmup = std::min(cfg.warmup_steps(), cfg.steps);
    auto log_lerp = [](double a, double b, double u) {
        return std::exp(std::log(a) + (std::log(b) - std::log(a)) * u);
    };
    if (step <= warmup) {
        if (step == 0) return cfg.start_lr;
        if (step == warmup) return cfg.peak_lr;
        return log_lerp(cfg.start_lr, cfg.peak_lr, double(step) / double(warmup));
    }
    if (step == cfg.steps) return cfg.end_lr;
    double u = double(step - warmup) / double(cfg.steps - warmup);
    return log_lerp(cfg.peak_lr, cfg.end_lr, u);
}

void AdamOptimizer::ensure_state(const ParamStore& params) {
    if (int(m_.size()) == params.group_count()) return;
    m_.resize(size_t(params.group_count()));
    v_.resize(size_t(params.group_count()));
    for (int g = 0; g < params.group_count(); ++g) {
        m_[size_t(g)].assign(params.group(g).value.size(), 0.0);
        v_[size_t(g)].assign(params.group(g).value.size(), 0.0);
    }
}

void AdamOptimizer::step(ParamStore& params, double lr) {
    ensure_state(params);
    ++t_;
    double bc1 = 1.0 - std::pow(beta1_, double(t_));
    double bc2 = 1.0 - std::pow(beta2_, double(t_));
    for (int g = 0; g < params.group_count(); ++g) {
        ParamGroup& grp = params.group(g);
        if (grp.frozen) continue;
        double step_lr = lr * grp.lr_multiplier;
        auto& m = m_[size_t(g)];
        auto& v = v_[size_t(g)];
        for (size_t i = 0; i < grp.value.size(); ++i) {
            double grad = grp.grad[i];
            m[i] = beta1_ * m[i] + (1.0 - beta1_) * grad;
            v[i] = beta2_ * v[i] + (1.0 - beta2_) * grad * grad;
            double mhat = m[i] / bc1;
            double vhat = v[i] / bc2;
            grp.value[i] -= step_lr * mhat / (std::sqrt(vhat) + eps_);
        }
    }
}

std::vector<double> AdamOptimizer::serialize(const ParamStore& params) const {
    std::vector<double> out;
    out.push_back(double(t_));
    for (int g = 0; g < params.group_count(); ++g) {
        if (int(m_.size()) != params.group_count()) {
            const auto& vals = params.group(g).value;
            out.insert(out.end(), 2 * vals.size(), 0.0);
        } else {
            out.insert(out.end(), m_[size_t(g)].begin(), m_[size_t(g)].end());
            out.insert(out.end(), v_[size_t(g)].begin(), v_[size_t(g)].end());
        }
    }
    return out;
}

void AdamOptimizer::deserialize(const ParamStore& params, const std::vector<double>& blob) {
    size_t expect = 1;
    for (int g = 0; g < params.group_count(); ++g)
        expect += 2 * params.group(g).value.size();
    if (blob.size() != expect) throw IoError("optimizer state size mismatch");
    t_ = int64_t(blob[0]);
    m_.assign(size_t(params.group_count()), {});
    v_.assign(size_t(params.group_count()), {});
    size_t pos = 1;
    for (int g = 0; g < params.group_count(); ++g) {
        size_t n = params.group(g).value.size();
        m_[size_t(g)].assign(blob.begin() + int64_t(pos), blob.begin() + int64_t(pos + n));
        pos += n;
        v_[size_t(g)].assign(blob.begin() + int64_t(pos), blob.begin() + int64_t(pos + n));
        pos += n;
    }
}

std::string step_report_json(const StepReport& r) {
    nlohmann::json j;
    j["step"] = r.step;
    j["layout"] = r.layout;
    j["loss_total"] = r.loss_total;
    j["loss_sds"] = r.loss_sds;
    j["loss_empty"] = r.loss_empty;
    j["loss_acc"] = r.loss_acc;
    j["loss_rec"] = r.loss_rec;
    j["lr"] = r.lr;
    return j.dump();
}

Trainer::Trainer(SceneModel& model, TrainConfig cfg, GuidanceProvider& provider)
    : model_(model), cfg_(std::move(cfg)),
      provider_(provider), rng_(cfg_.seed),
      opt_(cfg_.beta1, cfg_.beta2, cfg_.adam_eps) {
    if (cfg_.steps < 1) throw ConfigError("trainer: steps must be positive");
    if (cfg_.view_ring_count > 0) {
        for (int v = 0; v < cfg_.view_ring_count; ++v) {
            Camera cam;
            cam.azimuth_deg = 360.0 * double(v) / double(cfg_.view_ring_count);
            cam.elevation_deg = cfg_.view_ring_elevation_deg;
            cam.radius = cfg_.camera.radius;
            cam.fov_y_deg = cfg_.camera.fov_y_deg;
            ring_.push_back(cam);
        }
    }
    for (int k = 0; k < model_.field_count(); ++k) {
        auto* mlp = dynamic_cast<MlpField*>(&model_.field(k));
        blob_amp0_.push_back(mlp ? mlp->blob_amplitude() : -1.0);
    }
}

void Trainer::apply_blob_schedule(int step) {
    int decay = cfg_.blob_decay_steps();
    for (int k = 0; k < model_.field_count(); ++k) {
        if (blob_amp0_[size_t(k)] < 0.0) continue;
        double frac = std::max(0.0, 1.0 - double(step) / double(decay));
        static_cast<MlpField&>(model_.field(k)).set_blob_amplitude(blob_amp0_[size_t(k)] * frac);
    }
}

StepReport Trainer::train_step(int step) {
    const int K = model_.field_count();
    StepReport report;
    report.step = step;
    report.lr = lr_at(step, cfg_);

    apply_blob_schedule(step);

    // Draw order is fixed: camera/view, layout, shading, render plan
    // (background then jitters), SDS (t then noise), then the decompose plan.
    Camera cam;
    if (!ring_.empty()) {
        report.view_index = int(rng_.uniform_index(uint64_t(ring_.size())));
        cam = ring_[size_t(report.view_index)];
    } else {
        cam = sample_camera(rng_, cfg_.camera);
    }
    report.layout = sample_layout(model_.layout_count(), rng_);

    RenderConfig rc = cfg_.render;
    if (rc.shading == ShadingMode::Albedo && rng_.uniform() < cfg_.textureless_probability) {
        rc.shading = ShadingMode::Textureless;
        report.textureless = true;
    }
    RenderPlan plan = make_render_plan(cam, rc, rng_);

    model_.params().zero_grads();
    report.loss_empty.resize(size_t(K));
    report.loss_acc.resize(size_t(K));
    // The guidance call happens inside the gradient closure, before any
    // backward pass has touched the store, so an aborted step leaves no
    // partial gradients behind.
    render_and_backprop(model_, report.layout, plan, [&](const RenderOutput& out) {
        if (view_callback_ && report.view_index >= 0) view_callback_(report.view_index);
        SdsResult sds = sds_pixel_gradient(out.rgb, plan.width, plan.height, cfg_.prompt,
                                           provider_, cfg_.schedule, cfg_.cfg_strength, rng_);
        report.loss_sds = sds.surrogate;
        report.sds_t = sds.t;

        PixelGradients grads;
        grads.rgb = std::move(sds.pixel_grad);
        grads.field_alpha.resize(size_t(K));
        for (int k = 0; k < K; ++k) {
            LossWithGrad empty = empty_loss(out.per_field_alpha[size_t(k)], cfg_.loss);
            LossWithGrad acc = acc_loss(out.per_field_alpha[size_t(k)], cfg_.loss);
            report.loss_empty[size_t(k)] = empty.value;
            report.loss_acc[size_t(k)] = acc.value;
            auto& g = grads.field_alpha[size_t(k)];
            g.resize(empty.grad.size());
            for (size_t i = 0; i < g.size(); ++i)
                g[i] = cfg_.loss.lambda_empty * empty.grad[i] + acc.grad[i];
        }
        return grads;
    });

    // Decompose: a second render of layout 0 carries the reconstruction
    // term against the target volume viewed through the same camera.
    if (cfg_.mode == RunMode::Decompose) {
        if (!target_field_) throw ConfigError("decompose mode requires a target volume");
        RenderConfig rec_rc = cfg_.render;
        rec_rc.shading = ShadingMode::Albedo;
        RenderPlan rec_plan = make_render_plan(cam, rec_rc, rng_);
        RenderOutput target = render_field_with_plan(*target_field_, rec_plan);
        render_and_backprop(model_, 0, rec_plan, [&](const RenderOutput& out) {
            LossWithGrad rec = recon_loss(out.rgb, target.rgb, cfg_.loss);
            report.loss_rec = rec.value;
            PixelGradients grads;
            grads.rgb = std::move(rec.grad);
            return grads;
        });
    }

    report.loss_total = report.loss_sds + report.loss_rec;
    for (int k = 0; k < K; ++k)
        report.loss_total +=
            cfg_.loss.lambda_empty * report.loss_empty[size_t(k)] + report.loss_acc[size_t(k)];

    opt_.step(model_.params(), report.lr);
    return report;
}

std::vector<StepReport> Trainer::run(const std::function<void(const StepReport&)>& on_step) {
    int64_t expect = 8LL * model_.layout_count() * model_.field_count();
    if (model_.layout_scalar_count() != expect)
        throw ContractError("layout parameter accounting violated: expected " +
                            std::to_string(expect) + " scalars");

    if (cfg_.mode == RunMode::Arrange) {
        for (int k = 0; k < model_.field_count(); ++k) model_.freeze_field(k);
    }
    if (cfg_.mode == RunMode::Decompose && !target_field_)
        throw ConfigError("decompose mode requires a target volume");

    std::vector<StepReport> reports;
    reports.reserve(size_t(cfg_.steps));
    for (int step = 0; step < cfg_.steps; ++step) {
        int attempts = 0;
        for (;;) {
            try {
                reports.push_back(train_step(step));
                break;
            } catch (const BridgeTimeoutError&) {
                if (++attempts > cfg_.step_retries) throw;
            }
        }
        if (on_step) on_step(reports.back());
    }
    return reports;
}

}  // namespace layl
