#include <cmath>

#include "doctest.h"
#include "layl/errors.hpp"
#include "layl/fdcheck.hpp"
#include "layl/renderer.hpp"

using namespace layl;

namespace {

SceneModel two_blob_scene(uint64_t seed, int n_layouts) {
    Rng rng(seed);
    SceneModel model;
    model.add_blob_field({0, 0, 0}, 0.35, 2.0, {0.9, 0.2, 0.2});
    model.add_blob_field({0, 0, 0}, 0.3, 2.0, {0.2, 0.3, 0.9});
    model.init_layouts(n_layouts, rng);
    return model;
}

double mse(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        double d = a[i] - b[i];
        s += d * d;
    }
    return s / double(a.size());
}

}  // namespace

TEST_CASE("camera sampling statistics and restricted ranges") {
    Rng rng(3);
    CameraRanges ranges;
    double sum_el = 0.0;
    const int draws = 100000;
    for (int i = 0; i < draws; ++i) sum_el += sample_camera(rng, ranges).elevation_deg;
    CHECK(std::fabs(sum_el / draws - (-45.0)) < 1.0);

    CameraRanges narrow;
    narrow.azimuth_min_deg = 10.0;
    narrow.azimuth_max_deg = 100.0;
    for (int i = 0; i < 1000; ++i) {
        Camera c = sample_camera(rng, narrow);
        CHECK(c.azimuth_deg >= 10.0);
        CHECK(c.azimuth_deg <= 100.0);
    }

    Rng a(9), b(9);
    for (int i = 0; i < 50; ++i) {
        Camera ca = sample_camera(a, ranges);
        Camera cb = sample_camera(b, ranges);
        CHECK(ca.azimuth_deg == cb.azimuth_deg);
        CHECK(ca.elevation_deg == cb.elevation_deg);
    }

    CameraRanges empty;
    empty.azimuth_min_deg = 200.0;
    empty.azimuth_max_deg = 100.0;
    CHECK_THROWS_AS(sample_camera(rng, empty), ConfigError);
}

TEST_CASE("pinhole rays are unit length and the center ray is principal") {
    Camera cam;
    cam.azimuth_deg = 33.0;
    cam.elevation_deg = -28.0;
    auto rays = generate_rays(cam, 9, 9);
    for (const Ray& r : rays) CHECK(std::fabs(r.direction.norm() - 1.0) < 1e-12);

    Vec3 principal = (cam.look_at - cam.position()).normalized();
    const Ray& center = rays[size_t(4 * 9 + 4)];
    CHECK(std::fabs(center.direction.x - principal.x) < 1e-9);
    CHECK(std::fabs(center.direction.y - principal.y) < 1e-9);
    CHECK(std::fabs(center.direction.z - principal.z) < 1e-9);
}

TEST_CASE("opposite azimuths give antiparallel center rays") {
    Camera a, b;
    a.azimuth_deg = 0.0;
    b.azimuth_deg = 180.0;
    a.elevation_deg = b.elevation_deg = 0.0;
    Ray ra = generate_rays(a, 5, 5)[size_t(2 * 5 + 2)];
    Ray rb = generate_rays(b, 5, 5)[size_t(2 * 5 + 2)];
    CHECK(std::fabs(ra.direction.x + rb.direction.x) < 1e-9);
    CHECK(std::fabs(ra.direction.y + rb.direction.y) < 1e-9);
    CHECK(std::fabs(ra.direction.z + rb.direction.z) < 1e-9);
}

TEST_CASE("empty scene renders the background with zero alpha") {
    SceneModel model;
    std::vector<float> zeros(8, 0.0f), rgb(24, 0.5f);
    model.add_voxel_field(2, 2, 2, {-1, -1, -1}, {1, 1, 1}, zeros, rgb);
    Rng rng(5);
    model.init_layouts(1, rng);
    model.set_transform(0, 0, RigidScaleTransform::identity());

    RenderConfig cfg;
    cfg.width = cfg.height = 8;
    cfg.samples_per_ray = 16;
    cfg.background_color = {0.25, 0.5, 0.75};
    Camera cam;
    cam.elevation_deg = -30.0;
    Rng render_rng(7);
    RenderOutput out = render(model, 0, cam, cfg, render_rng);
    for (size_t i = 0; i < out.alpha.size(); ++i) {
        CHECK(out.alpha[i] == 0.0);
        CHECK(out.rgb[3 * i] == 0.25);
        CHECK(out.rgb[3 * i + 1] == 0.5);
        CHECK(out.rgb[3 * i + 2] == 0.75);
    }
}

TEST_CASE("composited render matches a per-sample point-transform oracle") {
    SceneModel model = two_blob_scene(11, 2);
    RenderConfig cfg;
    cfg.width = cfg.height = 6;
    cfg.samples_per_ray = 24;
    cfg.near = 1.0;
    cfg.far = 5.0;
    cfg.background_color = {0.1, 0.2, 0.3};
    Camera cam;
    cam.elevation_deg = -25.0;
    cam.azimuth_deg = 140.0;

    Rng rng(13);
    RenderPlan plan = make_render_plan(cam, cfg, rng);
    RenderOutput got = render_with_plan(model, 1, plan);

    const int S = plan.samples;
    for (int p = 0; p < plan.ray_count(); ++p) {
        const Ray& ray = plan.rays[size_t(p)];
        double od_prefix = 0.0;
        double alpha = 0.0;
        double col[3] = {0, 0, 0};
        for (int j = 0; j < S; ++j) {
            double ts = plan.ts[size_t(p) * size_t(S) + size_t(j)];
            double total = 0.0;
            Vec3 num{};
            for (int k = 0; k < model.field_count(); ++k) {
                Vec3 local = transform_point(ray.at(ts), model.transform(1, k));
                FieldQueryResult q = model.field(k).query(local);
                total += q.density;
                num = num + q.albedo * q.density;
            }
            Vec3 rho = total > kCombineEps ? num * (1.0 / total) : Vec3{};
            double od = total * plan.delta;
            double trans = std::exp(-od_prefix);
            double a = 1.0 - std::exp(-od);
            double w = trans * a;
            col[0] += w * rho.x;
            col[1] += w * rho.y;
            col[2] += w * rho.z;
            alpha += w;
            od_prefix += od;
        }
        CHECK(std::fabs(got.alpha[size_t(p)] - alpha) < 1e-9);
        CHECK(std::fabs(got.rgb[3 * size_t(p)] - (col[0] + (1 - alpha) * 0.1)) < 1e-9);
        CHECK(std::fabs(got.rgb[3 * size_t(p) + 1] - (col[1] + (1 - alpha) * 0.2)) < 1e-9);
        CHECK(std::fabs(got.rgb[3 * size_t(p) + 2] - (col[2] + (1 - alpha) * 0.3)) < 1e-9);
    }
}

TEST_CASE("alpha stays in range and never decreases when densities double") {
    SceneModel lo = two_blob_scene(17, 1);
    SceneModel hi = two_blob_scene(17, 1);
    static_cast<BlobField&>(hi.field(0)).set_amplitude(4.0);
    static_cast<BlobField&>(hi.field(1)).set_amplitude(4.0);

    RenderConfig cfg;
    cfg.width = cfg.height = 10;
    cfg.samples_per_ray = 32;
    Camera cam;
    cam.elevation_deg = -40.0;
    Rng ra(23), rb(23);
    RenderOutput a = render(lo, 0, cam, cfg, ra);
    RenderOutput b = render(hi, 0, cam, cfg, rb);
    for (size_t i = 0; i < a.alpha.size(); ++i) {
        CHECK(a.alpha[i] >= 0.0);
        CHECK(a.alpha[i] <= 1.0);
        CHECK(b.alpha[i] >= a.alpha[i] - 1e-12);
    }
}

TEST_CASE("composite alpha dominates every per-field alpha") {
    SceneModel model = two_blob_scene(29, 2);
    RenderConfig cfg;
    cfg.width = cfg.height = 8;
    cfg.samples_per_ray = 24;
    Camera cam;
    cam.elevation_deg = -35.0;
    Rng rng(31);
    RenderOutput out = render(model, 0, cam, cfg, rng);
    for (size_t i = 0; i < out.alpha.size(); ++i)
        for (const auto& fa : out.per_field_alpha)
            CHECK(out.alpha[i] >= fa[i] - 1e-9);
}

TEST_CASE("K=1 identity render is bit-identical to the bare field render") {
    SceneModel model;
    model.add_blob_field({0.0, 0.0, 0.0}, 0.5, 2.0, {0.7, 0.4, 0.2});
    Rng rng(37);
    model.init_layouts(1, rng);
    model.set_transform(0, 0, RigidScaleTransform::identity());

    RenderConfig cfg;
    cfg.width = cfg.height = 9;
    cfg.samples_per_ray = 24;
    cfg.near = 0.5;
    cfg.far = 3.5;
    cfg.background_color = {0.3, 0.6, 0.9};
    Camera cam;
    cam.radius = 2.0;
    cam.elevation_deg = -20.0;

    Rng plan_rng(41);
    RenderPlan plan = make_render_plan(cam, cfg, plan_rng);
    RenderOutput composited = render_with_plan(model, 0, plan);
    RenderOutput bare = render_field_with_plan(model.field(0), plan);

    for (size_t i = 0; i < composited.rgb.size(); ++i) CHECK(composited.rgb[i] == bare.rgb[i]);
    for (size_t i = 0; i < composited.alpha.size(); ++i) {
        CHECK(composited.alpha[i] == bare.alpha[i]);
        CHECK(composited.per_field_alpha[0][i] == composited.alpha[i]);
    }
    CHECK(bare.per_field_alpha.empty());
}

TEST_CASE("renders are deterministic under a fixed seed") {
    SceneModel model = two_blob_scene(43, 1);
    RenderConfig cfg;
    cfg.width = cfg.height = 8;
    cfg.samples_per_ray = 16;
    cfg.background = BackgroundMode::RandomUniform;
    Camera cam;
    Rng a(99), b(99);
    RenderOutput ra = render(model, 0, cam, cfg, a);
    RenderOutput rb = render(model, 0, cam, cfg, b);
    CHECK(ra.rgb == rb.rgb);
    CHECK(ra.alpha == rb.alpha);
    CHECK(ra.background.x == rb.background.x);
}

TEST_CASE("render gradients pass a finite-difference check on layout parameters") {
    SceneModel model = two_blob_scene(51, 1);
    RenderConfig cfg;
    cfg.width = cfg.height = 8;
    cfg.samples_per_ray = 8;
    cfg.background_color = {0.2, 0.2, 0.2};
    Camera cam;
    cam.elevation_deg = -30.0;
    cam.azimuth_deg = 75.0;
    Rng plan_rng(53);
    RenderPlan plan = make_render_plan(cam, cfg, plan_rng);

    // Fixed target from a shifted copy of the scene.
    SceneModel target_model = two_blob_scene(52, 1);
    RenderOutput target = render_with_plan(target_model, 0, plan);

    auto loss_value = [&]() {
        RenderOutput out = render_with_plan(model, 0, plan);
        return mse(out.rgb, target.rgb);
    };
    auto loss_grad = [&]() {
        model.params().zero_grads();
        RenderOutput out = render_with_plan(model, 0, plan);
        PixelGradients g;
        g.rgb.resize(out.rgb.size());
        for (size_t i = 0; i < out.rgb.size(); ++i)
            g.rgb[i] = 2.0 * (out.rgb[i] - target.rgb[i]) / double(out.rgb.size());
        backprop_render(model, 0, plan, g);
        return mse(out.rgb, target.rgb);
    };
    FdReport report = finite_diff_check(model.params(), loss_value, loss_grad, 1e-4);
    CHECK(report.max_rel <= 1e-3);
}
