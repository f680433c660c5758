#include <cmath>

#include "doctest.h"
#include "layl/errors.hpp"
#include "layl/field.hpp"
#include "layl/rng.hpp"

using namespace layl;

TEST_CASE("blob density peak and one-sigma values") {
    BlobField blob({0, 0, 0}, 1.0, 2.0, {1, 0, 0});
    CHECK(blob.query({0, 0, 0}).density == 2.0);
    double at_sigma = blob.query({1.0, 0, 0}).density;
    CHECK(std::fabs(at_sigma - 2.0 * std::exp(-0.5)) < 1e-12);
    CHECK(std::fabs(at_sigma - 1.2130613194252668) < 1e-12);
}

TEST_CASE("blob_bias peak, decay, and disabled cases") {
    CHECK(blob_bias({0, 0, 0}, 5.0, 0.2) == 5.0);
    CHECK(blob_bias({100, 0, 0}, 5.0, 0.2) == 0.0);  // underflows to zero
    CHECK(blob_bias({0.3, -0.1, 0.2}, 0.0, 0.2) == 0.0);
}

TEST_CASE("positional encoding lengths and zero-input values") {
    auto raw = positional_encode({0.3, -0.7, 1.1}, 0);
    CHECK(raw.size() == 3);
    CHECK(raw[0] == 0.3);

    auto at_zero = positional_encode({0, 0, 0}, 4);
    CHECK(at_zero.size() == 3 + 6 * 4);
    for (int l = 0; l < 4; ++l) {
        for (int c = 0; c < 3; ++c) {
            CHECK(at_zero[size_t(3 + 6 * l + c)] == 0.0);      // sin terms
            CHECK(at_zero[size_t(3 + 6 * l + 3 + c)] == 1.0);  // cos terms
        }
    }

    CHECK(positional_encode({1, 2, 3}, 6).size() == 39);
}

TEST_CASE("fresh MLP with zeroed weights reduces to softplus of the density bias") {
    Rng rng(3);
    ParamStore ps;
    MlpConfig cfg;
    cfg.encoding_octaves = 2;
    cfg.hidden_layers = 2;
    cfg.hidden_width = 8;
    MlpField mlp(cfg, ps, "f", rng);
    for (int gid : mlp.param_group_ids())
        for (double& v : ps.group(gid).value) v = 0.0;
    double b = 0.4;
    ps.group(mlp.param_group_ids().back()).value[0] = b;

    // Far enough that the blob bias has vanished, still inside the
    // full-window region of the bounding sphere.
    Vec3 far_mu{1.2, 0.0, 0.0};
    double d = mlp.query(far_mu).density;
    CHECK(std::fabs(d - std::log1p(std::exp(b))) < 1e-7);

    // Outside the bounding sphere the density is forced to zero.
    CHECK(mlp.query({10.0, 0.0, 0.0}).density == 0.0);
    CHECK(mlp.query({1.51, 0.0, 0.0}).density == 0.0);
}

TEST_CASE("MLP density is non-negative and albedo lies in [0,1]^3") {
    Rng rng(9);
    ParamStore ps;
    MlpConfig cfg;
    cfg.encoding_octaves = 3;
    cfg.hidden_layers = 2;
    cfg.hidden_width = 16;
    MlpField mlp(cfg, ps, "f", rng);
    for (int i = 0; i < 200; ++i) {
        Vec3 p{rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2)};
        FieldQueryResult r = mlp.query(p);
        CHECK(r.density >= 0.0);
        CHECK(r.albedo.x >= 0.0);
        CHECK(r.albedo.x <= 1.0);
        CHECK(r.albedo.y >= 0.0);
        CHECK(r.albedo.y <= 1.0);
        CHECK(r.albedo.z >= 0.0);
        CHECK(r.albedo.z <= 1.0);
    }
}

TEST_CASE("MLP queries are deterministic") {
    Rng rng(21);
    ParamStore ps;
    MlpConfig cfg;
    cfg.encoding_octaves = 2;
    cfg.hidden_layers = 2;
    cfg.hidden_width = 8;
    MlpField mlp(cfg, ps, "f", rng);
    Vec3 p{0.2, -0.4, 0.6};
    FieldQueryResult a = mlp.query(p);
    FieldQueryResult b = mlp.query(p);
    CHECK(a.density == b.density);
    CHECK(a.albedo.x == b.albedo.x);
}

TEST_CASE("taped field queries match the plain batched path bit for bit") {
    Rng rng(33);
    ParamStore ps;
    MlpConfig cfg;
    cfg.encoding_octaves = 2;
    cfg.hidden_layers = 2;
    cfg.hidden_width = 8;
    MlpField mlp(cfg, ps, "f", rng);
    BlobField blob({0.2, -0.1, 0.3}, 0.5, 1.5, {0.9, 0.5, 0.1});

    const int R = 3, S = 4;
    Tensor pos({R, S, 3});
    std::vector<double> flat;
    for (int64_t i = 0; i < pos.numel(); ++i) {
        pos.at(i) = rng.uniform(-1.6, 1.6);
        flat.push_back(pos.at(i));
    }

    for (const Field* f : {static_cast<const Field*>(&mlp), static_cast<const Field*>(&blob)}) {
        Tape t(&ps);
        TapeFieldOutput out = f->tape_query(t, t.constant(pos), true);
        std::vector<double> density, albedo;
        f->query_batch(flat, size_t(R * S), density, albedo);
        const Tensor& td = t.value(out.density);
        for (int64_t i = 0; i < td.numel(); ++i) CHECK(td.at(i) == density[size_t(i)]);
        for (int c = 0; c < 3; ++c) {
            const Tensor& ta = t.value(out.albedo[size_t(c)]);
            for (int64_t i = 0; i < ta.numel(); ++i)
                CHECK(ta.at(i) == albedo[size_t(i) * 3 + size_t(c)]);
        }
    }
}

TEST_CASE("voxel grid reproduces stored values at grid nodes") {
    std::vector<float> density = {0.1f, 0.2f, 0.3f, 0.4f, 0.5f, 0.6f, 0.7f, 0.8f};
    std::vector<float> rgb(24, 0.25f);
    rgb[3 * 7] = 0.9f;
    VoxelField vox(2, 2, 2, {-1, -1, -1}, {1, 1, 1}, density, rgb);

    // Grids store f32; expectations are the widened stored values.
    CHECK(vox.query({-1, -1, -1}).density == double(0.1f));
    CHECK(vox.query({1, -1, -1}).density == doctest::Approx(double(0.2f)).epsilon(1e-12));
    CHECK(vox.query({1, 1, 1}).density == doctest::Approx(double(0.8f)).epsilon(1e-12));
    CHECK(vox.query({1, 1, 1}).albedo.x == doctest::Approx(double(0.9f)).epsilon(1e-12));

    // Center is the mean of all corners.
    CHECK(vox.query({0, 0, 0}).density == doctest::Approx(0.45).epsilon(1e-6));

    // Outside the bounds everything is zero.
    CHECK(vox.query({1.01, 0, 0}).density == 0.0);
    CHECK(vox.query({0, 0, -2}).density == 0.0);
}

TEST_CASE("voxel taped query matches plain queries and masks the outside") {
    Rng rng(41);
    std::vector<float> density(27), rgb(81);
    for (auto& d : density) d = float(rng.uniform(0.0, 2.0));
    for (auto& c : rgb) c = float(rng.uniform(0.0, 1.0));
    VoxelField vox(3, 3, 3, {-1, -1, -1}, {1, 1, 1}, density, rgb);

    const int R = 2, S = 5;
    Tensor pos({R, S, 3});
    for (int64_t i = 0; i < pos.numel(); ++i) pos.at(i) = rng.uniform(-1.5, 1.5);

    Tape t;
    TapeFieldOutput out = vox.tape_query(t, t.constant(pos), true);
    const Tensor& td = t.value(out.density);
    for (int64_t i = 0; i < td.numel(); ++i) {
        Vec3 p{pos.at(3 * i), pos.at(3 * i + 1), pos.at(3 * i + 2)};
        FieldQueryResult q = vox.query(p);
        CHECK(td.at(i) == doctest::Approx(q.density).epsilon(1e-12));
        CHECK(t.value(out.albedo[0]).at(i) == doctest::Approx(q.albedo.x).epsilon(1e-12));
    }
}

TEST_CASE("field blobs round-trip through serialization") {
    Rng rng(55);
    ParamStore src_ps;
    MlpConfig cfg;
    cfg.encoding_octaves = 2;
    cfg.hidden_layers = 2;
    cfg.hidden_width = 8;
    MlpField mlp(cfg, src_ps, "f", rng);

    ParamStore dst_ps;
    auto rebuilt = field_from_blob(mlp.serialize(), dst_ps, "f");
    Vec3 p{0.3, 0.1, -0.2};
    FieldQueryResult a = mlp.query(p);
    FieldQueryResult b = rebuilt->query(p);
    CHECK(a.density == b.density);
    CHECK(a.albedo.y == b.albedo.y);

    BlobField blob({0.1, 0.2, 0.3}, 0.7, 1.1, {0.2, 0.4, 0.6});
    ParamStore unused;
    auto blob2 = field_from_blob(blob.serialize(), unused, "g");
    CHECK(blob2->query(p).density == blob.query(p).density);
}

TEST_CASE("invalid field constructions are rejected") {
    CHECK_THROWS_AS(BlobField({0, 0, 0}, -1.0, 1.0, {1, 1, 1}), ContractError);
    CHECK_THROWS_AS(BlobField({0, 0, 0}, 1.0, 0.0, {1, 1, 1}), ContractError);
    std::vector<float> density(8, -0.5f);
    std::vector<float> rgb(24, 0.0f);
    CHECK_THROWS_AS(VoxelField(2, 2, 2, {-1, -1, -1}, {1, 1, 1}, density, rgb), ContractError);
}
