#include <cstdio>
#include <fstream>

#include "doctest.h"
#include "layl/checkpoint.hpp"
#include "layl/config.hpp"
#include "layl/errors.hpp"
#include "layl/image_io.hpp"
#include "layl/voxel_io.hpp"

using namespace layl;

namespace {

std::string temp_path(const std::string& name) { return "/tmp/layl_test_" + name; }

std::string slurp(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    REQUIRE(bool(f));
    return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

void spit(const std::string& path, const std::string& content) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    REQUIRE(bool(f));
    f.write(content.data(), std::streamsize(content.size()));
}

SceneModel make_mixed_model(uint64_t seed) {
    Rng rng(seed);
    SceneModel model;
    MlpConfig mlp;
    mlp.encoding_octaves = 2;
    mlp.hidden_layers = 2;
    mlp.hidden_width = 8;
    model.add_mlp_field(mlp, rng);
    model.add_blob_field({0.2, -0.1, 0.4}, 0.5, 1.5, {0.9, 0.1, 0.2});
    std::vector<float> density(8, 0.3f), rgb(24, 0.6f);
    model.add_voxel_field(2, 2, 2, {-1, -1, -1}, {1, 1, 1}, density, rgb);
    model.init_layouts(2, rng);
    return model;
}

}  // namespace

TEST_CASE("checkpoint save/load round-trips every parameter bit") {
    SceneModel model = make_mixed_model(5);
    std::string path = temp_path("roundtrip.layl");
    save_checkpoint(model, {}, path);

    LoadedCheckpoint loaded = load_checkpoint(path);
    REQUIRE(loaded.model->field_count() == 3);
    REQUIRE(loaded.model->layout_count() == 2);

    REQUIRE(loaded.model->params().group_count() == model.params().group_count());
    for (int g = 0; g < model.params().group_count(); ++g) {
        CHECK(loaded.model->params().group(g).name == model.params().group(g).name);
        CHECK(loaded.model->params().group(g).value == model.params().group(g).value);
    }

    // Re-saving the loaded model reproduces the file byte for byte.
    std::string path2 = temp_path("roundtrip2.layl");
    save_checkpoint(*loaded.model, {}, path2);
    CHECK(slurp(path) == slurp(path2));
}

TEST_CASE("checkpoints carry the optimizer blob") {
    SceneModel model = make_mixed_model(7);
    std::vector<double> blob = {3.0, 1.5, -2.5, 0.25};
    std::string path = temp_path("opt.layl");
    save_checkpoint(model, blob, path);
    LoadedCheckpoint loaded = load_checkpoint(path);
    CHECK(loaded.optimizer_blob == blob);
}

TEST_CASE("corrupted checkpoints are rejected before any model is built") {
    SceneModel model = make_mixed_model(9);
    std::string path = temp_path("corrupt.layl");
    save_checkpoint(model, {}, path);
    std::string bytes = slurp(path);
    bytes[bytes.size() / 2] ^= 0x40;
    spit(path, bytes);
    CHECK_THROWS_AS(load_checkpoint(path), IoError);

    spit(path, "LAYL");
    CHECK_THROWS_AS(load_checkpoint(path), IoError);
}

TEST_CASE("VOXL files round-trip exactly") {
    std::vector<float> density = {0.0f, 0.25f, 0.5f, 0.75f, 1.0f, 1.25f, 1.5f, 2.0f};
    std::vector<float> rgb(24);
    for (size_t i = 0; i < rgb.size(); ++i) rgb[i] = float(i) / 24.0f;
    VoxelField vox(2, 2, 2, {-1.5, -0.5, 0.0}, {1.5, 0.5, 2.0}, density, rgb);

    std::string path = temp_path("grid.voxl");
    save_voxel(vox, path);
    VoxelField back = load_voxel(path);
    CHECK(back.nx() == 2);
    CHECK(back.density_grid() == density);
    CHECK(back.rgb_grid() == rgb);
    CHECK(back.bounds_min().x == -1.5);
    CHECK(back.bounds_max().z == 2.0);
}

TEST_CASE("VOXL size mismatches name the expected and actual byte counts") {
    std::vector<float> density(8, 0.1f), rgb(24, 0.2f);
    VoxelField vox(2, 2, 2, {-1, -1, -1}, {1, 1, 1}, density, rgb);
    std::string path = temp_path("short.voxl");
    save_voxel(vox, path);
    std::string bytes = slurp(path);
    spit(path, bytes.substr(0, bytes.size() - 5));
    try {
        load_voxel(path);
        FAIL("expected an IoError");
    } catch (const IoError& e) {
        std::string msg = e.what();
        CHECK(msg.find("128") != std::string::npos);  // expected payload bytes
        CHECK(msg.find("123") != std::string::npos);  // actual payload bytes
    }

    spit(path, "VOXL nonsense\n");
    CHECK_THROWS_AS(load_voxel(path), IoError);
}

TEST_CASE("rasterized blobs reproduce the analytic field at grid nodes") {
    BlobField blob({0.1, 0.0, -0.2}, 0.4, 1.8, {0.8, 0.2, 0.1});
    VoxelField vox = rasterize_to_voxel(blob, 9, 9, 9, {-1, -1, -1}, {1, 1, 1});
    for (int z = 0; z < 9; z += 2)
        for (int y = 0; y < 9; y += 4)
            for (int x = 0; x < 9; x += 2) {
                Vec3 p{-1.0 + 0.25 * x, -1.0 + 0.25 * y, -1.0 + 0.25 * z};
                CHECK(std::fabs(vox.query(p).density - blob.query(p).density) < 1e-6);
            }
}

TEST_CASE("image export quantizes half-up and PPM round-trips exactly") {
    std::string path = temp_path("gray.ppm");
    export_image(std::vector<double>(4 * 4 * 3, 0.5), 4, 4, path);
    std::string bytes = slurp(path);
    // Payload bytes are all 128 (0.5 * 255 = 127.5 rounds up).
    std::string payload = bytes.substr(bytes.size() - 48);
    for (char c : payload) CHECK(uint8_t(c) == 128);

    export_image(std::vector<double>(4 * 4 * 3, 0.0), 4, 4, path);
    bytes = slurp(path);
    for (size_t i = bytes.size() - 48; i < bytes.size(); ++i) CHECK(bytes[i] == 0);

    // Values already on the 8-bit grid survive a write/read cycle untouched.
    std::vector<double> grid(4 * 4 * 3);
    for (size_t i = 0; i < grid.size(); ++i) grid[i] = double(i % 256) / 255.0;
    export_image(grid, 4, 4, path);
    int w = 0, h = 0;
    std::vector<double> back = import_image(path, w, h);
    CHECK(w == 4);
    CHECK(h == 4);
    CHECK(back == grid);
}

TEST_CASE("PNG export and import round-trip quantized values") {
    std::string path = temp_path("img.png");
    Rng rng(3);
    std::vector<double> img(8 * 8 * 3);
    for (auto& v : img) v = rng.uniform();
    export_image(img, 8, 8, path);
    int w = 0, h = 0;
    std::vector<double> back = import_image(path, w, h);
    REQUIRE(w == 8);
    REQUIRE(h == 8);
    for (size_t i = 0; i < img.size(); ++i) {
        double quantized = std::floor(img[i] * 255.0 + 0.5) / 255.0;
        CHECK(std::fabs(back[i] - quantized) < 1e-12);
    }
}

TEST_CASE("run configs parse with defaults and strict keys") {
    RunConfig cfg = parse_run_config(R"(
[scene]
k = 2
n_layouts = 3
prompt = "a test scene"  # trailing comment

[train]
steps = 100
seed = 7
mode = "decompose"

[render]
width = 16
height = 16
background = "fixed"
background_color = [0.1, 0.2, 0.3]

[loss]
lambda_rec = 0.1

[freeze]
fields = [0]
)");
    CHECK(cfg.k == 2);
    CHECK(cfg.n_layouts == 3);
    CHECK(cfg.train.prompt == "a test scene");
    CHECK(cfg.train.steps == 100);
    CHECK(cfg.train.seed == 7);
    CHECK(cfg.train.mode == RunMode::Decompose);
    CHECK(cfg.train.render.width == 16);
    CHECK(cfg.train.render.background == BackgroundMode::Fixed);
    CHECK(cfg.train.render.background_color.y == 0.2);
    CHECK(cfg.train.loss.lambda_rec == 0.1);
    CHECK(cfg.train.loss.lambda_acc == 0.01);   // default
    CHECK(cfg.train.loss.lambda_empty == 0.05); // default
    CHECK(cfg.freeze_fields == std::vector<int>{0});
    CHECK(cfg.provider == "mock");
    CHECK(cfg.train.render.samples_per_ray == 64);

    CHECK_THROWS_AS(parse_run_config("[scene]\nk = 2\nnot_a_key = 1\n"), ConfigError);
    CHECK_THROWS_AS(parse_run_config("[nowhere]\nx = 1\n"), ConfigError);
    CHECK_THROWS_AS(parse_run_config("[train]\nmode = \"explode\"\n"), ConfigError);
    CHECK_THROWS_AS(parse_run_config("[scene]\nk = \n"), ConfigError);
    CHECK_THROWS_AS(parse_run_config("[scene]\nk = 1\nk = 2\n"), ConfigError);
}
