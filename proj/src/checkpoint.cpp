#include "layl/checkpoint.hpp"

#include <zlib.h>

#include <cstring>
#include <fstream>

#include "layl/errors.hpp"

namespace layl {

namespace {

void put_u32(std::string& out, uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(char((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(char((v >> (8 * i)) & 0xff));
}

void put_f64(std::string& out, double d) {
    uint64_t bits;
    std::memcpy(&bits, &d, 8);
    put_u64(out, bits);
}

struct Reader {
    const std::string& data;
    size_t pos = 0;

    void need(size_t n, const char* what) const {
        if (pos + n > data.size())
            throw IoError(std::string("checkpoint truncated while reading ") + what);
    }
    uint32_t u32(const char* what) {
        need(4, what);
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= uint32_t(uint8_t(data[pos + size_t(i)])) << (8 * i);
        pos += 4;
        return v;
    }
    uint64_t u64(const char* what) {
        need(8, what);
        uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= uint64_t(uint8_t(data[pos + size_t(i)])) << (8 * i);
        pos += 8;
        return v;
    }
    double f64(const char* what) {
        uint64_t bits = u64(what);
        double d;
        std::memcpy(&d, &bits, 8);
        return d;
    }
};

}  // namespace

void save_checkpoint(const SceneModel& model, const std::vector<double>& optimizer_blob,
                     const std::string& path) {
    std::string out = "LAYL";
    put_u32(out, 1);
    put_u32(out, uint32_t(model.field_count()));
    put_u32(out, uint32_t(model.layout_count()));

    for (int k = 0; k < model.field_count(); ++k) {
        std::vector<double> blob = model.field(k).serialize();
        put_u64(out, uint64_t(blob.size()));
        for (double v : blob) put_f64(out, v);
    }

    for (int n = 0; n < model.layout_count(); ++n)
        for (int k = 0; k < model.field_count(); ++k) {
            RigidScaleTransform T = model.transform(n, k);
            for (double v : {T.rotation.x, T.rotation.y, T.rotation.z, T.rotation.w,
                             T.translation.x, T.translation.y, T.translation.z, T.scale})
                put_f64(out, v);
        }

    put_u64(out, uint64_t(optimizer_blob.size()));
    for (double v : optimizer_blob) put_f64(out, v);

    uint32_t crc = uint32_t(
        crc32(0L, reinterpret_cast<const Bytef*>(out.data()), uInt(out.size())));
    put_u32(out, crc);

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open " + path + " for writing");
    f.write(out.data(), std::streamsize(out.size()));
    if (!f) throw IoError("short write to " + path);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path);
    std::string content((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

    if (content.size() < 16 + 4) throw IoError(path + ": too small to be a checkpoint");

    // Integrity first: nothing is constructed from a corrupt file.
    uint32_t stored = 0;
    for (int i = 0; i < 4; ++i)
        stored |= uint32_t(uint8_t(content[content.size() - 4 + size_t(i)])) << (8 * i);
    uint32_t computed = uint32_t(crc32(
        0L, reinterpret_cast<const Bytef*>(content.data()), uInt(content.size() - 4)));
    if (stored != computed)
        throw IoError(path + ": CRC mismatch (file corrupt)");

    Reader r{content};
    r.need(4, "magic");
    if (content.compare(0, 4, "LAYL") != 0) throw IoError(path + ": bad magic");
    r.pos = 4;
    uint32_t version = r.u32("version");
    if (version != 1) throw IoError(path + ": unsupported version " + std::to_string(version));
    uint32_t K = r.u32("field count");
    uint32_t N = r.u32("layout count");
    if (K < 1 || N < 1) throw IoError(path + ": empty model");

    auto model = std::make_unique<SceneModel>();
    for (uint32_t k = 0; k < K; ++k) {
        uint64_t count = r.u64("field blob length");
        std::vector<double> blob(static_cast<size_t>(count));
        for (uint64_t i = 0; i < count; ++i) blob[size_t(i)] = r.f64("field blob");
        model->add_field_from_blob(blob);
    }

    LayoutSet set;
    set.layouts.resize(N);
    for (uint32_t n = 0; n < N; ++n) {
        set.layouts[n].transforms.resize(K);
        for (uint32_t k = 0; k < K; ++k) {
            RigidScaleTransform T;
            T.rotation.x = r.f64("layout");
            T.rotation.y = r.f64("layout");
            T.rotation.z = r.f64("layout");
            T.rotation.w = r.f64("layout");
            T.translation.x = r.f64("layout");
            T.translation.y = r.f64("layout");
            T.translation.z = r.f64("layout");
            T.scale = r.f64("layout");
            set.layouts[n].transforms[k] = T;
        }
    }
    model->init_layouts(set);

    LoadedCheckpoint out;
    uint64_t opt_count = r.u64("optimizer blob length");
    out.optimizer_blob.resize(size_t(opt_count));
    for (uint64_t i = 0; i < opt_count; ++i) out.optimizer_blob[size_t(i)] = r.f64("optimizer");

    if (r.pos != content.size() - 4)
        throw IoError(path + ": trailing bytes before checksum");

    out.model = std::move(model);
    return out;
}

}  // namespace layl
