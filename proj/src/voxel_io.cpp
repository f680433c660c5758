#include "layl/voxel_io.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "layl/errors.hpp"

namespace layl {

namespace {

void append_f32_le(std::string& out, float f) {
    uint32_t bits;
    std::memcpy(&bits, &f, 4);
    out.push_back(char(bits & 0xff));
    out.push_back(char((bits >> 8) & 0xff));
    out.push_back(char((bits >> 16) & 0xff));
    out.push_back(char((bits >> 24) & 0xff));
}

float read_f32_le(const char* p) {
    uint32_t bits = uint32_t(uint8_t(p[0])) | (uint32_t(uint8_t(p[1])) << 8) |
                    (uint32_t(uint8_t(p[2])) << 16) | (uint32_t(uint8_t(p[3])) << 24);
    float f;
    std::memcpy(&f, &bits, 4);
    return f;
}

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

void save_voxel(const VoxelField& field, const std::string& path) {
    std::string out = "VOXL 1 " + std::to_string(field.nx()) + " " + std::to_string(field.ny()) +
                      " " + std::to_string(field.nz());
    Vec3 bmin = field.bounds_min(), bmax = field.bounds_max();
    for (double v : {bmin.x, bmin.y, bmin.z, bmax.x, bmax.y, bmax.z})
        out += " " + format_double(v);
    out += "\n";
    out.reserve(out.size() + 4 * (field.density_grid().size() + field.rgb_grid().size()));
    for (float d : field.density_grid()) append_f32_le(out, d);
    for (float c : field.rgb_grid()) append_f32_le(out, c);

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open " + path + " for writing");
    f.write(out.data(), std::streamsize(out.size()));
    if (!f) throw IoError("short write to " + path);
}

VoxelField load_voxel(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path);
    std::string content((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

    size_t nl = content.find('\n');
    if (nl == std::string::npos)
        throw IoError(path + ": parse error at byte 0: missing header line");
    std::istringstream header(content.substr(0, nl));
    std::string magic;
    int version = 0, nx = 0, ny = 0, nz = 0;
    double xmin, ymin, zmin, xmax, ymax, zmax;
    if (!(header >> magic >> version >> nx >> ny >> nz >> xmin >> ymin >> zmin >> xmax >> ymax >>
          zmax))
        throw IoError(path + ": parse error at byte 0: malformed header fields");
    if (magic != "VOXL")
        throw IoError(path + ": parse error at byte 0: bad magic '" + magic + "'");
    if (version != 1) throw IoError(path + ": unsupported VOXL version " + std::to_string(version));
    if (nx < 2 || ny < 2 || nz < 2) throw IoError(path + ": resolution must be >= 2 per axis");

    int64_t n = int64_t(nx) * ny * nz;
    size_t expected = size_t(4 * (n + 3 * n));
    size_t payload = content.size() - nl - 1;
    if (payload != expected)
        throw IoError(path + ": parse error at byte " + std::to_string(nl + 1) + ": expected " +
                      std::to_string(expected) + " payload bytes, got " + std::to_string(payload));

    const char* p = content.data() + nl + 1;
    std::vector<float> density(static_cast<size_t>(n)), rgb(static_cast<size_t>(3 * n));
    for (int64_t i = 0; i < n; ++i) density[size_t(i)] = read_f32_le(p + 4 * i);
    p += 4 * n;
    for (int64_t i = 0; i < 3 * n; ++i) rgb[size_t(i)] = read_f32_le(p + 4 * i);

    return VoxelField(nx, ny, nz, {xmin, ymin, zmin}, {xmax, ymax, zmax}, std::move(density),
                      std::move(rgb));
}

VoxelField rasterize_to_voxel(const std::function<FieldQueryResult(const Vec3&)>& sample, int nx,
                              int ny, int nz, Vec3 bmin, Vec3 bmax) {
    int64_t n = int64_t(nx) * ny * nz;
    std::vector<float> density(static_cast<size_t>(n)), rgb(static_cast<size_t>(3 * n));
    double dx = (bmax.x - bmin.x) / double(nx - 1);
    double dy = (bmax.y - bmin.y) / double(ny - 1);
    double dz = (bmax.z - bmin.z) / double(nz - 1);
    int64_t i = 0;
    for (int z = 0; z < nz; ++z)
        for (int y = 0; y < ny; ++y)
            for (int x = 0; x < nx; ++x, ++i) {
                Vec3 p{bmin.x + x * dx, bmin.y + y * dy, bmin.z + z * dz};
                FieldQueryResult q = sample(p);
                density[size_t(i)] = float(q.density);
                rgb[size_t(3 * i)] = float(q.albedo.x);
                rgb[size_t(3 * i) + 1] = float(q.albedo.y);
                rgb[size_t(3 * i) + 2] = float(q.albedo.z);
            }
    return VoxelField(nx, ny, nz, bmin, bmax, std::move(density), std::move(rgb));
}

VoxelField rasterize_to_voxel(const Field& field, int nx, int ny, int nz, Vec3 bmin, Vec3 bmax) {
    return rasterize_to_voxel([&](const Vec3& p) { return field.query(p); }, nx, ny, nz, bmin,
                              bmax);
}

}  // namespace layl
