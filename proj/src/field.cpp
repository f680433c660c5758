#include "layl/field.hpp"

#include <cmath>

#include "layl/errors.hpp"
#include "layl/scalar_math.hpp"

namespace layl {

void Field::query_batch(const std::vector<double>& positions, size_t count,
                        std::vector<double>& density, std::vector<double>& albedo) const {
    density.resize(count);
    albedo.resize(count * 3);
    for (size_t i = 0; i < count; ++i) {
        Vec3 p{positions[3 * i], positions[3 * i + 1], positions[3 * i + 2]};
        FieldQueryResult r = query(p);
        density[i] = r.density;
        albedo[3 * i] = r.albedo.x;
        albedo[3 * i + 1] = r.albedo.y;
        albedo[3 * i + 2] = r.albedo.z;
    }
}

std::vector<double> positional_encode(const Vec3& p, int octaves) {
    if (octaves < 0) throw ContractError("positional_encode: octaves must be >= 0");
    std::vector<double> out;
    out.reserve(size_t(3 + 6 * octaves));
    out.push_back(p.x);
    out.push_back(p.y);
    out.push_back(p.z);
    for (int l = 0; l < octaves; ++l) {
        double f = std::pow(2.0, double(l)) * M_PI;
        out.push_back(std::sin(f * p.x));
        out.push_back(std::sin(f * p.y));
        out.push_back(std::sin(f * p.z));
        out.push_back(std::cos(f * p.x));
        out.push_back(std::cos(f * p.y));
        out.push_back(std::cos(f * p.z));
    }
    return out;
}

double blob_bias(const Vec3& p, double amplitude, double sigma) {
    if (sigma <= 0.0) throw ContractError("blob_bias: sigma must be positive");
    double neg_inv_2s2 = -1.0 / (2.0 * sigma * sigma);
    double r2 = 0.0;
    r2 += p.x * p.x;
    r2 += p.y * p.y;
    r2 += p.z * p.z;
    return amplitude * std::exp(r2 * neg_inv_2s2);
}

namespace {

// Helpers shared by the taped field paths.

Val const_scalar(Tape& t, double v) { return t.constant(Tensor::scalar(v)); }

Val bcast_scalar(Tape& t, double v, const std::vector<int>& shape) {
    return t.broadcast(const_scalar(t, v), shape);
}

// [R,S,3] positions -> [R,S] component c, extracted with a one-hot matmul.
Val extract_component(Tape& t, Val positions, int c) {
    Tensor onehot({3, 1});
    onehot.data[size_t(c)] = 1.0;
    Val col = t.matmul(positions, t.constant(std::move(onehot)));  // [R,S,1]
    return t.sum_axis(col, 2, false);                              // [R,S]
}

// Squared radius about the origin, [R,S,1].
Val radius2_keepdim(Tape& t, Val positions) {
    return t.sum_axis(t.mul(positions, positions), 2, true);
}

}  // namespace

// ---------------------------------------------------------------------------
// BlobField

BlobField::BlobField(Vec3 center, double sigma, double amplitude, Vec3 albedo)
    : center_(center), sigma_(sigma), amplitude_(amplitude), albedo_(albedo) {
    if (sigma_ <= 0.0) throw ContractError("BlobField: sigma must be positive");
    if (amplitude_ <= 0.0) throw ContractError("BlobField: amplitude must be positive");
}

void BlobField::set_amplitude(double a) {
    if (a <= 0.0) throw ContractError("BlobField: amplitude must be positive");
    amplitude_ = a;
}

FieldQueryResult BlobField::query(const Vec3& p) const {
    double neg_inv_2s2 = -1.0 / (2.0 * sigma_ * sigma_);
    Vec3 d = p - center_;
    double r2 = 0.0;
    r2 += d.x * d.x;
    r2 += d.y * d.y;
    r2 += d.z * d.z;
    return {amplitude_ * std::exp(r2 * neg_inv_2s2), albedo_};
}

TapeFieldOutput BlobField::tape_query(Tape& t, Val positions, bool want_albedo) const {
    const std::vector<int> ps = t.value(positions).shape;
    std::vector<int> rs{ps[0], ps[1]};

    Tensor center({1, 3}, {center_.x, center_.y, center_.z});
    Val d = t.sub(positions, t.broadcast(t.constant(std::move(center)), ps));
    Val r2 = t.sum_axis(t.mul(d, d), 2, false);  // [R,S]
    double neg_inv_2s2 = -1.0 / (2.0 * sigma_ * sigma_);
    Val density = t.mul(bcast_scalar(t, amplitude_, rs), t.exp(t.mul(r2, bcast_scalar(t, neg_inv_2s2, rs))));

    TapeFieldOutput out;
    out.density = density;
    if (want_albedo) {
        out.has_albedo = true;
        out.albedo[0] = bcast_scalar(t, albedo_.x, rs);
        out.albedo[1] = bcast_scalar(t, albedo_.y, rs);
        out.albedo[2] = bcast_scalar(t, albedo_.z, rs);
    }
    return out;
}

std::vector<double> BlobField::serialize() const {
    return {double(int(FieldKind::Blob)), center_.x, center_.y, center_.z,
            sigma_,  amplitude_, albedo_.x, albedo_.y, albedo_.z};
}

// ---------------------------------------------------------------------------
// VoxelField

VoxelField::VoxelField(int nx, int ny, int nz, Vec3 bmin, Vec3 bmax, std::vector<float> density,
                       std::vector<float> rgb)
    : nx_(nx), ny_(ny), nz_(nz), bmin_(bmin), bmax_(bmax), density_(std::move(density)),
      rgb_(std::move(rgb)) {
    if (nx_ < 2 || ny_ < 2 || nz_ < 2)
        throw ContractError("VoxelField: resolution must be >= 2 per axis");
    int64_t n = int64_t(nx_) * ny_ * nz_;
    if (int64_t(density_.size()) != n || int64_t(rgb_.size()) != 3 * n)
        throw ContractError("VoxelField: grid sizes do not match resolution");
    if (!(bmin_.x < bmax_.x && bmin_.y < bmax_.y && bmin_.z < bmax_.z))
        throw ContractError("VoxelField: invalid bounds");
    for (float d : density_)
        if (d < 0.0f) throw ContractError("VoxelField: negative density");
}

float VoxelField::density_at_node(int ix, int iy, int iz) const {
    return density_[size_t(node_index(ix, iy, iz))];
}

FieldQueryResult VoxelField::query(const Vec3& p) const {
    if (p.x < bmin_.x || p.x > bmax_.x || p.y < bmin_.y || p.y > bmax_.y || p.z < bmin_.z ||
        p.z > bmax_.z)
        return {};

    double dx = (bmax_.x - bmin_.x) / double(nx_ - 1);
    double dy = (bmax_.y - bmin_.y) / double(ny_ - 1);
    double dz = (bmax_.z - bmin_.z) / double(nz_ - 1);
    double ux = (p.x - bmin_.x) / dx;
    double uy = (p.y - bmin_.y) / dy;
    double uz = (p.z - bmin_.z) / dz;
    int ix = std::min(int(std::floor(ux)), nx_ - 2);
    int iy = std::min(int(std::floor(uy)), ny_ - 2);
    int iz = std::min(int(std::floor(uz)), nz_ - 2);
    ix = std::max(ix, 0);
    iy = std::max(iy, 0);
    iz = std::max(iz, 0);
    double fx = ux - ix, fy = uy - iy, fz = uz - iz;

    auto lerp3 = [&](auto&& value_at) {
        double c000 = value_at(ix, iy, iz), c100 = value_at(ix + 1, iy, iz);
        double c010 = value_at(ix, iy + 1, iz), c110 = value_at(ix + 1, iy + 1, iz);
        double c001 = value_at(ix, iy, iz + 1), c101 = value_at(ix + 1, iy, iz + 1);
        double c011 = value_at(ix, iy + 1, iz + 1), c111 = value_at(ix + 1, iy + 1, iz + 1);
        double d00 = c000 + fx * (c100 - c000);
        double d10 = c010 + fx * (c110 - c010);
        double d01 = c001 + fx * (c101 - c001);
        double d11 = c011 + fx * (c111 - c011);
        double d0 = d00 + fy * (d10 - d00);
        double d1 = d01 + fy * (d11 - d01);
        return d0 + fz * (d1 - d0);
    };

    FieldQueryResult out;
    out.density = lerp3([&](int a, int b, int c) { return double(density_[size_t(node_index(a, b, c))]); });
    out.albedo.x = lerp3([&](int a, int b, int c) { return double(rgb_[size_t(3 * node_index(a, b, c))]); });
    out.albedo.y = lerp3([&](int a, int b, int c) { return double(rgb_[size_t(3 * node_index(a, b, c) + 1)]); });
    out.albedo.z = lerp3([&](int a, int b, int c) { return double(rgb_[size_t(3 * node_index(a, b, c) + 2)]); });
    return out;
}

TapeFieldOutput VoxelField::tape_query(Tape& t, Val positions, bool want_albedo) const {
    const Tensor& P = t.value(positions);
    int R = P.dim(0), S = P.dim(1);
    std::vector<int> rs{R, S};
    int64_t count = int64_t(R) * S;

    double dx = (bmax_.x - bmin_.x) / double(nx_ - 1);
    double dy = (bmax_.y - bmin_.y) / double(ny_ - 1);
    double dz = (bmax_.z - bmin_.z) / double(nz_ - 1);

    // Cell assignment and corner gathers are constants built from the current
    // point values; only the in-cell fractions are differentiated.
    Tensor mask(rs), x0(rs), y0(rs), z0(rs);
    std::vector<int> cix(static_cast<size_t>(count)), ciy(static_cast<size_t>(count)), ciz(static_cast<size_t>(count));
    for (int64_t i = 0; i < count; ++i) {
        double px = P.at(3 * i), py = P.at(3 * i + 1), pz = P.at(3 * i + 2);
        bool inside = px >= bmin_.x && px <= bmax_.x && py >= bmin_.y && py <= bmax_.y &&
                      pz >= bmin_.z && pz <= bmax_.z;
        mask.at(i) = inside ? 1.0 : 0.0;
        int ix = std::clamp(int(std::floor((px - bmin_.x) / dx)), 0, nx_ - 2);
        int iy = std::clamp(int(std::floor((py - bmin_.y) / dy)), 0, ny_ - 2);
        int iz = std::clamp(int(std::floor((pz - bmin_.z) / dz)), 0, nz_ - 2);
        cix[size_t(i)] = ix;
        ciy[size_t(i)] = iy;
        ciz[size_t(i)] = iz;
        x0.at(i) = bmin_.x + ix * dx;
        y0.at(i) = bmin_.y + iy * dy;
        z0.at(i) = bmin_.z + iz * dz;
    }

    Val px = extract_component(t, positions, 0);
    Val py = extract_component(t, positions, 1);
    Val pz = extract_component(t, positions, 2);
    Val fx = t.mul(t.sub(px, t.constant(std::move(x0))), bcast_scalar(t, 1.0 / dx, rs));
    Val fy = t.mul(t.sub(py, t.constant(std::move(y0))), bcast_scalar(t, 1.0 / dy, rs));
    Val fz = t.mul(t.sub(pz, t.constant(std::move(z0))), bcast_scalar(t, 1.0 / dz, rs));
    Val mask_v = t.constant(std::move(mask));

    auto gather = [&](int offx, int offy, int offz, int channel) {
        Tensor c(rs);
        for (int64_t i = 0; i < count; ++i) {
            int64_t idx = node_index(cix[size_t(i)] + offx, ciy[size_t(i)] + offy,
                                     ciz[size_t(i)] + offz);
            c.at(i) = channel < 0 ? double(density_[size_t(idx)])
                                  : double(rgb_[size_t(3 * idx + channel)]);
        }
        return t.constant(std::move(c));
    };

    auto trilerp = [&](int channel) {
        Val c000 = gather(0, 0, 0, channel), c100 = gather(1, 0, 0, channel);
        Val c010 = gather(0, 1, 0, channel), c110 = gather(1, 1, 0, channel);
        Val c001 = gather(0, 0, 1, channel), c101 = gather(1, 0, 1, channel);
        Val c011 = gather(0, 1, 1, channel), c111 = gather(1, 1, 1, channel);
        Val d00 = t.add(c000, t.mul(fx, t.sub(c100, c000)));
        Val d10 = t.add(c010, t.mul(fx, t.sub(c110, c010)));
        Val d01 = t.add(c001, t.mul(fx, t.sub(c101, c001)));
        Val d11 = t.add(c011, t.mul(fx, t.sub(c111, c011)));
        Val d0 = t.add(d00, t.mul(fy, t.sub(d10, d00)));
        Val d1 = t.add(d01, t.mul(fy, t.sub(d11, d01)));
        return t.mul(t.add(d0, t.mul(fz, t.sub(d1, d0))), mask_v);
    };

    TapeFieldOutput out;
    out.density = trilerp(-1);
    if (want_albedo) {
        out.has_albedo = true;
        for (int c = 0; c < 3; ++c) out.albedo[size_t(c)] = trilerp(c);
    }
    return out;
}

std::vector<double> VoxelField::serialize() const {
    std::vector<double> out = {double(int(FieldKind::Voxel)),
                               double(nx_), double(ny_), double(nz_),
                               bmin_.x, bmin_.y, bmin_.z,
                               bmax_.x, bmax_.y, bmax_.z};
    out.reserve(out.size() + density_.size() + rgb_.size());
    for (float d : density_) out.push_back(double(d));
    for (float c : rgb_) out.push_back(double(c));
    return out;
}

// ---------------------------------------------------------------------------
// MlpField

std::vector<std::vector<int>> MlpField::group_shapes(const MlpConfig& cfg) {
    int in = 3 + 6 * cfg.encoding_octaves;
    std::vector<std::vector<int>> shapes;
    int prev = in;
    for (int l = 0; l < cfg.hidden_layers; ++l) {
        shapes.push_back({prev, cfg.hidden_width});
        shapes.push_back({1, cfg.hidden_width});
        prev = cfg.hidden_width;
    }
    shapes.push_back({prev, 1});  // density head
    shapes.push_back({1, 1});
    shapes.push_back({prev, 3});  // rgb head
    shapes.push_back({1, 3});
    shapes.push_back({1, 1});     // density bias
    return shapes;
}

std::vector<std::string> MlpField::group_suffixes(const MlpConfig& cfg) {
    std::vector<std::string> names;
    for (int l = 0; l < cfg.hidden_layers; ++l) {
        names.push_back("w" + std::to_string(l));
        names.push_back("b" + std::to_string(l));
    }
    names.push_back("wd");
    names.push_back("bd");
    names.push_back("wc");
    names.push_back("bc");
    names.push_back("density_bias");
    return names;
}

void MlpField::register_groups(const std::string& prefix,
                               const std::vector<std::vector<double>>& values) {
    auto shapes = group_shapes(cfg_);
    auto names = group_suffixes(cfg_);
    if (values.size() != shapes.size())
        throw ContractError("MlpField: group value count mismatch");
    for (size_t i = 0; i < shapes.size(); ++i)
        group_ids_.push_back(store_->add_group(prefix + "/" + names[i], shapes[i], values[i]));
}

MlpField::MlpField(const MlpConfig& cfg, ParamStore& store, const std::string& prefix, Rng& rng)
    : cfg_(cfg), store_(&store) {
    if (cfg_.encoding_octaves < 0 || cfg_.hidden_layers < 1 || cfg_.hidden_width < 1)
        throw ContractError("MlpField: invalid architecture");
    auto shapes = group_shapes(cfg_);
    std::vector<std::vector<double>> values;
    for (size_t i = 0; i < shapes.size(); ++i) {
        int64_t n = shape_numel(shapes[i]);
        std::vector<double> v(size_t(n), 0.0);
        bool is_weight = shapes[i][0] > 1;
        if (is_weight) {
            double std = 1.0 / std::sqrt(double(shapes[i][0]));
            for (double& x : v) x = rng.normal(0.0, std);
        }
        values.push_back(std::move(v));
    }
    values.back()[0] = cfg_.density_bias_init;
    register_groups(prefix, values);
}

MlpField::MlpField(const MlpConfig& cfg, ParamStore& store, const std::string& prefix,
                   const std::vector<std::vector<double>>& group_values)
    : cfg_(cfg), store_(&store) {
    register_groups(prefix, group_values);
}

void MlpField::query_batch(const std::vector<double>& positions, size_t count,
                           std::vector<double>& density, std::vector<double>& albedo) const {
    int L = cfg_.encoding_octaves;
    int in = 3 + 6 * L;
    Tensor enc({int(count), in});
    for (size_t i = 0; i < count; ++i) {
        const double* p = &positions[3 * i];
        double* row = &enc.data[size_t(i) * size_t(in)];
        row[0] = p[0];
        row[1] = p[1];
        row[2] = p[2];
        for (int l = 0; l < L; ++l) {
            double f = std::pow(2.0, double(l)) * M_PI;
            row[3 + 6 * l] = std::sin(f * p[0]);
            row[3 + 6 * l + 1] = std::sin(f * p[1]);
            row[3 + 6 * l + 2] = std::sin(f * p[2]);
            row[3 + 6 * l + 3] = std::cos(f * p[0]);
            row[3 + 6 * l + 4] = std::cos(f * p[1]);
            row[3 + 6 * l + 5] = std::cos(f * p[2]);
        }
    }

    auto gv = [&](size_t i) { return store_->value_tensor(group_ids_[i]); };

    Tensor h = std::move(enc);
    for (int l = 0; l < cfg_.hidden_layers; ++l) {
        Tensor w = gv(size_t(2 * l)), b = gv(size_t(2 * l) + 1);
        Tensor z = matmul_values(h, w);
        int width = b.dim(1);
        for (int64_t i = 0; i < z.numel(); ++i)
            z.at(i) = stable_softplus(z.at(i) + b.at(i % width));
        h = std::move(z);
    }
    size_t base = size_t(2 * cfg_.hidden_layers);
    Tensor wd = gv(base), bd = gv(base + 1), wc = gv(base + 2), bc = gv(base + 3);
    double density_bias = gv(base + 4).data[0];

    Tensor rawd = matmul_values(h, wd);
    double neg_inv_2s2 = -1.0 / (2.0 * cfg_.blob_sigma * cfg_.blob_sigma);
    double rb2 = cfg_.bound_radius * cfg_.bound_radius;
    double rin = cfg_.bound_radius - cfg_.bound_band;
    double inv_span = 1.0 / (rb2 - rin * rin);

    density.resize(count);
    for (size_t i = 0; i < count; ++i) {
        const double* p = &positions[3 * i];
        double r2 = 0.0;
        r2 += p[0] * p[0];
        r2 += p[1] * p[1];
        r2 += p[2] * p[2];
        double raw = rawd.at(int64_t(i)) + bd.data[0] + density_bias;
        if (cfg_.blob_amplitude != 0.0)
            raw = raw + cfg_.blob_amplitude * std::exp(r2 * neg_inv_2s2);
        double core = stable_softplus(raw);
        double x = (rb2 - r2) * inv_span;
        double xc = (x >= 0.0) ? x : 0.0;
        xc = (xc <= 1.0) ? xc : 1.0;
        double x2 = xc * xc;
        double x3 = x2 * xc;
        double t6 = xc * 6.0 - 15.0;
        double inner = xc * t6 + 10.0;
        double w = x3 * inner;
        density[i] = core * w;
    }

    Tensor rawc = matmul_values(h, wc);
    albedo.resize(count * 3);
    for (size_t i = 0; i < count; ++i)
        for (int c = 0; c < 3; ++c)
            albedo[3 * i + size_t(c)] = stable_sigmoid(rawc.at(int64_t(3 * i) + c) + bc.at(c));
}

FieldQueryResult MlpField::query(const Vec3& p) const {
    std::vector<double> pos{p.x, p.y, p.z}, d, a;
    query_batch(pos, 1, d, a);
    return {d[0], {a[0], a[1], a[2]}};
}

TapeFieldOutput MlpField::tape_query(Tape& t, Val positions, bool want_albedo) const {
    const std::vector<int> ps = t.value(positions).shape;
    int R = ps[0], S = ps[1];
    std::vector<int> rs{R, S};
    std::vector<int> rs1{R, S, 1};
    int L = cfg_.encoding_octaves;

    std::vector<Val> parts{positions};
    for (int l = 0; l < L; ++l) {
        double f = std::pow(2.0, double(l)) * M_PI;
        Val scaled = t.mul(positions, bcast_scalar(t, f, ps));
        parts.push_back(t.sin(scaled));
        parts.push_back(t.cos(scaled));
    }
    Val h = parts.size() > 1 ? t.concat(parts, 2) : parts[0];

    auto leaf = [&](size_t i) { return t.leaf(group_ids_[i]); };
    for (int l = 0; l < cfg_.hidden_layers; ++l) {
        Val w = leaf(size_t(2 * l));
        Val b = leaf(size_t(2 * l) + 1);
        Val z = t.matmul(h, w);
        h = t.softplus(t.add(z, t.broadcast(b, t.value(z).shape)));
    }
    size_t base = size_t(2 * cfg_.hidden_layers);

    Val rawd = t.add(t.matmul(h, leaf(base)), t.broadcast(leaf(base + 1), rs1));
    rawd = t.add(rawd, t.broadcast(leaf(base + 4), rs1));

    Val r2 = radius2_keepdim(t, positions);  // [R,S,1]
    if (cfg_.blob_amplitude != 0.0) {
        double neg_inv_2s2 = -1.0 / (2.0 * cfg_.blob_sigma * cfg_.blob_sigma);
        Val bias = t.mul(bcast_scalar(t, cfg_.blob_amplitude, rs1),
                         t.exp(t.mul(r2, bcast_scalar(t, neg_inv_2s2, rs1))));
        rawd = t.add(rawd, bias);
    }
    Val core = t.softplus(rawd);

    double rb2 = cfg_.bound_radius * cfg_.bound_radius;
    double rin = cfg_.bound_radius - cfg_.bound_band;
    double inv_span = 1.0 / (rb2 - rin * rin);
    Val x = t.mul(t.sub(bcast_scalar(t, rb2, rs1), r2), bcast_scalar(t, inv_span, rs1));
    Val xc = t.min(t.max(x, bcast_scalar(t, 0.0, rs1)), bcast_scalar(t, 1.0, rs1));
    Val x2 = t.mul(xc, xc);
    Val x3 = t.mul(x2, xc);
    Val t6 = t.sub(t.mul(xc, bcast_scalar(t, 6.0, rs1)), bcast_scalar(t, 15.0, rs1));
    Val inner = t.add(t.mul(xc, t6), bcast_scalar(t, 10.0, rs1));
    Val window = t.mul(x3, inner);

    TapeFieldOutput out;
    out.density = t.sum_axis(t.mul(core, window), 2, false);  // [R,S]

    if (want_albedo) {
        Val rawc = t.add(t.matmul(h, leaf(base + 2)), t.broadcast(leaf(base + 3), {R, S, 3}));
        Val alb = t.sigmoid(rawc);
        out.has_albedo = true;
        for (int c = 0; c < 3; ++c) {
            Tensor onehot({3, 1});
            onehot.data[size_t(c)] = 1.0;
            out.albedo[size_t(c)] =
                t.sum_axis(t.matmul(alb, t.constant(std::move(onehot))), 2, false);
        }
    }
    return out;
}

std::vector<double> MlpField::serialize() const {
    std::vector<double> out = {double(int(FieldKind::Mlp)),
                               double(cfg_.encoding_octaves),
                               double(cfg_.hidden_layers),
                               double(cfg_.hidden_width),
                               cfg_.blob_amplitude,
                               cfg_.blob_sigma,
                               cfg_.bound_radius,
                               cfg_.bound_band};
    for (int gid : group_ids_) {
        const ParamGroup& g = store_->group(gid);
        out.insert(out.end(), g.value.begin(), g.value.end());
    }
    return out;
}

std::unique_ptr<Field> field_from_blob(const std::vector<double>& blob, ParamStore& store,
                                       const std::string& prefix) {
    if (blob.empty()) throw IoError("field blob is empty");
    int kind = int(blob[0]);
    if (kind == int(FieldKind::Blob)) {
        if (blob.size() != 9) throw IoError("blob field: expected 9 values");
        return std::make_unique<BlobField>(Vec3{blob[1], blob[2], blob[3]}, blob[4], blob[5],
                                           Vec3{blob[6], blob[7], blob[8]});
    }
    if (kind == int(FieldKind::Voxel)) {
        if (blob.size() < 10) throw IoError("voxel field: truncated header");
        int nx = int(blob[1]), ny = int(blob[2]), nz = int(blob[3]);
        int64_t n = int64_t(nx) * ny * nz;
        if (int64_t(blob.size()) != 10 + 4 * n) throw IoError("voxel field: payload size mismatch");
        std::vector<float> density(static_cast<size_t>(n)), rgb(static_cast<size_t>(3 * n));
        for (int64_t i = 0; i < n; ++i) density[size_t(i)] = float(blob[size_t(10 + i)]);
        for (int64_t i = 0; i < 3 * n; ++i) rgb[size_t(i)] = float(blob[size_t(10 + n + i)]);
        return std::make_unique<VoxelField>(nx, ny, nz, Vec3{blob[4], blob[5], blob[6]},
                                            Vec3{blob[7], blob[8], blob[9]}, std::move(density),
                                            std::move(rgb));
    }
    if (kind == int(FieldKind::Mlp)) {
        if (blob.size() < 8) throw IoError("mlp field: truncated header");
        MlpConfig cfg;
        cfg.encoding_octaves = int(blob[1]);
        cfg.hidden_layers = int(blob[2]);
        cfg.hidden_width = int(blob[3]);
        cfg.blob_amplitude = blob[4];
        cfg.blob_sigma = blob[5];
        cfg.bound_radius = blob[6];
        cfg.bound_band = blob[7];

        auto shapes = MlpField::group_shapes(cfg);
        std::vector<std::vector<double>> values;
        size_t pos = 8;
        for (const auto& s : shapes) {
            size_t n = size_t(shape_numel(s));
            if (pos + n > blob.size()) throw IoError("mlp field: payload size mismatch");
            values.emplace_back(blob.begin() + int64_t(pos), blob.begin() + int64_t(pos + n));
            pos += n;
        }
        if (pos != blob.size()) throw IoError("mlp field: trailing bytes in blob");
        return std::make_unique<MlpField>(cfg, store, prefix, values);
    }
    throw IoError("unknown field kind tag in blob");
}

}  // namespace layl
