#include "layl/compositor.hpp"

#include "layl/errors.hpp"

namespace layl {

FieldQueryResult combine(const std::vector<FieldQueryResult>& results) {
    if (results.empty()) throw ContractError("combine requires at least one field result");
    double total = 0.0;
    for (const auto& r : results) total += r.density;

    FieldQueryResult out;
    out.density = total;
    if (total > kCombineEps) {
        Vec3 albedo{};
        for (const auto& r : results) {
            double w = r.density / total;
            albedo = albedo + r.albedo * w;
        }
        out.albedo = albedo;
    }
    return out;
}

LayoutSet init_layout_set(int n_layouts, int k_fields, Rng& rng) {
    if (n_layouts < 1 || k_fields < 1)
        throw ContractError("init_layout_set requires N >= 1 and K >= 1");
    LayoutSet set;
    set.layouts.resize(size_t(n_layouts));
    for (int n = 0; n < n_layouts; ++n) {
        auto& transforms = set.layouts[size_t(n)].transforms;
        transforms.resize(size_t(k_fields));
        for (int k = 0; k < k_fields; ++k) {
            RigidScaleTransform& T = transforms[size_t(k)];
            T.rotation.x = rng.normal(0.0, 0.1);
            T.rotation.y = rng.normal(0.0, 0.1);
            T.rotation.z = rng.normal(0.0, 0.1);
            T.rotation.w = rng.normal(1.0, 0.1);
            T.translation.x = rng.normal(0.0, 0.3);
            T.translation.y = rng.normal(0.0, 0.3);
            T.translation.z = rng.normal(0.0, 0.3);
            T.scale = rng.normal(1.0, 0.3);
        }
    }
    return set;
}

int sample_layout(int n_layouts, Rng& rng) {
    if (n_layouts < 1) throw ContractError("sample_layout requires N >= 1");
    return int(rng.uniform_index(uint64_t(n_layouts)));
}

int sample_layout(const LayoutSet& set, Rng& rng) { return sample_layout(set.n(), rng); }

MlpField& SceneModel::add_mlp_field(const MlpConfig& cfg, Rng& rng) {
    if (n_layouts_ > 0) throw ContractError("add fields before init_layouts");
    std::string prefix = "field" + std::to_string(fields_.size());
    auto f = std::make_unique<MlpField>(cfg, params_, prefix, rng);
    MlpField& ref = *f;
    fields_.push_back(std::move(f));
    return ref;
}

BlobField& SceneModel::add_blob_field(Vec3 center, double sigma, double amplitude, Vec3 albedo) {
    if (n_layouts_ > 0) throw ContractError("add fields before init_layouts");
    auto f = std::make_unique<BlobField>(center, sigma, amplitude, albedo);
    BlobField& ref = *f;
    fields_.push_back(std::move(f));
    return ref;
}

VoxelField& SceneModel::add_voxel_field(int nx, int ny, int nz, Vec3 bmin, Vec3 bmax,
                                        std::vector<float> density, std::vector<float> rgb) {
    if (n_layouts_ > 0) throw ContractError("add fields before init_layouts");
    auto f = std::make_unique<VoxelField>(nx, ny, nz, bmin, bmax, std::move(density),
                                          std::move(rgb));
    VoxelField& ref = *f;
    fields_.push_back(std::move(f));
    return ref;
}

Field& SceneModel::add_field_from_blob(const std::vector<double>& blob) {
    if (n_layouts_ > 0) throw ContractError("add fields before init_layouts");
    std::string prefix = "field" + std::to_string(fields_.size());
    fields_.push_back(field_from_blob(blob, params_, prefix));
    return *fields_.back();
}

void SceneModel::init_layouts(const LayoutSet& set) {
    if (n_layouts_ > 0) throw ContractError("layouts already initialized");
    if (fields_.empty()) throw ContractError("init_layouts requires at least one field");
    if (set.k() != field_count())
        throw ContractError("layout set K does not match field count");

    n_layouts_ = set.n();
    for (int n = 0; n < n_layouts_; ++n) {
        for (int k = 0; k < field_count(); ++k) {
            const RigidScaleTransform& T = set.layouts[size_t(n)].transforms[size_t(k)];
            std::string base = "layout/" + std::to_string(n) + "/" + std::to_string(k);
            int q = params_.add_group(base + "/q", {1, 4},
                                      {T.rotation.x, T.rotation.y, T.rotation.z, T.rotation.w},
                                      10.0);
            int t = params_.add_group(base + "/t", {1, 3},
                                      {T.translation.x, T.translation.y, T.translation.z}, 10.0);
            int s = params_.add_group(base + "/s", {1, 1}, {T.scale}, 10.0);
            layout_group_ids_.push_back({q, t, s});
        }
    }
}

void SceneModel::init_layouts(int n_layouts, Rng& rng) {
    init_layouts(init_layout_set(n_layouts, field_count(), rng));
}

void SceneModel::check_layout_index(int n, int k) const {
    if (n < 0 || n >= n_layouts_ || k < 0 || k >= field_count())
        throw ContractError("layout index out of range");
}

std::array<int, 3> SceneModel::transform_groups(int n, int k) const {
    check_layout_index(n, k);
    return layout_group_ids_[size_t(n) * size_t(field_count()) + size_t(k)];
}

RigidScaleTransform SceneModel::transform(int n, int k) const {
    auto ids = transform_groups(n, k);
    const auto& q = params_.group(ids[0]).value;
    const auto& t = params_.group(ids[1]).value;
    const auto& s = params_.group(ids[2]).value;
    RigidScaleTransform T;
    T.rotation = {q[0], q[1], q[2], q[3]};
    T.translation = {t[0], t[1], t[2]};
    T.scale = s[0];
    return T;
}

void SceneModel::set_transform(int n, int k, const RigidScaleTransform& T) {
    auto ids = transform_groups(n, k);
    auto& q = params_.group(ids[0]).value;
    auto& t = params_.group(ids[1]).value;
    auto& s = params_.group(ids[2]).value;
    q = {T.rotation.x, T.rotation.y, T.rotation.z, T.rotation.w};
    t = {T.translation.x, T.translation.y, T.translation.z};
    s = {T.scale};
}

void SceneModel::freeze_field(int k, bool frozen) {
    if (k < 0 || k >= field_count()) throw ContractError("field index out of range");
    for (int gid : fields_[size_t(k)]->param_group_ids()) params_.group(gid).frozen = frozen;
}

void SceneModel::freeze_transform(int n, int k, bool frozen) {
    for (int gid : transform_groups(n, k)) params_.group(gid).frozen = frozen;
}

void SceneModel::freeze_all_transforms(bool frozen) {
    for (int n = 0; n < n_layouts_; ++n)
        for (int k = 0; k < field_count(); ++k) freeze_transform(n, k, frozen);
}

bool SceneModel::field_frozen(int k) const {
    if (k < 0 || k >= field_count()) throw ContractError("field index out of range");
    auto ids = fields_[size_t(k)]->param_group_ids();
    if (ids.empty()) return true;  // assets without learnable groups never train
    for (int gid : ids)
        if (!params_.group(gid).frozen) return false;
    return true;
}

int64_t SceneModel::layout_scalar_count() const {
    int64_t n = 0;
    for (const auto& ids : layout_group_ids_)
        for (int gid : ids) n += int64_t(params_.group(gid).value.size());
    return n;
}

CompositeSample composite_query(const SceneModel& model, int layout, const Ray& base_ray,
                                double t) {
    if (layout < 0 || layout >= model.layout_count())
        throw ContractError("composite_query: layout index out of range");

    int K = model.field_count();
    std::vector<FieldQueryResult> results(static_cast<size_t>(K));
    CompositeSample sample;
    sample.field_density.resize(size_t(K));
    for (int k = 0; k < K; ++k) {
        Ray rk = transform_ray(base_ray, model.transform(layout, k));
        results[size_t(k)] = model.field(k).query(rk.at(t));
        sample.field_density[size_t(k)] = results[size_t(k)].density;
    }
    sample.combined = combine(results);
    return sample;
}

}  // namespace layl
