#pragma once
#include <memory>
#include <string>
#include <vector>

#include "layl/field.hpp"
#include "layl/geom.hpp"
#include "layl/params.hpp"
#include "layl/rng.hpp"

namespace layl {

// One arrangement of all K fields.
struct Layout {
    std::vector<RigidScaleTransform> transforms;
};

// N alternative arrangements; 8NK learnable scalars in total.
struct LayoutSet {
    std::vector<Layout> layouts;

    int n() const { return int(layouts.size()); }
    int k() const { return layouts.empty() ? 0 : int(layouts[0].transforms.size()); }
};

constexpr double kCombineEps = 1e-9;

// Density sum with density-weighted albedo. At (near-)zero total density the
// albedo is zero; rendering weights vanish there as well.
FieldQueryResult combine(const std::vector<FieldQueryResult>& results);

// s ~ N(1, 0.3), t_i ~ N(0, 0.3), q_i ~ N(mu_i, 0.1) with mu = (0,0,0,1).
LayoutSet init_layout_set(int n_layouts, int k_fields, Rng& rng);

// Uniform layout index in [0, N).
int sample_layout(const LayoutSet& set, Rng& rng);
int sample_layout(int n_layouts, Rng& rng);

// K fields plus the layout set, with all learnable state in one ParamStore.
// Layout parameters are registered per transform as q/t/s groups with a 10x
// learning-rate multiplier.
class SceneModel {
public:
    SceneModel() = default;

    MlpField& add_mlp_field(const MlpConfig& cfg, Rng& rng);
    BlobField& add_blob_field(Vec3 center, double sigma, double amplitude, Vec3 albedo);
    VoxelField& add_voxel_field(int nx, int ny, int nz, Vec3 bmin, Vec3 bmax,
                                std::vector<float> density, std::vector<float> rgb);
    Field& add_field_from_blob(const std::vector<double>& blob);

    // Registers the 8NK layout scalars; call once after all fields are added.
    void init_layouts(const LayoutSet& set);
    void init_layouts(int n_layouts, Rng& rng);

    int field_count() const { return int(fields_.size()); }
    int layout_count() const { return n_layouts_; }

    Field& field(int k) { return *fields_[size_t(k)]; }
    const Field& field(int k) const { return *fields_[size_t(k)]; }

    RigidScaleTransform transform(int n, int k) const;
    void set_transform(int n, int k, const RigidScaleTransform& T);

    // Group ids of (q, t, s) for layout n, field k.
    std::array<int, 3> transform_groups(int n, int k) const;

    void freeze_field(int k, bool frozen = true);
    void freeze_transform(int n, int k, bool frozen = true);
    void freeze_all_transforms(bool frozen = true);
    bool field_frozen(int k) const;

    int64_t layout_scalar_count() const;  // == 8NK

    ParamStore& params() { return params_; }
    const ParamStore& params() const { return params_; }

private:
    void check_layout_index(int n, int k) const;

    ParamStore params_;
    std::vector<std::unique_ptr<Field>> fields_;
    int n_layouts_ = 0;
    std::vector<std::array<int, 3>> layout_group_ids_;  // index n * K + k
};

struct CompositeSample {
    FieldQueryResult combined;
    std::vector<double> field_density;
};

// Query every field at its instance-specific ray position r_k(t) and merge.
CompositeSample composite_query(const SceneModel& model, int layout, const Ray& base_ray,
                                double t);

}  // namespace layl
