#pragma once
#include <array>
#include <memory>
#include <string>
#include <vector>

#include "layl/geom.hpp"
#include "layl/params.hpp"
#include "layl/rng.hpp"
#include "layl/tape.hpp"

namespace layl {

// Volumetric sample: non-negative density and an albedo in [0,1]^3.
struct FieldQueryResult {
    double density = 0.0;
    Vec3 albedo{};
};

// Per-field outputs on the tape: density is [R,S]; albedo channels are
// [R,S] each and are only built when requested.
struct TapeFieldOutput {
    Val density;
    std::array<Val, 3> albedo{};
    bool has_albedo = false;
};

enum class FieldKind : int { Mlp = 0, Blob = 1, Voxel = 2 };

class Field {
public:
    virtual ~Field() = default;

    virtual FieldKind kind() const = 0;
    virtual FieldQueryResult query(const Vec3& p) const = 0;

    // Batched query; `positions` is row-major [count, 3].
    virtual void query_batch(const std::vector<double>& positions, size_t count,
                             std::vector<double>& density, std::vector<double>& albedo) const;

    // Differentiable query of positions shaped [R,S,3].
    virtual TapeFieldOutput tape_query(Tape& tape, Val positions, bool want_albedo) const = 0;

    // Self-describing parameter blob (pure f64 array; leading values encode
    // the field kind and geometry so a checkpoint can rebuild it).
    virtual std::vector<double> serialize() const = 0;

    // True when the field owns learnable parameter groups.
    virtual bool learnable() const { return false; }
    virtual std::vector<int> param_group_ids() const { return {}; }
};

// Fourier feature vector [x, y, z, sin(2^l pi x..z), cos(2^l pi x..z) for
// l = 0..L-1]; length 3 + 6L.
std::vector<double> positional_encode(const Vec3& p, int octaves);

// amplitude * exp(-|p|^2 / (2 sigma^2)), evaluated in the field's local frame.
double blob_bias(const Vec3& p, double amplitude, double sigma);

// Analytic Gaussian density ball with a constant albedo. Used both as a
// frozen asset and as an oracle object in tests.
class BlobField final : public Field {
public:
    BlobField(Vec3 center, double sigma, double amplitude, Vec3 albedo);

    FieldKind kind() const override { return FieldKind::Blob; }
    FieldQueryResult query(const Vec3& p) const override;
    TapeFieldOutput tape_query(Tape& tape, Val positions, bool want_albedo) const override;
    std::vector<double> serialize() const override;

    Vec3 center() const { return center_; }
    double sigma() const { return sigma_; }
    double amplitude() const { return amplitude_; }
    Vec3 albedo() const { return albedo_; }
    void set_amplitude(double a);

private:
    Vec3 center_;
    double sigma_;
    double amplitude_;
    Vec3 albedo_;
};

// Trilinearly interpolated grids over an axis-aligned box; density and
// albedo are zero outside the bounds. Grid nodes span the bounds inclusive,
// x-fastest, with rgb packed per node.
class VoxelField final : public Field {
public:
    VoxelField(int nx, int ny, int nz, Vec3 bmin, Vec3 bmax, std::vector<float> density,
               std::vector<float> rgb);

    FieldKind kind() const override { return FieldKind::Voxel; }
    FieldQueryResult query(const Vec3& p) const override;
    TapeFieldOutput tape_query(Tape& tape, Val positions, bool want_albedo) const override;
    std::vector<double> serialize() const override;

    int nx() const { return nx_; }
    int ny() const { return ny_; }
    int nz() const { return nz_; }
    Vec3 bounds_min() const { return bmin_; }
    Vec3 bounds_max() const { return bmax_; }
    const std::vector<float>& density_grid() const { return density_; }
    const std::vector<float>& rgb_grid() const { return rgb_; }

    float density_at_node(int ix, int iy, int iz) const;

private:
    int64_t node_index(int ix, int iy, int iz) const {
        return int64_t(ix) + int64_t(nx_) * (int64_t(iy) + int64_t(ny_) * int64_t(iz));
    }

    int nx_, ny_, nz_;
    Vec3 bmin_, bmax_;
    std::vector<float> density_;
    std::vector<float> rgb_;
};

struct MlpConfig {
    int encoding_octaves = 6;
    int hidden_layers = 4;
    int hidden_width = 64;
    double density_bias_init = -3.0;
    double blob_amplitude = 5.0;  // initialization bias, decayed to 0 by the trainer
    double blob_sigma = 0.2;
    double bound_radius = 1.5;    // density forced to 0 outside this sphere
    double bound_band = 0.3;      // smooth transition width inside the radius
};

// Learnable MLP radiance field. Weights live in the bound ParamStore;
// density = softplus(raw + blob_bias) windowed to the bounding sphere,
// albedo = sigmoid(raw_rgb).
class MlpField final : public Field {
public:
    MlpField(const MlpConfig& cfg, ParamStore& store, const std::string& prefix, Rng& rng);
    // Rebuild from existing group values (checkpoint load).
    MlpField(const MlpConfig& cfg, ParamStore& store, const std::string& prefix,
             const std::vector<std::vector<double>>& group_values);

    FieldKind kind() const override { return FieldKind::Mlp; }
    FieldQueryResult query(const Vec3& p) const override;
    void query_batch(const std::vector<double>& positions, size_t count,
                     std::vector<double>& density, std::vector<double>& albedo) const override;
    TapeFieldOutput tape_query(Tape& tape, Val positions, bool want_albedo) const override;
    std::vector<double> serialize() const override;

    bool learnable() const override { return true; }
    std::vector<int> param_group_ids() const override { return group_ids_; }

    const MlpConfig& config() const { return cfg_; }
    double blob_amplitude() const { return cfg_.blob_amplitude; }
    void set_blob_amplitude(double a) { cfg_.blob_amplitude = a; }

    // Canonical group order: hidden (w,b) pairs, density head (w,b),
    // rgb head (w,b), density bias scalar.
    static std::vector<std::string> group_suffixes(const MlpConfig& cfg);
    static std::vector<std::vector<int>> group_shapes(const MlpConfig& cfg);

private:
    void register_groups(const std::string& prefix,
                         const std::vector<std::vector<double>>& values);

    MlpConfig cfg_;
    ParamStore* store_ = nullptr;
    std::vector<int> group_ids_;
};

// Rebuild any field from its serialized blob. MLP fields register their
// groups under `prefix` in `store`.
std::unique_ptr<Field> field_from_blob(const std::vector<double>& blob, ParamStore& store,
                                       const std::string& prefix);

}  // namespace layl
