#pragma once
#include <functional>
#include <string>

#include "layl/field.hpp"

namespace layl {

// VOXL file: one text header line
//   "VOXL 1 <nx> <ny> <nz> <xmin> <ymin> <zmin> <xmax> <ymax> <zmax>\n"
// followed by little-endian 32-bit floats: the density grid (nx*ny*nz) and
// the rgb grid (nx*ny*nz*3), x-fastest with rgb packed per node.
void save_voxel(const VoxelField& field, const std::string& path);
VoxelField load_voxel(const std::string& path);

// Samples density/albedo at grid nodes spanning the bounds inclusive.
VoxelField rasterize_to_voxel(const std::function<FieldQueryResult(const Vec3&)>& sample, int nx,
                              int ny, int nz, Vec3 bmin, Vec3 bmax);
VoxelField rasterize_to_voxel(const Field& field, int nx, int ny, int nz, Vec3 bmin, Vec3 bmax);

}  // namespace layl
