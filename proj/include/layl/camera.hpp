#pragma once
#include <vector>

#include "layl/geom.hpp"
#include "layl/rng.hpp"

namespace layl {

// Orbit camera looking at a target. Negative elevation raises the camera
// above the equator, so the default [-90, 0] range spans the top hemisphere.
struct Camera {
    double azimuth_deg = 0.0;
    double elevation_deg = 0.0;
    double radius = 3.0;
    double fov_y_deg = 40.0;
    Vec3 look_at{};

    Vec3 position() const;
};

struct CameraRanges {
    double azimuth_min_deg = 0.0;
    double azimuth_max_deg = 360.0;
    double elevation_min_deg = -90.0;
    double elevation_max_deg = 0.0;
    double radius = 3.0;
    double fov_y_deg = 40.0;
};

Camera sample_camera(Rng& rng, const CameraRanges& ranges);

// Pinhole rays through pixel centers, row-major, unit directions.
std::vector<Ray> generate_rays(const Camera& camera, int width, int height);

}  // namespace layl
