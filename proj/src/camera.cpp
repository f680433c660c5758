#include "layl/camera.hpp"

#include <cmath>

#include "layl/errors.hpp"

namespace layl {

Vec3 Camera::position() const {
    double az = azimuth_deg * M_PI / 180.0;
    double el = elevation_deg * M_PI / 180.0;
    Vec3 offset{radius * std::cos(el) * std::cos(az), radius * std::cos(el) * std::sin(az),
                -radius * std::sin(el)};
    return look_at + offset;
}

Camera sample_camera(Rng& rng, const CameraRanges& ranges) {
    if (ranges.azimuth_min_deg > ranges.azimuth_max_deg ||
        ranges.elevation_min_deg > ranges.elevation_max_deg)
        throw ConfigError("sample_camera: empty camera range");
    if (ranges.radius <= 0.0) throw ConfigError("sample_camera: radius must be positive");
    if (ranges.fov_y_deg <= 0.0 || ranges.fov_y_deg >= 180.0)
        throw ConfigError("sample_camera: fov_y out of (0, 180)");

    Camera c;
    c.azimuth_deg = rng.uniform(ranges.azimuth_min_deg, ranges.azimuth_max_deg);
    c.elevation_deg = rng.uniform(ranges.elevation_min_deg, ranges.elevation_max_deg);
    c.radius = ranges.radius;
    c.fov_y_deg = ranges.fov_y_deg;
    return c;
}

std::vector<Ray> generate_rays(const Camera& camera, int width, int height) {
    if (width < 1 || height < 1) throw ContractError("generate_rays: empty image");

    Vec3 pos = camera.position();
    Vec3 forward = (camera.look_at - pos).normalized();
    Vec3 up{0.0, 0.0, 1.0};
    if (forward.cross(up).norm() < 1e-9) up = {0.0, 1.0, 0.0};  // polar view
    Vec3 right = forward.cross(up).normalized();
    Vec3 cam_up = right.cross(forward);

    double tan_half = std::tan(camera.fov_y_deg * M_PI / 360.0);
    double aspect = double(width) / double(height);

    std::vector<Ray> rays;
    rays.reserve(size_t(width) * size_t(height));
    for (int i = 0; i < height; ++i) {
        double v = 1.0 - 2.0 * (i + 0.5) / double(height);
        for (int j = 0; j < width; ++j) {
            double u = 2.0 * (j + 0.5) / double(width) - 1.0;
            Vec3 dir = forward + right * (u * tan_half * aspect) + cam_up * (v * tan_half);
            rays.push_back(Ray{pos, dir.normalized()});
        }
    }
    return rays;
}

}  // namespace layl
