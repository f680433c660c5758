#pragma once
#include <string>
#include <vector>

namespace layl {

// Writes an 8-bit image (PNG, or binary PPM when the extension is .ppm).
// Values are clamped to [0,1] and quantized as floor(v * 255 + 0.5).
void export_image(const std::vector<double>& rgb, int width, int height,
                  const std::string& path);

// Reads a PNG or PPM into doubles in [0,1].
std::vector<double> import_image(const std::string& path, int& width, int& height);

}  // namespace layl
