#include "layl/image_io.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

#include "layl/errors.hpp"

namespace layl {

namespace {

uint8_t quantize(double v) {
    if (v <= 0.0) return 0;
    if (v >= 1.0) return 255;
    return uint8_t(std::floor(v * 255.0 + 0.5));
}

bool has_suffix(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

std::vector<uint8_t> quantize_buffer(const std::vector<double>& rgb, int width, int height) {
    if (int64_t(rgb.size()) != int64_t(width) * height * 3)
        throw ContractError("export_image: buffer size does not match dimensions");
    std::vector<uint8_t> bytes(rgb.size());
    for (size_t i = 0; i < rgb.size(); ++i) bytes[i] = quantize(rgb[i]);
    return bytes;
}

void write_ppm(const std::vector<uint8_t>& bytes, int width, int height,
               const std::string& path) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open " + path + " for writing");
    f << "P6\n" << width << " " << height << "\n255\n";
    f.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
    if (!f) throw IoError("short write to " + path);
}

void write_png(const std::vector<uint8_t>& bytes, int width, int height,
               const std::string& path) {
    FILE* fp = std::fopen(path.c_str(), "wb");
    if (!fp) throw IoError("cannot open " + path + " for writing");

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        if (png) png_destroy_write_struct(&png, &info);
        std::fclose(fp);
        throw IoError("libpng allocation failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        std::fclose(fp);
        throw IoError("libpng write failed for " + path);
    }
    png_init_io(png, fp);
    png_set_IHDR(png, info, png_uint_32(width), png_uint_32(height), 8, PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    std::vector<png_bytep> rows(static_cast<size_t>(height));
    for (int y = 0; y < height; ++y)
        rows[size_t(y)] = const_cast<png_bytep>(bytes.data() + size_t(y) * size_t(width) * 3);
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
}

std::vector<double> read_ppm(const std::string& path, int& width, int& height) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path);
    std::string magic;
    int maxval = 0;
    f >> magic >> width >> height >> maxval;
    if (magic != "P6" || maxval != 255 || width < 1 || height < 1)
        throw IoError(path + ": not an 8-bit binary PPM");
    f.get();  // single whitespace after the header
    std::vector<uint8_t> bytes(static_cast<size_t>(width) * static_cast<size_t>(height) * 3);
    f.read(reinterpret_cast<char*>(bytes.data()), std::streamsize(bytes.size()));
    if (size_t(f.gcount()) != bytes.size()) throw IoError(path + ": truncated PPM payload");
    std::vector<double> rgb(bytes.size());
    for (size_t i = 0; i < bytes.size(); ++i) rgb[i] = double(bytes[i]) / 255.0;
    return rgb;
}

std::vector<double> read_png(const std::string& path, int& width, int& height) {
    FILE* fp = std::fopen(path.c_str(), "rb");
    if (!fp) throw IoError("cannot open " + path);
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        if (png) png_destroy_read_struct(&png, &info, nullptr);
        std::fclose(fp);
        throw IoError("libpng allocation failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        std::fclose(fp);
        throw IoError(path + ": libpng read failed");
    }
    png_init_io(png, fp);
    png_read_info(png, info);
    width = int(png_get_image_width(png, info));
    height = int(png_get_image_height(png, info));

    png_set_expand(png);
    if (png_get_bit_depth(png, info) == 16) png_set_strip_16(png);
    if (png_get_color_type(png, info) == PNG_COLOR_TYPE_GRAY ||
        png_get_color_type(png, info) == PNG_COLOR_TYPE_GRAY_ALPHA)
        png_set_gray_to_rgb(png);
    png_set_strip_alpha(png);
    png_read_update_info(png, info);

    std::vector<uint8_t> bytes(static_cast<size_t>(width) * static_cast<size_t>(height) * 3);
    std::vector<png_bytep> rows(static_cast<size_t>(height));
    for (int y = 0; y < height; ++y)
        rows[size_t(y)] = bytes.data() + size_t(y) * size_t(width) * 3;
    png_read_image(png, rows.data());
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);

    std::vector<double> rgb(bytes.size());
    for (size_t i = 0; i < bytes.size(); ++i) rgb[i] = double(bytes[i]) / 255.0;
    return rgb;
}

}  // namespace

void export_image(const std::vector<double>& rgb, int width, int height,
                  const std::string& path) {
    std::vector<uint8_t> bytes = quantize_buffer(rgb, width, height);
    if (has_suffix(path, ".ppm"))
        write_ppm(bytes, width, height, path);
    else
        write_png(bytes, width, height, path);
}

std::vector<double> import_image(const std::string& path, int& width, int& height) {
    if (has_suffix(path, ".ppm")) return read_ppm(path, width, height);
    return read_png(path, width, height);
}

}  // namespace layl
