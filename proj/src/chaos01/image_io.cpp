#include <png.h>

#include <cstdio>
#include <limits>
#include <memory>
#include <string>

#include "ppgauth/chaos01.hpp"
#include "ppgauth/errors.hpp"

namespace ppgauth::chaos01 {

void encode_pqi(const FeatureImage& image, io::ByteWriter& out) {
    constexpr int kMax = std::numeric_limits<std::uint16_t>::max();
    if (image.width > kMax || image.height > kMax || image.channels > kMax)
        throw ShapeError("chaos01", "image dimensions exceed the PQI1 range");
    if (image.data.size() != static_cast<std::size_t>(image.width) * image.height * image.channels)
        throw ShapeError("chaos01", "image buffer does not match its shape");
    out.magic("PQI1");
    out.u16(static_cast<std::uint16_t>(image.width));
    out.u16(static_cast<std::uint16_t>(image.height));
    out.u16(static_cast<std::uint16_t>(image.channels));
    out.bytes(image.data.data(), image.data.size());
}

FeatureImage decode_pqi(io::ByteReader& in) {
    in.expect_magic("PQI1");
    FeatureImage img;
    img.width = in.u16("width");
    img.height = in.u16("height");
    img.channels = in.u16("channels");
    img.data.resize(static_cast<std::size_t>(img.width) * img.height * img.channels);
    const std::size_t start = in.offset();
    in.read(img.data.data(), img.data.size(), "pixel data");
    for (std::size_t i = 0; i < img.data.size(); ++i)
        if (img.data[i] > 1)
            throw FormatError("chaos01", "pixel value outside {0,1}", start + i);
    return img;
}

void write_pqi(const FeatureImage& image, const std::filesystem::path& path) {
    io::ByteWriter w;
    encode_pqi(image, w);
    io::write_file_atomic(path, w.data(), "chaos01");
}

FeatureImage read_pqi(const std::filesystem::path& path) {
    const auto bytes = io::read_file(path, "chaos01");
    io::ByteReader r(bytes.data(), bytes.size(), "chaos01");
    auto img = decode_pqi(r);
    if (r.remaining() != 0) r.fail("trailing bytes after image");
    return img;
}

void write_pgm(const BinaryRaster& raster, const std::filesystem::path& path) {
    io::ByteWriter w;
    const std::string header =
        "P5\n" + std::to_string(raster.width) + " " + std::to_string(raster.height) + "\n255\n";
    w.bytes(header.data(), header.size());
    for (auto v : raster.pixels) w.u8(v ? 255 : 0);
    io::write_file_atomic(path, w.data(), "chaos01");
}

void write_png(const BinaryRaster& raster, const std::filesystem::path& path) {
    std::unique_ptr<FILE, int (*)(FILE*)> fp(std::fopen(path.c_str(), "wb"), &std::fclose);
    if (!fp) throw ParameterError("chaos01", "cannot write " + path.string());
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, &info);
        throw ParameterError("chaos01", "libpng initialisation failed");
    }
    std::vector<std::uint8_t> row(static_cast<std::size_t>(raster.width));
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw ParameterError("chaos01", "libpng failed writing " + path.string());
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(raster.width), static_cast<png_uint_32>(raster.height),
                 8, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int y = 0; y < raster.height; ++y) {
        for (int x = 0; x < raster.width; ++x) row[static_cast<std::size_t>(x)] = raster.at(y, x) ? 255 : 0;
        png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

}  // namespace ppgauth::chaos01
