#include <algorithm>
#include <cmath>
#include <numeric>

#include "ppgauth/chaos01.hpp"
#include "ppgauth/errors.hpp"

namespace ppgauth::chaos01 {

namespace {
constexpr double kMarginPerSide = 0.05;
}

std::size_t BinaryRaster::count_set() const {
    return static_cast<std::size_t>(std::count(pixels.begin(), pixels.end(), std::uint8_t{1}));
}

void draw_line(BinaryRaster& img, int x0, int y0, int x1, int y1) {
    const int dx = std::abs(x1 - x0), sx = x0 < x1 ? 1 : -1;
    const int dy = -std::abs(y1 - y0), sy = y0 < y1 ? 1 : -1;
    int err = dx + dy;
    for (;;) {
        img.pixels[static_cast<std::size_t>(y0) * img.width + x0] = 1;
        if (x0 == x1 && y0 == y1) break;
        const int e2 = 2 * err;
        if (e2 >= dy) {
            err += dy;
            x0 += sx;
        }
        if (e2 <= dx) {
            err += dx;
            y0 += sy;
        }
    }
}

BinaryRaster rasterize(const PqTrajectory& traj, int size) {
    if (traj.size() == 0) throw ShapeError("chaos01", "cannot rasterise an empty trajectory");
    if (traj.q.size() != traj.p.size()) throw ShapeError("chaos01", "p and q lengths differ");
    if (size < 1) throw ParameterError("chaos01", "raster size must be >= 1");

    BinaryRaster img{size, size, std::vector<std::uint8_t>(static_cast<std::size_t>(size) * size, 0)};
    const auto [pmin, pmax] = std::minmax_element(traj.p.begin(), traj.p.end());
    const auto [qmin, qmax] = std::minmax_element(traj.q.begin(), traj.q.end());
    const double extent = std::max(*pmax - *pmin, *qmax - *qmin);
    const int mid = size / 2;
    if (!(extent > 0.0)) {
        if (!std::isfinite(extent)) throw ParameterError("chaos01", "trajectory is not finite");
        img.pixels[static_cast<std::size_t>(mid) * size + mid] = 1;
        return img;
    }

    const double scale = (size - 1) / (extent * (1.0 + 2.0 * kMarginPerSide));
    const double pc = (*pmin + *pmax) / 2.0, qc = (*qmin + *qmax) / 2.0;
    const double half = (size - 1) / 2.0;
    auto to_pixel = [&](std::size_t i) {
        const int col = static_cast<int>(std::lround((traj.p[i] - pc) * scale + half));
        const int row = static_cast<int>(std::lround(half - (traj.q[i] - qc) * scale));
        return std::pair{std::clamp(col, 0, size - 1), std::clamp(row, 0, size - 1)};
    };

    auto [x0, y0] = to_pixel(0);
    img.pixels[static_cast<std::size_t>(y0) * size + x0] = 1;
    for (std::size_t i = 1; i < traj.size(); ++i) {
        const auto [x1, y1] = to_pixel(i);
        draw_line(img, x0, y0, x1, y1);
        x0 = x1;
        y0 = y1;
    }
    return img;
}

BinaryRaster FeatureImage::channel(int ch) const {
    BinaryRaster r{width, height, std::vector<std::uint8_t>(static_cast<std::size_t>(width) * height)};
    for (std::size_t i = 0; i < r.pixels.size(); ++i) r.pixels[i] = data[i * channels + ch];
    return r;
}

void FeatureImage::set_channel(int ch, const BinaryRaster& raster) {
    if (raster.width != width || raster.height != height)
        throw ShapeError("chaos01", "raster size does not match the feature image");
    data.resize(static_cast<std::size_t>(width) * height * channels);
    for (std::size_t i = 0; i < raster.pixels.size(); ++i) data[i * channels + ch] = raster.pixels[i];
}

FeatureImage featurize(std::span<const signal::Segment> segments,
                       const std::array<PqParams, kImageChannels>& params) {
    if (segments.size() != kImageChannels)
        throw ShapeError("chaos01", "featurize needs exactly 3 segments, got " +
                                        std::to_string(segments.size()));
    FeatureImage img;
    img.data.assign(static_cast<std::size_t>(kImageSize) * kImageSize * kImageChannels, 0);
    img.provenance.subject_id = segments[0].subject_id;
    for (std::size_t i = 0; i < segments.size(); ++i) {
        if (segments[i].samples.size() != signal::kSegmentLength)
            throw ShapeError("chaos01", "segment " + std::to_string(i) + " has " +
                                            std::to_string(segments[i].samples.size()) +
                                            " samples, expected 1000");
        img.set_channel(static_cast<int>(i), rasterize(translation_vars(segments[i].samples, params[i])));
        img.provenance.segment_starts[i] = segments[i].start_index;
        img.provenance.c_values[i] = params[i].c;
    }
    return img;
}

}  // namespace ppgauth::chaos01
