#pragma once

// Translation variables of the 0-1 test, (p,q)-plane rasterisation into
// binary feature images, and the K statistic used to validate the trajectory
// code.

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "ppgauth/binary_io.hpp"
#include "ppgauth/signal.hpp"

namespace ppgauth::chaos01 {

inline constexpr int kImageSize = 299;
inline constexpr int kImageChannels = 3;
inline constexpr double kDefaultC = 1.7;

struct PqParams {
    double c = kDefaultC;
    double alpha = 0.0;
};

void validate(const PqParams& params);

/// p, q and phi hold one entry per input sample: index i is step n = i + 1,
/// starting from p_0 = q_0 = phi_0 = 0.
struct PqTrajectory {
    std::vector<double> p;
    std::vector<double> q;
    std::vector<double> phi;
    PqParams params;

    std::size_t size() const { return p.size(); }
};

/// With alpha == 0 the sums p_n = sum s(k) cos(kc), q_n = sum s(k) sin(kc)
/// are evaluated directly with phi_n = c n; otherwise the recurrence is
/// iterated.
PqTrajectory translation_vars(std::span<const double> s, const PqParams& params);

/// Always iterates the recurrence
///   phi_n = phi_{n-1} + c + alpha s(n-1),  p_n = p_{n-1} + s(n) cos(phi_n),
/// with s(0) = 0 and a compensated phase accumulator.
PqTrajectory translation_vars_iterated(std::span<const double> s, const PqParams& params);

/// How rotation parameters are assigned to the three image channels.
struct CSchedule {
    enum class Kind : std::uint8_t { Fixed, Sweep };
    Kind kind = Kind::Fixed;
    double fixed_c = kDefaultC;
    int channels = kImageChannels;  // sweep length
};

/// Fixed: `fixed_c` for every channel. Sweep: `channels` evenly spaced
/// interior points of [pi/5, 4pi/5].
double default_c(int channel_index, const CSchedule& schedule = {});

/// Single-channel binary raster, row-major, values in {0, 1}.
struct BinaryRaster {
    int width = kImageSize;
    int height = kImageSize;
    std::vector<std::uint8_t> pixels;

    std::uint8_t at(int row, int col) const { return pixels[static_cast<std::size_t>(row) * width + col]; }
    std::size_t count_set() const;
};

/// Bounding box expanded by 5% per side, aspect-preserving scale centred in
/// the image, consecutive points joined by Bresenham segments. A trajectory
/// with zero extent lights only the centre pixel.
BinaryRaster rasterize(const PqTrajectory& traj, int size = kImageSize);

/// Bresenham line between two pixel positions (inclusive).
void draw_line(BinaryRaster& img, int x0, int y0, int x1, int y1);

struct FeatureProvenance {
    std::string subject_id;
    std::array<std::size_t, kImageChannels> segment_starts{};
    std::array<double, kImageChannels> c_values{};
};

/// (height, width, channels) binary image stored row-major with channels
/// interleaved, matching the `PQI1` byte layout.
struct FeatureImage {
    int width = kImageSize;
    int height = kImageSize;
    int channels = kImageChannels;
    std::vector<std::uint8_t> data;
    FeatureProvenance provenance;

    std::uint8_t at(int row, int col, int ch) const {
        return data[(static_cast<std::size_t>(row) * width + col) * channels + ch];
    }
    BinaryRaster channel(int ch) const;
    void set_channel(int ch, const BinaryRaster& raster);

    bool same_pixels(const FeatureImage& other) const {
        return width == other.width && height == other.height && channels == other.channels &&
               data == other.data;
    }
};

/// Channel i = rasterize(translation_vars(segments[i], params[i])).
FeatureImage featurize(std::span<const signal::Segment> segments,
                       const std::array<PqParams, kImageChannels>& params);

std::array<PqParams, kImageChannels> channel_params(const CSchedule& schedule);

struct KResult {
    std::vector<double> c_values;
    std::vector<double> k_values;
    double k_median = 0.0;
};

/// Correlation-method K statistic: for each c, the mean-square displacement
/// of (p,q) over lags n <= N/10 minus its oscillatory term, correlated with n.
KResult compute_k(std::span<const double> s, std::span<const double> c_values);

/// `count` evenly spaced values across [pi/5, 4pi/5].
std::vector<double> c_grid(std::size_t count);

// --- exports ---------------------------------------------------------------

void encode_pqi(const FeatureImage& image, io::ByteWriter& out);
/// Decodes a `PQI1` block at the reader's position. Provenance is not part of
/// the format and comes back empty.
FeatureImage decode_pqi(io::ByteReader& in);
void write_pqi(const FeatureImage& image, const std::filesystem::path& path);
FeatureImage read_pqi(const std::filesystem::path& path);

/// P5 greymap with 1 scaled to 255.
void write_pgm(const BinaryRaster& raster, const std::filesystem::path& path);
void write_png(const BinaryRaster& raster, const std::filesystem::path& path);

}  // namespace ppgauth::chaos01
