#pragma once

// Segment datasets, train/validation/test splits and the balanced pair
// generator feeding the Siamese model.

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "ppgauth/chaos01.hpp"
#include "ppgauth/net/tensor.hpp"
#include "ppgauth/signal.hpp"

namespace ppgauth::net {

/// Segments of one subject. `window[i]` is the acquisition window that
/// segment i was cut from; splits never separate a window.
struct SubjectSegments {
    std::string subject_id;
    std::vector<signal::Segment> segments;
    std::vector<std::size_t> window;
};

using SegmentDataset = std::vector<SubjectSegments>;

struct DatasetOptions {
    /// Records are cut into windows of this length, each preprocessed on its
    /// own like a separate enrollment acquisition.
    double window_s = 12.0;
    std::size_t segments_per_window = 30;
    std::uint64_t seed = 0;
};

SegmentDataset build_dataset(std::span<const signal::PpgRecord> records, signal::PreprocessMode mode,
                             const DatasetOptions& options);

enum class SplitMode : std::uint8_t { UserDisjoint, DataDisjoint };

std::string_view to_string(SplitMode mode);
/// Accepts "user-disjoint" and "data-disjoint".
SplitMode parse_split_mode(std::string_view text);

struct SplitFractions {
    double train = 0.6;
    double val = 0.2;
    double test = 0.2;
};

struct DataSplit {
    SegmentDataset train, val, test;
};

/// DataDisjoint: every subject's windows are shuffled and cut train/val/test.
/// UserDisjoint: round(train * S) subjects supply training and validation
/// data (their windows cut train : val), the remaining subjects are the test
/// set. Deterministic for the seed; throws ParameterError when a partition
/// comes out empty.
DataSplit split_data(const SegmentDataset& data, SplitMode mode, const SplitFractions& fractions,
                     std::uint64_t seed);

/// How a 299x299x3 feature image becomes network input.
struct ImageSpec {
    int input_hw = chaos01::kImageSize;
    std::array<chaos01::PqParams, chaos01::kImageChannels> params = chaos01::channel_params({});
};

/// OR-pools a binary plane onto a smaller grid: source pixel (r, c) lands on
/// (r * out / in, c * out / in). Values stay in {0, 1}.
std::vector<std::uint8_t> downsample_or(std::span<const std::uint8_t> plane, int in_hw, int out_hw);

/// Writes the image as (3, hw, hw) reals in {0, 1} into `dst`.
template <class T>
void image_to_input(const chaos01::FeatureImage& image, int hw, T* dst);

/// Featurizes a stack of 12 s style images into an (N, 3, hw, hw) batch.
template <class T>
BasicTensor<T> images_to_batch(std::span<const chaos01::FeatureImage> images, int hw);

struct PairBatch {
    Tensor images_a;
    Tensor images_b;
    std::vector<double> labels;
};

/// Each item draws three segments of one window for side A and three for
/// side B; label 1 iff both come from one subject, in which case the sides
/// use different windows whenever the subject has several. Labels alternate across the stream, so
/// any run of batches is balanced to within one item, and are shuffled
/// inside each batch.
class PairGenerator {
public:
    PairGenerator(const SegmentDataset& data, ImageSpec spec, std::uint64_t seed);

    PairBatch next(int batch_size);

private:
    /// Three segments of one window; falls back to the whole subject when
    /// the window holds fewer than three.
    chaos01::FeatureImage draw(std::size_t subject, std::size_t window, std::vector<std::size_t>& used);
    std::size_t pick_window(std::size_t subject, std::optional<std::size_t> avoid);

    const SegmentDataset* data_;
    ImageSpec spec_;
    std::vector<std::vector<std::size_t>> windows_;
    std::mt19937_64 rng_;
    std::uint64_t produced_ = 0;
};

/// A fixed list of `count` labelled pairs drawn with their own seed.
PairBatch make_pairs(const SegmentDataset& data, const ImageSpec& spec, int count, std::uint64_t seed);

}  // namespace ppgauth::net
