#include "ppgauth/net/data.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ppgauth/errors.hpp"

namespace ppgauth::net {

namespace {

std::uint64_t mix(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(b)};
    std::array<std::uint32_t, 2> out{};
    seq.generate(out.begin(), out.end());
    return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

template <class It, class Rng>
void shuffle(It first, It last, Rng& rng) {
    // Fisher-Yates with an explicit draw so the order does not depend on the
    // standard library's std::shuffle.
    for (auto n = last - first; n > 1; --n) {
        std::uniform_int_distribution<std::int64_t> pick(0, n - 1);
        std::iter_swap(first + (n - 1), first + pick(rng));
    }
}

SubjectSegments select_windows(const SubjectSegments& s, const std::vector<std::size_t>& windows) {
    SubjectSegments out;
    out.subject_id = s.subject_id;
    for (std::size_t i = 0; i < s.segments.size(); ++i)
        if (std::find(windows.begin(), windows.end(), s.window[i]) != windows.end()) {
            out.segments.push_back(s.segments[i]);
            out.window.push_back(s.window[i]);
        }
    return out;
}

std::vector<std::size_t> distinct_windows(const SubjectSegments& s) {
    std::vector<std::size_t> w = s.window;
    std::sort(w.begin(), w.end());
    w.erase(std::unique(w.begin(), w.end()), w.end());
    return w;
}

std::size_t round_count(double fraction, std::size_t n) {
    return static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
}

}  // namespace

SegmentDataset build_dataset(std::span<const signal::PpgRecord> records, signal::PreprocessMode mode,
                             const DatasetOptions& options) {
    if (!(options.window_s > 0.0) || options.segments_per_window == 0)
        throw ParameterError("net", "dataset windows need a positive length and segment count");
    SegmentDataset out;
    for (std::size_t r = 0; r < records.size(); ++r) {
        const auto& rec = records[r];
        signal::validate(rec);
        const auto window_len = static_cast<std::size_t>(std::llround(options.window_s * rec.sample_rate_hz));
        if (window_len < signal::kSegmentLength)
            throw ParameterError("net", "dataset window shorter than one segment");
        const std::size_t windows = std::max<std::size_t>(1, rec.size() / window_len);
        const std::size_t span = std::min(window_len, rec.size());
        SubjectSegments subject;
        subject.subject_id = rec.subject_id;
        for (std::size_t w = 0; w < windows; ++w) {
            signal::PpgRecord chunk{rec.subject_id, rec.sample_rate_hz, {}};
            const auto first = rec.samples.begin() + static_cast<std::ptrdiff_t>(w * window_len);
            chunk.samples.assign(first, first + static_cast<std::ptrdiff_t>(span));
            const auto segs = signal::segment(signal::preprocess(chunk, mode),
                                              signal::RandomStarts{options.segments_per_window, mix(options.seed, r, w)});
            for (auto seg : segs) {
                seg.start_index += w * window_len;
                subject.segments.push_back(std::move(seg));
                subject.window.push_back(w);
            }
        }
        auto existing = std::find_if(out.begin(), out.end(),
                                     [&](const SubjectSegments& s) { return s.subject_id == rec.subject_id; });
        if (existing == out.end()) {
            out.push_back(std::move(subject));
        } else {
            // A further record of a known subject contributes new windows.
            const std::size_t base = distinct_windows(*existing).back() + 1;
            for (std::size_t i = 0; i < subject.segments.size(); ++i) {
                existing->segments.push_back(std::move(subject.segments[i]));
                existing->window.push_back(base + subject.window[i]);
            }
        }
    }
    return out;
}

std::string_view to_string(SplitMode mode) {
    return mode == SplitMode::UserDisjoint ? "user-disjoint" : "data-disjoint";
}

SplitMode parse_split_mode(std::string_view text) {
    if (text == "user-disjoint") return SplitMode::UserDisjoint;
    if (text == "data-disjoint") return SplitMode::DataDisjoint;
    throw ParameterError("net", "unknown split '" + std::string(text) + "' (expected user-disjoint or data-disjoint)");
}

DataSplit split_data(const SegmentDataset& data, SplitMode mode, const SplitFractions& f, std::uint64_t seed) {
    for (double v : {f.train, f.val, f.test})
        if (!(v >= 0.0) || !std::isfinite(v)) throw ParameterError("net", "split fractions must be non-negative");
    if (std::abs(f.train + f.val + f.test - 1.0) > 1e-9) throw ParameterError("net", "split fractions must sum to 1");
    if (data.empty()) throw ParameterError("net", "cannot split an empty dataset");

    DataSplit out;
    std::mt19937_64 rng(mix(seed, 0x5911));
    auto cut_windows = [&](const SubjectSegments& s, double train_share, double val_share,
                           SegmentDataset* train, SegmentDataset* val, SegmentDataset* test) {
        auto windows = distinct_windows(s);
        shuffle(windows.begin(), windows.end(), rng);
        const std::size_t n = windows.size();
        const std::size_t n_train = std::min(n, round_count(train_share, n));
        const std::size_t n_val = std::min(n - n_train, round_count(val_share, n));
        std::vector<std::size_t> wt(windows.begin(), windows.begin() + static_cast<std::ptrdiff_t>(n_train));
        std::vector<std::size_t> wv(windows.begin() + static_cast<std::ptrdiff_t>(n_train),
                                    windows.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
        std::vector<std::size_t> ws(windows.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), windows.end());
        auto emit = [&](SegmentDataset* dst, const std::vector<std::size_t>& w, const char* what) {
            if (!dst) return;
            if (w.empty())
                throw ParameterError("net", "subject " + s.subject_id + " has " + std::to_string(n) +
                                                " acquisition windows, leaving the " + what + " partition empty");
            dst->push_back(select_windows(s, w));
        };
        emit(train, wt, "training");
        emit(val, wv, "validation");
        emit(test, ws, "test");
    };

    if (mode == SplitMode::DataDisjoint) {
        for (const auto& s : data) cut_windows(s, f.train, f.val, &out.train, &out.val, &out.test);
        return out;
    }

    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), 0);
    shuffle(order.begin(), order.end(), rng);
    const std::size_t n_known = std::min(data.size(), round_count(f.train, data.size()));
    if (n_known == 0 || n_known == data.size())
        throw ParameterError("net", "user-disjoint split of " + std::to_string(data.size()) +
                                        " subjects leaves a partition empty");
    std::sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_known));
    std::sort(order.begin() + static_cast<std::ptrdiff_t>(n_known), order.end());
    const double known = f.train + f.val;
    for (std::size_t i = 0; i < n_known; ++i)
        cut_windows(data[order[i]], f.train / known, f.val / known, &out.train, &out.val, nullptr);
    for (std::size_t i = n_known; i < order.size(); ++i) out.test.push_back(data[order[i]]);
    return out;
}

// --- images --------------------------------------------------------------------

std::vector<std::uint8_t> downsample_or(std::span<const std::uint8_t> plane, int in_hw, int out_hw) {
    if (in_hw < 1 || out_hw < 1 || out_hw > in_hw)
        throw ShapeError("net", "cannot downsample " + std::to_string(in_hw) + " to " + std::to_string(out_hw));
    if (plane.size() != static_cast<std::size_t>(in_hw) * in_hw) throw ShapeError("net", "plane size mismatch");
    std::vector<std::uint8_t> out(static_cast<std::size_t>(out_hw) * out_hw, 0);
    for (int r = 0; r < in_hw; ++r) {
        const std::size_t orow = static_cast<std::size_t>(r * out_hw / in_hw) * out_hw;
        for (int c = 0; c < in_hw; ++c)
            if (plane[static_cast<std::size_t>(r) * in_hw + c]) out[orow + c * out_hw / in_hw] = 1;
    }
    return out;
}

template <class T>
void image_to_input(const chaos01::FeatureImage& image, int hw, T* dst) {
    if (image.width != image.height || image.data.size() != static_cast<std::size_t>(image.width) * image.height * image.channels)
        throw ShapeError("net", "feature image must be square and consistent with its buffer");
    if (image.channels != chaos01::kImageChannels)
        throw ShapeError("net", "feature image needs 3 channels, got " + std::to_string(image.channels));
    const std::size_t plane = static_cast<std::size_t>(hw) * hw;
    for (int ch = 0; ch < image.channels; ++ch) {
        const auto raster = image.channel(ch);
        const auto px = image.width == hw ? raster.pixels : downsample_or(raster.pixels, image.width, hw);
        for (std::size_t i = 0; i < plane; ++i) dst[ch * plane + i] = static_cast<T>(px[i]);
    }
}

template <class T>
BasicTensor<T> images_to_batch(std::span<const chaos01::FeatureImage> images, int hw) {
    BasicTensor<T> out({static_cast<int>(images.size()), chaos01::kImageChannels, hw, hw});
    for (std::size_t i = 0; i < images.size(); ++i) image_to_input(images[i], hw, out.data() + i * out.item_size());
    return out;
}

template void image_to_input<float>(const chaos01::FeatureImage&, int, float*);
template void image_to_input<double>(const chaos01::FeatureImage&, int, double*);
template BasicTensor<float> images_to_batch<float>(std::span<const chaos01::FeatureImage>, int);
template BasicTensor<double> images_to_batch<double>(std::span<const chaos01::FeatureImage>, int);

// --- pairs ---------------------------------------------------------------------

PairGenerator::PairGenerator(const SegmentDataset& data, ImageSpec spec, std::uint64_t seed)
    : data_(&data), spec_(spec), rng_(mix(seed, 0xba7c)) {
    if (data.size() < 2) throw InsufficientDataError("net", "pair generation needs at least 2 subjects");
    for (const auto& s : data)
        if (s.segments.size() < chaos01::kImageChannels)
            throw InsufficientDataError("net", "subject " + s.subject_id + " has " +
                                                   std::to_string(s.segments.size()) +
                                                   " segments, pair generation needs at least 3");
    if (spec.input_hw < 1 || spec.input_hw > chaos01::kImageSize)
        throw ParameterError("net", "input size must lie in [1, 299]");
    for (const auto& s : data) {
        if (s.window.size() != s.segments.size())
            throw ParameterError("net", "subject " + s.subject_id + " lacks a window index per segment");
        windows_.push_back(distinct_windows(s));
    }
}

chaos01::FeatureImage PairGenerator::draw(std::size_t subject, std::size_t window, std::vector<std::size_t>& used) {
    const auto& s = (*data_)[subject];
    std::vector<std::size_t> pool;
    for (std::size_t i = 0; i < s.segments.size(); ++i)
        if (s.window[i] == window) pool.push_back(i);
    if (pool.size() < chaos01::kImageChannels) {
        pool.resize(s.segments.size());
        std::iota(pool.begin(), pool.end(), 0);
    }
    // Avoid reusing the other side's segments whenever the pool allows it.
    std::vector<std::size_t> fresh;
    for (std::size_t i : pool)
        if (std::find(used.begin(), used.end(), i) == used.end()) fresh.push_back(i);
    if (fresh.size() >= chaos01::kImageChannels) pool = std::move(fresh);
    std::array<signal::Segment, chaos01::kImageChannels> picks;
    for (std::size_t k = 0; k < picks.size(); ++k) {
        std::uniform_int_distribution<std::size_t> pick(k, pool.size() - 1);
        std::swap(pool[k], pool[pick(rng_)]);
        used.push_back(pool[k]);
        picks[k] = s.segments[pool[k]];
    }
    return chaos01::featurize(picks, spec_.params);
}

std::size_t PairGenerator::pick_window(std::size_t subject, std::optional<std::size_t> avoid) {
    const auto& w = windows_[subject];
    if (avoid && w.size() > 1) {
        std::uniform_int_distribution<std::size_t> pick(0, w.size() - 2);
        const std::size_t i = pick(rng_);
        return w[i] == *avoid ? w.back() : w[i];
    }
    std::uniform_int_distribution<std::size_t> pick(0, w.size() - 1);
    return w[pick(rng_)];
}

PairBatch PairGenerator::next(int batch_size) {
    if (batch_size < 1) throw ParameterError("net", "batch size must be positive");
    std::vector<double> labels(static_cast<std::size_t>(batch_size));
    for (auto& l : labels) l = (produced_++ % 2 == 0) ? 1.0 : 0.0;
    shuffle(labels.begin(), labels.end(), rng_);

    const std::size_t subjects = data_->size();
    std::uniform_int_distribution<std::size_t> pick_subject(0, subjects - 1);
    std::uniform_int_distribution<std::size_t> pick_other(1, subjects - 1);
    std::vector<chaos01::FeatureImage> a, b;
    for (double label : labels) {
        const std::size_t sa = pick_subject(rng_);
        const std::size_t sb = label > 0.5 ? sa : (sa + pick_other(rng_)) % subjects;
        // Genuine sides come from different windows when the subject has
        // more than one, like an enrollment and a later probe.
        const std::size_t wa = pick_window(sa, std::nullopt);
        const std::size_t wb = sb == sa ? pick_window(sa, wa) : pick_window(sb, std::nullopt);
        std::vector<std::size_t> used;
        a.push_back(draw(sa, wa, used));
        if (sb != sa) used.clear();
        b.push_back(draw(sb, wb, used));
    }
    return {images_to_batch<float>(a, spec_.input_hw), images_to_batch<float>(b, spec_.input_hw), labels};
}

PairBatch make_pairs(const SegmentDataset& data, const ImageSpec& spec, int count, std::uint64_t seed) {
    PairGenerator gen(data, spec, seed);
    return gen.next(count);
}

}  // namespace ppgauth::net
