#pragma once

// PPG records: synthesis, Butterworth band-pass filtering, normalisation,
// segmentation and the CSV / binary record formats.

#include <array>
#include <complex>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace ppgauth::signal {

inline constexpr double kDefaultSampleRateHz = 250.0;
inline constexpr std::size_t kSegmentLength = 1000;

struct PpgRecord {
    std::string subject_id;
    double sample_rate_hz = kDefaultSampleRateHz;
    std::vector<double> samples;

    std::size_t size() const { return samples.size(); }
    double duration_s() const { return static_cast<double>(samples.size()) / sample_rate_hz; }
};

/// Throws ParameterError unless the rate is positive, the record is non-empty
/// and every sample is finite.
void validate(const PpgRecord& record);

/// One Gaussian lobe of the per-beat pulse template. Offset is measured from
/// beat onset.
struct GaussianLobe {
    double amplitude = 1.0;
    double width_s = 0.1;
    double offset_s = 0.2;
};

struct SubjectProfile {
    std::string subject_id;
    double heart_rate_bpm_mean = 70.0;
    double heart_rate_bpm_std = 1.0;
    GaussianLobe systolic{1.0, 0.1, 0.15};
    GaussianLobe diastolic{0.4, 0.12, 0.45};
    double resp_freq_hz = 0.25;
    double resp_depth = 0.05;
    double baseline_wander_amp = 0.1;
    double dc_level = 0.5;
    double noise_sigma = 0.01;
    std::uint64_t rng_seed = 0;
};

void validate(const SubjectProfile& profile);

/// Deterministic for (profile, seed). Each beat is the sum of the two lobes;
/// RR intervals jitter with the heart-rate spread; respiration modulates the
/// amplitude; a slow sinusoid adds baseline wander; white noise is additive.
PpgRecord synth_ppg(const SubjectProfile& profile, double duration_s, std::uint64_t seed,
                    double sample_rate_hz = kDefaultSampleRateHz);

/// Hand-tuned synthetic population. The first eight profiles are spread well
/// apart in heart rate and pulse morphology; further profiles are drawn from a
/// seeded generator over the same parameter ranges.
std::vector<SubjectProfile> default_registry(std::size_t count);

// --- filtering -------------------------------------------------------------

struct FilterSpec {
    double low_cut_hz = 0.5;
    double high_cut_hz = 8.0;
    int order = 4;
};

/// One biquad: b0 + b1 z^-1 + b2 z^-2 over 1 + a1 z^-1 + a2 z^-2.
struct Biquad {
    std::array<double, 3> b{};
    std::array<double, 2> a{};
};

using SosFilter = std::vector<Biquad>;

void validate(const FilterSpec& spec, double sample_rate_hz);

/// Digital Butterworth band-pass (bilinear transform with pre-warped band
/// edges), returned as `order` second-order sections with unit gain at the
/// geometric centre frequency.
SosFilter design_bandpass(const FilterSpec& spec, double sample_rate_hz);

/// H(e^{jw}) of the cascade at frequency `freq_hz`.
std::complex<double> frequency_response(const SosFilter& sos, double freq_hz, double sample_rate_hz);

/// Causal cascade filtering; `state` holds two delay values per section.
std::vector<double> sosfilt(const SosFilter& sos, std::span<const double> x,
                            std::vector<std::array<double, 2>>& state);

/// Forward-backward (zero-phase) filtering with odd-extension padding and
/// step-response initial conditions.
std::vector<double> sosfiltfilt(const SosFilter& sos, std::span<const double> x);

PpgRecord bandpass(const PpgRecord& record, const FilterSpec& spec);

/// Affine map onto [0, 1]. Throws DegenerateRangeError for a constant signal.
PpgRecord normalize01(const PpgRecord& record);

enum class PreprocessMode : std::uint8_t { Raw = 0, Band01_8 = 1, Band05_8 = 2, Band05_8Norm = 3 };

std::string_view to_string(PreprocessMode mode);
PreprocessMode parse_preprocess_mode(std::string_view text);

PpgRecord preprocess(const PpgRecord& record, PreprocessMode mode);

// --- segmentation ----------------------------------------------------------

struct Segment {
    std::string subject_id;
    std::size_t start_index = 0;
    std::vector<double> samples;  // exactly kSegmentLength values
};

struct Consecutive {};
struct RandomStarts {
    std::size_t count = 0;
    std::uint64_t seed = 0;
};
using SegmentStrategy = std::variant<Consecutive, RandomStarts>;

/// Consecutive: non-overlapping windows from index 0. RandomStarts: `count`
/// windows with uniform starts in [0, N - 1000]; windows may overlap.
std::vector<Segment> segment(const PpgRecord& record, const SegmentStrategy& strategy);

// --- file formats ----------------------------------------------------------

/// `subject_id,<id>` / `sample_rate_hz,<rate>` header then one sample per line.
void write_csv(const PpgRecord& record, const std::filesystem::path& path);
PpgRecord read_csv(const std::filesystem::path& path);

/// `PPG1`, u32 LE count, f32 LE samples. The format carries neither id nor
/// rate: reading assigns the file stem and the default 250 Hz.
void write_binary(const PpgRecord& record, const std::filesystem::path& path);
PpgRecord read_binary(const std::filesystem::path& path);

/// Dispatches on extension: ".csv" is text, anything else is `PPG1`.
PpgRecord read_record(const std::filesystem::path& path);
void write_record(const PpgRecord& record, const std::filesystem::path& path);

}  // namespace ppgauth::signal
