#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "ppgauth/errors.hpp"
#include "ppgauth/signal.hpp"

namespace ppgauth::signal {

namespace {

constexpr double kBaselineWanderHz = 0.1;
constexpr double kMinHeartRateBpm = 30.0;
constexpr double kLobeSupport = 6.0;  // lobes are truncated at +-6 widths

void add_lobe(std::vector<double>& x, double sample_rate_hz, double beat_onset_s,
              const GaussianLobe& lobe) {
    const double centre = beat_onset_s + lobe.offset_s;
    const double half = kLobeSupport * lobe.width_s;
    const auto n = static_cast<long>(x.size());
    const long first = std::max(0L, static_cast<long>(std::ceil((centre - half) * sample_rate_hz)));
    const long last = std::min(n - 1, static_cast<long>(std::floor((centre + half) * sample_rate_hz)));
    const double inv2w2 = 1.0 / (2.0 * lobe.width_s * lobe.width_s);
    for (long k = first; k <= last; ++k) {
        const double d = static_cast<double>(k) / sample_rate_hz - centre;
        x[static_cast<std::size_t>(k)] += lobe.amplitude * std::exp(-d * d * inv2w2);
    }
}

}  // namespace

void validate(const SubjectProfile& p) {
    auto fail = [](const std::string& m) { throw ParameterError("signal", m); };
    if (!(p.heart_rate_bpm_mean >= 40.0 && p.heart_rate_bpm_mean <= 180.0))
        fail("heart_rate_bpm_mean must lie in [40, 180]");
    if (!(p.heart_rate_bpm_std >= 0.0)) fail("heart_rate_bpm_std must be >= 0");
    if (!(p.systolic.width_s > 0.0) || !(p.diastolic.width_s > 0.0)) fail("lobe widths must be > 0");
    if (!(p.noise_sigma >= 0.0)) fail("noise_sigma must be >= 0");
    if (!(p.resp_freq_hz >= 0.0)) fail("resp_freq_hz must be >= 0");
    for (double v : {p.systolic.amplitude, p.systolic.offset_s, p.diastolic.amplitude,
                     p.diastolic.offset_s, p.resp_depth, p.baseline_wander_amp, p.dc_level})
        if (!std::isfinite(v)) fail("profile contains a non-finite parameter");
}

PpgRecord synth_ppg(const SubjectProfile& profile, double duration_s, std::uint64_t seed,
                    double sample_rate_hz) {
    validate(profile);
    if (!(duration_s >= 4.0)) throw ParameterError("signal", "synth_ppg needs duration_s >= 4");
    if (!(sample_rate_hz > 0.0)) throw ParameterError("signal", "sample rate must be > 0");

    std::seed_seq seq{static_cast<std::uint32_t>(profile.rng_seed),
                      static_cast<std::uint32_t>(profile.rng_seed >> 32),
                      static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
    std::mt19937_64 rng(seq);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);

    const auto n = static_cast<std::size_t>(std::llround(duration_s * sample_rate_hz));
    std::vector<double> x(n, 0.0);

    const double mean_rr = 60.0 / profile.heart_rate_bpm_mean;
    const double two_pi = 2.0 * std::numbers::pi;
    const double first_onset = -unit(rng) * mean_rr - mean_rr;
    const double resp_phase = unit(rng) * two_pi;
    const double wander_phase = unit(rng) * two_pi;

    for (double onset = first_onset; onset < duration_s;) {
        add_lobe(x, sample_rate_hz, onset, profile.systolic);
        add_lobe(x, sample_rate_hz, onset, profile.diastolic);
        double bpm = profile.heart_rate_bpm_mean;
        if (profile.heart_rate_bpm_std > 0.0) bpm += profile.heart_rate_bpm_std * gauss(rng);
        onset += 60.0 / std::max(kMinHeartRateBpm, bpm);
    }

    for (std::size_t k = 0; k < n; ++k) {
        const double t = static_cast<double>(k) / sample_rate_hz;
        double v = x[k];
        if (profile.resp_depth != 0.0)
            v *= 1.0 + profile.resp_depth * std::sin(two_pi * profile.resp_freq_hz * t + resp_phase);
        if (profile.baseline_wander_amp != 0.0)
            v += profile.baseline_wander_amp * std::sin(two_pi * kBaselineWanderHz * t + wander_phase);
        x[k] = v + profile.dc_level;
    }
    if (profile.noise_sigma > 0.0)
        for (double& v : x) v += profile.noise_sigma * gauss(rng);

    return PpgRecord{profile.subject_id, sample_rate_hz, std::move(x)};
}

std::vector<SubjectProfile> default_registry(std::size_t count) {
    // Heart rates step by 6 bpm with a 1 bpm spread; diastolic lobes differ in
    // height, delay and width so that amplitude distributions separate.
    static constexpr std::array<double, 8> kDiaAmp{0.10, 0.60, 0.30, 0.80, 0.20, 0.45, 0.70, 0.38};
    static constexpr std::array<double, 8> kDiaDelay{0.30, 0.45, 0.22, 0.50, 0.40, 0.26, 0.55, 0.35};
    static constexpr std::array<double, 8> kSysWidth{0.07, 0.12, 0.09, 0.14, 0.06, 0.10, 0.16, 0.08};
    static constexpr std::array<double, 8> kDiaWidth{0.10, 0.08, 0.14, 0.12, 0.16, 0.09, 0.11, 0.15};

    std::vector<SubjectProfile> out;
    out.reserve(count);
    std::mt19937_64 rng(0x5eedULL);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (std::size_t i = 0; i < count; ++i) {
        SubjectProfile p;
        const std::string n = std::to_string(i + 1);
        p.subject_id = "S" + std::string(n.size() < 2 ? 1 : 0, '0') + n;
        p.rng_seed = 1000 + i;
        if (i < kDiaAmp.size()) {
            const double di = static_cast<double>(i);
            p.heart_rate_bpm_mean = 55.0 + 6.0 * di;
            p.heart_rate_bpm_std = 1.0;
            p.systolic = {1.0, kSysWidth[i], 0.15};
            p.diastolic = {kDiaAmp[i], kDiaWidth[i], 0.15 + kDiaDelay[i]};
            p.resp_freq_hz = 0.2 + 0.02 * di;
            p.resp_depth = 0.05;
            p.baseline_wander_amp = 0.1 + 0.02 * di;
            p.dc_level = 0.5 + 0.1 * di;
            p.noise_sigma = 0.01 + 0.002 * di;
        } else {
            p.heart_rate_bpm_mean = 50.0 + 50.0 * u(rng);
            p.heart_rate_bpm_std = 1.0;
            p.systolic = {1.0, 0.05 + 0.12 * u(rng), 0.15};
            p.diastolic = {0.05 + 0.8 * u(rng), 0.07 + 0.1 * u(rng), 0.35 + 0.35 * u(rng)};
            p.resp_freq_hz = 0.15 + 0.2 * u(rng);
            p.resp_depth = 0.05;
            p.baseline_wander_amp = 0.1 + 0.15 * u(rng);
            p.dc_level = 0.5 + 0.8 * u(rng);
            p.noise_sigma = 0.01 + 0.015 * u(rng);
        }
        out.push_back(std::move(p));
    }
    return out;
}

}  // namespace ppgauth::signal
