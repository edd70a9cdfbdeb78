#include <algorithm>
#include <cmath>
#include <numbers>

#include "ppgauth/errors.hpp"
#include "ppgauth/signal.hpp"

namespace ppgauth::signal {

using cd = std::complex<double>;

void validate(const FilterSpec& spec, double sample_rate_hz) {
    const double nyquist = sample_rate_hz / 2.0;
    if (spec.order < 1) throw ParameterError("signal", "filter order must be >= 1");
    if (!(spec.low_cut_hz > 0.0)) throw ParameterError("signal", "low cutoff must be > 0");
    if (!(spec.low_cut_hz < spec.high_cut_hz))
        throw ParameterError("signal", "low cutoff must be below high cutoff");
    if (!(spec.high_cut_hz < nyquist))
        throw ParameterError("signal", "high cutoff must be below Nyquist (" +
                                           std::to_string(nyquist) + " Hz)");
}

SosFilter design_bandpass(const FilterSpec& spec, double sample_rate_hz) {
    validate(spec, sample_rate_hz);
    const int n = spec.order;
    const double fs2 = 2.0 * sample_rate_hz;
    const double w_lo = fs2 * std::tan(std::numbers::pi * spec.low_cut_hz / sample_rate_hz);
    const double w_hi = fs2 * std::tan(std::numbers::pi * spec.high_cut_hz / sample_rate_hz);
    const double w0_sq = w_lo * w_hi;
    const double bw = w_hi - w_lo;

    // Analog low-pass prototype poles, each mapped to two band-pass poles by
    // s -> (s^2 + w0^2) / (s * bw), then to z by the bilinear transform.
    std::vector<cd> upper;
    std::vector<double> real;
    for (int k = 1; k <= n; ++k) {
        const cd proto = std::polar(1.0, std::numbers::pi * (2.0 * k + n - 1) / (2.0 * n));
        const cd half = proto * bw / 2.0;
        const cd root = std::sqrt(half * half - w0_sq);
        for (const cd s : {half + root, half - root}) {
            const cd z = (1.0 + s / fs2) / (1.0 - s / fs2);
            if (std::abs(z.imag()) < 1e-12)
                real.push_back(z.real());
            else if (z.imag() > 0.0)
                upper.push_back(z);
        }
    }
    std::sort(real.begin(), real.end());

    // Every section gets one zero at z = 1 and one at z = -1.
    SosFilter sos;
    for (const cd& z : upper)
        sos.push_back({{1.0, 0.0, -1.0}, {-2.0 * z.real(), std::norm(z)}});
    for (std::size_t i = 0; i + 1 < real.size(); i += 2)
        sos.push_back({{1.0, 0.0, -1.0}, {-(real[i] + real[i + 1]), real[i] * real[i + 1]}});
    if (sos.size() != static_cast<std::size_t>(n))
        throw ParameterError("signal", "band-pass design produced an unexpected pole layout");

    const double centre_hz = sample_rate_hz / std::numbers::pi * std::atan(std::sqrt(w0_sq) / fs2);
    const double gain = 1.0 / std::abs(frequency_response(sos, centre_hz, sample_rate_hz));
    for (double& b : sos.front().b) b *= gain;
    return sos;
}

std::complex<double> frequency_response(const SosFilter& sos, double freq_hz, double sample_rate_hz) {
    const cd zi = std::polar(1.0, -2.0 * std::numbers::pi * freq_hz / sample_rate_hz);
    const cd zi2 = zi * zi;
    cd h = 1.0;
    for (const auto& s : sos)
        h *= (s.b[0] + s.b[1] * zi + s.b[2] * zi2) / (1.0 + s.a[0] * zi + s.a[1] * zi2);
    return h;
}

std::vector<double> sosfilt(const SosFilter& sos, std::span<const double> x,
                            std::vector<std::array<double, 2>>& state) {
    state.resize(sos.size(), {0.0, 0.0});
    std::vector<double> y(x.begin(), x.end());
    for (std::size_t s = 0; s < sos.size(); ++s) {
        const auto& [b, a] = sos[s];
        auto& [z1, z2] = state[s];
        for (double& v : y) {
            const double in = v;
            const double out = b[0] * in + z1;
            z1 = b[1] * in - a[0] * out + z2;
            z2 = b[2] * in - a[1] * out;
            v = out;
        }
    }
    return y;
}

namespace {

// Per-section delay values for which a unit step input is already in steady
// state, scaled by the DC gain of the preceding sections.
std::vector<std::array<double, 2>> step_initial_state(const SosFilter& sos) {
    std::vector<std::array<double, 2>> zi(sos.size());
    double scale = 1.0;
    for (std::size_t s = 0; s < sos.size(); ++s) {
        const auto& [b, a] = sos[s];
        const double dc = (b[0] + b[1] + b[2]) / (1.0 + a[0] + a[1]);
        const double z2 = b[2] - a[1] * dc;
        const double z1 = b[1] - a[0] * dc + z2;
        zi[s] = {scale * z1, scale * z2};
        scale *= dc;
    }
    return zi;
}

}  // namespace

std::vector<double> sosfiltfilt(const SosFilter& sos, std::span<const double> x) {
    const std::size_t n = x.size();
    if (n == 0) return {};
    std::size_t zero_b2 = 0, zero_a2 = 0;
    for (const auto& s : sos) {
        zero_b2 += s.b[2] == 0.0;
        zero_a2 += s.a[1] == 0.0;
    }
    const std::size_t taps = 2 * sos.size() + 1 - std::min(zero_b2, zero_a2);
    const std::size_t pad = std::min(3 * taps, n - 1);

    std::vector<double> ext;
    ext.reserve(n + 2 * pad);
    for (std::size_t i = pad; i >= 1; --i) ext.push_back(2.0 * x[0] - x[i]);
    ext.insert(ext.end(), x.begin(), x.end());
    for (std::size_t i = 1; i <= pad; ++i) ext.push_back(2.0 * x[n - 1] - x[n - 1 - i]);

    const auto zi = step_initial_state(sos);
    auto scaled = [&](double v) {
        auto st = zi;
        for (auto& s : st) s = {s[0] * v, s[1] * v};
        return st;
    };

    auto state = scaled(ext.front());
    auto y = sosfilt(sos, ext, state);
    std::reverse(y.begin(), y.end());
    state = scaled(y.front());
    y = sosfilt(sos, y, state);
    std::reverse(y.begin(), y.end());
    return {y.begin() + static_cast<std::ptrdiff_t>(pad),
            y.begin() + static_cast<std::ptrdiff_t>(pad + n)};
}

PpgRecord bandpass(const PpgRecord& record, const FilterSpec& spec) {
    validate(record);
    const auto sos = design_bandpass(spec, record.sample_rate_hz);
    return PpgRecord{record.subject_id, record.sample_rate_hz, sosfiltfilt(sos, record.samples)};
}

}  // namespace ppgauth::signal
