#include <cmath>
#include <numbers>

#include "ppgauth/chaos01.hpp"
#include "ppgauth/errors.hpp"

namespace ppgauth::chaos01 {

void validate(const PqParams& params) {
    if (!(params.c >= 0.0 && params.c < 2.0 * std::numbers::pi))
        throw ParameterError("chaos01", "c must lie in [0, 2pi)");
    if (!std::isfinite(params.alpha)) throw ParameterError("chaos01", "alpha must be finite");
}

namespace {

void check_input(std::span<const double> s, const PqParams& params) {
    validate(params);
    if (s.empty()) throw InsufficientDataError("chaos01", "translation variables need a non-empty series");
}

PqTrajectory allocate(std::size_t n, const PqParams& params) {
    PqTrajectory t;
    t.p.resize(n);
    t.q.resize(n);
    t.phi.resize(n);
    t.params = params;
    return t;
}

}  // namespace

PqTrajectory translation_vars_iterated(std::span<const double> s, const PqParams& params) {
    check_input(s, params);
    auto t = allocate(s.size(), params);
    double p = 0.0, q = 0.0;
    double phi = 0.0, carry = 0.0;  // Kahan-compensated phase
    double prev = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        const double step = params.c + params.alpha * prev - carry;
        const double next = phi + step;
        carry = (next - phi) - step;
        phi = next;
        p += s[i] * std::cos(phi);
        q += s[i] * std::sin(phi);
        t.p[i] = p;
        t.q[i] = q;
        t.phi[i] = phi;
        prev = s[i];
    }
    return t;
}

PqTrajectory translation_vars(std::span<const double> s, const PqParams& params) {
    if (params.alpha != 0.0) return translation_vars_iterated(s, params);
    check_input(s, params);
    auto t = allocate(s.size(), params);
    double p = 0.0, q = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        const double phi = static_cast<double>(i + 1) * params.c;
        p += s[i] * std::cos(phi);
        q += s[i] * std::sin(phi);
        t.p[i] = p;
        t.q[i] = q;
        t.phi[i] = phi;
    }
    return t;
}

double default_c(int channel_index, const CSchedule& schedule) {
    if (channel_index < 0) throw ParameterError("chaos01", "channel index must be >= 0");
    if (schedule.kind == CSchedule::Kind::Fixed) return schedule.fixed_c;
    if (schedule.channels < 1) throw ParameterError("chaos01", "sweep needs at least one channel");
    const double lo = std::numbers::pi / 5.0, hi = 4.0 * std::numbers::pi / 5.0;
    const int slot = channel_index % schedule.channels;
    return lo + (hi - lo) * (slot + 1) / (schedule.channels + 1);
}

std::array<PqParams, kImageChannels> channel_params(const CSchedule& schedule) {
    std::array<PqParams, kImageChannels> out;
    for (int i = 0; i < kImageChannels; ++i) {
        out[static_cast<std::size_t>(i)].c = default_c(i, schedule);
        validate(out[static_cast<std::size_t>(i)]);
    }
    return out;
}

std::vector<double> c_grid(std::size_t count) {
    const double lo = std::numbers::pi / 5.0, hi = 4.0 * std::numbers::pi / 5.0;
    std::vector<double> out;
    out.reserve(count);
    for (std::size_t j = 0; j < count; ++j)
        out.push_back(count == 1 ? (lo + hi) / 2.0
                                 : lo + (hi - lo) * static_cast<double>(j) / static_cast<double>(count - 1));
    return out;
}

}  // namespace ppgauth::chaos01
