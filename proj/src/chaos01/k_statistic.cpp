#include <algorithm>
#include <cmath>
#include <numeric>

#include "ppgauth/chaos01.hpp"
#include "ppgauth/errors.hpp"

namespace ppgauth::chaos01 {

namespace {

double pearson(std::span<const double> x, std::span<const double> y) {
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - mx, dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (!(sxx > 0.0) || !(syy > 0.0)) return 0.0;
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double k_for(std::span<const double> s, double c, double mean) {
    const auto traj = translation_vars(s, {c, 0.0});
    const std::size_t n_total = s.size();
    const std::size_t n_cut = n_total / 10;
    std::vector<double> lags(n_cut), disp(n_cut);
    const double osc_den = 1.0 - std::cos(c);
    for (std::size_t n = 1; n <= n_cut; ++n) {
        double acc = 0.0;
        const std::size_t terms = n_total - n;
        for (std::size_t j = 0; j < terms; ++j) {
            const double dp = traj.p[j + n] - traj.p[j];
            const double dq = traj.q[j + n] - traj.q[j];
            acc += dp * dp + dq * dq;
        }
        double d = acc / static_cast<double>(terms);
        if (osc_den > 0.0) d -= mean * mean * (1.0 - std::cos(static_cast<double>(n) * c)) / osc_den;
        lags[n - 1] = static_cast<double>(n);
        disp[n - 1] = d;
    }
    return pearson(lags, disp);
}

}  // namespace

KResult compute_k(std::span<const double> s, std::span<const double> c_values) {
    if (s.size() < 1000)
        throw InsufficientDataError("chaos01", "K statistic needs at least 1000 samples, got " +
                                                   std::to_string(s.size()));
    if (c_values.empty()) throw ParameterError("chaos01", "K statistic needs at least one c value");
    for (double v : s)
        if (!std::isfinite(v)) throw ParameterError("chaos01", "series contains NaN or Inf");

    const double mean = std::accumulate(s.begin(), s.end(), 0.0) / static_cast<double>(s.size());
    KResult out;
    out.c_values.assign(c_values.begin(), c_values.end());
    out.k_values.reserve(c_values.size());
    for (double c : c_values) out.k_values.push_back(k_for(s, c, mean));

    auto sorted = out.k_values;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t m = sorted.size();
    out.k_median = m % 2 ? sorted[m / 2] : 0.5 * (sorted[m / 2 - 1] + sorted[m / 2]);
    return out;
}

}  // namespace ppgauth::chaos01
