#include <algorithm>
#include <cmath>
#include <random>

#include "ppgauth/errors.hpp"
#include "ppgauth/signal.hpp"

namespace ppgauth::signal {

void validate(const PpgRecord& record) {
    if (!(record.sample_rate_hz > 0.0)) throw ParameterError("signal", "sample_rate_hz must be > 0");
    if (record.samples.empty()) throw InsufficientDataError("signal", "record has no samples");
    for (double v : record.samples)
        if (!std::isfinite(v)) throw ParameterError("signal", "record contains NaN or Inf");
}

PpgRecord normalize01(const PpgRecord& record) {
    validate(record);
    const auto [lo, hi] = std::minmax_element(record.samples.begin(), record.samples.end());
    const double min = *lo, range = *hi - *lo;
    if (!(range > 0.0)) throw DegenerateRangeError("signal", "cannot normalise a constant signal");
    PpgRecord out{record.subject_id, record.sample_rate_hz, {}};
    out.samples.reserve(record.size());
    for (double v : record.samples) out.samples.push_back((v - min) / range);
    return out;
}

std::string_view to_string(PreprocessMode mode) {
    switch (mode) {
        case PreprocessMode::Raw: return "raw";
        case PreprocessMode::Band01_8: return "band01_8";
        case PreprocessMode::Band05_8: return "band05_8";
        case PreprocessMode::Band05_8Norm: return "band05_8_norm";
    }
    return "unknown";
}

PreprocessMode parse_preprocess_mode(std::string_view text) {
    for (auto m : {PreprocessMode::Raw, PreprocessMode::Band01_8, PreprocessMode::Band05_8,
                   PreprocessMode::Band05_8Norm})
        if (text == to_string(m)) return m;
    throw ParameterError("signal", "unknown preprocess mode '" + std::string(text) +
                                       "' (raw|band01_8|band05_8|band05_8_norm)");
}

PpgRecord preprocess(const PpgRecord& record, PreprocessMode mode) {
    validate(record);
    switch (mode) {
        case PreprocessMode::Raw: return record;
        case PreprocessMode::Band01_8: return bandpass(record, {0.1, 8.0, 4});
        case PreprocessMode::Band05_8: return bandpass(record, {0.5, 8.0, 4});
        case PreprocessMode::Band05_8Norm: return normalize01(bandpass(record, {0.5, 8.0, 4}));
    }
    throw ParameterError("signal", "invalid preprocess mode");
}

std::vector<Segment> segment(const PpgRecord& record, const SegmentStrategy& strategy) {
    validate(record);
    const std::size_t n = record.size();
    if (n < kSegmentLength)
        throw InsufficientDataError("signal", "record has " + std::to_string(n) +
                                                  " samples, a segment needs " +
                                                  std::to_string(kSegmentLength));
    std::vector<std::size_t> starts;
    if (std::holds_alternative<Consecutive>(strategy)) {
        for (std::size_t s = 0; s + kSegmentLength <= n; s += kSegmentLength) starts.push_back(s);
    } else {
        const auto& rs = std::get<RandomStarts>(strategy);
        std::mt19937_64 rng(rs.seed);
        std::uniform_int_distribution<std::size_t> pick(0, n - kSegmentLength);
        for (std::size_t i = 0; i < rs.count; ++i) starts.push_back(pick(rng));
    }
    std::vector<Segment> out;
    out.reserve(starts.size());
    for (std::size_t s : starts) {
        const auto first = record.samples.begin() + static_cast<std::ptrdiff_t>(s);
        out.push_back({record.subject_id, s,
                       std::vector<double>(first, first + static_cast<std::ptrdiff_t>(kSegmentLength))});
    }
    return out;
}

}  // namespace ppgauth::signal
