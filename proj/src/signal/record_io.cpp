#include <charconv>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "ppgauth/binary_io.hpp"
#include "ppgauth/errors.hpp"
#include "ppgauth/signal.hpp"

namespace ppgauth::signal {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

double parse_double(const std::string& text, std::size_t line) {
    double v = 0.0;
    const auto t = trim(text);
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || ptr != t.data() + t.size())
        throw FormatError("signal", "line " + std::to_string(line) + ": not a number: '" + t + "'", line);
    return v;
}

}  // namespace

void write_csv(const PpgRecord& record, const std::filesystem::path& path) {
    validate(record);
    std::ostringstream out;
    out << std::setprecision(std::numeric_limits<double>::max_digits10);
    out << "subject_id," << record.subject_id << '\n';
    out << "sample_rate_hz," << record.sample_rate_hz << '\n';
    for (double v : record.samples) out << v << '\n';
    io::write_text_atomic(path, out.str(), "signal");
}

PpgRecord read_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParameterError("signal", "cannot open " + path.string());
    PpgRecord rec;
    std::string line;
    std::size_t lineno = 0;
    auto header = [&](const char* key) {
        ++lineno;
        if (!std::getline(in, line)) throw FormatError("signal", "missing header line", lineno);
        const auto comma = line.find(',');
        if (comma == std::string::npos || trim(line.substr(0, comma)) != key)
            throw FormatError("signal", std::string("expected '") + key + ",<value>' header", lineno);
        return trim(line.substr(comma + 1));
    };
    rec.subject_id = header("subject_id");
    rec.sample_rate_hz = parse_double(header("sample_rate_hz"), lineno);
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        rec.samples.push_back(parse_double(line, lineno));
    }
    validate(rec);
    return rec;
}

void write_binary(const PpgRecord& record, const std::filesystem::path& path) {
    validate(record);
    if (record.size() > std::numeric_limits<std::uint32_t>::max())
        throw ParameterError("signal", "record too long for PPG1");
    io::ByteWriter w;
    w.magic("PPG1");
    w.u32(static_cast<std::uint32_t>(record.size()));
    for (double v : record.samples) w.f32(static_cast<float>(v));
    io::write_file_atomic(path, w.data(), "signal");
}

PpgRecord read_binary(const std::filesystem::path& path) {
    const auto bytes = io::read_file(path, "signal");
    io::ByteReader r(bytes.data(), bytes.size(), "signal");
    r.expect_magic("PPG1");
    const std::uint32_t count = r.u32("sample count");
    if (static_cast<std::uint64_t>(count) * 4 != r.remaining())
        r.fail("sample count " + std::to_string(count) + " does not match payload size");
    PpgRecord rec{path.stem().string(), kDefaultSampleRateHz, {}};
    rec.samples.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) rec.samples.push_back(r.f32("sample"));
    validate(rec);
    return rec;
}

PpgRecord read_record(const std::filesystem::path& path) {
    return path.extension() == ".csv" ? read_csv(path) : read_binary(path);
}

void write_record(const PpgRecord& record, const std::filesystem::path& path) {
    if (path.extension() == ".csv")
        write_csv(record, path);
    else
        write_binary(record, path);
}

}  // namespace ppgauth::signal
