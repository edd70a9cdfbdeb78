#include "ppgauth/store.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>

#include "ppgauth/binary_io.hpp"
#include "ppgauth/errors.hpp"
#include "ppgauth/net/data.hpp"

namespace ppgauth::store {

std::array<chaos01::PqParams, chaos01::kImageChannels> BiometricTemplate::params() const {
    if (c_values.size() != chaos01::kImageChannels)
        throw ShapeError("store", "template needs 3 c values, has " + std::to_string(c_values.size()));
    std::array<chaos01::PqParams, chaos01::kImageChannels> p{};
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = {c_values[i], 0.0};
    return p;
}

std::vector<std::uint8_t> encode_template(const BiometricTemplate& t) {
    if (t.subject_id.size() > 0xffff) throw ParameterError("store", "subject id too long");
    if (t.c_values.size() > 0xff) throw ParameterError("store", "too many channels");
    io::ByteWriter w;
    w.magic("PQT1");
    w.u16(kTemplateFormatVersion);
    w.u16(static_cast<std::uint16_t>(t.subject_id.size()));
    w.bytes(t.subject_id.data(), t.subject_id.size());
    w.u64(t.created_at);
    w.u8(static_cast<std::uint8_t>(t.mode));
    w.u8(static_cast<std::uint8_t>(t.c_values.size()));
    for (double c : t.c_values) w.f64(c);
    chaos01::encode_pqi(t.image, w);
    w.bytes(t.model_hash.data(), t.model_hash.size());
    return w.data();
}

BiometricTemplate decode_template(const std::vector<std::uint8_t>& bytes) {
    io::ByteReader r(bytes.data(), bytes.size(), "store");
    r.expect_magic("PQT1");
    const std::size_t version_at = r.offset();
    const auto version = r.u16("format version");
    if (version != kTemplateFormatVersion)
        throw FormatError("store", "unsupported template version " + std::to_string(version), version_at);
    BiometricTemplate t;
    t.subject_id = r.string(r.u16("id length"), "subject id");
    t.created_at = r.u64("created_at");
    const std::size_t mode_at = r.offset();
    const auto mode = r.u8("mode");
    if (mode > static_cast<std::uint8_t>(signal::PreprocessMode::Band05_8Norm))
        throw FormatError("store", "unknown preprocessing mode " + std::to_string(mode), mode_at);
    t.mode = static_cast<signal::PreprocessMode>(mode);
    const std::size_t count_at = r.offset();
    const auto channels = r.u8("channel count");
    t.c_values.resize(channels);
    for (auto& c : t.c_values) c = r.f64("c value");
    const std::size_t image_at = r.offset();
    t.image = chaos01::decode_pqi(r);
    if (t.image.channels != channels)
        throw FormatError("store", "image has " + std::to_string(t.image.channels) + " channels, header says " +
                                       std::to_string(channels), count_at);
    if (t.image.channels != chaos01::kImageChannels || t.image.width != chaos01::kImageSize ||
        t.image.height != chaos01::kImageSize)
        throw FormatError("store", "template image must be 299x299x3", image_at);
    t.image.provenance.subject_id = t.subject_id;
    for (std::size_t i = 0; i < chaos01::kImageChannels; ++i) {
        t.image.provenance.c_values[i] = t.c_values[i];
        t.image.provenance.segment_starts[i] = i * signal::kSegmentLength;
    }
    r.read(t.model_hash.data(), t.model_hash.size(), "model hash");
    if (r.remaining() != 0) r.fail("trailing bytes after template");
    return t;
}

void save_template(const BiometricTemplate& t, const std::filesystem::path& path) {
    io::write_file_atomic(path, encode_template(t), "store");
}

BiometricTemplate load_template(const std::filesystem::path& path) {
    return decode_template(io::read_file(path, "store"));
}

std::string percent_encode(const std::string& id) {
    static constexpr char kHex[] = "0123456789ABCDEF";
    std::string out;
    for (const unsigned char ch : id) {
        if (std::isalnum(ch) || ch == '-' || ch == '.' || ch == '_' || ch == '~') {
            out += static_cast<char>(ch);
        } else {
            out += '%';
            out += kHex[ch >> 4];
            out += kHex[ch & 15];
        }
    }
    return out;
}

chaos01::FeatureImage protocol_image(const signal::PpgRecord& record, signal::PreprocessMode mode,
                                     const std::array<chaos01::PqParams, chaos01::kImageChannels>& params) {
    signal::validate(record);
    if (record.size() < kProtocolSamples)
        throw InsufficientDataError("store", "record has " + std::to_string(record.size()) +
                                                 " samples, the protocol needs " + std::to_string(kProtocolSamples));
    signal::PpgRecord head{record.subject_id, record.sample_rate_hz,
                           {record.samples.begin(), record.samples.begin() + kProtocolSamples}};
    const auto segments = signal::segment(signal::preprocess(head, mode), signal::Consecutive{});
    return chaos01::featurize(segments, params);
}

TemplateStore::TemplateStore(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (ec || !std::filesystem::is_directory(dir_))
        throw ParameterError("store", "cannot use " + dir_.string() + " as a template directory");
}

std::filesystem::path TemplateStore::path_for(const std::string& subject_id) const {
    if (subject_id.empty()) throw ParameterError("store", "subject id must not be empty");
    return dir_ / (percent_encode(subject_id) + ".pqt");
}

bool TemplateStore::contains(const std::string& subject_id) const {
    return std::filesystem::exists(path_for(subject_id));
}

BiometricTemplate TemplateStore::load(const std::string& subject_id) const {
    const auto path = path_for(subject_id);
    if (!std::filesystem::exists(path)) throw NotEnrolledError("store", "subject '" + subject_id + "' is not enrolled");
    auto t = load_template(path);
    if (t.subject_id != subject_id)
        throw FormatError("store", path.filename().string() + " holds subject '" + t.subject_id + "'", 6);
    return t;
}

std::vector<BiometricTemplate> TemplateStore::load_all() const {
    std::vector<BiometricTemplate> out;
    for (const auto& entry : std::filesystem::directory_iterator(dir_))
        if (entry.is_regular_file() && entry.path().extension() == ".pqt") out.push_back(load_template(entry.path()));
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.subject_id < b.subject_id; });
    return out;
}

void TemplateStore::save(const BiometricTemplate& t, bool overwrite) {
    const auto path = path_for(t.subject_id);
    if (!overwrite && std::filesystem::exists(path))
        throw ConflictError("store", "subject '" + t.subject_id + "' is already enrolled");
    save_template(t, path);
}

BiometricTemplate enroll(TemplateStore& store, const std::string& subject_id, const signal::PpgRecord& record,
                         const net::SiameseModel& model, const EnrollOptions& options) {
    if (!options.overwrite && store.contains(subject_id))
        throw ConflictError("store", "subject '" + subject_id + "' is already enrolled");
    BiometricTemplate t;
    t.subject_id = subject_id;
    t.created_at = options.created_at.value_or(static_cast<std::uint64_t>(
        std::chrono::duration_cast<std::chrono::seconds>(std::chrono::system_clock::now().time_since_epoch())
            .count()));
    t.mode = options.mode;
    for (const auto& p : options.params) t.c_values.push_back(p.c);
    t.image = protocol_image(record, options.mode, options.params);
    t.image.provenance.subject_id = subject_id;
    t.model_hash = net::version_hash(model);
    store.save(t, options.overwrite);
    return t;
}

std::optional<double> stored_threshold(const net::SiameseModel& model) {
    const auto& m = model.metadata;
    if (m.is_object() && m.contains("eer_threshold") && m.at("eer_threshold").is_number())
        return m.at("eer_threshold").get<double>();
    return std::nullopt;
}

namespace {

void check_hash(const BiometricTemplate& t, const net::VersionHash& model_hash) {
    if (t.model_hash != model_hash)
        throw VersionError("store", "template of '" + t.subject_id + "' was enrolled with model " +
                                        net::to_hex(t.model_hash).substr(0, 12) + ", scoring model is " +
                                        net::to_hex(model_hash).substr(0, 12));
}

double score_pair(const net::SiameseModel& model, const chaos01::FeatureImage& a, const chaos01::FeatureImage& b) {
    const int hw = model.config().input_hw;
    std::vector<chaos01::FeatureImage> ia{a}, ib{b};
    return model.score(net::images_to_batch<float>(ia, hw), net::images_to_batch<float>(ib, hw))[0];
}

}  // namespace

VerifyResult verify(const TemplateStore& store, const std::string& claimed_id, const signal::PpgRecord& record,
                    const net::SiameseModel& model, std::optional<double> threshold) {
    const auto t = store.load(claimed_id);
    check_hash(t, net::version_hash(model));
    const double th = threshold ? *threshold : [&] {
        const auto s = stored_threshold(model);
        if (!s) throw ConfigError("store", "model carries no calibrated threshold; pass one explicitly");
        return *s;
    }();
    if (!std::isfinite(th)) throw ParameterError("store", "threshold must be finite");
    VerifyResult r;
    r.score = score_pair(model, t.image, protocol_image(record, t.mode, t.params()));
    r.threshold = th;
    r.decision = r.score >= th ? Decision::Accept : Decision::Reject;
    return r;
}

std::vector<std::pair<std::string, double>> identify(const TemplateStore& store, const signal::PpgRecord& record,
                                                     const net::SiameseModel& model) {
    const auto templates = store.load_all();
    if (templates.empty()) throw ParameterError("store", "no templates enrolled");
    const auto hash = net::version_hash(model);
    std::map<std::pair<int, std::vector<double>>, chaos01::FeatureImage> probes;
    std::vector<std::pair<std::string, double>> out;
    for (const auto& t : templates) {
        check_hash(t, hash);
        const auto key = std::make_pair(static_cast<int>(t.mode), t.c_values);
        auto it = probes.find(key);
        if (it == probes.end()) it = probes.emplace(key, protocol_image(record, t.mode, t.params())).first;
        out.emplace_back(t.subject_id, score_pair(model, t.image, it->second));
    }
    std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
        return a.second != b.second ? a.second > b.second : a.first < b.first;
    });
    return out;
}

}  // namespace ppgauth::store
