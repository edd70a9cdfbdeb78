#pragma once

// Enrollment, verification and identification over persisted templates.

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ppgauth/chaos01.hpp"
#include "ppgauth/net/model_io.hpp"
#include "ppgauth/signal.hpp"

namespace ppgauth::store {

inline constexpr std::uint16_t kTemplateFormatVersion = 1;
/// Three consecutive 1000-point segments.
inline constexpr std::size_t kProtocolSamples = 3 * signal::kSegmentLength;

struct BiometricTemplate {
    std::string subject_id;
    std::uint64_t created_at = 0;  // UTC seconds
    signal::PreprocessMode mode = signal::PreprocessMode::Band05_8Norm;
    std::vector<double> c_values;  // one per channel
    chaos01::FeatureImage image;
    net::VersionHash model_hash{};

    std::array<chaos01::PqParams, chaos01::kImageChannels> params() const;

    /// Field-wise equality; image provenance is not persisted and is ignored.
    friend bool operator==(const BiometricTemplate& a, const BiometricTemplate& b) {
        return a.subject_id == b.subject_id && a.created_at == b.created_at && a.mode == b.mode &&
               a.c_values == b.c_values && a.image.same_pixels(b.image) && a.model_hash == b.model_hash;
    }
};

/// `PQT1`, u16 version, u16-length id, u64 created_at, u8 mode, u8 channel
/// count, f64 c per channel, `PQI1` image, 32-byte model hash.
std::vector<std::uint8_t> encode_template(const BiometricTemplate& t);
/// Throws FormatError with the byte offset on any malformed input.
BiometricTemplate decode_template(const std::vector<std::uint8_t>& bytes);

void save_template(const BiometricTemplate& t, const std::filesystem::path& path);
BiometricTemplate load_template(const std::filesystem::path& path);

/// RFC 3986 unreserved characters pass through, every other byte becomes %XX.
std::string percent_encode(const std::string& id);

/// The protocol image: preprocess the first 12 s (3000 samples), cut three
/// consecutive segments, featurize. Throws InsufficientDataError for shorter
/// records.
chaos01::FeatureImage protocol_image(const signal::PpgRecord& record, signal::PreprocessMode mode,
                                     const std::array<chaos01::PqParams, chaos01::kImageChannels>& params);

/// One `<percent-encoded id>.pqt` file per subject under a directory.
class TemplateStore {
public:
    explicit TemplateStore(std::filesystem::path dir);

    const std::filesystem::path& dir() const { return dir_; }
    std::filesystem::path path_for(const std::string& subject_id) const;
    bool contains(const std::string& subject_id) const;
    /// Throws NotEnrolledError for unknown subjects.
    BiometricTemplate load(const std::string& subject_id) const;
    /// Every template, ordered by subject id.
    std::vector<BiometricTemplate> load_all() const;
    /// Atomic per file. Throws ConflictError if the subject exists and
    /// `overwrite` is false.
    void save(const BiometricTemplate& t, bool overwrite = false);

private:
    std::filesystem::path dir_;
};

struct EnrollOptions {
    signal::PreprocessMode mode = signal::PreprocessMode::Band05_8Norm;
    std::array<chaos01::PqParams, chaos01::kImageChannels> params = chaos01::channel_params({});
    bool overwrite = false;
    /// Defaults to the current time.
    std::optional<std::uint64_t> created_at;
};

BiometricTemplate enroll(TemplateStore& store, const std::string& subject_id, const signal::PpgRecord& record,
                         const net::SiameseModel& model, const EnrollOptions& options = {});

enum class Decision : std::uint8_t { Accept, Reject };

struct VerifyResult {
    double score = 0.0;
    double threshold = 0.0;
    Decision decision = Decision::Reject;
};

/// The threshold a model was calibrated with, from its metadata.
std::optional<double> stored_threshold(const net::SiameseModel& model);

/// The probe is featurized with the template's own mode and c values. Without
/// an explicit threshold the model's stored one is used (ConfigError when it
/// has none). Throws NotEnrolledError or VersionError.
VerifyResult verify(const TemplateStore& store, const std::string& claimed_id, const signal::PpgRecord& record,
                    const net::SiameseModel& model, std::optional<double> threshold = std::nullopt);

/// Scores against every template, descending, ties broken by subject id.
std::vector<std::pair<std::string, double>> identify(const TemplateStore& store, const signal::PpgRecord& record,
                                                     const net::SiameseModel& model);

}  // namespace ppgauth::store
