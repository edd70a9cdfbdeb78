#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "ppgauth/net/model.hpp"

namespace ppgauth::net {

using VersionHash = std::array<std::uint8_t, 32>;

inline constexpr std::uint16_t kModelFormatVersion = 1;

/// SHA-256 over the canonical config JSON followed by every weight record in
/// its on-disk encoding. Metadata does not enter the digest, so re-labelling
/// a model (e.g. storing a new threshold) keeps its version.
VersionHash version_hash(const SiameseModel& model);

std::string to_hex(const VersionHash& hash);

/// `SNM1`, u16 version, u32 length + JSON {config, metadata}, u32 record
/// count, records (u16 name length, name, u8 rank, u32 dims, f32 data), then
/// the 32-byte version hash.
std::vector<std::uint8_t> encode_model(const SiameseModel& model);
SiameseModel decode_model(const std::vector<std::uint8_t>& bytes);

void save_model(const SiameseModel& model, const std::filesystem::path& path);
/// Throws FormatError on corrupt or truncated files, including a digest that
/// does not match the content.
SiameseModel load_model(const std::filesystem::path& path);

}  // namespace ppgauth::net
