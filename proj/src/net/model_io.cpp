#include "ppgauth/net/model_io.hpp"

#include <openssl/evp.h>

#include <memory>

#include "ppgauth/binary_io.hpp"

namespace ppgauth::net {

namespace {

void encode_records(const SiameseModel& model, io::ByteWriter& w) {
    for (const Param<float>* p : model.params()) {
        w.u16(static_cast<std::uint16_t>(p->name.size()));
        w.bytes(p->name.data(), p->name.size());
        w.u8(static_cast<std::uint8_t>(p->value.shape.size()));
        for (int d : p->value.shape) w.u32(static_cast<std::uint32_t>(d));
        w.bytes(p->value.data(), p->value.size() * sizeof(float));
    }
}

VersionHash sha256(const std::string& config, const std::vector<std::uint8_t>& records) {
    std::unique_ptr<EVP_MD_CTX, void (*)(EVP_MD_CTX*)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
    VersionHash out{};
    unsigned int len = 0;
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
        EVP_DigestUpdate(ctx.get(), config.data(), config.size()) != 1 ||
        EVP_DigestUpdate(ctx.get(), records.data(), records.size()) != 1 ||
        EVP_DigestFinal_ex(ctx.get(), out.data(), &len) != 1 || len != out.size())
        throw Error("net", "SHA-256 computation failed");
    return out;
}

}  // namespace

VersionHash version_hash(const SiameseModel& model) {
    io::ByteWriter w;
    encode_records(model, w);
    return sha256(to_json(model.config()).dump(), w.data());
}

std::string to_hex(const VersionHash& hash) {
    static constexpr char kDigits[] = "0123456789abcdef";
    std::string s;
    for (auto b : hash) {
        s += kDigits[b >> 4];
        s += kDigits[b & 15];
    }
    return s;
}

std::vector<std::uint8_t> encode_model(const SiameseModel& model) {
    io::ByteWriter w;
    w.magic("SNM1");
    w.u16(kModelFormatVersion);
    const std::string header = nlohmann::json{{"config", to_json(model.config())}, {"metadata", model.metadata}}.dump();
    w.u32(static_cast<std::uint32_t>(header.size()));
    w.bytes(header.data(), header.size());
    const auto params = model.params();
    w.u32(static_cast<std::uint32_t>(params.size()));
    io::ByteWriter records;
    encode_records(model, records);
    w.bytes(records.data().data(), records.data().size());
    const auto hash = sha256(to_json(model.config()).dump(), records.data());
    w.bytes(hash.data(), hash.size());
    return w.data();
}

SiameseModel decode_model(const std::vector<std::uint8_t>& bytes) {
    io::ByteReader r(bytes.data(), bytes.size(), "net");
    r.expect_magic("SNM1");
    const std::size_t version_at = r.offset();
    const auto version = r.u16("format version");
    if (version != kModelFormatVersion)
        throw FormatError("net", "unsupported model format version " + std::to_string(version), version_at);
    const auto header_len = r.u32("header length");
    const std::size_t header_at = r.offset();
    const auto header_text = r.string(header_len, "header");
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(header_text);
    } catch (const nlohmann::json::exception&) {
        throw FormatError("net", "model header is not valid JSON", header_at);
    }
    if (!header.is_object() || !header.contains("config"))
        throw FormatError("net", "model header lacks a config", header_at);
    ModelConfig config;
    try {
        config = model_config_from_json(header.at("config"));
    } catch (const ConfigError& e) {
        throw FormatError("net", std::string("model header: ") + e.what(), header_at);
    }
    SiameseModel model(config);
    model.metadata = header.value("metadata", nlohmann::json::object());

    const auto params = model.params();
    const std::size_t count_at = r.offset();
    const auto count = r.u32("record count");
    if (count != params.size())
        throw FormatError("net", "model has " + std::to_string(count) + " records, config implies " +
                                     std::to_string(params.size()), count_at);
    const std::size_t records_at = r.offset();
    for (Param<float>* p : params) {
        const std::size_t at = r.offset();
        const auto name = r.string(r.u16("name length"), "record name");
        if (name != p->name) throw FormatError("net", "expected record '" + p->name + "', found '" + name + "'", at);
        const auto rank = r.u8("rank");
        std::vector<int> shape(rank);
        for (auto& d : shape) d = static_cast<int>(r.u32("dimension"));
        if (shape != p->value.shape)
            throw FormatError("net", "record '" + name + "' has shape " + shape_string(shape) + ", expected " +
                                         shape_string(p->value.shape), at);
        r.read(p->value.data(), p->value.size() * sizeof(float), "record data");
    }
    const std::vector<std::uint8_t> records(bytes.begin() + static_cast<std::ptrdiff_t>(records_at),
                                            bytes.begin() + static_cast<std::ptrdiff_t>(r.offset()));
    const std::size_t hash_at = r.offset();
    VersionHash stored{};
    r.read(stored.data(), stored.size(), "version hash");
    if (r.remaining() != 0) r.fail("trailing bytes after version hash");
    if (stored != sha256(to_json(config).dump(), records))
        throw FormatError("net", "version hash does not match the model content", hash_at);
    return model;
}

void save_model(const SiameseModel& model, const std::filesystem::path& path) {
    io::write_file_atomic(path, encode_model(model), "net");
}

SiameseModel load_model(const std::filesystem::path& path) {
    return decode_model(io::read_file(path, "net"));
}

}  // namespace ppgauth::net
