#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "ppgauth/errors.hpp"

namespace ppgauth::io {

static_assert(std::endian::native == std::endian::little,
              "binary formats are little-endian; big-endian hosts need byte swapping");

/// Append-only little-endian byte sink.
class ByteWriter {
public:
    void bytes(const void* data, std::size_t n) {
        const auto* p = static_cast<const std::uint8_t*>(data);
        buf_.insert(buf_.end(), p, p + n);
    }
    void magic(std::string_view m) { bytes(m.data(), m.size()); }
    void u8(std::uint8_t v) { buf_.push_back(v); }
    void u16(std::uint16_t v) { bytes(&v, sizeof v); }
    void u32(std::uint32_t v) { bytes(&v, sizeof v); }
    void u64(std::uint64_t v) { bytes(&v, sizeof v); }
    void f32(float v) { bytes(&v, sizeof v); }
    void f64(double v) { bytes(&v, sizeof v); }

    const std::vector<std::uint8_t>& data() const { return buf_; }
    std::vector<std::uint8_t>& data() { return buf_; }

private:
    std::vector<std::uint8_t> buf_;
};

/// Bounds-checked little-endian reader; every failure reports its byte offset.
class ByteReader {
public:
    ByteReader(const std::uint8_t* data, std::size_t size, std::string module)
        : data_(data), size_(size), module_(std::move(module)) {}

    std::size_t offset() const { return pos_; }
    std::size_t remaining() const { return size_ - pos_; }

    void expect_magic(std::string_view m) {
        need(m.size(), "magic");
        if (std::memcmp(data_ + pos_, m.data(), m.size()) != 0)
            throw FormatError(module_, "bad magic, expected '" + std::string(m) + "'", pos_);
        pos_ += m.size();
    }
    void read(void* out, std::size_t n, const char* what) {
        need(n, what);
        std::memcpy(out, data_ + pos_, n);
        pos_ += n;
    }
    std::uint8_t u8(const char* what = "u8") { return scalar<std::uint8_t>(what); }
    std::uint16_t u16(const char* what = "u16") { return scalar<std::uint16_t>(what); }
    std::uint32_t u32(const char* what = "u32") { return scalar<std::uint32_t>(what); }
    std::uint64_t u64(const char* what = "u64") { return scalar<std::uint64_t>(what); }
    float f32(const char* what = "f32") { return scalar<float>(what); }
    double f64(const char* what = "f64") { return scalar<double>(what); }
    std::string string(std::size_t n, const char* what) {
        need(n, what);
        std::string s(reinterpret_cast<const char*>(data_ + pos_), n);
        pos_ += n;
        return s;
    }
    [[noreturn]] void fail(const std::string& what) const { throw FormatError(module_, what, pos_); }

private:
    template <class T>
    T scalar(const char* what) {
        T v;
        read(&v, sizeof v, what);
        return v;
    }
    void need(std::size_t n, const char* what) const {
        if (n > size_ - pos_)
            throw FormatError(module_, std::string("truncated while reading ") + what, pos_);
    }

    const std::uint8_t* data_;
    std::size_t size_;
    std::size_t pos_ = 0;
    std::string module_;
};

std::vector<std::uint8_t> read_file(const std::filesystem::path& path, const std::string& module);

/// Writes to a sibling temporary file and renames it into place.
void write_file_atomic(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes,
                       const std::string& module);
void write_text_atomic(const std::filesystem::path& path, std::string_view text,
                       const std::string& module);

}  // namespace ppgauth::io
