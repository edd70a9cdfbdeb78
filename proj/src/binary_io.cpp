#include "ppgauth/binary_io.hpp"

#include <fstream>
#include <iterator>
#include <system_error>

namespace ppgauth::io {

std::vector<std::uint8_t> read_file(const std::filesystem::path& path, const std::string& module) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParameterError(module, "cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_atomic(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes,
                       const std::string& module) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw ParameterError(module, "cannot write " + tmp.string());
        out.write(reinterpret_cast<const char*>(bytes.data()),
                  static_cast<std::streamsize>(bytes.size()));
        if (!out) throw ParameterError(module, "short write to " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp, ec);
        throw ParameterError(module, "cannot rename into " + path.string());
    }
}

void write_text_atomic(const std::filesystem::path& path, std::string_view text,
                       const std::string& module) {
    write_file_atomic(path, std::vector<std::uint8_t>(text.begin(), text.end()), module);
}

}  // namespace ppgauth::io
