#include "maeanom/archive.hpp"

#include <bit>
#include <cstdint>
#include <fstream>

namespace maeanom {

static_assert(std::endian::native == std::endian::little, "archive I/O assumes a little-endian host");

namespace {

constexpr char kMagic[] = "MAEANOM-ARCHIVE\n";
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::ofstream& out, T value) {
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

void put_string(std::ofstream& out, const std::string& s) {
    put<std::uint64_t>(out, s.size());
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

template <typename T>
T take(std::ifstream& in, const std::filesystem::path& path) {
    T value{};
    if (!in.read(reinterpret_cast<char*>(&value), sizeof(T))) throw FormatError("truncated archive: " + path.string());
    return value;
}

std::string take_string(std::ifstream& in, const std::filesystem::path& path) {
    const auto len = take<std::uint64_t>(in, path);
    if (len > (1ULL << 32)) throw FormatError("corrupt string length in " + path.string());
    std::string s(len, '\0');
    if (!in.read(s.data(), static_cast<std::streamsize>(len))) throw FormatError("truncated archive: " + path.string());
    return s;
}

}  // namespace

const Matrix& Archive::array(const std::string& name) const {
    for (const auto& [key, value] : arrays) {
        if (key == name) return value;
    }
    throw FormatError("archive has no array named '" + name + "'");
}

bool Archive::has_array(const std::string& name) const {
    for (const auto& entry : arrays) {
        if (entry.first == name) return true;
    }
    return false;
}

const std::string& Archive::get(const std::string& key) const {
    auto it = meta.find(key);
    if (it == meta.end()) throw FormatError("archive has no metadata key '" + key + "'");
    return it->second;
}

void Archive::save(const std::filesystem::path& path) const {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    // Write to a sibling then rename so an interrupted save never leaves a
    // truncated checkpoint behind.
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write " + tmp.string());
        out.write(kMagic, sizeof(kMagic) - 1);
        put<std::uint32_t>(out, kVersion);
        put<std::uint64_t>(out, meta.size());
        for (const auto& [key, value] : meta) {
            put_string(out, key);
            put_string(out, value);
        }
        put<std::uint64_t>(out, arrays.size());
        for (const auto& [name, m] : arrays) {
            put_string(out, name);
            put<std::int64_t>(out, m.rows());
            put<std::int64_t>(out, m.cols());
            out.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)));
        }
        if (!out) throw IoError("write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

Archive Archive::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open archive " + path.string());
    std::string magic(sizeof(kMagic) - 1, '\0');
    if (!in.read(magic.data(), static_cast<std::streamsize>(magic.size())) || magic != kMagic) {
        throw FormatError(path.string() + " is not an archive");
    }
    if (const auto version = take<std::uint32_t>(in, path); version != kVersion) {
        throw FormatError("unsupported archive version " + std::to_string(version));
    }
    Archive a;
    const auto n_meta = take<std::uint64_t>(in, path);
    for (std::uint64_t i = 0; i < n_meta; ++i) {
        auto key = take_string(in, path);
        a.meta[key] = take_string(in, path);
    }
    const auto n_arrays = take<std::uint64_t>(in, path);
    for (std::uint64_t i = 0; i < n_arrays; ++i) {
        auto name = take_string(in, path);
        const auto rows = take<std::int64_t>(in, path);
        const auto cols = take<std::int64_t>(in, path);
        if (rows < 0 || cols < 0 || rows * cols > (1LL << 31)) throw FormatError("corrupt array shape in " + path.string());
        Matrix m(rows, cols);
        if (!in.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)))) {
            throw FormatError("truncated archive: " + path.string());
        }
        a.arrays.emplace_back(std::move(name), std::move(m));
    }
    return a;
}

}  // namespace maeanom
