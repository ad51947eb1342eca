#pragma once

// Self-describing binary archive: string metadata plus named double arrays.
// Layout (little-endian):
//   "MAEANOM-ARCHIVE\n" u32 version
//   u64 n_meta  { u64 len, key bytes, u64 len, value bytes } * n_meta
//   u64 n_array { u64 len, name bytes, i64 rows, i64 cols, f64[rows*cols] } * n_array
// Metadata is written in key order and arrays in insertion order, so
// load -> save reproduces the input byte for byte.

#include "maeanom/types.hpp"

#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace maeanom {

struct Archive {
    std::map<std::string, std::string> meta;
    std::vector<std::pair<std::string, Matrix>> arrays;

    const Matrix& array(const std::string& name) const;
    bool has_array(const std::string& name) const;
    const std::string& get(const std::string& key) const;

    void save(const std::filesystem::path& path) const;
    static Archive load(const std::filesystem::path& path);
};

}  // namespace maeanom
