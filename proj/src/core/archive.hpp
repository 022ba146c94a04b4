#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "core/common.hpp"

namespace meev {

// Container of named numeric arrays, used for model assets and checkpoints.
// On-disk layout (little-endian):
//   magic "MEEVARCH" | u32 version | u64 entry count | entries
//   entry: u32 name length | name | u8 dtype | u32 ndim | u64 dims[] | payload
// dtype: 0 = f64, 1 = i64, 2 = raw bytes.
class Archive {
 public:
  struct Entry {
    std::uint8_t dtype = 0;
    std::vector<std::uint64_t> dims;
    std::vector<char> raw;
    std::size_t numel() const;
  };

  static constexpr std::uint32_t kFormatVersion = 1;

  void put_f64(const std::string& name, std::vector<std::uint64_t> dims,
               const std::vector<double>& data);
  void put_i64(const std::string& name, std::vector<std::uint64_t> dims,
               const std::vector<std::int64_t>& data);
  void put_bytes(const std::string& name, const std::string& data);

  bool contains(const std::string& name) const;
  std::vector<std::string> names() const;

  const Entry& entry(const std::string& name) const;
  std::vector<double> f64(const std::string& name) const;
  std::vector<std::int64_t> i64(const std::string& name) const;
  std::string bytes(const std::string& name) const;
  std::vector<std::uint64_t> dims(const std::string& name) const;

  // write-then-rename so readers never observe a partial file
  void save(const std::string& path) const;
  static Archive load(const std::string& path);

 private:
  std::map<std::string, Entry> entries_;
};

}  // namespace meev
