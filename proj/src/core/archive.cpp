#include "core/archive.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>

namespace meev {

namespace {

constexpr char kMagic[8] = {'M', 'E', 'E', 'V', 'A', 'R', 'C', 'H'};

template <typename T>
void write_pod(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is, const std::string& path) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  check(is.good(), Status::data_error, "truncated archive: ", path);
  return v;
}

std::size_t dims_numel(const std::vector<std::uint64_t>& dims) {
  std::size_t n = 1;
  for (auto d : dims) n *= static_cast<std::size_t>(d);
  return n;
}

}  // namespace

std::size_t Archive::Entry::numel() const { return dims_numel(dims); }

void Archive::put_f64(const std::string& name,
                      std::vector<std::uint64_t> dims,
                      const std::vector<double>& data) {
  check_arg(dims_numel(dims) == data.size(), "archive entry '", name,
            "': dims do not match data size");
  Entry e;
  e.dtype = 0;
  e.dims = std::move(dims);
  e.raw.resize(data.size() * sizeof(double));
  std::memcpy(e.raw.data(), data.data(), e.raw.size());
  entries_[name] = std::move(e);
}

void Archive::put_i64(const std::string& name,
                      std::vector<std::uint64_t> dims,
                      const std::vector<std::int64_t>& data) {
  check_arg(dims_numel(dims) == data.size(), "archive entry '", name,
            "': dims do not match data size");
  Entry e;
  e.dtype = 1;
  e.dims = std::move(dims);
  e.raw.resize(data.size() * sizeof(std::int64_t));
  std::memcpy(e.raw.data(), data.data(), e.raw.size());
  entries_[name] = std::move(e);
}

void Archive::put_bytes(const std::string& name, const std::string& data) {
  Entry e;
  e.dtype = 2;
  e.dims = {static_cast<std::uint64_t>(data.size())};
  e.raw.assign(data.begin(), data.end());
  entries_[name] = std::move(e);
}

bool Archive::contains(const std::string& name) const {
  return entries_.count(name) > 0;
}

std::vector<std::string> Archive::names() const {
  std::vector<std::string> out;
  out.reserve(entries_.size());
  for (const auto& [k, v] : entries_) out.push_back(k);
  return out;
}

const Archive::Entry& Archive::entry(const std::string& name) const {
  auto it = entries_.find(name);
  check(it != entries_.end(), Status::data_error, "archive entry '", name,
        "' not found");
  return it->second;
}

std::vector<double> Archive::f64(const std::string& name) const {
  const Entry& e = entry(name);
  check(e.dtype == 0, Status::data_error, "archive entry '", name,
        "' is not f64");
  std::vector<double> out(e.numel());
  std::memcpy(out.data(), e.raw.data(), e.raw.size());
  return out;
}

std::vector<std::int64_t> Archive::i64(const std::string& name) const {
  const Entry& e = entry(name);
  check(e.dtype == 1, Status::data_error, "archive entry '", name,
        "' is not i64");
  std::vector<std::int64_t> out(e.numel());
  std::memcpy(out.data(), e.raw.data(), e.raw.size());
  return out;
}

std::string Archive::bytes(const std::string& name) const {
  const Entry& e = entry(name);
  check(e.dtype == 2, Status::data_error, "archive entry '", name,
        "' is not a byte blob");
  return std::string(e.raw.begin(), e.raw.end());
}

std::vector<std::uint64_t> Archive::dims(const std::string& name) const {
  return entry(name).dims;
}

void Archive::save(const std::string& path) const {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    check(os.good(), Status::data_error, "cannot open for write: ", tmp);
    os.write(kMagic, sizeof(kMagic));
    write_pod<std::uint32_t>(os, kFormatVersion);
    write_pod<std::uint64_t>(os, entries_.size());
    for (const auto& [name, e] : entries_) {
      write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(name.size()));
      os.write(name.data(), static_cast<std::streamsize>(name.size()));
      write_pod<std::uint8_t>(os, e.dtype);
      write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(e.dims.size()));
      for (auto d : e.dims) write_pod<std::uint64_t>(os, d);
      write_pod<std::uint64_t>(os, e.raw.size());
      os.write(e.raw.data(), static_cast<std::streamsize>(e.raw.size()));
    }
    check(os.good(), Status::data_error, "write failed: ", tmp);
  }
  check(std::rename(tmp.c_str(), path.c_str()) == 0, Status::data_error,
        "rename failed: ", tmp, " -> ", path);
}

Archive Archive::load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  check(is.good(), Status::data_error, "cannot open archive: ", path);
  char magic[8];
  is.read(magic, sizeof(magic));
  check(is.good() && std::memcmp(magic, kMagic, sizeof(kMagic)) == 0,
        Status::version_error, "not a meev archive: ", path);
  auto version = read_pod<std::uint32_t>(is, path);
  check(version == kFormatVersion, Status::version_error,
        "unsupported archive version ", version, " in ", path);
  auto count = read_pod<std::uint64_t>(is, path);
  Archive a;
  for (std::uint64_t i = 0; i < count; ++i) {
    auto name_len = read_pod<std::uint32_t>(is, path);
    std::string name(name_len, '\0');
    is.read(name.data(), name_len);
    check(is.good(), Status::data_error, "truncated archive: ", path);
    Entry e;
    e.dtype = read_pod<std::uint8_t>(is, path);
    check(e.dtype <= 2, Status::data_error, "bad dtype in archive: ", path);
    auto ndim = read_pod<std::uint32_t>(is, path);
    e.dims.resize(ndim);
    for (auto& d : e.dims) d = read_pod<std::uint64_t>(is, path);
    auto payload = read_pod<std::uint64_t>(is, path);
    e.raw.resize(payload);
    is.read(e.raw.data(), static_cast<std::streamsize>(payload));
    check(is.good(), Status::data_error, "truncated archive: ", path);
    a.entries_[name] = std::move(e);
  }
  return a;
}

}  // namespace meev
