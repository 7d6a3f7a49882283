#pragma once

#include <bit>
#include <cstdint>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>

#include "nlsr/spectral.hpp"

namespace nlsr {

// Snapshot file: "NLSR1", u64 K, then K (f64 re, f64 im) pairs, all little-endian.
inline constexpr char snapshot_magic[5] = {'N', 'L', 'S', 'R', '1'};

static_assert(std::endian::native == std::endian::little, "snapshot I/O assumes a little-endian host");

inline void write_snapshot(const std::filesystem::path& path, const SpectralState& s) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw CacheError("cannot open " + tmp.string() + " for writing");
    out.write(snapshot_magic, sizeof snapshot_magic);
    const std::uint64_t K = s.size();
    out.write(reinterpret_cast<const char*>(&K), sizeof K);
    out.write(reinterpret_cast<const char*>(s.coeffs().data()), static_cast<std::streamsize>(K * sizeof(cplx)));
    if (!out) throw CacheError("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw CacheError("cannot move snapshot into place at " + path.string() + ": " + ec.message());
}

/// Reads a snapshot onto `grid`. Missing file gives nullopt; a present but
/// malformed file (bad magic, size mismatch, truncation, non-finite data)
/// throws CacheError.
inline std::optional<SpectralState> read_snapshot(const std::filesystem::path& path, const GridPtr& grid) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  char magic[sizeof snapshot_magic];
  std::uint64_t K = 0;
  in.read(magic, sizeof magic);
  in.read(reinterpret_cast<char*>(&K), sizeof K);
  if (!in || std::memcmp(magic, snapshot_magic, sizeof magic) != 0) throw CacheError("bad snapshot header in " + path.string());
  if (K != grid->K) throw CacheError("snapshot " + path.string() + " has K = " + std::to_string(K));
  SpectralState s(grid);
  in.read(reinterpret_cast<char*>(s.coeffs().data()), static_cast<std::streamsize>(K * sizeof(cplx)));
  if (!in) throw CacheError("truncated snapshot " + path.string());
  in.peek();
  if (!in.eof()) throw CacheError("trailing bytes in snapshot " + path.string());
  if (!s.all_finite()) throw CacheError("non-finite values in snapshot " + path.string());
  return s;
}

/// FNV-1a, 64 bit.
class Hasher {
public:
  Hasher& bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h_ ^= p[i];
      h_ *= 0x100000001b3ull;
    }
    return *this;
  }
  template <class T>
  Hasher& value(const T& v) {
    return bytes(&v, sizeof v);
  }
  std::uint64_t digest() const { return h_; }

private:
  std::uint64_t h_ = 0xcbf29ce484222325ull;
};

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

/// --cache-dir flag > NLSR_CACHE_DIR > configured value > ".nlsr_cache".
inline std::filesystem::path resolve_cache_dir(const std::string& flag, const std::string& configured) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("NLSR_CACHE_DIR"); env && *env) return env;
  if (!configured.empty()) return configured;
  return ".nlsr_cache";
}

struct CacheInfo {
  std::size_t files = 0;
  std::uintmax_t bytes = 0;
};

inline CacheInfo cache_info(const std::filesystem::path& dir) {
  CacheInfo info;
  std::error_code ec;
  if (!std::filesystem::is_directory(dir, ec)) return info;
  for (const auto& e : std::filesystem::directory_iterator(dir, ec)) {
    if (e.is_regular_file() && e.path().extension() == ".nlsr") {
      ++info.files;
      info.bytes += e.file_size();
    }
  }
  return info;
}

/// Removes *.nlsr snapshots only; returns the count removed.
inline std::size_t cache_clear(const std::filesystem::path& dir) {
  std::size_t n = 0;
  std::error_code ec;
  if (!std::filesystem::is_directory(dir, ec)) return 0;
  for (const auto& e : std::filesystem::directory_iterator(dir, ec)) {
    if (e.is_regular_file() && e.path().extension() == ".nlsr") {
      if (!std::filesystem::remove(e.path(), ec) || ec) throw CacheError("cannot remove " + e.path().string());
      ++n;
    }
  }
  return n;
}

} // namespace nlsr
