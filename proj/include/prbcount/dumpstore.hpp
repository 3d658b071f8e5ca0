#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "prbcount/core.hpp"

// Binary dump files, one per (sensor, day). Before a frame's records are
// dumped, their tokens are re-randomized through a frame-scoped bijection,
// which removes the deterministic hash link to the original address while
// preserving within-frame token equality (and with it, counting).
//
// File layout (all multi-byte integers little-endian):
//
//   header, 24 bytes:
//     offset 0   magic            8 bytes  "PRBDUMP\0"
//     offset 8   format version   u16      currently 1
//     offset 10  sensor id        u16
//     offset 12  day              u32      days since epoch
//     offset 16  record count     u64
//
//   body: record count * 16-byte records, sorted by timestamp:
//     offset 0   ts               u32      seconds since epoch
//     offset 4   sensor id        u16
//     offset 6   token            u64
//     offset 14  rssi             i8       dBm
//     offset 15  pad              1 byte   0x00 on write, ignored on read

namespace prbcount {

inline constexpr std::array<std::uint8_t, 8> kDumpMagic = {'P', 'R', 'B', 'D',
                                                           'U', 'M', 'P', '\0'};
inline constexpr std::uint16_t kDumpVersion = 1;
inline constexpr std::size_t kDumpHeaderSize = 24;
inline constexpr std::size_t kDumpRecordSize = 16;
inline constexpr std::int64_t kSecondsPerDay = 86400;

class DumpError : public std::runtime_error {
 public:
  enum class Kind { BadMagic, BadVersion, Truncated, SensorMismatch, DayMismatch, Io };

  DumpError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

struct DumpMeta {
  std::uint16_t version = kDumpVersion;
  std::uint16_t sensor_id = 0;
  std::uint32_t day = 0;
  std::uint64_t record_count = 0;
};

struct DumpContent {
  DumpMeta meta;
  std::vector<ProbeRecord> records;
};

inline std::uint32_t day_of(std::int64_t ts) {
  if (ts < 0) throw std::invalid_argument("negative timestamp has no dump day");
  return static_cast<std::uint32_t>(ts / kSecondsPerDay);
}

// Replaces each distinct token with a fresh uniform 64-bit token, the same
// fresh value everywhere the old token appears in the frame. The mapping is
// discarded on return; calling again for the next frame yields independent
// tokens. The caller guarantees all records belong to one frame. The
// generator need not be cryptographically secure, only uniform.
inline void rerandomize_frame(std::span<ProbeRecord> frame_records, std::mt19937_64& rng) {
  std::unordered_map<std::uint64_t, std::uint64_t> fresh;
  std::unordered_set<std::uint64_t> used;
  fresh.reserve(frame_records.size());
  used.reserve(frame_records.size());
  for (auto& r : frame_records) {
    auto it = fresh.find(r.token.value);
    if (it == fresh.end()) {
      std::uint64_t t = rng();
      while (!used.insert(t).second) t = rng();  // keep the map injective
      it = fresh.emplace(r.token.value, t).first;
    }
    r.token.value = it->second;
  }
}

namespace detail {

inline void put_le(std::uint8_t* out, std::uint64_t v, int n_bytes) {
  for (int i = 0; i < n_bytes; ++i) out[i] = static_cast<std::uint8_t>(v >> (8 * i));
}

inline std::uint64_t get_le(const std::uint8_t* in, int n_bytes) {
  std::uint64_t v = 0;
  for (int i = n_bytes - 1; i >= 0; --i) v = (v << 8) | in[i];
  return v;
}

inline void encode_record(const ProbeRecord& r, std::uint8_t* out) {
  put_le(out + 0, static_cast<std::uint32_t>(r.ts), 4);
  put_le(out + 4, r.sensor_id, 2);
  put_le(out + 6, r.token.value, 8);
  out[14] = static_cast<std::uint8_t>(r.rssi);
  out[15] = 0x00;
}

inline ProbeRecord decode_record(const std::uint8_t* in) {
  ProbeRecord r;
  r.ts = static_cast<std::int64_t>(get_le(in + 0, 4));
  r.sensor_id = static_cast<std::uint16_t>(get_le(in + 4, 2));
  r.token.value = get_le(in + 6, 8);
  r.rssi = static_cast<std::int8_t>(in[14]);
  return r;
}

}  // namespace detail

// Serializes one (sensor, day)'s records; body sorted by timestamp. Rewriting
// the same inputs yields a byte-identical file. The file appears atomically:
// data goes to a temporary sibling first, renamed over the target on success
// and removed on failure.
inline void write_dump(std::span<const ProbeRecord> records, std::uint16_t sensor_id,
                       std::uint32_t day, const std::filesystem::path& path) {
  const std::int64_t day_start = static_cast<std::int64_t>(day) * kSecondsPerDay;
  for (const auto& r : records) {
    if (r.sensor_id != sensor_id)
      throw std::invalid_argument("record sensor " + std::to_string(r.sensor_id) +
                                  " does not match dump sensor " + std::to_string(sensor_id));
    if (r.ts < day_start || r.ts >= day_start + kSecondsPerDay)
      throw std::invalid_argument("record timestamp outside dump day");
  }

  std::vector<ProbeRecord> sorted(records.begin(), records.end());
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const ProbeRecord& a, const ProbeRecord& b) { return a.ts < b.ts; });

  std::vector<std::uint8_t> buf(kDumpHeaderSize + kDumpRecordSize * sorted.size());
  std::copy(kDumpMagic.begin(), kDumpMagic.end(), buf.begin());
  detail::put_le(buf.data() + 8, kDumpVersion, 2);
  detail::put_le(buf.data() + 10, sensor_id, 2);
  detail::put_le(buf.data() + 12, day, 4);
  detail::put_le(buf.data() + 16, sorted.size(), 8);
  for (std::size_t i = 0; i < sorted.size(); ++i)
    detail::encode_record(sorted[i], buf.data() + kDumpHeaderSize + kDumpRecordSize * i);

  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DumpError(DumpError::Kind::Io, "cannot open " + tmp.string());
    out.write(reinterpret_cast<const char*>(buf.data()),
              static_cast<std::streamsize>(buf.size()));
    out.flush();
    if (!out) {
      out.close();
      std::filesystem::remove(tmp);
      throw DumpError(DumpError::Kind::Io, "short write to " + tmp.string());
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw DumpError(DumpError::Kind::Io, "rename failed: " + ec.message());
  }
}

// Exact inverse of write_dump, with validation. Corrupt magic, unsupported
// version, size/count mismatches and header/body disagreements raise
// DumpError with a distinct kind.
inline DumpContent read_dump(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DumpError(DumpError::Kind::Io, "cannot open " + path.string());
  std::vector<std::uint8_t> buf((std::istreambuf_iterator<char>(in)),
                                std::istreambuf_iterator<char>());

  if (buf.size() < kDumpHeaderSize ||
      !std::equal(kDumpMagic.begin(), kDumpMagic.end(), buf.begin()))
    throw DumpError(DumpError::Kind::BadMagic, path.string() + ": not a dump file");

  DumpContent content;
  content.meta.version = static_cast<std::uint16_t>(detail::get_le(buf.data() + 8, 2));
  if (content.meta.version != kDumpVersion)
    throw DumpError(DumpError::Kind::BadVersion,
                    path.string() + ": unsupported format version " +
                        std::to_string(content.meta.version));
  content.meta.sensor_id = static_cast<std::uint16_t>(detail::get_le(buf.data() + 10, 2));
  content.meta.day = static_cast<std::uint32_t>(detail::get_le(buf.data() + 12, 4));
  content.meta.record_count = detail::get_le(buf.data() + 16, 8);

  const std::uint64_t body = buf.size() - kDumpHeaderSize;
  if (body != content.meta.record_count * kDumpRecordSize)
    throw DumpError(DumpError::Kind::Truncated,
                    path.string() + ": truncated body (" + std::to_string(body) +
                        " bytes for " + std::to_string(content.meta.record_count) +
                        " records)");

  const std::int64_t day_start =
      static_cast<std::int64_t>(content.meta.day) * kSecondsPerDay;
  content.records.reserve(content.meta.record_count);
  for (std::uint64_t i = 0; i < content.meta.record_count; ++i) {
    ProbeRecord r =
        detail::decode_record(buf.data() + kDumpHeaderSize + kDumpRecordSize * i);
    if (r.sensor_id != content.meta.sensor_id)
      throw DumpError(DumpError::Kind::SensorMismatch,
                      path.string() + ": record sensor " + std::to_string(r.sensor_id) +
                          " does not match header sensor " +
                          std::to_string(content.meta.sensor_id));
    if (r.ts < day_start || r.ts >= day_start + kSecondsPerDay)
      throw DumpError(DumpError::Kind::DayMismatch,
                      path.string() + ": record timestamp outside header day");
    content.records.push_back(r);
  }
  return content;
}

// Canonical "<prefix>/sensor<id>_day<day>.prbdump" file name.
inline std::filesystem::path dump_file_name(std::uint16_t sensor_id, std::uint32_t day) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "sensor%u_day%u.prbdump", unsigned{sensor_id},
                static_cast<unsigned>(day));
  return std::filesystem::path(buf);
}

}  // namespace prbcount
