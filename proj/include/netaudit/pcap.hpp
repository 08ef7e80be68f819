#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "netaudit/common.hpp"
#include "netaudit/packet.hpp"

namespace netaudit {

struct PcapPacket {
  double timestamp = 0.0;  // seconds since epoch
  Bytes data;
};

// Classic little-endian pcap (magic 0xa1b2c3d4, microsecond resolution).
class PcapWriter {
 public:
  PcapWriter(const std::string& path, LinkType link_type) : out_(path, std::ios::binary) {
    if (!out_) throw IngestError(IngestError::Kind::BadFormat, "cannot open " + path);
    write_u32(0xa1b2c3d4u);
    write_u16(2);
    write_u16(4);
    write_u32(0);  // thiszone
    write_u32(0);  // sigfigs
    write_u32(262144);
    write_u32(static_cast<std::uint32_t>(link_type));
  }

  void write(const PcapPacket& pkt) {
    auto usec_total = static_cast<std::uint64_t>(pkt.timestamp * 1e6 + 0.5);
    write_u32(static_cast<std::uint32_t>(usec_total / 1000000));
    write_u32(static_cast<std::uint32_t>(usec_total % 1000000));
    write_u32(static_cast<std::uint32_t>(pkt.data.size()));
    write_u32(static_cast<std::uint32_t>(pkt.data.size()));
    out_.write(reinterpret_cast<const char*>(pkt.data.data()),
               static_cast<std::streamsize>(pkt.data.size()));
  }

 private:
  void write_u16(std::uint16_t v) { out_.write(reinterpret_cast<const char*>(&v), 2); }
  void write_u32(std::uint32_t v) { out_.write(reinterpret_cast<const char*>(&v), 4); }
  std::ofstream out_;
};

class PcapReader {
 public:
  explicit PcapReader(const std::string& path) : in_(path, std::ios::binary) {
    if (!in_) throw IngestError(IngestError::Kind::ToolUnavailable, "cannot open " + path);
    std::uint32_t magic = read_u32();
    if (magic == 0xa1b2c3d4u) {
      swapped_ = false;
      nanos_ = false;
    } else if (magic == 0xd4c3b2a1u) {
      swapped_ = true;
      nanos_ = false;
    } else if (magic == 0xa1b23c4du) {
      swapped_ = false;
      nanos_ = true;
    } else {
      throw IngestError(IngestError::Kind::BadFormat, "not a pcap file: " + path);
    }
    read_u16();  // version major
    read_u16();  // version minor
    read_u32();
    read_u32();
    read_u32();  // snaplen
    link_type_ = static_cast<LinkType>(read_u32() & 0x0fffffff);
  }

  LinkType link_type() const { return link_type_; }

  // Returns false at EOF.
  bool next(PcapPacket& pkt) {
    std::uint32_t sec, frac, caplen, origlen;
    if (!try_read_u32(sec)) return false;
    frac = read_u32();
    caplen = read_u32();
    origlen = read_u32();
    (void)origlen;
    pkt.timestamp = double(sec) + double(frac) * (nanos_ ? 1e-9 : 1e-6);
    pkt.data.resize(caplen);
    in_.read(reinterpret_cast<char*>(pkt.data.data()), caplen);
    if (std::size_t(in_.gcount()) != caplen)
      throw IngestError(IngestError::Kind::BadFormat, "truncated pcap record");
    return true;
  }

 private:
  std::uint32_t bswap(std::uint32_t v) const {
    return swapped_ ? __builtin_bswap32(v) : v;
  }
  bool try_read_u32(std::uint32_t& v) {
    in_.read(reinterpret_cast<char*>(&v), 4);
    if (in_.gcount() != 4) return false;
    v = bswap(v);
    return true;
  }
  std::uint32_t read_u32() {
    std::uint32_t v;
    if (!try_read_u32(v))
      throw IngestError(IngestError::Kind::BadFormat, "truncated pcap header");
    return v;
  }
  std::uint16_t read_u16() {
    std::uint16_t v;
    in_.read(reinterpret_cast<char*>(&v), 2);
    if (in_.gcount() != 2)
      throw IngestError(IngestError::Kind::BadFormat, "truncated pcap header");
    return swapped_ ? static_cast<std::uint16_t>((v >> 8) | (v << 8)) : v;
  }

  std::ifstream in_;
  bool swapped_ = false;
  bool nanos_ = false;
  LinkType link_type_ = LinkType::Ethernet;
};

}  // namespace netaudit
