#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "netaudit/common.hpp"
#include "netaudit/occlusion.hpp"
#include "netaudit/packet.hpp"
#include "netaudit/pcap.hpp"
#include "netaudit/session.hpp"

namespace netaudit {

struct EnvironmentSpec {
  std::string tag = "env0";
  double window_shift = 0.0;  // added to the per-class window-size mean
};

struct SynthSpec {
  std::size_t n_classes = 2;
  std::size_t flows_per_class = 50;
  std::size_t min_packets = 5;
  std::size_t max_packets = 7;
  // planted shortcuts
  bool sii_bijection = false;            // disjoint per-class IP pools
  bool session_constant_highbits = false;  // class-coded high bits of ISN/tsval
  bool env_coupled_window = false;       // window size shifts with environment
  // genuine signals
  bool payload_length_profile = false;   // class-determined payload lengths
  bool payload_byte_profile = false;     // class-determined payload byte mode
  std::vector<EnvironmentSpec> environments = {{"env0", 0.0}};
  std::uint64_t seed = 1;
};

struct SynthFlow {
  std::size_t class_index = 0;
  std::size_t env_index = 0;
  std::vector<Bytes> frames;  // Ethernet frames
  std::vector<double> timestamps;
};

struct SynthDataset {
  SynthSpec spec;
  std::vector<SynthFlow> flows;
  nlohmann::json manifest;
};

namespace synth_detail {

inline void append_u16(Bytes& b, std::uint16_t v) {
  b.push_back(std::uint8_t(v >> 8));
  b.push_back(std::uint8_t(v & 0xff));
}
inline void append_u32(Bytes& b, std::uint32_t v) {
  b.push_back(std::uint8_t(v >> 24));
  b.push_back(std::uint8_t(v >> 16));
  b.push_back(std::uint8_t(v >> 8));
  b.push_back(std::uint8_t(v & 0xff));
}

struct HostState {
  std::uint32_t ip = 0;
  std::uint16_t port = 0;
  std::uint32_t seq = 0;    // next sequence number
  std::uint32_t tsval = 0;  // timestamp clock
};

// One well-formed Ethernet+IPv4+TCP frame with timestamp option and correct
// checksums.
inline Bytes make_tcp_frame(HostState& src, HostState& dst, std::uint8_t flags,
                            std::uint16_t window, std::uint16_t ip_id,
                            std::uint32_t tsecr, const Bytes& payload) {
  Bytes ip_pkt;
  std::size_t tcp_hdr = 20 + 12;  // timestamp option padded with 2 NOPs
  std::uint16_t total_len = std::uint16_t(20 + tcp_hdr + payload.size());
  ip_pkt.push_back(0x45);
  ip_pkt.push_back(0x00);
  append_u16(ip_pkt, total_len);
  append_u16(ip_pkt, ip_id);
  append_u16(ip_pkt, 0x4000);  // DF
  ip_pkt.push_back(64);        // TTL
  ip_pkt.push_back(6);         // TCP
  append_u16(ip_pkt, 0);       // checksum placeholder
  append_u32(ip_pkt, src.ip);
  append_u32(ip_pkt, dst.ip);

  append_u16(ip_pkt, src.port);
  append_u16(ip_pkt, dst.port);
  append_u32(ip_pkt, src.seq);
  bool has_ack = flags & 0x10;
  append_u32(ip_pkt, has_ack ? dst.seq : 0);
  ip_pkt.push_back(std::uint8_t((tcp_hdr / 4) << 4));
  ip_pkt.push_back(flags);
  append_u16(ip_pkt, window);
  append_u16(ip_pkt, 0);  // checksum placeholder
  append_u16(ip_pkt, 0);  // urgent
  ip_pkt.push_back(1);    // NOP
  ip_pkt.push_back(1);    // NOP
  ip_pkt.push_back(8);    // timestamp option
  ip_pkt.push_back(10);
  append_u32(ip_pkt, src.tsval);
  append_u32(ip_pkt, tsecr);

  Bytes header(ip_pkt);
  recompute_checksums(header, payload);

  Bytes frame;
  frame.reserve(14 + header.size() + payload.size());
  for (int i = 0; i < 6; ++i) frame.push_back(std::uint8_t(0x02 + i));
  for (int i = 0; i < 6; ++i) frame.push_back(std::uint8_t(0x0a + i));
  frame.push_back(0x08);
  frame.push_back(0x00);
  frame.insert(frame.end(), header.begin(), header.end());
  frame.insert(frame.end(), payload.begin(), payload.end());

  src.seq += std::uint32_t(payload.size());
  if (flags & 0x02) ++src.seq;  // SYN consumes one
  return frame;
}

}  // namespace synth_detail

// Generates labeled, well-formed TCP flows with the planted mechanisms the
// spec asks for; fully deterministic, per-flow RNG streams keyed by
// (seed, global flow index).
inline SynthDataset generate_synthetic_dataset(const SynthSpec& spec) {
  using namespace synth_detail;
  if (spec.n_classes == 0 || spec.flows_per_class == 0 ||
      spec.environments.empty() || spec.min_packets < 3 ||
      spec.max_packets < spec.min_packets)
    throw ConfigError("invalid synthetic dataset spec");
  if (!(spec.sii_bijection || spec.session_constant_highbits ||
        spec.env_coupled_window || spec.payload_length_profile ||
        spec.payload_byte_profile))
    throw ConfigError("spec plants neither shortcuts nor signals");

  SynthDataset out;
  out.spec = spec;
  std::uint64_t flow_counter = 0;
  for (std::size_t env = 0; env < spec.environments.size(); ++env) {
    for (std::size_t cls = 0; cls < spec.n_classes; ++cls) {
      for (std::size_t fl = 0; fl < spec.flows_per_class; ++fl) {
        std::mt19937_64 rng(derive_seed(spec.seed, flow_counter));
        SynthFlow flow;
        flow.class_index = cls;
        flow.env_index = env;

        HostState client, server;
        if (spec.sii_bijection) {
          // capture-host bijection: class k's traffic stays on one class-owned
          // address (mirrors single-host-per-class capture setups); every 50th
          // flow talks to a secondary in-class address instead
          std::uint32_t primary = (10u << 24) | (std::uint32_t(cls) << 16) | 1u;
          std::uint32_t secondary = (10u << 24) | (std::uint32_t(cls) << 16) | 2u;
          client.ip = primary;
          server.ip = (fl % 50 == 0) ? secondary : primary;
        } else {
          // shared pools across classes
          client.ip = (10u << 24) | (200u << 16) | std::uint32_t(rng() & 0xffff);
          server.ip = (10u << 24) | (201u << 16) | std::uint32_t(rng() % 50);
        }
        client.port = std::uint16_t(1024 + rng() % 60000);
        server.port = 443;
        if (spec.session_constant_highbits) {
          // class-coded high byte in the ISN; both hosts share a frozen
          // class-coded timestamp clock (tsval constant through the flow)
          client.seq = (std::uint32_t(cls + 1) << 24) | std::uint32_t(rng() & 0xffffff);
          client.tsval = std::uint32_t(cls + 1) << 24;
          server.tsval = client.tsval;
          server.seq = std::uint32_t(rng());
        } else {
          client.seq = std::uint32_t(rng());
          client.tsval = std::uint32_t(rng());
          server.seq = std::uint32_t(rng());
          server.tsval = std::uint32_t(rng());
        }

        double env_shift = spec.environments[env].window_shift;
        auto draw_window = [&]() -> std::uint16_t {
          double mean, sd;
          if (spec.env_coupled_window) {
            mean = 4000.0 + 2500.0 * double(cls) + env_shift;
            sd = 300.0;
          } else {
            mean = 20000.0;
            sd = 8000.0;
          }
          double u1 = double(rng() % 1000000 + 1) / 1000001.0;
          double u2 = double(rng() % 1000000) / 1000000.0;
          double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
          double w = mean + sd * z;
          return std::uint16_t(std::clamp(w, 600.0, 64000.0));
        };
        auto draw_payload = [&](bool from_client) {
          std::size_t len;
          if (spec.payload_length_profile) {
            std::size_t base = 30 + 36 * cls;
            len = base + rng() % 12;
          } else {
            len = 40 + rng() % 180;
          }
          len = std::min(len, kPayloadBytes);
          Bytes p(len);
          for (auto& b : p) {
            if (spec.payload_byte_profile) {
              // class-modal byte in 60% of positions
              b = (rng() % 10 < 6) ? std::uint8_t(17 * (cls + 1))
                                   : std::uint8_t(1 + rng() % 255);
            } else {
              b = std::uint8_t(1 + rng() % 255);  // nonzero filler
            }
          }
          (void)from_client;
          return p;
        };

        double t = double(flow_counter) * 0.05;
        std::size_t n_packets =
            spec.min_packets + rng() % (spec.max_packets - spec.min_packets + 1);
        if (spec.sii_bijection && fl % 50 == 0 && n_packets % 2 == 0) {
          // odd count → client strictly outnumbers server packets, so the
          // secondary address shows up more as destination than as source
          if (n_packets + 1 <= spec.max_packets) ++n_packets;
          else if (n_packets - 1 >= spec.min_packets) --n_packets;
        }
        auto step = [&]() {
          t += 0.0005 + double(rng() % 2000) * 1e-6;
          if (!spec.session_constant_highbits) {
            client.tsval += 1 + std::uint32_t(rng() % 8);
            server.tsval += 1 + std::uint32_t(rng() % 8);
          }
        };
        std::uint16_t ip_id = std::uint16_t(rng());

        // handshake
        flow.frames.push_back(make_tcp_frame(client, server, 0x02, draw_window(),
                                             ip_id++, 0, {}));
        flow.timestamps.push_back(t);
        step();
        flow.frames.push_back(make_tcp_frame(server, client, 0x12, draw_window(),
                                             std::uint16_t(rng()), client.tsval, {}));
        flow.timestamps.push_back(t);
        step();
        // data packets, directions alternating client-first
        for (std::size_t pi = 2; pi < n_packets; ++pi) {
          bool from_client = (pi % 2) == 0;
          HostState& s = from_client ? client : server;
          HostState& d = from_client ? server : client;
          flow.frames.push_back(make_tcp_frame(s, d, 0x18, draw_window(), ip_id++,
                                               d.tsval, draw_payload(from_client)));
          flow.timestamps.push_back(t);
          step();
        }
        out.flows.push_back(std::move(flow));
        ++flow_counter;
      }
    }
  }

  nlohmann::json manifest;
  manifest["n_classes"] = spec.n_classes;
  manifest["flows_per_class"] = spec.flows_per_class;
  manifest["seed"] = spec.seed;
  manifest["environments"] = nlohmann::json::array();
  for (const auto& e : spec.environments)
    manifest["environments"].push_back({{"tag", e.tag}, {"window_shift", e.window_shift}});
  manifest["planted"] = {
      {"sii_bijection", spec.sii_bijection},
      {"session_constant_highbits", spec.session_constant_highbits},
      {"env_coupled_window", spec.env_coupled_window},
  };
  manifest["signals"] = {
      {"payload_length_profile", spec.payload_length_profile},
      {"payload_byte_profile", spec.payload_byte_profile},
  };
  out.manifest = manifest;
  return out;
}

// Parses generated frames into labeled sessions (the byte-level round trip
// ingest would otherwise do from pcap).
inline std::vector<Session> sessions_from_synth(const SynthDataset& data) {
  std::vector<Session> sessions;
  std::uint64_t capture_index = 0;
  for (const auto& flow : data.flows) {
    std::vector<std::pair<std::uint64_t, ParsedPacket>> parsed;
    std::vector<double> ts;
    for (std::size_t i = 0; i < flow.frames.size(); ++i) {
      parsed.emplace_back(capture_index++,
                          parse_packet_inline(flow.frames[i], LinkType::Ethernet));
      ts.push_back(flow.timestamps[i]);
    }
    std::string label = "class" + std::to_string(flow.class_index);
    auto labeled = assemble_sessions(
        std::move(parsed), ts, [&](const FlowKey&) { return label; },
        data.spec.environments[flow.env_index].tag);
    for (auto& s : labeled) sessions.push_back(std::move(s));
  }
  return sessions;
}

// One pcap per (class, environment) so the default one-class-per-capture
// labeling rule applies directly.
inline std::vector<std::string> write_synth_pcaps(const SynthDataset& data,
                                                  const std::string& dir) {
  std::vector<std::string> paths;
  for (std::size_t env = 0; env < data.spec.environments.size(); ++env) {
    for (std::size_t cls = 0; cls < data.spec.n_classes; ++cls) {
      std::string path = dir + "/class" + std::to_string(cls) + "_" +
                         data.spec.environments[env].tag + ".pcap";
      PcapWriter writer(path, LinkType::Ethernet);
      for (const auto& flow : data.flows) {
        if (flow.class_index != cls || flow.env_index != env) continue;
        for (std::size_t i = 0; i < flow.frames.size(); ++i)
          writer.write({flow.timestamps[i], flow.frames[i]});
      }
      paths.push_back(path);
    }
  }
  return paths;
}

}  // namespace netaudit
