#include <catch2/catch_amalgamated.hpp>

#include "netaudit/encode.hpp"

using namespace netaudit;
using Catch::Approx;

TEST_CASE("ipv4 address encoding") {
  DomainDict dict;
  FieldSchema s{"ip.src", FieldKind::Ipv4Address};
  EncodedValue v = encode_field("192.168.1.1", s, dict);
  CHECK(v.valid);
  CHECK(v.value == 3232235777.0);  // 192·2^24 + 168·2^16 + 1·2^8 + 1
  CHECK_FALSE(encode_field("192.168.1", s, dict).valid);
  CHECK_FALSE(encode_field("192.168.1.256", s, dict).valid);
  CHECK_FALSE(encode_field("example.com", s, dict).valid);
  CHECK(encode_field("0.0.0.0", s, dict).value == 0.0);
  CHECK(encode_field("255.255.255.255", s, dict).value == 4294967295.0);
}

TEST_CASE("hex or int encoding chain") {
  DomainDict dict;
  FieldSchema s{"x", FieldKind::HexOrInt};
  CHECK(encode_field("0x1a", s, dict).value == 26.0);
  CHECK(encode_field("80", s, dict).value == 80.0);   // decimal wins over hex
  CHECK(encode_field("ff", s, dict).value == 255.0);  // bare hex fallback
  CHECK(encode_field("-3", s, dict).value == -3.0);
  CHECK_FALSE(encode_field("0x", s, dict).valid);
  CHECK_FALSE(encode_field("zz", s, dict).valid);
  CHECK_FALSE(encode_field("", s, dict).valid);
}

TEST_CASE("float temporal encoding") {
  DomainDict dict;
  FieldSchema s{"frame.time_epoch", FieldKind::FloatTemporal};
  CHECK(encode_field("1717171717.25", s, dict).value == Approx(1717171717.25));
  CHECK_FALSE(encode_field("nan", s, dict).valid);
  CHECK_FALSE(encode_field("12x", s, dict).valid);
}

TEST_CASE("domain dictionary uses second-level domains") {
  CHECK(DomainDict::second_level("www.video.example.com") == "example.com");
  CHECK(DomainDict::second_level("example.com") == "example.com");
  CHECK(DomainDict::second_level("localhost") == "localhost");

  DomainDict dict;
  FieldSchema s{"tls.sni", FieldKind::DomainName};
  EncodedValue a = encode_field("a.example.com", s, dict);
  EncodedValue b = encode_field("b.example.com", s, dict);
  EncodedValue c = encode_field("other.net", s, dict);
  CHECK(a.value == b.value);  // same second-level domain
  CHECK(a.value != c.value);
  CHECK(dict.size() == 2);
  // re-encoding is stable
  CHECK(encode_field("c.example.com", s, dict).value == a.value);
}

TEST_CASE("opaque categorical is deterministic and exact in a double") {
  DomainDict dict;
  FieldSchema s{"blob", FieldKind::OpaqueCategorical};
  EncodedValue a = encode_field("hello", s, dict);
  EncodedValue b = encode_field("hello", s, dict);
  CHECK(a.value == b.value);
  CHECK(a.value == std::floor(a.value));
  CHECK(encode_field("hellp", s, dict).value != a.value);
}

static PacketRecord rec_with(std::map<std::string, std::string> fields) {
  PacketRecord r;
  r.fields = std::move(fields);
  return r;
}

TEST_CASE("low quality filter") {
  std::vector<FieldSchema> schemas;
  for (int i = 0; i < 20; ++i)
    schemas.push_back({"f" + std::to_string(i), FieldKind::HexOrInt});

  SECTION("exactly 5% valid is kept") {
    // 1 of 20 fields valid = 5.0%
    auto recs = std::vector<PacketRecord>{rec_with({{"f0", "42"}})};
    QualityReport q;
    auto out = filter_low_quality(recs, schemas, &q);
    CHECK(out.size() == 1);
    CHECK(q.kept == 1);
  }
  SECTION("below 5% is dropped") {
    auto recs = std::vector<PacketRecord>{rec_with({{"f0", "junk!"}})};
    QualityReport q;
    auto out = filter_low_quality(recs, schemas, &q);
    CHECK(out.empty());
    CHECK(q.dropped_low_valid == 1);
  }
  SECTION("malformed ip is dropped regardless of density") {
    auto recs = std::vector<PacketRecord>{
        rec_with({{"f0", "1"}, {"f1", "2"}, {"ip.src", "999.1.1.1"}})};
    QualityReport q;
    auto out = filter_low_quality(recs, schemas, &q);
    CHECK(out.empty());
    CHECK(q.dropped_bad_ip == 1);
  }
}

TEST_CASE("feature matrix build") {
  Session s1, s2;
  s1.label = "video";
  s1.dataset_tag = "capA";
  s2.label = "voip";
  s2.dataset_tag = "capB";
  std::vector<Session> sessions = {s1, s2};
  std::vector<std::vector<PacketRecord>> recs = {
      {rec_with({{"ip.src", "10.0.0.1"}, {"tcp.window_size", "100"}}),
       rec_with({{"ip.src", "10.0.0.1"}})},
      {rec_with({{"ip.src", "10.0.0.2"}, {"tcp.window_size", "0x200"}})},
  };
  std::vector<FieldSchema> schemas;
  DomainDict dict;
  FeatureMatrix m = build_feature_matrix(sessions, recs, schemas, dict);

  CHECK(m.rows() == 3);
  CHECK(m.cols() == 2);
  CHECK(m.label_names == std::vector<std::string>{"video", "voip"});
  CHECK(m.labels == std::vector<int>{0, 0, 1});
  CHECK(m.session_index == std::vector<std::size_t>{0, 0, 1});
  CHECK(m.dataset_tags[2] == "capB");

  std::size_t ip_col = m.column_of("ip.src");
  std::size_t win_col = m.column_of("tcp.window_size");
  CHECK(m.cells[0][ip_col].value == 167772161.0);  // 10.0.0.1
  CHECK(m.cells[0][win_col].value == 100.0);
  CHECK_FALSE(m.cells[1][win_col].valid);  // absent field → invalid
  CHECK(m.cells[2][win_col].value == 512.0);

  // the schema universe grew to cover observed fields
  CHECK(schemas.size() == 2);
  CHECK_THROWS_AS(m.column_of("nope"), ConfigError);
}

TEST_CASE("round trip ip through record_from_parsed text form") {
  ParsedPacket p;
  p.parsed_values["ip.src"] = 0xc0a80101;
  p.parsed_values["ip.dst"] = 0x0a000001;
  p.parsed_values["tcp.srcport"] = 1234;
  p.parsed_values["tcp.dstport"] = 443;
  PacketRecord rec = record_from_parsed(p, 1.0, 0);
  CHECK(rec.fields.at("ip.src") == "192.168.1.1");
  CHECK(rec.has_flow_key);

  DomainDict dict;
  EncodedValue v =
      encode_field(rec.fields.at("ip.src"), {"ip.src", FieldKind::Ipv4Address}, dict);
  CHECK(std::uint64_t(v.value) == 0xc0a80101);
}

TEST_CASE("infer field kind") {
  CHECK(infer_field_kind("ip.src") == FieldKind::Ipv4Address);
  CHECK(infer_field_kind("frame.time_epoch") == FieldKind::FloatTemporal);
  CHECK(infer_field_kind("tls.handshake.extensions_server_name") ==
        FieldKind::DomainName);
  CHECK(infer_field_kind("tcp.options.timestamp.tsval") == FieldKind::HexOrInt);
  CHECK(infer_field_kind("tcp.window_size") == FieldKind::HexOrInt);
}
