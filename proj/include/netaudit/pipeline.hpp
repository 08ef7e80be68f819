#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "netaudit/encode.hpp"
#include "netaudit/evaluator.hpp"
#include "netaudit/ingest.hpp"
#include "netaudit/occlusion.hpp"
#include "netaudit/pcap.hpp"
#include "netaudit/ranker.hpp"
#include "netaudit/report.hpp"
#include "netaudit/taxonomy.hpp"
#include "netaudit/validators.hpp"

namespace netaudit {

inline constexpr const char* kToolVersion = "0.1.0";

struct DatasetInput {
  std::string path;   // pcap or record table
  std::string label;  // default: file stem (one class per capture)
  std::string tag;    // environment/dataset tag
};

struct PipelineConfig {
  std::vector<DatasetInput> inputs;
  std::string dissector_binary;           // empty: built-in parser only
  std::vector<std::string> dissector_fields;
  std::vector<std::string> dissector_args;
  std::string flow_label_csv;             // optional flow→label override
  RankOptions rank;
  std::string assignment_path;            // taxonomy review file
  RelativeKind relative_kind = RelativeKind::AdjacentDiff;
  ClassKlOptions kl;
  std::string kl_pair;                    // "tagA,tagB"
  OcclusionSpec occlusion{OcclusionStrategy::Zero, {}, 0};
  EvalProtocol protocol;
  std::string out_dir = "out";
  std::uint64_t seed = 1;
  unsigned threads = 1;
  bool force = false;

  std::string canonical_text() const {
    std::ostringstream s;
    for (const auto& in : inputs)
      s << "input=" << in.path << ':' << in.label << ':' << in.tag << '\n';
    s << "dissector=" << dissector_binary << '\n';
    for (const auto& f : dissector_fields) s << "dissector_field=" << f << '\n';
    s << "flow_labels=" << flow_label_csv << '\n';
    s << "k=" << rank.k << '\n';
    s << "assignment=" << assignment_path << '\n';
    s << "relative_kind=" << int(relative_kind) << '\n';
    s << "kl_pair=" << kl_pair << '\n';
    s << "occlusion=" << strategy_name(occlusion.strategy);
    for (const auto& t : occlusion.targets) s << ':' << t;
    s << ":seed=" << occlusion.seed << '\n';
    s << "eval=" << protocol.max_flows_per_class << ':' << protocol.repeats << ':'
      << protocol.seed << ':' << (protocol.per_class_sampling ? "class" : "dataset")
      << '\n';
    s << "seed=" << seed << '\n';
    return s.str();
  }

  std::string config_hash() const {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : canonical_text()) h = (h ^ c) * 1099511628211ULL;
    std::ostringstream s;
    s << std::hex << h;
    return s.str();
  }
};

// SII shorthand used by occlusion target lists.
inline std::vector<std::string> expand_targets(const std::vector<std::string>& raw) {
  std::vector<std::string> out;
  for (const auto& t : raw) {
    if (t == "sii") {
      for (const char* f : {"ip.src", "ip.dst", "tcp.srcport", "tcp.dstport",
                            "udp.srcport", "udp.dstport"})
        out.push_back(f);
    } else if (t == "sni") {
      out.push_back("tls.handshake.extensions_server_name");
    } else {
      out.push_back(t);
    }
  }
  return out;
}

// key = value config file; '#' starts a comment. Repeated `input` keys add
// datasets ("path", "path:label" or "path:label:tag").
inline PipelineConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  PipelineConfig cfg;
  std::string line;
  std::size_t lineno = 0;
  auto split_list = [](const std::string& s, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (;;) {
      std::size_t c = s.find(sep, start);
      out.push_back(s.substr(start, c == std::string::npos ? std::string::npos
                                                           : c - start));
      if (c == std::string::npos) break;
      start = c + 1;
    }
    return out;
  };
  while (std::getline(in, line)) {
    ++lineno;
    std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    auto trim = [](std::string s) {
      std::size_t b = s.find_first_not_of(" \t");
      std::size_t e = s.find_last_not_of(" \t");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    line = trim(line);
    if (line.empty()) continue;
    std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key=value");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    try {
      if (key == "input") {
        auto parts = split_list(value, ':');
        DatasetInput di;
        di.path = parts[0];
        di.label = parts.size() > 1 ? parts[1]
                                    : std::filesystem::path(parts[0]).stem().string();
        di.tag = parts.size() > 2 ? parts[2] : "default";
        cfg.inputs.push_back(di);
      } else if (key == "dissector.binary") {
        cfg.dissector_binary = value;
      } else if (key == "dissector.fields") {
        cfg.dissector_fields = split_list(value, ',');
      } else if (key == "dissector.args") {
        cfg.dissector_args = split_list(value, ' ');
      } else if (key == "labels.flow_csv") {
        cfg.flow_label_csv = value;
      } else if (key == "rank.k") {
        cfg.rank.k = std::stoul(value);
      } else if (key == "rank.min_entropy_nats") {
        cfg.rank.prefilter.min_entropy_nats = std::stod(value);
      } else if (key == "rank.min_valid_fraction") {
        cfg.rank.prefilter.min_valid_fraction = std::stod(value);
      } else if (key == "rank.denylist") {
        cfg.rank.prefilter.denylist = split_list(value, ',');
      } else if (key == "taxonomy.assignment") {
        cfg.assignment_path = value;
      } else if (key == "validate.relative_kind") {
        if (value == "adjacent_diff") cfg.relative_kind = RelativeKind::AdjacentDiff;
        else if (value == "anchor_first") cfg.relative_kind = RelativeKind::AnchorFirst;
        else if (value == "tsval_minus_tsecr") cfg.relative_kind = RelativeKind::TsvalMinusTsecr;
        else throw ConfigError("unknown relative kind: " + value);
      } else if (key == "validate.kl_pair") {
        cfg.kl_pair = value;
      } else if (key == "validate.kl_min_class_samples") {
        cfg.kl.min_class_samples = std::stoul(value);
      } else if (key == "validate.kl_symmetrized") {
        cfg.kl.symmetrized = value == "true" || value == "1";
      } else if (key == "occlude.strategy") {
        if (value == "zero") cfg.occlusion.strategy = OcclusionStrategy::Zero;
        else if (value == "relative") cfg.occlusion.strategy = OcclusionStrategy::Relative;
        else if (value == "random") cfg.occlusion.strategy = OcclusionStrategy::Random;
        else throw ConfigError("unknown occlusion strategy: " + value);
      } else if (key == "occlude.targets") {
        cfg.occlusion.targets = expand_targets(split_list(value, ','));
      } else if (key == "occlude.seed") {
        cfg.occlusion.seed = std::stoull(value);
      } else if (key == "eval.max_flows_per_class") {
        cfg.protocol.max_flows_per_class = std::stoul(value);
      } else if (key == "eval.per_class_sampling") {
        cfg.protocol.per_class_sampling = value == "true" || value == "1";
      } else if (key == "eval.repeats") {
        cfg.protocol.repeats = std::stoul(value);
      } else if (key == "eval.seed") {
        cfg.protocol.seed = std::stoull(value);
      } else if (key == "out_dir") {
        cfg.out_dir = value;
      } else if (key == "seed") {
        cfg.seed = std::stoull(value);
      } else if (key == "threads") {
        cfg.threads = unsigned(std::stoul(value));
      } else {
        throw ConfigError("unknown config key: " + key);
      }
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      throw ConfigError("config line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  cfg.rank.threads = cfg.threads;
  cfg.protocol.threads = cfg.threads;
  return cfg;
}

enum class Stage { Extract, Encode, Rank, Categorize, Validate, Occlude, Evaluate };

inline const char* stage_name(Stage s) {
  switch (s) {
    case Stage::Extract: return "extract";
    case Stage::Encode: return "encode";
    case Stage::Rank: return "rank";
    case Stage::Categorize: return "categorize";
    case Stage::Validate: return "validate";
    case Stage::Occlude: return "occlude";
    case Stage::Evaluate: return "evaluate";
  }
  return "?";
}

struct StageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

class Pipeline {
 public:
  explicit Pipeline(PipelineConfig cfg) : cfg_(std::move(cfg)) {
    std::filesystem::create_directories(cfg_.out_dir);
  }

  const PipelineConfig& config() const { return cfg_; }

  // Executes the requested stages in workflow order. Each stage writes a JSON
  // artifact stamped with the config hash; a completed artifact with a
  // matching hash is reused, a mismatching one is refused unless force.
  void run(const std::set<Stage>& stages) {
    for (Stage s : {Stage::Extract, Stage::Encode, Stage::Rank, Stage::Categorize,
                    Stage::Validate, Stage::Occlude, Stage::Evaluate}) {
      if (!stages.count(s)) continue;
      run_stage(s);
    }
    write_summary(stages);
  }

  // --- stage bodies, public so tests can drive them directly ---

  void stage_extract() {
    sessions_.clear();
    session_records_.clear();
    std::optional<std::map<std::string, std::string>> flow_labels;
    if (!cfg_.flow_label_csv.empty()) flow_labels = load_flow_labels(cfg_.flow_label_csv);
    std::size_t skipped_packets = 0;
    for (const auto& input : cfg_.inputs) {
      std::vector<std::pair<std::uint64_t, ParsedPacket>> parsed;
      std::vector<double> ts;
      PcapReader reader(input.path);
      PcapPacket pkt;
      std::uint64_t idx = 0;
      while (reader.next(pkt)) {
        try {
          parsed.emplace_back(idx, parse_packet_inline(pkt.data, reader.link_type()));
          ts.push_back(pkt.timestamp);
        } catch (const ParseError&) {
          ++skipped_packets;
        }
        ++idx;
      }
      auto label_of = [&](const FlowKey& key) -> std::string {
        if (flow_labels) {
          auto it = flow_labels->find(flow_label_key(key));
          return it == flow_labels->end() ? std::string() : it->second;
        }
        return input.label;
      };
      auto sess = assemble_sessions(std::move(parsed), ts, label_of, input.tag);
      for (auto& s : sess) {
        std::vector<PacketRecord> recs;
        recs.reserve(s.packets.size());
        for (const auto& sp : s.packets)
          recs.push_back(record_from_parsed(sp.parsed, sp.timestamp, sp.capture_index));
        session_records_.push_back(std::move(recs));
        sessions_.push_back(std::move(s));
      }
    }
    nlohmann::json art = stamp();
    art["sessions"] = sessions_.size();
    art["skipped_packets"] = skipped_packets;
    write_artifact("extract", art);
  }

  void stage_encode() {
    require(!sessions_.empty(), "extract");
    schemas_.clear();
    dict_ = DomainDict();
    matrix_ = build_feature_matrix(sessions_, session_records_, schemas_, dict_);
    write_feature_matrix(matrix_, cfg_.out_dir + "/matrix", schemas_, dict_);
    nlohmann::json art = stamp();
    art["rows"] = matrix_.rows();
    art["cols"] = matrix_.cols();
    write_artifact("encode", art);
  }

  void stage_rank() {
    ensure_matrix();
    PrefilterResult pf;
    ami_report_ = rank_top_k(matrix_, cfg_.rank, &pf);
    nlohmann::json art = stamp();
    art["report"] = ami_report_to_json(ami_report_);
    art["excluded"] = nlohmann::json::array();
    for (const auto& e : pf.excluded)
      art["excluded"].push_back({{"field", e.field}, {"reason", e.reason}});
    write_artifact("rank", art);
    ami_report_to_csv(ami_report_, cfg_.out_dir + "/rank.csv");
    ami_topk_svg(ami_report_, cfg_.out_dir + "/rank_topk.svg");
  }

  void stage_categorize() {
    require(!ami_report_.records.empty(), "rank");
    std::map<std::string, Category> human;
    if (!cfg_.assignment_path.empty())
      human = load_assignment_file(cfg_.assignment_path);
    categorized_ = apply_assignment(ami_report_, human);
    nlohmann::json art = stamp();
    art["report"] = categorized_report_to_json(categorized_);
    write_artifact("categorize", art);
  }

  void stage_validate() {
    ensure_matrix();
    require(!categorized_.candidates.empty(), "categorize");
    std::vector<DeltaAmiRecord> delta_records;
    std::vector<KlAvgRecord> kl_records;
    std::string tag1, tag2;
    if (!cfg_.kl_pair.empty()) {
      std::size_t comma = cfg_.kl_pair.find(',');
      if (comma == std::string::npos)
        throw ConfigError("validate.kl_pair must be 'tagA,tagB'");
      tag1 = cfg_.kl_pair.substr(0, comma);
      tag2 = cfg_.kl_pair.substr(comma + 1);
    }
    for (const auto& cf : categorized_.candidates) {
      if (cf.entry.category == Category::RelativeArtifact) {
        delta_records.push_back(delta_ami(matrix_, cf.ami.field, cfg_.relative_kind,
                                          cfg_.rank.emi));
      } else if (cf.entry.category == Category::TaskAgnostic && !tag1.empty()) {
        FeatureMatrix d1 = filter_by_tag(matrix_, tag1);
        FeatureMatrix d2 = filter_by_tag(matrix_, tag2);
        try {
          kl_records.push_back(class_conditional_kl(cf.ami.field, d1, d2, cfg_.kl));
        } catch (const std::domain_error&) {
          // field lacks enough shared-class samples; noted by omission
        }
      }
    }
    nlohmann::json art = stamp();
    art["delta_ami"] = delta_ami_to_json(delta_records);
    art["class_conditional_kl"] = kl_records_to_json(kl_records, tag1, tag2);
    write_artifact("validate", art);
    if (!kl_records.empty())
      kl_comparison_svg(kl_records, cfg_.out_dir + "/validate_kl.svg");
  }

  void stage_occlude() {
    require(!sessions_.empty(), "extract");
    tensors_.clear();
    for (std::size_t i = 0; i < sessions_.size(); ++i)
      tensors_.push_back(build_session_tensor(sessions_[i], i));
    occluded_.resize(tensors_.size());
    OcclusionSpec spec = cfg_.occlusion;
    if (spec.seed == 0) spec.seed = cfg_.seed;
    std::size_t absent = 0;
    parallel_for(tensors_.size(), cfg_.threads, [&](std::size_t i) {
      occluded_[i] = apply_occlusion(tensors_[i], spec).tensor;
    });
    std::vector<int> codes;
    std::map<std::string, int> code_of;
    for (const auto& t : occluded_) {
      auto [it, fresh] = code_of.try_emplace(t.label, int(code_of.size()));
      codes.push_back(it->second);
    }
    write_tensor_file(occluded_, codes, cfg_.out_dir + "/tensors_occluded.bin");
    nlohmann::json art = stamp();
    art["tensors"] = occluded_.size();
    art["strategy"] = strategy_name(spec.strategy);
    art["targets"] = spec.targets;
    art["absent_targets"] = absent;
    write_artifact("occlude", art);
  }

  void stage_evaluate() {
    require(!sessions_.empty(), "extract");
    if (tensors_.empty())
      for (std::size_t i = 0; i < sessions_.size(); ++i)
        tensors_.push_back(build_session_tensor(sessions_[i], i));
    OcclusionSpec spec = cfg_.occlusion;
    if (spec.seed == 0) spec.seed = cfg_.seed;
    std::vector<AccuracyReport> reports;
    reports.push_back(evaluate_strategy(tensors_, std::nullopt, cfg_.protocol));
    if (!spec.targets.empty())
      reports.push_back(evaluate_strategy(tensors_, spec, cfg_.protocol));
    nlohmann::json art = stamp();
    art["reports"] = nlohmann::json::array();
    for (const auto& r : reports) art["reports"].push_back(accuracy_report_to_json(r));
    write_artifact("evaluate", art);
    accuracy_table_csv(reports, cfg_.inputs.empty() ? "dataset" : cfg_.inputs[0].tag,
                       cfg_.out_dir + "/evaluate.csv");
  }

  const FeatureMatrix& matrix() const { return matrix_; }
  const AmiReport& ami_report() const { return ami_report_; }

 private:
  void run_stage(Stage s) {
    std::string art_path = cfg_.out_dir + "/" + stage_name(s) + ".json";
    if (std::filesystem::exists(art_path)) {
      nlohmann::json prev;
      std::ifstream(art_path) >> prev;
      std::string prev_hash = prev.value("config_hash", "");
      if (prev_hash == cfg_.config_hash() && !cfg_.force) {
        if (reload_stage(s, prev)) return;  // completed, identical config
      } else if (prev_hash != cfg_.config_hash() && !cfg_.force) {
        throw StageError("cached artifact for stage '" + std::string(stage_name(s)) +
                         "' was produced with a different config; rerun with force");
      }
    }
    switch (s) {
      case Stage::Extract: stage_extract(); break;
      case Stage::Encode: stage_encode(); break;
      case Stage::Rank: stage_rank(); break;
      case Stage::Categorize: stage_categorize(); break;
      case Stage::Validate: stage_validate(); break;
      case Stage::Occlude: stage_occlude(); break;
      case Stage::Evaluate: stage_evaluate(); break;
    }
  }

  // Rehydrates in-memory state from a completed artifact where possible.
  // Returns false when the stage must rerun to rebuild state.
  bool reload_stage(Stage s, const nlohmann::json& art) {
    switch (s) {
      case Stage::Extract:
        return false;  // sessions are not cached; cheap to rebuild
      case Stage::Encode:
        matrix_ = read_feature_matrix(cfg_.out_dir + "/matrix");
        return true;
      case Stage::Rank: {
        if (!art.contains("report")) return false;
        ami_report_.records.clear();
        ami_report_.top_k = art["report"]["top_k"].get<std::size_t>();
        for (const auto& r : art["report"]["records"]) {
          AmiRecord rec;
          rec.field = r["field"];
          rec.entropy_feature = r["entropy_feature_nats"];
          rec.entropy_label = r["entropy_label_nats"];
          rec.mi = r["mi_nats"];
          rec.expected_mi = r["expected_mi_nats"];
          rec.ami = r["ami"];
          rec.n_valid = r["n_valid"];
          rec.discretized = r["discretized"];
          rec.shortcut_candidate = r["shortcut_candidate"];
          ami_report_.records.push_back(std::move(rec));
        }
        return true;
      }
      default:
        return false;
    }
  }

  void ensure_matrix() {
    if (matrix_.rows() != 0) return;
    try {
      matrix_ = read_feature_matrix(cfg_.out_dir + "/matrix");
    } catch (const ConfigError&) {
      throw StageError("missing dependency: stage 'encode' has not produced a matrix");
    }
  }

  void require(bool ok, const std::string& missing_stage) {
    if (!ok)
      throw StageError("missing dependency: stage '" + missing_stage +
                       "' must run first");
  }

  static std::string flow_label_key(const FlowKey& key) {
    auto ip_str = [](std::uint32_t ip) {
      return std::to_string(ip >> 24) + "." + std::to_string((ip >> 16) & 0xff) +
             "." + std::to_string((ip >> 8) & 0xff) + "." + std::to_string(ip & 0xff);
    };
    return ip_str(key.endpoint_a.ip) + ":" + std::to_string(key.endpoint_a.port) +
           "-" + ip_str(key.endpoint_b.ip) + ":" + std::to_string(key.endpoint_b.port) +
           "-" + (key.transport == Transport::TCP ? "tcp" : "udp");
  }

  // flow,label CSV; flow key is "ipA:portA-ipB:portB-proto" canonical order
  static std::map<std::string, std::string> load_flow_labels(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open flow label file: " + path);
    std::map<std::string, std::string> out;
    std::string line;
    while (std::getline(in, line)) {
      std::size_t comma = line.find(',');
      if (comma == std::string::npos) continue;
      out[line.substr(0, comma)] = line.substr(comma + 1);
    }
    return out;
  }

  nlohmann::json stamp() const {
    nlohmann::json j;
    j["config_hash"] = cfg_.config_hash();
    j["seed"] = cfg_.seed;
    j["tool_version"] = kToolVersion;
    return j;
  }

  void write_artifact(const std::string& stage, const nlohmann::json& art) {
    std::ofstream out(cfg_.out_dir + "/" + stage + ".json");
    out << art.dump(2) << '\n';
  }

  void write_summary(const std::set<Stage>& stages) {
    nlohmann::json j = stamp();
    j["stages"] = nlohmann::json::array();
    for (Stage s : {Stage::Extract, Stage::Encode, Stage::Rank, Stage::Categorize,
                    Stage::Validate, Stage::Occlude, Stage::Evaluate})
      if (stages.count(s)) j["stages"].push_back(stage_name(s));
    std::ofstream out(cfg_.out_dir + "/summary.json");
    out << j.dump(2) << '\n';
  }

  PipelineConfig cfg_;
  std::vector<Session> sessions_;
  std::vector<std::vector<PacketRecord>> session_records_;
  std::vector<FieldSchema> schemas_;
  DomainDict dict_;
  FeatureMatrix matrix_;
  AmiReport ami_report_;
  CategorizedReport categorized_;
  std::vector<SessionTensor> tensors_;
  std::vector<SessionTensor> occluded_;
};

}  // namespace netaudit
