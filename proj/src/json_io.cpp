#include "json_io.hpp"

#include <fstream>
#include <sstream>

#include "cdqac/errors.hpp"

namespace cdqac {

const Json& require(const Json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) throw ParseError(0, std::string("missing key '") + key + "'");
  return j.at(key);
}

Json to_json(const NormStats& s) {
  return Json{{"op_mean", s.op_mean},     {"op_std", s.op_std},     {"mach_mean", s.mach_mean},
              {"mach_std", s.mach_std},   {"pair_mean", s.pair_mean}, {"pair_std", s.pair_std}};
}

NormStats norm_from_json(const Json& j) {
  NormStats s;
  require(j, "op_mean").get_to(s.op_mean);
  require(j, "op_std").get_to(s.op_std);
  require(j, "mach_mean").get_to(s.mach_mean);
  require(j, "mach_std").get_to(s.mach_std);
  require(j, "pair_mean").get_to(s.pair_mean);
  require(j, "pair_std").get_to(s.pair_std);
  return s;
}

Json to_json(const FeatureFrame& f) {
  Json ids = Json::array();
  for (const auto& r : f.op_ids) ids.push_back({r.job, r.pos});
  Json pairs = Json::array();
  for (const auto& [o, k] : f.pair_index) pairs.push_back({o, k});
  return Json{{"n", f.num_ops},       {"m", f.num_machines},       {"p", f.num_pairs},
              {"op", f.op_feats},     {"mach", f.mach_feats},      {"pair", f.pair_feats},
              {"ids", ids},           {"pending", f.op_pending},   {"compat", f.compat},
              {"pairs", pairs}};
}

FeatureFrame frame_from_json(const Json& j) {
  FeatureFrame f;
  f.num_ops = require(j, "n").get<int>();
  f.num_machines = require(j, "m").get<int>();
  f.num_pairs = require(j, "p").get<int>();
  require(j, "op").get_to(f.op_feats);
  require(j, "mach").get_to(f.mach_feats);
  require(j, "pair").get_to(f.pair_feats);
  for (const auto& r : require(j, "ids")) f.op_ids.push_back({r.at(0).get<int>(), r.at(1).get<int>()});
  require(j, "pending").get_to(f.op_pending);
  require(j, "compat").get_to(f.compat);
  for (const auto& r : require(j, "pairs")) f.pair_index.emplace_back(r.at(0).get<int>(), r.at(1).get<int>());
  if (f.op_feats.size() != static_cast<std::size_t>(f.num_ops * kOpFeatures) ||
      f.mach_feats.size() != static_cast<std::size_t>(f.num_machines * kMachineFeatures) ||
      f.pair_feats.size() != static_cast<std::size_t>(f.num_pairs * kPairFeatures) ||
      f.op_ids.size() != static_cast<std::size_t>(f.num_ops) ||
      f.pair_index.size() != static_cast<std::size_t>(f.num_pairs)) {
    throw ParseError(0, "feature frame sizes disagree with its header");
  }
  return f;
}

Json to_json(const ScheduleTrace& t) {
  Json out = Json::array();
  for (const auto& s : t.steps) out.push_back({s.action.op.job, s.action.op.pos, s.action.machine, s.start, s.end});
  return out;
}

ScheduleTrace trace_from_json(const Json& j) {
  ScheduleTrace t;
  for (const auto& r : j) {
    if (!r.is_array() || r.size() != 5) throw ParseError(0, "trace entries need 5 integers");
    t.steps.push_back({{{r[0].get<int>(), r[1].get<int>()}, r[2].get<int>()}, r[3].get<int>(), r[4].get<int>()});
  }
  return t;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace cdqac
