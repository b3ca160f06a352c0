#include "dqjl/scenario.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <numeric>
#include <string>

#include "dqjl/errors.hpp"

namespace dqjl {
namespace {

constexpr int kDatasetVersion = 1;
constexpr int kMaxPlacementAttempts = 200;
constexpr double kPlacementMargin = 2.0;  // initial clearance is d + this

using nlohmann::json;

json road_to_json(const RoadConfig& road) {
  return json{{"segment_length", road.segment_length},
              {"min_gap", road.min_gap},
              {"dt", road.dt},
              {"hv_reaction_distance", road.hv_reaction_distance},
              {"v0_non_emv", road.v0_non_emv},
              {"v0_emv", road.v0_emv},
              {"vmax_emv", road.vmax_emv},
              {"vmax_non_emv", road.vmax_non_emv},
              {"max_steps", road.max_steps}};
}

RoadConfig road_from_json(const json& j) {
  RoadConfig road;
  road.segment_length = j.at("segment_length").get<double>();
  road.min_gap = j.at("min_gap").get<double>();
  road.dt = j.at("dt").get<double>();
  road.hv_reaction_distance = j.at("hv_reaction_distance").get<double>();
  road.v0_non_emv = j.at("v0_non_emv").get<double>();
  road.v0_emv = j.at("v0_emv").get<double>();
  road.vmax_emv = j.at("vmax_emv").get<double>();
  road.vmax_non_emv = j.at("vmax_non_emv").get<double>();
  road.max_steps = j.at("max_steps").get<int>();
  return road;
}

std::string kind_label(VehicleKind kind) {
  switch (kind) {
    case VehicleKind::Cv: return "CV";
    case VehicleKind::Hv: return "HV";
    case VehicleKind::Emv: return "EMV";
    case VehicleKind::Trivial: return "TRIVIAL";
  }
  return "?";
}

VehicleKind kind_from_label(const std::string& label) {
  if (label == "CV") return VehicleKind::Cv;
  if (label == "HV") return VehicleKind::Hv;
  throw parse_error("unknown vehicle kind '" + label + "'");
}

}  // namespace

ScenarioSpec generate_scenario(int n_real, double penetration,
                               const RoadConfig& road, std::uint64_t seed) {
  if (n_real < 0) throw contract_error("n_real must be >= 0");
  if (penetration < 0.0 || penetration > 1.0) {
    throw contract_error("penetration must lie in [0, 1]");
  }
  road.validate();

  Rng kin = sub_rng(seed, stream::kKinematics);
  std::uniform_real_distribution<double> x_dist(0.0, road.segment_length);
  std::uniform_int_distribution<int> lane_dist(0, 1);

  ScenarioSpec spec;
  spec.seed = seed;
  spec.n_real = n_real;
  spec.penetration = penetration;
  spec.road = road;
  spec.vehicles.reserve(static_cast<std::size_t>(n_real));

  double clearance = road.min_gap + kPlacementMargin;
  for (int i = 0; i < n_real; ++i) {
    VehicleSpec veh;
    veh.length = truncated_normal(4.5, 1.0, 2.5, 8.0, kin);
    veh.b_star = truncated_normal(2.0, 1.0, 0.5, 4.0, kin);
    veh.reaction_time = truncated_normal(2.25, 0.5, 0.5, 4.0, kin);

    bool placed = false;
    for (int attempt = 0; attempt < kMaxPlacementAttempts; ++attempt) {
      int lane = lane_dist(kin);
      double x = x_dist(kin);
      bool ok = true;
      if (lane == 0 && x - veh.length < clearance) ok = false;  // EMV enters at 0
      for (const VehicleSpec& other : spec.vehicles) {
        if (!ok) break;
        if (other.lane0 != lane) continue;
        double gap = x < other.x0 ? other.x0 - other.length - x
                                  : x - veh.length - other.x0;
        if (gap < clearance) ok = false;
      }
      if (ok) {
        veh.lane0 = lane;
        veh.x0 = x;
        placed = true;
        break;
      }
    }
    if (!placed) {
      throw capacity_error("could not place vehicle " + std::to_string(i) +
                           " without violating clearance; density too high");
    }
    spec.vehicles.push_back(veh);
  }

  // CV labels drawn from their own stream; kinematics stay untouched when
  // only the penetration changes.
  Rng kind_rng = sub_rng(seed, stream::kKind);
  int n_cv = static_cast<int>(std::llround(penetration * n_real));
  std::vector<int> order(static_cast<std::size_t>(n_real));
  std::iota(order.begin(), order.end(), 0);
  for (int k = 0; k < n_cv; ++k) {
    std::uniform_int_distribution<int> pick(k, n_real - 1);
    std::swap(order[static_cast<std::size_t>(k)],
              order[static_cast<std::size_t>(pick(kind_rng))]);
  }
  for (VehicleSpec& veh : spec.vehicles) veh.kind = VehicleKind::Hv;
  for (int k = 0; k < n_cv; ++k) {
    spec.vehicles[static_cast<std::size_t>(order[static_cast<std::size_t>(k)])]
        .kind = VehicleKind::Cv;
  }
  return spec;
}

WorldState build_world(const ScenarioSpec& spec, int agent_slots,
                       const IdmParams& idm, const BehaviorParams& behavior) {
  if (spec.n_real > agent_slots) {
    throw capacity_error("scenario has " + std::to_string(spec.n_real) +
                         " vehicles but only " + std::to_string(agent_slots) +
                         " agent slots");
  }
  if (spec.vehicles.size() != static_cast<std::size_t>(spec.n_real)) {
    throw contract_error("scenario vehicle count does not match n_real");
  }
  spec.road.validate();
  idm.validate();
  behavior.validate(spec.road.dt);

  WorldState world;
  world.road = spec.road;
  world.idm = idm;
  world.behavior = behavior;
  world.emv.x = 0.0;
  world.emv.y = 0;
  world.emv.v = spec.road.v0_emv;
  world.emv.length = kEmvLength;
  world.emv.b_star = kEmvBaselineDecel;
  world.emv.kind = VehicleKind::Emv;

  world.non_emvs.reserve(static_cast<std::size_t>(agent_slots));
  for (const VehicleSpec& vs : spec.vehicles) {
    Vehicle veh;
    veh.x = vs.x0;
    veh.y = vs.lane0;
    veh.v = spec.road.v0_non_emv;
    veh.length = vs.length;
    veh.b_star = vs.b_star;
    veh.kind = vs.kind;
    veh.reaction_steps_left =
        static_cast<int>(std::lround(vs.reaction_time / spec.road.dt));
    world.non_emvs.push_back(veh);
  }
  world.non_emvs.resize(static_cast<std::size_t>(agent_slots));  // trivial padding
  world.coop_decel_for.assign(static_cast<std::size_t>(agent_slots), -1);
  world.rng = sub_rng(spec.seed, stream::kWorld);
  return world;
}

void save_dataset(const std::vector<ScenarioSpec>& specs,
                  const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot open " + path.string() + " for writing");
  out << json{{"format", "dqjl-dataset"}, {"version", kDatasetVersion}}.dump()
      << '\n';
  for (const ScenarioSpec& spec : specs) {
    json record{{"seed", spec.seed},
                {"n_real", spec.n_real},
                {"penetration", spec.penetration},
                {"road", road_to_json(spec.road)},
                {"vehicles", json::array()}};
    for (const VehicleSpec& veh : spec.vehicles) {
      record["vehicles"].push_back(json{{"x0", veh.x0},
                                        {"lane0", veh.lane0},
                                        {"length", veh.length},
                                        {"b_star", veh.b_star},
                                        {"kind", kind_label(veh.kind)},
                                        {"t_r", veh.reaction_time}});
    }
    out << record.dump() << '\n';
  }
  if (!out) throw io_error("write failure on " + path.string());
}

std::vector<ScenarioSpec> load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw parse_error("line 1: missing dataset header");
  json header;
  try {
    header = json::parse(line);
  } catch (const json::exception& e) {
    throw parse_error(std::string("line 1: ") + e.what());
  }
  if (header.value("format", "") != "dqjl-dataset") {
    throw parse_error("line 1: not a dqjl-dataset file");
  }
  if (header.value("version", -1) != kDatasetVersion) {
    throw version_error("unsupported dataset version " +
                        header.value("version", json{}).dump());
  }

  std::vector<ScenarioSpec> specs;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::string where = "line " + std::to_string(line_no) + " (record " +
                        std::to_string(specs.size()) + ")";
    try {
      json record = json::parse(line);
      ScenarioSpec spec;
      spec.seed = record.at("seed").get<std::uint64_t>();
      spec.n_real = record.at("n_real").get<int>();
      spec.penetration = record.at("penetration").get<double>();
      spec.road = road_from_json(record.at("road"));
      for (const json& vj : record.at("vehicles")) {
        VehicleSpec veh;
        veh.x0 = vj.at("x0").get<double>();
        veh.lane0 = vj.at("lane0").get<int>();
        veh.length = vj.at("length").get<double>();
        veh.b_star = vj.at("b_star").get<double>();
        veh.kind = kind_from_label(vj.at("kind").get<std::string>());
        veh.reaction_time = vj.at("t_r").get<double>();
        spec.vehicles.push_back(veh);
      }
      if (spec.vehicles.size() != static_cast<std::size_t>(spec.n_real)) {
        throw parse_error(where + ": vehicle count mismatch");
      }
      specs.push_back(std::move(spec));
    } catch (const parse_error&) {
      throw;
    } catch (const std::exception& e) {
      throw parse_error(where + ": " + e.what());
    }
  }
  return specs;
}

}  // namespace dqjl
