#include "cfpt/sim/trajectory.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>

#include <json.hpp>

#include "cfpt/errors.hpp"

namespace cfpt::sim {

using nlohmann::json;

double Trajectory::total_reward() const {
  double sum = 0.0;
  for (const auto& s : steps) sum += s.reward;
  return sum;
}

double Trajectory::discounted_return(double gamma) const {
  double sum = 0.0;
  double discount = 1.0;
  for (const auto& s : steps) {
    sum += discount * s.reward;
    discount *= gamma;
  }
  return sum;
}

double Dataset::diabetic_fraction() const {
  if (trajectories.empty()) return 0.0;
  std::size_t n = 0;
  for (const auto& t : trajectories) n += t.diabetic ? 1 : 0;
  return static_cast<double>(n) / static_cast<double>(trajectories.size());
}

double Dataset::mean_return() const {
  if (trajectories.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& t : trajectories) sum += t.total_reward();
  return sum / static_cast<double>(trajectories.size());
}

Dataset concatenate(const Dataset& a, const Dataset& b) {
  Dataset out = a;
  std::uint64_t next_id = 0;
  for (const auto& t : a.trajectories) next_id = std::max(next_id, t.id + 1);
  for (auto t : b.trajectories) {
    t.id = next_id++;
    out.trajectories.push_back(std::move(t));
  }
  return out;
}

namespace {

json reward_json(double r) {
  // Rewards are integral in this simulator; keep them as integers on disk.
  if (r == std::round(r) && std::abs(r) < 1e15) return static_cast<long long>(r);
  return r;
}

}  // namespace

void write_dataset(std::ostream& out, const Dataset& data) {
  out << json{{"format", "cfpt-trajectories"}, {"version", kDatasetFormatVersion}, {"count", data.size()}}.dump()
      << '\n';
  for (const auto& t : data.trajectories) {
    json steps = json::array();
    for (const auto& s : t.steps) {
      steps.push_back(json{{"state", s.state}, {"obs", s.obs}, {"action", s.action}, {"reward", reward_json(s.reward)}});
    }
    out << json{{"id", t.id}, {"diabetic", t.diabetic ? 1 : 0}, {"steps", std::move(steps)}, {"outcome", to_string(t.outcome)}}
               .dump()
        << '\n';
  }
}

Dataset read_dataset(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::io, "dataset stream is empty");
  try {
    const json header = json::parse(line);
    if (header.value("format", "") != "cfpt-trajectories") throw Error(ErrorCode::io, "not a trajectory file");
    if (header.value("version", 0) != kDatasetFormatVersion) {
      throw Error(ErrorCode::io, "unsupported dataset version " + header.value("version", json(0)).dump());
    }
    Dataset data;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const json rec = json::parse(line);
      Trajectory t;
      t.id = rec.at("id").get<std::uint64_t>();
      t.diabetic = rec.at("diabetic").get<int>() != 0;
      for (const auto& s : rec.at("steps")) {
        Step step;
        step.state = s.at("state").get<std::uint32_t>();
        step.obs = s.at("obs").get<std::uint32_t>();
        step.action = static_cast<std::uint8_t>(s.at("action").get<unsigned>());
        step.reward = s.at("reward").get<double>();
        if (step.state >= kNumStates || step.obs >= kNumObservations || step.action >= kNumActions) {
          throw Error(ErrorCode::io, "trajectory " + std::to_string(t.id) + " has an out-of-range index");
        }
        t.steps.push_back(step);
      }
      const auto outcome = parse_outcome(rec.at("outcome").get<std::string>());
      if (!outcome) throw Error(ErrorCode::io, "unknown outcome in trajectory " + std::to_string(t.id));
      t.outcome = *outcome;
      data.trajectories.push_back(std::move(t));
    }
    return data;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::io, std::string("malformed dataset: ") + e.what());
  }
}

void save_dataset(const std::string& path, const Dataset& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::io, "cannot write " + path);
  write_dataset(out, data);
  if (!out) throw Error(ErrorCode::io, "failed writing " + path);
}

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io, "cannot open " + path);
  return read_dataset(in);
}

}  // namespace cfpt::sim
