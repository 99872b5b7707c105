#include "cfpt/transfer/estimate.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <tuple>

#include "cfpt/errors.hpp"
#include "cfpt/sim/patient.hpp"

namespace cfpt::transfer {

EstimatedModel estimate_transitions(const sim::Dataset& data, StateSpace space) {
  if (data.empty()) throw Error(ErrorCode::empty_dataset, "cannot estimate transitions from an empty dataset");
  const bool full = space == StateSpace::full_state;
  const std::size_t ns = full ? sim::kNumStates : sim::kNumObservations;
  const std::size_t na = sim::kNumActions;

  // Successor counts per row, kept as sorted (next, count) vectors.
  std::vector<std::map<std::uint32_t, std::uint32_t>> tallies(ns * na);
  EstimatedModel est;
  est.counts.assign(ns * na, 0);
  for (const auto& traj : data.trajectories) {
    for (std::size_t t = 0; t + 1 < traj.steps.size(); ++t) {
      const auto& cur = traj.steps[t];
      const std::uint32_t s = full ? cur.state : cur.obs;
      const std::uint32_t next = full ? traj.steps[t + 1].state : traj.steps[t + 1].obs;
      const std::size_t idx = static_cast<std::size_t>(s) * na + cur.action;
      ++tallies[idx][next];
      ++est.counts[idx];
    }
  }

  est.transitions = TransitionModel(ns, na);
  for (std::size_t idx = 0; idx < tallies.size(); ++idx) {
    if (est.counts[idx] == 0) continue;
    SparseRow row;
    const double total = est.counts[idx];
    for (const auto& [next, c] : tallies[idx]) {
      row.next.push_back(next);
      row.prob.push_back(c / total);
    }
    est.transitions.set_row(idx / na, idx % na, std::move(row));
  }
  return est;
}

TransitionModel augment_transitions(const TransitionModel& p_target, const TransitionModel& p_hat, double eta) {
  if (!(eta >= 0.0 && eta <= 1.0)) throw Error(ErrorCode::invalid_argument, "eta must lie in [0,1]");
  if (p_target.num_states() != p_hat.num_states() || p_target.num_actions() != p_hat.num_actions()) {
    throw Error(ErrorCode::invalid_argument, "augmented models differ in shape");
  }
  TransitionModel out(p_target.num_states(), p_target.num_actions());
  for (std::size_t s = 0; s < out.num_states(); ++s) {
    for (std::size_t a = 0; a < out.num_actions(); ++a) {
      const bool in_t = p_target.supported(s, a);
      const bool in_h = p_hat.supported(s, a);
      if (!in_t && !in_h) continue;
      // A weight of exactly 0 or 1 hands the row over untouched, so the
      // endpoints reproduce their input bit for bit.
      if (!in_h || (in_t && eta == 1.0)) {
        out.set_row(s, a, p_target.row(s, a));
        continue;
      }
      if (!in_t || eta == 0.0) {
        out.set_row(s, a, p_hat.row(s, a));
        continue;
      }
      const SparseRow& x = p_target.row(s, a);
      const SparseRow& y = p_hat.row(s, a);
      SparseRow row;
      std::size_t i = 0, j = 0;
      while (i < x.size() || j < y.size()) {
        const std::uint32_t nx = i < x.size() ? x.next[i] : UINT32_MAX;
        const std::uint32_t ny = j < y.size() ? y.next[j] : UINT32_MAX;
        const std::uint32_t n = std::min(nx, ny);
        double p = 0.0;
        if (nx == n) p += eta * x.prob[i++];
        if (ny == n) p += (1.0 - eta) * y.prob[j++];
        row.next.push_back(n);
        row.prob.push_back(p);
      }
      const double z = row.total();
      for (double& p : row.prob) p /= z;
      out.set_row(s, a, std::move(row));
    }
  }
  return out;
}

void write_model_csv(std::ostream& out, const TransitionModel& model) {
  out << "obs,action,next_obs,prob\n";
  out.precision(17);
  for (std::size_t s = 0; s < model.num_states(); ++s) {
    for (std::size_t a = 0; a < model.num_actions(); ++a) {
      if (!model.supported(s, a)) continue;
      const SparseRow& row = model.row(s, a);
      for (std::size_t i = 0; i < row.size(); ++i) {
        out << s << ',' << a << ',' << row.next[i] << ',' << row.prob[i] << '\n';
      }
    }
  }
}

TransitionModel read_model_csv(std::istream& in, std::size_t num_states, std::size_t num_actions) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("obs,action,next_obs,prob", 0) != 0) {
    throw Error(ErrorCode::io, "model CSV is missing its header");
  }
  std::map<std::pair<std::size_t, std::size_t>, SparseRow> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::size_t s = 0, a = 0, n = 0;
    double p = 0.0;
    char c1 = 0, c2 = 0, c3 = 0;
    if (!(ss >> s >> c1 >> a >> c2 >> n >> c3 >> p) || c1 != ',' || c2 != ',' || c3 != ',') {
      throw Error(ErrorCode::io, "malformed model CSV line " + std::to_string(lineno));
    }
    if (s >= num_states || a >= num_actions || n >= num_states) {
      throw Error(ErrorCode::io, "model CSV index out of range on line " + std::to_string(lineno));
    }
    auto& row = rows[{s, a}];
    row.next.push_back(static_cast<std::uint32_t>(n));
    row.prob.push_back(p);
  }
  TransitionModel model(num_states, num_actions);
  for (auto& [key, row] : rows) {
    try {
      model.set_row(key.first, key.second, std::move(row));
    } catch (const Error& e) {
      throw Error(ErrorCode::io, std::string("model CSV: ") + e.what());
    }
  }
  return model;
}

void save_model_csv(const std::string& path, const TransitionModel& model) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::io, "cannot open " + path + " for writing");
  write_model_csv(out, model);
  if (!out) throw Error(ErrorCode::io, "failed writing " + path);
}

}  // namespace cfpt::transfer
