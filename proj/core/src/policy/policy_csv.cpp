#include "cfpt/policy/policy_csv.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <vector>

#include "cfpt/errors.hpp"
#include "cfpt/sim/patient.hpp"

namespace cfpt::policy {

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

std::string column_name(std::size_t a, std::size_t num_actions) {
  return num_actions == sim::kNumActions ? sim::action_name(a) : "a" + std::to_string(a);
}

}  // namespace

void write_policy_csv(std::ostream& out, const StochasticPolicy& pi) {
  out << (pi.domain() == PolicyDomain::full_state ? "state" : "obs");
  for (std::size_t a = 0; a < pi.num_actions(); ++a) out << ',' << column_name(a, pi.num_actions());
  out << '\n';
  char buf[32];
  for (std::size_t r = 0; r < pi.num_rows(); ++r) {
    out << r;
    for (double p : pi.row(r)) {
      std::snprintf(buf, sizeof buf, "%.17g", p);
      out << ',' << buf;
    }
    out << '\n';
  }
}

StochasticPolicy read_policy_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::io, "policy CSV is empty");
  const auto header = split(line);
  if (header.size() < 2 || (header[0] != "obs" && header[0] != "state")) {
    throw Error(ErrorCode::io, "policy CSV header must start with obs or state");
  }
  const auto domain = header[0] == "state" ? PolicyDomain::full_state : PolicyDomain::observation;
  const std::size_t na = header.size() - 1;
  std::vector<double> probs;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() != na + 1 || cells[0] != std::to_string(rows)) {
      throw Error(ErrorCode::io, "malformed policy CSV row " + std::to_string(rows));
    }
    for (std::size_t a = 1; a <= na; ++a) {
      double p = 0.0;
      const auto& c = cells[a];
      auto [ptr, ec] = std::from_chars(c.data(), c.data() + c.size(), p);
      if (ec != std::errc{} || ptr != c.data() + c.size()) {
        throw Error(ErrorCode::io, "bad probability '" + c + "' in policy CSV row " + std::to_string(rows));
      }
      probs.push_back(p);
    }
    ++rows;
  }
  if (rows == 0) throw Error(ErrorCode::io, "policy CSV has no rows");
  try {
    return StochasticPolicy::from_matrix(rows, na, std::move(probs), domain);
  } catch (const Error& e) {
    throw Error(ErrorCode::io, std::string("policy CSV: ") + e.what());
  }
}

void save_policy_csv(const std::string& path, const StochasticPolicy& pi) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::io, "cannot open " + path + " for writing");
  write_policy_csv(out, pi);
  if (!out) throw Error(ErrorCode::io, "failed writing " + path);
}

StochasticPolicy load_policy_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io, "cannot open " + path);
  return read_policy_csv(in);
}

}  // namespace cfpt::policy
