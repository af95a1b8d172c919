#pragma once

// Measured line lists and their CSV form.
//
//   transition,m_z,energy_cm1,sigma_cm1
//   8.1-8.2,-7/2,7.33,0.01       HF-resolved line
//   8.1-8.7,,190.9,0.5           HF-averaged centroid (empty m_z)
//   jz:8.6,,-3.59,0.05           <Jz> of the sigma=+1 member of a doublet
//
// Lines starting with '#' and blank lines are ignored. Extra columns are
// rejected.

#include <fstream>
#include <istream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "cfhf/spectra.hpp"

namespace cfhf {

struct MomentObservation {
  int level = 0;
  double jz = 0.0;
  double sigma = 0.0;
};

struct DatasetMetadata {
  std::string source;
  std::optional<double> temperature;
  std::optional<double> doping;
};

struct TransitionDataset {
  std::vector<TransitionLine> rows;
  std::vector<MomentObservation> moments;
  DatasetMetadata metadata;

  std::size_t observation_count() const { return rows.size() + moments.size(); }

  // Rows of one transition family, in file order.
  std::vector<TransitionLine> family(int n_init, int n_final) const {
    std::vector<TransitionLine> out;
    for (const auto& r : rows) {
      if (r.n_init == n_init && r.n_final == n_final && !r.hf_averaged) out.push_back(r);
    }
    return out;
  }

  void require_uncertainties() const {
    for (std::size_t k = 0; k < rows.size(); ++k) {
      if (!rows[k].uncertainty || !(*rows[k].uncertainty > 0.0)) {
        throw InvalidArgument("dataset row " + std::to_string(k + 1) + " has no positive uncertainty");
      }
    }
    for (const auto& m : moments) {
      if (!(m.sigma > 0.0)) throw InvalidArgument("moment observation needs a positive uncertainty");
    }
  }
};

namespace detail {

inline std::string trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return std::string(s);
}

inline std::vector<std::string> split_csv(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

inline double parse_double(const std::string& text, const std::string& field) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    throw InvalidArgument(field + ": expected a number, got '" + text + "'");
  }
  if (used != text.size()) throw InvalidArgument(field + ": expected a number, got '" + text + "'");
  return v;
}

// "8.3" -> 3. The multiplet prefix is accepted but not interpreted.
inline int parse_level(std::string_view text) {
  const auto dot = text.rfind('.');
  const std::string idx(dot == std::string_view::npos ? text : text.substr(dot + 1));
  std::size_t used = 0;
  int n = 0;
  try {
    n = std::stoi(idx, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != idx.size() || n < 1) {
    throw InvalidArgument("malformed level label '" + std::string(text) + "'");
  }
  return n;
}

}  // namespace detail

// "8.1-8.2" -> (1, 2).
inline std::pair<int, int> parse_transition(std::string_view text) {
  const auto dash = text.find('-');
  if (dash == std::string_view::npos) {
    throw InvalidArgument("transition must look like '8.1-8.2', got '" + std::string(text) + "'");
  }
  return {detail::parse_level(detail::trim(text.substr(0, dash))),
          detail::parse_level(detail::trim(text.substr(dash + 1)))};
}

inline TransitionDataset parse_dataset_csv(std::istream& in, const std::string& source = "<dataset>") {
  TransitionDataset ds;
  ds.metadata.source = source;
  std::string line;
  int line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = detail::trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto cells = detail::split_csv(t);
    if (!header_seen) {
      if (cells != std::vector<std::string>{"transition", "m_z", "energy_cm1", "sigma_cm1"}) {
        throw ParseError(source, line_no, "expected header 'transition,m_z,energy_cm1,sigma_cm1'");
      }
      header_seen = true;
      continue;
    }
    if (cells.size() != 4) {
      throw ParseError(source, line_no, "expected 4 columns, found " + std::to_string(cells.size()));
    }
    try {
      const double value = detail::parse_double(cells[2], "energy_cm1");
      std::optional<double> sigma;
      if (!cells[3].empty()) sigma = detail::parse_double(cells[3], "sigma_cm1");
      if (cells[0].rfind("jz:", 0) == 0) {
        if (!cells[1].empty()) throw InvalidArgument("moment rows take no m_z");
        ds.moments.push_back({detail::parse_level(cells[0].substr(3)), value, sigma.value_or(0.0)});
        continue;
      }
      TransitionLine row;
      std::tie(row.n_init, row.n_final) = parse_transition(cells[0]);
      row.energy = value;
      row.uncertainty = sigma;
      if (cells[1].empty()) {
        row.hf_averaged = true;
      } else {
        row.m_z = parse_half_int(cells[1]);
      }
      ds.rows.push_back(row);
    } catch (const InvalidArgument& e) {
      throw ParseError(source, line_no, e.what());
    }
  }
  if (!header_seen) throw ParseError(source, 0, "missing header");
  return ds;
}

inline TransitionDataset load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open dataset '" + path + "'");
  return parse_dataset_csv(in, path);
}

inline void write_dataset_csv(std::ostream& out, const TransitionDataset& ds) {
  out << "transition,m_z,energy_cm1,sigma_cm1\n";
  out.precision(10);
  for (const auto& r : ds.rows) {
    out << "8." << r.n_init << "-8." << r.n_final << ',' << (r.hf_averaged ? std::string{} : r.m_z.str())
        << ',' << r.energy << ',';
    if (r.uncertainty) out << *r.uncertainty;
    out << '\n';
  }
  for (const auto& m : ds.moments) out << "jz:8." << m.level << ",," << m.jz << ',' << m.sigma << '\n';
}

}  // namespace cfhf
