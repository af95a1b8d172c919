#pragma once

// Run configuration: INI-style sections of key = value pairs.
//
//   schema_version = 1
//   [crystal_field]
//   b20 = -0.266
//   ...
//
// Unknown sections or keys are errors. Every section and key is optional
// except schema_version; omitted values keep the defaults below.

#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "cfhf/dataset.hpp"
#include "cfhf/least_squares.hpp"
#include "cfhf/spectra.hpp"

namespace cfhf {

inline constexpr int kConfigSchemaVersion = 1;

struct GridSpec {
  double min = 0.0;
  double max = 0.0;
  int points = 0;
  bool automatic() const { return points == 0; }
};

struct RunConfig {
  int schema_version = kConfigSchemaVersion;
  SpinSystem system = SpinSystem::holmium();
  double g_j = kLandeGHolmium;
  CFParameters cf = CFParameters::lithium_yttrium_fluoride();
  HyperfineConstants hf = HyperfineConstants::holmium();

  double temperature = 9.0;  // K
  std::vector<std::pair<int, int>> transitions{{1, 2}};
  PeakModel peak{PeakShape::Gaussian, 0.0, 0.017, 1.0};
  IntensityModel intensity = IntensityModel::Unit;
  GridSpec grid;  // points = 0: span the lines +- 10 fwhm at 0.001 cm^-1

  IsotopeConfig isotope;

  std::pair<int, int> hf_transition{1, 2};

  LeastSquaresOptions fit;
  std::vector<std::string> free_parameters{"b20", "b40", "b44", "b60", "b64", "b6m4", "a_j"};
  double initial_b = 0.02;
  double refractive_a = -10.0;
  double refractive_nu0 = 100.0;
  double refractive_c = 2.5;

  std::string source = "<defaults>";
};

namespace detail {

// Finds the line of `key` inside `section` ("" = before any header).
inline int locate_key(const std::string& text, const std::string& section, const std::string& key) {
  std::istringstream in(text);
  std::string line;
  std::string current;
  int no = 0;
  while (std::getline(in, line)) {
    ++no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == ';' || t[0] == '#') continue;
    if (t.front() == '[' && t.back() == ']') {
      current = trim(std::string_view(t).substr(1, t.size() - 2));
      if (key.empty() && current == section) return no;
      continue;
    }
    const auto eq = t.find('=');
    if (eq != std::string::npos && current == section && trim(std::string_view(t).substr(0, eq)) == key) return no;
  }
  return 0;
}

class ConfigReader {
 public:
  ConfigReader(std::string text, std::string source) : text_(std::move(text)), source_(std::move(source)) {
    // read_ini only knows ';' comments; blank out '#' lines so line numbers hold.
    std::istringstream lines(text_);
    std::string cleaned, line;
    while (std::getline(lines, line)) {
      const std::string t = trim(line);
      cleaned += (!t.empty() && t[0] == '#') ? std::string{} : line;
      cleaned += '\n';
    }
    std::istringstream in(cleaned);
    try {
      boost::property_tree::ini_parser::read_ini(in, tree_);
    } catch (const boost::property_tree::ini_parser_error& e) {
      throw ParseError(source_, static_cast<int>(e.line()), e.message());
    }
  }

  [[noreturn]] void fail(const std::string& section, const std::string& key, const std::string& what) const {
    const std::string field = section.empty() ? key : section + "." + key;
    throw ParseError(source_, locate_key(text_, section, key), field + ": " + what);
  }

  // Rejects anything not listed in `schema`.
  void check_known(const std::map<std::string, std::set<std::string>>& schema) const {
    // read_ini drops sections without keys, so headers are checked on the text.
    std::istringstream lines(text_);
    std::string line;
    for (int no = 1; std::getline(lines, line); ++no) {
      const std::string t = trim(line);
      if (t.size() < 2 || t.front() != '[' || t.back() != ']') continue;
      const std::string name = trim(std::string_view(t).substr(1, t.size() - 2));
      if (name.empty() || !schema.count(name)) throw ParseError(source_, no, "unknown section [" + name + "]");
    }
    for (const auto& [name, node] : tree_) {
      // An empty section and an empty-valued key look alike in the tree.
      if (node.empty() && (!node.data().empty() || locate_key(text_, name, "") == 0)) {
        if (!schema.at("").count(name)) fail("", name, "unknown key");
        continue;
      }
      const auto sec = schema.find(name);
      if (sec == schema.end() || name.empty()) {
        throw ParseError(source_, locate_key(text_, name, ""), "unknown section [" + name + "]");
      }
      for (const auto& [key, leaf] : node) {
        if (!sec->second.count(key)) fail(name, key, "unknown key");
      }
    }
  }

  std::optional<std::string> raw(const std::string& section, const std::string& key) const {
    const auto path = section.empty() ? boost::property_tree::ptree::path_type(key, '\x1f')
                                      : boost::property_tree::ptree::path_type(section + '\x1f' + key, '\x1f');
    if (auto v = tree_.get_optional<std::string>(path)) return trim(*v);
    return std::nullopt;
  }

  void number(const std::string& section, const std::string& key, double& out) const {
    if (auto v = raw(section, key)) {
      try {
        out = parse_double(*v, "value");
      } catch (const InvalidArgument&) {
        fail(section, key, "expected a number, got '" + *v + "'");
      }
    }
  }

  void integer(const std::string& section, const std::string& key, int& out) const {
    if (auto v = raw(section, key)) {
      std::size_t used = 0;
      try {
        out = std::stoi(*v, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used == 0 || used != v->size()) fail(section, key, "expected an integer, got '" + *v + "'");
    }
  }

  void boolean(const std::string& section, const std::string& key, bool& out) const {
    if (auto v = raw(section, key)) {
      if (*v == "true" || *v == "1" || *v == "yes") out = true;
      else if (*v == "false" || *v == "0" || *v == "no") out = false;
      else fail(section, key, "expected true or false, got '" + *v + "'");
    }
  }

  void half_integer(const std::string& section, const std::string& key, HalfInt& out) const {
    if (auto v = raw(section, key)) {
      try {
        out = parse_half_int(*v);
      } catch (const InvalidArgument& e) {
        fail(section, key, e.what());
      }
    }
  }

  std::optional<std::vector<std::string>> list(const std::string& section, const std::string& key) const {
    auto v = raw(section, key);
    if (!v) return std::nullopt;
    std::vector<std::string> out;
    if (v->empty()) return out;
    for (auto& item : split_csv(*v)) {
      if (item.empty()) fail(section, key, "empty list item");
      out.push_back(item);
    }
    return out;
  }

  const boost::property_tree::ptree& tree() const { return tree_; }

 private:
  std::string text_;
  std::string source_;
  boost::property_tree::ptree tree_;
};

}  // namespace detail

inline RunConfig parse_config(const std::string& text, const std::string& source = "<config>") {
  const detail::ConfigReader rd(text, source);
  rd.check_known({
      {"", {"schema_version"}},
      {"spin", {"j", "i", "g_j"}},
      {"crystal_field", {"b20", "b40", "b44", "b4m4", "b60", "b64", "b6m4"}},
      {"hyperfine", {"a_j", "b_quad"}},
      {"spectrum", {"temperature", "transitions", "shape", "fwhm", "amplitude", "intensity", "grid_min", "grid_max",
                    "grid_points"}},
      {"isotope", {"enabled", "splitting", "satellite_ratio"}},
      {"hf", {"transition"}},
      {"fit", {"max_iterations", "rel_chi2_tol", "step_tol", "jacobian_rel_step", "free", "initial_b"}},
      {"refractive", {"a", "nu0", "c"}},
  });

  RunConfig c;
  c.source = source;
  if (!rd.raw("", "schema_version")) throw ParseError(source, 0, "schema_version: missing");
  rd.integer("", "schema_version", c.schema_version);
  if (c.schema_version != kConfigSchemaVersion) {
    rd.fail("", "schema_version", "unsupported version " + std::to_string(c.schema_version) + " (expected " +
                                      std::to_string(kConfigSchemaVersion) + ")");
  }

  rd.half_integer("spin", "j", c.system.j);
  rd.half_integer("spin", "i", c.system.i);
  rd.number("spin", "g_j", c.g_j);
  try {
    c.system.validate();
  } catch (const InvalidArgument& e) {
    rd.fail("spin", "j", e.what());
  }

  for (std::size_t k = 0; k < CFParameters::count; ++k) {
    rd.number("crystal_field", std::string(CFParameters::names[k]), c.cf[k]);
  }
  rd.number("hyperfine", "a_j", c.hf.a_j);
  rd.number("hyperfine", "b_quad", c.hf.b_quad);

  rd.number("spectrum", "temperature", c.temperature);
  if (!(c.temperature > 0.0)) rd.fail("spectrum", "temperature", "must be positive");
  auto transition = [&](const std::string& sec, const std::string& key, const std::string& text) {
    try {
      return parse_transition(text);
    } catch (const InvalidArgument& e) {
      rd.fail(sec, key, e.what());
    }
  };
  if (auto l = rd.list("spectrum", "transitions")) {
    c.transitions.clear();
    for (const auto& t : *l) c.transitions.push_back(transition("spectrum", "transitions", t));
  }
  if (auto s = rd.raw("spectrum", "shape")) {
    if (*s == "gaussian") c.peak.shape = PeakShape::Gaussian;
    else if (*s == "lorentzian") c.peak.shape = PeakShape::Lorentzian;
    else rd.fail("spectrum", "shape", "expected gaussian or lorentzian, got '" + *s + "'");
  }
  rd.number("spectrum", "fwhm", c.peak.fwhm);
  if (!(c.peak.fwhm > 0.0)) rd.fail("spectrum", "fwhm", "must be positive");
  rd.number("spectrum", "amplitude", c.peak.amplitude);
  if (auto s = rd.raw("spectrum", "intensity")) {
    if (*s == "unit") c.intensity = IntensityModel::Unit;
    else if (*s == "jz") c.intensity = IntensityModel::JzSquared;
    else if (*s == "ladder") c.intensity = IntensityModel::LadderSquared;
    else rd.fail("spectrum", "intensity", "expected unit, jz or ladder, got '" + *s + "'");
  }
  rd.number("spectrum", "grid_min", c.grid.min);
  rd.number("spectrum", "grid_max", c.grid.max);
  rd.integer("spectrum", "grid_points", c.grid.points);
  if (!c.grid.automatic()) {
    if (c.grid.points < 2) rd.fail("spectrum", "grid_points", "must be >= 2 (or 0 for automatic)");
    if (!(c.grid.max > c.grid.min)) rd.fail("spectrum", "grid_max", "must exceed grid_min");
  }

  rd.boolean("isotope", "enabled", c.isotope.enabled);
  rd.number("isotope", "splitting", c.isotope.splitting);
  rd.number("isotope", "satellite_ratio", c.isotope.satellite_ratio);
  if (!(c.isotope.satellite_ratio >= 0.0)) rd.fail("isotope", "satellite_ratio", "must be >= 0");

  if (auto t = rd.raw("hf", "transition")) c.hf_transition = transition("hf", "transition", *t);

  rd.integer("fit", "max_iterations", c.fit.max_iterations);
  if (c.fit.max_iterations < 1) rd.fail("fit", "max_iterations", "must be >= 1");
  rd.number("fit", "rel_chi2_tol", c.fit.rel_chi2_tol);
  rd.number("fit", "step_tol", c.fit.step_tol);
  rd.number("fit", "jacobian_rel_step", c.fit.jacobian_rel_step);
  if (!(c.fit.jacobian_rel_step > 0.0)) rd.fail("fit", "jacobian_rel_step", "must be positive");
  if (auto l = rd.list("fit", "free")) {
    static const std::set<std::string> known{"b20", "b40", "b44", "b4m4", "b60", "b64", "b6m4", "a_j"};
    for (const auto& n : *l) {
      if (!known.count(n)) rd.fail("fit", "free", "unknown parameter '" + n + "'");
    }
    c.free_parameters = *l;
  }
  rd.number("fit", "initial_b", c.initial_b);

  rd.number("refractive", "a", c.refractive_a);
  rd.number("refractive", "nu0", c.refractive_nu0);
  rd.number("refractive", "c", c.refractive_c);
  return c;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path);
}

}  // namespace cfhf
