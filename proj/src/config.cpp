#include "carbsim/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "carbsim/constitutive.hpp"

namespace carbsim {

namespace {

struct Entry {
  std::string key;
  std::string value;
  int line;
  bool used = false;
};

struct Section {
  std::string name;
  int line = 0;
  std::vector<Entry> entries;
};

const std::set<std::string> kSingleSections{"run", "material", "mesh", "initial", "solver", "time"};
const std::set<std::string> kListSections{"circle", "rectangle", "layer", "crack", "bc", "probe"};

const std::vector<std::pair<const char*, double MaterialParams::*>> kMaterialKeys{
    {"alpha", &MaterialParams::alpha},
    {"beta", &MaterialParams::beta},
    {"perm_const_C", &MaterialParams::perm_const_C},
    {"eta", &MaterialParams::eta},
    {"rho_s", &MaterialParams::rho_s},
    {"rho_l", &MaterialParams::rho_l},
    {"M_l", &MaterialParams::M_l},
    {"R_gas", &MaterialParams::R_gas},
    {"T", &MaterialParams::T},
    {"theta_0", &MaterialParams::theta_0},
    {"theta_c", &MaterialParams::theta_c},
    {"henry_H", &MaterialParams::henry_H},
    {"k_n", &MaterialParams::k_n},
    {"c_OH_eq", &MaterialParams::c_OH_eq},
    {"c_CaOH2_0", &MaterialParams::c_CaOH2_0},
    {"i_max", &MaterialParams::i_max},
    {"k_fit", &MaterialParams::k_fit},
    {"theta_crit", &MaterialParams::theta_crit},
    {"phi_t", &MaterialParams::phi_t},
};

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

[[noreturn]] void fail(int line, const std::string& msg) {
  throw ConfigError(line > 0 ? fmt::format("line {}: {}", line, msg) : msg);
}

double to_double(const Entry& e) {
  double v = 0.0;
  const char* first = e.value.data();
  const char* last = first + e.value.size();
  if (*first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || e.value.empty())
    fail(e.line, fmt::format("key '{}': expected a number, got '{}'", e.key, e.value));
  return v;
}

int to_int(const Entry& e) {
  int v = 0;
  auto [ptr, ec] = std::from_chars(e.value.data(), e.value.data() + e.value.size(), v);
  if (ec != std::errc() || ptr != e.value.data() + e.value.size() || e.value.empty())
    fail(e.line, fmt::format("key '{}': expected an integer, got '{}'", e.key, e.value));
  return v;
}

bool to_bool(const Entry& e) {
  if (e.value == "true" || e.value == "on" || e.value == "yes" || e.value == "1") return true;
  if (e.value == "false" || e.value == "off" || e.value == "no" || e.value == "0") return false;
  fail(e.line, fmt::format("key '{}': expected true or false, got '{}'", e.key, e.value));
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) {
    cur = trim(cur);
    if (!cur.empty()) out.push_back(cur);
  }
  return out;
}

std::vector<double> to_list(const Entry& e) {
  std::vector<double> out;
  for (const auto& item : split(e.value, ',')) out.push_back(to_double(Entry{e.key, item, e.line}));
  return out;
}

std::vector<AxisRefinement> to_refinements(const Entry& e) {
  std::vector<AxisRefinement> out;
  for (const auto& item : split(e.value, ',')) {
    const auto parts = split(item, ':');
    if (parts.size() != 3) fail(e.line, fmt::format("key '{}': expected lo:hi:h triples", e.key));
    out.push_back({to_double(Entry{e.key, parts[0], e.line}), to_double(Entry{e.key, parts[1], e.line}),
                   to_double(Entry{e.key, parts[2], e.line})});
  }
  return out;
}

std::string num(double v) { return fmt::format("{:.17g}", v); }

std::string list(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + num(v[i]);
  return s;
}

std::vector<Section> lex(const std::string& text) {
  std::vector<Section> sections(1);  // unnamed top-level section
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto hash = raw.find_first_of("#;");
    std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') fail(line_no, "malformed section header");
      const std::string name = trim(line.substr(1, line.size() - 2));
      if (!kSingleSections.count(name) && !kListSections.count(name))
        fail(line_no, fmt::format("unknown section [{}]", name));
      if (kSingleSections.count(name))
        for (const auto& s : sections)
          if (s.name == name) fail(line_no, fmt::format("duplicate section [{}]", name));
      sections.push_back({name, line_no, {}});
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) fail(line_no, "expected 'key = value'");
    Entry e{trim(line.substr(0, eq)), trim(line.substr(eq + 1)), line_no};
    if (e.key.empty()) fail(line_no, "empty key");
    for (const auto& other : sections.back().entries)
      if (other.key == e.key) fail(line_no, fmt::format("duplicate key '{}'", e.key));
    sections.back().entries.push_back(std::move(e));
  }
  return sections;
}

Entry* find(Section& s, const std::string& key) {
  for (auto& e : s.entries)
    if (e.key == key) {
      e.used = true;
      return &e;
    }
  return nullptr;
}

Entry& require(Section& s, const std::string& key) {
  Entry* e = find(s, key);
  if (!e) fail(s.line, fmt::format("[{}] is missing required key '{}'", s.name, key));
  return *e;
}

void check_all_used(const Section& s) {
  for (const auto& e : s.entries)
    if (!e.used)
      fail(e.line, s.name.empty() ? fmt::format("unknown key '{}'", e.key)
                                  : fmt::format("unknown key '{}' in [{}]", e.key, s.name));
}

void read_axis(Section& s, const std::string& p, AxisSpec& axis) {
  if (auto* e = find(s, p + "_length")) axis.length = to_double(*e);
  if (auto* e = find(s, p + "_h")) axis.base_h = to_double(*e);
  if (auto* e = find(s, p + "_grading")) axis.grading = to_double(*e);
  if (auto* e = find(s, p + "_pinned")) axis.pinned = to_list(*e);
  if (auto* e = find(s, p + "_refine")) axis.refinements = to_refinements(*e);
}

Point read_point(Section& s, const std::string& px, const std::string& py) {
  return {to_double(require(s, px)), to_double(require(s, py))};
}

// Finds the line of the first config key that an error message mentions.
int line_for_message(const std::vector<Section>& sections, const std::string& msg) {
  for (const auto& s : sections)
    for (const auto& e : s.entries) {
      const auto pos = msg.find(e.key);
      if (pos == std::string::npos) continue;
      const auto end = pos + e.key.size();
      const bool word = (pos == 0 || (!std::isalnum(static_cast<unsigned char>(msg[pos - 1])) && msg[pos - 1] != '_')) &&
                        (end == msg.size() || (!std::isalnum(static_cast<unsigned char>(msg[end])) && msg[end] != '_'));
      if (word) return e.line;
    }
  return 0;
}

}  // namespace

RunConfig parse_config(const std::string& text) {
  auto sections = lex(text);
  auto single = [&](const std::string& name) -> Section* {
    for (auto& s : sections)
      if (s.name == name) return &s;
    return nullptr;
  };

  RunConfig cfg;
  Section& top = sections.front();
  Section* run = single("run");
  Entry* preset_entry = find(top, "preset");
  if (run) {
    if (Entry* e = find(*run, "preset")) {
      if (preset_entry) fail(e->line, "preset given twice");
      preset_entry = e;
    }
  }
  Scenario& sc = cfg.scenario;
  if (preset_entry) {
    cfg.preset = preset_entry->value;
    try {
      sc = preset(cfg.preset);
    } catch (const std::invalid_argument& ex) {
      fail(preset_entry->line, ex.what());
    }
  } else {
    if (!single("mesh")) fail(0, "config needs either 'preset' or a [mesh] section");
    if (!single("time")) fail(0, "config needs either 'preset' or a [time] section");
  }
  check_all_used(top);

  if (run) {
    if (auto* e = find(*run, "derived_from")) {
      if (preset_entry) fail(e->line, "'derived_from' and 'preset' are exclusive");
      cfg.preset = e->value;
    }
    if (auto* e = find(*run, "name")) sc.name = e->value;
    if (auto* e = find(*run, "output_dir")) cfg.output_dir = e->value;
    if (auto* e = find(*run, "cracks")) cfg.cracks = to_bool(*e);
    if (auto* e = find(*run, "jacobian_check")) cfg.jacobian_check = to_bool(*e);
    if (auto* e = find(*run, "write_vtk")) cfg.write_vtk = to_bool(*e);
    check_all_used(*run);
  }

  if (Section* s = single("material")) {
    if (auto* e = find(*s, "branch")) {
      try {
        sc.branch = isotherm_branch_from_string(e->value);
      } catch (const std::invalid_argument& ex) {
        fail(e->line, ex.what());
      }
      const MaterialParams base = MaterialParams::for_branch(sc.branch, sc.params.theta_0);
      sc.params.alpha = base.alpha;
      sc.params.beta = base.beta;
      sc.params.perm_const_C = base.perm_const_C;
    }
    const double c0_before = sc.params.c_CaOH2_0;
    for (const auto& [key, member] : kMaterialKeys)
      if (auto* e = find(*s, key)) sc.params.*member = to_double(*e);
    if (sc.initial.c_ch == c0_before) sc.initial.c_ch = sc.params.c_CaOH2_0;
    check_all_used(*s);
  }

  if (Section* s = single("mesh")) {
    if (!preset_entry) {
      require(*s, "x_length");
      require(*s, "y_length");
      require(*s, "x_h");
      require(*s, "y_h");
    }
    read_axis(*s, "x", sc.mesh.x);
    read_axis(*s, "y", sc.mesh.y);
    if (auto* e = find(*s, "left")) sc.mesh.left = e->value;
    if (auto* e = find(*s, "right")) sc.mesh.right = e->value;
    if (auto* e = find(*s, "bottom")) sc.mesh.bottom = e->value;
    if (auto* e = find(*s, "top")) sc.mesh.top = e->value;
    check_all_used(*s);
  }

  if (!preset_entry) sc.initial.c_ch = sc.params.c_CaOH2_0;
  if (Section* s = single("initial")) {
    Entry* es = find(*s, "S");
    Entry* eh = find(*s, "humidity");
    if (es && eh) fail(eh->line, "give either 'S' or 'humidity', not both");
    if (es) sc.initial.S = to_double(*es);
    if (eh) {
      const double h = to_double(*eh);
      if (!(h > 0.0 && h <= 1.0)) fail(eh->line, "key 'humidity': must lie in (0, 1]");
      sc.initial.S = constitutive::saturation_from_humidity(h, sc.params);
    }
    if (auto* e = find(*s, "c_co2")) sc.initial.c_co2 = to_double(*e);
    if (auto* e = find(*s, "c_caoh2")) sc.initial.c_ch = to_double(*e);
    check_all_used(*s);
  }

  if (Section* s = single("solver")) {
    if (auto* e = find(*s, "carbonation")) sc.options.carbonation = to_bool(*e);
    if (auto* e = find(*s, "lumped_storage")) sc.options.lumped_storage = to_bool(*e);
    if (auto* e = find(*s, "flux_quadrature")) {
      if (e->value == "nodal") sc.options.flux_quadrature = QuadratureRule::nodal;
      else if (e->value == "gauss") sc.options.flux_quadrature = QuadratureRule::gauss;
      else fail(e->line, fmt::format("key 'flux_quadrature': expected nodal or gauss, got '{}'", e->value));
    }
    if (auto* e = find(*s, "scheme")) {
      if (e->value == "implicit_euler") sc.options.scheme = TimeScheme::implicit_euler;
      else if (e->value == "bdf2") sc.options.scheme = TimeScheme::bdf2;
      else fail(e->line, fmt::format("key 'scheme': expected implicit_euler or bdf2, got '{}'", e->value));
    }
    if (auto* e = find(*s, "jacobian")) {
      if (e->value == "analytic") sc.options.jacobian = JacobianMode::analytic;
      else if (e->value == "finite_difference") sc.options.jacobian = JacobianMode::finite_difference;
      else fail(e->line, fmt::format("key 'jacobian': expected analytic or finite_difference, got '{}'", e->value));
    }
    check_all_used(*s);
  }

  if (Section* s = single("time")) {
    if (!preset_entry) require(*s, "t_end");
    auto& p = sc.plan;
    if (auto* e = find(*s, "t_end")) p.t_end = to_double(*e);
    if (auto* e = find(*s, "dt_init")) p.dt_init = to_double(*e);
    if (auto* e = find(*s, "dt_min")) p.dt_min = to_double(*e);
    if (auto* e = find(*s, "dt_max")) p.dt_max = to_double(*e);
    if (auto* e = find(*s, "newton_tol")) p.newton_tol = to_double(*e);
    if (auto* e = find(*s, "newton_max_iter")) p.newton_max_iter = to_int(*e);
    if (auto* e = find(*s, "growth")) p.growth = to_double(*e);
    if (auto* e = find(*s, "shrink")) p.shrink = to_double(*e);
    if (auto* e = find(*s, "max_saturation_change")) p.max_saturation_change = to_double(*e);
    if (auto* e = find(*s, "outputs")) sc.output_times = to_list(*e);
    check_all_used(*s);
  }

  // Repeated sections replace the preset's list on first occurrence.
  std::set<std::string> replaced;
  for (auto& s : sections) {
    if (!kListSections.count(s.name)) continue;
    const bool first = replaced.insert(s.name).second;
    if (s.name == "circle") {
      if (first) sc.mesh.circles.clear();
      sc.mesh.circles.push_back({read_point(s, "x", "y"), to_double(require(s, "radius")), require(s, "marker").value});
    } else if (s.name == "rectangle") {
      if (first) sc.mesh.rectangles.clear();
      sc.mesh.rectangles.push_back(
          {read_point(s, "x0", "y0"), read_point(s, "x1", "y1"), require(s, "marker").value});
    } else if (s.name == "layer") {
      if (first) sc.porosity_layers.clear();
      sc.porosity_layers.push_back({read_point(s, "x", "y"), to_double(require(s, "radius")),
                                    to_double(require(s, "thickness")), to_double(require(s, "theta_inner"))});
    } else if (s.name == "crack") {
      if (first) sc.cracks.clear();
      CrackSpec c{read_point(s, "x0", "y0"), read_point(s, "x1", "y1"), to_double(require(s, "ell")),
                  to_double(require(s, "w_cr")), 0.5};
      if (auto* e = find(s, "phi_t")) c.phi_t = to_double(*e);
      sc.cracks.push_back(c);
    } else if (s.name == "bc") {
      if (first) sc.bcs.clear();
      BoundaryCondition bc;
      bc.marker = require(s, "marker").value;
      Entry& eu = require(s, "unknown");
      try {
        bc.unknown = unknown_from_string(eu.value);
      } catch (const std::invalid_argument& ex) {
        fail(eu.line, ex.what());
      }
      Entry* ev = find(s, "value");
      Entry* eh = find(s, "humidity");
      Entry* ef = find(s, "co2_fraction");
      if ((ev != nullptr) + (eh != nullptr) + (ef != nullptr) != 1)
        fail(s.line, "[bc] needs exactly one of 'value', 'humidity', 'co2_fraction'");
      if (ev) bc.value.value = to_double(*ev);
      if (eh) {
        if (bc.unknown != Unknown::saturation) fail(eh->line, "key 'humidity' applies to saturation only");
        const double h = to_double(*eh);
        if (!(h > 0.0 && h <= 1.0)) fail(eh->line, "key 'humidity': must lie in (0, 1]");
        bc.value.value = constitutive::saturation_from_humidity(h, sc.params);
      }
      if (ef) {
        if (bc.unknown != Unknown::co2) fail(ef->line, "key 'co2_fraction' applies to co2 only");
        bc.value.value = co2_concentration_from_fraction(to_double(*ef), sc.params.T, sc.params.R_gas);
      }
      if (auto* e = find(s, "kind")) {
        if (e->value == "sine") bc.value.kind = BoundaryValue::Kind::sine;
        else if (e->value != "constant") fail(e->line, fmt::format("key 'kind': expected constant or sine, got '{}'", e->value));
      }
      if (auto* e = find(s, "amplitude")) bc.value.amplitude = to_double(*e);
      if (auto* e = find(s, "period")) bc.value.period = to_double(*e);
      if (auto* e = find(s, "phase")) bc.value.phase = to_double(*e);
      sc.bcs.push_back(bc);
    } else if (s.name == "probe") {
      if (first) sc.probes.clear();
      ProbeSpec p;
      p.name = require(s, "name").value;
      Entry& ek = require(s, "kind");
      try {
        p.kind = probe_kind_from_string(ek.value);
      } catch (const std::invalid_argument& ex) {
        fail(ek.line, ex.what());
      }
      if (auto* e = find(s, "x")) p.point.x = to_double(*e);
      if (auto* e = find(s, "y")) p.point.y = to_double(*e);
      if (auto* e = find(s, "marker")) p.marker = e->value;
      sc.probes.push_back(p);
    }
    check_all_used(s);
  }

  try {
    sc.validate();
  } catch (const std::invalid_argument& ex) {
    fail(line_for_message(sections, ex.what()), ex.what());
  }
  if (cfg.output_dir.empty()) fail(0, "output_dir must not be empty");
  return cfg;
}

RunConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string serialize_config(const RunConfig& c) {
  const Scenario& s = c.scenario;
  std::string out;
  auto kv = [&](const std::string& k, const std::string& v) { out += k + " = " + v + "\n"; };
  auto b = [](bool v) { return std::string(v ? "true" : "false"); };

  out += "[run]\n";
  if (!c.preset.empty()) kv("derived_from", c.preset);
  kv("name", s.name);
  kv("output_dir", c.output_dir);
  kv("cracks", b(c.cracks));
  kv("jacobian_check", b(c.jacobian_check));
  kv("write_vtk", b(c.write_vtk));

  out += "\n[material]\n";
  kv("branch", std::string(to_string(s.branch)));
  for (const auto& [key, member] : kMaterialKeys) kv(key, num(s.params.*member));

  out += "\n[mesh]\n";
  auto axis = [&](const std::string& p, const AxisSpec& a) {
    kv(p + "_length", num(a.length));
    kv(p + "_h", num(a.base_h));
    kv(p + "_grading", num(a.grading));
    if (!a.pinned.empty()) kv(p + "_pinned", list(a.pinned));
    if (!a.refinements.empty()) {
      std::string r;
      for (std::size_t i = 0; i < a.refinements.size(); ++i)
        r += (i ? ", " : "") + num(a.refinements[i].lo) + ":" + num(a.refinements[i].hi) + ":" +
             num(a.refinements[i].h);
      kv(p + "_refine", r);
    }
  };
  axis("x", s.mesh.x);
  axis("y", s.mesh.y);
  kv("left", s.mesh.left);
  kv("right", s.mesh.right);
  kv("bottom", s.mesh.bottom);
  kv("top", s.mesh.top);

  out += "\n[initial]\n";
  kv("S", num(s.initial.S));
  kv("c_co2", num(s.initial.c_co2));
  kv("c_caoh2", num(s.initial.c_ch));

  out += "\n[solver]\n";
  kv("carbonation", b(s.options.carbonation));
  kv("lumped_storage", b(s.options.lumped_storage));
  kv("flux_quadrature", s.options.flux_quadrature == QuadratureRule::nodal ? "nodal" : "gauss");
  kv("scheme", s.options.scheme == TimeScheme::bdf2 ? "bdf2" : "implicit_euler");
  kv("jacobian", s.options.jacobian == JacobianMode::analytic ? "analytic" : "finite_difference");

  out += "\n[time]\n";
  kv("t_end", num(s.plan.t_end));
  kv("dt_init", num(s.plan.dt_init));
  kv("dt_min", num(s.plan.dt_min));
  kv("dt_max", num(s.plan.dt_max));
  kv("newton_tol", num(s.plan.newton_tol));
  kv("newton_max_iter", std::to_string(s.plan.newton_max_iter));
  kv("growth", num(s.plan.growth));
  kv("shrink", num(s.plan.shrink));
  kv("max_saturation_change", num(s.plan.max_saturation_change));
  if (!s.output_times.empty()) kv("outputs", list(s.output_times));

  for (const auto& v : s.mesh.circles) {
    out += "\n[circle]\n";
    kv("x", num(v.center.x));
    kv("y", num(v.center.y));
    kv("radius", num(v.radius));
    kv("marker", v.marker);
  }
  for (const auto& v : s.mesh.rectangles) {
    out += "\n[rectangle]\n";
    kv("x0", num(v.lo.x));
    kv("y0", num(v.lo.y));
    kv("x1", num(v.hi.x));
    kv("y1", num(v.hi.y));
    kv("marker", v.marker);
  }
  for (const auto& l : s.porosity_layers) {
    out += "\n[layer]\n";
    kv("x", num(l.center.x));
    kv("y", num(l.center.y));
    kv("radius", num(l.radius));
    kv("thickness", num(l.thickness));
    kv("theta_inner", num(l.theta_inner));
  }
  for (const auto& cr : s.cracks) {
    out += "\n[crack]\n";
    kv("x0", num(cr.start.x));
    kv("y0", num(cr.start.y));
    kv("x1", num(cr.end.x));
    kv("y1", num(cr.end.y));
    kv("ell", num(cr.ell));
    kv("w_cr", num(cr.w_cr));
    kv("phi_t", num(cr.phi_t));
  }
  for (const auto& bc : s.bcs) {
    out += "\n[bc]\n";
    kv("marker", bc.marker);
    kv("unknown", std::string(to_string(bc.unknown)));
    kv("kind", bc.value.kind == BoundaryValue::Kind::sine ? "sine" : "constant");
    kv("value", num(bc.value.value));
    if (bc.value.kind == BoundaryValue::Kind::sine) {
      kv("amplitude", num(bc.value.amplitude));
      kv("period", num(bc.value.period));
      kv("phase", num(bc.value.phase));
    }
  }
  for (const auto& p : s.probes) {
    out += "\n[probe]\n";
    kv("name", p.name);
    kv("kind", std::string(to_string(p.kind)));
    kv("x", num(p.point.x));
    kv("y", num(p.point.y));
    if (!p.marker.empty()) kv("marker", p.marker);
  }
  return out;
}

Scenario effective_scenario(const RunConfig& config) {
  Scenario s = config.scenario;
  if (!config.cracks) s.cracks.clear();
  return s;
}

}  // namespace carbsim
