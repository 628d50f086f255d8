#include "crowd/scenario.hpp"

#include "crowd/error.hpp"
#include "crowd/seed.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <initializer_list>
#include <numbers>
#include <set>

namespace crowd {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string &path, const std::string &msg) { throw InvalidArgument(path + ": " + msg); }

std::string child(const std::string &path, const std::string &key) { return path.empty() ? key : path + "." + key; }
std::string item(const std::string &path, std::size_t k) { return path + "[" + std::to_string(k) + "]"; }

// Object view that knows where it sits in the document.
class Obj {
public:
  Obj(const json &j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail(path_.empty() ? "<root>" : path_, "expected an object");
  }

  void allow(std::initializer_list<const char *> keys) const {
    const std::set<std::string> ok(keys.begin(), keys.end());
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!ok.count(it.key())) fail(child(path_, it.key()), "unknown key");
  }

  bool has(const std::string &k) const { return j_.contains(k) && !j_.at(k).is_null(); }
  const json &at(const std::string &k) const {
    if (!has(k)) fail(child(path_, k), "missing");
    return j_.at(k);
  }
  std::string path(const std::string &k = "") const { return k.empty() ? path_ : child(path_, k); }

  double number(const std::string &k, double def) const { return has(k) ? number(k) : def; }
  double number(const std::string &k) const {
    const json &v = at(k);
    if (!v.is_number()) fail(path(k), "expected a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) fail(path(k), "must be finite");
    return x;
  }
  long long integer(const std::string &k, long long def) const { return has(k) ? integer(k) : def; }
  long long integer(const std::string &k) const {
    const json &v = at(k);
    if (!v.is_number_integer()) fail(path(k), "expected an integer");
    return v.get<long long>();
  }
  std::uint64_t unsigned_integer(const std::string &k, std::uint64_t def) const {
    if (!has(k)) return def;
    const json &v = at(k);
    if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<long long>() < 0))
      fail(path(k), "expected a non-negative integer");
    return v.get<std::uint64_t>();
  }
  bool boolean(const std::string &k, bool def) const {
    if (!has(k)) return def;
    if (!at(k).is_boolean()) fail(path(k), "expected true or false");
    return at(k).get<bool>();
  }
  std::string string(const std::string &k, const std::string &def) const { return has(k) ? string(k) : def; }
  std::string string(const std::string &k) const {
    if (!at(k).is_string()) fail(path(k), "expected a string");
    return at(k).get<std::string>();
  }
  const json &array(const std::string &k) const {
    if (!at(k).is_array()) fail(path(k), "expected an array");
    return at(k);
  }

private:
  const json &j_;
  std::string path_;
};

Vec2 point(const json &v, const std::string &path) {
  if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
    fail(path, "expected a point [x, y]");
  const Vec2 p{v[0].get<double>(), v[1].get<double>()};
  if (!std::isfinite(p.x) || !std::isfinite(p.y)) fail(path, "coordinates must be finite");
  return p;
}

std::vector<Vec2> points(const json &v, const std::string &path) {
  if (!v.is_array()) fail(path, "expected an array of points");
  std::vector<Vec2> out;
  for (std::size_t k = 0; k < v.size(); ++k) out.push_back(point(v[k], item(path, k)));
  return out;
}

// [[x0, y0], [x1, y1]] with x0 < x1 and y0 < y1.
void box(const json &v, const std::string &path, Vec2 &lo, Vec2 &hi) {
  const auto p = points(v, path);
  if (p.size() != 2) fail(path, "expected [[x0, y0], [x1, y1]]");
  lo = p[0];
  hi = p[1];
  if (!(lo.x < hi.x && lo.y < hi.y)) fail(path, "needs x0 < x1 and y0 < y1");
}

json pt(Vec2 p) { return json::array({p.x, p.y}); }
json pts(const std::vector<Vec2> &v) {
  json a = json::array();
  for (Vec2 p : v) a.push_back(pt(p));
  return a;
}

Strategy parse_strategy(const std::string &s, const std::string &path) {
  if (s == "none") return Strategy::none;
  if (s == "decelerate") return Strategy::decelerate;
  if (s == "bypass") return Strategy::bypass;
  fail(path, "expected none, decelerate or bypass, got '" + s + "'");
}

LatticeKind parse_lattice(const std::string &s, const std::string &path) {
  if (s == "triangular") return LatticeKind::triangular;
  if (s == "cartesian") return LatticeKind::cartesian;
  if (s == "loose_triangular") return LatticeKind::loose_triangular;
  fail(path, "expected triangular, cartesian or loose_triangular, got '" + s + "'");
}

std::string lattice_name(LatticeKind k) {
  switch (k) {
  case LatticeKind::triangular: return "triangular";
  case LatticeKind::cartesian: return "cartesian";
  case LatticeKind::loose_triangular: return "loose_triangular";
  }
  return "";
}

Room parse_room(const Obj &o) {
  o.allow({"outer", "obstacles", "exits"});
  Room room;
  room.outer = points(o.array("outer"), o.path("outer"));
  if (o.has("obstacles")) {
    const json &obs = o.array("obstacles");
    for (std::size_t k = 0; k < obs.size(); ++k) room.obstacles.push_back(points(obs[k], item(o.path("obstacles"), k)));
  }
  const json &ex = o.array("exits");
  for (std::size_t k = 0; k < ex.size(); ++k) {
    const auto p = points(ex[k], item(o.path("exits"), k));
    if (p.size() != 2) fail(item(o.path("exits"), k), "expected a segment [[x0, y0], [x1, y1]]");
    room.exits.push_back({p[0], p[1]});
  }
  try {
    room.validate();
  } catch (const InvalidArgument &e) {
    fail("room", e.what());
  }
  return room;
}

TypeSpec parse_type(const Obj &o) {
  o.allow({"name", "exits", "speed", "normalize", "strategy", "proximity_range", "view_half_angle_deg", "speed_factor",
           "jam_density"});
  TypeSpec t;
  t.name = o.string("name");
  if (t.name.empty()) fail(o.path("name"), "must not be empty");
  if (o.has("exits")) {
    const json &e = o.array("exits");
    for (std::size_t k = 0; k < e.size(); ++k) {
      if (!e[k].is_number_integer()) fail(item(o.path("exits"), k), "expected an exit index");
      t.exits.push_back(e[k].get<int>());
    }
  }
  t.speed = o.number("speed", t.speed);
  if (!(t.speed >= 0.0)) fail(o.path("speed"), "must be >= 0");
  t.normalize = o.boolean("normalize", t.normalize);
  t.strategy = parse_strategy(o.string("strategy", "none"), o.path("strategy"));
  t.proximity_range = o.number("proximity_range", t.proximity_range);
  if (!(t.proximity_range >= 0.0)) fail(o.path("proximity_range"), "must be >= 0");
  t.view_half_angle_deg = o.number("view_half_angle_deg", t.view_half_angle_deg);
  if (!(t.view_half_angle_deg > 0.0 && t.view_half_angle_deg < 180.0))
    fail(o.path("view_half_angle_deg"), "must lie in (0, 180)");
  t.speed_factor = o.string("speed_factor", t.speed_factor);
  if (t.speed_factor != "none" && t.speed_factor != "linear")
    fail(o.path("speed_factor"), "expected none or linear, got '" + t.speed_factor + "'");
  t.jam_density = o.number("jam_density", t.jam_density);
  if (!(t.jam_density > 0.0)) fail(o.path("jam_density"), "must be > 0");
  return t;
}

MicroGroup parse_group(const Obj &o) {
  o.allow({"type", "positions", "lattice", "random"});
  MicroGroup g;
  g.type = o.string("type");
  const int kinds = o.has("positions") + o.has("lattice") + o.has("random");
  if (kinds != 1) fail(o.path(), "needs exactly one of positions, lattice, random");
  if (o.has("positions")) {
    g.kind = MicroGroup::Kind::positions;
    g.positions = points(o.array("positions"), o.path("positions"));
  } else if (o.has("lattice")) {
    g.kind = MicroGroup::Kind::lattice;
    const Obj l(o.at("lattice"), o.path("lattice"));
    l.allow({"kind", "count", "origin", "columns"});
    g.lattice.kind = parse_lattice(l.string("kind", "triangular"), l.path("kind"));
    g.lattice.count = l.integer("count");
    if (g.lattice.count < 1) fail(l.path("count"), "must be >= 1");
    g.lattice.origin = point(l.at("origin"), l.path("origin"));
    g.lattice.columns = static_cast<int>(l.integer("columns", 0));
    if (g.lattice.columns < 0) fail(l.path("columns"), "must be >= 0");
  } else {
    g.kind = MicroGroup::Kind::random;
    const Obj r(o.at("random"), o.path("random"));
    r.allow({"count", "region"});
    g.count = r.integer("count");
    if (g.count < 0) fail(r.path("count"), "must be >= 0");
    box(r.at("region"), r.path("region"), g.lo, g.hi);
  }
  return g;
}

MicroSpec parse_micro(const Obj &o) {
  o.allow({"radius", "groups", "tol_geom_rel", "tol_kkt_rel", "eps_act", "max_iter"});
  MicroSpec m;
  m.radius = o.number("radius", m.radius);
  if (!(m.radius > 0.0)) fail(o.path("radius"), "must be > 0");
  if (o.has("groups")) {
    const json &g = o.array("groups");
    for (std::size_t k = 0; k < g.size(); ++k) m.groups.push_back(parse_group(Obj(g[k], item(o.path("groups"), k))));
  }
  m.params.tol_geom_rel = o.number("tol_geom_rel", m.params.tol_geom_rel);
  if (!(m.params.tol_geom_rel >= 0.0)) fail(o.path("tol_geom_rel"), "must be >= 0");
  m.params.tol_kkt_rel = o.number("tol_kkt_rel", m.params.tol_kkt_rel);
  if (!(m.params.tol_kkt_rel > 0.0)) fail(o.path("tol_kkt_rel"), "must be > 0");
  m.params.eps_act = o.number("eps_act", m.params.eps_act);
  m.params.max_iter = o.integer("max_iter", m.params.max_iter);
  if (m.params.max_iter < -1) fail(o.path("max_iter"), "must be -1 (automatic) or >= 0");
  return m;
}

MacroSpec parse_macro(const Obj &o) {
  o.allow({"populations", "max_walk_steps", "stop_mass"});
  MacroSpec m;
  if (o.has("populations")) {
    const json &p = o.array("populations");
    for (std::size_t k = 0; k < p.size(); ++k) {
      const Obj q(p[k], item(o.path("populations"), k));
      q.allow({"type", "blocks", "from_micro"});
      MacroPopulation pop;
      pop.type = q.string("type");
      pop.from_micro = q.boolean("from_micro", false);
      if (q.has("blocks")) {
        if (pop.from_micro) fail(q.path("blocks"), "cannot be combined with from_micro");
        const json &b = q.array("blocks");
        for (std::size_t t = 0; t < b.size(); ++t) {
          const Obj bo(b[t], item(q.path("blocks"), t));
          bo.allow({"region", "density"});
          DensityBlock blk;
          box(bo.at("region"), bo.path("region"), blk.lo, blk.hi);
          blk.density = bo.number("density");
          if (!(blk.density >= 0.0 && blk.density <= 1.0)) fail(bo.path("density"), "must lie in [0, 1]");
          pop.blocks.push_back(blk);
        }
      }
      m.populations.push_back(pop);
    }
  }
  m.max_walk_steps = o.integer("max_walk_steps", m.max_walk_steps);
  if (m.max_walk_steps < 1) fail(o.path("max_walk_steps"), "must be >= 1");
  m.stop_mass = o.number("stop_mass", m.stop_mass);
  if (!(m.stop_mass >= 0.0)) fail(o.path("stop_mass"), "must be >= 0");
  return m;
}

AnalysisSpec parse_analysis(const Obj &o) {
  o.allow({"raster", "samples", "rho_ref", "upstream_window", "upstream_steps", "jam_window", "jam_rel_change", "jam_contact_eps_rel",
           "stop_on_jam"});
  AnalysisSpec a;
  const std::string raster = o.string("raster", "supersample");
  if (raster == "supersample")
    a.raster.method = RasterMethod::supersample;
  else if (raster == "exact")
    a.raster.method = RasterMethod::exact;
  else
    fail(o.path("raster"), "expected supersample or exact, got '" + raster + "'");
  a.raster.samples = static_cast<int>(o.integer("samples", a.raster.samples));
  if (a.raster.samples < 1) fail(o.path("samples"), "must be >= 1");
  if (o.has("rho_ref")) {
    const json &r = o.at("rho_ref");
    if (r.is_string()) {
      if (r.get<std::string>() != "max") fail(o.path("rho_ref"), "expected \"max\" or a number");
    } else {
      a.rho_ref = o.number("rho_ref");
      if (!(a.rho_ref > 0.0 && a.rho_ref <= 1.0)) fail(o.path("rho_ref"), "must lie in (0, 1]");
    }
  }
  if (o.has("upstream_window")) {
    a.has_upstream_window = true;
    box(o.at("upstream_window"), o.path("upstream_window"), a.upstream_lo, a.upstream_hi);
  }
  if (o.has("upstream_steps")) {
    const json &k = o.at("upstream_steps");
    if (!k.is_array() || k.size() != 2 || !k[0].is_number_integer() || !k[1].is_number_integer())
      fail(o.path("upstream_steps"), "expected [first, last] step numbers");
    a.upstream_from = k[0].get<long>();
    a.upstream_to = k[1].get<long>();
    if (a.upstream_from < 0 || (a.upstream_to >= 0 && a.upstream_to < a.upstream_from))
      fail(o.path("upstream_steps"), "needs 0 <= first <= last, or last = -1");
  }
  a.jam.window = static_cast<long>(o.integer("jam_window", a.jam.window));
  if (a.jam.window < 1) fail(o.path("jam_window"), "must be >= 1");
  a.jam.rel_change = o.number("jam_rel_change", a.jam.rel_change);
  if (!(a.jam.rel_change >= 0.0)) fail(o.path("jam_rel_change"), "must be >= 0");
  a.jam_contact_eps_rel = o.number("jam_contact_eps_rel", a.jam_contact_eps_rel);
  if (!(a.jam_contact_eps_rel >= 0.0)) fail(o.path("jam_contact_eps_rel"), "must be >= 0");
  a.stop_on_jam = o.boolean("stop_on_jam", a.stop_on_jam);
  return a;
}

} // namespace

int Scenario::type_index(const std::string &n) const {
  for (std::size_t t = 0; t < types.size(); ++t)
    if (types[t].name == n) return static_cast<int>(t);
  return -1;
}

SeedStreams split_seed(std::uint64_t seed) { return {derive_seed(seed, 1), derive_seed(seed, 2)}; }

std::string to_string(Model m) {
  switch (m) {
  case Model::micro: return "micro";
  case Model::macro: return "macro";
  case Model::both: return "both";
  }
  return "";
}

std::string to_string(Strategy s) {
  switch (s) {
  case Strategy::none: return "none";
  case Strategy::decelerate: return "decelerate";
  case Strategy::bypass: return "bypass";
  }
  return "";
}

Scenario parse_scenario(const json &doc) {
  const Obj o(doc, "");
  // "run" is written into manifests and ignored on input.
  o.allow({"name", "model", "seed", "tau", "steps", "resolution", "room", "types", "micro", "macro", "analysis",
           "output", "run"});
  Scenario s;
  s.name = o.string("name", s.name);
  const std::string model = o.string("model");
  if (model == "micro")
    s.model = Model::micro;
  else if (model == "macro")
    s.model = Model::macro;
  else if (model == "both")
    s.model = Model::both;
  else
    fail("model", "expected micro, macro or both, got '" + model + "'");
  s.seed = o.unsigned_integer("seed", 0);
  s.tau = o.number("tau");
  if (!(s.tau > 0.0)) fail("tau", "must be > 0");
  s.steps = static_cast<long>(o.integer("steps"));
  if (s.steps < 0) fail("steps", "must be >= 0");
  s.resolution = o.number("resolution");
  if (!(s.resolution > 0.0)) fail("resolution", "must be > 0");
  s.room = parse_room(Obj(o.at("room"), "room"));
  const json &types = o.array("types");
  for (std::size_t k = 0; k < types.size(); ++k) s.types.push_back(parse_type(Obj(types[k], item("types", k))));
  if (o.has("micro")) s.micro = parse_micro(Obj(o.at("micro"), "micro"));
  if (o.has("macro")) s.macro = parse_macro(Obj(o.at("macro"), "macro"));
  if (o.has("analysis")) s.analysis = parse_analysis(Obj(o.at("analysis"), "analysis"));
  if (o.has("output")) {
    const Obj out(o.at("output"), "output");
    out.allow({"stride", "pgm"});
    s.output.stride = static_cast<long>(out.integer("stride", s.output.stride));
    if (s.output.stride < 1) fail("output.stride", "must be >= 1");
    s.output.pgm = out.boolean("pgm", s.output.pgm);
  }
  validate(s);
  return s;
}

Scenario load_scenario(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument(path.string() + ": cannot open scenario file");
  json doc;
  try {
    doc = json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error &e) {
    throw InvalidArgument(path.string() + ": " + e.what());
  }
  return parse_scenario(doc);
}

void validate(const Scenario &s) {
  if (s.types.empty()) fail("types", "at least one agent type is required");
  std::set<std::string> names;
  for (std::size_t t = 0; t < s.types.size(); ++t) {
    const TypeSpec &ty = s.types[t];
    if (!names.insert(ty.name).second) fail(item("types", t) + ".name", "duplicate type '" + ty.name + "'");
    for (std::size_t k = 0; k < ty.exits.size(); ++k)
      if (ty.exits[k] < 0 || ty.exits[k] >= static_cast<int>(s.room.exits.size()))
        fail(item(item("types", t) + ".exits", k), "no exit with index " + std::to_string(ty.exits[k]));
  }
  if (s.room.exits.empty()) fail("room.exits", "at least one exit is required to build the distance field");

  if (s.has_micro() && s.micro.groups.empty()) fail("micro.groups", "a micro run needs at least one group");
  for (std::size_t g = 0; g < s.micro.groups.size(); ++g)
    if (s.type_index(s.micro.groups[g].type) < 0)
      fail(item("micro.groups", g) + ".type", "unknown type '" + s.micro.groups[g].type + "'");

  if (s.has_macro()) {
    if (s.macro.populations.empty()) fail("macro.populations", "a macro run needs at least one population");
    const Grid grid = build_grid(s.room, s.resolution);
    const double cell = std::min(grid.dx(), grid.dy());
    for (std::size_t t = 0; t < s.types.size(); ++t)
      if (s.tau * s.types[t].speed > cell * (1.0 + 1e-12))
        fail("tau", "tau * speed of type '" + s.types[t].name + "' (" + std::to_string(s.tau * s.types[t].speed) +
                        ") exceeds the cell size " + std::to_string(cell));
  }
  for (std::size_t p = 0; p < s.macro.populations.size(); ++p) {
    const MacroPopulation &pop = s.macro.populations[p];
    if (s.type_index(pop.type) < 0) fail(item("macro.populations", p) + ".type", "unknown type '" + pop.type + "'");
    if (pop.from_micro) {
      bool any = false;
      for (const MicroGroup &g : s.micro.groups) any = any || g.type == pop.type;
      if (!any) fail(item("macro.populations", p) + ".from_micro", "no micro group of type '" + pop.type + "'");
    }
  }
  if (s.analysis.has_upstream_window && !s.has_micro())
    fail("analysis.upstream_window", "only meaningful for runs with a micro model");
}

json to_json(const Scenario &s) {
  json j;
  j["name"] = s.name;
  j["model"] = to_string(s.model);
  j["seed"] = s.seed;
  j["tau"] = s.tau;
  j["steps"] = s.steps;
  j["resolution"] = s.resolution;
  json obs = json::array();
  for (const Polygon &p : s.room.obstacles) obs.push_back(pts(p));
  json ex = json::array();
  for (const Segment &e : s.room.exits) ex.push_back(json::array({pt(e.a), pt(e.b)}));
  j["room"] = {{"outer", pts(s.room.outer)}, {"obstacles", obs}, {"exits", ex}};
  json types = json::array();
  for (const TypeSpec &t : s.types)
    types.push_back({{"name", t.name},
                     {"exits", t.exits},
                     {"speed", t.speed},
                     {"normalize", t.normalize},
                     {"strategy", to_string(t.strategy)},
                     {"proximity_range", t.proximity_range},
                     {"view_half_angle_deg", t.view_half_angle_deg},
                     {"speed_factor", t.speed_factor},
                     {"jam_density", t.jam_density}});
  j["types"] = types;
  json groups = json::array();
  for (const MicroGroup &g : s.micro.groups) {
    json gj{{"type", g.type}};
    switch (g.kind) {
    case MicroGroup::Kind::positions: gj["positions"] = pts(g.positions); break;
    case MicroGroup::Kind::lattice:
      gj["lattice"] = {{"kind", lattice_name(g.lattice.kind)},
                       {"count", g.lattice.count},
                       {"origin", pt(g.lattice.origin)},
                       {"columns", g.lattice.columns}};
      break;
    case MicroGroup::Kind::random: gj["random"] = {{"count", g.count}, {"region", json::array({pt(g.lo), pt(g.hi)})}}; break;
    }
    groups.push_back(gj);
  }
  j["micro"] = {{"radius", s.micro.radius},
                {"groups", groups},
                {"tol_geom_rel", s.micro.params.tol_geom_rel},
                {"tol_kkt_rel", s.micro.params.tol_kkt_rel},
                {"eps_act", s.micro.params.eps_act},
                {"max_iter", s.micro.params.max_iter}};
  json pops = json::array();
  for (const MacroPopulation &p : s.macro.populations) {
    json pj{{"type", p.type}, {"from_micro", p.from_micro}};
    if (!p.from_micro) {
      json blocks = json::array();
      for (const DensityBlock &b : p.blocks)
        blocks.push_back({{"region", json::array({pt(b.lo), pt(b.hi)})}, {"density", b.density}});
      pj["blocks"] = blocks;
    }
    pops.push_back(pj);
  }
  j["macro"] = {{"populations", pops}, {"max_walk_steps", s.macro.max_walk_steps}, {"stop_mass", s.macro.stop_mass}};
  json a{{"raster", s.analysis.raster.method == RasterMethod::exact ? "exact" : "supersample"},
         {"samples", s.analysis.raster.samples},
         {"jam_window", s.analysis.jam.window},
         {"jam_rel_change", s.analysis.jam.rel_change},
         {"jam_contact_eps_rel", s.analysis.jam_contact_eps_rel},
         {"stop_on_jam", s.analysis.stop_on_jam}};
  if (s.analysis.rho_ref > 0.0)
    a["rho_ref"] = s.analysis.rho_ref;
  else
    a["rho_ref"] = "max";
  if (s.analysis.has_upstream_window)
    a["upstream_window"] = json::array({pt(s.analysis.upstream_lo), pt(s.analysis.upstream_hi)});
  a["upstream_steps"] = json::array({s.analysis.upstream_from, s.analysis.upstream_to});
  j["analysis"] = a;
  j["output"] = {{"stride", s.output.stride}, {"pgm", s.output.pgm}};
  return j;
}

} // namespace crowd
