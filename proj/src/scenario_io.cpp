#include "wpcn/scenario_io.hpp"

#include <json.hpp>
#include <toml.hpp>

#include <bit>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <set>
#include <sstream>

namespace wpcn::io {

using nlohmann::json;

ParseError::ParseError(std::string key, const std::string& what)
    : std::runtime_error(key.empty() ? what : "'" + key + "': " + what), key_(std::move(key)) {}

std::vector<Position2D> RandomLayout::generate() const {
  std::mt19937_64 gen(seed);
  const auto unit = [&] { return static_cast<double>(gen() >> 11) * 0x1.0p-53; };
  std::vector<Position2D> users(count);
  for (auto& u : users) {
    u.x = width * unit();
    u.y = height * unit();
  }
  return users;
}

namespace {

json toml_to_json(const toml::node& node) {
  if (const auto* t = node.as_table()) {
    json out = json::object();
    for (const auto& [k, v] : *t) out[std::string(k.str())] = toml_to_json(v);
    return out;
  }
  if (const auto* a = node.as_array()) {
    json out = json::array();
    for (const auto& v : *a) out.push_back(toml_to_json(v));
    return out;
  }
  if (const auto* v = node.as_integer()) return v->get();
  if (const auto* v = node.as_floating_point()) return v->get();
  if (const auto* v = node.as_boolean()) return v->get();
  if (const auto* v = node.as_string()) return v->get();
  throw ParseError("", "unsupported TOML value type (dates and times are not used)");
}

std::string join(std::string_view scope, std::string_view key) {
  return scope.empty() ? std::string(key) : std::string(scope) + "." + std::string(key);
}

class Reader {
 public:
  Reader(const json& obj, std::string scope, std::set<std::string> allowed)
      : obj_(obj), scope_(std::move(scope)) {
    if (!obj_.is_object()) throw ParseError(scope_, "expected a table/object");
    for (const auto& [k, v] : obj_.items())
      if (!allowed.contains(k)) throw ParseError(join(scope_, k), "unknown key");
  }

  bool has(std::string_view key) const { return obj_.contains(std::string(key)); }
  const json& at(std::string_view key) const { return obj_.at(std::string(key)); }
  std::string path(std::string_view key) const { return join(scope_, key); }

  double number(std::string_view key, std::optional<double> fallback = std::nullopt) const {
    if (!has(key)) {
      if (fallback) return *fallback;
      throw ParseError(path(key), "missing required key");
    }
    const json& v = at(key);
    if (!v.is_number()) throw ParseError(path(key), "expected a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) throw ParseError(path(key), "must be finite");
    return d;
  }

  double positive(std::string_view key, std::optional<double> fallback = std::nullopt) const {
    const double d = number(key, fallback);
    if (!(d > 0.0)) throw ParseError(path(key), "must be positive");
    return d;
  }

  std::int64_t integer(std::string_view key, std::int64_t fallback, std::int64_t lo) const {
    if (!has(key)) return fallback;
    const json& v = at(key);
    if (!v.is_number_integer()) throw ParseError(path(key), "expected an integer");
    if (v.is_number_unsigned() && v.get<std::uint64_t>() > static_cast<std::uint64_t>(INT64_MAX))
      throw ParseError(path(key), "out of range");
    const std::int64_t i = v.get<std::int64_t>();
    if (i < lo) throw ParseError(path(key), "must be at least " + std::to_string(lo));
    return i;
  }

 private:
  const json& obj_;
  std::string scope_;
};

std::vector<Position2D> read_users(const json& v) {
  if (!v.is_array() || v.empty()) throw ParseError("users", "expected a non-empty list of [x, y] pairs");
  std::vector<Position2D> users;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const json& p = v[i];
    const std::string key = "users[" + std::to_string(i) + "]";
    if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number())
      throw ParseError(key, "expected [x, y] in meters");
    const Position2D q{p[0].get<double>(), p[1].get<double>()};
    if (!std::isfinite(q.x) || !std::isfinite(q.y)) throw ParseError(key, "coordinates must be finite");
    users.push_back(q);
  }
  return users;
}

RandomLayout read_layout(const json& v) {
  const Reader r(v, "layout", {"seed", "count", "width_m", "height_m"});
  RandomLayout l;
  if (!r.has("seed")) throw ParseError("layout.seed", "missing required key");
  l.seed = static_cast<std::uint64_t>(r.integer("seed", 0, 0));
  if (!r.has("count")) throw ParseError("layout.count", "missing required key");
  l.count = static_cast<std::size_t>(r.integer("count", 0, 1));
  l.width = r.positive("width_m");
  l.height = r.positive("height_m");
  return l;
}

SolverSettings read_solver(const json& v) {
  const Reader r(v, "solver",
                 {"dual_tol", "dual_max_iters", "recovery_tol", "wpt_grid_m", "static_grid_m", "slots", "scp_tol",
                  "scp_max_iters", "seed"});
  SolverSettings s;
  s.dual_tol = r.positive("dual_tol", s.dual_tol);
  s.dual_max_iters = static_cast<int>(r.integer("dual_max_iters", s.dual_max_iters, 0));
  s.recovery_tol = r.positive("recovery_tol", s.recovery_tol);
  s.wpt_grid_m = r.number("wpt_grid_m", s.wpt_grid_m);
  if (s.wpt_grid_m < 0.0) throw ParseError("solver.wpt_grid_m", "must be nonnegative");
  s.static_grid_m = r.number("static_grid_m", s.static_grid_m);
  if (s.static_grid_m < 0.0) throw ParseError("solver.static_grid_m", "must be nonnegative");
  s.slots = static_cast<int>(r.integer("slots", s.slots, 0));
  s.scp_tol = r.positive("scp_tol", s.scp_tol);
  s.scp_max_iters = static_cast<int>(r.integer("scp_max_iters", s.scp_max_iters, 1));
  s.seed = static_cast<std::uint64_t>(r.integer("seed", 0, 0));
  return s;
}

ScenarioFile from_document(const json& doc, std::string name) {
  const Reader r(doc, "",
                 {"name", "users", "layout", "altitude_m", "beta0_db", "sigma2_dbm", "eta", "p_dbm", "vmax_mps",
                  "period_s", "solver"});
  ScenarioFile f;
  f.name = std::move(name);
  if (r.has("name")) {
    if (!r.at("name").is_string() || r.at("name").get<std::string>().empty())
      throw ParseError("name", "expected a non-empty string");
    f.name = r.at("name").get<std::string>();
  }
  if (f.name.find_first_of("/\\") != std::string::npos || f.name == "." || f.name == "..")
    throw ParseError("name", "must be usable as a directory name");

  if (r.has("users") == r.has("layout")) throw ParseError("users", "give exactly one of 'users' and 'layout'");
  if (r.has("users")) {
    f.params.users = read_users(r.at("users"));
  } else {
    f.layout = read_layout(r.at("layout"));
    f.params.users = f.layout->generate();
  }

  // Defaults are the usual simulation constants: H = 5 m, beta0 = -30 dB,
  // sigma^2 = -80 dBm, eta = 0.5, P = 40 dBm, vmax = 10 m/s.
  f.params.altitude = r.positive("altitude_m", 5.0);
  f.params.beta0 = db_to_linear(r.number("beta0_db", -30.0));
  f.params.sigma2 = dbm_to_watts(r.number("sigma2_dbm", -80.0));
  f.params.eta = r.number("eta", 0.5);
  if (!(f.params.eta > 0.0 && f.params.eta <= 1.0)) throw ParseError("eta", "must lie in (0, 1]");
  f.params.power = dbm_to_watts(r.number("p_dbm", 40.0));
  f.params.vmax = r.positive("vmax_mps", 10.0);
  f.params.period = r.positive("period_s");
  if (r.has("solver")) f.solver = read_solver(r.at("solver"));

  try {
    (void)Scenario(f.params);
  } catch (const std::exception& e) {
    throw ParseError("", std::string("invalid scenario: ") + e.what());
  }
  return f;
}

}  // namespace

Format format_for(const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  if (ext == ".json") return Format::Json;
  if (ext == ".toml") return Format::Toml;
  throw ParseError("", "unrecognized scenario extension '" + ext + "' (use .json or .toml)");
}

ScenarioFile parse_scenario(std::string_view text, Format format, std::string name) {
  json doc;
  if (format == Format::Json) {
    try {
      doc = json::parse(text);
    } catch (const json::parse_error& e) {
      throw ParseError("", std::string("JSON syntax error: ") + e.what());
    }
  } else {
    try {
      doc = toml_to_json(toml::parse(text));
    } catch (const toml::parse_error& e) {
      std::ostringstream os;
      os << "TOML syntax error at line " << e.source().begin.line << ": " << e.description();
      throw ParseError("", os.str());
    }
  }
  return from_document(doc, std::move(name));
}

ScenarioFile load_scenario(const std::filesystem::path& path) {
  const Format format = format_for(path);
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("", "cannot open scenario file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str(), format, path.stem().string());
}

std::string scenario_digest(const Scenario& scn) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  const auto feed = [&](std::uint64_t word) {
    for (int b = 0; b < 8; ++b) {
      h ^= (word >> (8 * b)) & 0xffU;
      h *= 0x100000001b3ULL;
    }
  };
  const auto feed_double = [&](double d) { feed(std::bit_cast<std::uint64_t>(d)); };
  feed(scn.num_users());
  for (const auto& u : scn.users()) {
    feed_double(u.x);
    feed_double(u.y);
  }
  for (double d : {scn.altitude(), scn.beta0(), scn.sigma2(), scn.eta(), scn.power(), scn.vmax(), scn.period()})
    feed_double(d);
  char out[17];
  std::snprintf(out, sizeof out, "%016llx", static_cast<unsigned long long>(h));
  return out;
}

}  // namespace wpcn::io
