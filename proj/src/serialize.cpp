#include "evp/serialize.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "evp/envelope.hpp"
#include "evp/gadgets.hpp"
#include "json_util.hpp"

namespace evp {
namespace {

using jsonu::json;

json parse_or_throw(const std::string& text, const char* what) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) throw SchemaError(std::string(what) + ": not valid JSON");
  return j;
}

void require(bool ok, const std::string& msg) {
  if (!ok) throw SchemaError(msg);
}

const json& field(const json& j, const char* key) {
  auto it = j.find(key);
  require(it != j.end(), std::string("missing field \"") + key + "\"");
  return *it;
}

void check_wrapper(const json& j, const char* schema) {
  require(j.is_object(), "document is not a JSON object");
  require(field(j, "schema") == schema,
          std::string("expected schema \"") + schema + "\"");
  require(field(j, "version").is_number_integer() &&
              field(j, "version").get<int>() == kSchemaVersion,
          "unsupported schema version");
}

template <typename F>
auto reframe(const char* what, F&& f) {
  try {
    return f();
  } catch (const SchemaError&) {
    throw;
  } catch (const json::exception& e) {
    throw SchemaError(std::string(what) + ": " + e.what());
  } catch (const std::invalid_argument& e) {
    throw SchemaError(std::string(what) + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Regions.

json region_to_json(const Region& r) {
  json j = json::object();
  if (r.ball) j["ball"] = jsonu::ball_to_json(*r.ball);
  if (r.baire)
    j["baire"] = {{"branching", r.baire->branching}, {"depth", r.baire->depth}};
  if (r.explicit_net) {
    json pts = json::array();
    for (const auto& p : r.explicit_net->points) pts.push_back(jsonu::point_to_json(p));
    j["net"] = {{"points", pts},
                {"covering_radius", jsonu::rat_to_json(r.explicit_net->covering_radius)}};
  }
  return j;
}

Region region_from_json(const json& j) {
  require(j.is_object(), "region: object expected");
  Region r;
  if (j.contains("ball")) r.ball = jsonu::ball_from_json(j.at("ball"));
  if (j.contains("baire")) {
    BaireBounds b;
    b.branching = j.at("baire").at("branching").get<std::uint32_t>();
    b.depth = j.at("baire").at("depth").get<std::uint32_t>();
    r.baire = b;
  }
  if (j.contains("net")) {
    ExplicitNet n;
    for (const auto& p : j.at("net").at("points"))
      n.points.push_back(jsonu::point_from_json(p));
    n.covering_radius = jsonu::rat_from_json(j.at("net").at("covering_radius"));
    r.explicit_net = std::move(n);
  }
  return r;
}

// ---------------------------------------------------------------------------
// Code recipes.

ContCode cont_from_tree(const json& j);
LscCode lsc_from_tree(const json& j);

ClosedSet closed_set_from_tree(const json& j) {
  const std::string kind = field(j, "set").get<std::string>();
  if (kind == "point") {
    Space s = jsonu::space_from_json(field(j, "space"));
    return closed_point_set(s, jsonu::point_from_json(field(j, "x")));
  }
  if (kind == "sublevel") {
    LscCode f = lsc_from_tree(field(j, "f"));
    return sublevel_closed_set(f, jsonu::point_from_json(field(j, "x0")),
                               jsonu::rat_from_json(field(j, "eps")),
                               jsonu::rat_from_json(field(j, "threshold")));
  }
  throw SchemaError("unknown closed-set kind \"" + kind + "\"");
}

std::vector<std::pair<Rat, Rat>> knots_from_json(const json& arr) {
  std::vector<std::pair<Rat, Rat>> knots;
  for (const auto& kn : arr)
    knots.emplace_back(jsonu::rat_from_json(kn.at("x")), jsonu::rat_from_json(kn.at("y")));
  return knots;
}

ContCode cont_from_tree(const json& j) {
  require(j.is_object(), "code node: object expected");
  const std::string op = field(j, "op").get<std::string>();
  if (op == "const-cont")
    return const_cont(jsonu::space_from_json(field(j, "space")),
                      jsonu::rat_from_json(field(j, "value")));
  if (op == "pl-cont")
    return pl_cont(jsonu::space_from_json(field(j, "space")),
                   knots_from_json(field(j, "knots")));
  if (op == "sampled-cont") {
    std::vector<std::pair<Point, Rat>> samples;
    for (const auto& sm : field(j, "samples"))
      samples.emplace_back(jsonu::point_from_json(sm.at("x")),
                           jsonu::rat_from_json(sm.at("y")));
    return cont_from_samples(jsonu::space_from_json(field(j, "space")),
                             std::move(samples),
                             Modulus{field(j, "shift").get<long>()});
  }
  if (op == "patch") {
    Space s = jsonu::space_from_json(field(j, "space"));
    std::vector<std::pair<std::vector<Ball>, ContCode>> pieces;
    for (const auto& pc : field(j, "pieces")) {
      std::vector<Ball> region;
      for (const auto& b : pc.at("region")) region.push_back(jsonu::ball_from_json(b));
      pieces.emplace_back(std::move(region), cont_from_tree(pc.at("code")));
    }
    return patch(s, std::move(pieces), field(j, "resolution").get<int>());
  }
  if (op == "scale-cont")
    return scale_cont(cont_from_tree(field(j, "f")),
                      jsonu::rat_from_json(field(j, "factor")));
  if (op == "min-const-cont")
    return min_const_cont(cont_from_tree(field(j, "f")),
                          jsonu::rat_from_json(field(j, "cap")));
  if (op == "envelope") {
    std::optional<Region> region;
    if (j.contains("region")) region = region_from_json(j.at("region"));
    return envelope_code(lsc_from_tree(field(j, "f")),
                         jsonu::rat_from_json(field(j, "alpha")),
                         field(j, "resolution").get<int>(), region);
  }
  if (op == "scaled-distance")
    return scaled_distance_kernel(jsonu::space_from_json(field(j, "space")),
                                  jsonu::rat_from_json(field(j, "alpha")));
  if (op == "wkl") {
    const std::string target = field(j, "target").get<std::string>();
    require(target == "cantor" || target == "unit", "wkl: unknown target");
    return wkl_gadget(jsonu::tree_from_json(field(j, "tree")),
                      target == "cantor" ? WklTarget::Cantor : WklTarget::Unit)
        .code;
  }
  if (op == "aca-injection") {
    std::vector<std::pair<std::uint32_t, std::uint32_t>> table;
    for (const auto& row : field(j, "table")) {
      require(row.is_array() && row.size() == 2, "aca-injection: table rows are pairs");
      table.emplace_back(row[0].get<std::uint32_t>(), row[1].get<std::uint32_t>());
    }
    return aca_injection_gadget(std::move(table), field(j, "levels").get<std::uint32_t>())
        .code;
  }
  throw SchemaError("unknown continuous op \"" + op + "\"");
}

LscCode lsc_from_tree(const json& j) {
  require(j.is_object(), "code node: object expected");
  const std::string op = field(j, "op").get<std::string>();
  if (op == "pl-lsc") {
    PiecewiseLscSpec spec;
    for (const auto& t : field(j, "cuts")) spec.cuts.push_back(jsonu::rat_from_json(t));
    for (const auto& pc : field(j, "pieces"))
      spec.pieces.push_back(PiecewiseLscSpec::Piece{pc.at("inf").get<bool>(),
                                                    jsonu::rat_from_json(pc.at("c0")),
                                                    jsonu::rat_from_json(pc.at("c1"))});
    for (const auto& v : field(j, "values")) spec.values.push_back(jsonu::ext_from_json(v));
    return pl_lsc(jsonu::space_from_json(field(j, "space")), std::move(spec));
  }
  if (op == "const-lsc")
    return lsc_const(jsonu::space_from_json(field(j, "space")),
                     jsonu::rat_from_json(field(j, "value")));
  if (op == "cont-to-lsc") return cont_to_lsc(cont_from_tree(field(j, "f")));
  if (op == "zero-on-closed")
    return lsc_zero_on_closed(lsc_from_tree(field(j, "h")),
                              closed_set_from_tree(field(j, "set")),
                              field(j, "budget").get<long>());
  if (op == "combine") {
    const std::string mode = field(j, "combine").get<std::string>();
    CombineOp cop;
    if (mode == "sum")
      cop = CombineOp::Sum;
    else if (mode == "max")
      cop = CombineOp::Max;
    else if (mode == "min")
      cop = CombineOp::Min;
    else
      throw SchemaError("combine: unknown mode \"" + mode + "\"");
    return lsc_combine(cop, lsc_from_tree(field(j, "f")), lsc_from_tree(field(j, "g")));
  }
  if (op == "add-dist")
    return lsc_add_scaled_distance(lsc_from_tree(field(j, "f")),
                                   jsonu::point_from_json(field(j, "x0")),
                                   jsonu::rat_from_json(field(j, "eps")));
  if (op == "epigraph")
    return epigraph_to_lsc(closed_set_from_tree(field(j, "epi")),
                           jsonu::space_from_json(field(j, "domain")),
                           jsonu::rat_from_json(field(j, "lo")),
                           jsonu::rat_from_json(field(j, "hi")),
                           field(j, "resolution").get<int>());
  if (op == "promote")
    return honest_promote_compact(lsc_from_tree(field(j, "f")),
                                  field(j, "resolution").get<int>());
  if (op == "scale-lsc")
    return scale_lsc(lsc_from_tree(field(j, "f")),
                     jsonu::rat_from_json(field(j, "factor")));
  if (op == "min-const-lsc")
    return min_const_lsc(lsc_from_tree(field(j, "f")),
                         jsonu::rat_from_json(field(j, "cap")));
  if (op == "aca-sup") {
    std::vector<Rat> c;
    for (const auto& v : field(j, "c")) c.push_back(jsonu::rat_from_json(v));
    return aca_sup_gadget(std::move(c)).code;
  }
  if (op == "pi11") {
    std::vector<TreeSpec> trees;
    for (const auto& t : field(j, "trees")) trees.push_back(jsonu::tree_from_json(t));
    return pi11_gadget(std::move(trees)).code;
  }
  throw SchemaError("unknown lsc op \"" + op + "\"");
}

json wrap_code(const std::string& serial, const char* flavor) {
  if (serial.empty())
    throw SchemaError(
        "code_document: the code has no construction recipe (built from "
        "non-serializable parts)");
  json j;
  j["schema"] = "code";
  j["version"] = kSchemaVersion;
  j["flavor"] = flavor;
  j["code"] = json::parse(serial);
  return j;
}

// ---------------------------------------------------------------------------
// Certificates.

json params_to_json(const SearchParams& p) {
  json j;
  j["epsilon"] = jsonu::rat_to_json(p.epsilon);
  j["resolution"] = p.resolution;
  j["budget"] = p.budget;
  j["max_iters"] = p.max_iters;
  if (p.slack) j["slack"] = jsonu::rat_to_json(*p.slack);
  if (p.region) j["region"] = region_to_json(*p.region);
  j["seed_order"] = p.seed_order;
  return j;
}

SearchParams params_from_json(const json& j) {
  SearchParams p;
  p.epsilon = jsonu::rat_from_json(field(j, "epsilon"));
  p.resolution = field(j, "resolution").get<int>();
  p.budget = field(j, "budget").get<long>();
  p.max_iters = field(j, "max_iters").get<int>();
  if (j.contains("slack")) p.slack = jsonu::rat_from_json(j.at("slack"));
  if (j.contains("region")) p.region = region_from_json(j.at("region"));
  p.seed_order = field(j, "seed_order").get<std::uint64_t>();
  return p;
}

}  // namespace

// ---------------------------------------------------------------------------
// Public entry points.

std::string code_document(const ContCode& f) {
  return reframe("code_document", [&] { return wrap_code(f.serial(), "cont").dump(); });
}

std::string code_document(const LscCode& f) {
  return reframe("code_document", [&] { return wrap_code(f.serial(), "lsc").dump(); });
}

LscCode LoadedCode::as_lsc() const {
  if (lsc) return *lsc;
  return cont_to_lsc(*cont);
}

LoadedCode load_code_document(const std::string& text) {
  return reframe("code document", [&]() -> LoadedCode {
    json j = parse_or_throw(text, "code document");
    check_wrapper(j, "code");
    const std::string flavor = field(j, "flavor").get<std::string>();
    if (flavor == "cont") return LoadedCode{cont_from_tree(field(j, "code")), std::nullopt};
    if (flavor == "lsc") return LoadedCode{std::nullopt, lsc_from_tree(field(j, "code"))};
    throw SchemaError("unknown code flavor \"" + flavor + "\"");
  });
}

ContCode cont_code_from_recipe(const std::string& recipe) {
  return reframe("code recipe",
                 [&] { return cont_from_tree(parse_or_throw(recipe, "code recipe")); });
}

LscCode lsc_code_from_recipe(const std::string& recipe) {
  return reframe("code recipe",
                 [&] { return lsc_from_tree(parse_or_throw(recipe, "code recipe")); });
}

std::string region_to_text(const Region& r) { return region_to_json(r).dump(); }

Region region_from_text(const std::string& text) {
  return reframe("region",
                 [&] { return region_from_json(parse_or_throw(text, "region")); });
}

std::string certificate_document(const CriticalityCertificate& cert) {
  json j;
  j["schema"] = "certificate";
  j["version"] = kSchemaVersion;
  j["x_star"] = jsonu::point_to_json(cert.x_star);
  j["params"] = params_to_json(cert.params);
  j["delta"] = jsonu::rat_to_json(cert.delta);
  j["slack"] = jsonu::rat_to_json(cert.slack);
  j["verification_resolution"] = cert.verification_resolution;
  j["f_upper_x"] = jsonu::rat_to_json(cert.f_upper_x);
  j["pass"] = cert.pass;
  if (cert.witness) {
    j["witness"] = json{{"y", jsonu::point_to_json(cert.witness->y)},
                        {"distance", jsonu::rat_to_json(cert.witness->distance)},
                        {"f_lower_y", jsonu::rat_to_json(cert.witness->f_lower_y)},
                        {"f_upper_x", jsonu::rat_to_json(cert.witness->f_upper_x)}};
  }
  json rows = json::array();
  for (const auto& r : cert.rows)
    rows.push_back(json{{"y", jsonu::point_to_json(r.y)},
                        {"distance", jsonu::rat_to_json(r.distance)},
                        {"f_lower", jsonu::ext_to_json(r.f_lower)}});
  j["rows"] = rows;
  if (cert.localization) {
    const auto& l = *cert.localization;
    j["localization"] = json{{"x0", jsonu::point_to_json(l.x0)},
                             {"distance", jsonu::rat_to_json(l.distance)},
                             {"f_lower_x0", jsonu::rat_to_json(l.f_lower_x0)},
                             {"f_upper_x", jsonu::rat_to_json(l.f_upper_x)},
                             {"pass", l.pass}};
  }
  return j.dump();
}

CriticalityCertificate certificate_from_document(const std::string& text) {
  return reframe("certificate", [&]() -> CriticalityCertificate {
    json j = parse_or_throw(text, "certificate");
    check_wrapper(j, "certificate");
    CriticalityCertificate cert{jsonu::point_from_json(field(j, "x_star")),
                                params_from_json(field(j, "params")),
                                jsonu::rat_from_json(field(j, "delta")),
                                jsonu::rat_from_json(field(j, "slack")),
                                field(j, "verification_resolution").get<int>(),
                                jsonu::rat_from_json(field(j, "f_upper_x")),
                                field(j, "pass").get<bool>(),
                                std::nullopt,
                                {},
                                std::nullopt};
    if (j.contains("witness")) {
      const json& w = j.at("witness");
      cert.witness = CriticalWitness{jsonu::point_from_json(field(w, "y")),
                                     jsonu::rat_from_json(field(w, "distance")),
                                     jsonu::rat_from_json(field(w, "f_lower_y")),
                                     jsonu::rat_from_json(field(w, "f_upper_x"))};
    }
    for (const auto& r : field(j, "rows"))
      cert.rows.push_back(EvidenceRow{jsonu::point_from_json(field(r, "y")),
                                      jsonu::rat_from_json(field(r, "distance")),
                                      jsonu::ext_from_json(field(r, "f_lower"))});
    if (j.contains("localization")) {
      const json& l = j.at("localization");
      cert.localization = LocalizationCheck{jsonu::point_from_json(field(l, "x0")),
                                            jsonu::rat_from_json(field(l, "distance")),
                                            jsonu::rat_from_json(field(l, "f_lower_x0")),
                                            jsonu::rat_from_json(field(l, "f_upper_x")),
                                            field(l, "pass").get<bool>()};
    }
    return cert;
  });
}

std::string manifest_document(const RunManifest& m) {
  json j;
  j["schema"] = "manifest";
  j["version"] = kSchemaVersion;
  j["command"] = m.command;
  j["argv"] = m.argv;
  j["parameters"] = m.parameters.empty() ? json::object()
                                         : parse_or_throw(m.parameters, "manifest parameters");
  json inputs = json::array();
  for (const auto& [path, digest] : m.inputs)
    inputs.push_back(json{{"path", path}, {"digest", digest}});
  j["inputs"] = inputs;
  j["tool_version"] = m.tool_version;
  j["outcome"] = m.outcome;
  return j.dump();
}

RunManifest manifest_from_document(const std::string& text) {
  return reframe("manifest", [&]() -> RunManifest {
    json j = parse_or_throw(text, "manifest");
    check_wrapper(j, "manifest");
    RunManifest m;
    m.command = field(j, "command").get<std::string>();
    for (const auto& a : field(j, "argv")) m.argv.push_back(a.get<std::string>());
    m.parameters = field(j, "parameters").dump();
    for (const auto& in : field(j, "inputs"))
      m.inputs.emplace_back(field(in, "path").get<std::string>(),
                            field(in, "digest").get<std::string>());
    m.tool_version = field(j, "tool_version").get<std::string>();
    m.outcome = field(j, "outcome").get<std::string>();
    return m;
  });
}

std::string content_digest(const std::string& content) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : content) {
    h ^= c;
    h *= 1099511628211ull;
  }
  static const char* hex = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = hex[h & 0xF];
    h >>= 4;
  }
  return out;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file_atomic(const std::string& path, const std::string& content) {
  std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp + " for writing");
    out << content;
    out.flush();
    if (!out) throw std::runtime_error("failed writing " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    std::remove(tmp.c_str());
    throw std::runtime_error("failed renaming " + tmp + " to " + path);
  }
}

}  // namespace evp
