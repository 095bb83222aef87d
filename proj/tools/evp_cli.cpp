// evp: command-line front end for exact-rational critical-point analysis.
//
// Subcommands: gadget (generate function codes from combinatorial data),
// search (free / localized epsilon-critical-point search with certificate
// output), verify (re-check a certificate against its function code),
// envelope (CSV sampling of lower Lipschitz envelopes), embed (piecewise-
// linear breakpoint lists for the curve-space embeddings).
//
// Exit codes: 0 success / verified; 2 invalid input (bad flags, malformed
// files, schema violations); 3 search stopped by budget or iteration
// exhaustion without a passing certificate; 4 verification failed.
//
// All numbers cross the boundary as exact rationals ({"num","den"} strings
// in JSON, num/den literals in CSV); outputs are written atomically and are
// byte-deterministic given the same arguments and input bytes.

#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "evp/envelope.hpp"
#include "evp/gadgets.hpp"
#include "evp/search.hpp"
#include "evp/serialize.hpp"
#include "../src/json_util.hpp"

namespace {

using evp::jsonu::json;

constexpr int kExitOk = 0;
constexpr int kExitInvalid = 2;
constexpr int kExitBudget = 3;
constexpr int kExitVerify = 4;

struct GlobalOpts {
  std::uint64_t seed_order = 0;
  std::string manifest_path;
};

/// Inputs read during the run, recorded as path -> content digest.
struct InputLog {
  std::vector<std::pair<std::string, std::string>> entries;

  std::string read(const std::string& path) {
    std::string content = evp::read_file(path);
    entries.emplace_back(path, evp::content_digest(content));
    return content;
  }
};

void emit(const std::string& out_path, const std::string& content) {
  if (out_path.empty() || out_path == "-") {
    std::cout << content << "\n";
    return;
  }
  evp::write_file_atomic(out_path, content);
}

void write_manifest(const GlobalOpts& g, const std::string& command,
                    const std::vector<std::string>& argv, const json& parameters,
                    const InputLog& inputs, const std::string& outcome) {
  if (g.manifest_path.empty()) return;
  evp::RunManifest m;
  m.command = command;
  m.argv = argv;
  m.parameters = parameters.dump();
  m.inputs = inputs.entries;
  m.outcome = outcome;
  evp::write_file_atomic(g.manifest_path, evp::manifest_document(m));
}

/// Point literal: a bare rational ("1/3", "0"), a JSON point object, or a
/// JSON array of naturals (a sequence-space point).
evp::Point parse_point(const std::string& text) {
  std::string t = text;
  if (!t.empty() && (t[0] == '{' || t[0] == '[')) {
    json j = json::parse(t, nullptr, false);
    if (j.is_discarded()) throw std::invalid_argument("point literal: not valid JSON");
    if (j.is_array()) {
      evp::Seq s;
      for (const auto& v : j) s.push_back(v.get<std::uint32_t>());
      return evp::Point(std::move(s));
    }
    return evp::jsonu::point_from_json(j);
  }
  return evp::Point(evp::parse_rat(t));
}

/// Stream formula "B", "B+2^-(n+K)", or "B-2^-(n+K)" evaluated at
/// n = 0..prefix-1.  Covers arithmetic streams built from a rational base
/// and one dyadic tail term.
std::vector<evp::Rat> eval_stream_formula(const std::string& formula, int prefix) {
  if (prefix <= 0) throw std::invalid_argument("stream prefix must be positive");
  std::string f;
  for (char c : formula)
    if (!std::isspace(static_cast<unsigned char>(c))) f.push_back(c);
  std::string base_text = f;
  int sign = 0;
  long k = 0;
  auto pos = f.find("2^-(n+");
  if (pos != std::string::npos) {
    if (pos == 0 || (f[pos - 1] != '+' && f[pos - 1] != '-'))
      throw std::invalid_argument("stream formula: expected +/- before the dyadic term");
    sign = f[pos - 1] == '+' ? 1 : -1;
    base_text = f.substr(0, pos - 1);
    std::string tail = f.substr(pos + 6);
    if (tail.empty() || tail.back() != ')')
      throw std::invalid_argument("stream formula: unterminated dyadic term");
    k = std::stol(tail.substr(0, tail.size() - 1));
    if (k < 0 || k > 64) throw std::invalid_argument("stream formula: shift out of range");
  }
  evp::Rat base = base_text.empty() ? evp::Rat(0) : evp::parse_rat(base_text);
  std::vector<evp::Rat> c;
  for (int n = 0; n < prefix; ++n) {
    evp::Rat v = base;
    if (sign != 0) v += evp::Rat(sign) * evp::pow2(-(static_cast<long>(n) + k));
    c.push_back(v);
  }
  return c;
}

evp::TreeSpec tree_from_file(InputLog& log, const std::string& path) {
  json j = json::parse(log.read(path), nullptr, false);
  if (j.is_discarded()) throw std::invalid_argument(path + ": not valid JSON");
  try {
    return evp::jsonu::tree_from_json(j);
  } catch (const std::exception& e) {
    throw std::invalid_argument(path + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// gadget

struct GadgetArgs {
  std::string type;
  std::string tree_path;     // wkl
  std::string target = "cantor";
  std::string table_path;    // aca-inj: JSON [[a, h(a)], ...]
  std::string pairs;         // aca-inj inline: "a:h,a:h"
  std::uint32_t levels = 3;
  std::string cn_formula;    // aca-sup: closed form
  int prefix = 8;
  std::string c_list;        // aca-sup inline: comma-separated rationals
  std::string trees_path;    // pi11: JSON array of tree specs
  std::string out;
};

int run_gadget(const GlobalOpts& g, const GadgetArgs& a,
               const std::vector<std::string>& argv) {
  InputLog log;
  std::string doc;
  json params;
  params["type"] = a.type;
  if (a.type == "wkl") {
    if (a.tree_path.empty()) throw std::invalid_argument("gadget wkl: --tree required");
    if (a.target != "cantor" && a.target != "unit")
      throw std::invalid_argument("gadget wkl: --target must be cantor or unit");
    evp::TreeSpec tree = tree_from_file(log, a.tree_path);
    auto gadget = evp::wkl_gadget(
        tree, a.target == "cantor" ? evp::WklTarget::Cantor : evp::WklTarget::Unit);
    doc = evp::code_document(gadget.code);
    params["target"] = a.target;
  } else if (a.type == "aca-inj") {
    std::vector<std::pair<std::uint32_t, std::uint32_t>> table;
    if (!a.table_path.empty()) {
      json j = json::parse(log.read(a.table_path), nullptr, false);
      if (j.is_discarded() || !j.is_array())
        throw std::invalid_argument(a.table_path + ": expected a JSON array of pairs");
      for (const auto& row : j) {
        if (!row.is_array() || row.size() != 2)
          throw std::invalid_argument(a.table_path + ": rows must be [a, h(a)] pairs");
        table.emplace_back(row[0].get<std::uint32_t>(), row[1].get<std::uint32_t>());
      }
    } else if (!a.pairs.empty()) {
      std::stringstream ss(a.pairs);
      std::string item;
      while (std::getline(ss, item, ',')) {
        auto colon = item.find(':');
        if (colon == std::string::npos)
          throw std::invalid_argument("gadget aca-inj: --pairs entries are a:h(a)");
        table.emplace_back(static_cast<std::uint32_t>(std::stoul(item.substr(0, colon))),
                           static_cast<std::uint32_t>(std::stoul(item.substr(colon + 1))));
      }
    } else {
      throw std::invalid_argument("gadget aca-inj: --table or --pairs required");
    }
    auto gadget = evp::aca_injection_gadget(std::move(table), a.levels);
    doc = evp::code_document(gadget.code);
    params["levels"] = a.levels;
  } else if (a.type == "aca-sup") {
    std::vector<evp::Rat> c;
    if (!a.cn_formula.empty()) {
      c = eval_stream_formula(a.cn_formula, a.prefix);
      params["cn"] = a.cn_formula;
      params["prefix"] = a.prefix;
    } else if (!a.c_list.empty()) {
      std::stringstream ss(a.c_list);
      std::string item;
      while (std::getline(ss, item, ',')) c.push_back(evp::parse_rat(item));
    } else {
      throw std::invalid_argument("gadget aca-sup: --cn or --c required");
    }
    auto gadget = evp::aca_sup_gadget(std::move(c));
    doc = evp::code_document(gadget.code);
  } else if (a.type == "pi11") {
    if (a.trees_path.empty()) throw std::invalid_argument("gadget pi11: --trees required");
    json j = json::parse(log.read(a.trees_path), nullptr, false);
    if (j.is_discarded() || !j.is_array())
      throw std::invalid_argument(a.trees_path + ": expected a JSON array of tree specs");
    std::vector<evp::TreeSpec> trees;
    for (const auto& t : j) {
      try {
        trees.push_back(evp::jsonu::tree_from_json(t));
      } catch (const std::exception& e) {
        throw std::invalid_argument(a.trees_path + ": " + e.what());
      }
    }
    auto gadget = evp::pi11_gadget(std::move(trees));
    doc = evp::code_document(gadget.code);
  } else {
    throw std::invalid_argument("gadget: --type must be wkl, aca-inj, aca-sup, or pi11");
  }
  emit(a.out, doc);
  write_manifest(g, "gadget", argv, params, log,
                 "code written (" + evp::content_digest(doc) + ")");
  return kExitOk;
}

// ---------------------------------------------------------------------------
// search

struct SearchArgs {
  std::string code_path;
  std::string principle = "fvp";
  std::string epsilon = "1";
  int resolution = 8;
  long budget = 4096;
  int max_iters = 64;
  std::string slack;
  std::string x0;
  std::string region;  // JSON text or @file
  std::string out;
};

evp::SearchParams make_params(const GlobalOpts& g, const SearchArgs& a, InputLog& log) {
  evp::SearchParams p;
  p.epsilon = evp::parse_rat(a.epsilon);
  p.resolution = a.resolution;
  p.budget = a.budget;
  p.max_iters = a.max_iters;
  if (!a.slack.empty()) p.slack = evp::parse_rat(a.slack);
  if (!a.region.empty()) {
    std::string text =
        a.region[0] == '@' ? log.read(a.region.substr(1)) : a.region;
    p.region = evp::region_from_text(text);
  }
  p.seed_order = g.seed_order;
  return p;
}

/// Non-compact kinds need a net restriction; fall back to the region the
/// code itself enumerates over when the caller gives none.
void default_region(evp::SearchParams& p, const evp::Region* enum_region) {
  if (!p.region && enum_region != nullptr) p.region = *enum_region;
}

int run_search(const GlobalOpts& g, const SearchArgs& a,
               const std::vector<std::string>& argv) {
  InputLog log;
  evp::LoadedCode code = evp::load_code_document(log.read(a.code_path));
  evp::SearchParams params = make_params(g, a, log);
  default_region(params, code.is_cont() ? code.cont->backend().enum_region()
                                        : code.lsc->backend().enum_region());
  evp::SearchResult result = [&] {
    if (a.principle == "fvp") {
      return code.is_cont() ? evp::fvp_search(*code.cont, params)
                            : evp::fvp_search(*code.lsc, params);
    }
    if (a.principle == "lvp") {
      if (a.x0.empty()) throw std::invalid_argument("search lvp: --x0 required");
      evp::Point x0 = parse_point(a.x0);
      return code.is_cont() ? evp::lvp_search(*code.cont, x0, params)
                            : evp::lvp_search(*code.lsc, x0, params);
    }
    throw std::invalid_argument("search: --principle must be fvp or lvp");
  }();
  std::string doc = evp::certificate_document(result.certificate);
  emit(a.out, doc);
  json params_json;
  params_json["principle"] = a.principle;
  params_json["epsilon"] = evp::jsonu::rat_to_json(params.epsilon);
  params_json["resolution"] = params.resolution;
  params_json["budget"] = params.budget;
  params_json["max_iters"] = params.max_iters;
  params_json["seed_order"] = params.seed_order;
  if (!a.x0.empty()) params_json["x0"] = a.x0;
  bool pass = result.certificate.pass &&
              (!result.certificate.localization || result.certificate.localization->pass);
  write_manifest(g, "search", argv, params_json, log,
                 pass ? "certificate pass (" + evp::content_digest(doc) + ")"
                      : "certificate fail: " + result.state.stop_reason);
  if (!pass) {
    std::cerr << "search: no passing certificate (" << result.state.stop_reason
              << "); retry with a larger --budget or finer --resolution\n";
    return kExitBudget;
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// verify

struct VerifyArgs {
  std::string code_path;
  std::string cert_path;
};

int run_verify(const GlobalOpts& g, const VerifyArgs& a,
               const std::vector<std::string>& argv) {
  InputLog log;
  evp::LoadedCode code = evp::load_code_document(log.read(a.code_path));
  evp::CriticalityCertificate cert =
      evp::certificate_from_document(log.read(a.cert_path));

  bool consistent = evp::recheck_certificate(cert);
  evp::SearchParams params = cert.params;
  default_region(params, code.is_cont() ? code.cont->backend().enum_region()
                                        : code.lsc->backend().enum_region());
  evp::CriticalityCertificate fresh =
      code.is_cont() ? evp::is_critical(*code.cont, cert.x_star, params, cert.delta)
                     : evp::is_critical(*code.lsc, cert.x_star, params, cert.delta);

  bool localization_ok = true;
  if (cert.localization) {
    // Re-derive the localization inequality from fresh evidence:
    // eps*d(x0,x*) <= f(x0) - f(x*) + slack, compared conservatively.
    evp::LscCode f = code.as_lsc();
    const auto& l = *cert.localization;
    evp::Rat d = evp::dist(f.space(), l.x0, cert.x_star);
    evp::ExtRat lo_x0 = f.value_lower(l.x0, params.budget);
    evp::ExtRat up_x = f.upper_evidence(cert.x_star);
    localization_ok = lo_x0.finite() && up_x.finite() &&
                      params.epsilon * d <= lo_x0.get() - up_x.get() + cert.slack;
  }

  bool pass = consistent && fresh.pass && cert.pass && localization_ok;
  json params_json;
  params_json["certificate"] = a.cert_path;
  write_manifest(g, "verify", argv, params_json, log,
                 pass ? "verified" : "verification failed");
  if (!pass) {
    if (!consistent) std::cout << "verify: certificate rows do not support its verdict\n";
    if (!cert.pass) std::cout << "verify: certificate records a failing verdict\n";
    if (!localization_ok) std::cout << "verify: localization inequality failed\n";
    if (!fresh.pass && fresh.witness) {
      std::cout << "verify: criticality fails; witness y = "
                << evp::jsonu::point_to_json(fresh.witness->y).dump()
                << " distance " << evp::rat_str(fresh.witness->distance)
                << " f_lower(y) " << evp::rat_str(fresh.witness->f_lower_y)
                << " f_upper(x*) " << evp::rat_str(fresh.witness->f_upper_x) << "\n";
    }
    return kExitVerify;
  }
  std::cout << "verify: pass\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// envelope

struct EnvelopeArgs {
  std::string code_path;
  std::string alpha = "1";
  int resolution = 8;
  int grid = 3;
  std::string region;
  std::string out;
};

int run_envelope(const GlobalOpts& g, const EnvelopeArgs& a,
                 const std::vector<std::string>& argv) {
  InputLog log;
  evp::LoadedCode code = evp::load_code_document(log.read(a.code_path));
  evp::LscCode f = code.as_lsc();
  std::optional<evp::Region> region;
  if (!a.region.empty()) {
    std::string text = a.region[0] == '@' ? log.read(a.region.substr(1)) : a.region;
    region = evp::region_from_text(text);
  } else if (const evp::Region* r = f.backend().enum_region()) {
    region = *r;
  }
  evp::Rat alpha = evp::parse_rat(a.alpha);
  std::vector<evp::Point> grid_points =
      evp::net(f.space(), a.grid, region ? &*region : nullptr);
  std::ostringstream csv;
  csv << "x,lo,hi,alpha,resolution\n";
  for (const auto& x : grid_points) {
    evp::Bracket b =
        evp::envelope_value(evp::EnvelopeQuery{f, alpha, x, a.resolution, region});
    std::string xs = x.is_rat() ? evp::rat_str(x.rat())
                                : evp::jsonu::point_to_json(x).dump();
    csv << xs << "," << evp::rat_str(b.lo) << "," << evp::ext_str(b.hi) << ","
        << evp::rat_str(alpha) << "," << a.resolution << "\n";
  }
  emit(a.out, csv.str());
  json params_json;
  params_json["alpha"] = evp::jsonu::rat_to_json(alpha);
  params_json["resolution"] = a.resolution;
  params_json["grid"] = a.grid;
  write_manifest(g, "envelope", argv, params_json, log,
                 "csv written (" + evp::content_digest(csv.str()) + ")");
  return kExitOk;
}

// ---------------------------------------------------------------------------
// embed

struct EmbedArgs {
  std::string kind = "unit";
  std::string point;
  std::uint32_t depth = 4;
  std::string out;
};

int run_embed(const GlobalOpts& g, const EmbedArgs& a,
              const std::vector<std::string>& argv) {
  InputLog log;
  if (a.point.empty()) throw std::invalid_argument("embed: --point required");
  evp::Point x = parse_point(a.point);
  evp::Point curve = [&] {
    if (a.kind == "unit") return evp::embed_unit(x.rat());
    if (a.kind == "baire") return evp::embed_baire(x, a.depth);
    throw std::invalid_argument("embed: --kind must be unit or baire");
  }();
  json j;
  j["schema"] = "embedding";
  j["version"] = evp::kSchemaVersion;
  j["kind"] = a.kind;
  j["source"] = evp::jsonu::point_to_json(x);
  json breakpoints = json::array();
  for (const auto& kn : curve.pl().knots)
    breakpoints.push_back(json{{"x", evp::jsonu::rat_to_json(kn.first)},
                               {"y", evp::jsonu::rat_to_json(kn.second)}});
  j["breakpoints"] = breakpoints;
  std::string doc = j.dump();
  emit(a.out, doc);
  json params_json;
  params_json["kind"] = a.kind;
  params_json["point"] = a.point;
  params_json["depth"] = a.depth;
  write_manifest(g, "embed", argv, params_json, log,
                 "breakpoints written (" + evp::content_digest(doc) + ")");
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Exact-rational critical-point analysis: gadget generation, "
               "epsilon-critical search, certificate verification, envelope "
               "sampling, and curve-space embeddings"};
  app.require_subcommand(1);

  GlobalOpts g;
  app.add_option("--seed-order", g.seed_order,
                 "Permutation seed for dense-enumeration scan order (0 = fixed "
                 "order; affects which iterate is found, never verdicts)");
  app.add_option("--manifest", g.manifest_path,
                 "Write a run manifest (command, parameters, input digests, "
                 "outcome) to this path");

  GadgetArgs ga;
  CLI::App* gadget = app.add_subcommand("gadget", "Generate a function code");
  gadget->add_option("--type", ga.type, "Gadget family: wkl, aca-inj, aca-sup, pi11")
      ->required();
  gadget->add_option("--tree", ga.tree_path, "Tree spec JSON file (wkl)");
  gadget->add_option("--target", ga.target, "wkl target space: cantor or unit");
  gadget->add_option("--table", ga.table_path, "Injection table JSON file (aca-inj)");
  gadget->add_option("--pairs", ga.pairs, "Inline injection table a:h,a:h (aca-inj)");
  gadget->add_option("--levels", ga.levels, "Level count N (aca-inj)");
  gadget->add_option("--cn", ga.cn_formula,
                     "Stream formula, e.g. \"1/2-2^-(n+1)\" (aca-sup)");
  gadget->add_option("--prefix", ga.prefix, "Stream prefix length (aca-sup)");
  gadget->add_option("--c", ga.c_list, "Inline stream, comma-separated rationals");
  gadget->add_option("--trees", ga.trees_path, "Tree family JSON file (pi11)");
  gadget->add_option("--out", ga.out, "Output path (default stdout)");

  SearchArgs sa;
  CLI::App* search = app.add_subcommand("search", "Search for an epsilon-critical point");
  search->add_option("--code", sa.code_path, "Function-code JSON file")->required();
  search->add_option("--principle", sa.principle, "fvp (free) or lvp (localized)");
  search->add_option("--epsilon", sa.epsilon, "Criticality scale, rational N/D");
  search->add_option("--resolution", sa.resolution, "Net fineness k (nets at 2^-k)");
  search->add_option("--budget", sa.budget, "Evidence budget per point");
  search->add_option("--max-iters", sa.max_iters, "Descent iteration cap");
  search->add_option("--slack", sa.slack, "Certificate tolerance, rational N/D");
  search->add_option("--x0", sa.x0, "Base point (lvp): rational, JSON point, or [seq]");
  search->add_option("--region", sa.region, "Net restriction: JSON text or @file");
  search->add_option("--out", sa.out, "Certificate path (default stdout)");

  VerifyArgs va;
  CLI::App* verify = app.add_subcommand("verify", "Re-check a certificate");
  verify->add_option("--code", va.code_path, "Function-code JSON file")->required();
  verify->add_option("--certificate", va.cert_path, "Certificate JSON file")->required();

  EnvelopeArgs ea;
  CLI::App* envelope = app.add_subcommand("envelope", "Sample a lower envelope to CSV");
  envelope->add_option("--code", ea.code_path, "Function-code JSON file")->required();
  envelope->add_option("--alpha", ea.alpha, "Envelope slope, rational N/D");
  envelope->add_option("--resolution", ea.resolution, "Cover fineness k");
  envelope->add_option("--grid", ea.grid, "Sample grid fineness (2^grid+1 points)");
  envelope->add_option("--region", ea.region, "Net restriction: JSON text or @file");
  envelope->add_option("--out", ea.out, "CSV path (default stdout)");

  EmbedArgs ma;
  CLI::App* embed = app.add_subcommand("embed", "Embed a point as a curve");
  embed->add_option("--kind", ma.kind, "unit or baire");
  embed->add_option("--point", ma.point, "Source point literal");
  embed->add_option("--depth", ma.depth, "Hat-sum truncation depth (baire)");
  embed->add_option("--out", ma.out, "Breakpoint-list path (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInvalid;
  }

  std::vector<std::string> raw_argv(argv, argv + argc);
  try {
    if (gadget->parsed()) return run_gadget(g, ga, raw_argv);
    if (search->parsed()) return run_search(g, sa, raw_argv);
    if (verify->parsed()) return run_verify(g, va, raw_argv);
    if (envelope->parsed()) return run_envelope(g, ea, raw_argv);
    if (embed->parsed()) return run_embed(g, ma, raw_argv);
  } catch (const evp::EmptySupportError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitBudget;
  } catch (const evp::UnsupportedPointError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInvalid;
  }
  return kExitInvalid;
}
