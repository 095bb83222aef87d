#include <doctest.h>

#include <evp/codes.hpp>
#include <evp/gadgets.hpp>
#include <evp/search.hpp>
#include <evp/serialize.hpp>

#include <json.hpp>

#include <cstdio>
#include <cstdlib>
#include <string>
#include <sys/wait.h>
#include <vector>

using namespace evp;
using json = nlohmann::json;

namespace {

struct RunResult {
  int exit_code = -1;
  std::string out;
};

/// Runs the installed binary with the given argument string, capturing
/// stdout (stderr is dropped; the tests assert on exit codes and files).
RunResult run_cli(const std::string& args) {
  std::string cmd = std::string(EVP_CLI_PATH) + " " + args + " 2>/dev/null";
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::string out;
  char buf[4096];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof buf, pipe)) > 0) out.append(buf, n);
  int status = pclose(pipe);
  RunResult r;
  r.out = out;
  if (WIFEXITED(status)) r.exit_code = WEXITSTATUS(status);
  return r;
}

Rat rat_from_doc(const json& j) {
  return parse_rat(j.at("num").get<std::string>() + "/" + j.at("den").get<std::string>());
}

LscCode vee_lsc() {  // |x - 1/3|
  PiecewiseLscSpec spec;
  spec.cuts = {Rat(0), Rat(1, 3), Rat(1)};
  spec.pieces.push_back({false, Rat(1, 3), Rat(-1)});
  spec.pieces.push_back({false, Rat(-1, 3), Rat(1)});
  spec.values = {ExtRat(Rat(1, 3)), ExtRat(Rat(0)), ExtRat(Rat(2, 3))};
  return pl_lsc(Space::unit_interval(), std::move(spec));
}

LscCode w_lsc() {  // two exact minima, at 1/4 and 3/4
  PiecewiseLscSpec spec;
  spec.cuts = {Rat(0), Rat(1, 4), Rat(1, 2), Rat(3, 4), Rat(1)};
  spec.pieces.push_back({false, Rat(1, 4), Rat(-1)});
  spec.pieces.push_back({false, Rat(-1, 4), Rat(1)});
  spec.pieces.push_back({false, Rat(3, 4), Rat(-1)});
  spec.pieces.push_back({false, Rat(-3, 4), Rat(1)});
  spec.values = {ExtRat(Rat(1, 4)), ExtRat(Rat(0)), ExtRat(Rat(1, 4)), ExtRat(Rat(0)),
                 ExtRat(Rat(1, 4))};
  return pl_lsc(Space::unit_interval(), std::move(spec));
}

std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::string cur;
  for (char c : text) {
    if (c == '\n') {
      lines.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) lines.push_back(cur);
  return lines;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      cells.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  cells.push_back(cur);
  return cells;
}

}  // namespace

// ---------------------------------------------------------------------------

TEST_CASE("argument parsing maps to the invalid-input exit code") {
  CHECK(run_cli("--help").exit_code == 0);
  CHECK(run_cli("no-such-command").exit_code == 2);
  CHECK(run_cli("search").exit_code == 2);                       // missing --code
  CHECK(run_cli("gadget --type nonsense").exit_code == 2);
  CHECK(run_cli("verify --code missing.json --certificate also_missing.json").exit_code ==
        2);
}

TEST_CASE("gadget aca-sup: stream formula, loadable output, manifest") {
  RunResult r = run_cli(
      "--manifest cli_sup_manifest.json gadget --type aca-sup "
      "--cn \"1/2-2^-(n+1)\" --prefix 16 --out cli_sup_code.json");
  REQUIRE(r.exit_code == 0);

  std::string doc = read_file("cli_sup_code.json");
  LoadedCode code = load_code_document(doc);
  REQUIRE_FALSE(code.is_cont());
  Rat top = Rat(1, 2) - pow2(-16);
  CHECK(code.lsc->value_exact(Point(Rat(1, 4)))->get() == Rat(2));
  CHECK(code.lsc->value_exact(Point(top))->get() == top);
  CHECK(code.lsc->value_exact(Point(Rat(3, 4)))->get() == Rat(3, 4));

  RunManifest m = manifest_from_document(read_file("cli_sup_manifest.json"));
  CHECK(m.command == "gadget");
  CHECK(m.outcome.find("code written") != std::string::npos);
  CHECK(m.outcome.find(content_digest(doc)) != std::string::npos);
  CHECK(m.inputs.empty());  // formula gadgets read no files

  CHECK(run_cli("gadget --type aca-sup --cn \"1/2-2^-(n+\" --prefix 4").exit_code == 2);
  CHECK(run_cli("gadget --type aca-sup --c \"1/2,1/4\"").exit_code == 2);  // not increasing
}

TEST_CASE("gadget wkl and pi11 run from tree files") {
  write_file_atomic("cli_tree.json",
                    "{\"members\": [[], [0], [1], [0, 1]], \"depth_bound\": 8, "
                    "\"branching_bound\": 2}");
  RunResult r =
      run_cli("gadget --type wkl --tree cli_tree.json --target unit --out cli_wkl.json");
  REQUIRE(r.exit_code == 0);
  LoadedCode wkl = load_code_document(read_file("cli_wkl.json"));
  REQUIRE(wkl.is_cont());
  CHECK(wkl.cont->value_exact(Point(Rat(0))) == Rat(3));
  CHECK(wkl.cont->value_exact(Point(Rat(3, 32))) == Rat(1));
  CHECK(wkl.cont->value_exact(Point(Rat(3, 8))) == Rat(2));

  write_file_atomic("cli_tree_bad.json",
                    "{\"members\": [[], [0, 1]], \"depth_bound\": 8, "
                    "\"branching_bound\": 2}");  // not prefix-closed
  CHECK(run_cli("gadget --type wkl --tree cli_tree_bad.json --target unit").exit_code == 2);

  write_file_atomic("cli_family.json",
                    "[{\"members\": [[], [0], [0, 0]], \"depth_bound\": 2, "
                    "\"branching_bound\": 2},"
                    " {\"members\": [[], [1]], \"depth_bound\": 2, "
                    "\"branching_bound\": 2}]");
  REQUIRE(run_cli("gadget --type pi11 --trees cli_family.json --out cli_pi11.json")
              .exit_code == 0);
  LoadedCode fam = load_code_document(read_file("cli_pi11.json"));
  REQUIRE_FALSE(fam.is_cont());
  CHECK(fam.lsc->value_exact(Point(Seq{}))->get() == Rat(1, 2));

  RunResult inj = run_cli("gadget --type aca-inj --pairs 0:0,1:1,2:2 --levels 3 "
                          "--out cli_inj.json");
  REQUIRE(inj.exit_code == 0);
  LoadedCode injc = load_code_document(read_file("cli_inj.json"));
  REQUIRE(injc.is_cont());
  AcaInjectionGadget g = aca_injection_gadget({{0, 0}, {1, 1}, {2, 2}}, 3);
  CHECK(injc.cont->value_exact(aca_oracle_point(g)) == Rat(1, 8));
}

TEST_CASE("search produces a certificate that verify accepts") {
  write_file_atomic("cli_vee.json", code_document(vee_lsc()));
  RunResult s = run_cli(
      "search --code cli_vee.json --epsilon 1/2 --resolution 8 --out cli_cert.json");
  REQUIRE(s.exit_code == 0);

  CriticalityCertificate cert = certificate_from_document(read_file("cli_cert.json"));
  CHECK(cert.pass);
  CHECK(rat_abs(cert.x_star.rat() - Rat(1, 3)) <= pow2(-8));

  RunResult v = run_cli("verify --code cli_vee.json --certificate cli_cert.json");
  CHECK(v.exit_code == 0);
  CHECK(v.out.find("verify: pass") != std::string::npos);
}

TEST_CASE("verify rejects tampered certificates with the audit exit code") {
  write_file_atomic("cli_vee.json", code_document(vee_lsc()));
  REQUIRE(run_cli("search --code cli_vee.json --epsilon 1/2 --resolution 8 "
                  "--out cli_cert.json")
              .exit_code == 0);
  CriticalityCertificate cert = certificate_from_document(read_file("cli_cert.json"));

  // moved claim point: fresh criticality fails and a witness is printed
  CriticalityCertificate moved = cert;
  moved.x_star = Point(Rat(1));
  write_file_atomic("cli_cert_moved.json", certificate_document(moved));
  RunResult rm = run_cli("verify --code cli_vee.json --certificate cli_cert_moved.json");
  CHECK(rm.exit_code == 4);
  CHECK(rm.out.find("criticality fails") != std::string::npos);
  CHECK(rm.out.find("witness") != std::string::npos);

  // weakened row: the recorded rows no longer support the recorded verdict
  CriticalityCertificate weak = cert;
  REQUIRE_FALSE(weak.rows.empty());
  weak.rows[0].f_lower = ExtRat(Rat(-100));
  weak.rows[0].distance = Rat(1, 4);  // beyond delta, so the row is not exempt
  write_file_atomic("cli_cert_weak.json", certificate_document(weak));
  RunResult rw = run_cli("verify --code cli_vee.json --certificate cli_cert_weak.json");
  CHECK(rw.exit_code == 4);
  CHECK(rw.out.find("rows do not support its verdict") != std::string::npos);
}

TEST_CASE("envelope writes an exact-rational CSV over the sample grid") {
  write_file_atomic("cli_vee.json", code_document(vee_lsc()));
  RunResult r = run_cli(
      "envelope --code cli_vee.json --alpha 1 --resolution 8 --grid 3 --out cli_env.csv");
  REQUIRE(r.exit_code == 0);

  std::vector<std::string> lines = split_lines(read_file("cli_env.csv"));
  REQUIRE(lines.size() == 10);  // header + 2^3 + 1 grid rows
  CHECK(lines[0] == "x,lo,hi,alpha,resolution");
  for (std::size_t i = 1; i < lines.size(); ++i) {
    std::vector<std::string> cells = split_csv(lines[i]);
    REQUIRE(cells.size() == 5);
    CHECK(cells[3] == "1");
    CHECK(cells[4] == "8");
    Rat lo = parse_rat(cells[1]);
    Rat hi = parse_rat(cells[2]);
    CHECK(lo <= hi);
    CHECK(hi - lo <= pow2(-8) + pow2(-7));
  }
  // at x = 0 the envelope of |x - 1/3| with slope 1 equals 1/3
  std::vector<std::string> first = split_csv(lines[1]);
  CHECK(first[0] == "0");
  CHECK(parse_rat(first[1]) <= Rat(1, 3));
  CHECK(Rat(1, 3) <= parse_rat(first[2]));
}

TEST_CASE("embed emits exact breakpoint lists for both embeddings") {
  RunResult u = run_cli("embed --kind unit --point 1/3");
  REQUIRE(u.exit_code == 0);
  json ju = json::parse(u.out);
  CHECK(ju.at("schema") == "embedding");
  REQUIRE(ju.at("breakpoints").size() == 2);
  CHECK(rat_from_doc(ju.at("breakpoints")[0].at("y")) == Rat(1, 3));
  CHECK(rat_from_doc(ju.at("breakpoints")[1].at("x")) == Rat(1));

  RunResult b = run_cli("embed --kind baire --point '[1,0]' --depth 4");
  REQUIRE(b.exit_code == 0);
  json jb = json::parse(b.out);
  std::vector<std::pair<Rat, Rat>> knots;
  for (const auto& kn : jb.at("breakpoints"))
    knots.emplace_back(rat_from_doc(kn.at("x")), rat_from_doc(kn.at("y")));
  auto decoded = embed_baire_decode(PLFunc(std::move(knots)), 4);
  REQUIRE(decoded.has_value());
  CHECK(point_eq(Space::baire(), Point(*decoded), Point(Seq{1, 0})));

  CHECK(run_cli("embed --kind unit --point 3/2").exit_code == 2);
  CHECK(run_cli("embed --kind baire --point 1/3").exit_code == 2);
  CHECK(run_cli("embed --kind nowhere --point 0").exit_code == 2);
}

TEST_CASE("search reports exhaustion when nothing has finite evidence") {
  PiecewiseLscSpec spec;  // +infinity on [0, 1/2), x - 1/2 beyond
  spec.cuts = {Rat(0), Rat(1, 2), Rat(1)};
  spec.pieces.push_back({true, Rat(0), Rat(0)});
  spec.pieces.push_back({false, Rat(-1, 2), Rat(1)});
  spec.values = {ExtRat::inf(), ExtRat(Rat(0)), ExtRat(Rat(1, 2))};
  LscCode half = pl_lsc(Space::unit_interval(), std::move(spec));
  write_file_atomic("cli_half.json", code_document(half));

  Region r;
  r.explicit_net = ExplicitNet{{Point(Rat(0)), Point(Rat(1, 4))}, Rat(1)};
  write_file_atomic("cli_region.json", region_to_text(r));

  // every sample sits where the potential is infinite
  CHECK(run_cli("search --code cli_half.json --epsilon 1 --region @cli_region.json "
                "--out cli_void.json")
            .exit_code == 3);
  // without the restriction the finite half is reachable
  CHECK(run_cli("search --code cli_half.json --epsilon 1 --out cli_fine.json")
            .exit_code == 0);
}

TEST_CASE("identical runs produce byte-identical artifacts") {
  write_file_atomic("cli_vee.json", code_document(vee_lsc()));
  const std::string args =
      "--manifest cli_det_manifest.json search --code cli_vee.json --epsilon 1/2 "
      "--resolution 8 --out cli_det_cert.json";
  REQUIRE(run_cli(args).exit_code == 0);
  std::string cert1 = read_file("cli_det_cert.json");
  std::string man1 = read_file("cli_det_manifest.json");
  REQUIRE(run_cli(args).exit_code == 0);
  CHECK(read_file("cli_det_cert.json") == cert1);
  CHECK(read_file("cli_det_manifest.json") == man1);

  const std::string gargs =
      "gadget --type aca-sup --cn \"1/2-2^-(n+1)\" --prefix 16 --out cli_det_code.json";
  REQUIRE(run_cli(gargs).exit_code == 0);
  std::string code1 = read_file("cli_det_code.json");
  REQUIRE(run_cli(gargs).exit_code == 0);
  CHECK(read_file("cli_det_code.json") == code1);
}

TEST_CASE("seed order shuffles the scan but never the verdict") {
  write_file_atomic("cli_w.json", code_document(w_lsc()));
  std::vector<Rat> stars;
  for (int seed : {0, 1, 3}) {
    std::string args = "--seed-order " + std::to_string(seed) +
                       " search --code cli_w.json --epsilon 1/2 --resolution 8 --out "
                       "cli_w_cert_" + std::to_string(seed) + ".json";
    REQUIRE(run_cli(args).exit_code == 0);
    CriticalityCertificate cert = certificate_from_document(
        read_file("cli_w_cert_" + std::to_string(seed) + ".json"));
    CHECK(cert.pass);
    Rat x = cert.x_star.rat();
    Rat to_min = rat_min(rat_abs(x - Rat(1, 4)), rat_abs(x - Rat(3, 4)));
    CHECK(to_min <= pow2(-8));
    stars.push_back(x);
  }
  CHECK(stars.size() == 3);
}
