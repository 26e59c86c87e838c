#include <catch_amalgamated.hpp>

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <effop/harness/io.hpp>

using namespace effop;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

fs::path scratch() {
  static const fs::path dir = [] {
    fs::path d = fs::current_path() / "cli_scratch";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Run effop_cli(const std::string& args) {
  const fs::path out = scratch() / "stdout.txt";
  const fs::path err = scratch() / "stderr.txt";
  const std::string cmd = std::string("\"") + EFFOP_CLI_PATH + "\" " + args + " >\"" + out.string() +
                          "\" 2>\"" + err.string() + "\"";
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out), slurp(err)};
}

std::string write_file(const std::string& name, const std::string& text) {
  const fs::path p = scratch() / name;
  std::ofstream(p) << text;
  return "\"" + p.string() + "\"";
}

std::vector<double> eigenvalue_lines(const std::string& out) {
  std::vector<double> vals;
  std::istringstream ss(out);
  for (std::string line; std::getline(ss, line);)
    if (line.rfind("eigenvalue ", 0) == 0) vals.push_back(std::stod(line.substr(11)));
  return vals;
}

double field(const std::string& out, const std::string& key) {
  const auto at = out.find("\n" + key + " ");
  REQUIRE(at != std::string::npos);
  return std::stod(out.substr(at + key.size() + 2));
}

}  // namespace

TEST_CASE("cli: solve-direct on the exchange matrix") {
  const std::string m = write_file("x.txt", "2\n0 0 1 0\n1 0 0 0\n");
  const auto s_path = (scratch() / "x_s.txt").string();
  const auto r = effop_cli("solve-direct --matrix " + m + " --J 2 --K 1 --out-s \"" + s_path + "\"");
  INFO(r.err);
  REQUIRE(r.code == 0);
  const auto ev = eigenvalue_lines(r.out);
  REQUIRE(ev.size() == 1);
  CHECK(std::abs(ev[0] - 1.0) < 1e-14);
  CHECK(field(r.out, "residual") < 1e-15);

  const auto dm = io::read_decoupling_map_file(s_path);
  CHECK(std::abs(dm.s()(0, 0) - 1.0) < 1e-14);

  const auto eff_path = (scratch() / "x_eff2.txt").string();
  const auto e2 = effop_cli("effective --matrix " + m + " --s \"" + s_path + "\" --K 1 --second-type --out \"" +
                            eff_path + "\"");
  REQUIRE(e2.code == 0);
  const auto mf = io::read_matrix_file(eff_path);
  CHECK(std::abs(mf.matrix(0, 0) - 2.0) < 1e-14);
  CHECK(io::comment_field(mf.comments, "type") == "second");
  CHECK(io::comment_field(mf.comments, "J") == "2");

  const auto wrong_k = effop_cli("effective --matrix " + m + " --s \"" + s_path + "\" --K 2 --out \"" +
                                 eff_path + "\"");
  CHECK(wrong_k.code == 1);
}

TEST_CASE("cli: solve-iter on the weakly coupled 2x2") {
  const std::string m = write_file("w.txt", "2\n1 0 0.1 0\n0.1 0 3 0\n");
  const auto r = effop_cli("solve-iter --matrix " + m + " --K 1");
  INFO(r.err);
  REQUIRE(r.code == 0);
  CHECK(r.out.find("converged") != std::string::npos);
  const auto ev = eigenvalue_lines(r.out);
  REQUIRE(ev.size() == 1);
  CHECK(std::abs(ev[0] - (2.0 - std::sqrt(1.01))) < 1e-10);
  const auto s_at = r.out.find("\ns\n1\n");
  REQUIRE(s_at != std::string::npos);
  CHECK(std::abs(std::stod(r.out.substr(s_at + 5)) - (10.0 - std::sqrt(101.0))) < 1e-10);

  const auto capped = effop_cli("solve-iter --matrix " + m + " --K 1 --max-iter 2");
  CHECK(capped.code == 2);
  CHECK(capped.err.find("MaxIterExceeded") != std::string::npos);

  const std::string singular = write_file("one.txt", "2\n1 0 1 0\n1 0 1 0\n");
  CHECK(effop_cli("solve-iter --matrix " + singular + " --K 1").code == 2);
}

TEST_CASE("cli: validation errors exit 1") {
  const std::string nh = write_file("nh.txt", "2\n0 0 1 0\n0 0 0 0\n");
  const auto r = effop_cli("solve-direct --matrix " + nh + " --J 1 --K 1");
  CHECK(r.code == 1);
  CHECK(r.err.find("NotHermitian") != std::string::npos);
  CHECK(r.out.empty());

  const std::string m = write_file("x2.txt", "2\n0 0 1 0\n1 0 0 0\n");
  CHECK(effop_cli("solve-direct --matrix " + m + " --J 3 --K 1").code == 1);
  CHECK(effop_cli("solve-direct --matrix " + m + " --J 1,1 --K 1,2").code == 1);
  CHECK(effop_cli("solve-direct --matrix " + m).code == 1);
  CHECK(effop_cli("no-such-command").code == 1);
  CHECK(effop_cli("gen --kind nope --dim 4 --seed 1 --out x").code == 1);
  CHECK(effop_cli("solve-direct --matrix /nonexistent --J 1 --K 1").code == 1);

  // psi = (1, 0) has no Q component to span K = {2}
  const std::string diag = write_file("d.txt", "2\n1 0 0 0\n0 0 2 0\n");
  const auto sp = effop_cli("solve-direct --matrix " + diag + " --J 1 --K 2");
  CHECK(sp.code == 1);
  CHECK(sp.err.find("SingularProjection") != std::string::npos);
}

TEST_CASE("cli: effective refuses a non-decoupling s with exit 2") {
  const std::string m = write_file("x3.txt", "2\n0 0 1 0\n1 0 0 0\n");
  const std::string s = write_file("zero_s.txt", "# s-matrix rows=1 cols=1 K=1\n1 1\n0 0\n");
  const auto r = effop_cli("effective --matrix " + m + " --s " + s + " --out \"" +
                           (scratch() / "never.txt").string() + "\"");
  CHECK(r.code == 2);
  CHECK(r.err.find("NotDecoupled") != std::string::npos);
}

TEST_CASE("cli: gen is deterministic and enumerate lists legitimate K") {
  const auto a = (scratch() / "g1.txt").string();
  const auto b = (scratch() / "g2.txt").string();
  REQUIRE(effop_cli("gen --kind planted_spectrum --dim 5 --seed 3 --out \"" + a + "\"").code == 0);
  REQUIRE(effop_cli("gen --kind planted_spectrum --dim 5 --seed 3 --out \"" + b + "\"").code == 0);
  CHECK(slurp(a) == slurp(b));
  CHECK(slurp(a).find("rng=mt19937_64") != std::string::npos);

  const auto en = effop_cli("enumerate --matrix \"" + a + "\" --J 1,2");
  REQUIRE(en.code == 0);
  CHECK(en.out.find("legitimate=10 of 10") != std::string::npos);

  const auto t = (scratch() / "t.txt").string();
  REQUIRE(effop_cli("gen --kind tridiagonal_chain --dim 2 --seed 0 --coupling 0.1 --out \"" + t + "\"").code == 0);
  const auto tm = io::read_matrix_file(t).matrix;
  CHECK(tm(0, 1).real() == 0.1);
  CHECK(tm(1, 1).real() == 2.0);
}

TEST_CASE("cli: decompose a generated commuting pair") {
  const auto base = (scratch() / "fam").string();
  REQUIRE(effop_cli("gen --kind commuting_family --dim 6 --seed 4 --family-size 2 --out \"" + base + "\"").code == 0);
  const std::string plan = write_file("plan.txt", "block: J=1,2,3 K=1,2,3\nblock: J=4,5,6 K=4,5,6\n");
  const auto r = effop_cli("decompose --set \"" + base + ".1\",\"" + base + ".2\" --plan " + plan);
  INFO(r.out << r.err);
  // K = J is legitimate for a Haar-random basis with probability one
  REQUIRE(r.code == 0);
  CHECK(r.out.find("CHECK decompose.spectrum_union.member1 pass") != std::string::npos);
  CHECK(r.out.find("CHECK decompose.spectrum_union.member2 pass") != std::string::npos);

  const std::string overlap = write_file("bad_plan.txt", "block: J=1,2 K=1,2\nblock: J=2,3,4,5,6 K=2,3,4,5,6\n");
  const auto bad = effop_cli("decompose --set \"" + base + ".1\" --plan " + overlap);
  CHECK(bad.code == 1);
  CHECK(bad.err.find("PartitionInvalid") != std::string::npos);
}

TEST_CASE("cli: verify on a generated 8x8") {
  const auto m = (scratch() / "v.txt").string();
  REQUIRE(effop_cli("gen --kind random_hermitian --dim 8 --seed 11 --out \"" + m + "\"").code == 0);
  const auto r = effop_cli("verify --matrix \"" + m + "\" --d 3 --trials 20 --seed 1");
  INFO(r.out << r.err);
  CHECK(r.code == 0);
  CHECK(r.out.find("SUMMARY pass") != std::string::npos);
  CHECK(r.out.find("# rng=mt19937_64") != std::string::npos);
  CHECK(r.out.find(" fail ") == std::string::npos);
}
