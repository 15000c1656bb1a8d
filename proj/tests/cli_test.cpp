#include <filesystem>
#include <sstream>

#include <gtest/gtest.h>

#include "cli.hpp"
#include "test_support.hpp"

using namespace rankone;
using rankone::testing::Rng;
namespace fs = std::filesystem;

namespace {

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("rankone_cli_" + std::to_string(::getpid()) + "_" +
            ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  std::string write(const std::string& name, const std::string& text) const {
    io::atomic_write(path(name), text);
    return path(name);
  }

  int run(std::vector<std::string> args) {
    out_.str("");
    err_.str("");
    return cli::run(args, out_, err_);
  }

  nlohmann::json json_of(const std::string& file) const { return nlohmann::json::parse(io::read_text(file)); }

  fs::path dir_;
  std::ostringstream out_, err_;
};

std::string path_csv(int count) {
  std::string s = "x\n";
  for (int i = 0; i < count; ++i) s += std::to_string(i) + "\n";
  return s;
}

}  // namespace

TEST_F(Cli, LaplacianOfCoincidentPoints) {
  const auto pts = write("p.csv", "0,0\n0,0\n");
  ASSERT_EQ(run({"laplacian", "--points", pts, "--rule", "delta:0.1", "--out", path("L.coo")}), 0) << err_.str();
  EXPECT_EQ(io::read_text(path("L.coo")), "%%sym-coo 2 3\n0 0 0.5\n0 1 0.5\n1 1 0.5\n");
  EXPECT_TRUE(fs::exists(path("L.coo.manifest.json")));
}

TEST_F(Cli, MissingInputExitsTwoAndNamesPath) {
  const std::string missing = path("nope.csv");
  EXPECT_EQ(run({"laplacian", "--points", missing, "--out", path("L.coo")}), 2);
  EXPECT_NE(err_.str().find(missing), std::string::npos);
  EXPECT_FALSE(fs::exists(path("L.coo")));
}

TEST_F(Cli, BadFlagsExitTwo) {
  const auto pts = write("p.csv", "0\n1\n");
  EXPECT_EQ(run({"laplacian", "--points", pts, "--rule", "knn", "--out", path("L")}), 2);
  EXPECT_EQ(run({"laplacian", "--points", pts, "--rule", "knn:3", "--self-loops", "maybe", "--out", path("L")}), 2);
  EXPECT_EQ(run({"laplacian", "--points", pts}), 2);
  EXPECT_EQ(run({"experiment", "--kind", "fig9", "--out", path("x.csv")}), 2);
  EXPECT_EQ(run({"--help"}), 0);
}

TEST_F(Cli, ParseErrorReportsLine) {
  const auto pts = write("p.csv", "x,y\n0,0\n1,oops\n");
  EXPECT_EQ(run({"laplacian", "--points", pts, "--out", path("L")}), 2);
  EXPECT_NE(err_.str().find(":3:"), std::string::npos) << err_.str();
}

TEST_F(Cli, IsolatedVertexWithoutSelfLoopExitsThree) {
  const auto pts = write("p.csv", "0\n1\n10\n");
  EXPECT_EQ(run({"laplacian", "--points", pts, "--rule", "delta:2", "--self-loops", "false", "--out", path("L")}), 3);
}

TEST_F(Cli, LaplacianRoundTripsExactly) {
  Rng rng(31);
  const Matrix p = rankone::testing::gaussian(30, 2, rng);
  std::string csv;
  for (Index i = 0; i < 30; ++i) csv += io::format_g17(p(i, 0)) + "," + io::format_g17(p(i, 1)) + "\n";
  const auto pts = write("p.csv", csv);
  ASSERT_EQ(run({"laplacian", "--points", pts, "--rule", "knn:3", "--epsilon", "0.7", "--out", path("L.coo")}), 0);
  const auto file = io::read_sym_coo(path("L.coo"));
  const auto lib = laplacian_of(PointCloud(p), GraphConfig{KnnRule{3}, 0.7, true});
  EXPECT_EQ(file.nnz(), lib.nnz());
  EXPECT_EQ((file.to_dense() - lib.to_dense()).cwiseAbs().maxCoeff(), 0.0);
}

TEST_F(Cli, UpdateTwoByTwo) {
  const auto eigs = write("e.txt", "2 1\n1\n1\n0\n");
  const auto v = write("v.txt", io::format_vector(Vector::Ones(2) / std::sqrt(2.0)));
  ASSERT_EQ(run({"update", "--eigs", eigs, "--rho", "1", "--v", v, "--order", "1", "--mu", "zero", "--out",
                 path("o.txt")}),
            0)
      << err_.str();
  const auto out = io::read_eig(path("o.txt"));
  EXPECT_NEAR(out.values(0), 1.707106781, 5e-10);
  const auto diag = json_of(path("o.txt.diag.json"));
  EXPECT_EQ(diag["mu_used"], 0.0);
  EXPECT_EQ(diag["mu_policy_used"], "zero");
  EXPECT_TRUE(diag.contains("gram_defect"));
  EXPECT_EQ(diag["deflation"]["kept"], 1);
}

TEST_F(Cli, UpdateWithZeroRhoWarns) {
  const auto eigs = write("e.txt", "2 1\n1\n1\n0\n");
  const auto v = write("v.txt", "0.6\n0.8\n");
  ASSERT_EQ(run({"update", "--eigs", eigs, "--rho", "0", "--v", v, "--out", path("o.txt")}), 0);
  EXPECT_EQ(io::read_text(path("o.txt")), io::read_text(eigs));
  const auto diag = json_of(path("o.txt.diag.json"));
  EXPECT_TRUE(diag["unchanged"].get<bool>());
  ASSERT_TRUE(diag.contains("warnings"));
  EXPECT_FALSE(diag["warnings"].empty());
}

TEST_F(Cli, StarFallsBackToMeanWhenVectorIsKnown) {
  const auto a = write("a.coo", "%%sym-coo 3 3\n0 0 3\n1 1 2\n2 2 0.5\n");
  const auto eigs = write("e.txt", "3 2\n3 2\n1 0\n0 1\n0 0\n");
  const auto v = write("v.txt", "0.6 0.8 0\n");
  ASSERT_EQ(run({"update", "--matrix", a, "--eigs", eigs, "--rho", "0.5", "--v", v, "--order", "2", "--mu", "star",
                 "--out", path("o.txt")}),
            0)
      << err_.str();
  const auto diag = json_of(path("o.txt.diag.json"));
  EXPECT_TRUE(diag["mu_fallback"].get<bool>());
  EXPECT_EQ(diag["mu_policy_used"], "mean");
  EXPECT_DOUBLE_EQ(diag["mu_used"].get<double>(), 0.5);
}

TEST_F(Cli, UpdateRejectsInvalidEigenpairs) {
  const auto v = write("v.txt", "0.6 0.8\n");
  const auto ascending = write("e.txt", "2 2\n1 2\n1 0\n0 1\n");
  EXPECT_EQ(run({"update", "--eigs", ascending, "--rho", "1", "--v", v, "--out", path("o")}), 4);
  const auto skewed = write("f.txt", "2 2\n2 1\n1 0.5\n0 1\n");
  EXPECT_EQ(run({"update", "--eigs", skewed, "--rho", "1", "--v", v, "--out", path("o")}), 4);
  const auto short_v = write("w.txt", "1\n");
  const auto ok = write("g.txt", "2 1\n1\n1\n0\n");
  EXPECT_EQ(run({"update", "--eigs", ok, "--rho", "1", "--v", short_v, "--out", path("o")}), 2);
  EXPECT_EQ(run({"update", "--eigs", ok, "--rho", "1", "--v", v, "--order", "2", "--out", path("o")}), 2);
}

TEST_F(Cli, EigsMatchesOracle) {
  const auto a = write("a.coo", "%%sym-coo 2 3\n0 0 1.5\n0 1 0.5\n1 1 0.5\n");
  ASSERT_EQ(run({"eigs", "--matrix", a, "--m", "1", "--out", path("e.txt")}), 0);
  const auto e = io::read_eig(path("e.txt"));
  EXPECT_NEAR(e.values(0), 1.0 + 1.0 / std::sqrt(2.0), 1e-15);
  EXPECT_EQ(run({"eigs", "--matrix", a, "--m", "3", "--out", path("e.txt")}), 2);
}

TEST_F(Cli, ExtendDisconnectedPointReturnsLiftedPairs) {
  const auto pts = write("p.csv", path_csv(5));
  const auto x0 = write("x0.csv", "40\n");
  ASSERT_EQ(run({"laplacian", "--points", pts, "--rule", "delta:1.5", "--out", path("L.coo")}), 0);
  ASSERT_EQ(run({"eigs", "--matrix", path("L.coo"), "--m", "3", "--out", path("e.txt")}), 0);
  ASSERT_EQ(run({"extend", "--points", pts, "--new-point", x0, "--eigs", path("e.txt"), "--rule", "delta:1.5",
                 "--out", path("x.txt")}),
            0)
      << err_.str();
  const auto stored = io::read_eig(path("e.txt"));
  const auto lifted = lift_eigenpairs(PartialEigen(stored.values, stored.vectors));
  const auto out = io::read_eig(path("x.txt"));
  EXPECT_EQ(out.values, lifted.values().head(3));
  EXPECT_EQ(out.vectors, lifted.vectors().leftCols(3));
  EXPECT_TRUE(json_of(path("x.txt.diag.json"))["unchanged"].get<bool>());
}

TEST_F(Cli, ExtendMatchesLibraryAndCorrectionHelps) {
  const auto pts = write("p.csv", path_csv(5));
  const auto x0 = write("x0.csv", "5\n");
  const std::vector<std::string> graph{"--rule", "delta:1.5", "--epsilon", "0.5"};
  auto with = [&](std::vector<std::string> base, const std::vector<std::string>& extra) {
    base.insert(base.end(), extra.begin(), extra.end());
    return base;
  };
  ASSERT_EQ(run(with({"laplacian", "--points", pts, "--out", path("L.coo")}, graph)), 0);
  ASSERT_EQ(run({"eigs", "--matrix", path("L.coo"), "--m", "3", "--out", path("e.txt")}), 0);
  ASSERT_EQ(run(with({"extend", "--points", pts, "--new-point", x0, "--eigs", path("e.txt"), "--order", "2", "--mu",
                      "star", "--out", path("x.txt")},
                     graph)),
            0)
      << err_.str();

  const GraphConfig cfg{DeltaRule{1.5}, 0.5, true};
  const PointCloud pc = read_point_cloud(pts);
  const auto stored = io::read_eig(path("e.txt"));
  ExtendOptions opts;
  opts.truncation.order = Order::Second;
  opts.truncation.mu = MuPolicy::star();
  Eigen::RowVectorXd x(1);
  x << 5.0;
  const auto lib = extend_point(pc, x, PartialEigen(stored.values, stored.vectors), cfg, opts);
  EXPECT_EQ(io::read_text(path("x.txt")), io::format_eig(lib.corrected_values, lib.corrected_vectors));
  EXPECT_EQ(io::read_text(path("x.txt.uncorrected")), io::format_eig(lib.uncorrected_values, lib.uncorrected_vectors));

  const auto truth = lab::oracle_eigh(augment_and_delta(pc, x, cfg).l1);
  const auto corrected = io::read_eig(path("x.txt"));
  const auto raw = io::read_eig(path("x.txt.uncorrected"));
  const double corr_err = (corrected.values - truth.values.head(3)).cwiseAbs().maxCoeff();
  const double raw_err = (raw.values - truth.values.head(3)).cwiseAbs().maxCoeff();
  EXPECT_LT(corr_err, raw_err);

  const auto diag = json_of(path("x.txt.diag.json"));
  EXPECT_DOUBLE_EQ(diag["rho"].get<double>(), lib.rho);
  EXPECT_GT(diag["power_iterations"].get<int>(), 0);
  EXPECT_DOUBLE_EQ(diag["correction_matrix_norm"].get<double>(), lib.correction_matrix_norm);

  ASSERT_EQ(run(with({"extend", "--points", pts, "--new-point", x0, "--eigs", path("e.txt"), "--order", "2", "--mu",
                      "star", "--correct", "false", "--out", path("y.txt")},
                     graph)),
            0);
  EXPECT_EQ(io::read_text(path("y.txt")), io::read_text(path("x.txt.uncorrected")));
}

TEST_F(Cli, ExtendRejectsMismatchedEigenpairs) {
  const auto pts = write("p.csv", path_csv(5));
  const auto x0 = write("x0.csv", "5\n");
  const auto eigs = write("e.txt", "4 1\n1\n0.5\n0.5\n0.5\n0.5\n");
  EXPECT_EQ(run({"extend", "--points", pts, "--new-point", x0, "--eigs", eigs, "--out", path("x")}), 2);
  const auto two = write("x2.csv", "5\n6\n");
  EXPECT_EQ(run({"extend", "--points", pts, "--new-point", two, "--eigs", eigs, "--out", path("x")}), 2);
}

TEST_F(Cli, ExperimentIsDeterministicAndRecordsManifest) {
  const std::vector<std::string> args{"experiment", "--kind", "synthetic", "--seed", "7", "--n", "80", "--m", "4",
                                      "--trials", "2", "--mu-hats", "0.1,0.01"};
  auto with_out = [&](const std::string& out) {
    auto a = args;
    a.push_back("--out");
    a.push_back(out);
    return a;
  };
  ASSERT_EQ(run(with_out(path("a.csv"))), 0) << err_.str();
  ASSERT_EQ(run(with_out(path("b.csv"))), 0);
  const std::string a = io::read_text(path("a.csv"));
  EXPECT_EQ(a, io::read_text(path("b.csv")));
  const auto rows = std::count(a.begin(), a.end(), '\n') - 1;
  // per-trial rows, geomean rows, slope rows
  EXPECT_EQ(rows, 6 * 2 * 2 + 6 * 2 + 6 * 3);
  const auto manifest = json_of(path("a.csv.manifest.json"));
  EXPECT_EQ(manifest["subcommand"], "experiment");
  EXPECT_EQ(manifest["seed"], 7);
  EXPECT_EQ(manifest["config"]["n"], "80");
  EXPECT_EQ(manifest["config"]["kind"], "synthetic");
  EXPECT_EQ(manifest["version"], cli::kVersion);
}

TEST_F(Cli, ReplayReproducesOutputs) {
  const auto pts = write("p.csv", path_csv(6));
  ASSERT_EQ(run({"laplacian", "--points", pts, "--rule", "knn:2", "--out", path("L.coo")}), 0);
  const std::string first = io::read_text(path("L.coo"));
  fs::remove(path("L.coo"));
  ASSERT_EQ(run({"replay", "--manifest", path("L.coo.manifest.json")}), 0) << err_.str();
  EXPECT_EQ(io::read_text(path("L.coo")), first);

  ASSERT_EQ(run({"experiment", "--kind", "extension", "--n", "60", "--trials", "2", "--out", path("x.csv")}), 0);
  const std::string csv = io::read_text(path("x.csv"));
  ASSERT_EQ(run({"replay", "--manifest", path("x.csv.manifest.json")}), 0) << err_.str();
  EXPECT_EQ(io::read_text(path("x.csv")), csv);

  write("p.csv", path_csv(7));
  EXPECT_EQ(run({"replay", "--manifest", path("L.coo.manifest.json")}), 2);
  EXPECT_NE(err_.str().find("changed"), std::string::npos);
}
