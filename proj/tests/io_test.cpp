#include <filesystem>
#include <fstream>
#include <random>

#include <gtest/gtest.h>

#include "rankone/io.hpp"
#include "test_support.hpp"

using namespace rankone;
using rankone::testing::Rng;

namespace {

std::filesystem::path scratch_dir() {
  auto dir = std::filesystem::temp_directory_path() / ("rankone_io_test_" + std::to_string(::getpid()));
  std::filesystem::create_directories(dir);
  return dir;
}

Errc parse_error_line(const std::string& text, std::size_t expected_line) {
  try {
    io::parse_sym_coo(text, "m.coo");
  } catch (const Error& e) {
    EXPECT_EQ(e.index().value_or(0), expected_line) << e.what();
    EXPECT_NE(std::string(e.what()).find("m.coo:" + std::to_string(expected_line)), std::string::npos) << e.what();
    return e.code();
  }
  ADD_FAILURE() << "no error for:\n" << text;
  return Errc::InvalidArgument;
}

}  // namespace

TEST(Io, FormatG17RoundTrips) {
  Rng rng(1);
  std::uniform_real_distribution<double> u(-1e3, 1e3);
  for (int i = 0; i < 1000; ++i) {
    const double x = u(rng) * std::pow(10.0, static_cast<int>(rng() % 40) - 20);
    EXPECT_EQ(std::stod(io::format_g17(x)), x);
  }
  EXPECT_EQ(io::format_g17(0.5), "0.5");
}

TEST(Io, SymCooRoundTripIsExact) {
  Rng rng(2);
  Matrix g = rankone::testing::random_symmetric(12, rng);
  for (Index i = 0; i < 12; ++i)
    for (Index j = 0; j < 12; ++j)
      if ((i * 7 + j * 3) % 4 == 0) g(i, j) = g(j, i) = 0.0;
  const auto a = SymmetricMatrix::dense(g, 0.0);
  const std::string text = io::format_sym_coo(a);
  const auto b = io::parse_sym_coo(text);
  EXPECT_EQ(b.n(), a.n());
  EXPECT_TRUE(b.is_sparse());
  EXPECT_EQ((b.to_dense() - a.to_dense()).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(io::format_sym_coo(b), text);
}

TEST(Io, SymCooHeaderAndLayout) {
  const auto a = SymmetricMatrix::from_triplets(3, std::vector<Triplet>{{0, 0, 2.0}, {0, 2, -1.0}, {1, 1, 0.25}});
  EXPECT_EQ(io::format_sym_coo(a), "%%sym-coo 3 3\n0 0 2\n0 2 -1\n1 1 0.25\n");
}

TEST(Io, SymCooErrorsCarryLineNumbers) {
  EXPECT_EQ(parse_error_line("", 0), Errc::Parse);
  EXPECT_EQ(parse_error_line("%%coo 2 1\n0 0 1\n", 1), Errc::Parse);
  EXPECT_EQ(parse_error_line("%%sym-coo 2 2\n0 0 1\n1 0 1\n", 3), Errc::Parse);
  EXPECT_EQ(parse_error_line("%%sym-coo 2 2\n0 0 1\n\n0 x 1\n", 4), Errc::Parse);
  EXPECT_EQ(parse_error_line("%%sym-coo 2 2\n0 0 1\n0 0 2\n", 3), Errc::Parse);
  EXPECT_EQ(parse_error_line("%%sym-coo 2 1\n0 5 1\n", 2), Errc::Parse);
  EXPECT_EQ(parse_error_line("%%sym-coo 2 1\n0 1 nan\n", 2), Errc::Parse);
  EXPECT_THROW(io::parse_sym_coo("%%sym-coo 2 2\n0 0 1\n"), Error);
}

TEST(Io, EigRoundTrip) {
  Rng rng(3);
  const Matrix q = rankone::testing::random_orthonormal(7, 3, rng);
  const Vector values = (Vector(3) << 2.5, 1.0 / 3.0, -1e-17).finished();
  const auto parsed = io::parse_eig(io::format_eig(values, q));
  EXPECT_EQ(parsed.values, values);
  EXPECT_EQ(parsed.vectors, q);
}

TEST(Io, EigErrors) {
  auto line_of = [](const std::string& text) -> std::size_t {
    try {
      io::parse_eig(text, "e");
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), Errc::Parse);
      return e.index().value_or(0);
    }
    return 999;
  };
  EXPECT_EQ(line_of("2\n"), 1u);
  EXPECT_EQ(line_of("2 3\n1 2 3\n"), 1u);
  EXPECT_EQ(line_of("2 1\n1 2\n0\n1\n"), 2u);
  EXPECT_EQ(line_of("2 1\n1\n0\n"), 3u);
  EXPECT_EQ(line_of("2 1\n1\n0 1\n1\n"), 3u);
  EXPECT_EQ(line_of("2 1\n1\n0\n1\n5\n"), 5u);
}

TEST(Io, VectorRoundTripAndFreeLayout) {
  const Vector v = (Vector(4) << 1.0, -0.1, 3e-300, 7.0).finished();
  EXPECT_EQ(io::parse_vector(io::format_vector(v)), v);
  EXPECT_EQ(io::parse_vector("1 2\n3\n\n4 \n"), (Vector(4) << 1, 2, 3, 4).finished());
  EXPECT_THROW(io::parse_vector("\n\n"), Error);
  EXPECT_THROW(io::parse_vector("1 2\ninf\n"), Error);
}

TEST(Io, AtomicWriteReplacesAndLeavesNoTemporaries) {
  const auto dir = scratch_dir();
  const std::string path = (dir / "out.txt").string();
  io::atomic_write(path, "first\n");
  io::atomic_write(path, "second\n");
  EXPECT_EQ(io::read_text(path), "second\n");
  std::size_t files = 0;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    (void)entry;
    ++files;
  }
  EXPECT_EQ(files, 1u);
  EXPECT_THROW(io::atomic_write((dir / "no" / "such" / "dir.txt").string(), "x"), Error);
  std::filesystem::remove_all(dir);
}

TEST(Io, ReadTextNamesMissingPath) {
  try {
    io::read_text("/nonexistent/rankone/file.coo");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::Io);
    EXPECT_NE(std::string(e.what()).find("/nonexistent/rankone/file.coo"), std::string::npos);
  }
}
