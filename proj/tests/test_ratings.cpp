#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <random>
#include <sstream>

#include "ctxbandit/ratings.hpp"

using namespace ctxbandit;

namespace {

RatingsDataset parse(const std::string& text) {
  std::istringstream in(text);
  return parse_ratings(in, "r.dat");
}

// Ratings table from exact factors (values need not be in 1..5 here).
RatingsDataset planted(std::size_t nu, std::size_t ni, Eigen::Index k, double keep, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Vector> U(nu, Vector(k)), W(ni, Vector(k));
  for (auto& v : U) for (auto& x : v) x = g(rng);
  for (auto& v : W) for (auto& x : v) x = g(rng);
  RatingsDataset ds;
  for (std::size_t i = 0; i < nu; ++i) ds.user_ids.push_back(static_cast<std::int64_t>(i));
  for (std::size_t j = 0; j < ni; ++j) ds.item_ids.push_back(static_cast<std::int64_t>(j));
  for (std::size_t i = 0; i < nu; ++i)
    for (std::size_t j = 0; j < ni; ++j)
      if (u(rng) < keep) ds.ratings.push_back({i, j, U[i].dot(W[j])});
  return ds;
}

}  // namespace

TEST(ParseRatings, SingleLine) {
  const RatingsDataset ds = parse("1::1193::5::978300760\n");
  ASSERT_EQ(ds.ratings.size(), 1u);
  EXPECT_EQ(ds.ratings[0].user, 0u);
  EXPECT_EQ(ds.ratings[0].item, 0u);
  EXPECT_EQ(ds.ratings[0].value, 5.0);
  EXPECT_EQ(ds.user_ids[0], 1);
  EXPECT_EQ(ds.item_ids[0], 1193);
}

TEST(ParseRatings, DenseReindexInOrderOfAppearance) {
  const RatingsDataset ds = parse("7::50::3::1\n3::50::4::2\n7::9::1::3\n");
  EXPECT_EQ(ds.num_users(), 2u);
  EXPECT_EQ(ds.num_items(), 2u);
  EXPECT_EQ(ds.ratings[1].user, 1u);
  EXPECT_EQ(ds.ratings[2].item, 1u);
}

TEST(ParseRatings, EmptyFile) {
  try {
    parse("");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("empty dataset"), std::string::npos);
  }
}

TEST(ParseRatings, DuplicateKeepsLast) {
  const RatingsDataset ds = parse("1::2::3::0\n1::2::5::1\n");
  ASSERT_EQ(ds.ratings.size(), 1u);
  EXPECT_EQ(ds.ratings[0].value, 5.0);
}

TEST(ParseRatings, MalformedLineReportsLineNumber) {
  for (const char* bad : {"1::2::3\n", "1::x::3::4\n", "1::2::3::4::5\n", "1:2:3:4\n", "1::2::9::0\n"}) {
    try {
      parse(std::string("1::1::1::1\n") + bad);
      FAIL() << bad;
    } catch (const ConfigError& e) {
      EXPECT_NE(std::string(e.what()).find("r.dat:2"), std::string::npos) << e.what();
    }
  }
}

TEST(ParseRatings, MissingFile) { EXPECT_THROW(ingest_ratings("/nonexistent/ratings.dat"), ConfigError); }

TEST(Factorize, RankOneExact) {
  const RatingsDataset ds = planted(15, 12, 1, 1.0, 1);
  const Factors f = factorize(ds, 1, AlsOptions{50, 1e-12, 3});
  EXPECT_LE(f.train_rmse, 1e-8);
}

TEST(Factorize, PlantedRankThree) {
  const RatingsDataset ds = planted(40, 30, 3, 1.0, 2);
  const Factors f = factorize(ds, 3, AlsOptions{50, 1e-12, 3});
  EXPECT_LE(f.train_rmse, 1e-6);
  EXPECT_EQ(f.rank(), 3);
}

TEST(Factorize, RankErrors) {
  const RatingsDataset ds = planted(4, 3, 1, 1.0, 4);
  EXPECT_THROW(factorize(ds, 4, {}), ConfigError);
  EXPECT_THROW(factorize(ds, 0, {}), ConfigError);
  EXPECT_THROW(factorize(ds, 2, AlsOptions{5, 0.0, 1}), ConfigError);
}

TEST(Factors, RoundTrip) {
  const Factors f = factorize(planted(6, 5, 2, 1.0, 5), 2, AlsOptions{10, 0.1, 1});
  std::stringstream ss;
  write_factors(ss, f);
  std::istringstream hs(ss.str());
  std::string header;
  std::getline(hs, header);
  EXPECT_EQ(header, "k=2 users=6 items=5");
  const Factors g = read_factors(ss);
  ASSERT_EQ(g.users.size(), 6u);
  ASSERT_EQ(g.items.size(), 5u);
  for (std::size_t i = 0; i < 6; ++i) EXPECT_EQ(g.users[i], f.users[i]);
  for (std::size_t j = 0; j < 5; ++j) EXPECT_EQ(g.items[j], f.items[j]);
}

TEST(Factors, BadHeaderAndTruncation) {
  std::istringstream a("k=2 users=1\n");
  EXPECT_THROW(read_factors(a), ConfigError);
  std::istringstream b("k=2 users=2 items=0\n1 2\n");
  EXPECT_THROW(read_factors(b), ConfigError);
}

// ml-1m 5% subsample at rank 6. Needs the public data file.
TEST(Factorize, MovielensSubsampleSanity) {
  const char* dir = std::getenv("CTXBANDIT_DATA_DIR");
  const std::filesystem::path p = std::filesystem::path(dir ? dir : "data") / "ml-1m" / "ratings.dat";
  if (!std::filesystem::exists(p)) GTEST_SKIP() << "ml-1m ratings not found at " << p;
  const RatingsDataset full = ingest_ratings(p.string());
  RatingsDataset sub;
  sub.user_ids = full.user_ids;
  sub.item_ids = full.item_ids;
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (const auto& r : full.ratings)
    if (u(rng) < 0.05) sub.ratings.push_back(r);
  const Factors f = factorize(sub, 6, {});
  EXPECT_LE(f.train_rmse, 1.0);
}
