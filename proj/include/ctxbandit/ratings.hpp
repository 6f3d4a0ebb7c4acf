#pragma once

// MovieLens-style ratings: parsing, dense re-indexing, and low-rank factors by
// alternating least squares.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "ctxbandit/error.hpp"
#include "ctxbandit/linalg.hpp"
#include "ctxbandit/rng.hpp"

namespace ctxbandit {

struct Rating {
  std::size_t user;  // dense index
  std::size_t item;  // dense index
  double value;
};

struct RatingsDataset {
  std::vector<Rating> ratings;
  std::vector<std::int64_t> user_ids;  // dense index -> original id
  std::vector<std::int64_t> item_ids;

  std::size_t num_users() const { return user_ids.size(); }
  std::size_t num_items() const { return item_ids.size(); }
};

namespace detail {

inline bool parse_int(std::string_view s, std::int64_t& out) {
  const auto* end = s.data() + s.size();
  auto [p, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && p == end;
}

inline std::uint64_t pair_key(std::size_t u, std::size_t i) {
  return (static_cast<std::uint64_t>(u) << 32) | static_cast<std::uint64_t>(i);
}

}  // namespace detail

// Lines are `UserID::MovieID::Rating::Timestamp`, ratings 1..5. Ids are
// re-indexed densely in order of first appearance; a repeated (user, item)
// pair keeps the last rating.
inline RatingsDataset parse_ratings(std::istream& in, const std::string& source = "<stream>") {
  RatingsDataset ds;
  std::unordered_map<std::int64_t, std::size_t> user_idx, item_idx;
  std::unordered_map<std::uint64_t, std::size_t> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::string_view rest(line);
    std::int64_t fields[4];
    int nf = 0;
    bool ok = true;
    while (ok && nf < 4) {
      const auto pos = rest.find("::");
      const std::string_view tok = rest.substr(0, pos);
      ok = detail::parse_int(tok, fields[nf++]);
      if (pos == std::string_view::npos) {
        rest = {};
        break;
      }
      rest.remove_prefix(pos + 2);
    }
    if (!ok || nf != 4 || !rest.empty())
      throw ConfigError(source + ":" + std::to_string(lineno) + ": malformed ratings line '" + line +
                        "'");
    if (fields[2] < 1 || fields[2] > 5)
      throw ConfigError(source + ":" + std::to_string(lineno) + ": rating " +
                        std::to_string(fields[2]) + " outside 1..5");

    auto [uit, unew] = user_idx.try_emplace(fields[0], ds.user_ids.size());
    if (unew) ds.user_ids.push_back(fields[0]);
    auto [iit, inew] = item_idx.try_emplace(fields[1], ds.item_ids.size());
    if (inew) ds.item_ids.push_back(fields[1]);

    const Rating r{uit->second, iit->second, static_cast<double>(fields[2])};
    auto [sit, fresh] = seen.try_emplace(detail::pair_key(r.user, r.item), ds.ratings.size());
    if (fresh) ds.ratings.push_back(r);
    else ds.ratings[sit->second] = r;
  }
  if (ds.ratings.empty()) throw ConfigError(source + ": empty dataset");
  return ds;
}

inline RatingsDataset ingest_ratings(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open ratings file: " + path);
  return parse_ratings(in, path);
}

struct Factors {
  std::vector<Vector> users;
  std::vector<Vector> items;
  double train_rmse = 0.0;

  Eigen::Index rank() const { return users.empty() ? 0 : users.front().size(); }
};

struct AlsOptions {
  std::size_t iterations = 25;
  double reg = 0.1;
  std::uint64_t seed = 7;
};

inline double rmse(const RatingsDataset& ds, const Factors& f) {
  double s = 0.0;
  for (const auto& r : ds.ratings) {
    const double e = f.users[r.user].dot(f.items[r.item]) - r.value;
    s += e * e;
  }
  return std::sqrt(s / static_cast<double>(ds.ratings.size()));
}

// Rank-k factors minimizing sum (r - u.w)^2 + reg (|u|^2 + |w|^2) over the
// observed ratings. Each half step is a batch of k x k ridge solves.
inline Factors factorize(const RatingsDataset& ds, std::size_t k, const AlsOptions& opts = {}) {
  if (k < 1) throw ConfigError("factorize: rank must be at least 1");
  if (k > std::min(ds.num_users(), ds.num_items()))
    throw ConfigError("factorize: rank " + std::to_string(k) + " exceeds min(#users, #items) = " +
                      std::to_string(std::min(ds.num_users(), ds.num_items())));
  if (!(opts.reg > 0.0)) throw ConfigError("factorize: regularization must be positive");
  const auto kk = static_cast<Eigen::Index>(k);

  std::vector<std::vector<std::size_t>> by_user(ds.num_users()), by_item(ds.num_items());
  for (std::size_t n = 0; n < ds.ratings.size(); ++n) {
    by_user[ds.ratings[n].user].push_back(n);
    by_item[ds.ratings[n].item].push_back(n);
  }

  Factors f;
  Rng rng(opts.seed);
  std::normal_distribution<double> init(0.0, 1.0 / std::sqrt(static_cast<double>(k)));
  f.users.assign(ds.num_users(), Vector::Zero(kk));
  f.items.assign(ds.num_items(), Vector(kk));
  for (auto& w : f.items)
    for (Eigen::Index i = 0; i < kk; ++i) w[i] = init(rng);

  auto half_step = [&](std::vector<Vector>& solve_for, const std::vector<Vector>& fixed,
                       const std::vector<std::vector<std::size_t>>& groups, bool users_side) {
    for (std::size_t g = 0; g < groups.size(); ++g) {
      PsdAccumulator gram(kk, opts.reg);
      LinearStatistics rhs(kk);
      for (std::size_t n : groups[g]) {
        const Rating& r = ds.ratings[n];
        const Vector& other = fixed[users_side ? r.item : r.user];
        gram.add_outer(other);
        rhs.add(other, r.value);
      }
      solve_for[g] = ridge_solve(gram, rhs);
    }
  };

  for (std::size_t it = 0; it < opts.iterations; ++it) {
    half_step(f.users, f.items, by_user, true);
    half_step(f.items, f.users, by_item, false);
  }
  f.train_rmse = rmse(ds, f);
  return f;
}

// Header `k=<rank> users=<n> items=<m>`, then one row per user vector and one
// per item vector, 17 significant digits.
inline void write_factors(std::ostream& out, const Factors& f) {
  out << "k=" << f.rank() << " users=" << f.users.size() << " items=" << f.items.size() << '\n';
  char buf[32];
  auto row = [&](const Vector& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.17g", v[i]);
      if (i) out << ' ';
      out << buf;
    }
    out << '\n';
  };
  for (const auto& u : f.users) row(u);
  for (const auto& w : f.items) row(w);
}

inline void save_factors(const std::string& path, const Factors& f) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write factors file: " + path);
  write_factors(out, f);
  if (!out) throw ConfigError("error while writing factors file: " + path);
}

inline Factors read_factors(std::istream& in, const std::string& source = "<stream>") {
  std::string header;
  if (!std::getline(in, header)) throw ConfigError(source + ": missing factors header");
  long long k = 0, nu = 0, ni = 0;
  if (std::sscanf(header.c_str(), "k=%lld users=%lld items=%lld", &k, &nu, &ni) != 3 || k < 1 ||
      nu < 0 || ni < 0)
    throw ConfigError(source + ": bad factors header '" + header + "'");
  Factors f;
  auto read_rows = [&](std::vector<Vector>& rows, long long n, std::size_t first_line) {
    rows.reserve(static_cast<std::size_t>(n));
    std::string line;
    for (long long r = 0; r < n; ++r) {
      if (!std::getline(in, line))
        throw ConfigError(source + ": truncated factors file at line " +
                          std::to_string(first_line + static_cast<std::size_t>(r)));
      std::istringstream ls(line);
      Vector v(k);
      for (long long i = 0; i < k; ++i)
        if (!(ls >> v[i]))
          throw ConfigError(source + ":" + std::to_string(first_line + static_cast<std::size_t>(r)) +
                            ": expected " + std::to_string(k) + " values");
      rows.push_back(std::move(v));
    }
  };
  read_rows(f.users, nu, 2);
  read_rows(f.items, ni, 2 + static_cast<std::size_t>(nu));
  return f;
}

inline Factors load_factors(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open factors file: " + path);
  return read_factors(in, path);
}

}  // namespace ctxbandit
