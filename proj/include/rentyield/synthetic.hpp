#pragma once

// Synthetic listing generator used as the benchmark substrate.
//
// Neighborhoods: n_neighborhoods names "Synthetic NN" whose rent level per
// m2 (pba) is evenly spaced over [9, 24]. Every listing carries its
// neighborhood's pba as price_by_area.
//
// Rent listing, with s = size and q = pba:
//   level = q * (1 + 0.04 * (q - 15))               nonlinear in q
//   base  = 0.85 * s * level + 300 * lift + 60 * exterior + 12 * floor
//           + 150 * new_development - 80 * renew + 40 * parking + 100 * duplex
//   rent  = base + N(0, (noise_scale * base)^2)       noise grows with rent
// Missing indicators do not change the draw: features are generated first,
// then hidden with probability floor 10%, lift 10%, exterior 5%, parking 50%.
// Sale listing: price = 180 * s * level * (1 + N(0, noise_scale^2)) + 15000 * lift.
// Contamination replaces the price of that fraction of rent rows with a
// uniform draw in [25000, 35000].

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "rentyield/domain.hpp"
#include "rentyield/error.hpp"
#include "rentyield/rng.hpp"

namespace rentyield::synthetic {

struct Config {
  std::size_t n_rent = 5000;
  std::size_t n_sale = 0;
  int n_neighborhoods = 20;
  double noise_scale = 0.08;
  double contamination = 0.0;  // fraction of rent rows replaced by outliers
  std::uint64_t seed = 0;

  void validate() const {
    if (n_rent + n_sale == 0) fail(Errc::InvalidArgument, "generator needs at least one listing");
    if (n_neighborhoods < 1) fail(Errc::InvalidArgument, "n_neighborhoods must be >= 1");
    if (!(noise_scale >= 0.0)) fail(Errc::InvalidArgument, "noise_scale must be >= 0");
    if (!(contamination >= 0.0 && contamination < 1.0)) fail(Errc::InvalidArgument, "contamination must lie in [0, 1)");
  }
};

inline std::string neighborhood_name(int i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "Synthetic %02d", i + 1);
  return buf;
}

inline double neighborhood_pba(int i, int n) {
  return n == 1 ? 15.0 : 9.0 + 15.0 * static_cast<double>(i) / static_cast<double>(n - 1);
}

inline double rent_level(double pba) { return pba * (1.0 + 0.04 * (pba - 15.0)); }

namespace detail {

struct Draw {
  Listing listing;
  double base = 0.0;
};

inline Draw draw_listing(Rng& rng, const Config& cfg, Operation op, std::size_t k) {
  Listing l;
  char id[32];
  std::snprintf(id, sizeof id, "syn-%c-%06zu", op == Operation::Rent ? 'r' : 's', k + 1);
  l.id = id;
  l.operation = op;
  const int nb = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(cfg.n_neighborhoods)));
  const double pba = neighborhood_pba(nb, cfg.n_neighborhoods);
  l.neighborhood = neighborhood_name(nb);
  l.price_by_area = pba;
  l.size = std::round(std::clamp(std::exp(rng.normal(std::log(75.0), 0.4)), 25.0, 400.0));
  const bool exterior = rng.bernoulli(0.8);
  const int floor = static_cast<int>(rng.uniform_index(9));
  const bool lift = rng.bernoulli(floor >= 2 ? 0.75 : 0.45);
  const bool parking = rng.bernoulli(0.25);
  const double st = rng.uniform01();
  l.status = st < 0.70 ? Status::Good : st < 0.85 ? Status::NewDevelopment : Status::Renew;
  l.new_development = l.status == Status::NewDevelopment;
  const double pt = rng.uniform01();
  l.property_type = pt < 0.75   ? PropertyType::Flat
                    : pt < 0.80 ? PropertyType::Duplex
                    : pt < 0.85 ? PropertyType::Penthouse
                    : pt < 0.95 ? PropertyType::Chalet
                                : PropertyType::Other;
  l.rooms = std::max(1, static_cast<int>(std::lround(l.size / 30.0)));
  l.bathrooms = std::max(1, static_cast<int>(std::lround(l.size / 60.0)));
  l.photos = 5 + static_cast<int>(rng.uniform_index(36));
  l.latitude = 40.30 + 0.01 * nb + rng.uniform(0.0, 0.008);
  l.longitude = -3.80 + 0.01 * nb + rng.uniform(0.0, 0.008);

  const double level = rent_level(pba);
  double base = 0.85 * l.size * level + 300.0 * lift + 60.0 * exterior + 12.0 * floor + 40.0 * parking;
  if (l.status == Status::NewDevelopment) base += 150.0;
  if (l.status == Status::Renew) base -= 80.0;
  if (l.property_type == PropertyType::Duplex) base += 100.0;
  if (op == Operation::Rent) {
    l.price = std::max(50.0, std::round(base + rng.normal(0.0, cfg.noise_scale * base)));
  } else {
    const double p = 180.0 * l.size * level * (1.0 + rng.normal(0.0, cfg.noise_scale)) + 15000.0 * lift;
    l.price = std::max(10000.0, std::round(p));
  }

  l.exterior = rng.bernoulli(0.05) ? std::nullopt : std::optional<bool>(exterior);
  l.floor = rng.bernoulli(0.10) ? std::nullopt : std::optional<int>(floor);
  l.lift = rng.bernoulli(0.10) ? std::nullopt : std::optional<bool>(lift);
  l.parking = rng.bernoulli(0.50) ? std::nullopt : std::optional<bool>(parking);
  return {std::move(l), base};
}

}  // namespace detail

// Rent listings first, then sale listings. Rent row k is drawn from stream
// (seed, k) and sale row k from stream (seed, 1 << 32 | k), so changing one
// count never changes the rows of the other operation.
inline std::vector<Listing> generate(const Config& cfg) {
  cfg.validate();
  std::vector<Listing> out;
  out.reserve(cfg.n_rent + cfg.n_sale);
  for (std::size_t k = 0; k < cfg.n_rent; ++k) {
    Rng rng = Rng::stream(cfg.seed, k);
    out.push_back(detail::draw_listing(rng, cfg, Operation::Rent, k).listing);
  }
  for (std::size_t k = 0; k < cfg.n_sale; ++k) {
    Rng rng = Rng::stream(cfg.seed, (std::uint64_t{1} << 32) | k);
    out.push_back(detail::draw_listing(rng, cfg, Operation::Sale, k).listing);
  }
  if (cfg.contamination > 0.0 && cfg.n_rent > 0) {
    const auto n_bad = static_cast<std::size_t>(std::llround(cfg.contamination * static_cast<double>(cfg.n_rent)));
    std::vector<std::size_t> rows(cfg.n_rent);
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
    Rng rng = Rng::stream(cfg.seed, std::uint64_t{2} << 32);
    rng.shuffle(std::span<std::size_t>(rows));
    for (std::size_t i = 0; i < n_bad; ++i) out[rows[i]].price = std::round(rng.uniform(25000.0, 35000.0));
  }
  return out;
}

}  // namespace rentyield::synthetic
