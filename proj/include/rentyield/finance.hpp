#pragma once

// Mortgage arithmetic and the neighborhood x size-bucket yield index.

#include <cmath>
#include <cstdio>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "rentyield/domain.hpp"
#include "rentyield/error.hpp"
#include "rentyield/text.hpp"

namespace rentyield::finance {

// Level monthly payment that amortizes the financed principal
// (1 + c - d) * P over n months at monthly rate r; L / n when r == 0.
inline double monthly_mortgage(const MortgageTerms& t) {
  t.validate();
  const double principal = t.principal();
  const double r = t.params.monthly_rate;
  const double n = t.params.months;
  if (r == 0.0) return principal / n;
  // (1+r)^n - 1 via expm1/log1p keeps precision as r -> 0.
  const double growth_minus_one = std::expm1(n * std::log1p(r));
  return principal * r * (growth_minus_one + 1.0) / growth_minus_one;
}

inline double monthly_mortgage(double price, const MortgageParams& params) {
  return monthly_mortgage(MortgageTerms{price, params});
}

// Property price plus transaction costs, before the down payment.
inline double total_cost(const MortgageTerms& t) {
  t.validate();
  return (1.0 + t.params.transaction_cost_rate) * t.price;
}

struct AmortizationRow {
  int month = 0;
  double opening = 0.0;
  double interest = 0.0;
  double principal_repaid = 0.0;
  double closing = 0.0;
};

// Month-by-month balance under a fixed payment.
inline std::vector<AmortizationRow> amortization_schedule(const MortgageTerms& t, double payment) {
  t.validate();
  const double principal = t.principal();
  const double r = t.params.monthly_rate;
  if (!(payment > principal * r) || !(payment > 0.0))
    fail(Errc::NonRepayable, "payment does not exceed the first month's interest");
  std::vector<AmortizationRow> rows;
  rows.reserve(static_cast<std::size_t>(t.params.months));
  double balance = principal;
  for (int k = 1; k <= t.params.months; ++k) {
    AmortizationRow row;
    row.month = k;
    row.opening = balance;
    row.interest = balance * r;
    row.principal_repaid = payment - row.interest;
    row.closing = balance + row.interest - payment;
    balance = row.closing;
    rows.push_back(row);
  }
  return rows;
}

// Half-open buckets starting at 30 m2; smaller sizes have no bucket.
inline std::optional<SizeBucket> size_bucket_of(double size) {
  for (auto b : kAllBuckets) {
    const auto [lo, hi] = bounds(b);
    if (size >= lo && size < hi) return b;
  }
  return std::nullopt;
}

// Groups by (normalized neighborhood, size bucket). Rent side: mean monthly
// rent. Sale side: mean of each listing's monthly mortgage. Cells missing
// either side carry no index. Output is sorted by neighborhood, then bucket.
inline std::vector<YieldCell> compute_yield_index(const std::vector<Listing>& listings,
                                                  const MortgageParams& params) {
  params.validate();
  struct Acc {
    double rent_sum = 0.0;
    double mortgage_sum = 0.0;
    std::size_t n_rent = 0;
    std::size_t n_sale = 0;
  };
  std::map<std::pair<std::string, SizeBucket>, Acc> groups;
  for (const auto& l : listings) {
    const auto bucket = size_bucket_of(l.size);
    if (!bucket) continue;
    auto& acc = groups[{text::normalize_name(l.neighborhood), *bucket}];
    if (l.operation == Operation::Rent) {
      acc.rent_sum += l.price;
      ++acc.n_rent;
    } else {
      acc.mortgage_sum += monthly_mortgage(l.price, params);
      ++acc.n_sale;
    }
  }
  std::vector<YieldCell> cells;
  cells.reserve(groups.size());
  for (const auto& [key, acc] : groups) {
    YieldCell c;
    c.neighborhood = key.first;
    c.bucket = key.second;
    c.n_rent = acc.n_rent;
    c.n_sale = acc.n_sale;
    if (acc.n_rent > 0) c.mean_rent = acc.rent_sum / static_cast<double>(acc.n_rent);
    if (acc.n_sale > 0) c.mean_mortgage = acc.mortgage_sum / static_cast<double>(acc.n_sale);
    if (c.mean_rent && c.mean_mortgage) c.index = *c.mean_rent / *c.mean_mortgage;
    cells.push_back(std::move(c));
  }
  return cells;
}

struct NeighborhoodAverage {
  std::string neighborhood;
  std::optional<double> average;
  std::size_t buckets = 0;  // buckets contributing an index
};

// Unweighted mean of the available bucket indices per neighborhood.
inline std::vector<NeighborhoodAverage> neighborhood_average(const std::vector<YieldCell>& cells) {
  std::map<std::string, std::pair<double, std::size_t>> acc;
  for (const auto& c : cells) {
    auto& [sum, n] = acc[c.neighborhood];
    if (c.index) {
      sum += *c.index;
      ++n;
    }
  }
  std::vector<NeighborhoodAverage> out;
  for (const auto& [name, sn] : acc) {
    NeighborhoodAverage a{name, std::nullopt, sn.second};
    if (sn.second > 0) a.average = sn.first / static_cast<double>(sn.second);
    out.push_back(std::move(a));
  }
  return out;
}

inline std::string format_index(double index) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f", index);
  return buf;
}

namespace detail {

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

inline std::string boundary_name(const Json& feature) {
  const auto props = feature.find("properties");
  if (props == feature.end() || !props->is_object()) return {};
  for (const char* key : {"name", "neighborhood", "nombre", "NOMBRE"}) {
    auto it = props->find(key);
    if (it != props->end() && it->is_string()) return text::normalize_name(it->get<std::string>());
  }
  return {};
}

}  // namespace detail

inline std::string export_csv(const std::vector<YieldCell>& cells) {
  std::string out = "neighborhood,bucket,index,n_rent,n_sale\n";
  for (const auto& c : cells) {
    out += detail::csv_field(c.neighborhood);
    out += ',';
    out += to_string(c.bucket);
    out += ',';
    if (c.index) out += format_index(*c.index);
    out += ',' + std::to_string(c.n_rent) + ',' + std::to_string(c.n_sale) + '\n';
  }
  return out;
}

// Copies every boundary feature and attaches index_<bucket>, index_avg and
// per-bucket sample counts (null where absent). Boundary features are
// matched by their normalized name/neighborhood property.
inline Json export_geojson(const std::vector<YieldCell>& cells, const Json& boundaries) {
  if (!boundaries.is_object() || boundaries.value("type", "") != "FeatureCollection" ||
      !boundaries.contains("features") || !boundaries.at("features").is_array())
    fail(Errc::InvalidArgument, "boundaries must be a GeoJSON FeatureCollection");

  std::set<std::string> known;
  for (const auto& f : boundaries.at("features")) known.insert(detail::boundary_name(f));
  std::set<std::string> unknown;
  for (const auto& c : cells)
    if (!known.contains(c.neighborhood)) unknown.insert(c.neighborhood);
  if (!unknown.empty()) {
    std::vector<std::string> names(unknown.begin(), unknown.end());
    std::string msg = "neighborhoods missing from boundaries:";
    for (const auto& n : names) msg += " " + n;
    fail(Errc::UnknownNeighborhood, msg, names);
  }

  std::map<std::string, std::vector<const YieldCell*>> by_name;
  for (const auto& c : cells) by_name[c.neighborhood].push_back(&c);
  std::map<std::string, std::optional<double>> averages;
  for (const auto& a : neighborhood_average(cells)) averages[a.neighborhood] = a.average;

  Json out = boundaries;
  for (auto& feature : out["features"]) {
    const auto name = detail::boundary_name(feature);
    auto& props = feature["properties"];
    if (!props.is_object()) props = Json::object();
    for (auto b : kAllBuckets) {
      const std::string key(bucket_key(b));
      props["index_" + key] = nullptr;
      props["n_rent_" + key] = 0;
      props["n_sale_" + key] = 0;
    }
    props["index_avg"] = nullptr;
    auto it = by_name.find(name);
    if (it == by_name.end()) continue;
    for (const YieldCell* c : it->second) {
      const std::string key(bucket_key(c->bucket));
      if (c->index) props["index_" + key] = *c->index;
      props["n_rent_" + key] = c->n_rent;
      props["n_sale_" + key] = c->n_sale;
    }
    if (auto avg = averages[name]) props["index_avg"] = *avg;
  }
  return out;
}

inline OrderedJson to_json(const YieldCell& c) {
  auto opt = [](const std::optional<double>& v) { return v ? OrderedJson(*v) : OrderedJson(nullptr); };
  return OrderedJson{{"neighborhood", c.neighborhood},
                     {"bucket", to_string(c.bucket)},
                     {"mean_rent", opt(c.mean_rent)},
                     {"mean_mortgage", opt(c.mean_mortgage)},
                     {"index", opt(c.index)},
                     {"n_rent", c.n_rent},
                     {"n_sale", c.n_sale}};
}

}  // namespace rentyield::finance
