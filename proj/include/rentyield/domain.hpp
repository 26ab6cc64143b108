#pragma once

// Canonical types shared by every module: listings, mortgage terms, size
// buckets, yield cells, model specifications and learner configurations.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "rentyield/error.hpp"
#include "rentyield/text.hpp"

namespace rentyield {

using Json = nlohmann::json;
using OrderedJson = nlohmann::ordered_json;

enum class Operation { Rent, Sale };
enum class PropertyType { Chalet, Duplex, Flat, Penthouse, Other };
enum class Status { Good, NewDevelopment, Renew, Unknown };

inline std::string_view to_string(Operation op) { return op == Operation::Rent ? "rent" : "sale"; }

inline std::optional<Operation> parse_operation(std::string_view s) {
  const auto lower = text::to_lower(s);
  if (lower == "rent") return Operation::Rent;
  if (lower == "sale") return Operation::Sale;
  return std::nullopt;
}

inline std::string_view to_string(PropertyType t) {
  switch (t) {
    case PropertyType::Chalet: return "chalet";
    case PropertyType::Duplex: return "duplex";
    case PropertyType::Flat: return "flat";
    case PropertyType::Penthouse: return "penthouse";
    case PropertyType::Other: return "other";
  }
  return "other";
}

// Values outside the known set map to Other.
inline PropertyType parse_property_type(std::string_view s) {
  const auto lower = text::to_lower(s);
  if (lower == "chalet") return PropertyType::Chalet;
  if (lower == "duplex") return PropertyType::Duplex;
  if (lower == "flat") return PropertyType::Flat;
  if (lower == "penthouse") return PropertyType::Penthouse;
  return PropertyType::Other;
}

inline std::string_view to_string(Status s) {
  switch (s) {
    case Status::Good: return "good";
    case Status::NewDevelopment: return "newdevelopment";
    case Status::Renew: return "renew";
    case Status::Unknown: return "unknown";
  }
  return "unknown";
}

// Values outside the known set map to Unknown.
inline Status parse_status(std::string_view s) {
  std::string lower;
  for (char c : text::to_lower(s)) {
    if (c != ' ' && c != '_' && c != '-') lower.push_back(c);
  }
  if (lower == "good") return Status::Good;
  if (lower == "newdevelopment") return Status::NewDevelopment;
  if (lower == "renew") return Status::Renew;
  return Status::Unknown;
}

struct Listing {
  std::string id;
  Operation operation = Operation::Rent;
  double price = 0.0;  // monthly rent for Rent, total price for Sale
  double size = 0.0;   // square meters
  std::optional<bool> exterior;
  std::optional<int> floor;
  std::optional<bool> lift;
  std::optional<bool> parking;
  std::optional<bool> new_development;
  int photos = 0;
  PropertyType property_type = PropertyType::Other;
  Status status = Status::Unknown;
  int bathrooms = 0;
  int rooms = 0;
  std::optional<double> price_by_area;  // neighborhood average rent per m2
  double latitude = 0.0;
  double longitude = 0.0;
  std::string neighborhood;

  bool operator==(const Listing&) const = default;
};

inline void validate(const Listing& l) {
  std::vector<std::string> bad;
  if (l.id.empty()) bad.emplace_back("id");
  if (!(l.price > 0.0) || !std::isfinite(l.price)) bad.emplace_back("price");
  if (!(l.size > 0.0) || !std::isfinite(l.size)) bad.emplace_back("size");
  if (l.photos < 0) bad.emplace_back("photos");
  if (l.bathrooms < 0) bad.emplace_back("bathrooms");
  if (l.rooms < 0) bad.emplace_back("rooms");
  if (!(l.latitude >= -90.0 && l.latitude <= 90.0)) bad.emplace_back("latitude");
  if (!(l.longitude >= -180.0 && l.longitude <= 180.0)) bad.emplace_back("longitude");
  if (l.price_by_area && (!std::isfinite(*l.price_by_area) || *l.price_by_area < 0.0))
    bad.emplace_back("priceByArea");
  if (!bad.empty()) {
    std::string msg = "listing '" + l.id + "' violates invariants on:";
    for (const auto& b : bad) msg += " " + b;
    fail(Errc::InvalidListing, msg, bad);
  }
}

namespace detail {

template <typename T>
OrderedJson optional_json(const std::optional<T>& v) {
  return v ? OrderedJson(*v) : OrderedJson(nullptr);
}

template <typename T>
std::optional<T> optional_field(const Json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  return it->get<T>();
}

}  // namespace detail

// Canonical dataset record; field order is part of the file format.
inline OrderedJson to_canonical_json(const Listing& l) {
  OrderedJson j;
  j["id"] = l.id;
  j["operation"] = to_string(l.operation);
  j["price"] = l.price;
  j["size"] = l.size;
  j["exterior"] = detail::optional_json(l.exterior);
  j["floor"] = detail::optional_json(l.floor);
  j["lift"] = detail::optional_json(l.lift);
  j["parking"] = detail::optional_json(l.parking);
  j["newDevelopment"] = detail::optional_json(l.new_development);
  j["photos"] = l.photos;
  j["propertyType"] = to_string(l.property_type);
  j["status"] = to_string(l.status);
  j["bathrooms"] = l.bathrooms;
  j["rooms"] = l.rooms;
  j["priceByArea"] = detail::optional_json(l.price_by_area);
  j["latitude"] = l.latitude;
  j["longitude"] = l.longitude;
  j["neighborhood"] = l.neighborhood;
  return j;
}

inline std::string to_canonical_line(const Listing& l) { return to_canonical_json(l).dump(); }

// Strict inverse of to_canonical_json. Throws SchemaViolation on any
// missing required key or type mismatch, InvalidListing on bad values.
inline Listing listing_from_canonical_json(const Json& j) {
  static constexpr std::array required{"id",       "operation", "price",     "size",
                                       "photos",   "propertyType", "status", "bathrooms",
                                       "rooms",    "latitude",  "longitude", "neighborhood"};
  if (!j.is_object()) fail(Errc::SchemaViolation, "record is not a JSON object");
  for (const char* key : required) {
    if (!j.contains(key) || j.at(key).is_null())
      fail(Errc::SchemaViolation, std::string("missing field '") + key + "'", {key});
  }
  Listing l;
  try {
    l.id = j.at("id").get<std::string>();
    const auto op = parse_operation(j.at("operation").get<std::string>());
    if (!op) fail(Errc::SchemaViolation, "bad operation", {"operation"});
    l.operation = *op;
    l.price = j.at("price").get<double>();
    l.size = j.at("size").get<double>();
    l.exterior = detail::optional_field<bool>(j, "exterior");
    l.floor = detail::optional_field<int>(j, "floor");
    l.lift = detail::optional_field<bool>(j, "lift");
    l.parking = detail::optional_field<bool>(j, "parking");
    l.new_development = detail::optional_field<bool>(j, "newDevelopment");
    l.photos = j.at("photos").get<int>();
    l.property_type = parse_property_type(j.at("propertyType").get<std::string>());
    l.status = parse_status(j.at("status").get<std::string>());
    l.bathrooms = j.at("bathrooms").get<int>();
    l.rooms = j.at("rooms").get<int>();
    l.price_by_area = detail::optional_field<double>(j, "priceByArea");
    l.latitude = j.at("latitude").get<double>();
    l.longitude = j.at("longitude").get<double>();
    l.neighborhood = j.at("neighborhood").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::SchemaViolation, e.what());
  }
  validate(l);
  return l;
}

// Mortgage parameters without the price: transaction-cost rate, down-payment
// fraction, monthly interest rate and number of monthly payments.
struct MortgageParams {
  double transaction_cost_rate = 0.067;
  double down_payment_fraction = 0.30;
  double monthly_rate = 0.0016;
  int months = 360;

  void validate() const {
    if (!(transaction_cost_rate >= 0.0 && transaction_cost_rate < 1.0))
      fail(Errc::InvalidArgument, "transaction cost rate must lie in [0, 1)");
    if (!(down_payment_fraction >= 0.0 && down_payment_fraction < 1.0))
      fail(Errc::InvalidArgument, "down payment fraction must lie in [0, 1)");
    if (!(monthly_rate >= 0.0) || !std::isfinite(monthly_rate))
      fail(Errc::InvalidArgument, "monthly rate must be >= 0");
    if (months < 1) fail(Errc::InvalidArgument, "months must be >= 1");
  }

  bool operator==(const MortgageParams&) const = default;
};

struct MortgageTerms {
  double price = 0.0;
  MortgageParams params;

  void validate() const {
    if (!(price > 0.0) || !std::isfinite(price)) fail(Errc::InvalidArgument, "price must be > 0");
    params.validate();
  }

  // Amount financed: price plus transaction costs minus the down payment.
  double principal() const {
    return (1.0 + params.transaction_cost_rate) * price - params.down_payment_fraction * price;
  }
};

enum class SizeBucket { B30_60, B60_90, B90_120, B120_150, B150_plus };

inline constexpr std::array<SizeBucket, 5> kAllBuckets{SizeBucket::B30_60, SizeBucket::B60_90,
                                                       SizeBucket::B90_120, SizeBucket::B120_150,
                                                       SizeBucket::B150_plus};

struct BucketBounds {
  double lo;
  double hi;
};

inline BucketBounds bounds(SizeBucket b) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  switch (b) {
    case SizeBucket::B30_60: return {30.0, 60.0};
    case SizeBucket::B60_90: return {60.0, 90.0};
    case SizeBucket::B90_120: return {90.0, 120.0};
    case SizeBucket::B120_150: return {120.0, 150.0};
    case SizeBucket::B150_plus: return {150.0, inf};
  }
  return {0.0, 0.0};
}

// Human label ("30-60") used in CSV output and API payloads.
inline std::string_view to_string(SizeBucket b) {
  switch (b) {
    case SizeBucket::B30_60: return "30-60";
    case SizeBucket::B60_90: return "60-90";
    case SizeBucket::B90_120: return "90-120";
    case SizeBucket::B120_150: return "120-150";
    case SizeBucket::B150_plus: return "150+";
  }
  return "";
}

// Identifier-safe key ("30_60") used for GeoJSON property names.
inline std::string_view bucket_key(SizeBucket b) {
  switch (b) {
    case SizeBucket::B30_60: return "30_60";
    case SizeBucket::B60_90: return "60_90";
    case SizeBucket::B90_120: return "90_120";
    case SizeBucket::B120_150: return "120_150";
    case SizeBucket::B150_plus: return "150_plus";
  }
  return "";
}

inline std::optional<SizeBucket> parse_bucket(std::string_view s) {
  for (auto b : kAllBuckets) {
    if (s == to_string(b) || s == bucket_key(b)) return b;
  }
  return std::nullopt;
}

struct YieldCell {
  std::string neighborhood;  // normalized grouping key
  SizeBucket bucket = SizeBucket::B30_60;
  std::optional<double> mean_rent;
  std::optional<double> mean_mortgage;
  std::optional<double> index;
  std::size_t n_rent = 0;
  std::size_t n_sale = 0;

  bool operator==(const YieldCell&) const = default;
};

enum class ModelSpec { Spec1 = 1, Spec2 = 2, Spec3 = 3, Spec4 = 4 };

inline constexpr std::array<ModelSpec, 4> kAllSpecs{ModelSpec::Spec1, ModelSpec::Spec2,
                                                    ModelSpec::Spec3, ModelSpec::Spec4};

inline int spec_number(ModelSpec s) { return static_cast<int>(s); }

inline ModelSpec spec_from_number(int k) {
  if (k < 1 || k > 4) fail(Errc::InvalidArgument, "spec must be 1..4");
  return static_cast<ModelSpec>(k);
}

// Feature columns (without intercept) per specification; each spec extends
// the previous one.
inline std::vector<std::string> spec_features(ModelSpec spec) {
  std::vector<std::string> cols{"size", "exterior", "floor"};
  if (spec_number(spec) >= 2) cols.emplace_back("lift");
  if (spec_number(spec) >= 3) cols.emplace_back("price_by_area");
  if (spec_number(spec) >= 4) {
    for (const char* c : {"status_good", "status_new_development", "status_renew",
                          "bathrooms_per_sqm", "duplex", "flat", "parking", "photos"})
      cols.emplace_back(c);
  }
  return cols;
}

struct FeatureRow {
  std::vector<double> features;
  double target = 0.0;
};

enum class KernelType { Linear, Polynomial, Radial, Sigmoid };

inline std::string_view to_string(KernelType k) {
  switch (k) {
    case KernelType::Linear: return "linear";
    case KernelType::Polynomial: return "polynomial";
    case KernelType::Radial: return "radial";
    case KernelType::Sigmoid: return "sigmoid";
  }
  return "";
}

inline std::optional<KernelType> parse_kernel_type(std::string_view s) {
  const auto lower = text::to_lower(s);
  if (lower == "linear") return KernelType::Linear;
  if (lower == "polynomial" || lower == "poly") return KernelType::Polynomial;
  if (lower == "radial" || lower == "rbf") return KernelType::Radial;
  if (lower == "sigmoid") return KernelType::Sigmoid;
  return std::nullopt;
}

// gamma left empty resolves to 1/p at fit time.
struct KernelSpec {
  KernelType type = KernelType::Linear;
  int degree = 3;
  std::optional<double> gamma;
  double coef0 = 0.0;

  void validate() const {
    if (type == KernelType::Polynomial && degree < 1)
      fail(Errc::InvalidArgument, "polynomial degree must be >= 1");
    if (type == KernelType::Radial && gamma && !(*gamma > 0.0))
      fail(Errc::InvalidArgument, "radial gamma must be > 0");
  }

  bool operator==(const KernelSpec&) const = default;
};

// epsilon left empty resolves to 0.1 * std(y) at fit time.
struct SvrConfig {
  KernelSpec kernel;
  double cost = 1.0;
  std::optional<double> epsilon;
  double tolerance = 1e-3;
  long max_iterations = 1'000'000;
  bool standardize = false;
  std::size_t cache_mb = 200;

  void validate() const {
    kernel.validate();
    if (!(cost > 0.0)) fail(Errc::InvalidArgument, "cost must be > 0");
    if (epsilon && !(*epsilon >= 0.0)) fail(Errc::InvalidArgument, "epsilon must be >= 0");
    if (!(tolerance > 0.0)) fail(Errc::InvalidArgument, "tolerance must be > 0");
    if (max_iterations < 1) fail(Errc::InvalidArgument, "max_iterations must be >= 1");
  }
};

// mtry left empty resolves to ceil(p / 3).
struct ForestConfig {
  int n_trees = 100;
  std::optional<int> mtry;
  int min_leaf = 1;
  bool bootstrap = true;
  std::uint64_t seed = 0;

  int resolved_mtry(std::size_t p) const {
    const int m = mtry ? *mtry : std::max(1, static_cast<int>((p + 2) / 3));
    if (m < 1 || static_cast<std::size_t>(m) > p)
      fail(Errc::InvalidArgument,
           "mtry " + std::to_string(m) + " outside [1, " + std::to_string(p) + "]");
    return m;
  }

  void validate(std::size_t p) const {
    if (n_trees < 1) fail(Errc::InvalidArgument, "n_trees must be >= 1");
    if (min_leaf < 1) fail(Errc::InvalidArgument, "min_leaf must be >= 1");
    (void)resolved_mtry(p);
  }
};

}  // namespace rentyield
