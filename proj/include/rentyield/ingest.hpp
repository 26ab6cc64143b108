#pragma once

// Listing ingestion: query URLs, fixture payloads, payload cleaning, record
// extraction, deduplication, summary statistics and the JSONL dataset file.
// Live HTTP fetching lives in ingest_live.hpp.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "rentyield/domain.hpp"
#include "rentyield/error.hpp"
#include "rentyield/text.hpp"

namespace rentyield::ingest {

enum class PropertyKind { Any, Homes, Flats, Chalets };

inline std::string_view to_string(PropertyKind k) {
  switch (k) {
    case PropertyKind::Any: return "any";
    case PropertyKind::Homes: return "homes";
    case PropertyKind::Flats: return "flats";
    case PropertyKind::Chalets: return "chalets";
  }
  return "any";
}

inline std::optional<PropertyKind> parse_property_kind(std::string_view s) {
  const auto lower = text::to_lower(s);
  for (auto k : {PropertyKind::Any, PropertyKind::Homes, PropertyKind::Flats, PropertyKind::Chalets})
    if (lower == to_string(k)) return k;
  return std::nullopt;
}

struct SearchQuery {
  Operation operation = Operation::Rent;
  double center_lat = 40.4167;
  double center_lon = -3.70325;
  double radius_km = 60.0;
  PropertyKind property_kind = PropertyKind::Any;
  int page = 1;
  int page_size = 50;

  void validate() const {
    if (!(radius_km > 0.0)) fail(Errc::InvalidArgument, "radius_km must be > 0");
    if (!(center_lat >= -90.0 && center_lat <= 90.0)) fail(Errc::InvalidArgument, "center_lat out of range");
    if (!(center_lon >= -180.0 && center_lon <= 180.0)) fail(Errc::InvalidArgument, "center_lon out of range");
    if (page < 1) fail(Errc::InvalidArgument, "page must be >= 1");
    if (page_size < 1) fail(Errc::InvalidArgument, "page_size must be >= 1");
  }
};

struct RawPayload {
  std::string body;
  std::chrono::system_clock::time_point fetched_at;
  SearchQuery query;
};

namespace detail {

inline bool valid_absolute_url(std::string_view url) {
  std::string_view rest;
  if (url.starts_with("http://")) {
    rest = url.substr(7);
  } else if (url.starts_with("https://")) {
    rest = url.substr(8);
  } else {
    return false;
  }
  const auto host_end = rest.find_first_of("/?#");
  const auto host = rest.substr(0, host_end);
  if (host.empty()) return false;
  return std::none_of(url.begin(), url.end(), [](char c) {
    return std::isspace(static_cast<unsigned char>(c)) || static_cast<unsigned char>(c) < 0x20;
  });
}

inline std::string format_fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  std::string s = buf;
  if (s.starts_with("-") && s.find_first_not_of("-0.") == std::string::npos) s.erase(0, 1);
  return s;
}

}  // namespace detail

// Query parameters follow the vendor's order: operation, center, distance,
// propertyType (omitted for Any), numPage, maxItems.
inline std::string build_query_url(const SearchQuery& q, const std::string& base_url) {
  if (!detail::valid_absolute_url(base_url))
    fail(Errc::InvalidBaseUrl, "not an absolute http(s) URL: '" + base_url + "'");
  q.validate();
  const auto distance_m = std::max<long long>(1, std::llround(q.radius_km * 1000.0));
  std::string url = base_url;
  url += base_url.find('?') == std::string::npos ? '?' : '&';
  url += "operation=" + std::string(to_string(q.operation));
  url += "&center=" + detail::format_fixed(q.center_lat, 5) + "," + detail::format_fixed(q.center_lon, 5);
  url += "&distance=" + std::to_string(distance_m);
  if (q.property_kind != PropertyKind::Any) url += "&propertyType=" + std::string(to_string(q.property_kind));
  url += "&numPage=" + std::to_string(q.page);
  url += "&maxItems=" + std::to_string(q.page_size);
  return url;
}

inline std::string fixture_file_name(const SearchQuery& q) {
  return std::string(to_string(q.operation)) + "_p" + std::to_string(q.page) + ".json";
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::IoError, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct FixtureSource {
  std::filesystem::path directory;
};

inline RawPayload fetch_page(const SearchQuery& q, const FixtureSource& source) {
  const auto path = source.directory / fixture_file_name(q);
  if (!std::filesystem::is_regular_file(path))
    fail(Errc::FixtureMissing, "no fixture " + path.string(), {path.filename().string()});
  return RawPayload{read_file(path), std::chrono::system_clock::now(), q};
}

namespace detail {

inline int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

inline std::optional<std::uint32_t> hex4(std::string_view s, std::size_t pos) {
  if (pos + 4 > s.size()) return std::nullopt;
  std::uint32_t v = 0;
  for (std::size_t k = 0; k < 4; ++k) {
    const int h = hex_value(s[pos + k]);
    if (h < 0) return std::nullopt;
    v = (v << 4) | static_cast<std::uint32_t>(h);
  }
  return v;
}

// Rewrites `uXXXX` escapes. Spanish accented letters become their base
// letter; other non-ASCII code points become literal UTF-8. A backslash
// form below U+0080 or in the surrogate range is left for the JSON
// parser. A bare form (no backslash) is only rewritten inside the Latin-1
// supplement, where accented letters live.
inline std::string replace_unicode_escapes(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    if (s[i] == 'u') {
      if (auto cp = hex4(s, i + 1)) {
        std::size_t slashes = 0;
        for (std::size_t k = out.size(); k > 0 && out[k - 1] == '\\'; --k) ++slashes;
        const bool escaped = slashes % 2 == 1;
        const bool surrogate = *cp >= 0xD800 && *cp <= 0xDFFF;
        const bool rewrite = escaped ? (*cp >= 0x80 && !surrogate) : (*cp >= 0xA0 && *cp <= 0xFF);
        if (rewrite) {
          if (escaped) out.pop_back();
          if (auto base = text::spanish_base_letter(*cp)) {
            out.push_back(*base);
          } else {
            text::append_utf8(out, *cp);
          }
          i += 5;
          continue;
        }
      }
    }
    out.push_back(s[i++]);
  }
  return out;
}

// Drops whitespace and control characters outside string literals.
inline std::string strip_whitespace_outside_strings(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  bool in_string = false;
  bool escape = false;
  for (char c : s) {
    if (in_string) {
      if (c == '\t' || c == '\n' || c == '\r') continue;
      out.push_back(c);
      if (escape) {
        escape = false;
      } else if (c == '\\') {
        escape = true;
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(c))) continue;
    if (c == '"') in_string = true;
    out.push_back(c);
  }
  return out;
}

// Returns the index one past the bracket matching s[open]; npos if unbalanced.
inline std::size_t match_bracket(std::string_view s, std::size_t open) {
  int depth = 0;
  bool in_string = false;
  bool escape = false;
  for (std::size_t i = open; i < s.size(); ++i) {
    const char c = s[i];
    if (in_string) {
      if (escape) {
        escape = false;
      } else if (c == '\\') {
        escape = true;
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"') {
      in_string = true;
    } else if (c == '{' || c == '[') {
      ++depth;
    } else if (c == '}' || c == ']') {
      if (--depth == 0) return i + 1;
      if (depth < 0) return std::string_view::npos;
    }
  }
  return std::string_view::npos;
}

}  // namespace detail

inline std::string decode_body(std::string_view body) {
  return text::is_valid_utf8(body) ? std::string(body) : text::latin1_to_utf8(body);
}

// Splits a vendor payload into one cleaned, brace-balanced object string
// per listing, in payload order.
inline std::vector<std::string> clean_payload(const RawPayload& raw) {
  std::string s = decode_body(raw.body);
  s = detail::replace_unicode_escapes(s);
  s = text::strip_accents(s);
  s = detail::strip_whitespace_outside_strings(s);
  if (s.empty()) fail(Errc::EmptyElementList, "payload is empty");

  if (s.front() != '{' && s.front() != '[') fail(Errc::MalformedPayload, "payload is not a JSON document");
  if (detail::match_bracket(s, 0) != s.size())
    fail(Errc::MalformedPayload, "unbalanced braces in payload");

  std::size_t list_open = std::string::npos;
  if (s.front() == '[') {
    list_open = 0;
  } else {
    const std::string key = "\"elementList\":[";
    const auto k = s.find(key);
    if (k == std::string::npos) fail(Errc::EmptyElementList, "payload has no element list");
    list_open = k + key.size() - 1;
  }
  const auto list_close = detail::match_bracket(s, list_open);
  if (list_close == std::string::npos) fail(Errc::MalformedPayload, "unterminated element list");

  std::vector<std::string> records;
  std::size_t i = list_open + 1;
  const std::size_t end = list_close - 1;
  while (i < end) {
    if (s[i] == ',') {
      ++i;
      continue;
    }
    if (s[i] != '{') fail(Errc::MalformedPayload, "element list entry is not an object");
    const auto close = detail::match_bracket(s, i);
    if (close == std::string::npos || close > end) fail(Errc::MalformedPayload, "unbalanced listing object");
    records.emplace_back(s.substr(i, close - i));
    i = close;
  }
  if (records.empty()) fail(Errc::EmptyElementList, "element list is empty");
  return records;
}

namespace detail {

inline const Json* find_field(const Json& j, std::initializer_list<const char*> keys) {
  for (const char* k : keys) {
    auto it = j.find(k);
    if (it != j.end() && !it->is_null()) return &*it;
  }
  return nullptr;
}

inline double number_field(const Json& v, const char* name) {
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) {
    const auto& s = v.get_ref<const std::string&>();
    char* end = nullptr;
    const double d = std::strtod(s.c_str(), &end);
    if (!s.empty() && end == s.c_str() + s.size() && std::isfinite(d)) return d;
  }
  fail(Errc::NonNumericField, std::string("field '") + name + "' is not numeric", {name});
}

inline int int_field(const Json& v, const char* name) {
  const double d = number_field(v, name);
  if (d != std::floor(d) || std::abs(d) > 1e9)
    fail(Errc::NonNumericField, std::string("field '") + name + "' is not an integer", {name});
  return static_cast<int>(d);
}

inline std::optional<bool> bool_field(const Json& j, std::initializer_list<const char*> keys) {
  const Json* v = find_field(j, keys);
  if (!v) return std::nullopt;
  if (v->is_boolean()) return v->get<bool>();
  if (v->is_number()) return v->get<double>() != 0.0;
  if (v->is_string()) {
    const auto lower = text::to_lower(v->get<std::string>());
    if (lower == "true") return true;
    if (lower == "false") return false;
  }
  return std::nullopt;
}

// Vendor floor codes: "bj" ground floor, "en" mezzanine, "ss"/"st" below ground.
inline std::optional<int> floor_field(const Json& j) {
  const Json* v = find_field(j, {"floor"});
  if (!v) return std::nullopt;
  if (v->is_string()) {
    const auto lower = text::to_lower(v->get<std::string>());
    if (lower == "bj" || lower == "en") return 0;
    if (lower == "ss" || lower == "st") return -1;
  }
  return int_field(*v, "floor");
}

}  // namespace detail

// Maps one cleaned vendor object to a Listing. Unknown keys are ignored;
// missing optionals stay absent.
inline Listing parse_record(const std::string& record) {
  Json j;
  try {
    j = Json::parse(record);
  } catch (const Json::parse_error& e) {
    fail(Errc::MalformedPayload, std::string("record is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) fail(Errc::MalformedPayload, "record is not an object");

  auto required = [&](std::initializer_list<const char*> keys, const char* name) -> const Json& {
    const Json* v = detail::find_field(j, keys);
    if (!v) fail(Errc::MissingRequiredField, std::string("missing '") + name + "'", {name});
    return *v;
  };

  Listing l;
  const Json& id = required({"propertyCode", "id"}, "id");
  l.id = id.is_string() ? id.get<std::string>() : id.dump();
  const Json& op = required({"operation"}, "operation");
  const auto parsed_op = op.is_string() ? parse_operation(op.get<std::string>()) : std::nullopt;
  if (!parsed_op) fail(Errc::MissingRequiredField, "operation is neither rent nor sale", {"operation"});
  l.operation = *parsed_op;
  l.price = detail::number_field(required({"price"}, "price"), "price");
  l.size = detail::number_field(required({"size"}, "size"), "size");
  l.latitude = detail::number_field(required({"latitude"}, "latitude"), "latitude");
  l.longitude = detail::number_field(required({"longitude"}, "longitude"), "longitude");

  l.exterior = detail::bool_field(j, {"exterior"});
  l.floor = detail::floor_field(j);
  l.lift = detail::bool_field(j, {"hasLift", "lift"});
  if (const Json* p = detail::find_field(j, {"parkingSpace"}); p && p->is_object()) {
    l.parking = detail::bool_field(*p, {"hasParkingSpace"});
  } else {
    l.parking = detail::bool_field(j, {"parking"});
  }
  l.new_development = detail::bool_field(j, {"newDevelopment"});
  if (const Json* v = detail::find_field(j, {"numPhotos", "photos"})) l.photos = detail::int_field(*v, "photos");
  if (const Json* v = detail::find_field(j, {"propertyType"}); v && v->is_string())
    l.property_type = parse_property_type(v->get<std::string>());
  if (const Json* v = detail::find_field(j, {"status"}); v && v->is_string())
    l.status = parse_status(v->get<std::string>());
  if (const Json* v = detail::find_field(j, {"bathrooms"})) l.bathrooms = detail::int_field(*v, "bathrooms");
  if (const Json* v = detail::find_field(j, {"rooms"})) l.rooms = detail::int_field(*v, "rooms");
  if (const Json* v = detail::find_field(j, {"priceByArea"}))
    l.price_by_area = detail::number_field(*v, "priceByArea");
  if (const Json* v = detail::find_field(j, {"neighborhood", "district"}); v && v->is_string())
    l.neighborhood = v->get<std::string>();
  validate(l);
  return l;
}

// Inverse of parse_record for listings representable in the vendor schema.
inline std::string to_vendor_record(const Listing& l) {
  OrderedJson j;
  j["propertyCode"] = l.id;
  j["operation"] = to_string(l.operation);
  j["price"] = l.price;
  j["size"] = l.size;
  if (l.exterior) j["exterior"] = *l.exterior;
  if (l.floor) j["floor"] = std::to_string(*l.floor);
  if (l.lift) j["hasLift"] = *l.lift;
  if (l.parking) j["parkingSpace"] = OrderedJson{{"hasParkingSpace", *l.parking}};
  if (l.new_development) j["newDevelopment"] = *l.new_development;
  j["numPhotos"] = l.photos;
  j["propertyType"] = to_string(l.property_type);
  j["status"] = to_string(l.status);
  j["bathrooms"] = l.bathrooms;
  j["rooms"] = l.rooms;
  if (l.price_by_area) j["priceByArea"] = *l.price_by_area;
  j["latitude"] = l.latitude;
  j["longitude"] = l.longitude;
  j["neighborhood"] = l.neighborhood;
  return j.dump();
}

struct DedupeResult {
  std::vector<Listing> listings;
  std::size_t removed = 0;
};

// Keeps the last occurrence per (id, operation), preserving the relative
// order of the survivors.
inline DedupeResult dedupe(const std::vector<Listing>& listings) {
  std::map<std::pair<std::string, Operation>, std::size_t> last;
  for (std::size_t i = 0; i < listings.size(); ++i) last[{listings[i].id, listings[i].operation}] = i;
  DedupeResult out;
  out.listings.reserve(last.size());
  for (std::size_t i = 0; i < listings.size(); ++i) {
    if (last.at({listings[i].id, listings[i].operation}) == i) out.listings.push_back(listings[i]);
  }
  out.removed = listings.size() - out.listings.size();
  return out;
}

// Fills absent price_by_area with the mean rent-per-m2 of the listing's
// neighborhood (rent listings only). Listings in neighborhoods without any
// rent remain absent.
inline std::vector<Listing> impute_price_by_area(std::vector<Listing> listings) {
  std::unordered_map<std::string, std::pair<double, std::size_t>> acc;
  for (const auto& l : listings) {
    if (l.operation != Operation::Rent) continue;
    auto& [sum, n] = acc[text::normalize_name(l.neighborhood)];
    sum += l.price / l.size;
    ++n;
  }
  for (auto& l : listings) {
    if (l.price_by_area) continue;
    auto it = acc.find(text::normalize_name(l.neighborhood));
    if (it != acc.end()) l.price_by_area = it->second.first / static_cast<double>(it->second.second);
  }
  return listings;
}

struct ColumnStats {
  double mean = 0.0;
  double std = 0.0;  // population
  double min = 0.0;
  double max = 0.0;
};

struct Histogram {
  double origin = 0.0;
  double width = 1.0;
  std::vector<std::size_t> counts;
};

struct OperationStats {
  std::size_t count = 0;
  ColumnStats price;
  ColumnStats size;
  Histogram price_hist;
  Histogram size_hist;
};

struct StatsOptions {
  double rent_price_bin_width = 250.0;
  double sale_price_bin_width = 100000.0;
  double size_bin_width = 10.0;
};

struct DatasetStats {
  std::size_t total = 0;
  std::optional<OperationStats> rent;
  std::optional<OperationStats> sale;
};

namespace detail {

// Welford's streaming mean/variance.
inline ColumnStats column_stats(const std::vector<double>& xs) {
  ColumnStats s;
  s.min = xs.front();
  s.max = xs.front();
  double mean = 0.0;
  double m2 = 0.0;
  std::size_t n = 0;
  for (double x : xs) {
    ++n;
    const double delta = x - mean;
    mean += delta / static_cast<double>(n);
    m2 += delta * (x - mean);
    s.min = std::min(s.min, x);
    s.max = std::max(s.max, x);
  }
  s.mean = mean;
  s.std = std::sqrt(std::max(0.0, m2 / static_cast<double>(n)));
  return s;
}

inline Histogram histogram(const std::vector<double>& xs, double width, double lo, double hi) {
  Histogram h;
  h.width = width;
  h.origin = std::floor(lo / width) * width;
  const auto bins = static_cast<std::size_t>(std::floor((hi - h.origin) / width)) + 1;
  h.counts.assign(bins, 0);
  for (double x : xs) {
    auto b = static_cast<std::size_t>(std::floor((x - h.origin) / width));
    h.counts[std::min(b, bins - 1)]++;
  }
  return h;
}

}  // namespace detail

inline DatasetStats dataset_stats(const std::vector<Listing>& listings, const StatsOptions& opt = {}) {
  if (listings.empty()) fail(Errc::EmptyDataset, "dataset has no listings");
  if (!(opt.rent_price_bin_width > 0 && opt.sale_price_bin_width > 0 && opt.size_bin_width > 0))
    fail(Errc::InvalidArgument, "histogram bin widths must be > 0");
  DatasetStats out;
  out.total = listings.size();
  for (Operation op : {Operation::Rent, Operation::Sale}) {
    std::vector<double> prices, sizes;
    for (const auto& l : listings) {
      if (l.operation != op) continue;
      prices.push_back(l.price);
      sizes.push_back(l.size);
    }
    if (prices.empty()) continue;
    OperationStats s;
    s.count = prices.size();
    s.price = detail::column_stats(prices);
    s.size = detail::column_stats(sizes);
    const double pw = op == Operation::Rent ? opt.rent_price_bin_width : opt.sale_price_bin_width;
    s.price_hist = detail::histogram(prices, pw, s.price.min, s.price.max);
    s.size_hist = detail::histogram(sizes, opt.size_bin_width, s.size.min, s.size.max);
    (op == Operation::Rent ? out.rent : out.sale) = std::move(s);
  }
  return out;
}

inline OrderedJson to_json(const DatasetStats& stats) {
  auto col = [](const ColumnStats& c) {
    return OrderedJson{{"mean", c.mean}, {"std", c.std}, {"min", c.min}, {"max", c.max}};
  };
  auto hist = [](const Histogram& h) {
    return OrderedJson{{"origin", h.origin}, {"width", h.width}, {"counts", h.counts}};
  };
  OrderedJson j;
  j["total"] = stats.total;
  for (auto [name, s] : {std::pair{"rent", &stats.rent}, std::pair{"sale", &stats.sale}}) {
    if (!*s) {
      j[name] = OrderedJson{{"count", 0}};
      continue;
    }
    const auto& o = **s;
    j[name] = OrderedJson{{"count", o.count},        {"price", col(o.price)},
                          {"size", col(o.size)},     {"price_histogram", hist(o.price_hist)},
                          {"size_histogram", hist(o.size_hist)}};
  }
  return j;
}

inline void store_dataset(const std::filesystem::path& path, const std::vector<Listing>& listings) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(Errc::IoError, "cannot write " + path.string());
  for (const auto& l : listings) out << to_canonical_line(l) << '\n';
  out.flush();
  if (!out) fail(Errc::IoError, "write failed for " + path.string());
}

inline std::vector<Listing> parse_dataset(std::string_view content) {
  std::vector<Listing> listings;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < content.size()) {
    auto nl = content.find('\n', pos);
    if (nl == std::string_view::npos) nl = content.size();
    const auto line = content.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    try {
      listings.push_back(listing_from_canonical_json(Json::parse(line)));
    } catch (const Json::exception& e) {
      throw Error(Errc::SchemaViolation, "line " + std::to_string(line_no) + ": " + e.what(), {}, line_no);
    } catch (const Error& e) {
      throw Error(Errc::SchemaViolation, "line " + std::to_string(line_no) + ": " + e.what(), e.details(),
                  line_no);
    }
  }
  return listings;
}

inline std::vector<Listing> load_dataset(const std::filesystem::path& path) {
  return parse_dataset(read_file(path));
}

// Fixture-mode pipeline for one operation: pages 1..max_pages (or until the
// first missing page when max_pages is empty), cleaned and parsed in order.
inline std::vector<Listing> ingest_fixture_pages(SearchQuery q, const FixtureSource& source,
                                                 std::optional<int> max_pages = std::nullopt) {
  std::vector<Listing> out;
  for (int page = 1; !max_pages || page <= *max_pages; ++page) {
    q.page = page;
    RawPayload raw;
    try {
      raw = fetch_page(q, source);
    } catch (const Error& e) {
      if (e.code() == Errc::FixtureMissing && !max_pages && page > 1) break;
      throw;
    }
    for (const auto& record : clean_payload(raw)) out.push_back(parse_record(record));
  }
  return out;
}

}  // namespace rentyield::ingest
