#pragma once

// JSON HTTP API over an immutable dataset snapshot and a registry of loaded
// models. dispatch() is a pure function of (state, request) and is what the
// tests exercise; serve() only adapts it to cpp-httplib.

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "rentyield/domain.hpp"
#include "rentyield/error.hpp"
#include "rentyield/evaluation.hpp"
#include "rentyield/finance.hpp"
#include "rentyield/http.hpp"
#include "rentyield/ingest.hpp"
#include "rentyield/model.hpp"
#include "rentyield/regression.hpp"

namespace rentyield::service {

struct ServiceState {
  std::vector<Listing> dataset;
  std::string dataset_hash;
  std::optional<Json> boundaries;
  MortgageParams defaults;
  std::map<std::string, TrainedModel> models;

  // The registry only grows; re-registering an id is refused.
  void add_model(const std::string& id, TrainedModel model) {
    if (id.empty()) fail(Errc::InvalidArgument, "model id must not be empty");
    if (!models.emplace(id, std::move(model)).second) fail(Errc::InvalidArgument, "model id '" + id + "' already registered");
  }
};

inline ServiceState make_state(std::vector<Listing> dataset, std::optional<Json> boundaries = std::nullopt,
                               MortgageParams defaults = {}) {
  ServiceState s;
  s.dataset_hash = evaluation::dataset_fingerprint(dataset);
  s.dataset = std::move(dataset);
  s.boundaries = std::move(boundaries);
  s.defaults = defaults;
  return s;
}

struct Request {
  std::string method = "GET";
  std::string path;
  std::map<std::string, std::string> params;
  std::string body;
};

struct Response {
  int status = 200;
  std::string body;
};

struct ApiError : std::runtime_error {
  ApiError(int status, std::string code, const std::string& message, Json extra = Json::object())
      : std::runtime_error(message), status(status), code(std::move(code)), extra(std::move(extra)) {}
  int status;
  std::string code;
  Json extra;
};

inline int status_for(Errc e) {
  switch (e) {
    case Errc::InvalidArgument:
    case Errc::SchemaViolation:
    case Errc::MalformedPayload:
    case Errc::NonNumericField:
      return 400;
    case Errc::NoScorableListings:
    case Errc::EmptyDataset:
    case Errc::MissingRequiredField:
    case Errc::NoUsableRows:
    case Errc::UnknownNeighborhood:
    case Errc::NonRepayable:
      return 422;
    default:
      return 500;
  }
}

namespace detail {

inline std::optional<double> number_param(const Request& r, const std::string& key) {
  auto it = r.params.find(key);
  if (it == r.params.end() || it->second.empty()) return std::nullopt;
  const auto& s = it->second;
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v))
    throw ApiError(400, "InvalidArgument", "query parameter '" + key + "' is not a number: " + s);
  return v;
}

inline std::optional<long long> integer_param(const Request& r, const std::string& key) {
  auto it = r.params.find(key);
  if (it == r.params.end() || it->second.empty()) return std::nullopt;
  const auto& s = it->second;
  long long v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size())
    throw ApiError(400, "InvalidArgument", "query parameter '" + key + "' is not an integer: " + s);
  return v;
}

// Mortgage parameters from rate (monthly), term (months), tcost and down,
// falling back to the state defaults.
inline MortgageParams mortgage_params(const ServiceState& s, const Request& r) {
  MortgageParams p = s.defaults;
  if (auto v = number_param(r, "rate")) p.monthly_rate = *v;
  if (auto v = integer_param(r, "term")) {
    if (*v < 1 || *v > 1200) throw ApiError(400, "InvalidArgument", "term must lie in [1, 1200] months");
    p.months = static_cast<int>(*v);
  }
  if (auto v = number_param(r, "tcost")) p.transaction_cost_rate = *v;
  if (auto v = number_param(r, "down")) p.down_payment_fraction = *v;
  p.validate();
  return p;
}

inline const std::pair<const std::string, TrainedModel>& find_model(const ServiceState& s,
                                                                    const std::optional<std::string>& id) {
  if (id) {
    auto it = s.models.find(*id);
    if (it == s.models.end()) throw ApiError(404, "UnknownModel", "no model registered as '" + *id + "'");
    return *it;
  }
  if (s.models.size() == 1) return *s.models.begin();
  if (s.models.empty()) throw ApiError(404, "UnknownModel", "no model is registered");
  throw ApiError(400, "InvalidArgument", "several models are registered; pass 'model'");
}

inline std::optional<std::string> string_param(const Request& r, const std::string& key) {
  auto it = r.params.find(key);
  if (it == r.params.end() || it->second.empty()) return std::nullopt;
  return it->second;
}

template <typename T>
std::optional<T> optional_field(const Json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  try {
    return it->get<T>();
  } catch (const Json::exception&) {
    throw ApiError(400, "InvalidArgument", std::string("listing field '") + key + "' has the wrong type");
  }
}

// Lenient listing reader for prediction: every feature may be absent.
inline Listing listing_for_prediction(const Json& j) {
  if (!j.is_object()) throw ApiError(400, "InvalidArgument", "listing must be a JSON object");
  Listing l;
  l.id = optional_field<std::string>(j, "id").value_or("query");
  l.operation = Operation::Sale;
  l.price = optional_field<double>(j, "price").value_or(1.0);
  const auto size = optional_field<double>(j, "size");
  if (!size) throw ApiError(422, "MissingFeatures", "listing is missing: size", Json{{"missing", {"size"}}});
  if (!(*size > 0.0)) throw ApiError(400, "InvalidArgument", "size must be > 0");
  l.size = *size;
  l.exterior = optional_field<bool>(j, "exterior");
  l.floor = optional_field<int>(j, "floor");
  l.lift = optional_field<bool>(j, "lift");
  l.parking = optional_field<bool>(j, "parking");
  l.new_development = optional_field<bool>(j, "newDevelopment");
  l.photos = optional_field<int>(j, "photos").value_or(0);
  l.bathrooms = optional_field<int>(j, "bathrooms").value_or(0);
  l.rooms = optional_field<int>(j, "rooms").value_or(0);
  l.price_by_area = optional_field<double>(j, "priceByArea");
  if (auto t = optional_field<std::string>(j, "propertyType")) l.property_type = parse_property_type(*t);
  if (auto st = optional_field<std::string>(j, "status")) l.status = parse_status(*st);
  l.neighborhood = optional_field<std::string>(j, "neighborhood").value_or("");
  return l;
}

inline Json params_json(const MortgageParams& p) {
  return Json{{"rate", p.monthly_rate}, {"term", p.months}, {"tcost", p.transaction_cost_rate}, {"down", p.down_payment_fraction}};
}

inline Json health(const ServiceState& s) {
  Json ids = Json::array();
  for (const auto& [id, m] : s.models) ids.push_back(id);
  return Json{{"status", "ok"},
              {"listings", s.dataset.size()},
              {"dataset_hash", s.dataset_hash},
              {"boundaries", s.boundaries.has_value()},
              {"models", ids},
              {"defaults", params_json(s.defaults)}};
}

inline Json models(const ServiceState& s) {
  Json out = Json::array();
  for (const auto& [id, m] : s.models)
    out.push_back(Json{{"id", id},
                       {"kind", to_string(m.kind)},
                       {"spec", spec_number(m.spec)},
                       {"feature_columns", m.feature_columns},
                       {"hyperparameters", m.hyperparameters},
                       {"diagnostics", m.diagnostics}});
  return out;
}

inline Json index_cells(const ServiceState& s, const Request& r) {
  const auto params = mortgage_params(s, r);
  const auto cells = finance::compute_yield_index(s.dataset, params);
  OrderedJson arr = OrderedJson::array();
  for (const auto& c : cells) arr.push_back(finance::to_json(c));
  return Json::parse(arr.dump());
}

inline Json index_geojson(const ServiceState& s, const Request& r) {
  if (!s.boundaries) throw ApiError(404, "NoBoundaries", "the server was started without boundaries");
  const auto params = mortgage_params(s, r);
  return finance::export_geojson(finance::compute_yield_index(s.dataset, params), *s.boundaries);
}

inline Json listings(const ServiceState& s, const Request& r) {
  std::optional<Operation> op;
  if (auto v = string_param(r, "operation")) {
    op = parse_operation(*v);
    if (!op) throw ApiError(400, "InvalidArgument", "operation must be rent or sale");
  }
  std::optional<std::string> hood;
  if (auto v = string_param(r, "neighborhood")) hood = text::normalize_name(*v);
  std::optional<SizeBucket> bucket;
  if (auto v = string_param(r, "bucket")) {
    bucket = parse_bucket(*v);
    if (!bucket) throw ApiError(400, "InvalidArgument", "unknown size bucket: " + *v);
  }
  const long long page = integer_param(r, "page").value_or(1);
  const long long page_size = integer_param(r, "page_size").value_or(50);
  if (page < 1) throw ApiError(400, "InvalidArgument", "page must be >= 1");
  if (page_size < 1 || page_size > 1000) throw ApiError(400, "InvalidArgument", "page_size must lie in [1, 1000]");

  std::vector<const Listing*> hits;
  for (const auto& l : s.dataset) {
    if (op && l.operation != *op) continue;
    if (hood && text::normalize_name(l.neighborhood) != *hood) continue;
    if (bucket && finance::size_bucket_of(l.size) != bucket) continue;
    hits.push_back(&l);
  }
  std::sort(hits.begin(), hits.end(), [](const Listing* a, const Listing* b) {
    return std::tie(a->id, a->operation) < std::tie(b->id, b->operation);
  });
  Json items = Json::array();
  const auto first = static_cast<std::size_t>((page - 1) * page_size);
  for (std::size_t i = first; i < hits.size() && i < first + static_cast<std::size_t>(page_size); ++i)
    items.push_back(Json::parse(to_canonical_line(*hits[i])));
  return Json{{"total", hits.size()}, {"page", page}, {"page_size", page_size}, {"items", std::move(items)}};
}

inline Json predict(const ServiceState& s, const Request& r) {
  Json body;
  try {
    body = Json::parse(r.body);
  } catch (const Json::exception&) {
    throw ApiError(400, "InvalidArgument", "request body is not valid JSON");
  }
  if (!body.is_object()) throw ApiError(400, "InvalidArgument", "request body must be a JSON object");
  std::optional<std::string> id = string_param(r, "model");
  if (auto it = body.find("model"); it != body.end() && it->is_string()) id = it->get<std::string>();
  const auto& [model_id, model] = find_model(s, id);
  const auto lit = body.find("listing");
  const Listing l = listing_for_prediction(lit == body.end() ? body : *lit);
  const auto features = regression::encode_features(l, model.spec);
  if (!features) {
    const auto missing = regression::missing_features(l, model.spec);
    std::string msg = "listing is missing:";
    for (const auto& m : missing) msg += " " + m;
    throw ApiError(422, "MissingFeatures", msg, Json{{"missing", missing}});
  }
  Eigen::MatrixXd X(1, static_cast<Eigen::Index>(features->size()));
  Json named = Json::object();
  for (std::size_t c = 0; c < features->size(); ++c) {
    X(0, static_cast<Eigen::Index>(c)) = (*features)[c];
    named[model.feature_columns[c]] = (*features)[c];
  }
  const double rent = rentyield::predict(model, X)(0);
  return Json{{"model", model_id}, {"kind", to_string(model.kind)}, {"spec", spec_number(model.spec)},
              {"predicted_rent", rent}, {"features", std::move(named)}};
}

inline Json ranking(const ServiceState& s, const Request& r) {
  const auto& [model_id, model] = find_model(s, string_param(r, "model"));
  const auto params = mortgage_params(s, r);
  const long long limit = integer_param(r, "limit").value_or(50);
  if (limit < 1) throw ApiError(400, "InvalidArgument", "limit must be >= 1");
  const auto ranked = evaluation::implied_yield_ranking(s.dataset, model, params, static_cast<std::size_t>(limit));
  Json out = Json::parse(evaluation::to_json(ranked).dump());
  out["model"] = model_id;
  out["params"] = params_json(params);
  return out;
}

inline Response error_response(int status, const std::string& code, const std::string& message,
                               const Json& extra = Json::object()) {
  Json j{{"code", code}, {"message", message}};
  for (const auto& [k, v] : extra.items()) j[k] = v;
  return {status, j.dump()};
}

}  // namespace detail

inline constexpr std::array<std::string_view, 8> kRoutes{
    "/api/health", "/api/stats",  "/api/index",   "/api/index.geojson",
    "/api/listings", "/api/models", "/api/predict", "/api/yield/ranking"};

inline Response dispatch(const ServiceState& s, const Request& r) {
  try {
    const bool get = r.method == "GET";
    const bool post = r.method == "POST";
    Json body;
    if (r.path == "/api/health" && get) body = detail::health(s);
    else if (r.path == "/api/stats" && get) body = Json::parse(ingest::to_json(ingest::dataset_stats(s.dataset)).dump());
    else if (r.path == "/api/index" && get) body = detail::index_cells(s, r);
    else if (r.path == "/api/index.geojson" && get) body = detail::index_geojson(s, r);
    else if (r.path == "/api/listings" && get) body = detail::listings(s, r);
    else if (r.path == "/api/models" && get) body = detail::models(s);
    else if (r.path == "/api/predict" && post) body = detail::predict(s, r);
    else if (r.path == "/api/yield/ranking" && get) body = detail::ranking(s, r);
    else if (std::find(kRoutes.begin(), kRoutes.end(), r.path) != kRoutes.end())
      return detail::error_response(405, "MethodNotAllowed", r.method + " is not supported on " + r.path);
    else
      return detail::error_response(404, "NotFound", "no route for " + r.method + " " + r.path);
    return {200, body.dump()};
  } catch (const ApiError& e) {
    return detail::error_response(e.status, e.code, e.what(), e.extra);
  } catch (const Error& e) {
    return detail::error_response(status_for(e.code()), std::string(to_string(e.code())), e.what());
  }
}

inline void install_routes(httplib::Server& server, const ServiceState& state) {
  auto handler = [&state](const httplib::Request& req, httplib::Response& res) {
    Request r;
    r.method = req.method;
    r.path = req.path;
    for (const auto& [k, v] : req.params) r.params.emplace(k, v);
    r.body = req.body;
    const Response out = dispatch(state, r);
    res.status = out.status;
    res.set_content(out.body, "application/json");
  };
  server.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                              {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                              {"Access-Control-Allow-Headers", "Content-Type"}});
  server.Get(".*", handler);
  server.Post(".*", handler);
  server.Options(".*", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
}

// Blocks until the server is stopped.
inline bool serve(const ServiceState& state, const std::string& host, int port) {
  httplib::Server server;
  install_routes(server, state);
  return server.listen(host, port);
}

}  // namespace rentyield::service
