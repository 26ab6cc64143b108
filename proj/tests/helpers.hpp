#pragma once

#include <Eigen/Dense>
#include <chrono>
#include <filesystem>
#include <string>
#include <vector>

#include "rentyield/domain.hpp"
#include "rentyield/model.hpp"
#include "rentyield/rng.hpp"

namespace testutil {

inline std::filesystem::path fixtures_dir() { return RENTYIELD_FIXTURES_DIR; }

class TempDir {
 public:
  TempDir() {
    const auto stamp = std::chrono::steady_clock::now().time_since_epoch().count();
    path_ = std::filesystem::temp_directory_path() / ("rentyield_test_" + std::to_string(stamp));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

inline const std::vector<std::string>& hood_names() {
  static const std::vector<std::string> names{"Prosperidad", "Acacias", "Adelfas", "Opanel", "Chopera", "Palos"};
  return names;
}

// Random valid listing; ids are unique per (prefix, k).
inline rentyield::Listing random_listing(rentyield::Rng& rng, std::size_t k, const std::string& prefix = "L") {
  using namespace rentyield;
  Listing l;
  l.id = prefix + std::to_string(k);
  l.operation = rng.bernoulli(0.5) ? Operation::Rent : Operation::Sale;
  l.size = std::round(rng.uniform(20.0, 220.0) * 10.0) / 10.0;
  l.price = l.operation == Operation::Rent ? std::round(rng.uniform(400.0, 3000.0)) : std::round(rng.uniform(6e4, 9e5));
  if (rng.bernoulli(0.9)) l.exterior = rng.bernoulli(0.7);
  if (rng.bernoulli(0.9)) l.floor = static_cast<int>(rng.uniform_index(10)) - 1;
  if (rng.bernoulli(0.9)) l.lift = rng.bernoulli(0.6);
  if (rng.bernoulli(0.5)) l.parking = rng.bernoulli(0.3);
  if (rng.bernoulli(0.3)) l.new_development = rng.bernoulli(0.2);
  l.photos = static_cast<int>(rng.uniform_index(40));
  l.property_type = static_cast<PropertyType>(rng.uniform_index(5));
  l.status = static_cast<Status>(rng.uniform_index(4));
  l.bathrooms = 1 + static_cast<int>(rng.uniform_index(3));
  l.rooms = 1 + static_cast<int>(rng.uniform_index(5));
  if (rng.bernoulli(0.8)) l.price_by_area = std::round(rng.uniform(8.0, 25.0) * 100.0) / 100.0;
  l.latitude = 40.3 + rng.uniform(0.0, 0.2);
  l.longitude = -3.8 + rng.uniform(0.0, 0.2);
  l.neighborhood = hood_names()[rng.uniform_index(hood_names().size())];
  return l;
}

inline std::vector<rentyield::Listing> random_listings(std::uint64_t seed, std::size_t n, const std::string& prefix = "L") {
  rentyield::Rng rng(seed);
  std::vector<rentyield::Listing> out;
  for (std::size_t k = 0; k < n; ++k) out.push_back(random_listing(rng, k, prefix));
  return out;
}

inline std::vector<std::vector<double>> to_rows(const Eigen::MatrixXd& X) {
  std::vector<std::vector<double>> out(static_cast<std::size_t>(X.rows()));
  for (Eigen::Index i = 0; i < X.rows(); ++i)
    for (Eigen::Index j = 0; j < X.cols(); ++j) out[static_cast<std::size_t>(i)].push_back(X(i, j));
  return out;
}

inline std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

// OLS artifact with fixed coefficients (intercept first).
inline rentyield::TrainedModel stub_ols(rentyield::ModelSpec spec, const std::vector<double>& coef) {
  using namespace rentyield;
  TrainedModel m;
  m.kind = ModelKind::Ols;
  m.spec = spec;
  m.feature_columns = spec_features(spec);
  regression::OlsFit fit;
  fit.spec = spec;
  fit.columns.push_back("intercept");
  for (const auto& c : m.feature_columns) fit.columns.push_back(c);
  fit.coefficients = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(fit.columns.size()));
  for (std::size_t i = 0; i < coef.size(); ++i) fit.coefficients(static_cast<Eigen::Index>(i)) = coef[i];
  fit.standard_errors = Eigen::VectorXd::Ones(fit.coefficients.size());
  fit.t_stats = fit.coefficients;
  m.payload = fit;
  return m;
}

// Rent listing with every feature present, for models that need them all.
inline rentyield::Listing complete_rent(const std::string& id, double size, double price) {
  using namespace rentyield;
  Listing l;
  l.id = id;
  l.operation = Operation::Rent;
  l.size = size;
  l.price = price;
  l.exterior = true;
  l.floor = 2;
  l.lift = true;
  l.parking = false;
  l.price_by_area = 12.0;
  l.neighborhood = "Prosperidad";
  l.latitude = 40.44;
  l.longitude = -3.67;
  return l;
}

}  // namespace testutil
