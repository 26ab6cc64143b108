#pragma once

// Command-line front end. run() takes explicit streams so it can be driven
// in-process by tests. Exit codes: 0 success, 1 domain error, 2 usage error.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "rentyield/domain.hpp"
#include "rentyield/error.hpp"
#include "rentyield/evaluation.hpp"
#include "rentyield/finance.hpp"
#include "rentyield/ingest.hpp"
#include "rentyield/ingest_live.hpp"
#include "rentyield/model.hpp"
#include "rentyield/service.hpp"
#include "rentyield/synthetic.hpp"

namespace rentyield::cli {

namespace detail {

inline void write_output(const std::string& path, const std::string& content, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << content;
    return;
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) fail(Errc::IoError, "cannot write " + path);
  f << content;
  if (!f) fail(Errc::IoError, "write failed for " + path);
}

inline Json read_json_file(const std::string& path) {
  try {
    return Json::parse(ingest::read_file(path));
  } catch (const Json::exception& e) {
    fail(Errc::SchemaViolation, path + ": " + e.what());
  }
}

struct MortgageFlags {
  double rate = MortgageParams{}.monthly_rate;
  int term = MortgageParams{}.months;
  double tcost = MortgageParams{}.transaction_cost_rate;
  double down = MortgageParams{}.down_payment_fraction;

  void add(CLI::App* app) {
    app->add_option("--rate", rate, "Monthly interest rate")->capture_default_str();
    app->add_option("--term", term, "Loan term in months")->capture_default_str();
    app->add_option("--tcost", tcost, "Transaction cost as a fraction of price")->capture_default_str();
    app->add_option("--down", down, "Down payment as a fraction of price")->capture_default_str();
  }

  MortgageParams params() const {
    MortgageParams p{tcost, down, rate, term};
    p.validate();
    return p;
  }
};

struct ForestFlags {
  int trees = 100;
  std::optional<int> mtry;
  int min_leaf = 1;
  bool no_bootstrap = false;

  void add(CLI::App* app) {
    app->add_option("--trees", trees, "Number of trees")->capture_default_str();
    app->add_option("--mtry", mtry, "Candidate features per split (default ceil(p/3))");
    app->add_option("--min-leaf", min_leaf, "Rows at or below which a node is a leaf")->capture_default_str();
    app->add_flag("--no-bootstrap", no_bootstrap, "Train every tree on all rows");
  }

  ForestConfig config() const {
    ForestConfig c;
    c.n_trees = trees;
    c.mtry = mtry;
    c.min_leaf = min_leaf;
    c.bootstrap = !no_bootstrap;
    return c;
  }
};

struct SvrFlags {
  std::string kernel = "linear";
  double cost = 1.0;
  std::optional<double> epsilon;
  std::optional<double> gamma;
  int degree = 3;
  double coef0 = 0.0;
  double tolerance = 1e-3;
  long max_iter = 1'000'000;
  bool standardize = false;

  void add(CLI::App* app, bool with_kernel = true) {
    if (with_kernel)
      app->add_option("--kernel", kernel, "linear | polynomial | radial | sigmoid")->capture_default_str();
    app->add_option("--cost", cost, "Box constraint C")->capture_default_str();
    app->add_option("--epsilon", epsilon, "Tube half-width in target units (default 0.1 * std(y))");
    app->add_option("--gamma", gamma, "Kernel gamma (default 1/p)");
    app->add_option("--degree", degree, "Polynomial degree")->capture_default_str();
    app->add_option("--coef0", coef0, "Polynomial/sigmoid offset")->capture_default_str();
    app->add_option("--tolerance", tolerance, "KKT stopping tolerance")->capture_default_str();
    app->add_option("--max-iter", max_iter, "Iteration cap")->capture_default_str();
    app->add_flag("--standardize", standardize, "Standardize features and target before fitting");
  }

  SvrConfig config(const std::string& kernel_name) const {
    SvrConfig c;
    const auto k = parse_kernel_type(kernel_name);
    if (!k) fail(Errc::InvalidArgument, "unknown kernel '" + kernel_name + "'");
    c.kernel.type = *k;
    c.kernel.gamma = gamma;
    c.kernel.degree = degree;
    c.kernel.coef0 = coef0;
    c.cost = cost;
    c.epsilon = epsilon;
    c.tolerance = tolerance;
    c.max_iterations = max_iter;
    c.standardize = standardize;
    c.validate();
    return c;
  }
};

inline ModelSpec spec_arg(int n) {
  if (n < 1 || n > 4) fail(Errc::InvalidArgument, "spec must be 1..4");
  return spec_from_number(n);
}

inline std::string report_summary(const evaluation::EvalReport& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%s spec %d: n_train=%zu n_test=%zu rmse_test=%.3f rmse_train=%.3f\n",
                r.label().c_str(), spec_number(r.spec), r.n_train, r.n_test, r.rmse_test,
                r.rmse_train.value_or(std::nan("")));
  return buf;
}

}  // namespace detail

inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Rental-yield toolkit: ingest listings, compute yield indices, train rent models, serve the API",
               "rentyield"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "rentyield 1.0.0");

  // ingest
  auto* ingest_cmd = app.add_subcommand("ingest", "Fetch listing pages (fixtures or live API) into a dataset file");
  std::string fixtures_dir, ingest_out, ingest_op = "both", property_kind = "any";
  bool live = false;
  std::optional<int> max_pages;
  ingest::SearchQuery query;
  auto* src = ingest_cmd->add_option_group("source");
  src->add_option("--fixtures", fixtures_dir, "Directory holding {operation}_p{page}.json payloads");
  src->add_flag("--live", live, "Query the vendor API (YF_API_BASE, YF_API_TOKEN)");
  src->require_option(1);
  ingest_cmd->add_option("--out", ingest_out, "Dataset file to write (JSONL)")->envname("YF_DATASET")->required();
  ingest_cmd->add_option("--operation", ingest_op, "rent | sale | both")->capture_default_str();
  ingest_cmd->add_option("--pages", max_pages, "Pages per operation (fixtures default: until the first missing page)");
  ingest_cmd->add_option("--center-lat", query.center_lat, "Search center latitude")->capture_default_str();
  ingest_cmd->add_option("--center-lon", query.center_lon, "Search center longitude")->capture_default_str();
  ingest_cmd->add_option("--radius-km", query.radius_km, "Search radius in km")->capture_default_str();
  ingest_cmd->add_option("--property-type", property_kind, "any | homes | flats | chalets")->capture_default_str();
  ingest_cmd->add_option("--page-size", query.page_size, "Listings per page")->capture_default_str();

  // stats
  auto* stats_cmd = app.add_subcommand("stats", "Summary statistics of a dataset as JSON");
  std::string dataset;
  ingest::StatsOptions stats_opt;
  stats_cmd->add_option("--dataset", dataset, "Dataset file (JSONL)")->envname("YF_DATASET")->required();
  stats_cmd->add_option("--rent-bin", stats_opt.rent_price_bin_width, "Rent histogram bin width")->capture_default_str();
  stats_cmd->add_option("--sale-bin", stats_opt.sale_price_bin_width, "Sale histogram bin width")->capture_default_str();
  stats_cmd->add_option("--size-bin", stats_opt.size_bin_width, "Size histogram bin width")->capture_default_str();

  // index
  auto* index_cmd = app.add_subcommand("index", "Yield index per neighborhood and size bucket");
  detail::MortgageFlags index_mortgage;
  std::string index_format = "csv", boundaries_path, index_out = "-";
  index_cmd->add_option("--dataset", dataset, "Dataset file (JSONL)")->envname("YF_DATASET")->required();
  index_mortgage.add(index_cmd);
  index_cmd->add_option("--format", index_format, "csv | json | geojson | averages")
      ->check(CLI::IsMember({"csv", "json", "geojson", "averages"}))
      ->capture_default_str();
  index_cmd->add_option("--boundaries", boundaries_path, "Neighborhood GeoJSON (required for --format geojson)")
      ->envname("YF_BOUNDARIES");
  index_cmd->add_option("--out", index_out, "Output file, - for stdout")->capture_default_str();

  // train
  auto* train_cmd = app.add_subcommand("train", "Train one rent model and save the artifact");
  std::string model_kind = "ols", model_out;
  int spec_n = 1;
  std::uint64_t seed = 0;
  double split = 0.7;
  std::optional<double> train_zscore;
  unsigned threads = 1;
  detail::ForestFlags train_forest;
  detail::SvrFlags train_svr;
  train_cmd->add_option("--dataset", dataset, "Dataset file (JSONL)")->envname("YF_DATASET")->required();
  train_cmd->add_option("--model", model_kind, "ols | forest | svr")->capture_default_str();
  train_cmd->add_option("--spec", spec_n, "Feature specification 1..4")->check(CLI::Range(1, 4))->capture_default_str();
  train_cmd->add_option("--seed", seed, "Seed for the split and the forest")->capture_default_str();
  train_cmd->add_option("--split", split, "Training fraction")->capture_default_str();
  train_cmd->add_option("--zscore", train_zscore, "Drop rows beyond this price/size z-score before splitting");
  train_cmd->add_option("--threads", threads, "Worker threads for forest training")->capture_default_str();
  train_cmd->add_option("--out", model_out, "Model artifact path (JSON)")->required();
  train_forest.add(train_cmd);
  train_svr.add(train_cmd);

  // evaluate
  auto* eval_cmd = app.add_subcommand("evaluate", "Run the model suite (OLS, forest, SVR per kernel) over specs");
  std::vector<int> eval_specs{1, 2, 3, 4};
  std::vector<std::string> eval_kernels{"linear", "polynomial", "radial", "sigmoid"};
  std::optional<double> eval_zscore;
  std::string eval_csv, scatter_dir;
  bool skip_ols = false, skip_forest = false;
  detail::ForestFlags eval_forest;
  detail::SvrFlags eval_svr;
  eval_cmd->add_option("--dataset", dataset, "Dataset file (JSONL)")->envname("YF_DATASET")->required();
  eval_cmd->add_option("--specs", eval_specs, "Specifications to run")->delimiter(',')->check(CLI::Range(1, 4));
  eval_cmd->add_option("--kernels", eval_kernels, "SVR kernels (empty list skips SVR)")->delimiter(',');
  eval_cmd->add_flag("--no-ols", skip_ols, "Skip OLS");
  eval_cmd->add_flag("--no-forest", skip_forest, "Skip the forest");
  eval_cmd->add_option("--seed", seed, "Seed")->capture_default_str();
  eval_cmd->add_option("--split", split, "Training fraction")->capture_default_str();
  eval_cmd->add_option("--zscore", eval_zscore, "Z-score filter applied to forest cells");
  eval_cmd->add_option("--threads", threads, "Cells evaluated in parallel")->capture_default_str();
  eval_cmd->add_option("--csv", eval_csv, "Write per-cell reports as CSV");
  eval_cmd->add_option("--scatter-dir", scatter_dir, "Write predicted-vs-actual CSV per cell into this directory");
  eval_forest.add(eval_cmd);
  eval_svr.add(eval_cmd, false);

  // grid-search
  auto* grid_cmd = app.add_subcommand("grid-search", "Forest grid search over trees, mtry and z-score");
  evaluation::ForestGrid grid;
  std::string grid_csv;
  std::size_t top = 10;
  int grid_spec = 4;  // the default mtry axis needs at least 10 features
  grid_cmd->add_option("--dataset", dataset, "Dataset file (JSONL)")->envname("YF_DATASET")->required();
  grid_cmd->add_option("--spec", grid_spec, "Feature specification 1..4")->check(CLI::Range(1, 4))->capture_default_str();
  grid_cmd->add_option("--trees", grid.n_trees, "Tree counts")->delimiter(',');
  grid_cmd->add_option("--mtry", grid.mtry, "Candidate feature counts")->delimiter(',');
  grid_cmd->add_option("--zscore", grid.zscore, "Z-score thresholds (inf disables the filter)")->delimiter(',');
  grid_cmd->add_option("--seed", seed, "Seed")->capture_default_str();
  grid_cmd->add_option("--split", split, "Training fraction")->capture_default_str();
  grid_cmd->add_option("--threads", threads, "Cells evaluated in parallel")->capture_default_str();
  grid_cmd->add_option("--csv", grid_csv, "Write every cell as CSV");
  grid_cmd->add_option("--top", top, "Cells printed")->capture_default_str();

  // rank-yield
  auto* rank_cmd = app.add_subcommand("rank-yield", "Rank sale listings by predicted rent over monthly mortgage");
  std::string model_path, rank_format = "csv", rank_out = "-";
  std::optional<std::size_t> limit;
  detail::MortgageFlags rank_mortgage;
  rank_cmd->add_option("--dataset", dataset, "Dataset file (JSONL)")->envname("YF_DATASET")->required();
  rank_cmd->add_option("--model", model_path, "Model artifact from train")->required();
  rank_mortgage.add(rank_cmd);
  rank_cmd->add_option("--limit", limit, "Keep the top N");
  rank_cmd->add_option("--format", rank_format, "csv | json")->check(CLI::IsMember({"csv", "json"}))->capture_default_str();
  rank_cmd->add_option("--out", rank_out, "Output file, - for stdout")->capture_default_str();

  // serve
  auto* serve_cmd = app.add_subcommand("serve", "Serve the JSON API");
  std::vector<std::string> model_specs;
  std::string host = "127.0.0.1";
  int port = 8080;
  serve_cmd->add_option("--dataset", dataset, "Dataset file (JSONL)")->envname("YF_DATASET")->required();
  serve_cmd->add_option("--boundaries", boundaries_path, "Neighborhood GeoJSON")->envname("YF_BOUNDARIES");
  serve_cmd->add_option("--model", model_specs, "Model artifact, as path or id=path (repeatable)");
  serve_cmd->add_option("--host", host, "Bind address")->capture_default_str();
  serve_cmd->add_option("--port", port, "Port")->check(CLI::Range(1, 65535))->capture_default_str();

  // synth
  auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic benchmark dataset");
  synthetic::Config synth;
  std::string synth_out;
  synth_cmd->add_option("--rent", synth.n_rent, "Rent listings")->capture_default_str();
  synth_cmd->add_option("--sale", synth.n_sale, "Sale listings")->capture_default_str();
  synth_cmd->add_option("--neighborhoods", synth.n_neighborhoods, "Neighborhood count")->capture_default_str();
  synth_cmd->add_option("--noise", synth.noise_scale, "Relative noise scale")->capture_default_str();
  synth_cmd->add_option("--contamination", synth.contamination, "Fraction of rent rows turned into outliers")
      ->capture_default_str();
  synth_cmd->add_option("--seed", synth.seed, "Seed")->capture_default_str();
  synth_cmd->add_option("--out", synth_out, "Dataset file to write (JSONL)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e, out, err);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (ingest_cmd->parsed()) {
      auto kind = ingest::parse_property_kind(property_kind);
      if (!kind) fail(Errc::InvalidArgument, "unknown property type '" + property_kind + "'");
      query.property_kind = *kind;
      std::vector<Operation> ops;
      if (ingest_op == "rent" || ingest_op == "both") ops.push_back(Operation::Rent);
      if (ingest_op == "sale" || ingest_op == "both") ops.push_back(Operation::Sale);
      if (ops.empty()) fail(Errc::InvalidArgument, "operation must be rent, sale or both");
      std::vector<Listing> all;
      std::optional<ingest::LiveSource> live_source;
      std::optional<ingest::RateLimiter> limiter;
      if (live) {
        live_source = ingest::live_source_from_env();
        limiter.emplace();
      }
      for (auto op : ops) {
        query.operation = op;
        query.validate();
        if (!live) {
          auto part = ingest::ingest_fixture_pages(query, ingest::FixtureSource{fixtures_dir}, max_pages);
          all.insert(all.end(), part.begin(), part.end());
          continue;
        }
        for (int page = 1; page <= max_pages.value_or(1); ++page) {
          query.page = page;
          const auto raw = ingest::fetch_page(query, *live_source, *limiter);
          std::vector<std::string> records;
          try {
            records = ingest::clean_payload(raw);
          } catch (const Error& e) {
            if (e.code() == Errc::EmptyElementList && page > 1) break;
            throw;
          }
          for (const auto& r : records) all.push_back(ingest::parse_record(r));
        }
      }
      auto deduped = ingest::dedupe(all);
      auto listings = ingest::impute_price_by_area(std::move(deduped.listings));
      ingest::store_dataset(ingest_out, listings);
      out << "ingested " << all.size() << " records, " << deduped.removed << " duplicates removed, "
          << listings.size() << " listings written to " << ingest_out << '\n';
    } else if (stats_cmd->parsed()) {
      out << ingest::to_json(ingest::dataset_stats(ingest::load_dataset(dataset), stats_opt)).dump(2) << '\n';
    } else if (index_cmd->parsed()) {
      const auto cells = finance::compute_yield_index(ingest::load_dataset(dataset), index_mortgage.params());
      std::string content;
      if (index_format == "csv") {
        content = finance::export_csv(cells);
      } else if (index_format == "json") {
        OrderedJson arr = OrderedJson::array();
        for (const auto& c : cells) arr.push_back(finance::to_json(c));
        content = arr.dump(2) + "\n";
      } else if (index_format == "averages") {
        content = "neighborhood,average,buckets\n";
        for (const auto& a : finance::neighborhood_average(cells))
          content += finance::detail::csv_field(a.neighborhood) + ',' +
                     (a.average ? finance::format_index(*a.average) : std::string()) + ',' +
                     std::to_string(a.buckets) + '\n';
      } else {
        if (boundaries_path.empty()) fail(Errc::InvalidArgument, "--format geojson needs --boundaries");
        content = finance::export_geojson(cells, detail::read_json_file(boundaries_path)).dump() + "\n";
      }
      detail::write_output(index_out, content, out);
    } else if (train_cmd->parsed()) {
      evaluation::TrainOptions opt;
      const auto kind = parse_model_kind(model_kind);
      if (!kind) fail(Errc::InvalidArgument, "unknown model '" + model_kind + "'");
      opt.kind = *kind;
      opt.spec = detail::spec_arg(spec_n);
      opt.seed = seed;
      opt.split_fraction = split;
      opt.zscore = train_zscore;
      opt.threads = threads;
      opt.forest = train_forest.config();
      opt.svr = train_svr.config(train_svr.kernel);
      const auto result = evaluation::train_and_evaluate(ingest::load_dataset(dataset), opt);
      save_model(model_out, result.model);
      out << detail::report_summary(result.report);
      if (const auto* fit = std::get_if<regression::OlsFit>(&result.model.payload)) out << regression::format_table({*fit});
    } else if (eval_cmd->parsed()) {
      evaluation::SuiteConfig cfg;
      cfg.ols = !skip_ols;
      if (skip_forest) cfg.forest.reset();
      else cfg.forest = eval_forest.config();
      cfg.forest_zscore = eval_zscore;
      cfg.svr.clear();
      for (const auto& k : eval_kernels) cfg.svr.push_back(eval_svr.config(k));
      cfg.specs.clear();
      for (int s : eval_specs) cfg.specs.push_back(detail::spec_arg(s));
      cfg.seed = seed;
      cfg.split_fraction = split;
      cfg.threads = threads;
      const auto reports = evaluation::run_model_suite(ingest::load_dataset(dataset), cfg);
      out << evaluation::format_suite_table(reports);
      if (!eval_csv.empty()) detail::write_output(eval_csv, evaluation::reports_csv(reports), out);
      if (!scatter_dir.empty()) {
        std::filesystem::create_directories(scatter_dir);
        for (const auto& r : reports)
          if (r.ok())
            detail::write_output((std::filesystem::path(scatter_dir) /
                                  (r.label() + "_spec" + std::to_string(spec_number(r.spec)) + ".csv"))
                                     .string(),
                                 evaluation::scatter_csv(r), out);
      }
    } else if (grid_cmd->parsed()) {
      const auto reports = evaluation::grid_search_forest(ingest::load_dataset(dataset), detail::spec_arg(grid_spec), grid,
                                                          seed, split, threads);
      out << "rank,n_trees,mtry,zscore,rmse_test,n_train,n_test\n";
      for (std::size_t i = 0; i < reports.size() && i < top; ++i) {
        const auto& r = reports[i];
        char buf[160];
        std::snprintf(buf, sizeof buf, "%zu,%d,%d,%g,%s,%zu,%zu\n", i + 1, r.hyperparameters.value("n_trees", 0),
                      r.hyperparameters.value("mtry", 0), r.hyperparameters.value("zscore", 0.0),
                      r.ok() ? std::to_string(r.rmse_test).c_str() : "failed", r.n_train, r.n_test);
        out << buf;
      }
      if (!grid_csv.empty()) detail::write_output(grid_csv, evaluation::reports_csv(reports), out);
    } else if (rank_cmd->parsed()) {
      const auto model = load_model(model_path);
      const auto ranked =
          evaluation::implied_yield_ranking(ingest::load_dataset(dataset), model, rank_mortgage.params(), limit);
      detail::write_output(rank_out,
                           rank_format == "csv" ? evaluation::ranking_csv(ranked)
                                                : evaluation::to_json(ranked).dump(2) + "\n",
                           out);
      if (!ranked.skipped.empty()) err << ranked.skipped.size() << " sale listings skipped for missing features\n";
    } else if (serve_cmd->parsed()) {
      std::optional<Json> boundaries;
      if (!boundaries_path.empty()) boundaries = detail::read_json_file(boundaries_path);
      auto state = service::make_state(ingest::load_dataset(dataset), std::move(boundaries));
      for (const auto& m : model_specs) {
        const auto eq = m.find('=');
        const std::string path = eq == std::string::npos ? m : m.substr(eq + 1);
        const std::string id = eq == std::string::npos ? std::filesystem::path(path).stem().string() : m.substr(0, eq);
        state.add_model(id, load_model(path));
      }
      out << "listening on http://" << host << ':' << port << '\n' << std::flush;
      if (!service::serve(state, host, port)) fail(Errc::NetworkError, "cannot listen on " + host + ":" + std::to_string(port));
    } else if (synth_cmd->parsed()) {
      const auto rows = synthetic::generate(synth);
      ingest::store_dataset(synth_out, rows);
      out << "wrote " << rows.size() << " synthetic listings to " << synth_out << '\n';
    }
  } catch (const Error& e) {
    err << "error [" << to_string(e.code()) << "]: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace rentyield::cli
