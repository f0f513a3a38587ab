// goodhart — command-line front end over the C API.
//
// Subcommands:
//   sweep        conditional-moment curves over a threshold grid (csv/json)
//   verify       invariant suites + series coefficient regeneration
//   classify     Goodhart regime label for a sweep trajectory file
//   coeff-curve  correlation-decay coefficient as a function of the covariance
//   sample       raw draws from a model
//
// Determinism contract: identical config + seed produce byte-identical
// output files; GOODHART_THREADS only changes the wall clock.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <iterator>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "goodhart/goodhart.h"

using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitFault = 2;
constexpr int kExitInconclusive = 3;

[[noreturn]] void die(const std::string& code, const std::string& message,
                      int exit_code = kExitError) {
  json record = {{"error", {{"code", code}, {"message", message}}}};
  std::cerr << record.dump() << "\n";
  std::exit(exit_code);
}

void check_status(gh_status status, const std::string& context) {
  if (status == GH_OK) return;
  die(gh_status_name(status), context + ": " + gh_last_error_message(),
      kExitError);
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

struct ModelHandle {
  gh_model* ptr = nullptr;
  ~ModelHandle() { gh_model_destroy(ptr); }
};

struct OwnedString {
  char* ptr = nullptr;
  ~OwnedString() { gh_string_free(ptr); }
};

// ------------------------------------------------------------------ config

struct RunConfig {
  bool gaussian = true;
  double a = 1.0, b = 1.0, c = 0.0;          // gaussian
  double shape = 3.0, scale = 1.0;           // expheavy
  std::vector<double> m_grid;
  std::vector<std::string> methods;
  uint64_t budget = 1000000;
  uint64_t seed = 1;
  int order = 4;
  std::string output;
  std::string format = "csv";
};

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) die("CONFIG_INVALID", "cannot open config file: " + path);
  json doc;
  try {
    in >> doc;
  } catch (const std::exception& e) {
    die("CONFIG_INVALID", std::string("config is not valid JSON: ") + e.what());
  }
  RunConfig cfg;
  try {
    if (doc.value("schema", 0) != 1) {
      die("CONFIG_INVALID", "config requires \"schema\": 1");
    }
    const json& model = doc.at("model");
    if (model.contains("gaussian")) {
      cfg.gaussian = true;
      cfg.a = model["gaussian"].at("a").get<double>();
      cfg.b = model["gaussian"].at("b").get<double>();
      cfg.c = model["gaussian"].at("c").get<double>();
    } else if (model.contains("expheavy")) {
      cfg.gaussian = false;
      cfg.shape = model["expheavy"].at("shape").get<double>();
      cfg.scale = model["expheavy"].at("scale").get<double>();
    } else {
      die("CONFIG_INVALID", "model must contain \"gaussian\" or \"expheavy\"");
    }
    if (doc.contains("m_grid")) {
      const json& grid = doc["m_grid"];
      if (grid.is_array()) {
        for (const auto& v : grid) cfg.m_grid.push_back(v.get<double>());
      } else {
        const double start = grid.at("start").get<double>();
        const double factor = grid.at("factor").get<double>();
        const int count = grid.at("count").get<int>();
        double m = start;
        for (int i = 0; i < count; ++i, m *= factor) cfg.m_grid.push_back(m);
      }
    }
    if (doc.contains("methods")) {
      for (const auto& v : doc["methods"]) {
        cfg.methods.push_back(v.get<std::string>());
      }
    }
    cfg.budget = doc.value("budget", cfg.budget);
    cfg.seed = doc.value("seed", cfg.seed);
    cfg.order = doc.value("order", cfg.order);
    cfg.output = doc.value("output", cfg.output);
    cfg.format = doc.value("format", cfg.format);
  } catch (const std::exception& e) {
    die("CONFIG_INVALID", std::string("config field error: ") + e.what());
  }
  return cfg;
}

gh_model* make_model(const RunConfig& cfg) {
  gh_model* model = nullptr;
  const gh_status status =
      cfg.gaussian ? gh_model_create_gaussian(cfg.a, cfg.b, cfg.c, &model)
                   : gh_model_create_expheavy(cfg.shape, cfg.scale, &model);
  check_status(status, "model");
  if (gh_model_variance_warning(model) != 0) {
    std::cerr << "note: Var G <= Var xi; the benign-regime guarantee assumes "
                 "the goal's variance dominates\n";
  }
  return model;
}

// ------------------------------------------------------------------- sweep

struct SweepRow {
  double m = 0.0;
  std::string method;
  gh_moments moments{};
  bool failed = false;
  std::string error;
};

const char* const kSweepColumns[] = {
    "tail_prob", "tail_prob_err", "mean_g",  "mean_g_err",
    "mean_xi",   "mean_xi_err",   "var_g",   "var_g_err",
    "corr_gm",   "corr_gm_err"};

std::string field_or_empty(const gh_moments& mo, unsigned bit, double value) {
  return (mo.valid & bit) != 0 ? format_double(value) : std::string();
}

std::vector<std::string> row_fields(const gh_moments& mo) {
  return {field_or_empty(mo, GH_FIELD_TAIL_PROB, mo.tail_prob),
          field_or_empty(mo, GH_FIELD_TAIL_PROB, mo.tail_prob_err),
          field_or_empty(mo, GH_FIELD_MEAN_G, mo.mean_g),
          field_or_empty(mo, GH_FIELD_MEAN_G, mo.mean_g_err),
          field_or_empty(mo, GH_FIELD_MEAN_XI, mo.mean_xi),
          field_or_empty(mo, GH_FIELD_MEAN_XI, mo.mean_xi_err),
          field_or_empty(mo, GH_FIELD_VAR_G, mo.var_g),
          field_or_empty(mo, GH_FIELD_VAR_G, mo.var_g_err),
          field_or_empty(mo, GH_FIELD_CORR_GM, mo.corr_gm),
          field_or_empty(mo, GH_FIELD_CORR_GM, mo.corr_gm_err)};
}

int worker_count() {
  if (const char* env = std::getenv("GOODHART_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v >= 1) return static_cast<int>(std::min<long>(v, 256));
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return static_cast<int>(std::clamp(hw, 1u, 8u));
}

void write_output(const std::string& path, const std::string& body) {
  if (path.empty() || path == "-") {
    std::cout << body;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) die("IO_ERROR", "cannot open output file: " + path);
  out << body;
}

int cmd_sweep(const RunConfig& cfg) {
  if (cfg.m_grid.empty()) die("CONFIG_INVALID", "m_grid is empty");
  for (size_t i = 0; i + 1 < cfg.m_grid.size(); ++i) {
    if (!(cfg.m_grid[i] < cfg.m_grid[i + 1])) {
      die("GRID_NOT_INCREASING", "m_grid must be strictly increasing");
    }
  }
  std::vector<std::string> methods = cfg.methods;
  if (methods.empty()) methods = {"oracle"};
  std::sort(methods.begin(), methods.end());
  methods.erase(std::unique(methods.begin(), methods.end()), methods.end());
  for (const auto& m : methods) {
    if (m != "oracle" && m != "mc" && m != "asymptotic") {
      die("CONFIG_INVALID", "unknown method: " + m);
    }
  }
  const bool has_mc =
      std::find(methods.begin(), methods.end(), "mc") != methods.end();
  if (has_mc && cfg.budget < 1000) {
    die("CONFIG_INVALID", "budget must be >= 10^3 when mc is selected");
  }

  ModelHandle model{make_model(cfg)};
  std::vector<SweepRow> rows;
  for (size_t i = 0; i < cfg.m_grid.size(); ++i) {
    for (const auto& method : methods) {
      SweepRow row;
      row.m = cfg.m_grid[i];
      row.method = method;
      rows.push_back(row);
    }
  }

  std::atomic<size_t> cursor{0};
  auto compute = [&](SweepRow& row) {
    const size_t grid_index =
        std::find(cfg.m_grid.begin(), cfg.m_grid.end(), row.m) -
        cfg.m_grid.begin();
    gh_status status = GH_OK;
    if (row.method == "oracle") {
      status = gh_oracle_moments(model.ptr, row.m, 1e-9, &row.moments);
    } else if (row.method == "asymptotic") {
      status = gh_asymptotic_moments(model.ptr, row.m, cfg.order, &row.moments);
    } else {
      // Fixed per-point seed: stable in the grid position, independent of
      // worker interleaving and of which other methods are selected.
      const uint64_t seed = cfg.seed * 0x9e3779b97f4a7c15ull + grid_index;
      status = gh_estimate_sweep_row(model.ptr, row.m, cfg.budget, seed, -1,
                                     &row.moments);
    }
    if (status != GH_OK) {
      row.failed = true;
      row.error = std::string(gh_status_name(status)) + ": " +
                  gh_last_error_message();
    }
  };
  const int workers = std::min<int>(worker_count(), static_cast<int>(rows.size()));
  if (workers <= 1) {
    for (auto& row : rows) compute(row);
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < workers; ++t) {
      pool.emplace_back([&] {
        for (;;) {
          const size_t i = cursor.fetch_add(1);
          if (i >= rows.size()) return;
          compute(rows[i]);
        }
      });
    }
    for (auto& t : pool) t.join();
  }

  for (const auto& row : rows) {
    if (row.failed) die("SWEEP_POINT_FAILED",
                        "m=" + format_double(row.m) + " method=" + row.method +
                            ": " + row.error);
  }
  std::sort(rows.begin(), rows.end(), [](const SweepRow& a, const SweepRow& b) {
    if (a.m != b.m) return a.m < b.m;
    return a.method < b.method;
  });

  std::ostringstream body;
  if (cfg.format == "csv") {
    body << "m,method";
    for (const char* col : kSweepColumns) body << "," << col;
    body << "\n";
    for (const auto& row : rows) {
      body << format_double(row.m) << "," << row.method;
      for (const auto& field : row_fields(row.moments)) body << "," << field;
      body << "\n";
    }
  } else if (cfg.format == "json") {
    json arr = json::array();
    for (const auto& row : rows) {
      json obj = {{"m", row.m}, {"method", row.method}};
      const auto fields = row_fields(row.moments);
      for (size_t i = 0; i < std::size(kSweepColumns); ++i) {
        if (fields[i].empty()) {
          obj[kSweepColumns[i]] = nullptr;
        } else {
          obj[kSweepColumns[i]] = std::strtod(fields[i].c_str(), nullptr);
        }
      }
      arr.push_back(obj);
    }
    body << arr.dump(2) << "\n";
  } else {
    die("CONFIG_INVALID", "format must be csv or json");
  }
  write_output(cfg.output, body.str());
  return kExitOk;
}

// ------------------------------------------------------------------ verify

int cmd_verify(const std::string& scope, const std::string& output) {
  OwnedString report;
  int n_pass = 0, n_fail = 0;
  const gh_status status = gh_selfcheck(scope.c_str(), &report.ptr, &n_pass,
                                        &n_fail);
  if (status != GH_OK) {
    die(gh_status_name(status),
        std::string("verify faulted: ") + gh_last_error_message(), kExitFault);
  }
  const json doc = json::parse(report.ptr);
  for (const auto& check : doc["checks"]) {
    std::cout << "[" << check["status"].get<std::string>() << "] "
              << check["name"].get<std::string>() << ": "
              << check["detail"].get<std::string>() << "\n";
  }
  std::cout << n_pass << " passed, " << n_fail << " failed\n";
  if (!output.empty()) {
    std::ofstream out(output, std::ios::binary);
    if (!out) die("IO_ERROR", "cannot open report file: " + output);
    out << doc.dump(2) << "\n";
  }
  return n_fail == 0 ? kExitOk : kExitError;
}

// ---------------------------------------------------------------- classify

double parse_support(const std::string& text, double fallback) {
  if (text.empty()) return fallback;
  if (text == "inf" || text == "+inf") return HUGE_VAL;
  if (text == "-inf") return -HUGE_VAL;
  return std::strtod(text.c_str(), nullptr);
}

int cmd_classify(const std::string& input, const std::string& support_inf,
                 const std::string& support_sup) {
  std::ifstream in(input);
  if (!in) die("IO_ERROR", "cannot open trajectory file: " + input);
  std::string header;
  if (!std::getline(in, header)) die("SCHEMA_MISMATCH", "empty trajectory file");
  std::vector<std::string> cols;
  {
    std::stringstream ss(header);
    std::string col;
    while (std::getline(ss, col, ',')) cols.push_back(col);
  }
  std::map<std::string, int> index;
  for (size_t i = 0; i < cols.size(); ++i) index[cols[i]] = static_cast<int>(i);
  for (const char* required : {"m", "mean_g", "mean_g_err"}) {
    if (index.find(required) == index.end()) {
      die("SCHEMA_MISMATCH",
          std::string("trajectory file lacks required column: ") + required);
    }
  }
  const bool has_corr = index.count("corr_gm") != 0;
  const int method_col = index.count("method") != 0
                             ? index["method"]
                             : (index.count("source") != 0 ? index["source"] : -1);

  struct RawRow {
    std::string method;
    gh_trajectory_point pt{};
  };
  std::vector<RawRow> raw;
  std::string line;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    while (fields.size() < cols.size()) fields.emplace_back();
    if (fields.size() != cols.size()) {
      die("SCHEMA_MISMATCH",
          "row " + std::to_string(line_no) + " has wrong column count");
    }
    const auto num = [&](const char* name, double fallback) {
      const auto it = index.find(name);
      if (it == index.end()) return fallback;
      const std::string& text = fields[it->second];
      if (text.empty()) return fallback;
      char* end = nullptr;
      const double v = std::strtod(text.c_str(), &end);
      if (end == text.c_str()) {
        die("SCHEMA_MISMATCH", "row " + std::to_string(line_no) +
                                   ": non-numeric field " + name);
      }
      return v;
    };
    RawRow row;
    if (method_col >= 0) row.method = fields[method_col];
    row.pt.m = num("m", NAN);
    row.pt.mean_g = num("mean_g", NAN);
    row.pt.mean_g_err = num("mean_g_err", 0.0);
    if (std::isnan(row.pt.m) || std::isnan(row.pt.mean_g)) {
      die("SCHEMA_MISMATCH",
          "row " + std::to_string(line_no) + " lacks m or mean_g");
    }
    if (has_corr && !fields[index["corr_gm"]].empty()) {
      row.pt.has_corr = 1;
      row.pt.corr_gm = num("corr_gm", NAN);
      row.pt.corr_gm_err = num("corr_gm_err", 0.0);
    }
    raw.push_back(row);
  }
  if (raw.empty()) die("SCHEMA_MISMATCH", "trajectory file has no data rows");

  // A sweep file may carry several methods; classify one curve, preferring
  // the oracle.
  std::string chosen;
  for (const char* pref : {"oracle", "mc", "asymptotic"}) {
    for (const auto& row : raw) {
      if (row.method == pref) {
        chosen = pref;
        break;
      }
    }
    if (!chosen.empty()) break;
  }
  std::vector<gh_trajectory_point> points;
  for (const auto& row : raw) {
    if (chosen.empty() || row.method == chosen) points.push_back(row.pt);
  }

  gh_regime label;
  OwnedString diag;
  const gh_status status = gh_classify(
      points.data(), points.size(), parse_support(support_inf, -HUGE_VAL),
      parse_support(support_sup, HUGE_VAL), &label, &diag.ptr);
  check_status(status, "classify");
  json doc = json::parse(diag.ptr);
  if (!chosen.empty()) doc["trajectory_method"] = chosen;
  std::cout << doc.dump(2) << "\n";
  return label == GH_REGIME_INCONCLUSIVE ? kExitInconclusive : kExitOk;
}

// ------------------------------------------------------------- coeff-curve

int cmd_coeff_curve(double a, double b, int n_points,
                    const std::string& output) {
  if (!(a > 0.0) || !(b > 0.0)) die("CONFIG_INVALID", "a and b must be positive");
  if (n_points < 10) die("CONFIG_INVALID", "n_points must be at least 10");
  const double bound = std::sqrt(a * b);
  const double eps = 1e-3 * bound;
  const double lo = -bound + eps, hi = bound - eps;
  std::ostringstream body;
  body << "c,coefficient\n";
  for (int i = 0; i < n_points; ++i) {
    const double c = lo + (hi - lo) * i / (n_points - 1);
    double value = 0.0;
    check_status(gh_gaussian_corr_coefficient(a, b, c, &value), "coeff-curve");
    body << format_double(c) << "," << format_double(value) << "\n";
  }
  write_output(output, body.str());
  return kExitOk;
}

// ------------------------------------------------------------------ sample

int cmd_sample(const RunConfig& cfg, uint64_t n) {
  ModelHandle model{make_model(cfg)};
  gh_sampler* sampler = nullptr;
  check_status(gh_sampler_create(model.ptr, cfg.seed, &sampler), "sampler");
  std::vector<double> g(n), xi(n), m(n);
  const gh_status status = gh_sampler_draw(sampler, n, g.data(), xi.data(),
                                           m.data());
  gh_sampler_destroy(sampler);
  check_status(status, "sample");
  std::ostringstream body;
  body << "g,xi,m\n";
  for (uint64_t i = 0; i < n; ++i) {
    body << format_double(g[i]) << "," << format_double(xi[i]) << ","
         << format_double(m[i]) << "\n";
  }
  write_output(cfg.output, body.str());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Goodhart over-optimization toolkit"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the subcommand
  app.set_version_flag("--version", gh_version());

  std::string config_path;
  std::optional<uint64_t> seed_flag;
  std::string output_flag;
  std::string format_flag;
  app.add_option("--config", config_path, "JSON run configuration");
  app.add_option("--seed", seed_flag, "64-bit seed (overrides config)");
  app.add_option("--output", output_flag, "output path (overrides config)");
  app.add_option("--format", format_flag, "csv or json (overrides config)");

  CLI::App* sweep = app.add_subcommand("sweep", "conditional moments over a threshold grid");
  CLI::App* verify = app.add_subcommand("verify", "run the invariant suites");
  std::string scope = "all";
  std::string verify_output;
  verify->add_option("--scope", scope, "gaussian|expheavy|series|all");
  verify->add_option("--report", verify_output, "write the JSON report here");
  CLI::App* classify = app.add_subcommand("classify", "label a trajectory file");
  std::string classify_input, support_inf, support_sup;
  classify->add_option("--input", classify_input, "sweep CSV")->required();
  classify->add_option("--support-inf", support_inf, "inf of G's support (default -inf)");
  classify->add_option("--support-sup", support_sup, "sup of G's support (default +inf)");
  CLI::App* coeff = app.add_subcommand("coeff-curve", "correlation coefficient vs covariance");
  double curve_a = 1.0, curve_b = 1.0;
  int curve_n = 101;
  coeff->add_option("--a", curve_a, "Var G");
  coeff->add_option("--b", curve_b, "Var xi");
  coeff->add_option("--n", curve_n, "number of grid points");
  CLI::App* sample = app.add_subcommand("sample", "draw raw (g, xi, m) samples");
  uint64_t sample_n = 1000;
  sample->add_option("--n", sample_n, "number of samples");

  CLI11_PARSE(app, argc, argv);

  try {
    RunConfig cfg;
    if (!config_path.empty()) cfg = load_config(config_path);
    if (seed_flag) cfg.seed = *seed_flag;
    if (!output_flag.empty()) cfg.output = output_flag;
    if (!format_flag.empty()) cfg.format = format_flag;

    if (sweep->parsed()) {
      if (config_path.empty()) die("CONFIG_INVALID", "sweep requires --config");
      return cmd_sweep(cfg);
    }
    if (verify->parsed()) return cmd_verify(scope, verify_output);
    if (classify->parsed()) {
      return cmd_classify(classify_input, support_inf, support_sup);
    }
    if (coeff->parsed()) {
      return cmd_coeff_curve(curve_a, curve_b, curve_n, cfg.output);
    }
    if (sample->parsed()) {
      if (config_path.empty()) die("CONFIG_INVALID", "sample requires --config");
      return cmd_sample(cfg, sample_n);
    }
  } catch (const std::exception& e) {
    die("INTERNAL", e.what(), kExitFault);
  }
  return kExitOk;
}
