#include "lggp/io.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "lggp/stats.hpp"

namespace lggp {

namespace fs = std::filesystem;
using nlohmann::json;

std::string format_full(double value) {
  char buffer[40];
  std::snprintf(buffer, sizeof(buffer), "%.17g", value);
  return buffer;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::stringstream stream(line);
  while (std::getline(stream, field, ',')) {
    fields.push_back(field);
  }
  if (!line.empty() && line.back() == ',') {
    fields.emplace_back();
  }
  return fields;
}

std::string trim(const std::string& text) {
  const auto begin = text.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) {
    return "";
  }
  const auto end = text.find_last_not_of(" \t\r\n");
  return text.substr(begin, end - begin + 1);
}

double parse_double(const std::string& text, long line_number) {
  const std::string trimmed = trim(text);
  char* end = nullptr;
  const double value = std::strtod(trimmed.c_str(), &end);
  if (trimmed.empty() || end != trimmed.c_str() + trimmed.size()) {
    throw ParseError("cannot parse number '" + trimmed + "'", line_number);
  }
  return value;
}

long parse_long(const std::string& text, const std::string& key) {
  try {
    std::size_t pos = 0;
    const long value = std::stol(trim(text), &pos);
    if (pos != trim(text).size()) {
      throw std::invalid_argument(text);
    }
    return value;
  } catch (const std::exception&) {
    throw InvalidInput("config key '" + key + "' needs an integer, got '" +
                       text + "'");
  }
}

double parse_config_double(const std::string& text, const std::string& key) {
  try {
    return parse_double(text, 0);
  } catch (const ParseError&) {
    throw InvalidInput("config key '" + key + "' needs a number, got '" + text +
                       "'");
  }
}

bool parse_bool(const std::string& text, const std::string& key) {
  const std::string t = trim(text);
  if (t == "true" || t == "1") return true;
  if (t == "false" || t == "0") return false;
  throw InvalidInput("config key '" + key + "' needs true/false, got '" + text +
                     "'");
}

std::vector<double> parse_double_list(const std::string& text,
                                      const std::string& key) {
  std::vector<double> values;
  for (const auto& field : split_csv_line(text)) {
    values.push_back(parse_config_double(field, key));
  }
  return values;
}

std::ofstream open_output(const fs::path& path) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  }
  return out;
}

}  // namespace

Dataset load_dataset(const fs::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw InvalidInput("cannot open dataset '" + path.string() + "'");
  }
  std::string line;
  if (!std::getline(in, line)) {
    throw ParseError("dataset file is empty", 1);
  }
  const auto header = split_csv_line(trim(line));
  if (header.size() < 2 || trim(header.back()) != "y") {
    throw ParseError("expected header x_1,...,x_D,y", 1);
  }
  const Index dim = static_cast<Index>(header.size()) - 1;
  for (Index d = 0; d < dim; ++d) {
    const std::string expected = "x_" + std::to_string(d + 1);
    if (trim(header[static_cast<std::size_t>(d)]) != expected) {
      throw ParseError("expected column '" + expected + "'", 1);
    }
  }

  std::vector<std::vector<double>> rows;
  long line_number = 1;
  while (std::getline(in, line)) {
    ++line_number;
    if (trim(line).empty()) {
      continue;
    }
    const auto fields = split_csv_line(line);
    if (static_cast<Index>(fields.size()) != dim + 1) {
      throw ParseError("expected " + std::to_string(dim + 1) + " fields",
                       line_number);
    }
    std::vector<double> row;
    row.reserve(fields.size());
    for (const auto& field : fields) {
      row.push_back(parse_double(field, line_number));
    }
    if (!(row.back() > 0.0)) {
      throw InvalidInput("observation must be positive at line " +
                         std::to_string(line_number));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) {
    throw ParseError("dataset has no observations", line_number);
  }

  Dataset data;
  Matrix points(static_cast<Index>(rows.size()), dim);
  data.y = Vector(static_cast<Index>(rows.size()));
  for (Index k = 0; k < points.rows(); ++k) {
    for (Index d = 0; d < dim; ++d) {
      points(k, d) = rows[static_cast<std::size_t>(k)][static_cast<std::size_t>(d)];
    }
    data.y[k] = rows[static_cast<std::size_t>(k)].back();
  }
  data.grid = InputGrid(std::move(points));
  data.validate();
  return data;
}

void save_dataset(const fs::path& path, const Dataset& data) {
  auto out = open_output(path);
  const Index dim = data.grid.dim();
  for (Index d = 0; d < dim; ++d) {
    out << "x_" << (d + 1) << ",";
  }
  out << "y\n";
  for (Index k = 0; k < data.size(); ++k) {
    for (Index d = 0; d < dim; ++d) {
      out << format_full(data.grid.points(k, d)) << ",";
    }
    out << format_full(data.y[k]) << "\n";
  }
}

Dataset preprocess_spectrum(const Vector& raw_x, const Vector& raw_y,
                            double cutoff, double y_max_target) {
  if (raw_x.size() != raw_y.size()) {
    throw InvalidInput("spectrum x and y lengths differ");
  }
  std::vector<double> xs;
  std::vector<double> ys;
  for (Index k = 0; k < raw_x.size(); ++k) {
    if (raw_x[k] <= cutoff) {
      xs.push_back(raw_x[k]);
      ys.push_back(raw_y[k]);
    }
  }
  if (xs.empty()) {
    throw InvalidInput("no spectrum points remain below the cutoff");
  }
  const double y_max = *std::max_element(ys.begin(), ys.end());
  if (!(y_max > 0.0)) {
    throw InvalidInput("spectrum intensities must have a positive maximum");
  }
  const double x_min = *std::min_element(xs.begin(), xs.end());
  const double x_max = *std::max_element(xs.begin(), xs.end());
  const double x_span = x_max > x_min ? x_max - x_min : 1.0;

  Dataset data;
  Matrix points(static_cast<Index>(xs.size()), 1);
  data.y = Vector(static_cast<Index>(xs.size()));
  for (Index k = 0; k < points.rows(); ++k) {
    points(k, 0) = (xs[static_cast<std::size_t>(k)] - x_min) / x_span;
    data.y[k] = ys[static_cast<std::size_t>(k)] * (y_max_target / y_max);
  }
  data.grid = InputGrid(std::move(points));
  data.validate();
  return data;
}

Vector load_vector(const fs::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw InvalidInput("cannot open '" + path.string() + "'");
  }
  std::vector<double> values;
  std::string line;
  long line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    const std::string trimmed = trim(line);
    if (trimmed.empty()) {
      continue;
    }
    values.push_back(parse_double(trimmed, line_number));
  }
  return Eigen::Map<Vector>(values.data(), static_cast<Index>(values.size()));
}

std::string run_mode_name(RunMode mode) {
  switch (mode) {
    case RunMode::kSimulate: return "simulate";
    case RunMode::kFitHmc: return "fit-hmc";
    case RunMode::kFitHmcShort: return "fit-hmc-short";
    case RunMode::kFitPl: return "fit-pl";
    case RunMode::kFitPlTempered: return "fit-pl-tempered";
    case RunMode::kPredict: return "predict";
  }
  return "unknown";
}

std::optional<RunMode> parse_run_mode(const std::string& name) {
  if (name == "simulate") return RunMode::kSimulate;
  if (name == "fit-hmc") return RunMode::kFitHmc;
  if (name == "fit-hmc-short") return RunMode::kFitHmcShort;
  if (name == "fit-pl") return RunMode::kFitPl;
  if (name == "fit-pl-tempered") return RunMode::kFitPlTempered;
  if (name == "predict") return RunMode::kPredict;
  return std::nullopt;
}

RunConfig::RunConfig() {
  // Synthetic-preset priors.
  priors.alpha.mean_loc = 2.0;
  priors.alpha.mean_scale = 1.0;
  priors.alpha.noise_scale = 0.001;
  priors.alpha.signal_scale = 0.5;
  priors.alpha.length_loc = 0.1;
  priors.alpha.length_scale = 0.2;
  priors.alpha.length_bound = 0.01;
  priors.beta.mean_loc = 1.0;
  priors.beta.mean_scale = 0.5;
  priors.beta.noise_scale = 0.001;
  priors.beta.signal_scale = 0.5;
  priors.beta.length_loc = 0.5;
  priors.beta.length_scale = 0.2;
  priors.beta.length_bound = 0.25;

  hmc.target_accept = 0.99;

  sim_alpha.mean = 2.0;
  sim_alpha.noise_std = 0.001;
  sim_alpha.signal_std = 1.0;
  sim_alpha.length_scales = Vector::Constant(1, 0.05);
  sim_beta.mean = 1.0;
  sim_beta.noise_std = 0.001;
  sim_beta.signal_std = 1.0;
  sim_beta.length_scales = Vector::Constant(1, 0.5);
}

void RunConfig::validate() const {
  priors.validate();
  hmc.validate();
  schedule.validate();
  if (workers < 1) {
    throw InvalidInput("workers must be >= 1");
  }
  if (ensemble_size < 2) {
    throw InvalidInput("ensemble_size must be >= 2");
  }
  if (pl.max_iterations < 1) {
    throw InvalidInput("pl_iterations must be >= 1");
  }
  if (n_predict_draws < 1) {
    throw InvalidInput("n_predict_draws must be >= 1");
  }
  const bool needs_dataset = mode != RunMode::kSimulate;
  if (needs_dataset) {
    if (dataset_path.empty()) {
      throw InvalidInput("config needs a dataset path");
    }
    if (!fs::exists(dataset_path)) {
      throw InvalidInput("dataset '" + dataset_path.string() + "' not found");
    }
  }
  if (mode == RunMode::kPredict) {
    if (fit_dir.empty() || !fs::exists(fit_dir)) {
      throw InvalidInput("predict mode needs an existing fit_dir");
    }
    if (!test_grid_path.empty() && !fs::exists(test_grid_path)) {
      throw InvalidInput("test grid '" + test_grid_path.string() +
                         "' not found");
    }
    if (test_grid_path.empty() && n_test < 1) {
      throw InvalidInput("predict mode needs test_grid or n_test");
    }
  }
  if (mode == RunMode::kSimulate) {
    if (!mean_vector_path.empty() && !fs::exists(mean_vector_path)) {
      throw InvalidInput("mean vector '" + mean_vector_path.string() +
                         "' not found");
    }
    if (mean_vector_path.empty() && sim_n_points < 2) {
      throw InvalidInput("sim_n_points must be >= 2");
    }
  }
}

std::map<std::string, std::string> RunConfig::echo() const {
  std::map<std::string, std::string> out;
  out["mode"] = run_mode_name(mode);
  out["dataset"] = dataset_path.string();
  out["output_dir"] = output_dir.string();
  out["seed"] = std::to_string(seed);
  out["workers"] = std::to_string(workers);

  out["prior_mu_alpha_loc"] = format_full(priors.alpha.mean_loc);
  out["prior_mu_alpha_scale"] = format_full(priors.alpha.mean_scale);
  out["prior_sigma_e_alpha"] = format_full(priors.alpha.noise_scale);
  out["prior_sigma_s_alpha"] = format_full(priors.alpha.signal_scale);
  out["prior_l_alpha_loc"] = format_full(priors.alpha.length_loc);
  out["prior_l_alpha_scale"] = format_full(priors.alpha.length_scale);
  out["prior_l_alpha_bound"] = format_full(priors.alpha.length_bound);
  out["prior_mu_beta_loc"] = format_full(priors.beta.mean_loc);
  out["prior_mu_beta_scale"] = format_full(priors.beta.mean_scale);
  out["prior_sigma_e_beta"] = format_full(priors.beta.noise_scale);
  out["prior_sigma_s_beta"] = format_full(priors.beta.signal_scale);
  out["prior_l_beta_loc"] = format_full(priors.beta.length_loc);
  out["prior_l_beta_scale"] = format_full(priors.beta.length_scale);
  out["prior_l_beta_bound"] = format_full(priors.beta.length_bound);

  out["ensemble_size"] = std::to_string(ensemble_size);
  out["pl_iterations"] = std::to_string(pl.max_iterations);
  out["pl_tol"] = format_full(pl.tol);
  out["pl_early_stop"] = pl.early_stop ? "true" : "false";

  out["n_samples"] = std::to_string(hmc.n_samples);
  out["n_warmup"] = std::to_string(hmc.n_warmup);
  out["target_accept"] = format_full(hmc.target_accept);
  out["max_tree_depth"] = std::to_string(hmc.max_tree_depth);
  out["mass_matrix"] = hmc.mass_mode == MassMatrixMode::kIdentity
                           ? "identity"
                           : "diagonal";
  out["step_size"] = format_full(hmc.initial_step_size);

  std::string kappas, samples, warmups;
  for (std::size_t i = 0; i < schedule.steps.size(); ++i) {
    if (i > 0) {
      kappas += ",";
      samples += ",";
      warmups += ",";
    }
    kappas += format_full(schedule.steps[i].kappa);
    samples += std::to_string(schedule.steps[i].n_samples);
    warmups += std::to_string(schedule.steps[i].n_warmup);
  }
  out["kappa_schedule"] = kappas;
  out["temper_samples"] = samples;
  out["temper_warmups"] = warmups;

  out["n_predict_draws"] = std::to_string(n_predict_draws);
  out["preprocess"] = preprocess ? "spectrum" : "none";
  out["cutoff"] = format_full(cutoff);
  out["y_max_target"] = format_full(y_max_target);

  out["sim_n_points"] = std::to_string(sim_n_points);
  out["sim_mu_alpha"] = format_full(sim_alpha.mean);
  out["sim_sigma_e_alpha"] = format_full(sim_alpha.noise_std);
  out["sim_sigma_s_alpha"] = format_full(sim_alpha.signal_std);
  out["sim_l_alpha"] = format_full(sim_alpha.length_scales[0]);
  out["sim_mu_beta"] = format_full(sim_beta.mean);
  out["sim_sigma_e_beta"] = format_full(sim_beta.noise_std);
  out["sim_sigma_s_beta"] = format_full(sim_beta.signal_std);
  out["sim_l_beta"] = format_full(sim_beta.length_scales[0]);
  out["mean_vector"] = mean_vector_path.string();
  out["rate_constant"] = format_full(rate_constant);

  out["fit_dir"] = fit_dir.string();
  out["test_grid"] = test_grid_path.string();
  out["n_test"] = std::to_string(n_test);
  return out;
}

void apply_config_entry(RunConfig& config, const std::string& raw_key,
                        const std::string& raw_value) {
  const std::string key = trim(raw_key);
  const std::string value = trim(raw_value);

  if (key == "mode") {
    const auto mode = parse_run_mode(value);
    if (!mode) {
      throw InvalidInput("unknown mode '" + value + "'");
    }
    config.mode = *mode;
  } else if (key == "dataset") {
    config.dataset_path = value;
  } else if (key == "output_dir") {
    config.output_dir = value;
  } else if (key == "seed") {
    config.seed = static_cast<std::uint64_t>(parse_long(value, key));
  } else if (key == "workers") {
    config.workers = static_cast<int>(parse_long(value, key));
  } else if (key == "prior_mu_alpha_loc") {
    config.priors.alpha.mean_loc = parse_config_double(value, key);
  } else if (key == "prior_mu_alpha_scale") {
    config.priors.alpha.mean_scale = parse_config_double(value, key);
  } else if (key == "prior_sigma_e_alpha") {
    config.priors.alpha.noise_scale = parse_config_double(value, key);
  } else if (key == "prior_sigma_s_alpha") {
    config.priors.alpha.signal_scale = parse_config_double(value, key);
  } else if (key == "prior_l_alpha_loc") {
    config.priors.alpha.length_loc = parse_config_double(value, key);
  } else if (key == "prior_l_alpha_scale") {
    config.priors.alpha.length_scale = parse_config_double(value, key);
  } else if (key == "prior_l_alpha_bound") {
    config.priors.alpha.length_bound = parse_config_double(value, key);
  } else if (key == "prior_mu_beta_loc") {
    config.priors.beta.mean_loc = parse_config_double(value, key);
  } else if (key == "prior_mu_beta_scale") {
    config.priors.beta.mean_scale = parse_config_double(value, key);
  } else if (key == "prior_sigma_e_beta") {
    config.priors.beta.noise_scale = parse_config_double(value, key);
  } else if (key == "prior_sigma_s_beta") {
    config.priors.beta.signal_scale = parse_config_double(value, key);
  } else if (key == "prior_l_beta_loc") {
    config.priors.beta.length_loc = parse_config_double(value, key);
  } else if (key == "prior_l_beta_scale") {
    config.priors.beta.length_scale = parse_config_double(value, key);
  } else if (key == "prior_l_beta_bound") {
    config.priors.beta.length_bound = parse_config_double(value, key);
  } else if (key == "ensemble_size") {
    config.ensemble_size = parse_long(value, key);
  } else if (key == "pl_iterations") {
    config.pl.max_iterations = static_cast<int>(parse_long(value, key));
  } else if (key == "pl_tol") {
    config.pl.tol = parse_config_double(value, key);
  } else if (key == "pl_early_stop") {
    config.pl.early_stop = parse_bool(value, key);
  } else if (key == "n_samples") {
    config.hmc.n_samples = static_cast<int>(parse_long(value, key));
    config.chain_counts_overridden = true;
  } else if (key == "n_warmup") {
    config.hmc.n_warmup = static_cast<int>(parse_long(value, key));
    config.chain_counts_overridden = true;
  } else if (key == "target_accept") {
    config.hmc.target_accept = parse_config_double(value, key);
  } else if (key == "max_tree_depth") {
    config.hmc.max_tree_depth = static_cast<int>(parse_long(value, key));
  } else if (key == "mass_matrix") {
    if (value == "identity") {
      config.hmc.mass_mode = MassMatrixMode::kIdentity;
    } else if (value == "diagonal") {
      config.hmc.mass_mode = MassMatrixMode::kDiagonalAdapted;
    } else {
      throw InvalidInput("mass_matrix must be identity or diagonal");
    }
  } else if (key == "step_size") {
    config.hmc.initial_step_size = parse_config_double(value, key);
  } else if (key == "kappa_schedule" || key == "temper_samples" ||
             key == "temper_warmups") {
    const auto values = parse_double_list(value, key);
    auto& steps = config.schedule.steps;
    if (steps.size() != values.size()) {
      steps.resize(values.size());
    }
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (key == "kappa_schedule") {
        steps[i].kappa = values[i];
      } else if (key == "temper_samples") {
        steps[i].n_samples = static_cast<int>(values[i]);
      } else {
        steps[i].n_warmup = static_cast<int>(values[i]);
      }
    }
  } else if (key == "n_predict_draws") {
    config.n_predict_draws = parse_long(value, key);
  } else if (key == "preprocess") {
    if (value == "spectrum") {
      config.preprocess = true;
    } else if (value == "none") {
      config.preprocess = false;
    } else {
      throw InvalidInput("preprocess must be none or spectrum");
    }
  } else if (key == "cutoff") {
    config.cutoff = parse_config_double(value, key);
  } else if (key == "y_max_target") {
    config.y_max_target = parse_config_double(value, key);
  } else if (key == "sim_n_points") {
    config.sim_n_points = parse_long(value, key);
  } else if (key == "sim_mu_alpha") {
    config.sim_alpha.mean = parse_config_double(value, key);
  } else if (key == "sim_sigma_e_alpha") {
    config.sim_alpha.noise_std = parse_config_double(value, key);
  } else if (key == "sim_sigma_s_alpha") {
    config.sim_alpha.signal_std = parse_config_double(value, key);
  } else if (key == "sim_l_alpha") {
    config.sim_alpha.length_scales = Vector::Constant(1, parse_config_double(value, key));
  } else if (key == "sim_mu_beta") {
    config.sim_beta.mean = parse_config_double(value, key);
  } else if (key == "sim_sigma_e_beta") {
    config.sim_beta.noise_std = parse_config_double(value, key);
  } else if (key == "sim_sigma_s_beta") {
    config.sim_beta.signal_std = parse_config_double(value, key);
  } else if (key == "sim_l_beta") {
    config.sim_beta.length_scales = Vector::Constant(1, parse_config_double(value, key));
  } else if (key == "mean_vector") {
    config.mean_vector_path = value;
  } else if (key == "rate_constant") {
    config.rate_constant = parse_config_double(value, key);
  } else if (key == "fit_dir") {
    config.fit_dir = value;
  } else if (key == "test_grid") {
    config.test_grid_path = value;
  } else if (key == "n_test") {
    config.n_test = parse_long(value, key);
  } else {
    throw InvalidInput("unknown config key '" + key + "'");
  }
}

RunConfig parse_config_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw InvalidInput("cannot open config '" + path.string() + "'");
  }
  RunConfig config;
  std::string line;
  long line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    const std::string stripped = trim(line);
    if (stripped.empty() || stripped[0] == '#') {
      continue;
    }
    const auto eq = stripped.find('=');
    if (eq == std::string::npos) {
      throw ParseError("expected key = value", line_number);
    }
    apply_config_entry(config, stripped.substr(0, eq), stripped.substr(eq + 1));
  }
  return config;
}

namespace {

void write_quantile_csv(const fs::path& path, const InputGrid& grid,
                        const QuantileSummary& summary) {
  auto out = open_output(path);
  out << "location,mean,q05,q50,q95\n";
  for (Index k = 0; k < summary.mean.size(); ++k) {
    out << format_full(grid.points(k, 0)) << "," << format_full(summary.mean[k])
        << "," << format_full(summary.q05[k]) << ","
        << format_full(summary.q50[k]) << "," << format_full(summary.q95[k])
        << "\n";
  }
}

Matrix read_csv_matrix(const fs::path& path, bool skip_header) {
  std::ifstream in(path);
  if (!in) {
    throw InvalidInput("cannot open '" + path.string() + "'");
  }
  std::string line;
  long line_number = 0;
  if (skip_header && std::getline(in, line)) {
    ++line_number;
  }
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    ++line_number;
    if (trim(line).empty()) {
      continue;
    }
    const auto fields = split_csv_line(line);
    std::vector<double> row;
    row.reserve(fields.size());
    for (const auto& field : fields) {
      row.push_back(parse_double(field, line_number));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) {
    return Matrix(0, 0);
  }
  Matrix out(static_cast<Index>(rows.size()),
             static_cast<Index>(rows.front().size()));
  for (Index r = 0; r < out.rows(); ++r) {
    const auto& row = rows[static_cast<std::size_t>(r)];
    if (static_cast<Index>(row.size()) != out.cols()) {
      throw ParseError("ragged csv row", r + (skip_header ? 2 : 1));
    }
    for (Index c = 0; c < out.cols(); ++c) {
      out(r, c) = row[static_cast<std::size_t>(c)];
    }
  }
  return out;
}

json summary_stats_json(const Vector& column) {
  json stats;
  const double mean = column.mean();
  const Index n = column.size();
  const double sd =
      n > 1 ? std::sqrt((column.array() - mean).square().sum() /
                        static_cast<double>(n - 1))
            : 0.0;
  stats["mean"] = mean;
  stats["sd"] = sd;
  stats["q05"] = empirical_quantile(column, 0.05);
  stats["q50"] = empirical_quantile(column, 0.50);
  stats["q95"] = empirical_quantile(column, 0.95);
  return stats;
}

json hyper_chain_json(const Matrix& chain, Index dim) {
  json out;
  const auto names = hyper_column_names(dim);
  for (Index c = 0; c < chain.cols(); ++c) {
    out[names[static_cast<std::size_t>(c)]] = summary_stats_json(chain.col(c));
  }
  return out;
}

constexpr Index kMaxExportedLatentDraws = 2000;

template <typename Track>
void export_results_impl(const InferenceResult& result,
                         const std::map<std::string, std::string>& config_echo,
                         const fs::path& dir, Track&& track) {
  json summary;
  summary["mode"] = result.mode;
  summary["seed"] = result.seed;
  summary["n_points"] = result.n_points;
  summary["dim"] = result.dim;
  summary["divergences"] = result.divergences;
  summary["wall_times"] = {
      {"linearization", result.timings.linearization},
      {"warmup", result.timings.warmup},
      {"sampling", result.timings.sampling},
      {"prediction", result.timings.prediction},
      {"total", result.timings.total()},
  };
  summary["hyperparameters"] = {
      {"alpha", hyper_chain_json(result.hyper_alpha_chain, result.dim)},
      {"beta", hyper_chain_json(result.hyper_beta_chain, result.dim)},
  };
  summary["config"] = config_echo;
  {
    auto out = open_output(track(dir / "summary.json"));
    out << summary.dump(2) << "\n";
  }

  write_quantile_csv(track(dir / "latent_alpha.csv"), result.grid,
                     result.alpha_summary);
  write_quantile_csv(track(dir / "latent_beta.csv"), result.grid,
                     result.beta_summary);
  write_quantile_csv(track(dir / "predictive_y.csv"), result.grid,
                     result.predictive_summary);

  {
    auto out = open_output(track(dir / "hyper_chains.csv"));
    const auto names = hyper_column_names(result.dim);
    out << "draw";
    for (const auto& name : names) out << ",alpha_" << name;
    for (const auto& name : names) out << ",beta_" << name;
    out << "\n";
    for (Index r = 0; r < result.hyper_alpha_chain.rows(); ++r) {
      out << r;
      for (Index c = 0; c < result.hyper_alpha_chain.cols(); ++c) {
        out << "," << format_full(result.hyper_alpha_chain(r, c));
      }
      for (Index c = 0; c < result.hyper_beta_chain.cols(); ++c) {
        out << "," << format_full(result.hyper_beta_chain(r, c));
      }
      out << "\n";
    }
  }

  if (result.alpha_draws.rows() > 0) {
    // Thinned latent draws, keyed by their original draw index so the
    // predict mode can line them up with the hyperparameter chains.
    auto out = open_output(track(dir / "draws_latent.csv"));
    out << "draw";
    for (Index k = 0; k < result.n_points; ++k) out << ",alpha_" << (k + 1);
    for (Index k = 0; k < result.n_points; ++k) out << ",beta_" << (k + 1);
    out << "\n";
    const Index available = result.alpha_draws.rows();
    const Index wanted = std::min(available, kMaxExportedLatentDraws);
    for (Index i = 0; i < wanted; ++i) {
      const Index row = (i * available) / wanted;
      out << row;
      for (Index k = 0; k < result.n_points; ++k) {
        out << "," << format_full(result.alpha_draws(row, k));
      }
      for (Index k = 0; k < result.n_points; ++k) {
        out << "," << format_full(result.beta_draws(row, k));
      }
      out << "\n";
    }
  }

  if (result.has_moments) {
    {
      auto out = open_output(track(dir / "pl_mean.csv"));
      out << "index,m\n";
      for (Index i = 0; i < result.moments.m.size(); ++i) {
        out << i << "," << format_full(result.moments.m[i]) << "\n";
      }
    }
    {
      auto out = open_output(track(dir / "pl_covariance.csv"));
      for (Index r = 0; r < result.moments.p.rows(); ++r) {
        for (Index c = 0; c < result.moments.p.cols(); ++c) {
          if (c > 0) out << ",";
          out << format_full(result.moments.p(r, c));
        }
        out << "\n";
      }
    }
  }

  if (!result.pl_history.empty()) {
    export_pl_trace(result.pl_history, track(dir / "pl_trace.csv"));
  }
}

}  // namespace

std::vector<fs::path> export_results(
    const InferenceResult& result,
    const std::map<std::string, std::string>& config_echo,
    const fs::path& dir) {
  fs::create_directories(dir);
  std::vector<fs::path> written;
  auto track = [&](const fs::path& path) {
    written.push_back(path);
    return path;
  };
  try {
    export_results_impl(result, config_echo, dir, track);
  } catch (...) {
    for (const auto& path : written) {
      std::error_code ec;
      fs::remove(path, ec);
    }
    throw;
  }
  return written;
}

namespace {

// Rebuilds the fit state the predict mode needs from an output directory.
InferenceResult load_fit_state(const fs::path& dir) {
  const fs::path summary_path = dir / "summary.json";
  std::ifstream in(summary_path);
  if (!in) {
    throw InvalidInput("cannot open '" + summary_path.string() + "'");
  }
  json summary = json::parse(in);

  InferenceResult result;
  result.mode = summary.at("mode").get<std::string>();
  result.seed = summary.at("seed").get<std::uint64_t>();
  result.n_points = summary.at("n_points").get<Index>();
  result.dim = summary.at("dim").get<Index>();

  const Matrix chains = read_csv_matrix(dir / "hyper_chains.csv", true);
  const Index block = 3 + result.dim;
  if (chains.cols() != 1 + 2 * block) {
    throw InvalidInput("hyper_chains.csv has unexpected column count");
  }

  const fs::path draws_path = dir / "draws_latent.csv";
  if (fs::exists(draws_path)) {
    const Matrix draws = read_csv_matrix(draws_path, true);
    if (draws.cols() != 1 + 2 * result.n_points) {
      throw InvalidInput("draws_latent.csv has unexpected column count");
    }
    const Index n = draws.rows();
    result.alpha_draws.resize(n, result.n_points);
    result.beta_draws.resize(n, result.n_points);
    result.hyper_alpha_chain.resize(n, block);
    result.hyper_beta_chain.resize(n, block);
    for (Index i = 0; i < n; ++i) {
      const auto row = static_cast<Index>(draws(i, 0));
      if (row < 0 || row >= chains.rows()) {
        throw InvalidInput("draw index out of range in draws_latent.csv");
      }
      result.alpha_draws.row(i) = draws.row(i).segment(1, result.n_points);
      result.beta_draws.row(i) =
          draws.row(i).segment(1 + result.n_points, result.n_points);
      result.hyper_alpha_chain.row(i) = chains.row(row).segment(1, block);
      result.hyper_beta_chain.row(i) =
          chains.row(row).segment(1 + block, block);
    }
    return result;
  }

  const Matrix mean = read_csv_matrix(dir / "pl_mean.csv", true);
  const Matrix cov = read_csv_matrix(dir / "pl_covariance.csv", false);
  if (mean.rows() != 2 * result.n_points || cov.rows() != 2 * result.n_points ||
      cov.cols() != 2 * result.n_points) {
    throw InvalidInput("linearization state files have unexpected shapes");
  }
  result.has_moments = true;
  result.moments.m = mean.col(1);
  result.moments.p = cov;
  result.hyper_alpha_chain = chains.middleCols(1, block);
  result.hyper_beta_chain = chains.middleCols(1 + block, block);
  return result;
}

InputGrid load_grid(const fs::path& path) {
  const Matrix raw = read_csv_matrix(path, true);
  if (raw.rows() == 0) {
    throw InvalidInput("test grid '" + path.string() + "' is empty");
  }
  return InputGrid(raw);
}

}  // namespace

void export_chain_csv(const Chain& chain, const fs::path& path) {
  auto out = open_output(path);
  out << "draw";
  for (Index c = 0; c < chain.draws.cols(); ++c) {
    out << ",p" << c;
  }
  out << ",accept_stat\n";
  for (Index r = 0; r < chain.draws.rows(); ++r) {
    out << r;
    for (Index c = 0; c < chain.draws.cols(); ++c) {
      out << "," << format_full(chain.draws(r, c));
    }
    out << ","
        << format_full(chain.accept_stats[static_cast<std::size_t>(r)]) << "\n";
  }
}

void export_chain_diagnostics(const Chain& chain, const fs::path& path) {
  json diag;
  diag["divergences"] = chain.divergences;
  diag["final_step_size"] = chain.final_step_size;
  diag["wall_seconds"] = chain.wall_seconds;
  json params = json::array();
  for (Index c = 0; c < chain.draws.cols(); ++c) {
    params.push_back(summary_stats_json(chain.draws.col(c)));
  }
  diag["parameters"] = params;
  auto out = open_output(path);
  out << diag.dump(2) << "\n";
}

void export_pl_trace(const std::vector<PlIterationRecord>& history,
                     const fs::path& path) {
  auto out = open_output(path);
  out << "iteration,index,m,p_diag,jitter_s,jitter_p,lambda_floor\n";
  for (const auto& record : history) {
    for (Index i = 0; i < record.m.size(); ++i) {
      out << record.iteration << "," << i << "," << format_full(record.m[i])
          << "," << format_full(record.p_diag[i]) << ","
          << format_full(record.jitter_s) << "," << format_full(record.jitter_p)
          << "," << format_full(record.lambda_floor) << "\n";
    }
  }
}

namespace {

constexpr std::uint64_t kStreamSimulate = 8;
constexpr std::uint64_t kStreamPredictMode = 9;

Dataset load_configured_dataset(const RunConfig& config) {
  Dataset data = load_dataset(config.dataset_path);
  if (config.preprocess) {
    if (data.grid.dim() != 1) {
      throw InvalidInput("spectrum preprocessing expects 1-D inputs");
    }
    data = preprocess_spectrum(data.grid.points.col(0), data.y, config.cutoff,
                               config.y_max_target);
  }
  return data;
}

FitOptions fit_options_from(const RunConfig& config) {
  FitOptions options;
  options.ensemble_size = config.ensemble_size;
  options.pl = config.pl;
  options.hmc = config.hmc;
  options.schedule = config.schedule;
  options.n_predict_draws = config.n_predict_draws;
  options.seed = config.seed;
  if (!config.chain_counts_overridden) {
    if (config.mode == RunMode::kFitHmcShort) {
      options.hmc.n_samples = short_chain_config().n_samples;
      options.hmc.n_warmup = short_chain_config().n_warmup;
    } else {
      options.hmc.n_samples = long_chain_config().n_samples;
      options.hmc.n_warmup = long_chain_config().n_warmup;
    }
  }
  return options;
}

void run_simulate(const RunConfig& config, const fs::path& out_dir,
                  std::vector<fs::path>& written) {
  Rng rng = derive_rng(config.seed, kStreamSimulate);
  SimulationResult sim;
  if (!config.mean_vector_path.empty()) {
    // Expectation supplied externally: constant rate field, shape field
    // scaled so that E[y] equals the supplied vector.
    const Vector mean_vector = load_vector(config.mean_vector_path);
    for (Index k = 0; k < mean_vector.size(); ++k) {
      if (!(mean_vector[k] > 0.0)) {
        throw InvalidInput("mean vector entries must be positive");
      }
    }
    const InputGrid grid = InputGrid::uniform_1d(mean_vector.size());
    sim.truth.alpha =
        (mean_vector.array() * config.rate_constant).log().matrix();
    sim.truth.beta =
        Vector::Constant(mean_vector.size(), std::log(config.rate_constant));
    sim.data = simulate_from_latents(grid, sim.truth, rng);
  } else {
    const InputGrid grid = InputGrid::uniform_1d(config.sim_n_points);
    sim = simulate_lggp(grid, config.sim_alpha, config.sim_beta, rng);
  }

  const fs::path data_path = out_dir / "dataset.csv";
  save_dataset(data_path, sim.data);
  written.push_back(data_path);

  const fs::path truth_path = out_dir / "ground_truth.csv";
  {
    auto out = open_output(truth_path);
    const Index dim = sim.data.grid.dim();
    for (Index d = 0; d < dim; ++d) {
      out << "x_" << (d + 1) << ",";
    }
    out << "alpha,beta\n";
    for (Index k = 0; k < sim.data.size(); ++k) {
      for (Index d = 0; d < dim; ++d) {
        out << format_full(sim.data.grid.points(k, d)) << ",";
      }
      out << format_full(sim.truth.alpha[k]) << ","
          << format_full(sim.truth.beta[k]) << "\n";
    }
  }
  written.push_back(truth_path);
}

void run_predict(const RunConfig& config, const fs::path& out_dir,
                 std::vector<fs::path>& written) {
  const Dataset train = load_configured_dataset(config);
  InferenceResult state = load_fit_state(config.fit_dir);
  state.grid = train.grid;
  if (state.n_points != train.size()) {
    throw InvalidInput("fit state and dataset disagree on K");
  }

  const InputGrid test_grid = config.test_grid_path.empty()
                                  ? InputGrid::uniform_1d(config.n_test)
                                  : load_grid(config.test_grid_path);

  Rng rng = derive_rng(config.seed, kStreamPredictMode);
  const LatentPrediction latents = predict_latent(
      state, train, test_grid, config.n_predict_draws, rng);
  const DataPrediction prediction = predict_data(latents, rng);

  auto dump = [&](const char* name, const QuantileSummary& summary) {
    const fs::path path = out_dir / name;
    write_quantile_csv(path, test_grid, summary);
    written.push_back(path);
  };
  dump("predictive_alpha.csv", summarize_draws(latents.alpha));
  dump("predictive_beta.csv", summarize_draws(latents.beta));
  dump("predictive_y.csv", prediction.summary);
}

void run_fit(const RunConfig& config, const fs::path& out_dir,
             std::vector<fs::path>& written) {
  const Dataset data = load_configured_dataset(config);
  const FitOptions options = fit_options_from(config);

  InferenceResult result;
  switch (config.mode) {
    case RunMode::kFitHmc:
      result = fit_direct_hmc(data, config.priors, options, "hmc");
      break;
    case RunMode::kFitHmcShort:
      result = fit_direct_hmc(data, config.priors, options, "hmc-short");
      break;
    case RunMode::kFitPl:
      result = fit_pl_approx(data, config.priors, options);
      break;
    case RunMode::kFitPlTempered:
      result = fit_pl_tempered(data, config.priors, options);
      break;
    default:
      throw InvalidInput("not a fit mode");
  }

  auto echo = config.echo();
  echo["output_dir"] = out_dir.string();
  const auto files = export_results(result, echo, out_dir);
  written.insert(written.end(), files.begin(), files.end());
}

}  // namespace

int run(const RunConfig& raw_config) {
  RunConfig config = raw_config;
  if (const char* env_dir = std::getenv("LGGP_OUTPUT_DIR")) {
    config.output_dir = env_dir;
  }
  try {
    config.validate();
  } catch (const std::invalid_argument& err) {
    std::fprintf(stderr, "config error: %s\n", err.what());
    return 2;
  }

  std::vector<fs::path> written;
  try {
    fs::create_directories(config.output_dir);
    switch (config.mode) {
      case RunMode::kSimulate:
        run_simulate(config, config.output_dir, written);
        break;
      case RunMode::kPredict:
        run_predict(config, config.output_dir, written);
        break;
      default:
        run_fit(config, config.output_dir, written);
        break;
    }
    return 0;
  } catch (const std::exception& err) {
    std::fprintf(stderr, "error: %s\n", err.what());
    for (const auto& path : written) {
      std::error_code ec;
      fs::remove(path, ec);
    }
    const bool usage = dynamic_cast<const std::invalid_argument*>(&err) !=
                           nullptr ||
                       dynamic_cast<const ParseError*>(&err) != nullptr;
    return usage ? 2 : 1;
  }
}

}  // namespace lggp
