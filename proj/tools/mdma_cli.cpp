#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <memory>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "mdma/archive.hpp"
#include "mdma/dataset.hpp"
#include "mdma/errors.hpp"
#include "mdma/inference.hpp"
#include "mdma/query.hpp"
#include "mdma/sampler.hpp"
#include "mdma/toy_data.hpp"
#include "mdma/training.hpp"

using namespace mdma;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitNumerical = 2;

// Output goes to --out when given, stdout otherwise.
class Output {
 public:
  explicit Output(const std::string& path) {
    if (!path.empty() && path != "-") {
      file_ = std::make_unique<std::ofstream>(path);
      if (!*file_) throw InvalidArgument("cannot write '" + path + "'");
    }
  }
  std::ostream& stream() { return file_ ? *file_ : std::cout; }

 private:
  std::unique_ptr<std::ofstream> file_;
};

std::vector<int> parse_indices(const std::string& text, int d, const std::string& flag) {
  std::vector<int> out;
  if (text.empty()) return out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    std::size_t used = 0;
    int v = -1;
    try {
      v = std::stoi(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != item.size())
      throw InvalidArgument(flag + ": cannot parse index '" + item + "'");
    if (v < 0 || v >= d)
      throw InvalidArgument(flag + ": index " + std::to_string(v) + " out of range for d=" +
                            std::to_string(d));
    out.push_back(v);
  }
  return out;
}

RowMatrix complete_matrix(const Dataset& data, const std::string& what) {
  if (data.has_missing()) throw InvalidArgument(what + " requires a dataset without missing values");
  return data.values;
}

void check_columns(const Dataset& data, const MdmaModel& model) {
  if (data.cols() != model.d())
    throw InvalidArgument("dataset has " + std::to_string(data.cols()) + " columns, model expects " +
                          std::to_string(model.d()));
}

struct FitOptions {
  std::string data;
  std::string out;
  std::string missing_token = "NA";
  bool d_auto = true;
  int d = 0;
  int m = 10;
  int l = 2;
  int r = 3;
  int pool = 2;
  double lr = 0.01;
  std::size_t batch = 500;
  int epochs = 10;
  std::uint64_t seed = 0;
  std::string couple = "on";
  double validation = 0.1;
  double clip = 0.0;
};

int cmd_fit(const FitOptions& o) {
  const Dataset data = load_csv(o.data, o.missing_token);
  if (!o.d_auto && o.d != data.cols())
    throw InvalidArgument("--d " + std::to_string(o.d) + " does not match the " +
                          std::to_string(data.cols()) + " data columns");
  const ModelDims dims{data.cols(), o.m, o.l, o.r, o.pool};
  MdmaModel model = init_model(dims, o.seed);
  if (o.couple == "on") {
    std::vector<std::size_t> rows(data.rows());
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    model.set_leaf_order(adaptive_coupling(data, rows, o.pool));
  }

  TrainConfig config;
  config.learning_rate = o.lr;
  config.batch_size = o.batch;
  config.epochs = o.epochs;
  config.seed = o.seed;
  config.validation_fraction = o.validation;
  config.max_grad_norm = o.clip;

  std::cout << "epoch,train_nll,validation_nll\n" << std::setprecision(10);
  const FitResult result = fit(model, data, config, [](const EpochRecord& rec) {
    std::cout << rec.epoch << ',' << rec.train_nll << ',' << rec.validation_nll << '\n' << std::flush;
  });
  if (!o.out.empty()) save_model(o.out, model);
  if (result.diverged) {
    std::cerr << "mdma fit: " << result.message << '\n';
    return kExitNumerical;
  }
  return kExitOk;
}

int cmd_sample(const std::string& model_path, std::size_t n, std::uint64_t seed, const std::string& mode,
               double tol, const std::string& out_path) {
  const MdmaModel model = load_model(model_path);
  const RowMatrix x = mode == "autoregressive" ? sample_autoregressive(model, n, seed, tol)
                                               : sample(model, n, seed, tol);
  Output out(out_path);
  write_csv(out.stream(), x, default_column_names(model.d()));
  return kExitOk;
}

struct GridSpec {
  int var1 = 0;
  int var2 = 1;
  double lo = 0.0;
  double hi = 0.0;
  int steps = 0;
};

GridSpec parse_grid(const std::string& text, int d) {
  std::stringstream in(text);
  std::string item;
  std::vector<std::string> parts;
  while (std::getline(in, item, ',')) parts.push_back(item);
  if (parts.size() != 5) throw InvalidArgument("--grid expects var1,var2,min,max,steps");
  GridSpec g;
  const auto vars = parse_indices(parts[0] + "," + parts[1], d, "--grid");
  g.var1 = vars[0];
  g.var2 = vars[1];
  try {
    g.lo = std::stod(parts[2]);
    g.hi = std::stod(parts[3]);
    g.steps = std::stoi(parts[4]);
  } catch (const std::exception&) {
    throw InvalidArgument("--grid: cannot parse '" + text + "'");
  }
  if (g.var1 == g.var2) throw InvalidArgument("--grid variables must differ");
  if (!(g.hi > g.lo) || g.steps < 1) throw InvalidArgument("--grid needs min < max and steps >= 1");
  return g;
}

int cmd_eval(const std::string& model_path, const std::string& query, const std::string& grid,
             const std::string& out_path) {
  const MdmaModel model = load_model(model_path);
  Output out(out_path);
  if (!grid.empty()) {
    const GridSpec g = parse_grid(grid, model.d());
    write_csv(out.stream(), density_grid(model, g.var1, g.var2, g.lo, g.hi, g.steps), {"x1", "x2", "density"});
    return kExitOk;
  }
  const double value = evaluate(model, parse_query(query));
  out.stream() << std::setprecision(17) << value << '\n';
  return kExitOk;
}

// Monte Carlo nodes are the data rows, or model samples when model_samples > 0.
int cmd_mi(const std::string& model_path, const std::string& data_path, const std::string& y_text,
           const std::string& z_text, std::size_t model_samples, std::uint64_t seed) {
  const MdmaModel model = load_model(model_path);
  const auto y = parse_indices(y_text, model.d(), "--y");
  const auto z = parse_indices(z_text, model.d(), "--z");
  RowMatrix nodes;
  if (model_samples > 0) {
    nodes = sample(model, model_samples, seed);
  } else {
    if (data_path.empty()) throw InvalidArgument("mi needs --data or --model-samples");
    const Dataset data = load_csv(data_path);
    check_columns(data, model);
    nodes = complete_matrix(data, "mi");
  }
  const double mi = estimate_mi(model, nodes, y, z);
  std::cout << std::setprecision(17) << mi << '\n';
  return kExitOk;
}

int cmd_citest(const std::string& model_path, const std::string& data_path, int i, int j,
               const std::string& cond_text, double alpha) {
  const MdmaModel model = load_model(model_path);
  const Dataset data = load_csv(data_path);
  check_columns(data, model);
  const auto cond = parse_indices(cond_text, model.d(), "--cond");
  const CiTestResult res = ci_test(model, complete_matrix(data, "citest"), i, j, cond, alpha);
  std::cout << "tau,z,p_value,reject,dropped\n"
            << std::setprecision(17) << res.statistic << ',' << res.z << ',' << res.p_value << ','
            << (res.reject ? 1 : 0) << ',' << res.dropped << '\n';
  return kExitOk;
}

int cmd_score(const std::string& model_path, const std::string& data_path, const std::string& missing_token,
              const std::string& out_path) {
  const MdmaModel model = load_model(model_path);
  const Dataset data = load_csv(data_path, missing_token);
  check_columns(data, model);
  const Eigen::VectorXd scores = anomaly_scores(model, data.values, data.missing);
  Output out(out_path);
  out.stream() << "score\n" << std::setprecision(17);
  for (Eigen::Index r = 0; r < scores.size(); ++r) out.stream() << scores(r) << '\n';
  return kExitOk;
}

int cmd_toy(const std::string& name, std::size_t n, std::uint64_t seed, int d, const std::string& out_path) {
  const RowMatrix x = make_toy(name, n, seed, d);
  Output out(out_path);
  write_csv(out.stream(), x, default_column_names(static_cast<int>(x.cols())));
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Marginalizable density models: fit, sample, evaluate and test"};
  app.require_subcommand(1);

  FitOptions fit_opts;
  auto* fit_cmd = app.add_subcommand("fit", "Train a model on a CSV dataset");
  fit_cmd->add_option("--data", fit_opts.data, "CSV file with a header line")->required();
  fit_cmd->add_flag("--d-auto,!--no-d-auto", fit_opts.d_auto, "Take d from the CSV columns (default)");
  fit_cmd->add_option("--d", fit_opts.d, "Expected number of columns (with --no-d-auto)");
  fit_cmd->add_option("--m", fit_opts.m, "Mixture components per variable")->check(CLI::PositiveNumber);
  fit_cmd->add_option("--l", fit_opts.l, "Hidden layers per univariate network")->check(CLI::PositiveNumber);
  fit_cmd->add_option("--r", fit_opts.r, "Hidden width per univariate network")->check(CLI::PositiveNumber);
  fit_cmd->add_option("--pool", fit_opts.pool, "Children merged per tree node")->check(CLI::Range(2, 1 << 20));
  fit_cmd->add_option("--lr", fit_opts.lr, "Adam learning rate");
  fit_cmd->add_option("--batch", fit_opts.batch, "Minibatch size");
  fit_cmd->add_option("--epochs", fit_opts.epochs, "Training epochs");
  fit_cmd->add_option("--seed", fit_opts.seed, "Seed for initialization and shuffling");
  fit_cmd->add_option("--couple", fit_opts.couple, "Correlation-driven leaf order")
      ->check(CLI::IsMember({"on", "off"}));
  fit_cmd->add_option("--validation", fit_opts.validation, "Held-out fraction for model selection");
  fit_cmd->add_option("--clip", fit_opts.clip, "Global gradient-norm clip (0 = off)");
  fit_cmd->add_option("--missing", fit_opts.missing_token, "Missing-value token");
  fit_cmd->add_option("--out", fit_opts.out, "Model file to write");

  std::string model_path, out_path, mode = "hierarchical";
  std::size_t n = 1000;
  std::uint64_t seed = 0;
  double tol = kDefaultInvTol;
  auto* sample_cmd = app.add_subcommand("sample", "Draw samples from a model");
  sample_cmd->add_option("--model", model_path, "Model file")->required();
  sample_cmd->add_option("--n", n, "Number of samples");
  sample_cmd->add_option("--seed", seed, "Random seed");
  sample_cmd->add_option("--mode", mode, "Sampler")->check(CLI::IsMember({"hierarchical", "autoregressive"}));
  sample_cmd->add_option("--tol", tol, "CDF inversion tolerance");
  sample_cmd->add_option("--out", out_path, "CSV file to write (default stdout)");

  std::string query, grid;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a query or a bivariate density grid");
  eval_cmd->add_option("--model", model_path, "Model file")->required();
  auto* query_opt = eval_cmd->add_option("--query", query, "Per-variable tags c:<x>|d:<x>|m|given:<x>");
  auto* grid_opt = eval_cmd->add_option("--grid", grid, "var1,var2,min,max,steps");
  query_opt->excludes(grid_opt);
  eval_cmd->add_option("--out", out_path, "File to write (default stdout)");

  std::string data_path, y_text, z_text, cond_text, missing_token = "NA";
  auto* mi_cmd = app.add_subcommand("mi", "Estimate mutual information between variable sets");
  mi_cmd->add_option("--model", model_path, "Model file")->required();
  std::size_t mi_samples = 0;
  auto* mi_data = mi_cmd->add_option("--data", data_path, "CSV of Monte Carlo points");
  auto* mi_draws = mi_cmd->add_option("--model-samples", mi_samples, "Use this many model samples instead");
  mi_data->excludes(mi_draws);
  mi_cmd->add_option("--seed", seed, "Seed for --model-samples");
  mi_cmd->add_option("--y", y_text, "Comma-separated 0-based indices")->required();
  mi_cmd->add_option("--z", z_text, "Comma-separated 0-based indices")->required();

  int ci_i = 0, ci_j = 1;
  double alpha = 0.05;
  auto* ci_cmd = app.add_subcommand("citest", "Test conditional independence of two variables");
  ci_cmd->add_option("--model", model_path, "Model file")->required();
  ci_cmd->add_option("--data", data_path, "CSV of test points")->required();
  ci_cmd->add_option("--i", ci_i, "First variable (0-based)")->required();
  ci_cmd->add_option("--j", ci_j, "Second variable (0-based)")->required();
  ci_cmd->add_option("--cond", cond_text, "Conditioning indices");
  ci_cmd->add_option("--alpha", alpha, "Test level");

  auto* score_cmd = app.add_subcommand("score", "Per-row negative log-likelihood");
  score_cmd->add_option("--model", model_path, "Model file")->required();
  score_cmd->add_option("--data", data_path, "CSV to score")->required();
  score_cmd->add_option("--missing", missing_token, "Missing-value token");
  score_cmd->add_option("--out", out_path, "File to write (default stdout)");

  std::string toy_name;
  int toy_d = 4;
  auto* toy_cmd = app.add_subcommand("toy", "Write a synthetic dataset");
  toy_cmd->add_option("--name", toy_name, "Dataset")
      ->required()
      ->check(CLI::IsMember({"8gaussians", "spirals", "graded", "power"}));
  toy_cmd->add_option("--n", n, "Rows");
  toy_cmd->add_option("--seed", seed, "Random seed");
  toy_cmd->add_option("--d", toy_d, "Dimension (graded only)");
  toy_cmd->add_option("--out", out_path, "CSV file to write (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*fit_cmd) return cmd_fit(fit_opts);
    if (*sample_cmd) return cmd_sample(model_path, n, seed, mode, tol, out_path);
    if (*eval_cmd) {
      if (query.empty() && grid.empty()) throw InvalidArgument("eval needs --query or --grid");
      return cmd_eval(model_path, query, grid, out_path);
    }
    if (*mi_cmd) return cmd_mi(model_path, data_path, y_text, z_text, mi_samples, seed);
    if (*ci_cmd) return cmd_citest(model_path, data_path, ci_i, ci_j, cond_text, alpha);
    if (*score_cmd) return cmd_score(model_path, data_path, missing_token, out_path);
    if (*toy_cmd) return cmd_toy(toy_name, n, seed, toy_d, out_path);
  } catch (const InvalidArgument& e) {
    std::cerr << "mdma: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "mdma: " << e.what() << '\n';
    return kExitNumerical;
  }
  return kExitUsage;
}
