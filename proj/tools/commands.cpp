#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>

#include <openssl/evp.h>

#include "cfassign/errors.hpp"
#include "text_io.hpp"

namespace fs = std::filesystem;

namespace cfa::cli {

std::string tool_version() { return CFASSIGN_VERSION; }

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1) {
    EVP_MD_CTX_free(ctx);
    throw Error("sha256 initialisation failed");
  }
  char buffer[1 << 16];
  while (in) {
    in.read(buffer, sizeof buffer);
    if (in.gcount() > 0) EVP_DigestUpdate(ctx, buffer, static_cast<std::size_t>(in.gcount()));
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  EVP_DigestFinal_ex(ctx, digest, &length);
  EVP_MD_CTX_free(ctx);
  std::ostringstream hex;
  for (unsigned int i = 0; i < length; ++i) {
    hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  }
  return hex.str();
}

void write_provenance(const ExperimentConfig& config, const fs::path& out) {
  fs::create_directories(out);
  save_config(config, out / files::kConfig);
  std::ofstream version(out / files::kVersion);
  version << "cfassign " << tool_version() << '\n';
  if (!version) throw Error("cannot write version file in '" + out.string() + "'");
}

void write_manifest(const fs::path& out) {
  std::vector<std::string> names;
  for (const auto& entry : fs::directory_iterator(out)) {
    if (entry.is_regular_file() && entry.path().filename() != files::kManifest) {
      names.push_back(entry.path().filename().string());
    }
  }
  std::sort(names.begin(), names.end());
  std::ofstream manifest(out / files::kManifest);
  for (const auto& name : names) manifest << sha256_file(out / name) << "  " << name << '\n';
  if (!manifest) throw Error("cannot write manifest in '" + out.string() + "'");
}

namespace {

Dataset load_split(const fs::path& path, const ExperimentConfig& config) {
  if (!fs::exists(path)) {
    throw Error("missing dataset '" + path.string() + "'; run gen-data first");
  }
  Dataset ds = load_dataset(path);
  if (!(ds.scenario == config.scenario)) {
    throw Error("dataset '" + path.string() + "' was generated for a different scenario");
  }
  return ds;
}

std::string fmt(double v) { return text::format_double(v); }

}  // namespace

void cmd_gen_data(const ExperimentConfig& config, std::ostream& log) {
  const fs::path out = config.output_dir;
  write_provenance(config, out);
  FadingStats stats;
  const Dataset train = generate_dataset(config.scenario, config.train_size, config.train_seed(),
                                         Split::Train, &stats);
  save_dataset(train, out / files::kTrainSet);
  const Dataset test = generate_dataset(config.scenario, config.test_size, config.test_seed(),
                                        Split::Test, &stats);
  save_dataset(test, out / files::kTestSet);
  write_manifest(out);
  log << "wrote " << config.train_size << " training and " << config.test_size
      << " test samples to " << out.string() << " (" << stats.draws << " gains, "
      << stats.variance_capped << " variance-capped, " << stats.clamped << " clamped)\n";
}

void cmd_train(const ExperimentConfig& config, const std::optional<fs::path>& resume,
               std::ostream& log) {
  const fs::path out = config.output_dir;
  const Dataset train_set = load_split(out / files::kTrainSet, config);
  const Dataset test_set = load_split(out / files::kTestSet, config);
  write_provenance(config, out);
  fs::create_directories(out / files::kCheckpoints);

  std::optional<Checkpoint> start;
  Metrics metrics;
  if (resume) {
    start = load_checkpoint(*resume);
    if (!start->train) throw Error("'" + resume->string() + "' has no training state");
    if (fs::exists(out / files::kMetrics)) {
      const Metrics previous = Metrics::read_csv(out / files::kMetrics);
      for (const auto& r : previous.records()) {
        if (r.iteration < start->train->next_iteration) metrics.append(r);
      }
    }
  }

  TrainHooks hooks;
  hooks.on_record = [&](const MetricsRecord& r) { metrics.append(r); };
  hooks.on_checkpoint = [&](const Checkpoint& c) {
    const auto path = out / files::kCheckpoints / ("phase-" + to_string(c.train->alm.phase) + ".ckpt");
    save_checkpoint(c, path);
    log << "iteration " << c.train->next_iteration << ": entering phase "
        << to_string(c.train->alm.phase) << ", checkpoint " << path.string() << '\n';
  };

  TrainResult result;
  try {
    result = train(train_set, test_set, config.model, config.training, hooks,
                   start ? &*start : nullptr);
  } catch (const std::exception&) {
    metrics.write_csv(out / files::kMetrics);
    log << "training failed after " << metrics.records().size()
        << " iterations; metrics and phase checkpoints kept in " << out.string() << '\n';
    throw;
  }
  metrics.write_csv(out / files::kMetrics);
  save_checkpoint(Checkpoint{result.model, std::nullopt}, out / files::kModel);
  write_manifest(out);
  log << "trained " << result.metrics.records().size() << " iterations";
  if (!result.connection_converged) log << "; connection phase hit max_outer_iters";
  if (!result.discreteness_converged) log << "; discreteness phase hit max_outer_iters";
  log << '\n';
}

void cmd_eval(const ExperimentConfig& config, const fs::path& checkpoint, std::ostream& log) {
  const fs::path out = config.output_dir;
  const Dataset test_set = load_split(out / files::kTestSet, config);
  const Model model = load_checkpoint(checkpoint).model;
  write_provenance(config, out);
  const EvalSummary s = evaluate(model, test_set, config.training.eval_chunk);
  std::ofstream csv(out / files::kEval);
  csv << "metric,value\n";
  csv << "samples," << s.samples << '\n';
  csv << "relaxed_sum_rate," << fmt(s.relaxed_sum_rate) << '\n';
  csv << "binary_sum_rate," << fmt(s.binary_sum_rate) << '\n';
  csv << "relaxed_connection_penalty," << fmt(s.relaxed_connection_penalty) << '\n';
  csv << "discreteness_penalty," << fmt(s.discreteness_penalty) << '\n';
  csv << "mean_run_entropy," << fmt(s.mean_run_entropy) << '\n';
  csv << "upper_violations," << s.upper_violations << '\n';
  csv << "lower_violations," << s.lower_violations << '\n';
  csv << "feasible_fraction," << fmt(s.feasible_fraction) << '\n';
  csv << "duplicate_pick_rate," << fmt(s.duplicate_pick_rate) << '\n';
  if (!csv) throw Error("cannot write evaluation results");
  csv.close();
  write_manifest(out);
  log << "binarized sum-rate " << s.binary_sum_rate << " on " << s.samples
      << " samples, feasible fraction " << s.feasible_fraction << '\n';
}

std::vector<MethodRow> run_baselines(const ExperimentConfig& config, const Dataset& test_set) {
  const Scenario& sc = test_set.scenario;
  const int U = sc.max_served_users;
  const int L = sc.min_serving_aps;
  const int n = static_cast<int>(test_set.samples.size());
  MethodRow ex{"exhaustive", sc.name, true, 0.0, 0.0, n};
  MethodRow rnd{"random", sc.name, true, 0.0, 0.0, n};
  MethodRow greedy{"gsd", sc.name, true, 0.0, 0.0, n};

  ex.available = assignment_space_size(sc.n_users, sc.n_aps, U) <=
                 static_cast<double>(config.baseline.budget);
  Rng rng(config.seed + 2);
  const int draws = config.baseline.random_draws;
  for (const auto& sample : test_set.samples) {
    if (ex.available) {
      const auto r = exhaustive(sample.gains, U, L, sc.noise_power, config.baseline.require_lower,
                                config.baseline.budget);
      ex.mean_sum_rate += r.sum_rate;
      ex.feasible_fraction += r.feasible ? 1.0 : 0.0;
    }
    for (int d = 0; d < draws; ++d) {
      const auto r = random_assignment(sample.gains, U, L, sc.noise_power, rng);
      rnd.mean_sum_rate += r.sum_rate / draws;
      rnd.feasible_fraction += (r.feasible ? 1.0 : 0.0) / draws;
    }
    const auto g = gsd(sample.gains, U, L, sc.noise_power);
    greedy.mean_sum_rate += g.sum_rate;
    greedy.feasible_fraction += g.feasible ? 1.0 : 0.0;
  }
  for (MethodRow* row : {&ex, &rnd, &greedy}) {
    row->mean_sum_rate /= n;
    row->feasible_fraction /= n;
  }
  if (!ex.available) {
    ex.mean_sum_rate = std::numeric_limits<double>::quiet_NaN();
    ex.feasible_fraction = std::numeric_limits<double>::quiet_NaN();
  }
  return {ex, rnd, greedy};
}

void write_rows(const std::vector<MethodRow>& rows, const fs::path& path) {
  std::ofstream csv(path);
  csv << "method,scenario,available,mean_sum_rate,feasible_fraction,test_size\n";
  for (const auto& r : rows) {
    csv << r.method << ',' << r.scenario << ',' << (r.available ? "yes" : "not-available") << ','
        << (r.available ? fmt(r.mean_sum_rate) : "") << ','
        << (r.available ? fmt(r.feasible_fraction) : "") << ',' << r.test_size << '\n';
  }
  if (!csv) throw Error("cannot write '" + path.string() + "'");
}

namespace {

void print_rows(const std::vector<MethodRow>& rows, std::ostream& log) {
  for (const auto& r : rows) {
    log << std::left << std::setw(12) << r.method;
    if (r.available) {
      log << "sum-rate " << r.mean_sum_rate << "  feasible " << r.feasible_fraction;
    } else {
      log << "not available";
    }
    log << '\n';
  }
}

}  // namespace

void cmd_baseline(const ExperimentConfig& config, std::ostream& log) {
  const fs::path out = config.output_dir;
  const Dataset test_set = load_split(out / files::kTestSet, config);
  write_provenance(config, out);
  const auto rows = run_baselines(config, test_set);
  write_rows(rows, out / files::kBaselines);
  write_manifest(out);
  print_rows(rows, log);
}

void cmd_compare(const ExperimentConfig& config, const fs::path& checkpoint, std::ostream& log) {
  const fs::path out = config.output_dir;
  const Dataset test_set = load_split(out / files::kTestSet, config);
  const Model model = load_checkpoint(checkpoint).model;
  write_provenance(config, out);
  const EvalSummary s = evaluate(model, test_set, config.training.eval_chunk);
  std::vector<MethodRow> rows = {{"proposed", config.scenario.name, true, s.binary_sum_rate,
                                  s.feasible_fraction, s.samples}};
  for (auto& r : run_baselines(config, test_set)) rows.push_back(r);
  write_rows(rows, out / files::kComparison);
  write_manifest(out);
  print_rows(rows, log);
}

void cmd_viz(const ExperimentConfig& config, const fs::path& metrics_csv, std::ostream& log) {
  if (!fs::exists(metrics_csv)) throw Error("missing metrics file '" + metrics_csv.string() + "'");
  const Metrics metrics =
      fs::file_size(metrics_csv) == 0 ? Metrics{} : Metrics::read_csv(metrics_csv);
  const fs::path out = config.output_dir;
  write_provenance(config, out);
  std::ofstream csv(out / files::kPlotData);
  csv << "figure,series,iteration,value\n";
  struct Curve {
    const char* figure;
    const char* series;
    double MetricsRecord::*field;
  };
  const Curve curves[] = {
      {"sum_rate", "train", &MetricsRecord::train_f},
      {"sum_rate", "test", &MetricsRecord::test_f},
      {"connection_penalty", "train", &MetricsRecord::conn_pen},
      {"connection_penalty", "test", &MetricsRecord::test_conn_pen},
      {"discreteness_penalty", "train", &MetricsRecord::disc_pen},
      {"discreteness_penalty", "test", &MetricsRecord::test_disc_pen},
  };
  std::size_t rows = 0;
  for (const auto& c : curves) {
    for (const auto& r : metrics.records()) {
      const double v = r.*(c.field);
      if (std::isnan(v)) continue;
      csv << c.figure << ',' << c.series << ',' << r.iteration << ',' << fmt(v) << '\n';
      ++rows;
    }
  }
  if (!csv) throw Error("cannot write plot data");
  csv.close();
  write_manifest(out);
  log << "wrote " << rows << " plot rows to " << (out / files::kPlotData).string() << '\n';
}

}  // namespace cfa::cli
