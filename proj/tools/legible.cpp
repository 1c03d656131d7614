// legible: operator CLI for the adaptive text engine.

#include <atomic>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "legible/config.hpp"
#include "legible/datagen.hpp"
#include "legible/digest.hpp"
#include "legible/engine.hpp"
#include "legible/error.hpp"
#include "legible/http_service.hpp"
#include "legible/remote_labeler.hpp"
#include "legible/replay.hpp"
#include "legible/stats.hpp"

namespace fs = std::filesystem;
using namespace legible;

namespace {

const fs::path kDefaultFixtures = LEGIBLE_FIXTURES_DIR;

fs::path dataset_path(const fs::path& fixtures) {
  return fs::is_directory(fixtures) ? fixtures / "group_dataset.jsonl" : fixtures;
}

std::vector<datagen::GroupRow> read_dataset(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::StorageError, "cannot open " + path.string());
  return datagen::read_jsonl(in);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw Error(ErrorCode::StorageError, "cannot write " + path.string());
}

// ---------------------------------------------------------------- serve

HttpService* g_service = nullptr;

extern "C" void on_signal(int) {
  if (g_service) g_service->stop();
}

int cmd_serve(const fs::path& config_path, std::optional<int> port_override,
              std::optional<fs::path> data_override) {
  ServiceConfig cfg = config_path.empty() ? ServiceConfig{} : load_config(config_path);
  if (port_override) cfg.port = *port_override;
  if (data_override) cfg.data_dir = *data_override;
  if (cfg.group_dataset.empty()) cfg.group_dataset = dataset_path(kDefaultFixtures);

  auto prior = load_group_prior(cfg.group_dataset, cfg.learning.lambda);
  std::shared_ptr<Labeler> labeler;
  if (cfg.labeler) labeler = std::make_shared<RemoteLabeler>(*cfg.labeler);

  EngineConfig ec{cfg.window, cfg.motion, cfg.learning, cfg.data_dir};
  Engine engine(ec, prior, labeler);
  HttpService service(engine);
  const int port = service.bind(cfg.host, cfg.port);
  g_service = &service;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  std::cout << "listening on " << cfg.host << ":" << port << std::endl;
  spdlog::info("data dir {}, group rows {}, labeler {}", cfg.data_dir.string(), prior->rows.size(),
               labeler ? "remote" : "fallback");
  service.listen();
  g_service = nullptr;
  return 0;
}

// ---------------------------------------------------------------- gen-data

int cmd_gen_data(std::optional<std::uint64_t> seed, const fs::path& out_dir,
                 const fs::path& coupling_path) {
  const auto specs = datagen::reference_scenarios();
  datagen::CouplingConfig coupling;
  if (!coupling_path.empty()) {
    std::ifstream in(coupling_path);
    if (!in) throw Error(ErrorCode::StorageError, "cannot open " + coupling_path.string());
    coupling = datagen::CouplingConfig::from_json(nlohmann::json::parse(in));
    if (seed) coupling.seed = *seed;
  } else {
    const auto report =
        datagen::search_coupling(specs, datagen::initial_coupling(seed.value_or(datagen::kDefaultSeed)));
    std::cerr << "calibration: max |dr| " << report.max_deviation << " after " << report.evaluations
              << " evaluations\n";
    if (!report.converged) {
      throw Error(ErrorCode::CalibrationFailed,
                  "calibration did not reach tolerance (max |dr| " +
                      std::to_string(report.max_deviation) + ")");
    }
    coupling = report.config;
  }
  const auto rows = datagen::generate_group_dataset(specs, coupling);
  const auto text = datagen::to_jsonl(rows);
  fs::create_directories(out_dir);
  write_text(out_dir / "group_dataset.jsonl", text);
  write_text(out_dir / "coupling.json", coupling.to_json().dump(2) + "\n");
  const auto hash = sha256_hex(text);
  write_text(out_dir / "group_dataset.sha256", hash + "  group_dataset.jsonl\n");
  std::cout << rows.size() << " rows, seed " << coupling.seed << ", sha256 " << hash << "\n";
  return 0;
}

// ---------------------------------------------------------------- train

int cmd_train(const fs::path& fixtures, double lambda, const fs::path& out) {
  const auto rows = read_dataset(dataset_path(fixtures));
  const auto prior = make_group_prior(datagen::to_training_rows(rows), lambda);
  const auto text = prior->model->to_json().dump(2) + "\n";
  if (!out.empty()) write_text(out, text);
  std::cout << text;
  return 0;
}

// ---------------------------------------------------------------- eval

struct Reference {
  double f;
  double p;  // negative: reported only as < 0.001
};

// F / p reported for the six-condition ANOVAs, in column order
// vib_x, vib_y, vib_z, lux, distance, size, weight, line, letter.
constexpr std::array<Reference, 9> kReportedAnova = {{{261.146, -1},
                                                      {121.825, -1},
                                                      {258.395, -1},
                                                      {125.669, -1},
                                                      {1.496, 0.189},
                                                      {15.108, -1},
                                                      {7.275, -1},
                                                      {4.666, -1},
                                                      {1.301, 0.262}}};
constexpr std::array<const char*, 9> kColumns = {"vib_x",   "vib_y",     "vib_z",
                                                 "lux",     "distance",  "size_sp",
                                                 "weight_px", "line_em", "letter_em"};

double column(const datagen::GroupRow& r, std::size_t c) {
  switch (c) {
    case 0: return r.vib_x;
    case 1: return r.vib_y;
    case 2: return r.vib_z;
    case 3: return r.lux;
    case 4: return r.distance_cm;
    default: return r.params.as_array()[c - 5];
  }
}

datagen::Moments reference_moments(const datagen::ScenarioSpec& s, std::size_t c) {
  const std::array<datagen::Moments, 9> all = {s.vib_x, s.vib_y, s.vib_z, s.lux, s.distance_cm,
                                               s.size_sp, s.weight_px, s.line_spacing_em,
                                               s.letter_spacing_em};
  return all[c];
}

std::string pct(double got, double want) {
  if (want == 0.0) return got == 0.0 ? "0.0%" : "n/a";
  double rel = 100.0 * (got - want) / want;
  if (std::fabs(rel) < 0.05) rel = 0.0;
  std::ostringstream os;
  os << std::showpos << std::fixed << std::setprecision(1) << rel << "%";
  return os.str();
}

int cmd_eval(const fs::path& fixtures, bool report, const fs::path& json_out) {
  const auto path = dataset_path(fixtures);
  const auto rows = read_dataset(path);
  const auto specs = datagen::reference_scenarios();
  nlohmann::json out;
  std::ostream& os = std::cout;
  os << std::fixed;

  // hash check against the committed digest, when present
  const auto digest_file = path.parent_path() / "group_dataset.sha256";
  const auto hash = sha256_file(path);
  out["sha256"] = hash;
  if (fs::exists(digest_file)) {
    std::ifstream in(digest_file);
    std::string expected;
    in >> expected;
    out["sha256_matches"] = expected == hash;
    if (report) os << "dataset " << path.string() << " sha256 " << hash
                   << (expected == hash ? " (matches)" : " (MISMATCH)") << "\n\n";
  }

  std::vector<std::vector<std::vector<double>>> by_column(9, std::vector<std::vector<double>>(6));
  for (const auto& r : rows) {
    for (std::size_t c = 0; c < 9; ++c) by_column[c][static_cast<std::size_t>(r.scenario_id - 1)].push_back(column(r, c));
  }

  double worst_mean = 0.0, worst_sd = 0.0;
  for (std::size_t block = 0; block < 2; ++block) {
    const std::size_t first = block == 0 ? 0 : 5;
    const std::size_t last = block == 0 ? 5 : 9;
    if (report) {
      os << (block == 0 ? "Sensor features by scenario" : "Text parameters by scenario")
         << " (generated mean±sd | reference | mean dev, sd dev)\n";
    }
    for (const auto& s : specs) {
      if (report) os << "  " << std::left << std::setw(18) << s.name << std::right << "\n";
      for (std::size_t c = first; c < last; ++c) {
        const auto ms = stats::mean_sd(by_column[c][static_cast<std::size_t>(s.id - 1)]);
        const auto ref = reference_moments(s, c);
        if (ref.mean != 0.0) worst_mean = std::max(worst_mean, std::fabs(ms.mean - ref.mean) / ref.mean);
        if (ref.sd != 0.0) worst_sd = std::max(worst_sd, std::fabs(ms.sd - ref.sd) / ref.sd);
        out["marginals"][s.name][kColumns[c]] = {{"mean", ms.mean}, {"sd", ms.sd},
                                                 {"ref_mean", ref.mean}, {"ref_sd", ref.sd}};
        if (report) {
          os << "    " << std::left << std::setw(10) << kColumns[c] << std::right << std::setprecision(3)
             << std::setw(11) << ms.mean << " ± " << std::setw(9) << ms.sd << " | " << std::setw(10)
             << ref.mean << " ± " << std::setw(9) << ref.sd << " | " << pct(ms.mean, ref.mean) << ", "
             << pct(ms.sd, ref.sd) << "\n";
        }
      }
    }
    if (report) os << "  one-way ANOVA across scenarios (generated F, p | reported F, p)\n";
    for (std::size_t c = first; c < last; ++c) {
      const auto a = stats::one_way_anova(by_column[c]);
      const auto& ref = kReportedAnova[c];
      out["anova"][kColumns[c]] = {{"f", a.f_value}, {"p", a.p_value}, {"ref_f", ref.f},
                                   {"df_between", a.df_between}, {"df_within", a.df_within}};
      if (report) {
        os << "    " << std::left << std::setw(10) << kColumns[c] << std::right << " F=" << std::setprecision(3)
           << std::setw(8) << a.f_value << " p=" << std::scientific << std::setprecision(3) << a.p_value
           << std::fixed << " | F=" << std::setw(8) << ref.f << " p="
           << (ref.p < 0 ? std::string("<0.001") : std::to_string(ref.p).substr(0, 5)) << "\n";
      }
    }
    if (report) os << "\n";
  }
  out["worst_mean_rel_dev"] = worst_mean;
  out["worst_sd_rel_dev"] = worst_sd;

  const auto grid = datagen::spearman_grid(rows);
  const auto target = datagen::reference_spearman_targets();
  if (report) os << "Spearman grid (generated | reference | dev)\n";
  double worst_r = 0.0;
  for (std::size_t t = 0; t < kOutputCount; ++t) {
    if (report) os << "  " << std::left << std::setw(18) << kOutputNames[t] << std::right;
    for (std::size_t f = 0; f < datagen::kCouplingFeatureCount; ++f) {
      const double dev = grid[t][f] - target[t][f];
      if (std::fabs(target[t][f]) >= 0.2) worst_r = std::max(worst_r, std::fabs(dev));
      out["spearman"][std::string(kOutputNames[t])][std::string(datagen::kCouplingFeatureNames[f])] =
          {{"r", grid[t][f]}, {"ref", target[t][f]}};
      if (report) {
        os << " " << datagen::kCouplingFeatureNames[f] << " " << std::showpos << std::setprecision(3)
           << grid[t][f] << "|" << target[t][f] << "|" << dev << std::noshowpos;
      }
    }
    if (report) os << "\n";
  }
  out["worst_spearman_dev_strong"] = worst_r;

  const auto model = *make_group_prior(datagen::to_training_rows(rows), 1.0)->model;
  if (report) os << "\nGROUP model at scenario mean features (size, weight, line, letter)\n";
  for (const auto& s : specs) {
    ContextFeatures cf;
    cf.light_lux = s.lux.mean;
    cf.vib_x = s.vib_x.mean;
    cf.vib_y = s.vib_y.mean;
    cf.vib_z = s.vib_z.mean;
    cf.distance_cm = s.distance_cm.mean;
    const auto p = predict(model, FeatureVector::from_context(cf));
    out["group_predictions"][s.name] = to_json(p);
    if (report) {
      os << "  " << std::left << std::setw(18) << s.name << std::right << std::setprecision(3)
         << std::setw(8) << p.size_sp << std::setw(8) << p.weight_px << std::setw(8)
         << p.line_spacing_em << std::setw(8) << p.letter_spacing_em << "   (reference size "
         << s.size_sp.mean << ")\n";
    }
  }
  if (report) {
    os << "\nworst relative mean deviation " << std::setprecision(4) << worst_mean
       << ", worst relative sd deviation " << worst_sd << ", worst |dr| on |r|>=0.2 " << worst_r << "\n";
  }
  if (!json_out.empty()) write_text(json_out, out.dump(2) + "\n");
  if (!report && json_out.empty()) std::cout << out.dump(2) << "\n";
  return 0;
}

// ---------------------------------------------------------------- replay

int cmd_replay(const fs::path& trace_path, const fs::path& feedback_path, const fs::path& out_dir,
               const fs::path& config_path, const fs::path& fixtures) {
  ServiceConfig cfg = config_path.empty() ? ServiceConfig{} : load_config(config_path);
  const auto dataset = cfg.group_dataset.empty() || !fixtures.empty()
                           ? dataset_path(fixtures.empty() ? kDefaultFixtures : fixtures)
                           : cfg.group_dataset;
  std::ifstream trace_in(trace_path);
  if (!trace_in) throw Error(ErrorCode::StorageError, "cannot open " + trace_path.string());
  const auto trace = read_trace(trace_in);
  std::vector<FeedbackAction> actions;
  if (!feedback_path.empty()) {
    std::ifstream fb(feedback_path);
    if (!fb) throw Error(ErrorCode::StorageError, "cannot open " + feedback_path.string());
    actions = read_feedback_log(fb);
  }
  EngineConfig ec{cfg.window, cfg.motion, cfg.learning, {}};
  const auto report = replay(trace, actions, ec, load_group_prior(dataset, cfg.learning.lambda), out_dir);
  std::cout << report.to_json().dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"legible: context-adaptive text parameter engine"};
  app.require_subcommand(1);

  auto* serve = app.add_subcommand("serve", "Run the HTTP service");
  std::string serve_config;
  std::optional<int> serve_port;
  std::optional<std::string> serve_data;
  serve->add_option("--config", serve_config, "TOML-style config file");
  serve->add_option("--port", serve_port, "Override the configured port (0 = any free port)");
  serve->add_option("--data-dir", serve_data, "Override the configured data directory");

  auto* gen = app.add_subcommand("gen-data", "Calibrate and write the group dataset fixture");
  std::optional<std::uint64_t> gen_seed;
  std::string gen_out = "fixtures";
  std::string gen_coupling;
  gen->add_option("--seed", gen_seed, "Generator seed");
  gen->add_option("--out", gen_out, "Output directory")->capture_default_str();
  gen->add_option("--coupling", gen_coupling, "Use this coupling config instead of calibrating");

  auto* train = app.add_subcommand("train", "Fit the GROUP model from a fixture");
  std::string train_fixtures = kDefaultFixtures.string();
  double train_lambda = 1.0;
  std::string train_out;
  train->add_option("--fixtures", train_fixtures, "Fixture directory or dataset file")->capture_default_str();
  train->add_option("--lambda", train_lambda, "Ridge strength")->capture_default_str();
  train->add_option("--out", train_out, "Write the model JSON here");

  auto* eval = app.add_subcommand("eval", "Summarize a group dataset against the reference tables");
  std::string eval_fixtures = kDefaultFixtures.string();
  bool eval_report = false;
  std::string eval_json;
  eval->add_option("--fixtures", eval_fixtures, "Fixture directory or dataset file")->capture_default_str();
  eval->add_flag("--report", eval_report, "Print the table-style report");
  eval->add_option("--json", eval_json, "Write the summary as JSON");

  auto* rep = app.add_subcommand("replay", "Replay a sensor trace and feedback log into a fresh store");
  std::string rep_trace, rep_feedback, rep_out, rep_config, rep_fixtures;
  rep->add_option("--trace", rep_trace, "Sensor trace (JSON Lines)")->required();
  rep->add_option("--feedback", rep_feedback, "Feedback log (JSON Lines)");
  rep->add_option("--out", rep_out, "Output store directory (must be empty)")->required();
  rep->add_option("--config", rep_config, "Config file");
  rep->add_option("--fixtures", rep_fixtures, "Fixture directory or dataset file");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*serve) return cmd_serve(serve_config, serve_port, serve_data ? std::optional<fs::path>(*serve_data) : std::nullopt);
    if (*gen) return cmd_gen_data(gen_seed, gen_out, gen_coupling);
    if (*train) return cmd_train(train_fixtures, train_lambda, train_out);
    if (*eval) return cmd_eval(eval_fixtures, eval_report, eval_json);
    if (*rep) return cmd_replay(rep_trace, rep_feedback, rep_out, rep_config, rep_fixtures);
  } catch (const Error& e) {
    std::cerr << "error: " << to_string(e.code()) << ": " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
