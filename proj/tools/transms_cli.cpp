// transms: command-line front end for simulation, recovery, training and evaluation.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "transms/config.hpp"
#include "transms/experiment.hpp"
#include "transms/interpolation.hpp"
#include "transms/logging.hpp"
#include "transms/metrics.hpp"

using namespace transms;

namespace {

enum Exit { kOk = 0, kFailure = 1, kUsage = 2, kConfig = 3, kIo = 4, kFormat = 5, kNumeric = 6 };

struct Global {
  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::string log_level = "info";
};

void fail_json(const std::string& kind, const std::string& message, const std::string& key = {}) {
  nlohmann::ordered_json j;
  j["error"] = kind;
  j["message"] = message;
  if (!key.empty()) j["key"] = key;
  std::cerr << j.dump() << "\n";
}

/// Parses "a.b.c=value"; the value is read as JSON when possible, else as a string.
void apply_override(nlohmann::json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("--set expects key=value, got '" + assignment + "'");
  const std::string key = assignment.substr(0, eq), text = assignment.substr(eq + 1);
  nlohmann::json value;
  try {
    value = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception&) {
    value = text;
  }
  std::string pointer;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    pointer += "/" + key.substr(start, dot - start);
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  doc[nlohmann::json::json_pointer(pointer)] = value;
}

RunConfig load_config(const Global& g) {
  nlohmann::json doc = {{"schema_version", kSchemaVersion}};
  if (!g.config_path.empty()) {
    try {
      doc = nlohmann::json::parse(read_file(g.config_path));
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(g.config_path + " is not valid JSON: " + e.what());
    }
  }
  for (const auto& o : g.overrides) apply_override(doc, o);
  if (g.seed) {
    doc["seed"] = *g.seed;
    doc["dataset"]["seed"] = *g.seed;
    doc["training"]["seed"] = *g.seed;
    doc["scanner"]["seed"] = *g.seed;
  }
  return parse_run_config(doc.dump());
}

std::uint64_t seed_of(const Global& g, const RunConfig& c) { return g.seed.value_or(c.experiment.seed); }

PhantomGeometry geometry_of(const ScannerConfig& s) { return {s.grid, s.fov_x_mm, s.fov_y_mm, 16}; }

void write_image(const Phantom& image, const std::string& pgm, const std::string& csv) {
  if (!pgm.empty()) write_pgm(pgm, image.concentration, image.grid);
  if (!csv.empty()) atomic_write(csv, image_csv(image.concentration, image.grid));
}

std::string loss_csv(const TrainingRecord& r) {
  CsvTable t({"epoch", "train_loss", "validation_loss"});
  for (std::size_t e = 0; e < r.train_loss.size(); ++e)
    t.add_row({std::to_string(e), format_double(r.train_loss[e]),
               e < r.validation_loss.size() ? format_double(r.validation_loss[e]) : "nan"});
  return t.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"TranSMS system-matrix super-resolution toolkit"};
  app.require_subcommand(1);
  app.fallthrough();
  Global g;
  app.add_option("--config", g.config_path, "JSON run configuration");
  app.add_option("--set", g.overrides, "Override a config key, e.g. --set training.epochs=20");
  app.add_option("--seed", g.seed, "Seed for every random draw");
  app.add_option("--log-level", g.log_level, "debug, info, warn, error or off");

  // simulate
  auto* sim = app.add_subcommand("simulate", "Simulate a calibration system matrix");
  std::string sim_out;
  std::optional<double> sim_gradient, sim_diameter, sim_snr;
  int sim_cells = 1;
  sim->add_option("--out", sim_out, "Output .smx")->required();
  sim->add_option("--gradient", sim_gradient, "Selection-field gradient, T/m");
  sim->add_option("--diameter", sim_diameter, "Particle core diameter, nm");
  sim->add_option("--sample-cells", sim_cells, "Calibration sample edge in HR voxels (LR measurement)")
      ->check(CLI::PositiveNumber);
  sim->add_option("--snr", sim_snr, "Add calibration noise at this per-row SNR (dB)");

  // phantom
  auto* ph = app.add_subcommand("phantom", "Rasterise the configured phantom");
  std::string ph_pgm, ph_csv;
  ph->add_option("--pgm", ph_pgm, "16-bit PGM output");
  ph->add_option("--csv", ph_csv, "CSV output");

  // downsample
  auto* ds = app.add_subcommand("downsample", "Box-car downsample an HR matrix");
  std::string ds_in, ds_out;
  int ds_sr = 2;
  ds->add_option("--in", ds_in)->required();
  ds->add_option("--out", ds_out)->required();
  ds->add_option("--sr", ds_sr, "SR factor")->check(CLI::IsMember({2, 4, 8}));

  // add-noise
  auto* an = app.add_subcommand("add-noise", "Add complex Gaussian calibration noise");
  std::string an_in, an_out;
  double an_snr = 30.0;
  an->add_option("--in", an_in)->required();
  an->add_option("--out", an_out)->required();
  an->add_option("--snr", an_snr, "Per-row SNR in dB");

  // recover
  auto* rc = app.add_subcommand("recover", "Recover an HR matrix");
  std::string rc_method, rc_in, rc_out, rc_model;
  int rc_sr = 2;
  std::optional<double> rc_ratio;
  rc->add_option("method", rc_method, "bicubic, strided-bicubic, cs or transms")
      ->required()
      ->check(CLI::IsMember({"bicubic", "strided-bicubic", "cs", "transms"}));
  rc->add_option("--in", rc_in, "LR matrix (bicubic, transms) or noisy HR matrix (strided-bicubic, cs)")->required();
  rc->add_option("--out", rc_out)->required();
  rc->add_option("--sr", rc_sr)->check(CLI::IsMember({2, 4, 8}));
  rc->add_option("--model", rc_model, "Checkpoint for transms");
  rc->add_option("--ratio", rc_ratio, "Sampling ratio for cs (default 1/S^2)");

  // train
  auto* tr = app.add_subcommand("train", "Train a network on the configured dataset");
  std::string tr_out, tr_method = "transms";
  int tr_sr = 2;
  std::optional<int> tr_epochs;
  tr->add_option("--out", tr_out, "Checkpoint path")->required();
  tr->add_option("--method", tr_method)->check(CLI::IsMember({"transms", "rdsr", "ctsr"}));
  tr->add_option("--sr", tr_sr)->check(CLI::IsMember({2, 4, 8}));
  tr->add_option("--epochs", tr_epochs);

  // reconstruct
  auto* re = app.add_subcommand("reconstruct", "ADMM image reconstruction of the configured phantom");
  std::string re_sm, re_truth, re_pgm, re_csv;
  re->add_option("--sm", re_sm, "System matrix used for reconstruction")->required();
  re->add_option("--truth", re_truth, "Matrix generating the measurement (default: --sm)");
  re->add_option("--pgm", re_pgm);
  re->add_option("--csv", re_csv);

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "nRMSE of recovered matrices against references");
  std::vector<std::string> ev_ref, ev_est;
  std::string ev_method = "estimate", ev_out;
  int ev_sr = 2;
  ev->add_option("--reference", ev_ref)->required();
  ev->add_option("--estimate", ev_est)->required();
  ev->add_option("--method", ev_method);
  ev->add_option("--sr", ev_sr);
  ev->add_option("--out", ev_out, "CSV output (stdout when omitted)");

  // experiment
  auto* ex = app.add_subcommand("experiment", "Full pipeline: simulate, train, recover, reconstruct, score");
  std::string ex_dir, ex_models;
  ex->add_option("--out-dir", ex_dir)->required();
  ex->add_option("--models", ex_models, "Directory with <method>_x<S>.ckpt to reuse");

  // ablate
  auto* ab = app.add_subcommand("ablate", "Training-set size ablation");
  std::vector<std::size_t> ab_sizes;
  std::string ab_dir;
  ab->add_option("--sizes", ab_sizes)->required()->delimiter(',');
  ab->add_option("--out-dir", ab_dir)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    fail_json("usage", e.what());
    return kUsage;
  }

  try {
    log::set_level(log::parse_level(g.log_level));
    const RunConfig config = load_config(g);
    const ExperimentSpec& spec = config.experiment;
    const std::uint64_t seed = seed_of(g, config);

    if (*sim) {
      ScannerConfig sc = spec.scanner;
      if (sim_gradient) sc.gradient_t_per_m = *sim_gradient;
      if (sim_diameter) sc.diameter_nm = *sim_diameter;
      SystemMatrix sm = simulate_sm(sc, sim_cells);
      if (sim_cells > 1) sm = ingest_sum_convention(sm, sim_cells);
      if (sim_snr) sm = add_calibration_noise(sm, {*sim_snr, std::nullopt}, seed);
      write_smx(sim_out, sm);
      atomic_write(sim_out + ".json", (Json{{"scanner", to_json(sc)}, {"sample_cells", sim_cells},
                                            {"snr_db", sim_snr ? Json(*sim_snr) : Json(nullptr)}, {"seed", seed}})
                                           .dump(2) + "\n");
      log::info("simulate", "rows=" + std::to_string(sm.row_count()) + " out=" + sim_out);
    } else if (*ph) {
      if (ph_pgm.empty() && ph_csv.empty()) throw ConfigError("phantom needs --pgm or --csv");
      write_image(make_phantom(spec.phantom, geometry_of(spec.scanner)), ph_pgm, ph_csv);
    } else if (*ds) {
      write_smx(ds_out, boxcar_downsample(read_smx(ds_in), ds_sr));
    } else if (*an) {
      write_smx(an_out, add_calibration_noise(read_smx(an_in), {an_snr, std::nullopt}, seed));
    } else if (*rc) {
      const SystemMatrix in = read_smx(rc_in);
      SystemMatrix out;
      if (rc_method == "bicubic") {
        out = bicubic_recover(in, rc_sr);
      } else if (rc_method == "strided-bicubic") {
        out = strided_bicubic_recover(apply_mask(in, strided_mask(in.grid, rc_sr)));
      } else if (rc_method == "cs") {
        const double ratio = rc_ratio.value_or(1.0 / double(rc_sr * rc_sr));
        out = cs_recover_sm(apply_mask(in, random_mask(in.grid, ratio, seed)), spec.cs);
      } else {
        if (rc_model.empty()) throw ConfigError("recover transms needs --model", "model");
        out = super_resolve(read_checkpoint(rc_model), in);
      }
      write_smx(rc_out, out);
    } else if (*tr) {
      ExperimentSpec s = spec;
      if (tr_epochs) s.training.epochs = *tr_epochs;
      s.factors = {tr_sr};
      s.methods = {tr_method};
      s.validate();
      const Dataset dataset = generate_dataset(s.dataset, s.scanner);
      const PreparedData data = prepare_data(dataset, tr_sr, s.snr_db, s.seed);
      const TrainResult r = train_network(s, data, tr_method);
      const TrainingRecord record{r.train_loss, r.validation_loss, r.best_epoch, r.diverged, s.seed};
      write_checkpoint(tr_out, r.model, record);
      atomic_write(tr_out + ".loss.csv", loss_csv(record));
      if (r.diverged) throw NumericError("training diverged; best checkpoint written");
    } else if (*re) {
      const SystemMatrix sm = read_smx(re_sm);
      const SystemMatrix truth = re_truth.empty() ? sm : read_smx(re_truth);
      VectorXd sigma(truth.row_count());
      bool known = true;
      for (Index i = 0; i < truth.row_count(); ++i) {
        known = known && truth.rows[std::size_t(i)].has_sigma() && truth.rows[std::size_t(i)].sigma > 0.0;
        if (known) sigma[i] = truth.rows[std::size_t(i)].sigma;
      }
      if (!known) sigma = sigma_for_snr(truth, spec.snr_db.value_or(30.0));
      const Phantom phantom = make_phantom(spec.phantom, geometry_of(spec.scanner));
      const SimulatedSignal y = simulate_signal(truth, phantom, {std::nullopt, sigma, seed});
      const VectorXd x = reconstruct_phantom(spec, sm, sigma, y.y);
      write_image({sm.grid, x, "reconstruction"}, re_pgm, re_csv);
      if (re_pgm.empty() && re_csv.empty()) std::cout << image_csv(x, sm.grid);
    } else if (*ev) {
      if (ev_ref.size() != ev_est.size()) throw ConfigError("--reference and --estimate counts differ");
      std::vector<ExperimentRow> rows;
      for (std::size_t i = 0; i < ev_ref.size(); ++i) {
        const SystemMatrix ref = read_smx(ev_ref[i]), est = read_smx(ev_est[i]);
        rows.push_back({ev_method, ev_sr, fs::path(ev_ref[i]).stem().string(), 100.0 * nrmse(est.data, ref.data),
                        std::numeric_limits<double>::quiet_NaN(), 0.0, seed});
      }
      const std::string csv = results_csv(rows, false);
      if (ev_out.empty()) std::cout << csv;
      else atomic_write(ev_out, csv);
    } else if (*ex) {
      std::map<std::string, TranSmsModel> pretrained;
      if (!ex_models.empty())
        for (const auto& m : spec.methods)
          for (int s : spec.factors) {
            const fs::path p = fs::path(ex_models) / (m + "_x" + std::to_string(s) + ".ckpt");
            if (is_network_method(m) && fs::exists(p)) pretrained.emplace(m + "_x" + std::to_string(s), read_checkpoint(p));
          }
      const ExperimentResult r = run_experiment(spec, fs::path(ex_dir), pretrained);
      for (const auto& s : r.summary)
        std::cout << s.method << " x" << s.sr_factor << " nrmse_pct=" << format_double(s.mean_nrmse_pct)
                  << " psnr_db=" << format_double(s.mean_psnr_db) << "\n";
      for (const auto& m : r.missing) log::warn("missing", m);
    } else if (*ab) {
      for (const auto& p : training_set_ablation(spec, ab_sizes, seed, fs::path(ab_dir)))
        std::cout << p.size << " " << format_double(p.nrmse_pct) << "\n";
    }
    return kOk;
  } catch (const ConfigError& e) {
    fail_json(e.kind(), e.what(), e.key());
    return kConfig;
  } catch (const IoError& e) {
    fail_json(e.kind(), e.what());
    return kIo;
  } catch (const FormatError& e) {
    fail_json(e.kind(), e.what());
    return kFormat;
  } catch (const NumericError& e) {
    fail_json(e.kind(), e.what());
    return kNumeric;
  } catch (const Error& e) {
    fail_json(e.kind(), e.what());
    return kFailure;
  } catch (const fs::filesystem_error& e) {
    fail_json("io", e.what());
    return kIo;
  } catch (const std::exception& e) {
    fail_json("internal", e.what());
    return kFailure;
  }
}
