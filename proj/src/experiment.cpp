#include "transms/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include <json.hpp>

#include "transms/config.hpp"
#include "transms/interpolation.hpp"
#include "transms/logging.hpp"
#include "transms/metrics.hpp"

namespace transms {

namespace {

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (a + 1) + 0xbf58476d1ce4e5b9ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

Variant method_variant(const std::string& method) {
  if (method == "transms") return Variant::kFull;
  if (method == "rdsr") return Variant::kRdsr;
  if (method == "ctsr") return Variant::kCtsr;
  throw ConfigError("not a network method: " + method, "methods");
}

std::string model_key(const std::string& method, int factor) { return method + "_x" + std::to_string(factor); }

std::vector<std::size_t> indices_of(const PreparedData& data, Split split) {
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < data.entries.size(); ++k)
    if (data.entries[k].split == split) out.push_back(k);
  return out;
}

RowBatch rows_of(const PreparedData& data, const std::vector<std::size_t>& members, bool augment) {
  std::vector<RowBatch> parts;
  for (std::size_t k : members) {
    const SystemMatrix lr = augment ? augment_flips(data.lr[k]) : data.lr[k];
    const SystemMatrix hr = augment ? augment_flips(data.hr[k]) : data.hr[k];
    std::vector<Index> all(static_cast<std::size_t>(lr.row_count()));
    std::iota(all.begin(), all.end(), Index(0));
    parts.push_back(pack_rows(lr, &hr, all));
  }
  if (parts.empty()) throw Error("no matrices in the requested split");
  return concat_batches(parts);
}

TrainResult train_on(const ExperimentSpec& spec, const PreparedData& data, const std::string& method,
                     const std::vector<std::size_t>& members, std::uint64_t seed) {
  TranSmsConfig config = spec.network;
  config.factor = data.factor;
  config.variant = method_variant(method);
  const TranSmsModel initial = init_model(config, derive_seed(seed, 1, std::uint64_t(data.factor)));
  const RowBatch train_set = rows_of(data, members, spec.augment_flips);
  const std::vector<std::size_t> val = indices_of(data, Split::kValidation);
  std::optional<RowBatch> validation;
  if (!val.empty()) validation = rows_of(data, val, false);

  TrainSettings settings = spec.training;
  settings.seed = derive_seed(settings.seed, 2, std::uint64_t(data.factor));
  if (!settings.on_epoch) {
    settings.on_epoch = [&](int epoch, double tl, double vl) {
      log::debug("epoch", "method=" + method + " factor=" + std::to_string(data.factor) +
                              " epoch=" + std::to_string(epoch) + " train=" + format_double(tl) +
                              " validation=" + format_double(vl));
    };
  }
  log::info("train", "method=" + method + " factor=" + std::to_string(data.factor) +
                         " rows=" + std::to_string(train_set.lr.dim(0)) + " epochs=" + std::to_string(settings.epochs));
  return train(initial, train_set, validation ? &*validation : nullptr, settings);
}

TrainingRecord record_of(const TrainResult& r, std::uint64_t seed) {
  return {r.train_loss, r.validation_loss, r.best_epoch, r.diverged, seed};
}

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  return std::accumulate(v.begin(), v.end(), 0.0) / double(v.size());
}

VectorXd row_magnitude(const SystemMatrix& sm, Index row) { return sm.data.row(row).cwiseAbs().transpose(); }

}  // namespace

bool is_network_method(const std::string& method) {
  return method == "transms" || method == "rdsr" || method == "ctsr";
}

void ExperimentSpec::validate() const {
  scanner.validate();
  if (factors.empty()) throw ConfigError("at least one SR factor is required", "factors");
  std::set<int> seen_f;
  for (int s : factors) {
    if (s != 2 && s != 4 && s != 8) throw ConfigError("SR factor must be 2, 4 or 8", "factors");
    if (scanner.grid.width % s != 0 || scanner.grid.height % s != 0)
      throw ConfigError("grid is not divisible by SR factor " + std::to_string(s), "factors");
    if (!seen_f.insert(s).second) throw ConfigError("duplicate SR factor", "factors");
  }
  if (methods.empty()) throw ConfigError("at least one method is required", "methods");
  std::set<std::string> seen_m;
  for (const auto& m : methods) {
    if (std::find(kMethods.begin(), kMethods.end(), m) == kMethods.end())
      throw ConfigError("unknown method '" + m + "'", "methods");
    if (!seen_m.insert(m).second) throw ConfigError("duplicate method '" + m + "'", "methods");
  }
  if (training.epochs < 1) throw ConfigError("epochs must be positive", "training.epochs");
  if (training.batch_size < 1) throw ConfigError("batch_size must be positive", "training.batch_size");
  if (!(training.adam.learning_rate > 0.0)) throw ConfigError("learning_rate must be positive", "training.learning_rate");
  if (recon.alpha_l1 < 0.0 || recon.alpha_tv < 0.0) throw ConfigError("recon weights must be non-negative", "recon");
  if (recon.max_iterations < 1) throw ConfigError("max_iterations must be positive", "recon.max_iterations");
  TranSmsConfig net = network;
  for (int s : factors) {
    net.factor = s;
    try {
      net.validate();
    } catch (const Error& e) {
      throw ConfigError(std::string("network: ") + e.what(), "network");
    }
  }
}

const ExperimentSummary& ExperimentResult::find(const std::string& method, int factor) const {
  for (const auto& s : summary)
    if (s.method == method && s.sr_factor == factor) return s;
  throw Error("no result for " + model_key(method, factor));
}

SystemMatrix noisy_lr(const SystemMatrix& hr, int factor, std::optional<double> snr_db, std::uint64_t seed) {
  SystemMatrix lr = boxcar_downsample(hr, factor);
  if (!snr_db) {
    for (auto& r : lr.rows) r.sigma = 0.0;
    return lr;
  }
  const VectorXd sigma = sigma_for_snr(hr, *snr_db) / double(factor);
  return add_calibration_noise(lr, {std::nullopt, sigma}, seed);
}

PreparedData prepare_data(const Dataset& dataset, int factor, std::optional<double> snr_db, std::uint64_t seed) {
  PreparedData d;
  d.factor = factor;
  d.entries = dataset.manifest.entries;
  for (std::size_t k = 0; k < dataset.hr.size(); ++k) {
    const SystemMatrix& hr = dataset.hr[k];
    d.hr.push_back(hr);
    d.lr.push_back(noisy_lr(hr, factor, snr_db, derive_seed(seed, 10 + std::uint64_t(factor), k)));
    if (snr_db) {
      const VectorXd sigma = sigma_for_snr(hr, *snr_db);
      d.sigma_hr.push_back(sigma);
      d.hr_noisy.push_back(add_calibration_noise(hr, {std::nullopt, sigma}, derive_seed(seed, 20 + std::uint64_t(factor), k)));
    } else {
      d.sigma_hr.push_back(VectorXd::Zero(hr.row_count()));
      SystemMatrix copy = hr;
      for (auto& r : copy.rows) r.sigma = 0.0;
      d.hr_noisy.push_back(std::move(copy));
    }
  }
  return d;
}

RowBatch training_rows(const PreparedData& data, Split split, bool augment) {
  return rows_of(data, indices_of(data, split), augment);
}

TrainResult train_network(const ExperimentSpec& spec, const PreparedData& data, const std::string& method) {
  return train_on(spec, data, method, indices_of(data, Split::kTrain), spec.seed);
}

SystemMatrix recover(const ExperimentSpec& spec, const PreparedData& data, std::size_t k, const std::string& method,
                     const TranSmsModel* model) {
  if (k >= data.entries.size()) throw Error("recover: entry out of range");
  const Grid grid = data.hr[k].grid;
  const int s = data.factor;
  if (method == "bicubic") return bicubic_recover(data.lr[k], s);
  if (method == "strided-bicubic") return strided_bicubic_recover(apply_mask(data.hr_noisy[k], strided_mask(grid, s)));
  if (method == "cs") {
    const SamplingMask mask = random_mask(grid, 1.0 / double(s * s), derive_seed(spec.seed, 30 + std::uint64_t(s), k));
    return cs_recover_sm(apply_mask(data.hr_noisy[k], mask), spec.cs);
  }
  if (is_network_method(method)) {
    if (!model) throw Error("recover: " + method + " needs a trained model");
    if (model->config.factor != s) throw ConfigError("model factor does not match the data", "network.factor");
    return super_resolve(*model, data.lr[k]);
  }
  throw ConfigError("unknown method '" + method + "'", "methods");
}

VectorXd reconstruct_phantom(const ExperimentSpec& spec, const SystemMatrix& sm, const VectorXd& sigma,
                             const VectorXcd& signal) {
  if (sigma.size() != sm.row_count()) throw ShapeError("reconstruct: sigma does not match the SM");
  if (!(sigma.array() > 0.0).all()) throw NumericError("reconstruct: row sigmas must be positive");
  SystemMatrix weighted = sm;
  for (Index i = 0; i < sm.row_count(); ++i) weighted.rows[std::size_t(i)].sigma = sigma[i];
  const Whitened w = whiten(weighted, signal);
  ReconProblem p = make_recon_problem(w.sm, *w.signal);
  p.alpha_l1 = spec.recon.alpha_l1;
  p.alpha_tv = spec.recon.alpha_tv;
  p.mu = spec.recon.mu;
  p.max_iterations = spec.recon.max_iterations;
  p.tolerance = spec.recon.tolerance;
  p.nonnegative = spec.recon.nonnegative;
  return admm_reconstruct(p).x;
}

std::string results_csv(const std::vector<ExperimentRow>& rows, bool record_runtime) {
  CsvTable t({"method", "sr_factor", "dataset_id", "nrmse_pct", "psnr_db", "runtime_s", "seed"});
  for (const auto& r : rows)
    t.add_row({r.method, std::to_string(r.sr_factor), r.dataset_id, format_double(r.nrmse_pct),
               std::isnan(r.psnr_db) ? "" : format_double(r.psnr_db),
               format_double(record_runtime ? r.runtime_s : 0.0), std::to_string(r.seed)});
  return t.str();
}

ExperimentResult run_experiment(const ExperimentSpec& spec, const std::optional<fs::path>& output_dir,
                                const std::map<std::string, TranSmsModel>& pretrained) {
  spec.validate();
  using clock = std::chrono::steady_clock;
  ExperimentResult result;
  if (output_dir) fs::create_directories(*output_dir);

  log::info("simulate", "entries=" + std::to_string(plan_dataset(spec.dataset).entries.size()));
  const Dataset dataset = generate_dataset(spec.dataset, spec.scanner);

  // Phantom measurement for each test SM and its reference reconstruction.
  const PhantomGeometry geometry{spec.scanner.grid, spec.scanner.fov_x_mm, spec.scanner.fov_y_mm, 16};
  std::map<std::size_t, VectorXcd> signals;
  std::map<std::size_t, VectorXd> recon_sigma, reference_images;
  std::optional<PreparedData> first;

  for (int s : spec.factors) {
    PreparedData data = prepare_data(dataset, s, spec.snr_db, spec.seed);
    const std::vector<std::size_t> test = indices_of(data, Split::kTest);
    if (test.empty()) throw ConfigError("the dataset has no test matrices", "dataset");

    if (output_dir)
      for (std::size_t k : test) {
        const fs::path p = *output_dir / ("reference_" + data.entries[k].id + ".smx");
        if (!fs::exists(p)) write_smx(p, data.hr[k]);
        write_smx(*output_dir / ("lr_x" + std::to_string(s) + "_" + data.entries[k].id + ".smx"), data.lr[k]);
      }

    if (spec.reconstruct && signals.empty()) {
      const Phantom phantom = make_phantom(spec.phantom, geometry);
      for (std::size_t k : test) {
        const SystemMatrix& hr = data.hr[k];
        VectorXd sigma = spec.snr_db ? data.sigma_hr[k] : sigma_for_snr(hr, 60.0);
        const SimulatedSignal sig = simulate_signal(hr, phantom, {std::nullopt, sigma, derive_seed(spec.seed, 40, k)});
        signals[k] = sig.y;
        recon_sigma[k] = sigma;
        try {
          reference_images[k] = reconstruct_phantom(spec, hr, sigma, sig.y);
          if (output_dir)
            write_pgm(*output_dir / ("recon_reference_" + data.entries[k].id + ".pgm"), reference_images[k], hr.grid);
        } catch (const Error& e) {
          result.missing.push_back("reference reconstruction " + data.entries[k].id + ": " + e.what());
        }
      }
    }

    for (const std::string& method : spec.methods) {
      std::optional<TranSmsModel> model;
      if (is_network_method(method)) {
        const std::string key = model_key(method, s);
        if (auto it = pretrained.find(key); it != pretrained.end()) {
          model = it->second;
        } else {
          const auto t0 = clock::now();
          TrainResult tr = train_network(spec, data, method);
          const double seconds = std::chrono::duration<double>(clock::now() - t0).count();
          log::info("trained", "method=" + method + " factor=" + std::to_string(s) + " best_epoch=" +
                                   std::to_string(tr.best_epoch) + " seconds=" + format_double(seconds));
          if (tr.diverged) result.missing.push_back(key + ": training diverged");
          const TrainingRecord record = record_of(tr, spec.seed);
          result.records[key] = record;
          if (output_dir) write_checkpoint(*output_dir / (key + ".ckpt"), tr.model, record);
          model = std::move(tr.model);
        }
        result.models.emplace(key, *model);
      }

      for (std::size_t k : test) {
        const auto t0 = clock::now();
        const SystemMatrix rec = recover(spec, data, k, method, model ? &*model : nullptr);
        const double seconds = std::chrono::duration<double>(clock::now() - t0).count();
        ExperimentRow row{method, s, data.entries[k].id, 100.0 * nrmse(rec.data, data.hr[k].data),
                          std::numeric_limits<double>::quiet_NaN(), spec.record_runtime ? seconds : 0.0, spec.seed};
        if (spec.reconstruct && reference_images.count(k)) {
          try {
            const VectorXd x = reconstruct_phantom(spec, rec, recon_sigma.at(k), signals.at(k));
            row.psnr_db = psnr(x, reference_images.at(k));
            if (output_dir && k == test.front())
              write_pgm(*output_dir / ("recon_" + model_key(method, s) + "_" + data.entries[k].id + ".pgm"), x,
                        rec.grid);
          } catch (const Error& e) {
            result.missing.push_back("reconstruction " + model_key(method, s) + " " + data.entries[k].id + ": " +
                                     e.what());
          }
        }
        if (output_dir) write_smx(*output_dir / (model_key(method, s) + "_" + data.entries[k].id + ".smx"), rec);
        if (output_dir && k == test.front()) {
          const VectorXd err = (rec.data.row(0) - data.hr[k].data.row(0)).cwiseAbs().transpose();
          const double hi = row_magnitude(data.hr[k], 0).maxCoeff();
          write_pgm(*output_dir / ("error_" + model_key(method, s) + "_" + data.entries[k].id + "_row0.pgm"), err,
                    rec.grid, 0.0, hi > 0.0 ? hi : 1.0);
        }
        log::debug("row", "method=" + method + " factor=" + std::to_string(s) + " id=" + row.dataset_id +
                              " nrmse_pct=" + format_double(row.nrmse_pct));
        result.rows.push_back(row);
      }
    }
  }

  for (int s : spec.factors) {
    for (const std::string& method : spec.methods) {
      std::vector<double> e, p;
      for (const auto& r : result.rows) {
        if (r.method != method || r.sr_factor != s) continue;
        e.push_back(r.nrmse_pct);
        if (!std::isnan(r.psnr_db)) p.push_back(r.psnr_db);
      }
      result.summary.push_back({method, s, mean_of(e), mean_of(p), e.size()});
    }
  }

  if (output_dir) {
    atomic_write(*output_dir / "results.csv", results_csv(result.rows, spec.record_runtime));
    Json summary = Json::array();
    for (const auto& s : result.summary) {
      Json j;
      j["method"] = s.method;
      j["sr_factor"] = s.sr_factor;
      j["mean_nrmse_pct"] = s.mean_nrmse_pct;
      j["mean_psnr_db"] = std::isnan(s.mean_psnr_db) ? Json(nullptr) : Json(s.mean_psnr_db);
      j["count"] = s.count;
      summary.push_back(j);
    }
    Json doc;
    doc["summary"] = summary;
    doc["missing"] = result.missing;
    doc["config"] = to_json(RunConfig{kSchemaVersion, spec});
    atomic_write(*output_dir / "summary.json", doc.dump(2) + "\n");
  }
  return result;
}

std::vector<std::size_t> ablation_subset(std::size_t pool, std::size_t size, std::uint64_t seed) {
  if (size == 0 || size > pool) throw ConfigError("ablation size must be in [1, pool size]", "sizes");
  std::vector<std::size_t> order(pool);
  std::iota(order.begin(), order.end(), std::size_t(0));
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  order.resize(size);
  std::sort(order.begin(), order.end());
  return order;
}

std::vector<AblationPoint> training_set_ablation(const ExperimentSpec& spec, const std::vector<std::size_t>& sizes,
                                                 std::uint64_t seed, const std::optional<fs::path>& output_dir) {
  spec.validate();
  if (sizes.empty()) throw ConfigError("no ablation sizes given", "sizes");
  const Dataset dataset = generate_dataset(spec.dataset, spec.scanner);
  const PreparedData data = prepare_data(dataset, spec.factors.front(), spec.snr_db, spec.seed);
  const std::vector<std::size_t> pool = indices_of(data, Split::kTrain);
  const std::vector<std::size_t> test = indices_of(data, Split::kTest);
  if (test.empty()) throw ConfigError("the dataset has no test matrices", "dataset");

  std::vector<AblationPoint> points;
  CsvTable csv({"size", "nrmse_pct", "training_ids"});
  for (std::size_t size : sizes) {
    std::vector<std::size_t> members;
    AblationPoint point;
    point.size = size;
    for (std::size_t i : ablation_subset(pool.size(), size, derive_seed(seed, 50, size))) {
      members.push_back(pool[i]);
      point.training_ids.push_back(data.entries[pool[i]].id);
    }
    const TrainResult tr = train_on(spec, data, "transms", members, spec.seed);
    std::vector<double> errors;
    for (std::size_t k : test)
      errors.push_back(100.0 * nrmse(super_resolve(tr.model, data.lr[k]).data, data.hr[k].data));
    point.nrmse_pct = mean_of(errors);
    log::info("ablation", "size=" + std::to_string(size) + " nrmse_pct=" + format_double(point.nrmse_pct));
    std::string ids;
    for (const auto& id : point.training_ids) ids += (ids.empty() ? "" : ";") + id;
    csv.add_row({std::to_string(size), format_double(point.nrmse_pct), ids});
    points.push_back(std::move(point));
  }
  if (output_dir) {
    fs::create_directories(*output_dir);
    atomic_write(*output_dir / "ablation.csv", csv.str());
  }
  return points;
}

}  // namespace transms
