#include "transms/config.hpp"

#include <set>

#include "transms/io.hpp"

namespace transms {

namespace {

using nlohmann::json;

std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

class Fields {
 public:
  Fields(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j.is_object()) throw ConfigError("'" + (path_.empty() ? "<root>" : path_) + "' must be an object", path_);
  }

  template <typename T>
  void opt(const char* key, T& dst) {
    used_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      dst = it->template get<T>();
    } catch (const json::exception& e) {
      throw ConfigError("bad value for '" + join(path_, key) + "': " + e.what(), join(path_, key));
    }
  }

  template <typename T>
  void opt(const char* key, std::optional<T>& dst) {
    used_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    if (it->is_null()) {
      dst.reset();
      return;
    }
    T v{};
    opt(key, v);
    dst = v;
  }

  /// Nested object read with its own reader.
  template <typename T>
  void nested(const char* key, T& dst) {
    used_.insert(key);
    auto it = j_.find(key);
    if (it != j_.end()) read_json(*it, dst, join(path_, key));
  }

  const json* raw(const char* key) {
    used_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  std::string path(const char* key) const { return join(path_, key); }

  void done() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!used_.count(it.key())) throw ConfigError("unknown key '" + join(path_, it.key()) + "'", join(path_, it.key()));
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> used_;
};

Json grid_json(Grid g) { return Json::array({g.width, g.height}); }

void read_grid(Fields& f, const char* key, Grid& g) {
  std::vector<Index> wh;
  if (const json* raw = f.raw(key)) {
    try {
      wh = raw->get<std::vector<Index>>();
    } catch (const json::exception&) {
    }
    if (wh.size() != 2) throw ConfigError("'" + f.path(key) + "' must be [width, height]", f.path(key));
    g = {wh[0], wh[1]};
  }
}

const char* kind_name(PhantomKind k) {
  switch (k) {
    case PhantomKind::kRectangles: return "rectangles";
    case PhantomKind::kTubes: return "tubes";
    case PhantomKind::kStenosis: return "stenosis";
  }
  return "?";
}

}  // namespace

Json to_json(const ScannerConfig& c) {
  Json j;
  j["fov_x_mm"] = c.fov_x_mm;
  j["fov_y_mm"] = c.fov_y_mm;
  j["grid"] = grid_json(c.grid);
  j["diameter_nm"] = c.diameter_nm;
  j["saturation_t"] = c.saturation_t;
  j["temperature_k"] = c.temperature_k;
  j["gradient_t_per_m"] = c.gradient_t_per_m;
  j["drive_frequency_hz"] = c.drive_frequency_hz;
  j["drive_amplitude_mt"] = c.drive_amplitude_mt ? Json(*c.drive_amplitude_mt) : Json(nullptr);
  j["sampling_rate_hz"] = c.sampling_rate_hz;
  j["angles_deg"] = c.angles_deg;
  j["harmonic_min"] = c.harmonic_min;
  j["harmonic_max"] = c.harmonic_max;
  j["periods"] = c.periods;
  j["bins_per_harmonic"] = c.bins_per_harmonic;
  j["supersampling"] = c.supersampling;
  j["concentration"] = c.concentration;
  j["seed"] = c.seed;
  return j;
}

void read_json(const json& j, ScannerConfig& c, const std::string& path) {
  Fields f(j, path);
  f.opt("fov_x_mm", c.fov_x_mm);
  f.opt("fov_y_mm", c.fov_y_mm);
  read_grid(f, "grid", c.grid);
  f.opt("diameter_nm", c.diameter_nm);
  f.opt("saturation_t", c.saturation_t);
  f.opt("temperature_k", c.temperature_k);
  f.opt("gradient_t_per_m", c.gradient_t_per_m);
  f.opt("drive_frequency_hz", c.drive_frequency_hz);
  f.opt("drive_amplitude_mt", c.drive_amplitude_mt);
  f.opt("sampling_rate_hz", c.sampling_rate_hz);
  if (const json* a = f.raw("angle_count")) {
    int n = 0;
    try {
      n = a->get<int>();
    } catch (const json::exception&) {
      throw ConfigError("'" + f.path("angle_count") + "' must be an integer", f.path("angle_count"));
    }
    c.angles_deg = ScannerConfig::default_angles(n);
  }
  f.opt("angles_deg", c.angles_deg);
  f.opt("harmonic_min", c.harmonic_min);
  f.opt("harmonic_max", c.harmonic_max);
  f.opt("periods", c.periods);
  f.opt("bins_per_harmonic", c.bins_per_harmonic);
  f.opt("supersampling", c.supersampling);
  f.opt("concentration", c.concentration);
  f.opt("seed", c.seed);
  f.done();
}

Json to_json(const DatasetSpec& d) {
  Json j;
  j["gradients_t_per_m"] = d.gradients_t_per_m;
  j["diameters_nm"] = d.diameters_nm;
  j["validation_gradients_t_per_m"] = d.validation_gradients_t_per_m;
  j["validation_diameters_nm"] = d.validation_diameters_nm;
  j["reserve_extremes"] = d.reserve_extremes;
  j["random_test"] = d.random_test;
  j["random_validation"] = d.random_validation;
  j["seed"] = d.seed;
  return j;
}

void read_json(const json& j, DatasetSpec& d, const std::string& path) {
  Fields f(j, path);
  if (const json* b = f.raw("benchmark")) {
    if (!b->is_boolean()) throw ConfigError("'" + f.path("benchmark") + "' must be a boolean", f.path("benchmark"));
    if (b->get<bool>()) d = benchmark_dataset_spec(d.seed);
  }
  f.opt("gradients_t_per_m", d.gradients_t_per_m);
  f.opt("diameters_nm", d.diameters_nm);
  f.opt("validation_gradients_t_per_m", d.validation_gradients_t_per_m);
  f.opt("validation_diameters_nm", d.validation_diameters_nm);
  f.opt("reserve_extremes", d.reserve_extremes);
  f.opt("random_test", d.random_test);
  f.opt("random_validation", d.random_validation);
  f.opt("seed", d.seed);
  f.done();
}

Json to_json(const TranSmsConfig& c) {
  Json j;
  j["factor"] = c.factor;
  j["c_1"] = c.c_1;
  j["c_c"] = c.c_c;
  j["n_rdb"] = c.n_rdb;
  j["n_cl"] = c.n_cl;
  j["n_gr"] = c.n_gr;
  j["c_t"] = c.c_t;
  j["n_a"] = c.n_a;
  j["c_cat"] = c.c_cat;
  j["strides"] = c.strides;
  j["scaled_attention"] = c.scaled_attention;
  j["variant"] = variant_name(c.variant);
  j["dc_enabled"] = c.dc_enabled;
  j["dc_mode"] = c.dc_mode == DcMode::kJoint ? "joint" : "split";
  return j;
}

void read_json(const json& j, TranSmsConfig& c, const std::string& path) {
  Fields f(j, path);
  if (const json* p = f.raw("preset")) {
    const std::string name = p->is_string() ? p->get<std::string>() : "";
    if (name == "toy") c = TranSmsConfig::toy(c.factor);
    else if (name == "paper") c = TranSmsConfig::paper(c.factor);
    else throw ConfigError("'" + f.path("preset") + "' must be \"toy\" or \"paper\"", f.path("preset"));
  }
  f.opt("factor", c.factor);
  f.opt("c_1", c.c_1);
  f.opt("c_c", c.c_c);
  f.opt("n_rdb", c.n_rdb);
  f.opt("n_cl", c.n_cl);
  f.opt("n_gr", c.n_gr);
  f.opt("c_t", c.c_t);
  f.opt("n_a", c.n_a);
  f.opt("c_cat", c.c_cat);
  f.opt("strides", c.strides);
  f.opt("scaled_attention", c.scaled_attention);
  if (const json* v = f.raw("variant")) {
    try {
      c.variant = parse_variant(v->get<std::string>());
    } catch (const std::exception& e) {
      throw ConfigError("bad value for '" + f.path("variant") + "': " + e.what(), f.path("variant"));
    }
  }
  f.opt("dc_enabled", c.dc_enabled);
  if (const json* m = f.raw("dc_mode")) {
    const std::string mode = m->is_string() ? m->get<std::string>() : "";
    if (mode == "joint") c.dc_mode = DcMode::kJoint;
    else if (mode == "split") c.dc_mode = DcMode::kSplit;
    else throw ConfigError("'" + f.path("dc_mode") + "' must be \"joint\" or \"split\"", f.path("dc_mode"));
  }
  f.done();
}

TranSmsConfig network_config_from_json(const json& j) {
  TranSmsConfig c;
  read_json(j, c, "config");
  c.validate();
  return c;
}

Json to_json(const TrainSettings& t) {
  Json j;
  j["epochs"] = t.epochs;
  j["batch_size"] = t.batch_size;
  j["learning_rate"] = t.adam.learning_rate;
  j["beta1"] = t.adam.beta1;
  j["beta2"] = t.adam.beta2;
  j["adam_epsilon"] = t.adam.epsilon;
  j["weight_decay"] = t.adam.weight_decay;
  j["halve_schedule"] = t.halve_schedule;
  j["seed"] = t.seed;
  return j;
}

void read_json(const json& j, TrainSettings& t, const std::string& path) {
  Fields f(j, path);
  f.opt("epochs", t.epochs);
  f.opt("batch_size", t.batch_size);
  f.opt("learning_rate", t.adam.learning_rate);
  f.opt("beta1", t.adam.beta1);
  f.opt("beta2", t.adam.beta2);
  f.opt("adam_epsilon", t.adam.epsilon);
  f.opt("weight_decay", t.adam.weight_decay);
  f.opt("halve_schedule", t.halve_schedule);
  f.opt("seed", t.seed);
  f.done();
}

Json to_json(const CsProblem& c) {
  Json j;
  j["mu"] = c.mu;
  j["iterations"] = c.iterations;
  j["pad"] = c.pad;
  j["normalize"] = c.normalize;
  return j;
}

void read_json(const json& j, CsProblem& c, const std::string& path) {
  Fields f(j, path);
  f.opt("mu", c.mu);
  f.opt("iterations", c.iterations);
  f.opt("pad", c.pad);
  f.opt("normalize", c.normalize);
  f.done();
}

Json to_json(const ReconSettings& r) {
  Json j;
  j["alpha_l1"] = r.alpha_l1;
  j["alpha_tv"] = r.alpha_tv;
  j["mu"] = r.mu;
  j["max_iterations"] = r.max_iterations;
  j["tolerance"] = r.tolerance;
  j["nonnegative"] = r.nonnegative;
  return j;
}

void read_json(const json& j, ReconSettings& r, const std::string& path) {
  Fields f(j, path);
  f.opt("alpha_l1", r.alpha_l1);
  f.opt("alpha_tv", r.alpha_tv);
  f.opt("mu", r.mu);
  f.opt("max_iterations", r.max_iterations);
  f.opt("tolerance", r.tolerance);
  f.opt("nonnegative", r.nonnegative);
  f.done();
}

Json to_json(const PhantomSpec& p) {
  Json j;
  j["kind"] = kind_name(p.kind);
  Json rects = Json::array();
  for (const Rect& r : p.rects) rects.push_back(Json::array({r.x0_mm, r.y0_mm, r.x1_mm, r.y1_mm}));
  j["rects"] = rects;
  j["tube_widths_mm"] = p.tube_widths_mm;
  j["length_mm"] = p.length_mm;
  j["spacing_mm"] = p.spacing_mm;
  j["width_mm"] = p.width_mm;
  j["stenosis_width_mm"] = p.stenosis_width_mm;
  j["stenosis_length_mm"] = p.stenosis_length_mm;
  return j;
}

void read_json(const json& j, PhantomSpec& p, const std::string& path) {
  Fields f(j, path);
  if (const json* k = f.raw("kind")) {
    const std::string name = k->is_string() ? k->get<std::string>() : "";
    if (name == "rectangles") p.kind = PhantomKind::kRectangles;
    else if (name == "tubes") p.kind = PhantomKind::kTubes;
    else if (name == "stenosis") p.kind = PhantomKind::kStenosis;
    else throw ConfigError("'" + f.path("kind") + "' must be rectangles, tubes or stenosis", f.path("kind"));
  }
  if (const json* rs = f.raw("rects")) {
    p.rects.clear();
    try {
      for (const auto& r : *rs) {
        const auto v = r.get<std::vector<double>>();
        if (v.size() != 4) throw ConfigError("each rect is [x0, y0, x1, y1]", f.path("rects"));
        p.rects.push_back({v[0], v[1], v[2], v[3]});
      }
    } catch (const json::exception& e) {
      throw ConfigError("bad value for '" + f.path("rects") + "': " + e.what(), f.path("rects"));
    }
  }
  f.opt("tube_widths_mm", p.tube_widths_mm);
  f.opt("length_mm", p.length_mm);
  f.opt("spacing_mm", p.spacing_mm);
  f.opt("width_mm", p.width_mm);
  f.opt("stenosis_width_mm", p.stenosis_width_mm);
  f.opt("stenosis_length_mm", p.stenosis_length_mm);
  f.done();
}

Json to_json(const ExperimentSpec& e) {
  Json j;
  j["seed"] = e.seed;
  j["scanner"] = to_json(e.scanner);
  j["dataset"] = to_json(e.dataset);
  j["factors"] = e.factors;
  j["methods"] = e.methods;
  j["snr_db"] = e.snr_db ? Json(*e.snr_db) : Json(nullptr);
  j["network"] = to_json(e.network);
  j["training"] = to_json(e.training);
  j["augment_flips"] = e.augment_flips;
  j["cs"] = to_json(e.cs);
  j["reconstruct"] = e.reconstruct;
  j["recon"] = to_json(e.recon);
  j["phantom"] = to_json(e.phantom);
  j["record_runtime"] = e.record_runtime;
  return j;
}

void read_json(const json& j, ExperimentSpec& e, const std::string& path) {
  Fields f(j, path);
  f.opt("seed", e.seed);
  f.nested("scanner", e.scanner);
  f.nested("dataset", e.dataset);
  f.opt("factors", e.factors);
  f.opt("methods", e.methods);
  f.opt("snr_db", e.snr_db);
  f.nested("network", e.network);
  f.nested("training", e.training);
  f.opt("augment_flips", e.augment_flips);
  f.nested("cs", e.cs);
  f.opt("reconstruct", e.reconstruct);
  f.nested("recon", e.recon);
  f.nested("phantom", e.phantom);
  f.opt("record_runtime", e.record_runtime);
  f.raw("schema_version");
  f.done();
}

Json to_json(const RunConfig& r) {
  Json j;
  j["schema_version"] = r.schema_version;
  const Json body = to_json(r.experiment);
  for (auto it = body.begin(); it != body.end(); ++it) j[it.key()] = *it;
  return j;
}

void read_json(const json& j, RunConfig& r) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  auto it = j.find("schema_version");
  if (it == j.end()) throw ConfigError("missing 'schema_version'", "schema_version");
  if (!it->is_number_integer() || it->get<int>() != kSchemaVersion)
    throw ConfigError("unsupported schema_version (expected " + std::to_string(kSchemaVersion) + ")", "schema_version");
  r.schema_version = kSchemaVersion;
  read_json(j, r.experiment, "");
}

RunConfig parse_run_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  RunConfig r;
  read_json(j, r);
  r.experiment.validate();
  return r;
}

RunConfig load_run_config(const std::filesystem::path& path) { return parse_run_config(read_file(path)); }

std::string dump_run_config(const RunConfig& config) { return to_json(config).dump(2) + "\n"; }

}  // namespace transms
