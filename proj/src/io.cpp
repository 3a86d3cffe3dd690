#include "transms/io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>

#include <json.hpp>

#include "transms/config.hpp"

namespace transms {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

namespace {

constexpr char kSmxMagic[4] = {'S', 'M', 'X', '1'};
constexpr char kCkptMagic[8] = {'T', 'M', 'S', 'C', 'K', 'P', 'T', '1'};
constexpr int kCheckpointVersion = 1;

template <typename T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

class Cursor {
 public:
  Cursor(const std::string& bytes, const char* what) : bytes_(bytes), what_(what) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  void read(void* dst, std::size_t n) {
    need(n);
    std::memcpy(dst, bytes_.data() + pos_, n);
    pos_ += n;
  }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw FormatError(std::string(what_) + ": file is truncated");
  }
  const std::string& bytes_;
  const char* what_;
  std::size_t pos_ = 0;
};

}  // namespace

void atomic_write(const fs::path& path, const std::string& bytes) {
  const fs::path dir = path.has_parent_path() ? path.parent_path() : fs::path(".");
  fs::create_directories(dir);
  std::random_device rd;
  const fs::path tmp = dir / ("." + path.filename().string() + ".tmp" + std::to_string(rd()));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out.write(bytes.data(), std::streamsize(bytes.size()));
    out.flush();
    if (!out) {
      std::error_code ec;
      fs::remove(tmp, ec);
      throw IoError("write failed: " + path.string());
    }
  }
  fs::rename(tmp, path);
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string encode_smx(const SystemMatrix& sm) {
  sm.validate();
  std::string out(kSmxMagic, 4);
  put<std::uint64_t>(out, std::uint64_t(sm.row_count()));
  put<std::uint64_t>(out, std::uint64_t(sm.voxel_count()));
  put<std::uint64_t>(out, std::uint64_t(sm.grid.width));
  put<std::uint64_t>(out, std::uint64_t(sm.grid.height));
  put<std::uint32_t>(out, sm.flags);
  for (const RowInfo& r : sm.rows) {
    put<std::int64_t>(out, r.harmonic);
    put<double>(out, r.angle_deg);
    put<double>(out, r.sigma);
    put<double>(out, r.snr);
  }
  const std::size_t payload = std::size_t(sm.data.size()) * 16;
  const std::size_t at = out.size();
  out.resize(at + payload);
  std::memcpy(out.data() + at, sm.data.data(), payload);
  return out;
}

SystemMatrix decode_smx(const std::string& bytes) {
  Cursor c(bytes, "smx");
  char magic[4];
  c.read(magic, 4);
  if (std::memcmp(magic, kSmxMagic, 4) != 0) throw FormatError("smx: bad magic (expected SMX1)");
  const auto m = c.get<std::uint64_t>(), n = c.get<std::uint64_t>();
  const auto w = c.get<std::uint64_t>(), h = c.get<std::uint64_t>();
  const auto flags = c.get<std::uint32_t>();
  if (w * h != n) throw FormatError("smx: header N differs from W * H");
  if (m > (1ull << 40) || n > (1ull << 40)) throw FormatError("smx: implausible dimensions");
  if (c.remaining() != m * 32 + m * n * 16) throw FormatError("smx: payload size does not match the header");
  SystemMatrix sm({Index(w), Index(h)}, Index(m));
  sm.flags = flags;
  for (RowInfo& r : sm.rows) {
    r.harmonic = c.get<std::int64_t>();
    r.angle_deg = c.get<double>();
    r.sigma = c.get<double>();
    r.snr = c.get<double>();
  }
  c.read(sm.data.data(), std::size_t(m * n * 16));
  return sm;
}

void write_smx(const fs::path& path, const SystemMatrix& sm) { atomic_write(path, encode_smx(sm)); }
SystemMatrix read_smx(const fs::path& path) { return decode_smx(read_file(path)); }

std::string encode_checkpoint(const TranSmsModel& model, const TrainingRecord& record) {
  audit_parameters(model);
  nlohmann::ordered_json header;
  header["format_version"] = kCheckpointVersion;
  header["config"] = to_json(model.config);
  header["training"] = {{"train_loss", record.train_loss},
                        {"validation_loss", record.validation_loss},
                        {"best_epoch", record.best_epoch},
                        {"diverged", record.diverged},
                        {"seed", record.seed}};
  nlohmann::ordered_json dir = nlohmann::ordered_json::array();
  std::uint64_t offset = 0;
  std::string payload;
  auto add = [&](const std::string& name, const Shape& shape, const VectorXd& data) {
    dir.push_back({{"name", name}, {"shape", shape}, {"dtype", "f64"}, {"offset", offset}});
    const std::size_t bytes = std::size_t(data.size()) * 8;
    payload.append(reinterpret_cast<const char*>(data.data()), bytes);
    offset += bytes;
  };
  for (std::size_t i = 0; i < model.params.size(); ++i)
    add(model.params.name(i), model.params.value(i).shape(), model.params.value(i).data());
  for (const auto& [name, stats] : model.batch_norm) {
    add(name + ".running_mean", {stats.running_mean.size()}, stats.running_mean);
    add(name + ".running_var", {stats.running_var.size()}, stats.running_var);
  }
  header["tensors"] = dir;
  // NaN losses are not representable in JSON; they are stored as null.
  const std::string text = header.dump();
  std::string out(kCkptMagic, 8);
  put<std::uint64_t>(out, text.size());
  out += text;
  out += payload;
  return out;
}

TranSmsModel decode_checkpoint(const std::string& bytes, TrainingRecord* record) {
  Cursor c(bytes, "checkpoint");
  char magic[8];
  c.read(magic, 8);
  if (std::memcmp(magic, kCkptMagic, 8) != 0) throw FormatError("checkpoint: bad magic");
  const auto len = c.get<std::uint64_t>();
  if (len > c.remaining()) throw FormatError("checkpoint: header is truncated");
  std::string text(len, '\0');
  c.read(text.data(), len);
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint: bad header: ") + e.what());
  }
  if (header.value("format_version", -1) != kCheckpointVersion)
    throw FormatError("checkpoint: unsupported format version");
  const std::size_t payload_at = 16 + len;
  TranSmsModel model = init_model(network_config_from_json(header.at("config")), 0);
  std::map<std::string, bool> seen;
  try {
    for (const auto& t : header.at("tensors")) {
      const std::string name = t.at("name");
      const Shape shape = t.at("shape").get<Shape>();
      const std::uint64_t offset = t.at("offset");
      if (t.at("dtype") != "f64") throw FormatError("checkpoint: unsupported dtype for " + name);
      const Index count = shape_size(shape);
      if (payload_at + offset + std::uint64_t(count) * 8 > bytes.size())
        throw FormatError("checkpoint: tensor " + name + " runs past the end of the file");
      VectorXd data(count);
      std::memcpy(data.data(), bytes.data() + payload_at + offset, std::size_t(count) * 8);
      seen[name] = true;
      const auto suffix = [&](const char* s) {
        const std::string tail(s);
        return name.size() > tail.size() && name.compare(name.size() - tail.size(), tail.size(), tail) == 0;
      };
      if (model.params.contains(name)) {
        if (model.params[name].shape() != shape)
          throw ShapeError("checkpoint: " + name + " has shape " + shape_string(shape) + ", expected " +
                           shape_string(model.params[name].shape()));
        model.params[name].data() = data;
      } else if (suffix(".running_mean") || suffix(".running_var")) {
        const bool mean = suffix(".running_mean");
        const std::string bn = name.substr(0, name.size() - (mean ? 13 : 12));
        auto it = model.batch_norm.find(bn);
        if (it == model.batch_norm.end() || it->second.running_mean.size() != count)
          throw ShapeError("checkpoint: unexpected batch-norm buffer " + name);
        (mean ? it->second.running_mean : it->second.running_var) = data;
      } else {
        throw ShapeError("checkpoint: unknown tensor " + name);
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint: bad tensor directory: ") + e.what());
  }
  for (std::size_t i = 0; i < model.params.size(); ++i)
    if (!seen.count(model.params.name(i))) throw FormatError("checkpoint: missing tensor " + model.params.name(i));
  if (!model.params.all_finite()) throw NumericError("checkpoint: non-finite parameters");
  if (record) {
    const auto& tr = header.at("training");
    auto losses = [](const nlohmann::json& arr) {
      std::vector<double> v;
      for (const auto& x : arr) v.push_back(x.is_null() ? std::nan("") : x.get<double>());
      return v;
    };
    record->train_loss = losses(tr.at("train_loss"));
    record->validation_loss = losses(tr.at("validation_loss"));
    record->best_epoch = tr.at("best_epoch");
    record->diverged = tr.at("diverged");
    record->seed = tr.at("seed");
  }
  return model;
}

void write_checkpoint(const fs::path& path, const TranSmsModel& model, const TrainingRecord& record) {
  atomic_write(path, encode_checkpoint(model, record));
}

TranSmsModel read_checkpoint(const fs::path& path, TrainingRecord* record) {
  return decode_checkpoint(read_file(path), record);
}

std::string encode_pgm(const VectorXd& image, Grid grid, double lo, double hi) {
  if (image.size() != grid.size()) throw ShapeError("pgm: image does not match grid");
  std::string out = "P5\n" + std::to_string(grid.width) + " " + std::to_string(grid.height) + "\n65535\n";
  const double span = hi > lo ? hi - lo : 1.0;
  for (Index i = 0; i < image.size(); ++i) {
    const double t = std::clamp((image[i] - lo) / span, 0.0, 1.0);
    const auto v = std::uint16_t(std::lround(t * 65535.0));
    out.push_back(char(v >> 8));
    out.push_back(char(v & 0xff));
  }
  return out;
}

void write_pgm(const fs::path& path, const VectorXd& image, Grid grid, double lo, double hi) {
  atomic_write(path, encode_pgm(image, grid, lo, hi));
}

void write_pgm(const fs::path& path, const VectorXd& image, Grid grid) {
  write_pgm(path, image, grid, image.size() ? image.minCoeff() : 0.0, image.size() ? image.maxCoeff() : 1.0);
}

CsvTable::CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

void CsvTable::add_row(std::vector<std::string> fields) {
  if (fields.size() != header_.size()) throw ShapeError("csv: row width differs from header");
  rows_.push_back(std::move(fields));
}

std::string CsvTable::str() const {
  auto line = [](const std::vector<std::string>& fields) {
    std::string out;
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i) out += ',';
      const std::string& f = fields[i];
      if (f.find_first_of(",\"\n") == std::string::npos) {
        out += f;
      } else {
        out += '"';
        for (char ch : f) out += ch == '"' ? std::string("\"\"") : std::string(1, ch);
        out += '"';
      }
    }
    return out + "\n";
  };
  std::string out = line(header_);
  for (const auto& r : rows_) out += line(r);
  return out;
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  for (int precision = 6; precision <= 17; ++precision) {
    std::snprintf(buf, sizeof buf, "%.*g", precision, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

std::string image_csv(const VectorXd& image, Grid grid) {
  if (image.size() != grid.size()) throw ShapeError("csv: image does not match grid");
  std::string out;
  for (Index y = 0; y < grid.height; ++y) {
    for (Index x = 0; x < grid.width; ++x) {
      if (x) out += ',';
      out += format_double(image[y * grid.width + x]);
    }
    out += '\n';
  }
  return out;
}

}  // namespace transms
