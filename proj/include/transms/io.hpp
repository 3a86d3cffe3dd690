#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "transms/network.hpp"
#include "transms/system_matrix.hpp"

namespace transms {

namespace fs = std::filesystem;

/// Writes through a temporary file in the same directory and renames it
/// into place, so readers never observe a partial file.
void atomic_write(const fs::path& path, const std::string& bytes);
std::string read_file(const fs::path& path);

/// SMX1 container: magic, little-endian u64 M, N, W, H, u32 flags, then per
/// row (i64 harmonic, f64 angle, f64 sigma, f64 snr), then M*N interleaved
/// (re, im) f64 pairs, row-major.
std::string encode_smx(const SystemMatrix& sm);
SystemMatrix decode_smx(const std::string& bytes);
void write_smx(const fs::path& path, const SystemMatrix& sm);
SystemMatrix read_smx(const fs::path& path);

struct TrainingRecord {
  std::vector<double> train_loss;
  std::vector<double> validation_loss;
  int best_epoch = -1;
  bool diverged = false;
  std::uint64_t seed = 0;

  bool operator==(const TrainingRecord&) const = default;
};

/// Checkpoint container: magic "TMSCKPT1", u64 header length, JSON header
/// (format version, network config, training record, tensor directory),
/// then the raw little-endian f64 payload of every tensor in directory order.
std::string encode_checkpoint(const TranSmsModel& model, const TrainingRecord& record);
TranSmsModel decode_checkpoint(const std::string& bytes, TrainingRecord* record = nullptr);
void write_checkpoint(const fs::path& path, const TranSmsModel& model, const TrainingRecord& record = {});
TranSmsModel read_checkpoint(const fs::path& path, TrainingRecord* record = nullptr);

/// Binary 16-bit PGM (P5, maxval 65535). Values are mapped linearly from
/// [lo, hi] to [0, 65535] and clipped.
std::string encode_pgm(const VectorXd& image, Grid grid, double lo, double hi);
void write_pgm(const fs::path& path, const VectorXd& image, Grid grid, double lo, double hi);
/// Same with lo/hi taken from the image range.
void write_pgm(const fs::path& path, const VectorXd& image, Grid grid);

/// Minimal CSV writer: fields containing a comma, quote or newline are quoted.
class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header);
  void add_row(std::vector<std::string> fields);
  std::string str() const;
  const std::vector<std::vector<std::string>>& rows() const { return rows_; }

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

/// Shortest round-trip decimal form of a double.
std::string format_double(double v);

/// Image on a grid as CSV, one line per image row.
std::string image_csv(const VectorXd& image, Grid grid);

}  // namespace transms
