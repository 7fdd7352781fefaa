#pragma once

#include <Eigen/Dense>
#include <zlib.h>

#include <array>
#include <bit>
#include <charconv>
#include <chrono>
#include <cstdint>
#include <cstring>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mbgl/analysis.hpp"
#include "mbgl/error.hpp"
#include "mbgl/types.hpp"

namespace mbgl::io {

namespace fs = std::filesystem;

/// In-memory form of a matrix file: dims (2 or 3) and a first-index-fastest
/// payload.
struct NdArray {
  std::vector<std::uint64_t> dims;
  std::vector<double> data;

  std::uint64_t element_count() const {
    std::uint64_t count = 1;
    for (auto d : dims) count *= d;
    return count;
  }
};

// Layout: "MBGL" | u16 version = 1 | u8 dtype = 1 (float64 LE) | u8 ndims |
// ndims x u64 dims | float64 payload | u32 CRC-32 of the payload bytes.
// All integers little-endian.
inline constexpr std::array<char, 4> kMagic{'M', 'B', 'G', 'L'};
inline constexpr std::uint16_t kFormatVersion = 1;
inline constexpr std::uint8_t kDtypeFloat64 = 1;

namespace detail {

template <class T>
void put_le(std::string& out, T value) {
  static_assert(std::is_unsigned_v<T>);
  for (std::size_t b = 0; b < sizeof(T); ++b) out.push_back(char((value >> (8 * b)) & 0xFFu));
}

template <class T>
T get_le(std::string_view bytes, std::size_t& pos) {
  if (pos + sizeof(T) > bytes.size()) fail(ErrorCode::CorruptFile, "matrix file is truncated");
  T value = 0;
  for (std::size_t b = 0; b < sizeof(T); ++b)
    value |= T(static_cast<unsigned char>(bytes[pos + b])) << (8 * b);
  pos += sizeof(T);
  return value;
}

inline std::uint32_t crc32_of(std::string_view bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  std::size_t pos = 0;
  while (pos < bytes.size()) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(bytes.size() - pos, 1u << 30));
    crc = crc32(crc, reinterpret_cast<const Bytef*>(bytes.data() + pos), chunk);
    pos += chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

}  // namespace detail

inline std::string encode_matrix(const NdArray& array) {
  require(array.dims.size() == 2 || array.dims.size() == 3, ErrorCode::InvalidArgument,
          "matrix files hold 2 or 3 dimensions");
  require(array.element_count() == array.data.size(), ErrorCode::DimensionMismatch,
          "payload size does not match dims");
  std::string out(kMagic.begin(), kMagic.end());
  detail::put_le(out, kFormatVersion);
  detail::put_le(out, kDtypeFloat64);
  detail::put_le(out, static_cast<std::uint8_t>(array.dims.size()));
  for (auto d : array.dims) detail::put_le(out, d);
  const std::size_t payload_start = out.size();
  for (double v : array.data) detail::put_le(out, std::bit_cast<std::uint64_t>(v));
  const auto crc = detail::crc32_of(std::string_view(out).substr(payload_start));
  detail::put_le(out, crc);
  return out;
}

inline NdArray decode_matrix(std::string_view bytes) {
  if (bytes.size() < 8 || !std::equal(kMagic.begin(), kMagic.end(), bytes.begin()))
    fail(ErrorCode::CorruptFile, "missing MBGL magic");
  std::size_t pos = 4;
  const auto version = detail::get_le<std::uint16_t>(bytes, pos);
  require(version == kFormatVersion, ErrorCode::CorruptFile,
          "unsupported format version " + std::to_string(version));
  const auto dtype = detail::get_le<std::uint8_t>(bytes, pos);
  require(dtype == kDtypeFloat64, ErrorCode::CorruptFile, "unsupported dtype " + std::to_string(dtype));
  const auto ndims = detail::get_le<std::uint8_t>(bytes, pos);
  require(ndims == 2 || ndims == 3, ErrorCode::CorruptFile, "unsupported ndims " + std::to_string(ndims));
  NdArray array;
  for (int d = 0; d < ndims; ++d) array.dims.push_back(detail::get_le<std::uint64_t>(bytes, pos));
  const auto count = array.element_count();
  require(bytes.size() - pos == count * 8 + 4, ErrorCode::CorruptFile,
          "payload length does not match dims");
  const auto payload = bytes.substr(pos, count * 8);
  array.data.resize(count);
  for (std::uint64_t k = 0; k < count; ++k)
    array.data[k] = std::bit_cast<double>(detail::get_le<std::uint64_t>(bytes, pos));
  const auto stored = detail::get_le<std::uint32_t>(bytes, pos);
  if (stored != detail::crc32_of(payload))
    fail(ErrorCode::ChecksumMismatch, "payload CRC-32 does not match the stored checksum");
  return array;
}

inline std::string read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::Io, "cannot open " + path.string());
  return std::string(std::istreambuf_iterator<char>(in), {});
}

inline void write_bytes(const fs::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::Io, "cannot write " + path.string());
  out.write(bytes.data(), std::streamsize(bytes.size()));
  if (!out) fail(ErrorCode::Io, "write failed for " + path.string());
}

inline NdArray read_matrix_file(const fs::path& path) {
  try {
    return decode_matrix(read_bytes(path));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::Io) throw;
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

inline void write_matrix_file(const fs::path& path, const NdArray& array) {
  write_bytes(path, encode_matrix(array));
}

// Conversions between arrays and domain types.

inline NdArray from_matrix(const Matrix& m) {
  NdArray a{{std::uint64_t(m.rows()), std::uint64_t(m.cols())}, {}};
  a.data.assign(m.data(), m.data() + m.size());
  return a;
}

inline Matrix to_matrix(const NdArray& a) {
  require(a.dims.size() == 2, ErrorCode::DimensionMismatch, "expected a 2-D matrix file");
  return Eigen::Map<const Matrix>(a.data.data(), idx(a.dims[0]), idx(a.dims[1]));
}

inline NdArray from_dataset(const Dataset& d) {
  return NdArray{{d.n_vars(), d.n_locations(), d.n_realizations()}, d.values()};
}

inline Dataset to_dataset(const NdArray& a, Matrix locations = {},
                          std::vector<std::string> names = {}) {
  require(a.dims.size() == 3, ErrorCode::DimensionMismatch,
          "dataset files are p x n x m (3-D)");
  return Dataset(a.dims[0], a.dims[1], a.dims[2], a.data, std::move(locations), std::move(names));
}

inline NdArray from_blocks(const PrecisionBlockSet& q) {
  const auto p = q.p();
  NdArray a{{p, p, q.levels()}, {}};
  a.data.reserve(p * p * q.levels());
  for (const auto& b : q.blocks()) a.data.insert(a.data.end(), b.data(), b.data() + b.size());
  return a;
}

inline PrecisionBlockSet to_blocks(const NdArray& a) {
  require(a.dims.size() == 3 && a.dims[0] == a.dims[1], ErrorCode::DimensionMismatch,
          "precision files are p x p x L");
  const auto p = idx(a.dims[0]);
  std::vector<Matrix> blocks;
  for (std::uint64_t l = 0; l < a.dims[2]; ++l)
    blocks.emplace_back(Eigen::Map<const Matrix>(a.data.data() + l * p * p, p, p));
  return PrecisionBlockSet(std::move(blocks));
}

// Text helpers.

inline std::string format_double(double v) {
  std::array<char, 32> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), ptr);
}

inline double parse_double(std::string_view text) {
  while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
  while (!text.empty() && (text.back() == ' ' || text.back() == '\t' || text.back() == '\r'))
    text.remove_suffix(1);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size())
    fail(ErrorCode::InvalidArgument, "cannot parse number '" + std::string(text) + "'");
  return v;
}

inline std::vector<std::string> read_lines(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::Io, "cannot open " + path.string());
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

inline void write_text(const fs::path& path, const std::string& text) { write_bytes(path, text); }

inline std::string to_csv(const Matrix& m) {
  std::string out;
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (c) out.push_back(',');
      out += format_double(m(r, c));
    }
    out.push_back('\n');
  }
  return out;
}

inline Matrix read_csv(const fs::path& path) {
  std::vector<std::vector<double>> rows;
  for (const auto& line : read_lines(path)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::string_view rest(line);
    for (;;) {
      const auto comma = rest.find(',');
      row.push_back(parse_double(rest.substr(0, comma)));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (!rows.empty() && row.size() != rows.front().size())
      fail(ErrorCode::InvalidArgument, path.string() + ": ragged CSV rows");
    rows.push_back(std::move(row));
  }
  require(!rows.empty(), ErrorCode::InvalidArgument, path.string() + ": empty CSV");
  Matrix m(idx(rows.size()), idx(rows.front().size()));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < rows[r].size(); ++c) m(idx(r), idx(c)) = rows[r][c];
  return m;
}

/// Ordered key=value text.
class Manifest {
 public:
  void set(const std::string& key, const std::string& value) {
    for (auto& [k, v] : entries_) {
      if (k == key) {
        v = value;
        return;
      }
    }
    entries_.emplace_back(key, value);
  }

  std::optional<std::string> get(const std::string& key) const {
    for (const auto& [k, v] : entries_)
      if (k == key) return v;
    return std::nullopt;
  }

  std::string require_key(const std::string& key) const {
    auto v = get(key);
    if (!v) fail(ErrorCode::CorruptFile, "manifest is missing '" + key + "'");
    return *v;
  }

  std::string str() const {
    std::string out;
    for (const auto& [k, v] : entries_) out += k + "=" + v + "\n";
    return out;
  }

  static Manifest parse(const std::vector<std::string>& lines) {
    Manifest m;
    for (const auto& line : lines) {
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos) fail(ErrorCode::CorruptFile, "malformed manifest line '" + line + "'");
      m.entries_.emplace_back(line.substr(0, eq), line.substr(eq + 1));
    }
    return m;
  }

  const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline constexpr const char* kToolVersion = "0.1.0";

// Model archive: a directory of matrix files plus names and manifest.

struct ModelArchive {
  FittedModel model;
  Manifest manifest;
};

namespace files {
inline constexpr const char* kBasis = "basis.mbgl";
inline constexpr const char* kBlocks = "blocks.mbgl";
inline constexpr const char* kNoise = "noise.mbgl";
inline constexpr const char* kPixelMean = "pixel_mean.mbgl";
inline constexpr const char* kPixelSd = "pixel_sd.mbgl";
inline constexpr const char* kVariables = "variables.txt";
inline constexpr const char* kManifest = "manifest.txt";
inline constexpr const char* kVarianceFraction = "variance_fraction.csv";
}  // namespace files

inline void save_standardization(const fs::path& dir, const StandardizationFields& fields) {
  write_matrix_file(dir / files::kPixelMean, from_matrix(fields.pixel_mean));
  write_matrix_file(dir / files::kPixelSd, from_matrix(fields.pixel_sd));
}

inline std::optional<StandardizationFields> load_standardization(const fs::path& dir) {
  const bool has_mean = fs::exists(dir / files::kPixelMean);
  const bool has_sd = fs::exists(dir / files::kPixelSd);
  if (!has_mean && !has_sd) return std::nullopt;
  require(has_mean && has_sd, ErrorCode::CorruptFile, "standardization fields are incomplete");
  StandardizationFields fields{to_matrix(read_matrix_file(dir / files::kPixelMean)),
                               to_matrix(read_matrix_file(dir / files::kPixelSd))};
  require(fields.pixel_mean.rows() == fields.pixel_sd.rows() &&
              fields.pixel_mean.cols() == fields.pixel_sd.cols(),
          ErrorCode::CorruptFile, "standardization fields differ in shape");
  require((fields.pixel_sd.array() > 0.0).all(), ErrorCode::CorruptFile,
          "pixel standard deviations must be positive");
  return fields;
}

inline void save_model_archive(const fs::path& dir, const ModelArchive& archive) {
  const FittedModel& model = archive.model;
  model.validate();
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(ErrorCode::Io, "cannot create " + dir.string() + ": " + ec.message());
  write_matrix_file(dir / files::kBasis, from_matrix(model.basis.phi));
  write_matrix_file(dir / files::kBlocks, from_blocks(model.q));
  write_matrix_file(dir / files::kNoise, from_matrix(model.noise.tau_sq()));
  if (model.standardization) save_standardization(dir, *model.standardization);
  std::string names;
  for (const auto& name : model.variable_names) names += name + "\n";
  write_text(dir / files::kVariables, names);

  Manifest manifest = archive.manifest;
  manifest.set("p", std::to_string(model.p()));
  manifest.set("L", std::to_string(model.levels()));
  manifest.set("n", std::to_string(model.n_locations()));
  write_text(dir / files::kManifest, manifest.str());
}

inline ModelArchive load_model_archive(const fs::path& dir) {
  require(fs::is_directory(dir), ErrorCode::Io, dir.string() + " is not a model directory");
  ModelArchive archive;
  archive.manifest = Manifest::parse(read_lines(dir / files::kManifest));
  FittedModel& model = archive.model;
  model.basis = BasisMatrix{to_matrix(read_matrix_file(dir / files::kBasis)), {}};
  model.q = to_blocks(read_matrix_file(dir / files::kBlocks));
  const Matrix tau = to_matrix(read_matrix_file(dir / files::kNoise));
  require(tau.cols() == 1, ErrorCode::CorruptFile, "noise file must be p x 1");
  model.noise = NoiseModel(tau.col(0));
  model.standardization = load_standardization(dir);
  for (const auto& line : read_lines(dir / files::kVariables))
    if (!line.empty()) model.variable_names.push_back(line);

  const auto check = [&](const char* key, std::size_t actual) {
    require(archive.manifest.require_key(key) == std::to_string(actual), ErrorCode::CorruptFile,
            std::string("manifest ") + key + " does not match the stored arrays");
  };
  check("p", model.p());
  check("L", model.levels());
  check("n", model.n_locations());
  model.validate();
  return archive;
}

// Basis directory written by the `basis` command.

struct BasisArchive {
  BasisMatrix basis;
  std::optional<StandardizationFields> standardization;
};

inline void save_basis_dir(const fs::path& dir, const BasisArchive& archive) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(ErrorCode::Io, "cannot create " + dir.string() + ": " + ec.message());
  write_matrix_file(dir / files::kBasis, from_matrix(archive.basis.phi));
  if (archive.standardization) save_standardization(dir, *archive.standardization);
  if (!archive.basis.variance_fraction.empty()) {
    std::string table = "level,cumulative_variance_fraction\n";
    for (std::size_t l = 0; l < archive.basis.variance_fraction.size(); ++l)
      table += std::to_string(l + 1) + "," + format_double(archive.basis.variance_fraction[l]) + "\n";
    write_text(dir / files::kVarianceFraction, table);
  }
}

inline BasisArchive load_basis_dir(const fs::path& dir) {
  require(fs::is_directory(dir), ErrorCode::Io, dir.string() + " is not a basis directory");
  BasisArchive archive;
  archive.basis = validate_basis(to_matrix(read_matrix_file(dir / files::kBasis)));
  if (fs::exists(dir / files::kVarianceFraction)) {
    const auto lines = read_lines(dir / files::kVarianceFraction);
    for (std::size_t k = 1; k < lines.size(); ++k) {
      if (lines[k].empty()) continue;
      const auto comma = lines[k].find(',');
      archive.basis.variance_fraction.push_back(parse_double(std::string_view(lines[k]).substr(comma + 1)));
    }
  }
  archive.standardization = load_standardization(dir);
  return archive;
}

}  // namespace mbgl::io
