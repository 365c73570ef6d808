#include "dmia/dataset_io.h"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>
#include <vector>

#include "dmia/errors.h"

namespace dmia {

namespace {

constexpr char kMagic[4] = {'D', 'M', 'I', 'A'};
constexpr std::uint32_t kBinVersion = 1;

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

double parse_double(std::string_view field, std::size_t line_no) {
  double v = 0.0;
  const char* begin = field.data();
  const char* end = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(begin, end, v);
  if (field.empty() || ec != std::errc() || ptr != end || !std::isfinite(v)) {
    throw DataError(DataErrorCode::kBadNumber,
                    "line " + std::to_string(line_no) + ": '" + std::string(field) + "'");
  }
  return v;
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint32_t get_u32(std::string_view bytes, std::size_t offset) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) {
    v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[offset + i])) << (8 * i);
  }
  return v;
}

}  // namespace

std::optional<DatasetFormat> parse_format(std::string_view name) {
  if (name == "csv") return DatasetFormat::kCsv;
  if (name == "f32bin") return DatasetFormat::kF32Bin;
  return std::nullopt;
}

std::string_view format_name(DatasetFormat f) {
  return f == DatasetFormat::kCsv ? "csv" : "f32bin";
}

std::string_view format_extension(DatasetFormat f) {
  return f == DatasetFormat::kCsv ? ".csv" : ".f32bin";
}

Matrix parse_csv(std::string_view text) {
  std::vector<std::string_view> lines;
  for (auto line : split(text, '\n')) {
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
  }
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  if (lines.empty()) throw DataError(DataErrorCode::kMalformedHeader, "empty file");

  const auto header = split(lines[0], ',');
  for (std::size_t j = 0; j < header.size(); ++j) {
    if (header[j] != "f" + std::to_string(j)) {
      throw DataError(DataErrorCode::kMalformedHeader,
                      "expected column 'f" + std::to_string(j) + "', got '" +
                          std::string(header[j]) + "'");
    }
  }
  const auto cols = static_cast<Index>(header.size());
  Matrix m(static_cast<Index>(lines.size() - 1), cols);
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto fields = split(lines[i], ',');
    if (static_cast<Index>(fields.size()) != cols) {
      throw DataError(DataErrorCode::kRaggedRow,
                      "line " + std::to_string(i + 1) + " has " + std::to_string(fields.size()) +
                          " fields, expected " + std::to_string(cols));
    }
    for (Index j = 0; j < cols; ++j) {
      m(static_cast<Index>(i - 1), j) = parse_double(fields[static_cast<std::size_t>(j)], i + 1);
    }
  }
  return m;
}

std::string to_csv(const Matrix& m) {
  std::string out;
  for (Index j = 0; j < m.cols(); ++j) {
    if (j) out += ',';
    out += "f" + std::to_string(j);
  }
  out += '\n';
  char buf[64];
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      if (j) out += ',';
      auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, m(i, j));
      out.append(buf, ptr);
    }
    out += '\n';
  }
  return out;
}

Matrix parse_f32bin(std::string_view bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw DataError(DataErrorCode::kMagicMismatch, "missing DMIA magic");
  }
  if (bytes.size() < 16) throw DataError(DataErrorCode::kTruncated, "header shorter than 16 bytes");
  const std::uint32_t version = get_u32(bytes, 4);
  if (version != kBinVersion) {
    throw DataError(DataErrorCode::kUnsupportedVersion, "version " + std::to_string(version));
  }
  const std::uint64_t rows = get_u32(bytes, 8);
  const std::uint64_t cols = get_u32(bytes, 12);
  const std::uint64_t need = 16 + rows * cols * 4;
  if (bytes.size() < need) {
    throw DataError(DataErrorCode::kTruncated, "payload has " + std::to_string(bytes.size() - 16) +
                                                   " bytes, expected " +
                                                   std::to_string(need - 16));
  }
  if (bytes.size() > need) {
    throw DataError(DataErrorCode::kTruncated, "trailing bytes after payload");
  }
  Matrix m(static_cast<Index>(rows), static_cast<Index>(cols));
  for (std::uint64_t i = 0; i < rows * cols; ++i) {
    const float f = std::bit_cast<float>(get_u32(bytes, 16 + 4 * i));
    if (!std::isfinite(f)) throw DataError(DataErrorCode::kBadNumber, "non-finite value");
    m.data()[i] = static_cast<double>(f);
  }
  return m;
}

std::string to_f32bin(const Matrix& m) {
  require(m.rows() <= std::numeric_limits<std::uint32_t>::max() &&
              m.cols() <= std::numeric_limits<std::uint32_t>::max(),
          "to_f32bin: matrix too large");
  std::string out(kMagic, 4);
  put_u32(out, kBinVersion);
  put_u32(out, static_cast<std::uint32_t>(m.rows()));
  put_u32(out, static_cast<std::uint32_t>(m.cols()));
  out.reserve(out.size() + static_cast<std::size_t>(m.size()) * 4);
  for (Index i = 0; i < m.size(); ++i) {
    put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(m.data()[i])));
  }
  return out;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(DataErrorCode::kIo, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError(DataErrorCode::kIo, "cannot write " + path.string());
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw DataError(DataErrorCode::kIo, "write failed for " + path.string());
}

Matrix load_dataset(const std::filesystem::path& path, DatasetFormat format) {
  const std::string bytes = read_file(path);
  return format == DatasetFormat::kCsv ? parse_csv(bytes) : parse_f32bin(bytes);
}

void save_dataset(const std::filesystem::path& path, const Matrix& m, DatasetFormat format) {
  write_file(path, format == DatasetFormat::kCsv ? to_csv(m) : to_f32bin(m));
}

}  // namespace dmia
