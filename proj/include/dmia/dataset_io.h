#ifndef DMIA_DATASET_IO_H_
#define DMIA_DATASET_IO_H_

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "dmia/matrix.h"

namespace dmia {

enum class DatasetFormat { kCsv, kF32Bin };

std::optional<DatasetFormat> parse_format(std::string_view name);
std::string_view format_name(DatasetFormat f);
std::string_view format_extension(DatasetFormat f);

// CSV: header "f0,f1,...", one record per line, strict float parsing.
// f32bin: "DMIA", u32 version (1), u32 rows, u32 cols, little-endian f32
// payload, row-major. Values widen to double on load.
Matrix parse_csv(std::string_view text);
std::string to_csv(const Matrix& m);
Matrix parse_f32bin(std::string_view bytes);
std::string to_f32bin(const Matrix& m);

Matrix load_dataset(const std::filesystem::path& path, DatasetFormat format);
void save_dataset(const std::filesystem::path& path, const Matrix& m, DatasetFormat format);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

}  // namespace dmia

#endif  // DMIA_DATASET_IO_H_
