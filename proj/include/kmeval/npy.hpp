#pragma once

// Reader/writer for the NumPy ".npy" array container (little-endian,
// C-order only). Format: magic "\x93NUMPY", major/minor version bytes,
// header length (u16 for v1, u32 for v2/v3), an ASCII Python-dict header
// padded with spaces to a 64-byte boundary and terminated by '\n', then
// the raw payload.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace kmeval::npy {

enum class ElementType { float32, float64, int32, int64 };

std::size_t element_size(ElementType type);
std::string_view descr(ElementType type);  // "<f4", "<f8", "<i4", "<i8"

struct ArrayHeader {
    ElementType type = ElementType::float64;
    std::vector<std::size_t> shape;
    bool fortran_order = false;
    std::uint8_t major_version = 1;
    std::uint8_t minor_version = 0;
    std::size_t data_offset = 0;  // bytes from file start to payload

    std::size_t element_count() const;
    std::size_t payload_bytes() const { return element_count() * element_size(type); }
};

/// Parses the dict literal, e.g. "{'descr': '<f8', 'fortran_order': False, 'shape': (3, 2), }".
/// Throws InputError on anything unsupported.
ArrayHeader parse_header_dict(std::string_view dict);

/// Reads and validates magic, version and header. Leaves the stream
/// positioned at the first payload byte.
ArrayHeader read_header(std::istream& in);

/// read_header plus a check that the file holds exactly the payload bytes
/// the header promises.
ArrayHeader read_header(const std::filesystem::path& path);

/// Serializes a v1.0 header for a C-order array.
std::string make_header(ElementType type, std::span<const std::size_t> shape);

void write(const std::filesystem::path& path, std::span<const double> data,
           std::span<const std::size_t> shape);
void write(const std::filesystem::path& path, std::span<const float> data,
           std::span<const std::size_t> shape);
void write(const std::filesystem::path& path, std::span<const std::int64_t> data,
           std::span<const std::size_t> shape);

/// Whole-file readers. Floating payloads are promoted to double; integer
/// payloads are widened to int64. Type-class mismatches throw InputError.
std::vector<double> read_float(const std::filesystem::path& path, ArrayHeader* header = nullptr);
std::vector<std::int64_t> read_int(const std::filesystem::path& path, ArrayHeader* header = nullptr);

/// True if the file begins with the ".npy" magic string.
bool has_magic(const std::filesystem::path& path);

}  // namespace kmeval::npy
