#include "kmeval/npy.hpp"

#include <bit>
#include <cctype>
#include <charconv>
#include <cstring>
#include <fstream>
#include <istream>
#include <optional>

#include "kmeval/errors.hpp"

static_assert(std::endian::native == std::endian::little, "big-endian hosts are not supported");

namespace kmeval::npy {

namespace {

constexpr char kMagic[] = "\x93NUMPY";
constexpr std::size_t kMagicLen = 6;

// Minimal scanner for the subset of Python literal syntax numpy emits.
class DictScanner {
public:
    explicit DictScanner(std::string_view s) : s_(s) {}

    void skip_ws() {
        while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    }
    bool consume(char c) {
        skip_ws();
        if (pos_ < s_.size() && s_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }
    void expect(char c) {
        if (!consume(c)) fail(std::string("expected '") + c + "'");
    }
    std::string string_literal() {
        skip_ws();
        if (pos_ >= s_.size() || (s_[pos_] != '\'' && s_[pos_] != '"')) fail("expected string");
        const char quote = s_[pos_++];
        const auto end = s_.find(quote, pos_);
        if (end == std::string_view::npos) fail("unterminated string");
        std::string out(s_.substr(pos_, end - pos_));
        pos_ = end + 1;
        return out;
    }
    bool boolean() {
        skip_ws();
        if (s_.substr(pos_, 4) == "True") {
            pos_ += 4;
            return true;
        }
        if (s_.substr(pos_, 5) == "False") {
            pos_ += 5;
            return false;
        }
        fail("expected True or False");
    }
    std::vector<std::size_t> tuple() {
        expect('(');
        std::vector<std::size_t> dims;
        while (!consume(')')) {
            skip_ws();
            std::size_t v = 0;
            const auto* first = s_.data() + pos_;
            const auto [ptr, ec] = std::from_chars(first, s_.data() + s_.size(), v);
            if (ec != std::errc{}) fail("expected non-negative integer in shape");
            pos_ += static_cast<std::size_t>(ptr - first);
            skip_ws();
            // numpy writes a trailing 'L' on Python 2
            if (pos_ < s_.size() && s_[pos_] == 'L') ++pos_;
            dims.push_back(v);
            if (!consume(',')) {
                expect(')');
                break;
            }
        }
        return dims;
    }
    bool at_end() {
        skip_ws();
        return pos_ == s_.size();
    }
    [[noreturn]] void fail(const std::string& what) const {
        throw InputError("malformed npy header: " + what + " at offset " + std::to_string(pos_));
    }

private:
    std::string_view s_;
    std::size_t pos_ = 0;
};

ElementType parse_descr(const std::string& d) {
    if (!d.empty() && d[0] == '>')
        throw InputError("unsupported npy byte order in dtype '" + d + "' (little-endian only)");
    if (d == "<f4") return ElementType::float32;
    if (d == "<f8") return ElementType::float64;
    if (d == "<i4") return ElementType::int32;
    if (d == "<i8") return ElementType::int64;
    throw InputError("unsupported npy dtype '" + d + "'");
}

template <typename T>
void write_impl(const std::filesystem::path& path, ElementType type, std::span<const T> data,
                std::span<const std::size_t> shape) {
    std::size_t count = 1;
    for (auto d : shape) count *= d;
    if (count != data.size())
        throw UsageError("npy write: shape does not match element count for " + path.string());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot open " + path.string() + " for writing");
    const std::string header = make_header(type, shape);
    out.write(header.data(), static_cast<std::streamsize>(header.size()));
    out.write(reinterpret_cast<const char*>(data.data()),
              static_cast<std::streamsize>(data.size_bytes()));
    if (!out) throw InputError("write failed for " + path.string());
}

template <typename Out, typename In>
void convert_append(std::istream& in, std::size_t count, std::vector<Out>& out) {
    std::vector<In> buf(count);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(count * sizeof(In)));
    if (static_cast<std::size_t>(in.gcount()) != count * sizeof(In))
        throw InputError("npy payload truncated");
    out.assign(buf.begin(), buf.end());
}

}  // namespace

std::size_t element_size(ElementType type) {
    switch (type) {
        case ElementType::float32:
        case ElementType::int32:
            return 4;
        case ElementType::float64:
        case ElementType::int64:
            return 8;
    }
    return 0;
}

std::string_view descr(ElementType type) {
    switch (type) {
        case ElementType::float32:
            return "<f4";
        case ElementType::float64:
            return "<f8";
        case ElementType::int32:
            return "<i4";
        case ElementType::int64:
            return "<i8";
    }
    return "";
}

std::size_t ArrayHeader::element_count() const {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    return n;
}

ArrayHeader parse_header_dict(std::string_view dict) {
    DictScanner sc(dict);
    std::optional<std::string> descr_value;
    std::optional<bool> fortran;
    std::optional<std::vector<std::size_t>> shape;
    sc.expect('{');
    while (!sc.consume('}')) {
        const std::string key = sc.string_literal();
        sc.expect(':');
        if (key == "descr")
            descr_value = sc.string_literal();
        else if (key == "fortran_order")
            fortran = sc.boolean();
        else if (key == "shape")
            shape = sc.tuple();
        else
            sc.fail("unknown key '" + key + "'");
        if (!sc.consume(',')) {
            sc.expect('}');
            break;
        }
    }
    if (!sc.at_end()) sc.fail("trailing characters");
    if (!descr_value || !fortran || !shape) throw InputError("malformed npy header: missing key");
    if (*fortran) throw InputError("npy array is Fortran-ordered; only C-order is supported");
    ArrayHeader h;
    h.type = parse_descr(*descr_value);
    h.fortran_order = false;
    h.shape = std::move(*shape);
    return h;
}

ArrayHeader read_header(std::istream& in) {
    char magic[kMagicLen];
    in.read(magic, kMagicLen);
    if (in.gcount() != static_cast<std::streamsize>(kMagicLen) ||
        std::memcmp(magic, kMagic, kMagicLen) != 0)
        throw InputError("bad npy magic string");
    unsigned char version[2];
    in.read(reinterpret_cast<char*>(version), 2);
    if (in.gcount() != 2) throw InputError("npy header truncated");
    std::size_t header_len = 0;
    std::size_t prefix = kMagicLen + 2;
    if (version[0] == 1) {
        unsigned char len[2];
        in.read(reinterpret_cast<char*>(len), 2);
        if (in.gcount() != 2) throw InputError("npy header truncated");
        header_len = len[0] | (std::size_t{len[1]} << 8);
        prefix += 2;
    } else if (version[0] == 2 || version[0] == 3) {
        unsigned char len[4];
        in.read(reinterpret_cast<char*>(len), 4);
        if (in.gcount() != 4) throw InputError("npy header truncated");
        header_len = len[0] | (std::size_t{len[1]} << 8) | (std::size_t{len[2]} << 16) |
                     (std::size_t{len[3]} << 24);
        prefix += 4;
    } else {
        throw InputError("unsupported npy version " + std::to_string(version[0]) + "." +
                         std::to_string(version[1]));
    }
    std::string dict(header_len, '\0');
    in.read(dict.data(), static_cast<std::streamsize>(header_len));
    if (static_cast<std::size_t>(in.gcount()) != header_len) throw InputError("npy header truncated");
    ArrayHeader h = parse_header_dict(dict);
    h.major_version = version[0];
    h.minor_version = version[1];
    h.data_offset = prefix + header_len;
    return h;
}

ArrayHeader read_header(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open " + path.string());
    ArrayHeader h = read_header(in);
    const auto size = std::filesystem::file_size(path);
    const auto expected = h.data_offset + h.payload_bytes();
    if (size < expected)
        throw InputError("npy payload truncated in " + path.string() + ": expected " +
                         std::to_string(h.payload_bytes()) + " bytes, found " +
                         std::to_string(size - h.data_offset));
    if (size > expected)
        throw InputError("npy payload in " + path.string() + " is longer than its shape implies");
    return h;
}

std::string make_header(ElementType type, std::span<const std::size_t> shape) {
    std::string dict = "{'descr': '" + std::string(descr(type)) + "', 'fortran_order': False, 'shape': (";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        dict += std::to_string(shape[i]);
        if (shape.size() == 1 || i + 1 < shape.size()) dict += ",";
        if (i + 1 < shape.size()) dict += " ";
    }
    dict += "), }";
    // magic(6) + version(2) + len(2) + dict + '\n' padded to 64
    const std::size_t unpadded = kMagicLen + 4 + dict.size() + 1;
    dict.append((64 - unpadded % 64) % 64, ' ');
    dict += '\n';
    if (dict.size() > 0xFFFF) throw UsageError("npy header too long for version 1.0");
    std::string out(kMagic, kMagicLen);
    out += '\x01';
    out += '\x00';
    out += static_cast<char>(dict.size() & 0xFF);
    out += static_cast<char>((dict.size() >> 8) & 0xFF);
    out += dict;
    return out;
}

void write(const std::filesystem::path& path, std::span<const double> data,
           std::span<const std::size_t> shape) {
    write_impl(path, ElementType::float64, data, shape);
}

void write(const std::filesystem::path& path, std::span<const float> data,
           std::span<const std::size_t> shape) {
    write_impl(path, ElementType::float32, data, shape);
}

void write(const std::filesystem::path& path, std::span<const std::int64_t> data,
           std::span<const std::size_t> shape) {
    write_impl(path, ElementType::int64, data, shape);
}

std::vector<double> read_float(const std::filesystem::path& path, ArrayHeader* header) {
    const ArrayHeader h = read_header(path);
    if (header) *header = h;
    std::ifstream in(path, std::ios::binary);
    in.seekg(static_cast<std::streamoff>(h.data_offset));
    std::vector<double> out;
    if (h.type == ElementType::float64)
        convert_append<double, double>(in, h.element_count(), out);
    else if (h.type == ElementType::float32)
        convert_append<double, float>(in, h.element_count(), out);
    else
        throw InputError("expected floating-point array in " + path.string() + ", found " +
                         std::string(descr(h.type)));
    return out;
}

std::vector<std::int64_t> read_int(const std::filesystem::path& path, ArrayHeader* header) {
    const ArrayHeader h = read_header(path);
    if (header) *header = h;
    std::ifstream in(path, std::ios::binary);
    in.seekg(static_cast<std::streamoff>(h.data_offset));
    std::vector<std::int64_t> out;
    if (h.type == ElementType::int64)
        convert_append<std::int64_t, std::int64_t>(in, h.element_count(), out);
    else if (h.type == ElementType::int32)
        convert_append<std::int64_t, std::int32_t>(in, h.element_count(), out);
    else
        throw InputError("expected integer array in " + path.string() + ", found " +
                         std::string(descr(h.type)));
    return out;
}

bool has_magic(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    char magic[kMagicLen];
    in.read(magic, kMagicLen);
    return in.gcount() == static_cast<std::streamsize>(kMagicLen) &&
           std::memcmp(magic, kMagic, kMagicLen) == 0;
}

}  // namespace kmeval::npy
