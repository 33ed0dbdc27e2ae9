#include "soxai/npy.hpp"

#include <array>
#include <bit>
#include <cctype>
#include <cstring>
#include <limits>
#include <optional>
#include <string_view>

#include "soxai/error.hpp"
#include "soxai/fileio.hpp"

static_assert(std::endian::native == std::endian::little, "NPY codec assumes a little-endian host");

namespace soxai {

std::string_view to_string(DType dtype) noexcept {
    switch (dtype) {
    case DType::F32: return "<f4";
    case DType::F64: return "<f8";
    case DType::U8: return "|u1";
    }
    return "?";
}

std::size_t dtype_size(DType dtype) noexcept {
    switch (dtype) {
    case DType::F32: return 4;
    case DType::F64: return 8;
    case DType::U8: return 1;
    }
    return 0;
}

std::size_t shape_product(std::span<const std::size_t> shape) noexcept {
    std::size_t n = 1;
    for (auto d : shape) {
        n *= d;
    }
    return n;
}

Tensor::Tensor(DType dt, std::vector<std::size_t> shp) : dtype(dt), shape(std::move(shp)) {
    data.assign(shape_product(shape), 0.0);
}

Tensor::Tensor(DType dt, std::vector<std::size_t> shp, std::vector<double> values)
    : dtype(dt), shape(std::move(shp)), data(std::move(values)) {}

void check_invariants(const Tensor& t) {
    if (t.shape.empty() || t.shape.size() > 4) {
        throw Error(ErrorCode::InvalidArgument, "tensor rank must be 1-4, got " + std::to_string(t.shape.size()));
    }
    for (auto d : t.shape) {
        if (d == 0) {
            throw Error(ErrorCode::InvalidArgument, "tensor dimensions must be >= 1");
        }
    }
    if (shape_product(t.shape) != t.data.size()) {
        throw Error(ErrorCode::InvalidArgument, "tensor shape does not match element count");
    }
}

namespace npy {
namespace {

constexpr std::array<unsigned char, 6> kMagic = {0x93, 'N', 'U', 'M', 'P', 'Y'};
constexpr std::size_t kMaxElements = std::size_t{1} << 40;

class HeaderParser {
public:
    explicit HeaderParser(std::string_view text) : s_(text) {}

    struct Fields {
        std::optional<std::string> descr;
        std::optional<bool> fortran;
        std::optional<std::vector<std::size_t>> shape;
    };

    Fields parse() {
        Fields f;
        skip_ws();
        expect('{');
        while (true) {
            skip_ws();
            if (peek() == '}') {
                ++pos_;
                break;
            }
            std::string key = quoted();
            skip_ws();
            expect(':');
            skip_ws();
            if (key == "descr") {
                f.descr = quoted();
            } else if (key == "fortran_order") {
                f.fortran = boolean();
            } else if (key == "shape") {
                f.shape = tuple();
            } else {
                fail("unknown header key '" + key + "'");
            }
            skip_ws();
            if (peek() == ',') {
                ++pos_;
                continue;
            }
            skip_ws();
            expect('}');
            break;
        }
        return f;
    }

private:
    [[noreturn]] void fail(const std::string& why) const {
        throw Error(ErrorCode::MalformedHeader, "npy header: " + why);
    }
    char peek() const { return pos_ < s_.size() ? s_[pos_] : '\0'; }
    void skip_ws() {
        while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) {
            ++pos_;
        }
    }
    void expect(char c) {
        if (peek() != c) {
            fail(std::string("expected '") + c + "'");
        }
        ++pos_;
    }
    std::string quoted() {
        const char q = peek();
        if (q != '\'' && q != '"') {
            fail("expected quoted string");
        }
        ++pos_;
        const auto end = s_.find(q, pos_);
        if (end == std::string_view::npos) {
            fail("unterminated string");
        }
        std::string out(s_.substr(pos_, end - pos_));
        pos_ = end + 1;
        return out;
    }
    bool boolean() {
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
        while (true) {
            skip_ws();
            if (peek() == ')') {
                ++pos_;
                break;
            }
            if (!std::isdigit(static_cast<unsigned char>(peek()))) {
                fail("expected dimension");
            }
            std::size_t v = 0;
            while (std::isdigit(static_cast<unsigned char>(peek()))) {
                const auto digit = static_cast<std::size_t>(s_[pos_] - '0');
                if (v > (kMaxElements - digit) / 10) {
                    fail("dimension too large");
                }
                v = v * 10 + digit;
                ++pos_;
            }
            dims.push_back(v);
            skip_ws();
            if (peek() == ',') {
                ++pos_;
            } else if (peek() != ')') {
                fail("expected ',' or ')' in shape");
            }
        }
        return dims;
    }

    std::string_view s_;
    std::size_t pos_ = 0;
};

DType parse_descr(const std::string& descr) {
    if (descr == "<f4") return DType::F32;
    if (descr == "<f8") return DType::F64;
    if (descr == "|u1" || descr == "<u1" || descr == "u1") return DType::U8;
    throw Error(ErrorCode::UnsupportedDtype, "unsupported npy dtype '" + descr + "'");
}

double load_element(const unsigned char* p, DType dtype) {
    switch (dtype) {
    case DType::F32: {
        float v;
        std::memcpy(&v, p, sizeof v);
        return v;
    }
    case DType::F64: {
        double v;
        std::memcpy(&v, p, sizeof v);
        return v;
    }
    case DType::U8: return *p;
    }
    return 0.0;
}

void store_element(std::string& out, double v, DType dtype) {
    switch (dtype) {
    case DType::F32: {
        const auto f = static_cast<float>(v);
        out.append(reinterpret_cast<const char*>(&f), sizeof f);
        break;
    }
    case DType::F64: out.append(reinterpret_cast<const char*>(&v), sizeof v); break;
    case DType::U8: out.push_back(static_cast<char>(static_cast<unsigned char>(v))); break;
    }
}

std::string shape_literal(const std::vector<std::size_t>& shape) {
    std::string s = "(";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += ", ";
        s += std::to_string(shape[i]);
    }
    if (shape.size() == 1) s += ",";
    s += ")";
    return s;
}

} // namespace

Tensor parse(std::span<const unsigned char> bytes) {
    if (bytes.size() < kMagic.size() || !std::equal(kMagic.begin(), kMagic.end(), bytes.begin())) {
        throw Error(ErrorCode::BadMagic, "not an npy file (bad magic bytes)");
    }
    if (bytes.size() < 10) {
        throw Error(ErrorCode::MalformedHeader, "npy preamble truncated");
    }
    if (bytes[6] != 1 || bytes[7] != 0) {
        throw Error(ErrorCode::UnsupportedVersion,
                    "unsupported npy version " + std::to_string(bytes[6]) + "." + std::to_string(bytes[7]));
    }
    const std::size_t header_len = bytes[8] | (static_cast<std::size_t>(bytes[9]) << 8);
    if (bytes.size() < 10 + header_len) {
        throw Error(ErrorCode::MalformedHeader, "npy header truncated");
    }
    const std::string_view header(reinterpret_cast<const char*>(bytes.data() + 10), header_len);
    const auto fields = HeaderParser(header).parse();
    if (!fields.descr || !fields.fortran || !fields.shape) {
        throw Error(ErrorCode::MalformedHeader, "npy header missing descr/fortran_order/shape");
    }
    const DType dtype = parse_descr(*fields.descr);
    const auto& shape = *fields.shape;
    if (shape.empty() || shape.size() > 4) {
        throw Error(ErrorCode::MalformedHeader, "npy shape must have 1-4 dimensions");
    }
    std::size_t count = 1;
    for (auto d : shape) {
        if (d == 0) {
            throw Error(ErrorCode::MalformedHeader, "npy shape has a zero dimension");
        }
        if (count > kMaxElements / d) {
            throw Error(ErrorCode::MalformedHeader, "npy shape too large");
        }
        count *= d;
    }
    const std::size_t item = dtype_size(dtype);
    const std::size_t payload = bytes.size() - 10 - header_len;
    if (payload != count * item) {
        throw Error(ErrorCode::SizeMismatch, "npy payload has " + std::to_string(payload) + " bytes, header implies " +
                                                 std::to_string(count * item));
    }

    Tensor t(dtype, shape);
    const unsigned char* src = bytes.data() + 10 + header_len;
    if (!*fields.fortran || shape.size() == 1) {
        for (std::size_t i = 0; i < count; ++i) {
            t.data[i] = load_element(src + i * item, dtype);
        }
        return t;
    }

    // Column-major payload: walk logical indices in row-major order and
    // gather from the Fortran offset.
    std::vector<std::size_t> fstride(shape.size());
    fstride[0] = 1;
    for (std::size_t d = 1; d < shape.size(); ++d) {
        fstride[d] = fstride[d - 1] * shape[d - 1];
    }
    std::vector<std::size_t> idx(shape.size(), 0);
    for (std::size_t i = 0; i < count; ++i) {
        std::size_t off = 0;
        for (std::size_t d = 0; d < shape.size(); ++d) {
            off += idx[d] * fstride[d];
        }
        t.data[i] = load_element(src + off * item, dtype);
        for (std::size_t d = shape.size(); d-- > 0;) {
            if (++idx[d] < shape[d]) break;
            idx[d] = 0;
        }
    }
    return t;
}

std::string serialize(const Tensor& t) {
    check_invariants(t);
    std::string dict = "{'descr': '" + std::string(to_string(t.dtype)) + "', 'fortran_order': False, 'shape': " +
                       shape_literal(t.shape) + ", }";
    const std::size_t unpadded = 10 + dict.size() + 1;
    const std::size_t total = (unpadded + 63) / 64 * 64;
    dict.append(total - unpadded, ' ');
    dict.push_back('\n');

    std::string out;
    out.reserve(total + t.size() * dtype_size(t.dtype));
    out.append(reinterpret_cast<const char*>(kMagic.data()), kMagic.size());
    out.push_back('\x01');
    out.push_back('\x00');
    out.push_back(static_cast<char>(dict.size() & 0xff));
    out.push_back(static_cast<char>((dict.size() >> 8) & 0xff));
    out += dict;
    for (double v : t.data) {
        store_element(out, v, t.dtype);
    }
    return out;
}

Tensor read_tensor(const std::filesystem::path& path) {
    const auto bytes = read_file_bytes(path);
    try {
        return parse(bytes);
    } catch (const Error& e) {
        throw Error(e.code(), path.string() + ": " + e.what());
    }
}

void write_tensor(const Tensor& t, const std::filesystem::path& path) { write_file(path, serialize(t)); }

} // namespace npy
} // namespace soxai
