#include "rbedl/io.hpp"

#include <bit>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

namespace rbedl {
namespace fs = std::filesystem;
namespace {

constexpr std::string_view kTensorMagic = "RBEDL1";
constexpr std::string_view kModelMagic = "RBEDLM1";
constexpr std::uint32_t kMaxRank = 8;

class Writer {
public:
    void bytes(std::string_view s) { out_.insert(out_.end(), s.begin(), s.end()); }
    void u8(std::uint8_t v) { out_.push_back(v); }
    void u32(std::uint32_t v) {
        for (int k = 0; k < 4; ++k) out_.push_back(static_cast<std::uint8_t>(v >> (8 * k)));
    }
    void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
    void dim(std::size_t v) {
        if (v > 0xFFFFFFFFu) throw IoError("dimension does not fit in u32");
        u32(static_cast<std::uint32_t>(v));
    }
    std::vector<std::uint8_t>& data() { return out_; }

private:
    std::vector<std::uint8_t> out_;
};

class Reader {
public:
    Reader(const std::vector<std::uint8_t>& data, std::string what) : data_(data), what_(std::move(what)) {}
    void need(std::size_t n) const {
        if (data_.size() - pos_ < n) throw IoError(what_ + ": truncated");
    }
    void magic(std::string_view m) {
        need(m.size());
        if (std::memcmp(data_.data() + pos_, m.data(), m.size()) != 0) throw IoError(what_ + ": bad magic");
        pos_ += m.size();
    }
    std::uint8_t u8() {
        need(1);
        return data_[pos_++];
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int k = 0; k < 4; ++k) v |= static_cast<std::uint32_t>(data_[pos_++]) << (8 * k);
        return v;
    }
    float f32() { return std::bit_cast<float>(u32()); }
    bool done() const { return pos_ == data_.size(); }
    const std::string& what() const { return what_; }

private:
    const std::vector<std::uint8_t>& data_;
    std::string what_;
    std::size_t pos_ = 0;
};

std::size_t product(const std::vector<std::size_t>& dims) {
    std::size_t n = 1;
    for (std::size_t d : dims) {
        if (d != 0 && n > (std::size_t{1} << 40) / d) throw IoError("tensor too large");
        n *= d;
    }
    return n;
}

void ensure_parent(const fs::path& path) {
    std::error_code ec;
    if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
    if (ec) throw IoError("cannot create directory " + path.parent_path().string() + ": " + ec.message());
}

}  // namespace

std::vector<std::uint8_t> read_bytes(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) throw IoError("read failed: " + path.string());
    return bytes;
}

void write_bytes(const fs::path& path, const std::vector<std::uint8_t>& bytes) {
    ensure_parent(path);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed: " + path.string());
}

void write_text(const fs::path& path, std::string_view text) {
    write_bytes(path, std::vector<std::uint8_t>(text.begin(), text.end()));
}

std::string read_text(const fs::path& path) {
    const auto bytes = read_bytes(path);
    return {bytes.begin(), bytes.end()};
}

void write_rbt(const fs::path& path, const RbtTensor& tensor) {
    const std::size_t n = product(tensor.dims);
    if ((tensor.dtype == DType::F32 ? tensor.f32.size() : tensor.u8.size()) != n)
        throw IoError("write_rbt: payload does not match dims");
    Writer w;
    w.bytes(kTensorMagic);
    w.u8(static_cast<std::uint8_t>(tensor.dtype));
    w.dim(tensor.dims.size());
    for (std::size_t d : tensor.dims) w.dim(d);
    if (tensor.dtype == DType::F32)
        for (float v : tensor.f32) w.f32(v);
    else
        for (std::uint8_t v : tensor.u8) w.u8(v);
    write_bytes(path, w.data());
}

RbtTensor read_rbt(const fs::path& path) {
    const auto bytes = read_bytes(path);
    Reader r(bytes, path.string());
    r.magic(kTensorMagic);
    RbtTensor t;
    const std::uint8_t code = r.u8();
    if (code > 1) throw IoError(r.what() + ": unknown dtype " + std::to_string(code));
    t.dtype = static_cast<DType>(code);
    const std::uint32_t rank = r.u32();
    if (rank > kMaxRank) throw IoError(r.what() + ": rank too large");
    for (std::uint32_t k = 0; k < rank; ++k) t.dims.push_back(r.u32());
    const std::size_t n = product(t.dims);
    r.need(t.dtype == DType::F32 ? 4 * n : n);
    if (t.dtype == DType::F32) {
        t.f32.resize(n);
        for (float& v : t.f32) v = r.f32();
    } else {
        t.u8.resize(n);
        for (std::uint8_t& v : t.u8) v = r.u8();
    }
    if (!r.done()) throw IoError(r.what() + ": trailing bytes");
    return t;
}

void write_field(const fs::path& path, const Field& field) {
    RbtTensor t{DType::F32, {field.channels(), field.height(), field.width()}, {}, {}};
    t.f32.reserve(field.size());
    for (double v : field.values()) t.f32.push_back(static_cast<float>(v));
    write_rbt(path, t);
}

Field read_field(const fs::path& path) {
    const RbtTensor t = read_rbt(path);
    if (t.dtype != DType::F32 || t.dims.size() != 3) throw IoError(path.string() + ": expected float32 (C, H, W)");
    Field f(t.dims[0], t.dims[1], t.dims[2]);
    for (std::size_t i = 0; i < f.size(); ++i) f[i] = static_cast<double>(t.f32[i]);
    return f;
}

void write_grid(const fs::path& path, const Grid<std::uint8_t>& grid) {
    write_rbt(path, RbtTensor{DType::U8, {grid.height(), grid.width()}, {}, grid.values()});
}

Grid<std::uint8_t> read_grid(const fs::path& path) {
    const RbtTensor t = read_rbt(path);
    if (t.dtype != DType::U8 || t.dims.size() != 2) throw IoError(path.string() + ": expected u8 (H, W)");
    Grid<std::uint8_t> g(t.dims[0], t.dims[1]);
    g.values() = t.u8;
    return g;
}

std::string indexed_name(std::size_t index, std::string_view prefix, std::string_view extension) {
    char digits[24];
    const auto res = std::to_chars(digits, digits + sizeof digits, index);
    std::string number(digits, res.ptr);
    if (number.size() < 4) number.insert(0, 4 - number.size(), '0');
    return std::string(prefix) + number + std::string(extension);
}

void write_split(const fs::path& dir, const std::vector<SynthImage>& images) {
    for (std::size_t i = 0; i < images.size(); ++i) {
        const std::string name = indexed_name(i, "", ".rbt");
        write_field(dir / "images" / name, images[i].channels);
        write_grid(dir / "labels" / name, images[i].labels.labels());
        Grid<std::uint8_t> mask(images[i].labels.height(), images[i].labels.width());
        mask.values().assign(images[i].labels.domain_mask().values().begin(),
                             images[i].labels.domain_mask().values().end());
        write_grid(dir / "mask" / name, mask);
    }
}

std::vector<SynthImage> read_split(const fs::path& dir) {
    if (!fs::is_directory(dir / "images")) throw IoError("no images/ directory in " + dir.string());
    std::vector<SynthImage> out;
    for (std::size_t i = 0;; ++i) {
        const std::string name = indexed_name(i, "", ".rbt");
        if (!fs::exists(dir / "images" / name)) break;
        Field channels = read_field(dir / "images" / name);
        Grid<std::uint8_t> labels = read_grid(dir / "labels" / name);
        const Grid<std::uint8_t> mask_raw = read_grid(dir / "mask" / name);
        if (!channels.same_plane(labels) || !labels.same_shape(mask_raw))
            throw IoError(dir.string() + ": shape mismatch for image " + name);
        Mask mask(mask_raw.height(), mask_raw.width());
        for (std::size_t v = 0; v < mask.size(); ++v) mask[v] = mask_raw[v] ? 1 : 0;
        out.push_back({std::move(channels), LabelField(std::move(labels), std::move(mask), 4)});
    }
    if (out.empty()) throw IoError("no images in " + dir.string());
    return out;
}

std::vector<std::uint8_t> serialize_model(const NetParams& params) {
    Writer w;
    w.bytes(kModelMagic);
    w.dim(params.in_channels);
    w.dim(params.classes);
    const auto shapes = params.tensor_shapes();
    const auto tensors = params.tensors();
    for (std::size_t k = 0; k < tensors.size(); ++k) {
        w.dim(shapes[k].size());
        for (std::size_t d : shapes[k]) w.dim(d);
        for (double v : tensors[k]) w.f32(static_cast<float>(v));
    }
    return std::move(w.data());
}

NetParams deserialize_model(const std::vector<std::uint8_t>& bytes) {
    Reader r(bytes, "model");
    r.magic(kModelMagic);
    const std::uint32_t in_channels = r.u32();
    const std::uint32_t classes = r.u32();
    if (in_channels < 1 || in_channels > 1024 || classes < 2 || classes > 256)
        throw IoError("model: implausible header (C_in " + std::to_string(in_channels) + ", K " +
                      std::to_string(classes) + ")");
    NetParams p = NetParams::zeros(in_channels, classes);
    const auto shapes = p.tensor_shapes();
    auto tensors = p.tensors();
    for (std::size_t k = 0; k < tensors.size(); ++k) {
        const std::uint32_t rank = r.u32();
        if (rank != shapes[k].size()) throw IoError("model: tensor " + std::to_string(k) + " has wrong rank");
        for (std::size_t d : shapes[k])
            if (r.u32() != d) throw IoError("model: tensor " + std::to_string(k) + " has wrong shape");
        for (double& v : tensors[k]) {
            v = static_cast<double>(r.f32());
            if (!std::isfinite(v)) throw IoError("model: non-finite parameter");
        }
    }
    if (!r.done()) throw IoError("model: trailing bytes");
    return p;
}

void save_model(const fs::path& path, const NetParams& params) { write_bytes(path, serialize_model(params)); }

NetParams load_model(const fs::path& path) {
    try {
        return deserialize_model(read_bytes(path));
    } catch (const IoError& e) {
        throw IoError(path.string() + ": " + e.what());
    }
}

void write_pgm(const fs::path& path, const Grid<std::uint8_t>& image) {
    const std::string header =
        "P5\n" + std::to_string(image.width()) + " " + std::to_string(image.height()) + "\n255\n";
    std::vector<std::uint8_t> bytes(header.begin(), header.end());
    bytes.insert(bytes.end(), image.values().begin(), image.values().end());
    write_bytes(path, bytes);
}

Grid<std::uint8_t> read_pgm(const fs::path& path) {
    const auto bytes = read_bytes(path);
    std::size_t pos = 0;
    auto token = [&]() {
        while (pos < bytes.size() && std::isspace(bytes[pos])) ++pos;
        const std::size_t start = pos;
        while (pos < bytes.size() && !std::isspace(bytes[pos])) ++pos;
        return std::string(bytes.begin() + static_cast<std::ptrdiff_t>(start),
                           bytes.begin() + static_cast<std::ptrdiff_t>(pos));
    };
    if (token() != "P5") throw IoError(path.string() + ": not a binary PGM");
    const std::string ws = token(), hs = token(), ms = token();
    std::size_t w = 0, h = 0;
    std::from_chars(ws.data(), ws.data() + ws.size(), w);
    std::from_chars(hs.data(), hs.data() + hs.size(), h);
    if (ms != "255" || w == 0 || h == 0) throw IoError(path.string() + ": unsupported PGM header");
    ++pos;
    if (bytes.size() - pos != w * h) throw IoError(path.string() + ": PGM payload size mismatch");
    Grid<std::uint8_t> g(h, w);
    std::copy(bytes.begin() + static_cast<std::ptrdiff_t>(pos), bytes.end(), g.values().begin());
    return g;
}

std::string format_number(double value) {
    if (std::isnan(value)) return "nan";
    if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
    if (value == 0.0) value = 0.0;  // drops the sign of -0
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, value, std::chars_format::general, 6);
    return {buf, res.ptr};
}

}  // namespace rbedl
