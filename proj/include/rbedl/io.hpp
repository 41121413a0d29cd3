#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "rbedl/net.hpp"
#include "rbedl/synthdata.hpp"

namespace rbedl {

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// .rbt: "RBEDL1", u8 dtype, u32 rank, u32 dims, little-endian row-major payload.
enum class DType : std::uint8_t { F32 = 0, U8 = 1 };

struct RbtTensor {
    DType dtype = DType::F32;
    std::vector<std::size_t> dims;
    std::vector<float> f32;
    std::vector<std::uint8_t> u8;
};

void write_rbt(const std::filesystem::path& path, const RbtTensor& tensor);
RbtTensor read_rbt(const std::filesystem::path& path);

// Float32 (C, H, W). Values are narrowed to float on write.
void write_field(const std::filesystem::path& path, const Field& field);
Field read_field(const std::filesystem::path& path);
// u8 (H, W).
void write_grid(const std::filesystem::path& path, const Grid<std::uint8_t>& grid);
Grid<std::uint8_t> read_grid(const std::filesystem::path& path);

// "0007.rbt"-style zero-padded name.
std::string indexed_name(std::size_t index, std::string_view prefix, std::string_view extension);

// images/, labels/ and mask/ below dir, one NNNN.rbt per image.
void write_split(const std::filesystem::path& dir, const std::vector<SynthImage>& images);
// Throws IoError when the directory is missing, empty or inconsistent.
std::vector<SynthImage> read_split(const std::filesystem::path& dir);

// "RBEDLM1", u32 C_in, u32 K, then each tensor as u32 rank, u32 dims, f32 payload.
std::vector<std::uint8_t> serialize_model(const NetParams& params);
NetParams deserialize_model(const std::vector<std::uint8_t>& bytes);
void save_model(const std::filesystem::path& path, const NetParams& params);
NetParams load_model(const std::filesystem::path& path);

// Binary P5, maxval 255.
void write_pgm(const std::filesystem::path& path, const Grid<std::uint8_t>& image);
Grid<std::uint8_t> read_pgm(const std::filesystem::path& path);

// Shortest general form with 6 significant digits, '.' decimal, locale-free.
std::string format_number(double value);

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path);
void write_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);
void write_text(const std::filesystem::path& path, std::string_view text);
std::string read_text(const std::filesystem::path& path);

}  // namespace rbedl
