#pragma once

#include <filesystem>
#include <string>

#include "vdst/core.hpp"

// Binary Netpbm: images as P6 (maxval 255), label maps as P5 with the class
// id stored directly as the gray value.
namespace vdst::netpbm {

std::string encode_ppm(const Image& image);
std::string encode_pgm(const LabelMap& labels);
Image decode_ppm(const std::string& bytes);
LabelMap decode_pgm(const std::string& bytes);

void write_ppm(const std::filesystem::path& path, const Image& image);
void write_pgm(const std::filesystem::path& path, const LabelMap& labels);
Image read_ppm(const std::filesystem::path& path);
LabelMap read_pgm(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& bytes);

}  // namespace vdst::netpbm
