#include "vdst/netpbm.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

#include "vdst/error.hpp"

namespace vdst::netpbm {
namespace {

struct Header {
  std::string magic;
  int width = 0;
  int height = 0;
  int maxval = 0;
  std::size_t data_offset = 0;
};

// Parses "Px <ws> width <ws> height <ws> maxval <single ws>", skipping
// '#' comments.
Header parse_header(const std::string& bytes) {
  Header h;
  std::size_t pos = 0;
  auto skip_ws = [&] {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto read_int = [&] {
    skip_ws();
    if (pos >= bytes.size() || !std::isdigit(static_cast<unsigned char>(bytes[pos]))) {
      fail(ErrorKind::kDataCorruption, "malformed netpbm header");
    }
    long value = 0;
    while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) {
      value = value * 10 + (bytes[pos] - '0');
      if (value > 1 << 20) fail(ErrorKind::kDataCorruption, "netpbm dimension too large");
      ++pos;
    }
    return static_cast<int>(value);
  };
  require(bytes.size() >= 2 && bytes[0] == 'P', ErrorKind::kDataCorruption, "not a netpbm file");
  h.magic = bytes.substr(0, 2);
  pos = 2;
  h.width = read_int();
  h.height = read_int();
  h.maxval = read_int();
  require(pos < bytes.size() && std::isspace(static_cast<unsigned char>(bytes[pos])),
          ErrorKind::kDataCorruption, "malformed netpbm header");
  h.data_offset = pos + 1;
  require(h.maxval == 255, ErrorKind::kDataCorruption, "only maxval 255 is supported");
  return h;
}

}  // namespace

std::string encode_ppm(const Image& image) {
  std::string out = "P6\n" + std::to_string(image.width()) + " " +
                    std::to_string(image.height()) + "\n255\n";
  out.append(reinterpret_cast<const char*>(image.data().data()), image.data().size());
  return out;
}

std::string encode_pgm(const LabelMap& labels) {
  std::string out = "P5\n" + std::to_string(labels.width()) + " " +
                    std::to_string(labels.height()) + "\n255\n";
  out.append(reinterpret_cast<const char*>(labels.data().data()), labels.data().size());
  return out;
}

Image decode_ppm(const std::string& bytes) {
  const Header h = parse_header(bytes);
  require(h.magic == "P6", ErrorKind::kDataCorruption, "expected P6 image");
  const std::size_t n = 3ULL * h.width * h.height;
  require(bytes.size() - h.data_offset == n, ErrorKind::kDataCorruption, "PPM payload size mismatch");
  std::vector<std::uint8_t> px(bytes.begin() + static_cast<std::ptrdiff_t>(h.data_offset), bytes.end());
  return Image(h.width, h.height, std::move(px));
}

LabelMap decode_pgm(const std::string& bytes) {
  const Header h = parse_header(bytes);
  require(h.magic == "P5", ErrorKind::kDataCorruption, "expected P5 label map");
  const std::size_t n = 1ULL * h.width * h.height;
  require(bytes.size() - h.data_offset == n, ErrorKind::kDataCorruption, "PGM payload size mismatch");
  std::vector<ClassId> px(bytes.begin() + static_cast<std::ptrdiff_t>(h.data_offset), bytes.end());
  return LabelMap(h.width, h.height, std::move(px));
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::kIo, "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorKind::kIo, "short write to " + path.string());
}

void write_ppm(const std::filesystem::path& path, const Image& image) {
  write_file(path, encode_ppm(image));
}

void write_pgm(const std::filesystem::path& path, const LabelMap& labels) {
  write_file(path, encode_pgm(labels));
}

Image read_ppm(const std::filesystem::path& path) { return decode_ppm(read_file(path)); }

LabelMap read_pgm(const std::filesystem::path& path) { return decode_pgm(read_file(path)); }

}  // namespace vdst::netpbm
