#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>

#include "galvae/error.hpp"
#include "galvae/imaging.hpp"

namespace galvae {

namespace {

class HeaderReader {
 public:
  explicit HeaderReader(std::string_view bytes) : bytes_(bytes) {}

  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      const auto c = static_cast<unsigned char>(bytes_[pos_]);
      if (std::isspace(c)) {
        ++pos_;
      } else if (c == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  std::size_t number(const char* what) {
    skip_space_and_comments();
    const std::size_t start = pos_;
    std::size_t v = 0;
    while (pos_ < bytes_.size() && std::isdigit(static_cast<unsigned char>(bytes_[pos_]))) {
      v = v * 10 + static_cast<std::size_t>(bytes_[pos_] - '0');
      if (v > (std::size_t{1} << 32)) throw DataError(std::string("pnm: ") + what + " too large");
      ++pos_;
    }
    if (pos_ == start) throw DataError(std::string("pnm: malformed header, expected ") + what);
    return v;
  }

  std::size_t pos() const { return pos_; }
  void advance(std::size_t n) { pos_ += n; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

Image decode_pnm(std::string_view bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6'))
    throw DataError("pnm: unsupported magic (expected P5 or P6)");
  const std::size_t channels = bytes[1] == '5' ? 1 : 3;
  HeaderReader hr(bytes);
  hr.advance(2);
  const std::size_t width = hr.number("width");
  const std::size_t height = hr.number("height");
  const std::size_t maxval = hr.number("maxval");
  if (maxval != 255) throw DataError("pnm: maxval must be 255");
  if (width == 0 || height == 0) throw DataError("pnm: zero dimension");
  if (hr.remaining() == 0 || !std::isspace(static_cast<unsigned char>(bytes[hr.pos()])))
    throw DataError("pnm: malformed header terminator");
  hr.advance(1);
  const std::size_t n = width * height * channels;
  if (hr.remaining() < n) throw DataError("pnm: truncated payload");

  std::vector<double> px(n);
  for (std::size_t i = 0; i < n; ++i)
    px[i] = static_cast<unsigned char>(bytes[hr.pos() + i]) / 255.0;
  return Image(width, height, channels, std::move(px));
}

std::string encode_pnm(const Image& img) {
  std::ostringstream header;
  header << (img.channels() == 1 ? "P5" : "P6") << '\n'
         << img.width() << ' ' << img.height() << '\n'
         << "255\n";
  std::string out = header.str();
  out.reserve(out.size() + img.pixels().size());
  for (double p : img.pixels()) {
    const double q = std::round(std::clamp(p, 0.0, 1.0) * 255.0);
    out.push_back(static_cast<char>(static_cast<unsigned char>(q)));
  }
  return out;
}

Image read_pnm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("pnm: cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return decode_pnm(ss.str());
  } catch (const DataError& e) {
    throw DataError(std::string(e.what()) + " (" + path.string() + ")");
  }
}

void write_pnm(const Image& img, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("pnm: cannot write " + path.string());
  const std::string bytes = encode_pnm(img);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("pnm: write failed for " + path.string());
}

}  // namespace galvae
