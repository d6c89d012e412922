#include "lowrank/pixmap.hpp"

#include <cctype>
#include <fstream>
#include <iterator>
#include <sstream>

#include "lowrank/error.hpp"

namespace lowrank {

namespace {

class HeaderReader {
 public:
  explicit HeaderReader(std::string_view bytes) : b_(bytes) {}

  long number(const char* what) {
    skipSpaceAndComments();
    long v = 0;
    std::size_t digits = 0;
    while (pos_ < b_.size() && std::isdigit(static_cast<unsigned char>(b_[pos_]))) {
      v = v * 10 + (b_[pos_++] - '0');
      if (v > 1'000'000'000L) fail(ErrorKind::Format, std::string("pixmap: ") + what + " too large");
      ++digits;
    }
    if (digits == 0) fail(ErrorKind::Format, std::string("pixmap: missing ") + what);
    return v;
  }

  /// Exactly one whitespace byte separates maxval from the raster.
  std::size_t rasterStart() {
    if (pos_ >= b_.size() || !std::isspace(static_cast<unsigned char>(b_[pos_])))
      fail(ErrorKind::Format, "pixmap: missing separator before raster");
    return pos_ + 1;
  }

 private:
  void skipSpaceAndComments() {
    while (pos_ < b_.size()) {
      const char c = b_[pos_];
      if (c == '#') {
        while (pos_ < b_.size() && b_[pos_] != '\n') ++pos_;
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  std::string_view b_;
  std::size_t pos_ = 2;
};

}  // namespace

PixmapImage readPixmap(std::string_view bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6'))
    fail(ErrorKind::Format, "pixmap: unsupported magic (expected P5 or P6)");
  PixmapImage img;
  img.channels = bytes[1] == '5' ? 1 : 3;
  HeaderReader h(bytes);
  const long w = h.number("width");
  const long ht = h.number("height");
  const long maxval = h.number("maxval");
  if (w < 1 || ht < 1) fail(ErrorKind::Format, "pixmap: empty image");
  if (maxval != 255)
    fail(ErrorKind::Format, "pixmap: unsupported maxval " + std::to_string(maxval) +
                                " (only 255)");
  const std::size_t start = h.rasterStart();
  const std::size_t count = static_cast<std::size_t>(w) * static_cast<std::size_t>(ht) *
                            static_cast<std::size_t>(img.channels);
  if (bytes.size() < start || bytes.size() - start < count)
    fail(ErrorKind::Format, "pixmap: truncated payload");
  img.width = static_cast<int>(w);
  img.height = static_cast<int>(ht);
  img.samples.assign(bytes.begin() + static_cast<std::ptrdiff_t>(start),
                     bytes.begin() + static_cast<std::ptrdiff_t>(start + count));
  return img;
}

std::string writePixmap(const PixmapImage& img) {
  if (img.channels != 1 && img.channels != 3)
    fail(ErrorKind::InvalidInput, "pixmap: channels must be 1 or 3");
  const std::size_t count = static_cast<std::size_t>(img.width) *
                            static_cast<std::size_t>(img.height) *
                            static_cast<std::size_t>(img.channels);
  if (img.width < 1 || img.height < 1 || img.samples.size() != count)
    fail(ErrorKind::InvalidInput, "pixmap: sample count does not match dimensions");
  std::ostringstream os;
  os << (img.channels == 1 ? "P5" : "P6") << '\n' << img.width << ' ' << img.height << "\n255\n";
  std::string out = os.str();
  out.append(img.samples.begin(), img.samples.end());
  return out;
}

PixmapImage loadPixmap(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) fail(ErrorKind::Io, "read failed: " + path.string());
  return readPixmap(bytes);
}

void savePixmap(const std::filesystem::path& path, const PixmapImage& img) {
  const std::string bytes = writePixmap(img);
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::Io, "cannot open " + path.string() + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorKind::Io, "write failed: " + path.string());
}

}  // namespace lowrank
