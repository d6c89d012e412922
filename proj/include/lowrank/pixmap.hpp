#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace lowrank {

/// 8-bit binary pixmap, P5 (one channel) or P6 (three channels). Samples are
/// interleaved row-major: ((row * width) + col) * channels + channel.
struct PixmapImage {
  int width = 0;
  int height = 0;
  int channels = 1;
  std::vector<std::uint8_t> samples;

  static constexpr int peak = 255;

  std::uint8_t at(int row, int col, int channel = 0) const {
    return samples[(static_cast<std::size_t>(row) * width + col) * channels + channel];
  }
  std::uint8_t& at(int row, int col, int channel = 0) {
    return samples[(static_cast<std::size_t>(row) * width + col) * channels + channel];
  }
};

/// Throws ErrorKind::Format on bad magic, maxval other than 255, malformed
/// header or truncated payload.
PixmapImage readPixmap(std::string_view bytes);
/// Canonical form: "P5\n<w> <h>\n255\n" followed by the samples.
std::string writePixmap(const PixmapImage& img);

/// Throws ErrorKind::Io when the file cannot be read or written.
PixmapImage loadPixmap(const std::filesystem::path& path);
void savePixmap(const std::filesystem::path& path, const PixmapImage& img);

}  // namespace lowrank
