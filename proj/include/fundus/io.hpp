#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "fundus/image.hpp"

namespace fundus {

enum class ImageFormat { png, jpeg };

inline std::uint8_t quantize(float v) noexcept {
  return static_cast<std::uint8_t>(std::lround(static_cast<double>(clamp01(v)) * 255.0));
}

/// Rounds every intensity to the nearest 8-bit level.
inline ImageBuffer quantize8(const ImageBuffer& img) {
  ImageBuffer out = img;
  for (float& v : out.data()) v = static_cast<float>(quantize(v)) / 255.0f;
  return out;
}

namespace detail {

inline std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
  std::error_code ec;
  if (!std::filesystem::is_regular_file(path, ec)) {
    throw Error(ErrorCode::FileNotFound, path.string());
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline ImageFormat sniff_format(const std::vector<std::uint8_t>& bytes, const std::string& name) {
  static constexpr std::array<std::uint8_t, 8> png_sig{0x89, 'P', 'N', 'G', 0x0D, 0x0A, 0x1A, 0x0A};
  if (bytes.size() >= png_sig.size() && std::equal(png_sig.begin(), png_sig.end(), bytes.begin())) {
    return ImageFormat::png;
  }
  if (bytes.size() >= 3 && bytes[0] == 0xFF && bytes[1] == 0xD8 && bytes[2] == 0xFF) {
    return ImageFormat::jpeg;
  }
  throw Error(ErrorCode::UnsupportedFormat, name + " is neither PNG nor JPEG");
}

// Decoders are lenient about truncation (libjpeg pads with gray), so check
// the terminating marker ourselves.
inline bool has_terminator(const std::vector<std::uint8_t>& bytes, ImageFormat fmt) {
  if (fmt == ImageFormat::jpeg) {
    for (std::size_t i = bytes.size(); i >= 2 && i + 16 > bytes.size(); --i) {
      if (bytes[i - 2] == 0xFF && bytes[i - 1] == 0xD9) return true;
    }
    return false;
  }
  static constexpr std::array<std::uint8_t, 4> iend{'I', 'E', 'N', 'D'};
  return bytes.size() >= 12 &&
         std::equal(iend.begin(), iend.end(), bytes.end() - 8);
}

inline cv::Mat decode(const std::vector<std::uint8_t>& bytes, const std::string& name, int flags) {
  const ImageFormat fmt = sniff_format(bytes, name);
  if (!has_terminator(bytes, fmt)) throw Error(ErrorCode::CorruptImage, name + " is truncated");
  cv::Mat raw;
  try {
    raw = cv::imdecode(cv::Mat(1, static_cast<int>(bytes.size()), CV_8UC1,
                               const_cast<std::uint8_t*>(bytes.data())),
                       flags);
  } catch (const cv::Exception& e) {
    throw Error(ErrorCode::CorruptImage, name + ": " + e.what());
  }
  if (raw.empty()) throw Error(ErrorCode::CorruptImage, name + " could not be decoded");
  return raw;
}

inline ImageBuffer from_mat(const cv::Mat& m) {
  cv::Mat m8;
  if (m.depth() == CV_16U) {
    m.convertTo(m8, CV_8U, 1.0 / 257.0);
  } else if (m.depth() == CV_8U) {
    m8 = m;
  } else {
    throw Error(ErrorCode::UnsupportedFormat, "only 8- and 16-bit images are supported");
  }
  const int src_ch = m8.channels();
  const int ch = src_ch == 1 ? 1 : 3;
  ImageBuffer out(m8.cols, m8.rows, ch);
  for (int y = 0; y < m8.rows; ++y) {
    const std::uint8_t* row = m8.ptr<std::uint8_t>(y);
    for (int x = 0; x < m8.cols; ++x) {
      if (ch == 1) {
        out.at(x, y) = row[x] / 255.0f;
      } else {
        // OpenCV stores BGR(A).
        const std::uint8_t* px = row + static_cast<std::ptrdiff_t>(x) * src_ch;
        out.at(x, y, 0) = px[2] / 255.0f;
        out.at(x, y, 1) = px[1] / 255.0f;
        out.at(x, y, 2) = px[0] / 255.0f;
      }
    }
  }
  return out;
}

inline cv::Mat to_mat(const ImageBuffer& img) {
  cv::Mat m(img.height(), img.width(), img.channels() == 1 ? CV_8UC1 : CV_8UC3);
  for (int y = 0; y < img.height(); ++y) {
    std::uint8_t* row = m.ptr<std::uint8_t>(y);
    for (int x = 0; x < img.width(); ++x) {
      if (img.channels() == 1) {
        row[x] = quantize(img.at(x, y));
      } else {
        row[3 * x + 0] = quantize(img.at(x, y, 2));
        row[3 * x + 1] = quantize(img.at(x, y, 1));
        row[3 * x + 2] = quantize(img.at(x, y, 0));
      }
    }
  }
  return m;
}

}  // namespace detail

/// Loads a PNG or JPEG as RGB. Grayscale files are replicated to three
/// channels and any alpha channel is dropped.
inline ImageBuffer load_image(const std::filesystem::path& path) {
  const auto bytes = detail::read_bytes(path);
  const cv::Mat raw = detail::decode(bytes, path.string(), cv::IMREAD_COLOR | cv::IMREAD_ANYDEPTH);
  return detail::from_mat(raw);
}

/// Loads a PNG or JPEG as a single plane.
inline ImageBuffer load_gray_image(const std::filesystem::path& path) {
  const auto bytes = detail::read_bytes(path);
  const cv::Mat raw =
      detail::decode(bytes, path.string(), cv::IMREAD_GRAYSCALE | cv::IMREAD_ANYDEPTH);
  return detail::from_mat(raw);
}

inline ImageFormat format_for(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  if (ext == ".png") return ImageFormat::png;
  if (ext == ".jpg" || ext == ".jpeg") return ImageFormat::jpeg;
  throw Error(ErrorCode::UnsupportedFormat, "cannot infer format from " + path.string());
}

/// Encodes to 8-bit PNG (lossless, deterministic) or JPEG (quality 95).
inline std::vector<std::uint8_t> encode_image(const ImageBuffer& img, ImageFormat fmt) {
  std::vector<std::uint8_t> buf;
  const cv::Mat m = detail::to_mat(img);
  const bool ok = fmt == ImageFormat::png
                      ? cv::imencode(".png", m, buf, {cv::IMWRITE_PNG_COMPRESSION, 6})
                      : cv::imencode(".jpg", m, buf, {cv::IMWRITE_JPEG_QUALITY, 95});
  if (!ok) throw Error(ErrorCode::IoError, "image encoding failed");
  return buf;
}

/// Writes through a temporary sibling file and renames it into place, so a
/// reader never observes a partially written image.
inline void write_file_atomic(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  namespace fs = std::filesystem;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.parent_path() / ("." + path.filename().string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorCode::IoError, "short write to " + tmp.string());
  }
  fs::rename(tmp, path);
}

inline void save_image(const ImageBuffer& img, const std::filesystem::path& path) {
  write_file_atomic(path, encode_image(img, format_for(path)));
}

}  // namespace fundus
