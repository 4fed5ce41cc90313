#include "adasiam/io.hpp"

#include <png.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "adasiam/errors.hpp"

namespace adasiam {

namespace fs = std::filesystem;

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

void write_png(const fs::path& path, const Tensor& image) {
  if (image.rank() != 3 || (image.dim(0) != 1 && image.dim(0) != 3)) {
    throw ConfigError("write_png: expected a 1- or 3-channel CHW tensor, got " + shape_string(image.shape()));
  }
  const std::size_t c = image.dim(0), h = image.dim(1), w = image.dim(2);
  std::vector<png_byte> pixels(c * h * w);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      for (std::size_t k = 0; k < c; ++k) {
        const double v = std::clamp(image.at(k, y, x), 0.0, 1.0);
        pixels[(y * w + x) * c + k] = static_cast<png_byte>(std::lround(v * 255.0));
      }
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(w);
  png.height = static_cast<png_uint_32>(h);
  png.format = c == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&png, path.c_str(), 0, pixels.data(), 0, nullptr)) {
    throw std::runtime_error("cannot write " + path.string() + ": " + png.message);
  }
}

Tensor read_png(const fs::path& path) {
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&png, path.c_str())) {
    throw std::runtime_error("cannot read " + path.string() + ": " + png.message);
  }
  png.format = PNG_FORMAT_RGB;
  std::vector<png_byte> pixels(PNG_IMAGE_SIZE(png));
  if (!png_image_finish_read(&png, nullptr, pixels.data(), 0, nullptr)) {
    throw std::runtime_error("cannot decode " + path.string() + ": " + png.message);
  }
  const std::size_t h = png.height, w = png.width;
  Tensor out({3, h, w});
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      for (std::size_t k = 0; k < 3; ++k) out.at(k, y, x) = pixels[(y * w + x) * 3 + k] / 255.0;
  return out;
}

void write_text_file(const fs::path& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << contents;
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_ground_truth(const fs::path& path, std::span<const Box> boxes) {
  std::string text;
  for (const Box& b : boxes) {
    text += format_double(b.x) + "," + format_double(b.y) + "," + format_double(b.w) + "," +
            format_double(b.h) + "\n";
  }
  write_text_file(path, text);
}

std::vector<Box> read_ground_truth(const fs::path& path) {
  std::istringstream in(read_text_file(path));
  std::vector<Box> boxes;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    double v[4];
    std::size_t pos = 0;
    for (int k = 0; k < 4; ++k) {
      const std::size_t end = k < 3 ? line.find(',', pos) : line.size();
      if (end == std::string::npos) throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": expected x,y,w,h");
      const auto res = std::from_chars(line.data() + pos, line.data() + end, v[k]);
      if (res.ec != std::errc() || res.ptr != line.data() + end) {
        throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": bad number");
      }
      pos = end + 1;
    }
    const Box b{v[0], v[1], v[2], v[3]};
    if (!b.valid()) throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": non-positive box size");
    boxes.push_back(b);
  }
  return boxes;
}

std::string frame_file_name(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%04zu.png", index);
  return buf;
}

void save_sequence(const fs::path& dir, const Sequence& sequence) {
  fs::create_directories(dir);
  for (std::size_t t = 0; t < sequence.length(); ++t) write_png(dir / frame_file_name(t + 1), sequence.frames[t]);
  write_ground_truth(dir / kGroundTruthFile, sequence.ground_truth);
}

Sequence load_sequence(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw ConfigError("sequence directory not found: " + dir.string());
  const fs::path gt = dir / kGroundTruthFile;
  if (!fs::exists(gt)) throw ConfigError("missing " + gt.string());
  Sequence seq;
  seq.name = dir.filename().string();
  if (seq.name.empty()) seq.name = dir.parent_path().filename().string();
  seq.ground_truth = read_ground_truth(gt);
  for (std::size_t t = 1; fs::exists(dir / frame_file_name(t)); ++t) seq.frames.push_back(read_png(dir / frame_file_name(t)));
  if (seq.frames.size() != seq.ground_truth.size()) {
    throw ConfigError(dir.string() + ": " + std::to_string(seq.frames.size()) + " frames but " +
                      std::to_string(seq.ground_truth.size()) + " ground-truth lines");
  }
  return seq;
}

void draw_box(Tensor& image, const Box& box, const double (&rgb)[3]) {
  const long h = static_cast<long>(image.dim(1)), w = static_cast<long>(image.dim(2));
  const long x0 = std::lround(box.x), y0 = std::lround(box.y);
  const long x1 = std::lround(box.right()) - 1, y1 = std::lround(box.bottom()) - 1;
  const auto put = [&](long x, long y) {
    if (x < 0 || y < 0 || x >= w || y >= h) return;
    for (std::size_t c = 0; c < 3 && c < image.dim(0); ++c)
      image.at(c, static_cast<std::size_t>(y), static_cast<std::size_t>(x)) = rgb[c];
  };
  for (long x = x0; x <= x1; ++x) {
    put(x, y0);
    put(x, y1);
  }
  for (long y = y0; y <= y1; ++y) {
    put(x0, y);
    put(x1, y);
  }
}

}  // namespace adasiam
