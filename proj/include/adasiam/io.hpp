#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "adasiam/box.hpp"
#include "adasiam/sequence.hpp"
#include "adasiam/tensor.hpp"

namespace adasiam {

/// Shortest decimal form that parses back to the same double.
std::string format_double(double v);

// 8-bit PNG. Tensors are CHW in [0, 1] with 1 (gray) or 3 (RGB) channels;
// values are clamped and rounded to k/255 on write.
void write_png(const std::filesystem::path& path, const Tensor& image);
Tensor read_png(const std::filesystem::path& path);

// One "x,y,w,h" line per frame.
void write_ground_truth(const std::filesystem::path& path, std::span<const Box> boxes);
std::vector<Box> read_ground_truth(const std::filesystem::path& path);

inline constexpr char kGroundTruthFile[] = "groundtruth.txt";

/// Frames as 0001.png, 0002.png, ... plus groundtruth.txt.
void save_sequence(const std::filesystem::path& dir, const Sequence& sequence);
/// Sequence name is the directory name. Throws std::runtime_error on missing files.
Sequence load_sequence(const std::filesystem::path& dir);

std::string frame_file_name(std::size_t index);  // 1-based

/// Draws a 1-pixel rectangle outline in place (RGB color in [0, 1]).
void draw_box(Tensor& image, const Box& box, const double (&rgb)[3]);

void write_text_file(const std::filesystem::path& path, const std::string& contents);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace adasiam
