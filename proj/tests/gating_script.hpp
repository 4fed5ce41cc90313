#pragma once

// A 30-frame scripted score sequence and its hand-traced bookkeeping.
// Rules traced: collect if score > 1.6 or t < 4; short-term if score < 1.6;
// long-term if not short-term and t % 10 == 0. Buffer capacity 10.

#include <array>
#include <cstddef>

namespace gating {

struct Step {
  std::size_t t;
  double score;
  std::size_t buffer;
  std::size_t s_short;
  std::size_t s_long;
  bool upd_short;
  bool upd_long;
};

inline constexpr std::size_t kBufferCapacity = 10;

// clang-format off
inline constexpr std::array<Step, 30> kTrace = {{
  { 2, 0.90,  1,  2,  2, true,  false},
  { 3, 1.00,  2,  3,  3, true,  false},
  { 4, 1.20,  2,  3,  3, true,  false},
  { 5, 1.70,  3,  4,  4, false, false},
  { 6, 1.80,  4,  5,  5, false, false},
  { 7, 1.50,  4,  5,  5, true,  false},
  { 8, 1.60,  4,  5,  5, false, false},
  { 9, 1.90,  5,  6,  6, false, false},
  {10, 1.60,  5,  6,  6, false, true },
  {11, 2.10,  6,  7,  7, false, false},
  {12, 1.40,  6,  7,  7, true,  false},
  {13, 1.80,  7,  8,  8, false, false},
  {14, 1.90,  8,  9,  9, false, false},
  {15, 2.00,  9, 10, 10, false, false},
  {16, 1.70, 10, 11, 11, false, false},
  {17, 1.75, 10, 12, 12, false, false},
  {18, 1.80, 10, 13, 13, false, false},
  {19, 1.85, 10, 14, 14, false, false},
  {20, 1.90, 10, 15, 15, false, true },
  {21, 1.95, 10, 16, 16, false, false},
  {22, 1.00, 10, 16, 16, true,  false},
  {23, 2.00, 10, 17, 17, false, false},
  {24, 2.00, 10, 18, 18, false, false},
  {25, 2.00, 10, 19, 19, false, false},
  {26, 2.00, 10, 20, 20, false, false},
  {27, 2.00, 10, 20, 21, false, false},
  {28, 2.00, 10, 20, 22, false, false},
  {29, 1.20, 10, 20, 22, true,  false},
  {30, 1.65, 10, 20, 23, false, true },
  {31, 1.70, 10, 20, 24, false, false},
}};
// clang-format on

}  // namespace gating
