#pragma once

// Parameter checkpoint format:
//   "ADSM1"
//   repeated until end of stream:
//     u64 name_length, name bytes, u64 rank, rank x u64 extents,
//     volume x f64 values
// All integers and floats little-endian.

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "adasiam/layers.hpp"
#include "adasiam/tensor.hpp"

namespace adasiam {

inline constexpr char kCheckpointMagic[] = "ADSM1";

std::string encode_checkpoint(std::span<const NamedTensor> records);
std::vector<NamedTensor> decode_checkpoint(const std::string& bytes);

void save_checkpoint(const std::filesystem::path& path, std::span<const NamedTensor> records);
std::vector<NamedTensor> load_checkpoint(const std::filesystem::path& path);

// Flattens layers into "<layer>.weights" / "<layer>.bias" records.
std::vector<NamedTensor> to_records(std::span<const LayerParams* const> layers);
/// Copies records into matching layers. Every layer must be present with the
/// exact shape; mismatches raise CheckpointError naming the record and extent.
void assign_records(std::span<const NamedTensor> records, std::span<LayerParams* const> layers);

}  // namespace adasiam
