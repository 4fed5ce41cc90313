#include "adasiam/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>

#include "adasiam/errors.hpp"

namespace adasiam {

namespace {

constexpr std::size_t kMagicLength = sizeof(kCheckpointMagic) - 1;

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_f64(std::string& out, double d) { put_u64(out, std::bit_cast<std::uint64_t>(d)); }

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  bool done() const { return pos_ == bytes_.size(); }

  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += 8;
    return v;
  }

  double f64() { return std::bit_cast<double>(u64()); }

  std::string text(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw CheckpointError("checkpoint truncated");
  }

  const std::string& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string encode_checkpoint(std::span<const NamedTensor> records) {
  std::string out(kCheckpointMagic, kMagicLength);
  for (const NamedTensor& r : records) {
    put_u64(out, r.name.size());
    out += r.name;
    put_u64(out, r.value.rank());
    for (std::size_t extent : r.value.shape()) put_u64(out, extent);
    for (double v : r.value.values()) put_f64(out, v);
  }
  return out;
}

std::vector<NamedTensor> decode_checkpoint(const std::string& bytes) {
  if (bytes.compare(0, kMagicLength, kCheckpointMagic) != 0) {
    throw CheckpointError("checkpoint magic mismatch");
  }
  Reader reader(bytes);
  reader.text(kMagicLength);
  std::vector<NamedTensor> records;
  while (!reader.done()) {
    NamedTensor r;
    r.name = reader.text(reader.u64());
    const std::uint64_t rank = reader.u64();
    if (rank > 8) throw CheckpointError(r.name + ": implausible rank " + std::to_string(rank));
    Shape shape(rank);
    for (auto& extent : shape) extent = reader.u64();
    const std::size_t volume = shape_volume(shape);
    if (volume > bytes.size() / 8) throw CheckpointError(r.name + ": extents exceed file size");
    std::vector<double> values(volume);
    for (double& v : values) v = reader.f64();
    r.value = Tensor(std::move(shape), std::move(values));
    records.push_back(std::move(r));
  }
  return records;
}

void save_checkpoint(const std::filesystem::path& path, std::span<const NamedTensor> records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot write checkpoint " + path.string());
  const std::string bytes = encode_checkpoint(records);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw CheckpointError("failed writing checkpoint " + path.string());
}

std::vector<NamedTensor> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot read checkpoint " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

std::vector<NamedTensor> to_records(std::span<const LayerParams* const> layers) {
  std::vector<NamedTensor> records;
  for (const LayerParams* layer : layers) {
    records.push_back({layer->name + ".weights", layer->weights});
    records.push_back({layer->name + ".bias", layer->bias});
  }
  return records;
}

void assign_records(std::span<const NamedTensor> records, std::span<LayerParams* const> layers) {
  std::map<std::string, const Tensor*> by_name;
  for (const NamedTensor& r : records) by_name[r.name] = &r.value;
  auto copy_into = [&](const std::string& name, Tensor& target) {
    auto it = by_name.find(name);
    if (it == by_name.end()) throw CheckpointError("checkpoint is missing " + name);
    const Tensor& source = *it->second;
    if (source.rank() != target.rank()) {
      throw CheckpointError(name + ": rank " + std::to_string(source.rank()) + " != expected " +
                            std::to_string(target.rank()));
    }
    for (std::size_t axis = 0; axis < target.rank(); ++axis) {
      if (source.dim(axis) != target.dim(axis)) {
        throw CheckpointError(name + ": extent " + std::to_string(axis) + " is " +
                              std::to_string(source.dim(axis)) + ", config expects " +
                              std::to_string(target.dim(axis)));
      }
    }
    target = source;
  };
  for (LayerParams* layer : layers) {
    copy_into(layer->name + ".weights", layer->weights);
    copy_into(layer->name + ".bias", layer->bias);
  }
}

}  // namespace adasiam
