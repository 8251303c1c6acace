#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "iie/model/model.h"

namespace iie {

// Bit-exact tensor container:
//   "IIEL" | u32 version | u64 meta_len | metadata (UTF-8 JSON) | u64 meta_fnv1a
//   | u32 n_tensors | table | u64 payload_len | payload
// table entry: u16 name_len | name | u8 dtype | u8 ndim | i64 dims
//   | u64 offset | u64 nbytes
// Everything little-endian. Offsets are payload-relative, in-bounds and
// non-overlapping; the metadata digest is validated on load.

enum class DType : uint8_t { f32 = 0, f64 = 1, i32 = 2 };

size_t dtype_size(DType d);

struct StoredTensor {
    DType dtype = DType::f32;
    Shape shape;
    std::vector<uint8_t> bytes;
};

class CheckpointWriter {
public:
    explicit CheckpointWriter(std::string metadata_json) : metadata_(std::move(metadata_json)) {}

    void add_tensor(const std::string& name, DType dtype, const Shape& shape, const void* data);

    void write(const std::string& path) const;
    std::vector<uint8_t> to_bytes() const;

private:
    std::string metadata_;
    std::vector<std::pair<std::string, StoredTensor>> tensors_;
};

struct LoadedCheckpoint {
    std::string metadata;
    std::vector<std::pair<std::string, StoredTensor>> tensors;

    const StoredTensor* find(const std::string& name) const;
};

LoadedCheckpoint load_checkpoint(const std::string& path);
LoadedCheckpoint checkpoint_from_bytes(const std::vector<uint8_t>& bytes);

template <class T>
constexpr DType dtype_of();

// Writes every named parameter of the model plus the metadata document.
template <class T>
void save_model_checkpoint(const std::string& path, const Model<T>& model,
                           const std::string& metadata_json);

// Rebuilds a model of the given config from stored tensors (all parameters
// must be present with matching dtype and shape).
template <class T>
Model<T> model_from_checkpoint(const LoadedCheckpoint& ckpt, const ModelConfig& cfg);

}  // namespace iie
