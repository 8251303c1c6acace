#include "iie/io/checkpoint.h"

#include <algorithm>
#include <cstring>
#include <fstream>

#include "iie/train/metrics.h"  // fnv1a64

namespace iie {

namespace {

constexpr char kMagic[4] = {'I', 'I', 'E', 'L'};
constexpr uint32_t kVersion = 1;

void put_bytes(std::vector<uint8_t>& out, const void* p, size_t n) {
    const uint8_t* b = static_cast<const uint8_t*>(p);
    out.insert(out.end(), b, b + n);
}

template <class U>
void put_le(std::vector<uint8_t>& out, U v) {
    for (size_t i = 0; i < sizeof(U); ++i)
        out.push_back(static_cast<uint8_t>((static_cast<uint64_t>(v) >> (8 * i)) & 0xff));
}

struct Reader {
    const uint8_t* p;
    size_t n;
    size_t pos = 0;

    void need(size_t k) const {
        if (pos + k > n) throw io_error("checkpoint: truncated file");
    }
    template <class U>
    U get_le() {
        need(sizeof(U));
        uint64_t v = 0;
        for (size_t i = 0; i < sizeof(U); ++i) v |= static_cast<uint64_t>(p[pos + i]) << (8 * i);
        pos += sizeof(U);
        return static_cast<U>(v);
    }
    std::string get_str(size_t k) {
        need(k);
        std::string s(reinterpret_cast<const char*>(p + pos), k);
        pos += k;
        return s;
    }
    std::vector<uint8_t> get_bytes(size_t k) {
        need(k);
        std::vector<uint8_t> b(p + pos, p + pos + k);
        pos += k;
        return b;
    }
};

}  // namespace

size_t dtype_size(DType d) {
    switch (d) {
        case DType::f32: return 4;
        case DType::f64: return 8;
        case DType::i32: return 4;
    }
    return 0;
}

void CheckpointWriter::add_tensor(const std::string& name, DType dtype, const Shape& shape,
                                  const void* data) {
    StoredTensor t;
    t.dtype = dtype;
    t.shape = shape;
    const size_t nbytes = static_cast<size_t>(shape_numel(shape)) * dtype_size(dtype);
    t.bytes.assign(static_cast<const uint8_t*>(data), static_cast<const uint8_t*>(data) + nbytes);
    tensors_.emplace_back(name, std::move(t));
}

std::vector<uint8_t> CheckpointWriter::to_bytes() const {
    std::vector<uint8_t> out;
    put_bytes(out, kMagic, 4);
    put_le<uint32_t>(out, kVersion);
    put_le<uint64_t>(out, metadata_.size());
    put_bytes(out, metadata_.data(), metadata_.size());
    put_le<uint64_t>(out, fnv1a64(metadata_.data(), metadata_.size()));
    put_le<uint32_t>(out, static_cast<uint32_t>(tensors_.size()));

    uint64_t offset = 0;
    for (const auto& [name, t] : tensors_) {
        put_le<uint16_t>(out, static_cast<uint16_t>(name.size()));
        put_bytes(out, name.data(), name.size());
        out.push_back(static_cast<uint8_t>(t.dtype));
        out.push_back(static_cast<uint8_t>(t.shape.size()));
        for (int64_t d : t.shape) put_le<int64_t>(out, d);
        put_le<uint64_t>(out, offset);
        put_le<uint64_t>(out, t.bytes.size());
        offset += t.bytes.size();
    }
    put_le<uint64_t>(out, offset);
    for (const auto& [name, t] : tensors_) put_bytes(out, t.bytes.data(), t.bytes.size());
    return out;
}

void CheckpointWriter::write(const std::string& path) const {
    const std::vector<uint8_t> bytes = to_bytes();
    std::ofstream f(path, std::ios::binary);
    if (!f) throw io_error("cannot write checkpoint '" + path + "'");
    f.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
    if (!f) throw io_error("short write on checkpoint '" + path + "'");
}

const StoredTensor* LoadedCheckpoint::find(const std::string& name) const {
    for (const auto& [n, t] : tensors)
        if (n == name) return &t;
    return nullptr;
}

LoadedCheckpoint checkpoint_from_bytes(const std::vector<uint8_t>& bytes) {
    Reader r{bytes.data(), bytes.size()};
    const std::string magic = r.get_str(4);
    if (std::memcmp(magic.data(), kMagic, 4) != 0)
        throw io_error("checkpoint: bad magic (not an IIEL container)");
    const uint32_t version = r.get_le<uint32_t>();
    if (version != kVersion)
        throw io_error("checkpoint: unsupported version " + std::to_string(version));

    LoadedCheckpoint ckpt;
    const uint64_t meta_len = r.get_le<uint64_t>();
    ckpt.metadata = r.get_str(meta_len);
    const uint64_t digest = r.get_le<uint64_t>();
    if (digest != fnv1a64(ckpt.metadata.data(), ckpt.metadata.size()))
        throw io_error("checkpoint: metadata digest mismatch");

    const uint32_t count = r.get_le<uint32_t>();
    struct Entry {
        std::string name;
        DType dtype;
        Shape shape;
        uint64_t offset, nbytes;
    };
    std::vector<Entry> entries;
    for (uint32_t i = 0; i < count; ++i) {
        Entry e;
        const uint16_t name_len = r.get_le<uint16_t>();
        e.name = r.get_str(name_len);
        const uint8_t dt = r.get_le<uint8_t>();
        if (dt > 2) throw io_error("checkpoint: unknown dtype tag " + std::to_string(dt));
        e.dtype = static_cast<DType>(dt);
        const uint8_t ndim = r.get_le<uint8_t>();
        for (uint8_t d = 0; d < ndim; ++d) e.shape.push_back(r.get_le<int64_t>());
        e.offset = r.get_le<uint64_t>();
        e.nbytes = r.get_le<uint64_t>();
        if (e.nbytes != static_cast<uint64_t>(shape_numel(e.shape)) * dtype_size(e.dtype))
            throw io_error("checkpoint: tensor '" + e.name + "' byte length does not match shape");
        entries.push_back(std::move(e));
    }
    const uint64_t payload_len = r.get_le<uint64_t>();

    // offsets must be in-bounds and non-overlapping
    std::vector<std::pair<uint64_t, uint64_t>> spans;
    for (const auto& e : entries) {
        if (e.offset + e.nbytes > payload_len)
            throw io_error("checkpoint: tensor '" + e.name + "' extends past the payload");
        spans.emplace_back(e.offset, e.offset + e.nbytes);
    }
    std::sort(spans.begin(), spans.end());
    for (size_t i = 1; i < spans.size(); ++i)
        if (spans[i].first < spans[i - 1].second)
            throw io_error("checkpoint: overlapping tensor payloads");

    const std::vector<uint8_t> payload = r.get_bytes(payload_len);
    for (auto& e : entries) {
        StoredTensor t;
        t.dtype = e.dtype;
        t.shape = std::move(e.shape);
        t.bytes.assign(payload.begin() + static_cast<ptrdiff_t>(e.offset),
                       payload.begin() + static_cast<ptrdiff_t>(e.offset + e.nbytes));
        ckpt.tensors.emplace_back(std::move(e.name), std::move(t));
    }
    return ckpt;
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw io_error("cannot open checkpoint '" + path + "'");
    std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                               std::istreambuf_iterator<char>());
    return checkpoint_from_bytes(bytes);
}

template <>
constexpr DType dtype_of<float>() {
    return DType::f32;
}
template <>
constexpr DType dtype_of<double>() {
    return DType::f64;
}

template <class T>
void save_model_checkpoint(const std::string& path, const Model<T>& model,
                           const std::string& metadata_json) {
    CheckpointWriter w(metadata_json);
    for (const auto& [name, t] : model.named_params())
        w.add_tensor(name, dtype_of<T>(), t.shape(), t.data());
    w.write(path);
}

template <class T>
Model<T> model_from_checkpoint(const LoadedCheckpoint& ckpt, const ModelConfig& cfg) {
    Model<T> model = Model<T>::zeros(cfg);
    for (const auto& [name, param] : model.named_params()) {
        const StoredTensor* st = ckpt.find(name);
        if (!st) throw io_error("checkpoint: missing tensor '" + name + "'");
        if (st->dtype != dtype_of<T>())
            throw io_error("checkpoint: tensor '" + name + "' has a different dtype");
        if (st->shape != param.shape())
            throw io_error("checkpoint: tensor '" + name + "' shape mismatch");
        Tensor<T> dst = param;
        std::memcpy(dst.data(), st->bytes.data(), st->bytes.size());
    }
    return model;
}

template void save_model_checkpoint(const std::string&, const Model<float>&, const std::string&);
template void save_model_checkpoint(const std::string&, const Model<double>&, const std::string&);
template Model<float> model_from_checkpoint(const LoadedCheckpoint&, const ModelConfig&);
template Model<double> model_from_checkpoint(const LoadedCheckpoint&, const ModelConfig&);

}  // namespace iie
