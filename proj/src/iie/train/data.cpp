#include "iie/train/data.h"

#include <fstream>

namespace iie {

std::vector<uint8_t> load_corpus(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw io_error("cannot open corpus '" + path + "'");
    std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                               std::istreambuf_iterator<char>());
    return bytes;
}

void split_corpus(const std::vector<uint8_t>& bytes, double train_fraction,
                  std::vector<uint8_t>& train, std::vector<uint8_t>& val) {
    if (train_fraction <= 0.0 || train_fraction >= 1.0)
        throw config_error("data.train_fraction must be in (0,1), got " +
                           std::to_string(train_fraction));
    const size_t cut = static_cast<size_t>(static_cast<double>(bytes.size()) * train_fraction);
    train.assign(bytes.begin(), bytes.begin() + cut);
    val.assign(bytes.begin() + cut, bytes.end());
}

BatchStream::BatchStream(const std::vector<uint8_t>& data, int64_t seq_len,
                         int64_t batch_sequences, uint64_t seed)
    : data_(data), seq_len_(seq_len), batch_(batch_sequences), seed_(seed) {
    if (seq_len_ < 1 || batch_ < 1) throw config_error("batch stream: seq_len and batch must be positive");
    const int64_t window = seq_len_ + 1;
    const int64_t n = static_cast<int64_t>(data_.size()) / window;
    if (n < 1)
        throw config_error("corpus too small: " + std::to_string(data_.size()) +
                           " bytes < one window of " + std::to_string(window));
    order_.resize(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) order_[static_cast<size_t>(i)] = i;
    reshuffle();
}

void BatchStream::reshuffle() {
    Rng rng(seed_ + 0x9e3779b97f4a7c15ULL * static_cast<uint64_t>(epoch_));
    for (size_t i = order_.size(); i > 1; --i)
        std::swap(order_[i - 1], order_[rng.uniform_int(i)]);
    cursor_ = 0;
}

Batch BatchStream::next() {
    Batch b;
    b.batch = batch_;
    b.seq_len = seq_len_;
    b.inputs.reserve(batch_ * seq_len_);
    b.targets.reserve(batch_ * seq_len_);
    const int64_t window = seq_len_ + 1;
    for (int64_t s = 0; s < batch_; ++s) {
        if (cursor_ >= order_.size()) {
            ++epoch_;
            reshuffle();
        }
        const int64_t start = order_[cursor_++] * window;
        for (int64_t t = 0; t < seq_len_; ++t) {
            b.inputs.push_back(static_cast<int32_t>(data_[static_cast<size_t>(start + t)]));
            b.targets.push_back(static_cast<int32_t>(data_[static_cast<size_t>(start + t + 1)]));
        }
    }
    return b;
}

std::vector<Batch> eval_batches(const std::vector<uint8_t>& data, int64_t seq_len,
                                int64_t batch_sequences, int64_t max_batches) {
    const int64_t window = seq_len + 1;
    const int64_t n = static_cast<int64_t>(data.size()) / window;
    if (n < 1)
        throw config_error("evaluation slice too small: " + std::to_string(data.size()) +
                           " bytes < one window of " + std::to_string(window));
    std::vector<Batch> out;
    int64_t w = 0;
    while (w < n && (max_batches <= 0 || static_cast<int64_t>(out.size()) < max_batches)) {
        const int64_t take = std::min(batch_sequences, n - w);
        Batch b;
        b.batch = take;
        b.seq_len = seq_len;
        for (int64_t s = 0; s < take; ++s, ++w) {
            const int64_t start = w * window;
            for (int64_t t = 0; t < seq_len; ++t) {
                b.inputs.push_back(static_cast<int32_t>(data[static_cast<size_t>(start + t)]));
                b.targets.push_back(static_cast<int32_t>(data[static_cast<size_t>(start + t + 1)]));
            }
        }
        out.push_back(std::move(b));
    }
    return out;
}

}  // namespace iie
