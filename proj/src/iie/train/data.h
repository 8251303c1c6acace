#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "iie/util/errors.h"
#include "iie/util/rng.h"

namespace iie {

// Byte-level corpus (vocab 256). No tokenizer: every architectural question
// survives at byte granularity and the embedding stays desk-sized.
std::vector<uint8_t> load_corpus(const std::string& path);

// Front/back split at the given train fraction.
void split_corpus(const std::vector<uint8_t>& bytes, double train_fraction,
                  std::vector<uint8_t>& train, std::vector<uint8_t>& val);

struct Batch {
    std::vector<int32_t> inputs;   // batch*seq_len, row-major
    std::vector<int32_t> targets;  // inputs shifted by one within each window
    int64_t batch = 0;
    int64_t seq_len = 0;
};

// Deterministic shuffled window sampling: the corpus is cut into
// non-overlapping (seq_len+1)-byte windows whose order is reshuffled each
// epoch from (seed, epoch); batches cycle through that order.
class BatchStream {
public:
    BatchStream(const std::vector<uint8_t>& data, int64_t seq_len, int64_t batch_sequences,
                uint64_t seed);

    Batch next();

    int64_t windows() const { return static_cast<int64_t>(order_.size()); }

private:
    void reshuffle();

    const std::vector<uint8_t>& data_;
    int64_t seq_len_;
    int64_t batch_;
    uint64_t seed_;
    int64_t epoch_ = 0;
    size_t cursor_ = 0;
    std::vector<int64_t> order_;
};

// Sequential (unshuffled) full-window batches over an evaluation slice.
std::vector<Batch> eval_batches(const std::vector<uint8_t>& data, int64_t seq_len,
                                int64_t batch_sequences, int64_t max_batches);

}  // namespace iie
