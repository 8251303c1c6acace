#pragma once

#include <vector>

#include "iie/core/tensor.h"

namespace iie {

// Ordered record of sub-block outputs for one forward pass (the global stack
// of historical hidden states). Exactly one entry is appended per sub-block;
// the iterative solver replaces its own top entry in place as it refines.
template <class T>
class HistoryStack {
public:
    void push(Tensor<T> f) { entries_.push_back(std::move(f)); }

    void replace_top(Tensor<T> f) {
        if (entries_.empty()) throw internal_error("history: replace_top on empty stack");
        entries_.back() = std::move(f);
    }

    int64_t size() const { return static_cast<int64_t>(entries_.size()); }
    bool empty() const { return entries_.empty(); }

    const Tensor<T>& entry(int64_t j) const { return entries_[static_cast<size_t>(j)]; }
    const Tensor<T>& top() const { return entries_.back(); }

    const std::vector<Tensor<T>>& entries() const { return entries_; }

private:
    std::vector<Tensor<T>> entries_;
};

}  // namespace iie
