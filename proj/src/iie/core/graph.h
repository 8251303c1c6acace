#pragma once

#include <functional>
#include <vector>

#include "iie/core/tensor.h"

namespace iie {

// Tape-style reverse-mode graph. One Graph per forward pass; constructing it
// makes it the active tape for the current thread, destruction pops it. Ops
// append a backward closure per node; backward() replays them in strict
// reverse append order, accumulating (adding) into input grads.
template <class T>
class Graph {
public:
    Graph();
    ~Graph();
    Graph(const Graph&) = delete;
    Graph& operator=(const Graph&) = delete;

    static Graph* current();

    void record(std::function<void()> bwd) { nodes_.push_back(std::move(bwd)); }

    size_t size() const { return nodes_.size(); }

    // Seeds d(loss)/d(loss) = 1 and replays the tape. Loss must be scalar.
    // Calling backward again without zeroing grads accumulates.
    void backward(Tensor<T>& loss);

private:
    std::vector<std::function<void()>> nodes_;
};

// True when a graph is active on this thread and any input requires grad.
template <class T>
bool recording_for(std::initializer_list<const Tensor<T>*> inputs) {
    if (Graph<T>::current() == nullptr) return false;
    for (const Tensor<T>* t : inputs)
        if (t->defined() && t->requires_grad()) return true;
    return false;
}

}  // namespace iie
