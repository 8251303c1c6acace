#include "iie/core/graph.h"

namespace iie {

namespace {

template <class T>
std::vector<Graph<T>*>& stack() {
    thread_local std::vector<Graph<T>*> s;
    return s;
}

}  // namespace

template <class T>
Graph<T>::Graph() {
    stack<T>().push_back(this);
}

template <class T>
Graph<T>::~Graph() {
    stack<T>().pop_back();
}

template <class T>
Graph<T>* Graph<T>::current() {
    auto& s = stack<T>();
    return s.empty() ? nullptr : s.back();
}

template <class T>
void Graph<T>::backward(Tensor<T>& loss) {
    if (loss.numel() != 1)
        throw shape_error("backward: loss must be scalar, got " + shape_str(loss.shape()));
    loss.ensure_grad();
    loss.grad()[0] += T(1);
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
}

template class Graph<float>;
template class Graph<double>;

}  // namespace iie
