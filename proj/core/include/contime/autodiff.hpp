#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "contime/tensor.hpp"

namespace contime::ad {

class Tape;

/// Handle to a value that may be recorded on a tape. With a null tape the
/// same ops evaluate eagerly, so inference and training share one code path.
struct Var {
    std::shared_ptr<const Tensor> val;
    Tape* tape = nullptr;
    int id = -1;

    Var() = default;
    const Tensor& value() const { return *val; }
    bool tracked() const { return tape != nullptr && id >= 0; }
    int rows() const { return val->rows; }
    int cols() const { return val->cols; }
    double scalar() const {
        if (val->size() != 1) throw ShapeError("Var::scalar on " + val->shape_str());
        return (*val)[0];
    }
};

Var constant(Tensor v);
Var constant(double v);

/// Append-only record of primitives. Node ids are topologically ordered by
/// construction, so reverse accumulation is a single backward sweep.
class Tape {
  public:
    using BackFn = std::function<void(const Tensor& g, std::vector<Tensor>& grads)>;

    Var leaf(const Tensor& v);

    /// Reverse pass from a scalar loss. Returns one gradient slot per node;
    /// slots never touched by the loss stay empty.
    std::vector<Tensor> backward(const Var& loss) const;

    /// Gradient of a leaf, zero-filled when the loss never used it.
    static Tensor grad_of(const std::vector<Tensor>& grads, const Var& leaf);

    int add_node(const char* op, std::vector<int> parents, BackFn back);
    int size() const { return static_cast<int>(nodes_.size()); }
    const char* op_name(int id) const { return nodes_[static_cast<std::size_t>(id)].op; }

    static void accumulate(std::vector<Tensor>& grads, int id, const Tensor& g);

  private:
    struct Node {
        const char* op;
        std::vector<int> parents;
        BackFn back; // empty for leaves
    };
    std::vector<Node> nodes_;
};

// Elementwise / structural primitives. Shapes are checked; mixing Vars from
// two different tapes is a tape error.
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double c);
Var rsub_scalar(double c, const Var& a); // c - a
Var matvec(const Var& A, const Var& x);
Var sigmoid(const Var& a);
Var tanh_v(const Var& a);
Var exp_v(const Var& a);
Var log_v(const Var& a);
Var square(const Var& a);
Var sum(const Var& a);
Var mean(const Var& a);
Var reshape(const Var& a, int rows, int cols);
Var gather(const Var& a, std::vector<int> indices);
Var at(const Var& a, int index);
/// out[i][j] = A[i][j] + v[j]
Var add_rowbcast(const Var& A, const Var& v);
/// Smoothed minimum of three scalars: -gamma * log(sum_i exp(-x_i/gamma)).
Var softmin3(const Var& x, const Var& y, const Var& z, double gamma);

} // namespace contime::ad
