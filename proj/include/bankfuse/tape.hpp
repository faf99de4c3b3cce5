#pragma once

#include <deque>
#include <functional>
#include <vector>

#include "bankfuse/matrix.hpp"

namespace bankfuse {

class Tape;

/// Handle to a node on a Tape. Cheap to copy; valid as long as the tape lives.
class Value {
public:
    Value() = default;
    const Matrix& m() const;
    int id() const { return id_; }
    Tape* tape() const { return tape_; }

private:
    friend class Tape;
    Value(Tape* t, int id) : tape_(t), id_(id) {}
    Tape* tape_ = nullptr;
    int id_ = -1;
};

/// Reverse-mode tape. Ops append nodes whose parents always have smaller ids,
/// so a reverse sweep by id is a topological order. Gradients accumulate
/// additively across fan-out in that fixed order; two identical forward and
/// backward runs therefore produce bitwise-identical gradients.
class Tape {
public:
    using BackwardFn = std::function<void(Tape&, const Matrix& upstream)>;

    Value leaf(Matrix value);
    Value make_node(Matrix value, std::vector<int> parents, BackwardFn fn);

    /// Reverse sweep from a scalar (1x1) root. Throws on non-scalar roots.
    void backward(const Value& root);

    const Matrix& value_of(int id) const { return nodes_[id].value; }
    /// Gradient of the last backward root w.r.t. this node (zeros if the node
    /// did not participate).
    Matrix grad(const Value& v) const;
    void accumulate(int id, const Matrix& g);

    size_t node_count() const { return nodes_.size(); }

private:
    struct Node {
        Matrix value;
        std::vector<int> parents;
        BackwardFn backward;
    };
    // deque: node references stay valid while ops keep appending
    std::deque<Node> nodes_;
    std::vector<Matrix> grads_;
};

// Ops. All operands must live on the same tape; shape mismatches throw
// std::invalid_argument naming both shapes.
Value matmul(Value a, Value b);
Value add(Value a, Value b);
Value scale(Value a, double s);
Value transpose(Value a);
Value concat_cols(const std::vector<Value>& parts);
Value sigmoid(Value x);
Value softmax_row(Value x);

// rowwise dot product of two BxD matrices -> Bx1
Value row_dot(Value a, Value b);
// scale row i of m by w(i,0): (Bx1, BxD) -> BxD
Value scale_rows(Value w, Value m);
// broadcast a 1xC bias over the rows of a BxC matrix
Value add_row_bias(Value m, Value bias);
// contiguous column slice [offset, offset+width) as a Bxwidth matrix
Value col_range(Value m, int offset, int width);
// single column j as a Bx1 matrix
Value col(Value m, int j);
// sum of all entries -> 1x1
Value sum(Value m);

// mean over rows of -log softmax(logits)[label], log-sum-exp stabilized -> 1x1
Value cross_entropy(Value logits, const std::vector<int>& labels);

}  // namespace bankfuse
