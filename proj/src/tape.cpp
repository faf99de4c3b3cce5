#include "bankfuse/tape.hpp"

#include <cmath>

#include "bankfuse/kernels.hpp"

namespace bankfuse {

namespace {
void require_same_tape(const Value& a, const Value& b, const char* op) {
    if (a.tape() == nullptr || a.tape() != b.tape())
        throw std::invalid_argument(std::string(op) + ": operands are not on the same tape");
}

Matrix transposed(const Matrix& m) {
    Matrix t(m.cols, m.rows);
    for (int i = 0; i < m.rows; ++i)
        for (int j = 0; j < m.cols; ++j) t(j, i) = m(i, j);
    return t;
}
}  // namespace

const Matrix& Value::m() const { return tape_->value_of(id_); }

Value Tape::leaf(Matrix value) { return make_node(std::move(value), {}, nullptr); }

Value Tape::make_node(Matrix value, std::vector<int> parents, BackwardFn fn) {
    nodes_.push_back(Node{std::move(value), std::move(parents), std::move(fn)});
    return Value(this, static_cast<int>(nodes_.size()) - 1);
}

void Tape::accumulate(int id, const Matrix& g) {
    Matrix& slot = grads_[id];
    if (slot.rows == 0 && slot.cols == 0) {
        slot = g;
        return;
    }
    require_same_shape(slot, g, "grad accumulate");
    for (size_t i = 0; i < slot.size(); ++i) slot.data[i] += g.data[i];
}

void Tape::backward(const Value& root) {
    if (root.tape() != this) throw std::invalid_argument("backward: root is not on this tape");
    const Matrix& r = value_of(root.id());
    if (r.rows != 1 || r.cols != 1)
        throw std::invalid_argument("backward: root must be a 1x1 scalar, got " + r.shape_str());
    grads_.assign(nodes_.size(), Matrix());
    grads_[root.id()] = Matrix(1, 1, {1.0});
    for (int id = root.id(); id >= 0; --id) {
        const Matrix& g = grads_[id];
        if (g.rows == 0 || !nodes_[id].backward) continue;
        nodes_[id].backward(*this, g);
    }
}

Matrix Tape::grad(const Value& v) const {
    if (v.tape() != this) throw std::invalid_argument("grad: value is not on this tape");
    if (grads_.empty() || grads_[v.id()].rows == 0)
        return Matrix(value_of(v.id()).rows, value_of(v.id()).cols);
    return grads_[v.id()];
}

Value matmul(Value a, Value b) {
    require_same_tape(a, b, "matmul");
    Tape& t = *a.tape();
    Matrix out;
    kernels::matmul(a.m(), b.m(), out);
    const int pa = a.id(), pb = b.id();
    return t.make_node(std::move(out), {pa, pb}, [pa, pb](Tape& tp, const Matrix& g) {
        Matrix da, db;
        kernels::matmul(g, transposed(tp.value_of(pb)), da);
        kernels::matmul(transposed(tp.value_of(pa)), g, db);
        tp.accumulate(pa, da);
        tp.accumulate(pb, db);
    });
}

Value add(Value a, Value b) {
    require_same_tape(a, b, "add");
    require_same_shape(a.m(), b.m(), "add");
    Tape& t = *a.tape();
    Matrix out = a.m();
    for (size_t i = 0; i < out.size(); ++i) out.data[i] += b.m().data[i];
    const int pa = a.id(), pb = b.id();
    return t.make_node(std::move(out), {pa, pb}, [pa, pb](Tape& tp, const Matrix& g) {
        tp.accumulate(pa, g);
        tp.accumulate(pb, g);
    });
}

Value scale(Value a, double s) {
    Tape& t = *a.tape();
    Matrix out = a.m();
    for (auto& v : out.data) v *= s;
    const int pa = a.id();
    return t.make_node(std::move(out), {pa}, [pa, s](Tape& tp, const Matrix& g) {
        Matrix da = g;
        for (auto& v : da.data) v *= s;
        tp.accumulate(pa, da);
    });
}

Value transpose(Value a) {
    Tape& t = *a.tape();
    const int pa = a.id();
    return t.make_node(transposed(a.m()), {pa}, [pa](Tape& tp, const Matrix& g) {
        tp.accumulate(pa, transposed(g));
    });
}

Value concat_cols(const std::vector<Value>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat_cols: empty part list");
    Tape& t = *parts[0].tape();
    const int rows = parts[0].m().rows;
    int total = 0;
    std::vector<int> ids, widths;
    for (const Value& p : parts) {
        require_same_tape(parts[0], p, "concat_cols");
        if (p.m().rows != rows)
            throw std::invalid_argument("concat_cols: row mismatch " + parts[0].m().shape_str() +
                                        " vs " + p.m().shape_str());
        ids.push_back(p.id());
        widths.push_back(p.m().cols);
        total += p.m().cols;
    }
    Matrix out(rows, total);
    int off = 0;
    for (const Value& p : parts) {
        const Matrix& src = p.m();
        for (int i = 0; i < rows; ++i)
            for (int j = 0; j < src.cols; ++j) out(i, off + j) = src(i, j);
        off += src.cols;
    }
    return t.make_node(std::move(out), ids, [ids, widths, rows](Tape& tp, const Matrix& g) {
        int o = 0;
        for (size_t k = 0; k < ids.size(); ++k) {
            Matrix part(rows, widths[k]);
            for (int i = 0; i < rows; ++i)
                for (int j = 0; j < widths[k]; ++j) part(i, j) = g(i, o + j);
            tp.accumulate(ids[k], part);
            o += widths[k];
        }
    });
}

Value sigmoid(Value x) {
    Tape& t = *x.tape();
    Matrix out;
    kernels::map_sigmoid(x.m(), out);
    const int px = x.id();
    const int self = static_cast<int>(t.node_count());
    return t.make_node(std::move(out), {px}, [px, self](Tape& tp, const Matrix& g) {
        const Matrix& s = tp.value_of(self);
        Matrix dx = g;
        for (size_t i = 0; i < dx.size(); ++i) dx.data[i] *= s.data[i] * (1.0 - s.data[i]);
        tp.accumulate(px, dx);
    });
}

Value softmax_row(Value x) {
    Tape& t = *x.tape();
    Matrix out;
    kernels::softmax_rows(x.m(), out);
    const int px = x.id();
    const int self = static_cast<int>(t.node_count());
    return t.make_node(std::move(out), {px}, [px, self](Tape& tp, const Matrix& g) {
        const Matrix& p = tp.value_of(self);
        Matrix dx(p.rows, p.cols);
        for (int i = 0; i < p.rows; ++i) {
            double dot = 0.0;
            for (int j = 0; j < p.cols; ++j) dot += g(i, j) * p(i, j);
            for (int j = 0; j < p.cols; ++j) dx(i, j) = p(i, j) * (g(i, j) - dot);
        }
        tp.accumulate(px, dx);
    });
}

Value row_dot(Value a, Value b) {
    require_same_tape(a, b, "row_dot");
    require_same_shape(a.m(), b.m(), "row_dot");
    Tape& t = *a.tape();
    const Matrix &ma = a.m(), &mb = b.m();
    Matrix out(ma.rows, 1);
    for (int i = 0; i < ma.rows; ++i) {
        double s = 0.0;
        for (int j = 0; j < ma.cols; ++j) s += ma(i, j) * mb(i, j);
        out(i, 0) = s;
    }
    const int pa = a.id(), pb = b.id();
    return t.make_node(std::move(out), {pa, pb}, [pa, pb](Tape& tp, const Matrix& g) {
        const Matrix &va = tp.value_of(pa), &vb = tp.value_of(pb);
        Matrix da(va.rows, va.cols), db(vb.rows, vb.cols);
        for (int i = 0; i < va.rows; ++i)
            for (int j = 0; j < va.cols; ++j) {
                da(i, j) = g(i, 0) * vb(i, j);
                db(i, j) = g(i, 0) * va(i, j);
            }
        tp.accumulate(pa, da);
        tp.accumulate(pb, db);
    });
}

Value scale_rows(Value w, Value m) {
    require_same_tape(w, m, "scale_rows");
    const Matrix &mw = w.m(), &mm = m.m();
    if (mw.cols != 1 || mw.rows != mm.rows)
        throw std::invalid_argument("scale_rows: weight must be " + std::to_string(mm.rows) +
                                    "x1, got " + mw.shape_str());
    Tape& t = *w.tape();
    Matrix out(mm.rows, mm.cols);
    for (int i = 0; i < mm.rows; ++i)
        for (int j = 0; j < mm.cols; ++j) out(i, j) = mw(i, 0) * mm(i, j);
    const int pw = w.id(), pm = m.id();
    return t.make_node(std::move(out), {pw, pm}, [pw, pm](Tape& tp, const Matrix& g) {
        const Matrix &vw = tp.value_of(pw), &vm = tp.value_of(pm);
        Matrix dw(vw.rows, 1), dm(vm.rows, vm.cols);
        for (int i = 0; i < vm.rows; ++i) {
            double s = 0.0;
            for (int j = 0; j < vm.cols; ++j) {
                s += g(i, j) * vm(i, j);
                dm(i, j) = vw(i, 0) * g(i, j);
            }
            dw(i, 0) = s;
        }
        tp.accumulate(pw, dw);
        tp.accumulate(pm, dm);
    });
}

Value add_row_bias(Value m, Value bias) {
    require_same_tape(m, bias, "add_row_bias");
    const Matrix &mm = m.m(), &mb = bias.m();
    if (mb.rows != 1 || mb.cols != mm.cols)
        throw std::invalid_argument("add_row_bias: bias must be 1x" + std::to_string(mm.cols) +
                                    ", got " + mb.shape_str());
    Tape& t = *m.tape();
    Matrix out = mm;
    for (int i = 0; i < mm.rows; ++i)
        for (int j = 0; j < mm.cols; ++j) out(i, j) += mb(0, j);
    const int pm = m.id(), pb = bias.id();
    return t.make_node(std::move(out), {pm, pb}, [pm, pb](Tape& tp, const Matrix& g) {
        Matrix db(1, g.cols);
        for (int j = 0; j < g.cols; ++j) {
            double s = 0.0;
            for (int i = 0; i < g.rows; ++i) s += g(i, j);
            db(0, j) = s;
        }
        tp.accumulate(pm, g);
        tp.accumulate(pb, db);
    });
}

Value col_range(Value m, int offset, int width) {
    const Matrix& mm = m.m();
    if (offset < 0 || width < 1 || offset + width > mm.cols)
        throw std::invalid_argument("col_range: slice [" + std::to_string(offset) + "," +
                                    std::to_string(offset + width) + ") out of range for " +
                                    mm.shape_str());
    Tape& t = *m.tape();
    Matrix out(mm.rows, width);
    for (int i = 0; i < mm.rows; ++i)
        for (int j = 0; j < width; ++j) out(i, j) = mm(i, offset + j);
    const int pm = m.id();
    return t.make_node(std::move(out), {pm}, [pm, offset, width](Tape& tp, const Matrix& g) {
        const Matrix& vm = tp.value_of(pm);
        Matrix dm(vm.rows, vm.cols);
        for (int i = 0; i < vm.rows; ++i)
            for (int j = 0; j < width; ++j) dm(i, offset + j) = g(i, j);
        tp.accumulate(pm, dm);
    });
}

Value col(Value m, int j) { return col_range(m, j, 1); }

Value sum(Value m) {
    Tape& t = *m.tape();
    Matrix out(1, 1);
    out(0, 0) = kernels::sum_all(m.m());
    const int pm = m.id();
    return t.make_node(std::move(out), {pm}, [pm](Tape& tp, const Matrix& g) {
        const Matrix& vm = tp.value_of(pm);
        tp.accumulate(pm, Matrix::filled(vm.rows, vm.cols, g(0, 0)));
    });
}

Value cross_entropy(Value logits, const std::vector<int>& labels) {
    const Matrix& lg = logits.m();
    if (static_cast<int>(labels.size()) != lg.rows)
        throw std::invalid_argument("cross_entropy: " + std::to_string(labels.size()) +
                                    " labels for " + std::to_string(lg.rows) + " rows");
    for (int i = 0; i < lg.rows; ++i)
        if (labels[i] < 0 || labels[i] >= lg.cols)
            throw std::invalid_argument("cross_entropy: label " + std::to_string(labels[i]) +
                                        " out of range [0," + std::to_string(lg.cols) + ") at row " +
                                        std::to_string(i));
    Tape& t = *logits.tape();

    // per-row loss via log-sum-exp; softmax probabilities cached for backward
    Matrix probs(lg.rows, lg.cols);
    std::vector<double> row_loss(lg.rows);
    for (int i = 0; i < lg.rows; ++i) {
        double mx = lg(i, 0);
        for (int j = 1; j < lg.cols; ++j) mx = std::max(mx, lg(i, j));
        double denom = 0.0;
        for (int j = 0; j < lg.cols; ++j) {
            probs(i, j) = std::exp(lg(i, j) - mx);
            denom += probs(i, j);
        }
        for (int j = 0; j < lg.cols; ++j) probs(i, j) /= denom;
        const double lse = mx + std::log(denom);
        row_loss[i] = lse - lg(i, labels[i]);
    }
    Matrix out(1, 1);
    out(0, 0) = kernels::sum_all(row_loss.data(), row_loss.size()) / lg.rows;

    const int pl = logits.id();
    std::vector<int> labels_copy = labels;
    return t.make_node(std::move(out), {pl},
                       [pl, probs, labels_copy](Tape& tp, const Matrix& g) {
                           const double gs = g(0, 0) / probs.rows;
                           Matrix dl = probs;
                           for (int i = 0; i < dl.rows; ++i) {
                               dl(i, labels_copy[i]) -= 1.0;
                               for (int j = 0; j < dl.cols; ++j) dl(i, j) *= gs;
                           }
                           tp.accumulate(pl, dl);
                       });
}

}  // namespace bankfuse
