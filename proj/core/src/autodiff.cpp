#include "contime/autodiff.hpp"

#include <algorithm>
#include <cmath>

namespace contime::ad {

namespace {

std::shared_ptr<const Tensor> share(Tensor t) {
    return std::make_shared<const Tensor>(std::move(t));
}

/// Resolve the tape the result lives on; null when all inputs are untracked.
Tape* result_tape(std::initializer_list<const Var*> inputs) {
    Tape* t = nullptr;
    for (const Var* v : inputs) {
        if (!v->tracked()) continue;
        if (t != nullptr && v->tape != t) throw TapeError("op mixes Vars from two tapes");
        t = v->tape;
    }
    return t;
}

Var finish(Tensor out, Tape* t, const char* op, std::vector<int> parents, Tape::BackFn back) {
    Var r;
    r.val = share(std::move(out));
    r.tape = t;
    if (t != nullptr) r.id = t->add_node(op, std::move(parents), std::move(back));
    return r;
}

} // namespace

Var constant(Tensor v) {
    Var r;
    r.val = share(std::move(v));
    return r;
}

Var constant(double v) { return constant(Tensor::scalar(v)); }

Var Tape::leaf(const Tensor& v) {
    Var r;
    r.val = share(v);
    r.tape = this;
    r.id = add_node("leaf", {}, nullptr);
    return r;
}

int Tape::add_node(const char* op, std::vector<int> parents, BackFn back) {
    for (int p : parents)
        if (p < 0 || p >= size()) throw TapeError(std::string("node input id out of range for op ") + op);
    nodes_.push_back(Node{op, std::move(parents), std::move(back)});
    return size() - 1;
}

void Tape::accumulate(std::vector<Tensor>& grads, int id, const Tensor& g) {
    Tensor& slot = grads[static_cast<std::size_t>(id)];
    if (slot.size() == 0) {
        slot = g;
        return;
    }
    check_same_shape(slot, g, "Tape::accumulate");
    for (int i = 0; i < slot.size(); ++i) slot[i] += g[i];
}

std::vector<Tensor> Tape::backward(const Var& loss) const {
    if (!loss.tracked() || loss.tape != this) throw TapeError("backward: loss is not on this tape");
    if (loss.value().size() != 1) throw TapeError("backward: loss must be scalar, got " + loss.value().shape_str());

    std::vector<Tensor> grads(nodes_.size());
    grads[static_cast<std::size_t>(loss.id)] = Tensor::scalar(1.0);

    for (int i = loss.id; i >= 0; --i) {
        const Tensor& g = grads[static_cast<std::size_t>(i)];
        if (g.size() == 0) continue;
        if (!g.all_finite())
            throw NumericError("non-finite adjoint at node " + std::to_string(i) + " (" + nodes_[static_cast<std::size_t>(i)].op + ")");
        if (nodes_[static_cast<std::size_t>(i)].back) nodes_[static_cast<std::size_t>(i)].back(g, grads);
    }
    return grads;
}

Tensor Tape::grad_of(const std::vector<Tensor>& grads, const Var& leaf) {
    if (!leaf.tracked()) throw TapeError("grad_of: Var is not tracked");
    const Tensor& g = grads[static_cast<std::size_t>(leaf.id)];
    if (g.size() == 0) return Tensor::zeros(leaf.rows(), leaf.cols());
    return g;
}

Var add(const Var& a, const Var& b) {
    check_same_shape(a.value(), b.value(), "add");
    Tensor out = a.value();
    for (int i = 0; i < out.size(); ++i) out[i] += b.value()[i];
    Tape* t = result_tape({&a, &b});
    const int ia = a.id, ib = b.id;
    return finish(std::move(out), t, "add", {}, [ia, ib](const Tensor& g, std::vector<Tensor>& grads) {
        if (ia >= 0) Tape::accumulate(grads, ia, g);
        if (ib >= 0) Tape::accumulate(grads, ib, g);
    });
}

Var sub(const Var& a, const Var& b) {
    check_same_shape(a.value(), b.value(), "sub");
    Tensor out = a.value();
    for (int i = 0; i < out.size(); ++i) out[i] -= b.value()[i];
    Tape* t = result_tape({&a, &b});
    const int ia = a.id, ib = b.id;
    return finish(std::move(out), t, "sub", {}, [ia, ib](const Tensor& g, std::vector<Tensor>& grads) {
        if (ia >= 0) Tape::accumulate(grads, ia, g);
        if (ib >= 0) {
            Tensor ng = g;
            for (int i = 0; i < ng.size(); ++i) ng[i] = -ng[i];
            Tape::accumulate(grads, ib, ng);
        }
    });
}

Var mul(const Var& a, const Var& b) {
    check_same_shape(a.value(), b.value(), "mul");
    Tensor out = a.value();
    for (int i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
    Tape* t = result_tape({&a, &b});
    const int ia = a.id, ib = b.id;
    auto av = a.val, bv = b.val;
    return finish(std::move(out), t, "mul", {}, [ia, ib, av, bv](const Tensor& g, std::vector<Tensor>& grads) {
        if (ia >= 0) {
            Tensor ga = g;
            for (int i = 0; i < ga.size(); ++i) ga[i] *= (*bv)[i];
            Tape::accumulate(grads, ia, ga);
        }
        if (ib >= 0) {
            Tensor gb = g;
            for (int i = 0; i < gb.size(); ++i) gb[i] *= (*av)[i];
            Tape::accumulate(grads, ib, gb);
        }
    });
}

Var scale(const Var& a, double c) {
    Tensor out = a.value();
    for (int i = 0; i < out.size(); ++i) out[i] *= c;
    Tape* t = result_tape({&a});
    const int ia = a.id;
    return finish(std::move(out), t, "scale", {}, [ia, c](const Tensor& g, std::vector<Tensor>& grads) {
        if (ia >= 0) {
            Tensor ga = g;
            for (int i = 0; i < ga.size(); ++i) ga[i] *= c;
            Tape::accumulate(grads, ia, ga);
        }
    });
}

Var rsub_scalar(double c, const Var& a) {
    Tensor out = a.value();
    for (int i = 0; i < out.size(); ++i) out[i] = c - out[i];
    Tape* t = result_tape({&a});
    const int ia = a.id;
    return finish(std::move(out), t, "rsub_scalar", {}, [ia](const Tensor& g, std::vector<Tensor>& grads) {
        if (ia >= 0) {
            Tensor ga = g;
            for (int i = 0; i < ga.size(); ++i) ga[i] = -ga[i];
            Tape::accumulate(grads, ia, ga);
        }
    });
}

Var matvec(const Var& A, const Var& x) {
    Tensor out = matvec_value(A.value(), x.value());
    Tape* t = result_tape({&A, &x});
    const int iA = A.id, ix = x.id;
    auto Av = A.val, xv = x.val;
    return finish(std::move(out), t, "matvec", {}, [iA, ix, Av, xv](const Tensor& g, std::vector<Tensor>& grads) {
        if (iA >= 0) {
            // dA = g * x^T
            Tensor gA(Av->rows, Av->cols);
            for (int i = 0; i < gA.rows; ++i)
                for (int j = 0; j < gA.cols; ++j) gA(i, j) = g[i] * (*xv)[j];
            Tape::accumulate(grads, iA, gA);
        }
        if (ix >= 0) {
            // dx = A^T * g
            Tensor gx(xv->rows, 1);
            for (int j = 0; j < Av->cols; ++j) {
                double acc = 0.0;
                for (int i = 0; i < Av->rows; ++i) acc += (*Av)(i, j) * g[i];
                gx[j] = acc;
            }
            Tape::accumulate(grads, ix, gx);
        }
    });
}

Var sigmoid(const Var& a) {
    Tensor out = a.value();
    for (int i = 0; i < out.size(); ++i) out[i] = 1.0 / (1.0 + std::exp(-out[i]));
    Tape* t = result_tape({&a});
    const int ia = a.id;
    auto ov = share(std::move(out));
    Var r;
    r.val = ov;
    r.tape = t;
    if (t != nullptr)
        r.id = t->add_node("sigmoid", {}, [ia, ov](const Tensor& g, std::vector<Tensor>& grads) {
            if (ia < 0) return;
            Tensor ga = g;
            for (int i = 0; i < ga.size(); ++i) {
                const double s = (*ov)[i];
                ga[i] *= s * (1.0 - s);
            }
            Tape::accumulate(grads, ia, ga);
        });
    return r;
}

Var tanh_v(const Var& a) {
    Tensor out = a.value();
    for (int i = 0; i < out.size(); ++i) out[i] = std::tanh(out[i]);
    Tape* t = result_tape({&a});
    const int ia = a.id;
    auto ov = share(std::move(out));
    Var r;
    r.val = ov;
    r.tape = t;
    if (t != nullptr)
        r.id = t->add_node("tanh", {}, [ia, ov](const Tensor& g, std::vector<Tensor>& grads) {
            if (ia < 0) return;
            Tensor ga = g;
            for (int i = 0; i < ga.size(); ++i) {
                const double y = (*ov)[i];
                ga[i] *= 1.0 - y * y;
            }
            Tape::accumulate(grads, ia, ga);
        });
    return r;
}

Var exp_v(const Var& a) {
    Tensor out = a.value();
    for (int i = 0; i < out.size(); ++i) out[i] = std::exp(out[i]);
    Tape* t = result_tape({&a});
    const int ia = a.id;
    auto ov = share(std::move(out));
    Var r;
    r.val = ov;
    r.tape = t;
    if (t != nullptr)
        r.id = t->add_node("exp", {}, [ia, ov](const Tensor& g, std::vector<Tensor>& grads) {
            if (ia < 0) return;
            Tensor ga = g;
            for (int i = 0; i < ga.size(); ++i) ga[i] *= (*ov)[i];
            Tape::accumulate(grads, ia, ga);
        });
    return r;
}

Var log_v(const Var& a) {
    Tensor out = a.value();
    for (int i = 0; i < out.size(); ++i) out[i] = std::log(out[i]);
    Tape* t = result_tape({&a});
    const int ia = a.id;
    auto av = a.val;
    return finish(std::move(out), t, "log", {}, [ia, av](const Tensor& g, std::vector<Tensor>& grads) {
        if (ia < 0) return;
        Tensor ga = g;
        for (int i = 0; i < ga.size(); ++i) ga[i] /= (*av)[i];
        Tape::accumulate(grads, ia, ga);
    });
}

Var square(const Var& a) {
    Tensor out = a.value();
    for (int i = 0; i < out.size(); ++i) out[i] *= out[i];
    Tape* t = result_tape({&a});
    const int ia = a.id;
    auto av = a.val;
    return finish(std::move(out), t, "square", {}, [ia, av](const Tensor& g, std::vector<Tensor>& grads) {
        if (ia < 0) return;
        Tensor ga = g;
        for (int i = 0; i < ga.size(); ++i) ga[i] *= 2.0 * (*av)[i];
        Tape::accumulate(grads, ia, ga);
    });
}

Var sum(const Var& a) {
    double acc = 0.0;
    for (int i = 0; i < a.value().size(); ++i) acc += a.value()[i];
    Tape* t = result_tape({&a});
    const int ia = a.id;
    const int r = a.rows(), c = a.cols();
    return finish(Tensor::scalar(acc), t, "sum", {}, [ia, r, c](const Tensor& g, std::vector<Tensor>& grads) {
        if (ia < 0) return;
        Tensor ga(r, c);
        for (int i = 0; i < ga.size(); ++i) ga[i] = g[0];
        Tape::accumulate(grads, ia, ga);
    });
}

Var mean(const Var& a) {
    const int n = a.value().size();
    if (n == 0) throw ShapeError("mean of empty tensor");
    return scale(sum(a), 1.0 / n);
}

Var reshape(const Var& a, int rows, int cols) {
    if (rows * cols != a.value().size())
        throw ShapeError("reshape " + a.value().shape_str() + " -> " + std::to_string(rows) + "x" + std::to_string(cols));
    Tensor out(rows, cols, a.value().data);
    Tape* t = result_tape({&a});
    const int ia = a.id;
    const int ar = a.rows(), ac = a.cols();
    return finish(std::move(out), t, "reshape", {}, [ia, ar, ac](const Tensor& g, std::vector<Tensor>& grads) {
        if (ia < 0) return;
        Tape::accumulate(grads, ia, Tensor(ar, ac, g.data));
    });
}

Var gather(const Var& a, std::vector<int> indices) {
    const Tensor& av = a.value();
    Tensor out(static_cast<int>(indices.size()), 1);
    for (std::size_t k = 0; k < indices.size(); ++k) {
        if (indices[k] < 0 || indices[k] >= av.size()) throw ShapeError("gather: index out of range");
        out[static_cast<int>(k)] = av[indices[k]];
    }
    Tape* t = result_tape({&a});
    const int ia = a.id;
    const int ar = a.rows(), ac = a.cols();
    return finish(std::move(out), t, "gather", {},
                  [ia, ar, ac, idx = std::move(indices)](const Tensor& g, std::vector<Tensor>& grads) {
                      if (ia < 0) return;
                      Tensor ga(ar, ac);
                      for (std::size_t k = 0; k < idx.size(); ++k) ga[idx[k]] += g[static_cast<int>(k)];
                      Tape::accumulate(grads, ia, ga);
                  });
}

Var at(const Var& a, int index) { return gather(a, {index}); }

Var add_rowbcast(const Var& A, const Var& v) {
    const Tensor& Av = A.value();
    const Tensor& vv = v.value();
    if (vv.cols != 1 || vv.rows != Av.cols) throw ShapeError("add_rowbcast: " + Av.shape_str() + " + " + vv.shape_str());
    Tensor out = Av;
    for (int i = 0; i < out.rows; ++i)
        for (int j = 0; j < out.cols; ++j) out(i, j) += vv[j];
    Tape* t = result_tape({&A, &v});
    const int iA = A.id, iv = v.id;
    return finish(std::move(out), t, "add_rowbcast", {}, [iA, iv](const Tensor& g, std::vector<Tensor>& grads) {
        if (iA >= 0) Tape::accumulate(grads, iA, g);
        if (iv >= 0) {
            Tensor gv(g.cols, 1);
            for (int i = 0; i < g.rows; ++i)
                for (int j = 0; j < g.cols; ++j) gv[j] += g(i, j);
            Tape::accumulate(grads, iv, gv);
        }
    });
}

Var softmin3(const Var& x, const Var& y, const Var& z, double gamma) {
    if (gamma <= 0.0) throw ConfigError("softmin3: gamma must be positive");
    if (x.value().size() != 1 || y.value().size() != 1 || z.value().size() != 1)
        throw ShapeError("softmin3 expects scalars");
    const double a = x.scalar(), b = y.scalar(), c = z.scalar();
    const double m = std::min({a, b, c});
    const double ea = std::exp(-(a - m) / gamma);
    const double eb = std::exp(-(b - m) / gamma);
    const double ec = std::exp(-(c - m) / gamma);
    const double s = ea + eb + ec;
    const double v = m - gamma * std::log(s);
    Tape* t = result_tape({&x, &y, &z});
    const int ix = x.id, iy = y.id, iz = z.id;
    // d v / d x_i = exp(-(x_i - v)/gamma)
    const double wa = ea / s, wb = eb / s, wc = ec / s;
    return finish(Tensor::scalar(v), t, "softmin3", {}, [ix, iy, iz, wa, wb, wc](const Tensor& g, std::vector<Tensor>& grads) {
        if (ix >= 0) Tape::accumulate(grads, ix, Tensor::scalar(g[0] * wa));
        if (iy >= 0) Tape::accumulate(grads, iy, Tensor::scalar(g[0] * wb));
        if (iz >= 0) Tape::accumulate(grads, iz, Tensor::scalar(g[0] * wc));
    });
}

} // namespace contime::ad
