#include "cliff/autodiff.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <unordered_map>
#include <unordered_set>

namespace cliff::ad {

namespace detail {

namespace {

struct BufferPool {
    // one free-list per buffer size; bounded so long sweeps cannot hoard
    std::unordered_map<std::size_t, std::vector<std::vector<double>>> bins;
    std::size_t held_bytes = 0;
    static constexpr std::size_t kMaxHeldBytes = std::size_t{512} << 20;
};

thread_local BufferPool g_pool;

}  // namespace

std::vector<double> acquire_buffer(std::size_t size) {
    auto it = g_pool.bins.find(size);
    if (it != g_pool.bins.end() && !it->second.empty()) {
        std::vector<double> buf = std::move(it->second.back());
        it->second.pop_back();
        g_pool.held_bytes -= size * sizeof(double);
        return buf;
    }
    return std::vector<double>(size);
}

void release_buffer(std::vector<double>&& buf) {
    const std::size_t bytes = buf.size() * sizeof(double);
    if (buf.empty() || g_pool.held_bytes + bytes > BufferPool::kMaxHeldBytes) return;
    g_pool.held_bytes += bytes;
    g_pool.bins[buf.size()].push_back(std::move(buf));
}

}  // namespace detail

namespace {

using MatMap = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using ConstMatMap =
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using ArrMap = Eigen::Map<Eigen::ArrayXd>;
using ConstArrMap = Eigen::Map<const Eigen::ArrayXd>;

NodePtr make_node(std::size_t r, std::size_t c) {
    auto n = std::make_shared<Node>();
    n->rows = r;
    n->cols = c;
    n->val = detail::acquire_buffer(r * c);
    return n;
}

[[noreturn]] void shape_fail(const char* op, const Node& a, const Node& b) {
    throw ShapeError(std::string(op) + ": incompatible shapes (" + std::to_string(a.rows) + "x" +
                     std::to_string(a.cols) + ") vs (" + std::to_string(b.rows) + "x" +
                     std::to_string(b.cols) + ")");
}

bool bcast_ok(std::size_t a, std::size_t b) { return a == b || a == 1 || b == 1; }

// Accumulates a full-shape gradient into a parent whose axes may have been
// broadcast (extent 1), summing over the expanded axes.
void reduce_into(const std::vector<double>& g, std::size_t gr, std::size_t gc, Node& parent) {
    parent.ensure_grad();
    const std::size_t pr = parent.rows, pc = parent.cols;
    if (pr == gr && pc == gc) {
        for (std::size_t i = 0; i < g.size(); ++i) parent.grad[i] += g[i];
        return;
    }
    for (std::size_t r = 0; r < gr; ++r) {
        const std::size_t prr = (pr == 1) ? 0 : r;
        for (std::size_t c = 0; c < gc; ++c) {
            const std::size_t pcc = (pc == 1) ? 0 : c;
            parent.grad[prr * pc + pcc] += g[r * gc + c];
        }
    }
}

// Builds a binary elementwise node: out[r,c] = f(a[r%ra, c%ca], b[r%rb, c%cb])
// with dfa/dfb producing the local partials. The common broadcast layouts
// (same shape, outer col x row, full op row, full op col, full op scalar)
// run without per-element index arithmetic; gradients accumulate straight
// into the parents.
template <class FwdFn, class BwdFn>
Tensor binary_op(const char* name, const Tensor& a, const Tensor& b, FwdFn fwd, BwdFn bwd) {
    Node& na = *a.node();
    Node& nb = *b.node();
    if (!bcast_ok(na.rows, nb.rows) || !bcast_ok(na.cols, nb.cols)) shape_fail(name, na, nb);
    const std::size_t r = std::max(na.rows, nb.rows);
    const std::size_t c = std::max(na.cols, nb.cols);
    auto out = make_node(r, c);
    out->op = name;
    out->needs_grad = na.needs_grad || nb.needs_grad;

    const std::size_t ar = na.rows, ac = na.cols, br = nb.rows, bc = nb.cols;
    if (ar == r && ac == c && br == r && bc == c) {
        for (std::size_t i = 0; i < out->val.size(); ++i) out->val[i] = fwd(na.val[i], nb.val[i]);
    } else if (ar == r && ac == 1 && br == 1 && bc == c) {
        for (std::size_t i = 0; i < r; ++i) {
            const double av = na.val[i];
            double* row = out->val.data() + i * c;
            for (std::size_t j = 0; j < c; ++j) row[j] = fwd(av, nb.val[j]);
        }
    } else if (ar == r && ac == c && br == 1 && bc == c) {
        for (std::size_t i = 0; i < r; ++i) {
            const double* arow = na.val.data() + i * c;
            double* row = out->val.data() + i * c;
            for (std::size_t j = 0; j < c; ++j) row[j] = fwd(arow[j], nb.val[j]);
        }
    } else if (ar == r && ac == c && br == r && bc == 1) {
        for (std::size_t i = 0; i < r; ++i) {
            const double* arow = na.val.data() + i * c;
            const double bv = nb.val[i];
            double* row = out->val.data() + i * c;
            for (std::size_t j = 0; j < c; ++j) row[j] = fwd(arow[j], bv);
        }
    } else if (ar == r && ac == c && br == 1 && bc == 1) {
        const double bv = nb.val[0];
        for (std::size_t i = 0; i < out->val.size(); ++i) out->val[i] = fwd(na.val[i], bv);
    } else {
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j)
                out->val[i * c + j] = fwd(na.val[(ar == 1 ? 0 : i) * ac + (ac == 1 ? 0 : j)],
                                          nb.val[(br == 1 ? 0 : i) * bc + (bc == 1 ? 0 : j)]);
    }

    if (out->needs_grad) {
        out->parents = {a.ptr(), b.ptr()};
        auto pa = a.ptr();
        auto pb = b.ptr();
        out->backward = [pa, pb, bwd](Node& self) {
            const std::size_t r2 = self.rows, c2 = self.cols;
            const std::size_t ar2 = pa->rows, ac2 = pa->cols, br2 = pb->rows, bc2 = pb->cols;
            const bool wa = pa->needs_grad, wb = pb->needs_grad;
            if (wa) pa->ensure_grad();
            if (wb) pb->ensure_grad();
            double da = 0.0, db = 0.0;
            if (ar2 == r2 && ac2 == c2 && br2 == r2 && bc2 == c2) {
                for (std::size_t k = 0; k < self.grad.size(); ++k) {
                    bwd(pa->val[k], pb->val[k], self.grad[k], da, db);
                    if (wa) pa->grad[k] += da;
                    if (wb) pb->grad[k] += db;
                }
            } else if (ar2 == r2 && ac2 == 1 && br2 == 1 && bc2 == c2) {
                for (std::size_t i = 0; i < r2; ++i) {
                    const double av = pa->val[i];
                    const double* grow = self.grad.data() + i * c2;
                    double acc = 0.0;
                    for (std::size_t j = 0; j < c2; ++j) {
                        bwd(av, pb->val[j], grow[j], da, db);
                        acc += da;
                        if (wb) pb->grad[j] += db;
                    }
                    if (wa) pa->grad[i] += acc;
                }
            } else if (ar2 == r2 && ac2 == c2 && br2 == 1 && bc2 == c2) {
                for (std::size_t i = 0; i < r2; ++i) {
                    const double* arow = pa->val.data() + i * c2;
                    const double* grow = self.grad.data() + i * c2;
                    for (std::size_t j = 0; j < c2; ++j) {
                        bwd(arow[j], pb->val[j], grow[j], da, db);
                        if (wa) pa->grad[i * c2 + j] += da;
                        if (wb) pb->grad[j] += db;
                    }
                }
            } else if (ar2 == r2 && ac2 == c2 && br2 == r2 && bc2 == 1) {
                for (std::size_t i = 0; i < r2; ++i) {
                    const double* arow = pa->val.data() + i * c2;
                    const double* grow = self.grad.data() + i * c2;
                    const double bv = pb->val[i];
                    double acc = 0.0;
                    for (std::size_t j = 0; j < c2; ++j) {
                        bwd(arow[j], bv, grow[j], da, db);
                        if (wa) pa->grad[i * c2 + j] += da;
                        acc += db;
                    }
                    if (wb) pb->grad[i] += acc;
                }
            } else if (ar2 == r2 && ac2 == c2 && br2 == 1 && bc2 == 1) {
                const double bv = pb->val[0];
                double acc = 0.0;
                for (std::size_t k = 0; k < self.grad.size(); ++k) {
                    bwd(pa->val[k], bv, self.grad[k], da, db);
                    if (wa) pa->grad[k] += da;
                    acc += db;
                }
                if (wb) pb->grad[0] += acc;
            } else {
                std::vector<double> ga, gb;
                if (wa) ga.assign(r2 * c2, 0.0);
                if (wb) gb.assign(r2 * c2, 0.0);
                for (std::size_t i = 0; i < r2; ++i) {
                    for (std::size_t j = 0; j < c2; ++j) {
                        const std::size_t k = i * c2 + j;
                        const double av = pa->val[(ar2 == 1 ? 0 : i) * ac2 + (ac2 == 1 ? 0 : j)];
                        const double bv = pb->val[(br2 == 1 ? 0 : i) * bc2 + (bc2 == 1 ? 0 : j)];
                        bwd(av, bv, self.grad[k], da, db);
                        if (wa) ga[k] = da;
                        if (wb) gb[k] = db;
                    }
                }
                if (wa) reduce_into(ga, r2, c2, *pa);
                if (wb) reduce_into(gb, r2, c2, *pb);
            }
        };
    }
    return Tensor(out);
}

template <class FwdFn, class BwdFn>
Tensor unary_op(const char* name, const Tensor& a, FwdFn fwd, BwdFn bwd) {
    Node& na = *a.node();
    auto out = make_node(na.rows, na.cols);
    out->op = name;
    out->needs_grad = na.needs_grad;
    fwd(na.val, out->val);
    if (out->needs_grad) {
        out->parents = {a.ptr()};
        auto pa = a.ptr();
        out->backward = [pa, bwd](Node& self) {
            pa->ensure_grad();
            bwd(pa->val, self.val, self.grad, pa->grad);
        };
    }
    return Tensor(out);
}

}  // namespace

Tensor Tensor::param(std::size_t rows, std::size_t cols, std::vector<double> values) {
    if (values.size() != rows * cols) throw ShapeError("param: value count does not match shape");
    auto n = std::make_shared<Node>();
    n->rows = rows;
    n->cols = cols;
    n->val = std::move(values);
    n->needs_grad = true;
    return Tensor(n);
}

Tensor Tensor::constant(std::size_t rows, std::size_t cols, std::vector<double> values) {
    if (values.size() != rows * cols)
        throw ShapeError("constant: value count does not match shape");
    auto n = std::make_shared<Node>();
    n->rows = rows;
    n->cols = cols;
    n->val = std::move(values);
    return Tensor(n);
}

Tensor Tensor::constant(std::size_t rows, std::size_t cols, double fill) {
    auto n = std::make_shared<Node>();
    n->rows = rows;
    n->cols = cols;
    n->val.assign(rows * cols, fill);
    return Tensor(n);
}

Tensor Tensor::scalar(double v) { return constant(1, 1, std::vector<double>{v}); }

const std::vector<double>& Tensor::grad() const {
    node_->ensure_grad();
    return node_->grad;
}

double Tensor::item() const {
    if (!is_scalar()) throw ShapeError("item: tensor is not scalar");
    return node_->val[0];
}

Tensor add(const Tensor& a, const Tensor& b) {
    return binary_op(
        "add", a, b, [](double x, double y) { return x + y; },
        [](double, double, double g, double& da, double& db) {
            da = g;
            db = g;
        });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    return binary_op(
        "sub", a, b, [](double x, double y) { return x - y; },
        [](double, double, double g, double& da, double& db) {
            da = g;
            db = -g;
        });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    return binary_op(
        "mul", a, b, [](double x, double y) { return x * y; },
        [](double x, double y, double g, double& da, double& db) {
            da = g * y;
            db = g * x;
        });
}

Tensor div(const Tensor& a, const Tensor& b) {
    for (double v : b.value())
        if (v == 0.0) throw DomainError("div: zero denominator; guard with kEps");
    return binary_op(
        "div", a, b, [](double x, double y) { return x / y; },
        [](double x, double y, double g, double& da, double& db) {
            da = g / y;
            db = -g * x / (y * y);
        });
}

Tensor tanh(const Tensor& a) {
    return unary_op(
        "tanh", a,
        [](const std::vector<double>& x, std::vector<double>& y) {
            ArrMap(y.data(), y.size()) = ConstArrMap(x.data(), x.size()).tanh();
        },
        [](const std::vector<double>&, const std::vector<double>& y,
           const std::vector<double>& g, std::vector<double>& gx) {
            for (std::size_t i = 0; i < y.size(); ++i) gx[i] += g[i] * (1.0 - y[i] * y[i]);
        });
}

Tensor exp(const Tensor& a) {
    return unary_op(
        "exp", a,
        [](const std::vector<double>& x, std::vector<double>& y) {
            ArrMap(y.data(), y.size()) = ConstArrMap(x.data(), x.size()).exp();
        },
        [](const std::vector<double>&, const std::vector<double>& y,
           const std::vector<double>& g, std::vector<double>& gx) {
            for (std::size_t i = 0; i < y.size(); ++i) gx[i] += g[i] * y[i];
        });
}

Tensor log(const Tensor& a) {
    for (double v : a.value())
        if (!(v > 0.0)) throw DomainError("log: non-positive operand; guard with kEps");
    return unary_op(
        "log", a,
        [](const std::vector<double>& x, std::vector<double>& y) {
            ArrMap(y.data(), y.size()) = ConstArrMap(x.data(), x.size()).log();
        },
        [](const std::vector<double>& x, const std::vector<double>&, const std::vector<double>& g,
           std::vector<double>& gx) {
            for (std::size_t i = 0; i < x.size(); ++i) gx[i] += g[i] / x[i];
        });
}

Tensor abs(const Tensor& a) {
    return unary_op(
        "abs", a,
        [](const std::vector<double>& x, std::vector<double>& y) {
            for (std::size_t i = 0; i < x.size(); ++i) y[i] = std::fabs(x[i]);
        },
        [](const std::vector<double>& x, const std::vector<double>&, const std::vector<double>& g,
           std::vector<double>& gx) {
            const double flip = test_hooks::negate_abs_backward ? -1.0 : 1.0;
            for (std::size_t i = 0; i < x.size(); ++i)
                gx[i] += flip * (x[i] > 0.0 ? g[i] : (x[i] < 0.0 ? -g[i] : 0.0));
        });
}

Tensor scale(const Tensor& a, double alpha, double beta) {
    return unary_op(
        "scale", a,
        [alpha, beta](const std::vector<double>& x, std::vector<double>& y) {
            for (std::size_t i = 0; i < x.size(); ++i) y[i] = alpha * x[i] + beta;
        },
        [alpha](const std::vector<double>&, const std::vector<double>&,
                const std::vector<double>& g, std::vector<double>& gx) {
            for (std::size_t i = 0; i < g.size(); ++i) gx[i] += alpha * g[i];
        });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    Node& na = *a.node();
    Node& nb = *b.node();
    if (na.cols != nb.rows) shape_fail("matmul", na, nb);
    auto out = make_node(na.rows, nb.cols);
    out->op = "matmul";
    out->needs_grad = na.needs_grad || nb.needs_grad;
    MatMap(out->val.data(), out->rows, out->cols) =
        ConstMatMap(na.val.data(), na.rows, na.cols) * ConstMatMap(nb.val.data(), nb.rows, nb.cols);
    if (out->needs_grad) {
        out->parents = {a.ptr(), b.ptr()};
        auto pa = a.ptr();
        auto pb = b.ptr();
        out->backward = [pa, pb](Node& self) {
            ConstMatMap g(self.grad.data(), self.rows, self.cols);
            if (pa->needs_grad) {
                pa->ensure_grad();
                MatMap(pa->grad.data(), pa->rows, pa->cols) +=
                    g * ConstMatMap(pb->val.data(), pb->rows, pb->cols).transpose();
            }
            if (pb->needs_grad) {
                pb->ensure_grad();
                MatMap(pb->grad.data(), pb->rows, pb->cols) +=
                    ConstMatMap(pa->val.data(), pa->rows, pa->cols).transpose() * g;
            }
        };
    }
    return Tensor(out);
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
    Node& na = *a.node();
    Node& nb = *b.node();
    if (na.cols != nb.cols) shape_fail("matmul_nt", na, nb);
    auto out = make_node(na.rows, nb.rows);
    out->op = "matmul_nt";
    out->needs_grad = na.needs_grad || nb.needs_grad;
    MatMap(out->val.data(), out->rows, out->cols) =
        ConstMatMap(na.val.data(), na.rows, na.cols) *
        ConstMatMap(nb.val.data(), nb.rows, nb.cols).transpose();
    if (out->needs_grad) {
        out->parents = {a.ptr(), b.ptr()};
        auto pa = a.ptr();
        auto pb = b.ptr();
        out->backward = [pa, pb](Node& self) {
            ConstMatMap g(self.grad.data(), self.rows, self.cols);
            if (pa->needs_grad) {
                pa->ensure_grad();
                MatMap(pa->grad.data(), pa->rows, pa->cols) +=
                    g * ConstMatMap(pb->val.data(), pb->rows, pb->cols);
            }
            if (pb->needs_grad) {
                pb->ensure_grad();
                MatMap(pb->grad.data(), pb->rows, pb->cols) +=
                    g.transpose() * ConstMatMap(pa->val.data(), pa->rows, pa->cols);
            }
        };
    }
    return Tensor(out);
}

Tensor transpose(const Tensor& a) {
    Node& na = *a.node();
    auto out = make_node(na.cols, na.rows);
    out->op = "transpose";
    out->needs_grad = na.needs_grad;
    for (std::size_t i = 0; i < na.rows; ++i)
        for (std::size_t j = 0; j < na.cols; ++j) out->val[j * na.rows + i] = na.val[i * na.cols + j];
    if (out->needs_grad) {
        out->parents = {a.ptr()};
        auto pa = a.ptr();
        out->backward = [pa](Node& self) {
            pa->ensure_grad();
            for (std::size_t i = 0; i < self.rows; ++i)
                for (std::size_t j = 0; j < self.cols; ++j)
                    pa->grad[j * self.rows + i] += self.grad[i * self.cols + j];
        };
    }
    return Tensor(out);
}

namespace {

Tensor reduce_op(const char* name, const Tensor& a, std::size_t out_r, std::size_t out_c) {
    Node& na = *a.node();
    auto out = make_node(out_r, out_c);
    out->op = name;
    out->needs_grad = na.needs_grad;

    std::fill(out->val.begin(), out->val.end(), 0.0);
    for (std::size_t i = 0; i < na.rows; ++i)
        for (std::size_t j = 0; j < na.cols; ++j)
            out->val[(out_r == 1 ? 0 : i) * out_c + (out_c == 1 ? 0 : j)] +=
                na.val[i * na.cols + j];

    if (out->needs_grad) {
        out->parents = {a.ptr()};
        auto pa = a.ptr();
        out->backward = [pa](Node& self) {
            pa->ensure_grad();
            const std::size_t oc = self.cols, orr = self.rows;
            for (std::size_t i = 0; i < pa->rows; ++i)
                for (std::size_t j = 0; j < pa->cols; ++j)
                    pa->grad[i * pa->cols + j] +=
                        self.grad[(orr == 1 ? 0 : i) * oc + (oc == 1 ? 0 : j)];
        };
    }
    return Tensor(out);
}

}  // namespace

Tensor sum(const Tensor& a) { return reduce_op("sum", a, 1, 1); }
Tensor rowsum(const Tensor& a) { return reduce_op("rowsum", a, a.rows(), 1); }
Tensor colsum(const Tensor& a) { return reduce_op("colsum", a, 1, a.cols()); }

Tensor mean(const Tensor& a) {
    if (a.size() == 0) throw ShapeError("mean: empty tensor");
    return scale(sum(a), 1.0 / static_cast<double>(a.size()));
}

Tensor broadcast(const Tensor& a, std::size_t rows, std::size_t cols) {
    Node& na = *a.node();
    if (!bcast_ok(na.rows, rows) || !bcast_ok(na.cols, cols) || na.rows > rows || na.cols > cols)
        throw ShapeError("broadcast: source shape must divide target by axes of extent 1");
    auto out = make_node(rows, cols);
    out->op = "broadcast";
    out->needs_grad = na.needs_grad;
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j)
            out->val[i * cols + j] =
                na.val[(na.rows == 1 ? 0 : i) * na.cols + (na.cols == 1 ? 0 : j)];
    if (out->needs_grad) {
        out->parents = {a.ptr()};
        auto pa = a.ptr();
        out->backward = [pa](Node& self) { reduce_into(self.grad, self.rows, self.cols, *pa); };
    }
    return Tensor(out);
}

Tensor concat_cols(const std::vector<Tensor>& columns) {
    if (columns.empty()) throw ShapeError("concat_cols: no inputs");
    const std::size_t r = columns.front().rows();
    std::size_t total_c = 0;
    for (const auto& t : columns) {
        if (t.rows() != r) throw ShapeError("concat_cols: row counts differ");
        total_c += t.cols();
    }
    auto out = make_node(r, total_c);
    out->op = "concat";
    std::size_t off = 0;
    for (const auto& t : columns) {
        const Node& n = *t.node();
        out->needs_grad = out->needs_grad || n.needs_grad;
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < n.cols; ++j)
                out->val[i * total_c + off + j] = n.val[i * n.cols + j];
        off += n.cols;
    }
    if (out->needs_grad) {
        for (const auto& t : columns) out->parents.push_back(t.ptr());
        auto parents = out->parents;
        out->backward = [parents](Node& self) {
            std::size_t off2 = 0;
            for (const auto& p : parents) {
                if (p->needs_grad) {
                    p->ensure_grad();
                    for (std::size_t i = 0; i < p->rows; ++i)
                        for (std::size_t j = 0; j < p->cols; ++j)
                            p->grad[i * p->cols + j] += self.grad[i * self.cols + off2 + j];
                }
                off2 += p->cols;
            }
        };
    }
    return Tensor(out);
}

Tensor slice_col(const Tensor& a, std::size_t j) {
    Node& na = *a.node();
    if (j >= na.cols) throw ShapeError("slice_col: column index out of range");
    auto out = make_node(na.rows, 1);
    out->op = "slice";
    out->needs_grad = na.needs_grad;
    for (std::size_t i = 0; i < na.rows; ++i) out->val[i] = na.val[i * na.cols + j];
    if (out->needs_grad) {
        out->parents = {a.ptr()};
        auto pa = a.ptr();
        out->backward = [pa, j](Node& self) {
            pa->ensure_grad();
            for (std::size_t i = 0; i < self.rows; ++i)
                pa->grad[i * pa->cols + j] += self.grad[i];
        };
    }
    return Tensor(out);
}

void backward(const Tensor& root) {
    if (!root.is_scalar()) throw ShapeError("backward: root must be scalar");
    Node* r = root.node();
    if (!r->needs_grad) return;  // nothing reachable requested a gradient

    // Iterative post-order DFS; parents visited in construction order so the
    // accumulation order (and thus the result bits) is reproducible.
    std::vector<Node*> order;
    std::unordered_set<Node*> seen;
    std::vector<std::pair<Node*, std::size_t>> stack;
    stack.emplace_back(r, 0);
    seen.insert(r);
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            Node* p = node->parents[next++].get();
            if (p->needs_grad && seen.insert(p).second) stack.emplace_back(p, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    // Interior gradients are per-pass scratch; only leaves accumulate across
    // repeated backward calls. ensure_grad zero-fills on acquisition.
    for (Node* n : order) {
        if (!n->backward) continue;
        if (n->grad.size() != n->val.size())
            n->ensure_grad();
        else
            std::fill(n->grad.begin(), n->grad.end(), 0.0);
    }
    r->ensure_grad();
    r->grad[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (n->backward) n->backward(*n);
    }
}

}  // namespace cliff::ad
