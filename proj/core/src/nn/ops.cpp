#include "streamvae/nn/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "streamvae/errors.hpp"

namespace streamvae::nn {

namespace {

[[noreturn]] void shape_fail(const char* op, const Shape& a, const Shape& b) {
    throw ShapeError(std::string(op) + ": incompatible shapes " + shape_str(a) + " and " + shape_str(b));
}

void require_same(const char* op, Var a, Var b) {
    if (a.shape() != b.shape()) shape_fail(op, a.shape(), b.shape());
}

void require_same_tape(const char* op, Var a, Var b) {
    if (&a.tape() != &b.tape()) throw ConfigError(std::string(op) + ": operands live on different tapes");
}

bool any_grad(std::initializer_list<Var> vs) {
    return std::any_of(vs.begin(), vs.end(), [](Var v) { return v.requires_grad(); });
}

template <class Fwd, class Deriv>
Var unary(const char* op, Var a, Fwd fwd, Deriv deriv) {
    const Tensor& x = a.value();
    Tensor y(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = fwd(x[i]);
    Tape& tape = a.tape();
    const bool rg = a.requires_grad();
    Tape::BackwardFn bw;
    if (rg) {
        const auto ia = a.id();
        bw = [ia, deriv, out_id = static_cast<std::uint32_t>(tape.size())](Tape& t, const Tensor& g) {
            const Tensor& xv = t.value(ia);
            const Tensor& yv = t.value(out_id);
            Tensor& ga = t.grad_buffer(ia);
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * deriv(xv[i], yv[i]);
        };
    }
    return tape.push(op, std::move(y), rg, std::move(bw));
}

double sigmoid_scalar(double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double softplus_scalar(double x) {
    return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

}  // namespace

// ---------------------------------------------------------------------------
// Kernels

void gemm_nn(const double* A, const double* B, double* C, std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        double* c = C + i * n;
        const double* a = A + i * k;
        for (std::size_t p = 0; p < k; ++p) {
            const double av = a[p];
            if (av == 0.0) continue;
            const double* b = B + p * n;
            for (std::size_t j = 0; j < n; ++j) c[j] += av * b[j];
        }
    }
}

void gemm_nt(const double* A, const double* B, double* C, std::size_t m, std::size_t k, std::size_t n) {
    if (m < 4) {
        for (std::size_t i = 0; i < m; ++i) {
            const double* a = A + i * k;
            for (std::size_t j = 0; j < n; ++j) {
                const double* b = B + j * k;
                double s = 0.0;
                for (std::size_t p = 0; p < k; ++p) s += a[p] * b[p];
                C[i * n + j] += s;
            }
        }
        return;
    }
    // Row-update form over an explicit transpose of B vectorizes along n.
    thread_local std::vector<double> bt;
    bt.resize(k * n);
    for (std::size_t j = 0; j < n; ++j)
        for (std::size_t p = 0; p < k; ++p) bt[p * n + j] = B[j * k + p];
    gemm_nn(A, bt.data(), C, m, k, n);
}

void gemm_tn(const double* A, const double* B, double* C, std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t p = 0; p < k; ++p) {
        const double* a = A + p * m;
        const double* b = B + p * n;
        for (std::size_t i = 0; i < m; ++i) {
            const double av = a[i];
            if (av == 0.0) continue;
            double* c = C + i * n;
            for (std::size_t j = 0; j < n; ++j) c[j] += av * b[j];
        }
    }
}

// ---------------------------------------------------------------------------
// Linear algebra

Var matmul(Var a, Var b) {
    require_same_tape("matmul", a, b);
    const Tensor& A = a.value();
    const Tensor& B = b.value();
    if (B.rank() != 2 || A.cols() != B.rows()) shape_fail("matmul", A.shape(), B.shape());
    const std::size_t m = A.rows(), k = A.cols(), n = B.cols();
    Shape out_shape = A.shape();
    out_shape.back() = n;
    Tensor C(out_shape, 0.0);
    gemm_nn(A.ptr(), B.ptr(), C.ptr(), m, k, n);
    const bool rg = any_grad({a, b});
    Tape::BackwardFn bw;
    if (rg) {
        bw = [ia = a.id(), ib = b.id(), m, k, n](Tape& t, const Tensor& g) {
            if (t.requires_grad(ia)) gemm_nt(g.ptr(), t.value(ib).ptr(), t.grad_buffer(ia).ptr(), m, n, k);
            if (t.requires_grad(ib)) gemm_tn(t.value(ia).ptr(), g.ptr(), t.grad_buffer(ib).ptr(), k, m, n);
        };
    }
    return a.tape().push("matmul", std::move(C), rg, std::move(bw));
}

Var transpose(Var a) {
    const Tensor& A = a.value();
    if (A.rank() != 2) throw ShapeError("transpose: expected a matrix, got " + shape_str(A.shape()));
    const std::size_t r = A.rows(), c = A.cols();
    Tensor out({c, r});
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) out(j, i) = A(i, j);
    Tape::BackwardFn bw;
    if (a.requires_grad()) {
        bw = [ia = a.id(), r, c](Tape& t, const Tensor& g) {
            Tensor& ga = t.grad_buffer(ia);
            for (std::size_t i = 0; i < r; ++i)
                for (std::size_t j = 0; j < c; ++j) ga(i, j) += g(j, i);
        };
    }
    return a.tape().push("transpose", std::move(out), a.requires_grad(), std::move(bw));
}

// ---------------------------------------------------------------------------
// Elementwise binary

Var add(Var a, Var b) {
    require_same_tape("add", a, b);
    require_same("add", a, b);
    const Tensor& x = a.value();
    const Tensor& y = b.value();
    Tensor out(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + y[i];
    const bool rg = any_grad({a, b});
    Tape::BackwardFn bw;
    if (rg) {
        bw = [ia = a.id(), ib = b.id()](Tape& t, const Tensor& g) {
            for (auto id : {ia, ib}) {
                if (!t.requires_grad(id)) continue;
                Tensor& gv = t.grad_buffer(id);
                for (std::size_t i = 0; i < g.size(); ++i) gv[i] += g[i];
            }
        };
    }
    return a.tape().push("add", std::move(out), rg, std::move(bw));
}

Var sub(Var a, Var b) {
    require_same_tape("sub", a, b);
    require_same("sub", a, b);
    const Tensor& x = a.value();
    const Tensor& y = b.value();
    Tensor out(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] - y[i];
    const bool rg = any_grad({a, b});
    Tape::BackwardFn bw;
    if (rg) {
        bw = [ia = a.id(), ib = b.id()](Tape& t, const Tensor& g) {
            if (t.requires_grad(ia)) {
                Tensor& gv = t.grad_buffer(ia);
                for (std::size_t i = 0; i < g.size(); ++i) gv[i] += g[i];
            }
            if (t.requires_grad(ib)) {
                Tensor& gv = t.grad_buffer(ib);
                for (std::size_t i = 0; i < g.size(); ++i) gv[i] -= g[i];
            }
        };
    }
    return a.tape().push("sub", std::move(out), rg, std::move(bw));
}

Var mul(Var a, Var b) {
    require_same_tape("mul", a, b);
    require_same("mul", a, b);
    const Tensor& x = a.value();
    const Tensor& y = b.value();
    Tensor out(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * y[i];
    const bool rg = any_grad({a, b});
    Tape::BackwardFn bw;
    if (rg) {
        bw = [ia = a.id(), ib = b.id()](Tape& t, const Tensor& g) {
            if (t.requires_grad(ia)) {
                const Tensor& yv = t.value(ib);
                Tensor& gv = t.grad_buffer(ia);
                for (std::size_t i = 0; i < g.size(); ++i) gv[i] += g[i] * yv[i];
            }
            if (t.requires_grad(ib)) {
                const Tensor& xv = t.value(ia);
                Tensor& gv = t.grad_buffer(ib);
                for (std::size_t i = 0; i < g.size(); ++i) gv[i] += g[i] * xv[i];
            }
        };
    }
    return a.tape().push("mul", std::move(out), rg, std::move(bw));
}

Var div(Var a, Var b) {
    require_same_tape("div", a, b);
    require_same("div", a, b);
    const Tensor& x = a.value();
    const Tensor& y = b.value();
    Tensor out(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] / y[i];
    const bool rg = any_grad({a, b});
    Tape::BackwardFn bw;
    if (rg) {
        bw = [ia = a.id(), ib = b.id()](Tape& t, const Tensor& g) {
            const Tensor& xv = t.value(ia);
            const Tensor& yv = t.value(ib);
            if (t.requires_grad(ia)) {
                Tensor& gv = t.grad_buffer(ia);
                for (std::size_t i = 0; i < g.size(); ++i) gv[i] += g[i] / yv[i];
            }
            if (t.requires_grad(ib)) {
                Tensor& gv = t.grad_buffer(ib);
                for (std::size_t i = 0; i < g.size(); ++i) gv[i] -= g[i] * xv[i] / (yv[i] * yv[i]);
            }
        };
    }
    return a.tape().push("div", std::move(out), rg, std::move(bw));
}

// ---------------------------------------------------------------------------
// Broadcasting

Var add_row(Var a, Var row) {
    require_same_tape("add_row", a, row);
    const Tensor& x = a.value();
    const Tensor& r = row.value();
    if (r.size() != x.cols()) shape_fail("add_row", x.shape(), r.shape());
    const std::size_t R = x.rows(), C = x.cols();
    Tensor out(x.shape());
    for (std::size_t i = 0; i < R; ++i)
        for (std::size_t j = 0; j < C; ++j) out[i * C + j] = x[i * C + j] + r[j];
    const bool rg = any_grad({a, row});
    Tape::BackwardFn bw;
    if (rg) {
        bw = [ia = a.id(), ir = row.id(), R, C](Tape& t, const Tensor& g) {
            if (t.requires_grad(ia)) {
                Tensor& gv = t.grad_buffer(ia);
                for (std::size_t i = 0; i < g.size(); ++i) gv[i] += g[i];
            }
            if (t.requires_grad(ir)) {
                Tensor& gr = t.grad_buffer(ir);
                for (std::size_t i = 0; i < R; ++i)
                    for (std::size_t j = 0; j < C; ++j) gr[j] += g[i * C + j];
            }
        };
    }
    return a.tape().push("add_row", std::move(out), rg, std::move(bw));
}

Var mul_row(Var a, Var row) {
    require_same_tape("mul_row", a, row);
    const Tensor& x = a.value();
    const Tensor& r = row.value();
    if (r.size() != x.cols()) shape_fail("mul_row", x.shape(), r.shape());
    const std::size_t R = x.rows(), C = x.cols();
    Tensor out(x.shape());
    for (std::size_t i = 0; i < R; ++i)
        for (std::size_t j = 0; j < C; ++j) out[i * C + j] = x[i * C + j] * r[j];
    const bool rg = any_grad({a, row});
    Tape::BackwardFn bw;
    if (rg) {
        bw = [ia = a.id(), ir = row.id(), R, C](Tape& t, const Tensor& g) {
            const Tensor& xv = t.value(ia);
            const Tensor& rv = t.value(ir);
            if (t.requires_grad(ia)) {
                Tensor& gv = t.grad_buffer(ia);
                for (std::size_t i = 0; i < R; ++i)
                    for (std::size_t j = 0; j < C; ++j) gv[i * C + j] += g[i * C + j] * rv[j];
            }
            if (t.requires_grad(ir)) {
                Tensor& gr = t.grad_buffer(ir);
                for (std::size_t i = 0; i < R; ++i)
                    for (std::size_t j = 0; j < C; ++j) gr[j] += g[i * C + j] * xv[i * C + j];
            }
        };
    }
    return a.tape().push("mul_row", std::move(out), rg, std::move(bw));
}

Var mul_scalar(Var a, Var s) {
    require_same_tape("mul_scalar", a, s);
    if (s.value().size() != 1) shape_fail("mul_scalar", a.shape(), s.shape());
    const Tensor& x = a.value();
    const double sv = s.value()[0];
    Tensor out(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * sv;
    const bool rg = any_grad({a, s});
    Tape::BackwardFn bw;
    if (rg) {
        bw = [ia = a.id(), is = s.id()](Tape& t, const Tensor& g) {
            const Tensor& xv = t.value(ia);
            if (t.requires_grad(ia)) {
                const double s_val = t.value(is)[0];
                Tensor& gv = t.grad_buffer(ia);
                for (std::size_t i = 0; i < g.size(); ++i) gv[i] += g[i] * s_val;
            }
            if (t.requires_grad(is)) {
                double acc = 0.0;
                for (std::size_t i = 0; i < g.size(); ++i) acc += g[i] * xv[i];
                t.grad_buffer(is)[0] += acc;
            }
        };
    }
    return a.tape().push("mul_scalar", std::move(out), rg, std::move(bw));
}

Var scale(Var a, double c) {
    return unary("scale", a, [c](double x) { return c * x; }, [c](double, double) { return c; });
}

Var add_scalar(Var a, double c) {
    return unary("add_scalar", a, [c](double x) { return x + c; }, [](double, double) { return 1.0; });
}

// ---------------------------------------------------------------------------
// Elementwise unary

Var sigmoid(Var a) {
    return unary("sigmoid", a, sigmoid_scalar, [](double, double y) { return y * (1.0 - y); });
}

Var tanh(Var a) {
    return unary("tanh", a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Var softplus(Var a) {
    return unary("softplus", a, softplus_scalar, [](double x, double) { return sigmoid_scalar(x); });
}

Var exp(Var a) {
    return unary("exp", a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Var log(Var a) {
    return unary("log", a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Var sqrt(Var a) {
    return unary("sqrt", a, [](double x) { return std::sqrt(x); },
                 [](double, double y) { return y > 0.0 ? 0.5 / y : 0.0; });
}

Var square(Var a) {
    return unary("square", a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Var abs(Var a) {
    return unary("abs", a, [](double x) { return std::fabs(x); },
                 [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

Var relu(Var a) {
    return unary("relu", a, [](double x) { return x > 0.0 ? x : 0.0; },
                 [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var clamp(Var a, double lo, double hi) {
    if (!(lo <= hi)) throw ConfigError("clamp: lo must not exceed hi");
    return unary("clamp", a, [lo, hi](double x) { return std::clamp(x, lo, hi); },
                 [lo, hi](double x, double) { return (x > lo && x < hi) ? 1.0 : 0.0; });
}

// ---------------------------------------------------------------------------
// Last-axis ops

Var softmax(Var a) {
    const Tensor& x = a.value();
    const std::size_t R = x.rows(), C = x.cols();
    Tensor y(x.shape());
    for (std::size_t i = 0; i < R; ++i) {
        const double* xr = x.ptr() + i * C;
        double* yr = y.ptr() + i * C;
        const double mx = *std::max_element(xr, xr + C);
        double s = 0.0;
        for (std::size_t j = 0; j < C; ++j) s += (yr[j] = std::exp(xr[j] - mx));
        for (std::size_t j = 0; j < C; ++j) yr[j] /= s;
    }
    Tape& tape = a.tape();
    Tape::BackwardFn bw;
    if (a.requires_grad()) {
        bw = [ia = a.id(), out = static_cast<std::uint32_t>(tape.size()), R, C](Tape& t, const Tensor& g) {
            const Tensor& yv = t.value(out);
            Tensor& gv = t.grad_buffer(ia);
            for (std::size_t i = 0; i < R; ++i) {
                const double* yr = yv.ptr() + i * C;
                const double* gr = g.ptr() + i * C;
                double dot = 0.0;
                for (std::size_t j = 0; j < C; ++j) dot += yr[j] * gr[j];
                double* o = gv.ptr() + i * C;
                for (std::size_t j = 0; j < C; ++j) o[j] += yr[j] * (gr[j] - dot);
            }
        };
    }
    return tape.push("softmax", std::move(y), a.requires_grad(), std::move(bw));
}

Var l2_normalize(Var a) {
    constexpr double kEps = 1e-12;
    const Tensor& x = a.value();
    const std::size_t R = x.rows(), C = x.cols();
    Tensor y(x.shape());
    std::vector<double> norms(R);
    for (std::size_t i = 0; i < R; ++i) {
        const double* xr = x.ptr() + i * C;
        double s = 0.0;
        for (std::size_t j = 0; j < C; ++j) s += xr[j] * xr[j];
        norms[i] = std::max(std::sqrt(s), kEps);
        for (std::size_t j = 0; j < C; ++j) y[i * C + j] = xr[j] / norms[i];
    }
    Tape& tape = a.tape();
    Tape::BackwardFn bw;
    if (a.requires_grad()) {
        bw = [ia = a.id(), out = static_cast<std::uint32_t>(tape.size()), R, C,
              norms = std::move(norms)](Tape& t, const Tensor& g) {
            const Tensor& yv = t.value(out);
            Tensor& gv = t.grad_buffer(ia);
            for (std::size_t i = 0; i < R; ++i) {
                const double* yr = yv.ptr() + i * C;
                const double* gr = g.ptr() + i * C;
                double* o = gv.ptr() + i * C;
                if (norms[i] <= kEps) {
                    for (std::size_t j = 0; j < C; ++j) o[j] += gr[j] / kEps;
                    continue;
                }
                double dot = 0.0;
                for (std::size_t j = 0; j < C; ++j) dot += yr[j] * gr[j];
                for (std::size_t j = 0; j < C; ++j) o[j] += (gr[j] - yr[j] * dot) / norms[i];
            }
        };
    }
    return tape.push("l2_normalize", std::move(y), a.requires_grad(), std::move(bw));
}

Var sum_cols(Var a) {
    const Tensor& x = a.value();
    const std::size_t R = x.rows(), C = x.cols();
    Shape shape = x.shape();
    if (shape.empty()) shape = {1};
    shape.back() = 1;
    Tensor y(shape);
    for (std::size_t i = 0; i < R; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < C; ++j) s += x[i * C + j];
        y[i] = s;
    }
    Tape::BackwardFn bw;
    if (a.requires_grad()) {
        bw = [ia = a.id(), R, C](Tape& t, const Tensor& g) {
            Tensor& gv = t.grad_buffer(ia);
            for (std::size_t i = 0; i < R; ++i)
                for (std::size_t j = 0; j < C; ++j) gv[i * C + j] += g[i];
        };
    }
    return a.tape().push("sum_cols", std::move(y), a.requires_grad(), std::move(bw));
}

// ---------------------------------------------------------------------------
// Reductions

Var sum(Var a) {
    const Tensor& x = a.value();
    double s = 0.0;
    for (double v : x.data()) s += v;
    Tape::BackwardFn bw;
    if (a.requires_grad()) {
        bw = [ia = a.id()](Tape& t, const Tensor& g) {
            Tensor& gv = t.grad_buffer(ia);
            for (std::size_t i = 0; i < gv.size(); ++i) gv[i] += g[0];
        };
    }
    return a.tape().push("sum", Tensor::scalar(s), a.requires_grad(), std::move(bw));
}

Var mean(Var a) {
    const Tensor& x = a.value();
    if (x.size() == 0) throw ShapeError("mean of empty tensor");
    return scale(sum(a), 1.0 / static_cast<double>(x.size()));
}

// ---------------------------------------------------------------------------
// Structure

Var reshape(Var a, Shape shape) {
    Tensor y = a.value().reshaped(std::move(shape));
    Tape::BackwardFn bw;
    if (a.requires_grad()) {
        bw = [ia = a.id()](Tape& t, const Tensor& g) {
            Tensor& gv = t.grad_buffer(ia);
            for (std::size_t i = 0; i < g.size(); ++i) gv[i] += g[i];
        };
    }
    return a.tape().push("reshape", std::move(y), a.requires_grad(), std::move(bw));
}

Var concat_cols(std::span<const Var> parts) {
    if (parts.empty()) throw ShapeError("concat_cols of zero tensors");
    const std::size_t R = parts[0].value().rows();
    std::size_t C = 0;
    bool rg = false;
    std::vector<std::uint32_t> ids;
    std::vector<std::size_t> widths;
    for (Var p : parts) {
        require_same_tape("concat_cols", parts[0], p);
        if (p.value().rows() != R) shape_fail("concat_cols", parts[0].shape(), p.shape());
        C += p.value().cols();
        rg = rg || p.requires_grad();
        ids.push_back(p.id());
        widths.push_back(p.value().cols());
    }
    Tensor y({R, C});
    std::size_t off = 0;
    for (Var p : parts) {
        const Tensor& x = p.value();
        const std::size_t w = x.cols();
        for (std::size_t i = 0; i < R; ++i) std::copy_n(x.ptr() + i * w, w, y.ptr() + i * C + off);
        off += w;
    }
    Tape::BackwardFn bw;
    if (rg) {
        bw = [ids = std::move(ids), widths = std::move(widths), R, C](Tape& t, const Tensor& g) {
            std::size_t o = 0;
            for (std::size_t k = 0; k < ids.size(); ++k) {
                const std::size_t w = widths[k];
                if (t.requires_grad(ids[k])) {
                    Tensor& gv = t.grad_buffer(ids[k]);
                    for (std::size_t i = 0; i < R; ++i)
                        for (std::size_t j = 0; j < w; ++j) gv[i * w + j] += g[i * C + o + j];
                }
                o += w;
            }
        };
    }
    return parts[0].tape().push("concat_cols", std::move(y), rg, std::move(bw));
}

Var concat_rows(std::span<const Var> parts) {
    if (parts.empty()) throw ShapeError("concat_rows of zero tensors");
    const std::size_t C = parts[0].value().cols();
    std::size_t R = 0;
    bool rg = false;
    std::vector<std::uint32_t> ids;
    std::vector<std::size_t> sizes;
    for (Var p : parts) {
        require_same_tape("concat_rows", parts[0], p);
        if (p.value().cols() != C) shape_fail("concat_rows", parts[0].shape(), p.shape());
        R += p.value().rows();
        rg = rg || p.requires_grad();
        ids.push_back(p.id());
        sizes.push_back(p.value().size());
    }
    std::vector<double> data;
    data.reserve(R * C);
    for (Var p : parts) data.insert(data.end(), p.value().data().begin(), p.value().data().end());
    Tape::BackwardFn bw;
    if (rg) {
        bw = [ids = std::move(ids), sizes = std::move(sizes)](Tape& t, const Tensor& g) {
            std::size_t o = 0;
            for (std::size_t k = 0; k < ids.size(); ++k) {
                if (t.requires_grad(ids[k])) {
                    Tensor& gv = t.grad_buffer(ids[k]);
                    for (std::size_t i = 0; i < sizes[k]; ++i) gv[i] += g[o + i];
                }
                o += sizes[k];
            }
        };
    }
    return parts[0].tape().push("concat_rows", Tensor({R, C}, std::move(data)), rg, std::move(bw));
}

Var slice_cols(Var a, std::size_t begin, std::size_t end) {
    const Tensor& x = a.value();
    const std::size_t R = x.rows(), C = x.cols();
    if (begin > end || end > C) {
        throw ShapeError("slice_cols [" + std::to_string(begin) + ", " + std::to_string(end) + ") out of range for " +
                         shape_str(x.shape()));
    }
    const std::size_t w = end - begin;
    Tensor y({R, w});
    for (std::size_t i = 0; i < R; ++i) std::copy_n(x.ptr() + i * C + begin, w, y.ptr() + i * w);
    Tape::BackwardFn bw;
    if (a.requires_grad()) {
        bw = [ia = a.id(), R, C, begin, w](Tape& t, const Tensor& g) {
            Tensor& gv = t.grad_buffer(ia);
            for (std::size_t i = 0; i < R; ++i)
                for (std::size_t j = 0; j < w; ++j) gv[i * C + begin + j] += g[i * w + j];
        };
    }
    return a.tape().push("slice_cols", std::move(y), a.requires_grad(), std::move(bw));
}

Var slice_rows(Var a, std::size_t begin, std::size_t end) {
    const Tensor& x = a.value();
    const std::size_t R = x.rows(), C = x.cols();
    if (begin > end || end > R) {
        throw ShapeError("slice_rows [" + std::to_string(begin) + ", " + std::to_string(end) + ") out of range for " +
                         shape_str(x.shape()));
    }
    Tensor y({end - begin, C});
    std::copy(x.ptr() + begin * C, x.ptr() + end * C, y.ptr());
    Tape::BackwardFn bw;
    if (a.requires_grad()) {
        bw = [ia = a.id(), begin, C](Tape& t, const Tensor& g) {
            Tensor& gv = t.grad_buffer(ia);
            for (std::size_t i = 0; i < g.size(); ++i) gv[begin * C + i] += g[i];
        };
    }
    return a.tape().push("slice_rows", std::move(y), a.requires_grad(), std::move(bw));
}

Var reverse_rows(Var a) {
    const Tensor& x = a.value();
    const std::size_t R = x.rows(), C = x.cols();
    Tensor y(x.shape());
    for (std::size_t i = 0; i < R; ++i) std::copy_n(x.ptr() + (R - 1 - i) * C, C, y.ptr() + i * C);
    Tape::BackwardFn bw;
    if (a.requires_grad()) {
        bw = [ia = a.id(), R, C](Tape& t, const Tensor& g) {
            Tensor& gv = t.grad_buffer(ia);
            for (std::size_t i = 0; i < R; ++i)
                for (std::size_t j = 0; j < C; ++j) gv[(R - 1 - i) * C + j] += g[i * C + j];
        };
    }
    return a.tape().push("reverse_rows", std::move(y), a.requires_grad(), std::move(bw));
}

// ---------------------------------------------------------------------------
// Time-series ops

Var ema(Var x, Var m) {
    require_same_tape("ema", x, m);
    if (m.value().size() != 1) shape_fail("ema", x.shape(), m.shape());
    const Tensor& X = x.value();
    const double mv = m.value()[0];
    const std::size_t T = X.rows(), C = X.cols();
    Tensor Y(X.shape());
    if (T > 0) std::copy_n(X.ptr(), C, Y.ptr());
    for (std::size_t t = 1; t < T; ++t)
        for (std::size_t j = 0; j < C; ++j) Y[t * C + j] = mv * Y[(t - 1) * C + j] + (1.0 - mv) * X[t * C + j];
    Tape& tape = x.tape();
    const bool rg = any_grad({x, m});
    Tape::BackwardFn bw;
    if (rg) {
        bw = [ix = x.id(), im = m.id(), out = static_cast<std::uint32_t>(tape.size()), T, C](Tape& tp,
                                                                                             const Tensor& g) {
            const Tensor& Xv = tp.value(ix);
            const Tensor& Yv = tp.value(out);
            const double mval = tp.value(im)[0];
            const bool gx = tp.requires_grad(ix);
            Tensor* gX = gx ? &tp.grad_buffer(ix) : nullptr;
            std::vector<double> carry(C, 0.0);
            double gm = 0.0;
            for (std::size_t t = T; t-- > 1;) {
                for (std::size_t j = 0; j < C; ++j) {
                    const double gy = g[t * C + j] + carry[j];
                    if (gx) (*gX)[t * C + j] += (1.0 - mval) * gy;
                    gm += gy * (Yv[(t - 1) * C + j] - Xv[t * C + j]);
                    carry[j] = mval * gy;
                }
            }
            if (T > 0 && gx)
                for (std::size_t j = 0; j < C; ++j) (*gX)[j] += g[j] + carry[j];
            if (tp.requires_grad(im)) tp.grad_buffer(im)[0] += gm;
        };
    }
    return tape.push("ema", std::move(Y), rg, std::move(bw));
}

Var diff_rows(Var x) {
    const Tensor& X = x.value();
    const std::size_t T = X.rows(), C = X.cols();
    Tensor Y(X.shape(), 0.0);
    for (std::size_t t = 1; t < T; ++t)
        for (std::size_t j = 0; j < C; ++j) Y[t * C + j] = X[t * C + j] - X[(t - 1) * C + j];
    Tape::BackwardFn bw;
    if (x.requires_grad()) {
        bw = [ix = x.id(), T, C](Tape& tp, const Tensor& g) {
            Tensor& gX = tp.grad_buffer(ix);
            for (std::size_t t = 1; t < T; ++t)
                for (std::size_t j = 0; j < C; ++j) {
                    gX[t * C + j] += g[t * C + j];
                    gX[(t - 1) * C + j] -= g[t * C + j];
                }
        };
    }
    return x.tape().push("diff_rows", std::move(Y), x.requires_grad(), std::move(bw));
}

Var soft_threshold(Var x, Var tau) {
    require_same_tape("soft_threshold", x, tau);
    const Tensor& X = x.value();
    const Tensor& tv = tau.value();
    const std::size_t R = X.rows(), C = X.cols();
    if (tv.size() != 1 && tv.size() != C) shape_fail("soft_threshold", X.shape(), tv.shape());
    const bool per_col = tv.size() != 1;
    Tensor Y(X.shape());
    for (std::size_t i = 0; i < R; ++i)
        for (std::size_t j = 0; j < C; ++j) {
            const double v = X[i * C + j];
            const double th = tv[per_col ? j : 0];
            const double mag = std::fabs(v) - th;
            Y[i * C + j] = mag > 0.0 ? std::copysign(mag, v) : 0.0;
        }
    const bool rg = any_grad({x, tau});
    Tape::BackwardFn bw;
    if (rg) {
        bw = [ix = x.id(), it = tau.id(), R, C, per_col](Tape& tp, const Tensor& g) {
            const Tensor& Xv = tp.value(ix);
            const Tensor& Tv = tp.value(it);
            const bool gx = tp.requires_grad(ix), gt = tp.requires_grad(it);
            Tensor* gX = gx ? &tp.grad_buffer(ix) : nullptr;
            Tensor* gT = gt ? &tp.grad_buffer(it) : nullptr;
            for (std::size_t i = 0; i < R; ++i)
                for (std::size_t j = 0; j < C; ++j) {
                    const double v = Xv[i * C + j];
                    const std::size_t k = per_col ? j : 0;
                    if (std::fabs(v) - Tv[k] <= 0.0) continue;
                    if (gx) (*gX)[i * C + j] += g[i * C + j];
                    if (gt) (*gT)[k] -= g[i * C + j] * (v > 0.0 ? 1.0 : -1.0);
                }
        };
    }
    return x.tape().push("soft_threshold", std::move(Y), rg, std::move(bw));
}

}  // namespace streamvae::nn
