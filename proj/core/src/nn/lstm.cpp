#include <algorithm>
#include <cmath>
#include <string>

#include "streamvae/errors.hpp"
#include "streamvae/nn/ops.hpp"

namespace streamvae::nn {

namespace {

double sig(double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

void check_lstm_shapes(const char* op, const Tensor& x, const Tensor& W, const Tensor& U, const Tensor& b,
                       std::size_t& H) {
    if (U.rank() != 2 || U.cols() != 4 * U.rows()) {
        throw ShapeError(std::string(op) + ": recurrent weight must be [H x 4H], got " + shape_str(U.shape()));
    }
    H = U.rows();
    if (W.rank() != 2 || W.rows() != x.cols() || W.cols() != 4 * H) {
        throw ShapeError(std::string(op) + ": input weight " + shape_str(W.shape()) + " incompatible with input " +
                         shape_str(x.shape()) + " and recurrent weight " + shape_str(U.shape()));
    }
    if (b.size() != 4 * H) {
        throw ShapeError(std::string(op) + ": bias " + shape_str(b.shape()) + " incompatible with recurrent weight " +
                         shape_str(U.shape()));
    }
}

// Gate activations in place over one [4H] pre-activation row.
void activate(double* z, std::size_t H) {
    for (std::size_t j = 0; j < H; ++j) z[j] = sig(z[j]);
    for (std::size_t j = H; j < 2 * H; ++j) z[j] = sig(z[j]);
    for (std::size_t j = 2 * H; j < 3 * H; ++j) z[j] = std::tanh(z[j]);
    for (std::size_t j = 3 * H; j < 4 * H; ++j) z[j] = sig(z[j]);
}

// Given activated gates, previous cell, and gradients w.r.t. (h', c'),
// writes pre-activation gradients into dz and returns dc_prev into dc_prev.
void cell_backward(const double* gates, const double* c_prev, const double* tanh_c, const double* dh,
                   const double* dc_in, double* dz, double* dc_prev, std::size_t H) {
    for (std::size_t j = 0; j < H; ++j) {
        const double i = gates[j], f = gates[H + j], g = gates[2 * H + j], o = gates[3 * H + j];
        const double tc = tanh_c[j];
        const double dc = dc_in[j] + dh[j] * o * (1.0 - tc * tc);
        dz[j] = dc * g * i * (1.0 - i);
        dz[H + j] = dc * c_prev[j] * f * (1.0 - f);
        dz[2 * H + j] = dc * i * (1.0 - g * g);
        dz[3 * H + j] = dh[j] * tc * o * (1.0 - o);
        dc_prev[j] = dc * f;
    }
}

}  // namespace

Var lstm_cell(Var x, Var h, Var c, Var W, Var U, Var b) {
    const Tensor& X = x.value();
    const Tensor& Hp = h.value();
    const Tensor& Cp = c.value();
    std::size_t H = 0;
    check_lstm_shapes("lstm_cell", X, W.value(), U.value(), b.value(), H);
    if (X.rows() != 1 || Hp.size() != H || Cp.size() != H) {
        throw ShapeError("lstm_cell: expected single-row x and state of width " + std::to_string(H) + ", got x " +
                         shape_str(X.shape()) + ", h " + shape_str(Hp.shape()) + ", c " + shape_str(Cp.shape()));
    }
    const std::size_t in = X.cols();
    std::vector<double> gates(b.value().data().begin(), b.value().data().end());
    gemm_nn(X.ptr(), W.value().ptr(), gates.data(), 1, in, 4 * H);
    gemm_nn(Hp.ptr(), U.value().ptr(), gates.data(), 1, H, 4 * H);
    activate(gates.data(), H);
    Tensor out({1, 2 * H});
    std::vector<double> tanh_c(H);
    for (std::size_t j = 0; j < H; ++j) {
        const double cn = gates[H + j] * Cp[j] + gates[j] * gates[2 * H + j];
        tanh_c[j] = std::tanh(cn);
        out[j] = gates[3 * H + j] * tanh_c[j];
        out[H + j] = cn;
    }
    const bool rg = x.requires_grad() || h.requires_grad() || c.requires_grad() || W.requires_grad() ||
                    U.requires_grad() || b.requires_grad();
    Tape::BackwardFn bw;
    if (rg) {
        bw = [ix = x.id(), ih = h.id(), ic = c.id(), iW = W.id(), iU = U.id(), ib = b.id(), H, in,
              gates = std::move(gates), tanh_c = std::move(tanh_c)](Tape& t, const Tensor& g) {
            std::vector<double> dz(4 * H), dc_prev(H);
            cell_backward(gates.data(), t.value(ic).ptr(), tanh_c.data(), g.ptr(), g.ptr() + H, dz.data(),
                          dc_prev.data(), H);
            if (t.requires_grad(ic)) {
                Tensor& gc = t.grad_buffer(ic);
                for (std::size_t j = 0; j < H; ++j) gc[j] += dc_prev[j];
            }
            if (t.requires_grad(ix)) gemm_nt(dz.data(), t.value(iW).ptr(), t.grad_buffer(ix).ptr(), 1, 4 * H, in);
            if (t.requires_grad(ih)) gemm_nt(dz.data(), t.value(iU).ptr(), t.grad_buffer(ih).ptr(), 1, 4 * H, H);
            if (t.requires_grad(iW)) gemm_tn(t.value(ix).ptr(), dz.data(), t.grad_buffer(iW).ptr(), in, 1, 4 * H);
            if (t.requires_grad(iU)) gemm_tn(t.value(ih).ptr(), dz.data(), t.grad_buffer(iU).ptr(), H, 1, 4 * H);
            if (t.requires_grad(ib)) {
                Tensor& gb = t.grad_buffer(ib);
                for (std::size_t j = 0; j < 4 * H; ++j) gb[j] += dz[j];
            }
        };
    }
    return x.tape().push("lstm_cell", std::move(out), rg, std::move(bw));
}

Var lstm_layer(Var X, Var W, Var U, Var b, bool reverse) {
    const Tensor& Xv = X.value();
    std::size_t H = 0;
    check_lstm_shapes("lstm_layer", Xv, W.value(), U.value(), b.value(), H);
    const std::size_t T = Xv.rows(), in = Xv.cols(), G = 4 * H;

    // Pre-activations for all steps: X W + b, then the recurrence adds h U.
    std::vector<double> gates(T * G);
    for (std::size_t t = 0; t < T; ++t) std::copy_n(b.value().ptr(), G, gates.data() + t * G);
    gemm_nn(Xv.ptr(), W.value().ptr(), gates.data(), T, in, G);

    Tensor out({T, H});
    std::vector<double> cells(T * H), tanh_c(T * H);
    const double* Uv = U.value().ptr();
    std::vector<double> zeros(H, 0.0);
    const double* h_prev = zeros.data();
    const double* c_prev = zeros.data();
    for (std::size_t s = 0; s < T; ++s) {
        const std::size_t t = reverse ? T - 1 - s : s;
        double* z = gates.data() + t * G;
        gemm_nn(h_prev, Uv, z, 1, H, G);
        activate(z, H);
        double* cn = cells.data() + t * H;
        double* tc = tanh_c.data() + t * H;
        double* hn = out.ptr() + t * H;
        for (std::size_t j = 0; j < H; ++j) {
            cn[j] = z[H + j] * c_prev[j] + z[j] * z[2 * H + j];
            tc[j] = std::tanh(cn[j]);
            hn[j] = z[3 * H + j] * tc[j];
        }
        h_prev = hn;
        c_prev = cn;
    }

    const bool rg = X.requires_grad() || W.requires_grad() || U.requires_grad() || b.requires_grad();
    Tape& tape = X.tape();
    Tape::BackwardFn bw;
    if (rg) {
        bw = [iX = X.id(), iW = W.id(), iU = U.id(), ib = b.id(), out_id = static_cast<std::uint32_t>(tape.size()), T,
              in, H, G, reverse, gates = std::move(gates), cells = std::move(cells),
              tanh_c = std::move(tanh_c)](Tape& tp, const Tensor& g) {
            const Tensor& Hs = tp.value(out_id);
            const double* Uv = tp.value(iU).ptr();
            // U^T [G x H] so each step's dh = dz U^T is a vectorized row update.
            std::vector<double> Ut(G * H);
            for (std::size_t r = 0; r < H; ++r)
                for (std::size_t c = 0; c < G; ++c) Ut[c * H + r] = Uv[r * G + c];
            std::vector<double> dZ(T * G, 0.0);
            std::vector<double> dh(H), dh_carry(H, 0.0), dc_carry(H, 0.0), dc_prev(H);
            std::vector<double> zeros(H, 0.0);
            const bool gU = tp.requires_grad(iU);
            Tensor* gUb = gU ? &tp.grad_buffer(iU) : nullptr;
            for (std::size_t s = T; s-- > 0;) {
                const std::size_t t = reverse ? T - 1 - s : s;
                const bool first = s == 0;
                const std::size_t tp_idx = reverse ? t + 1 : t - 1;  // previous step in sweep order
                const double* c_prev = first ? zeros.data() : cells.data() + tp_idx * H;
                const double* h_prev = first ? zeros.data() : Hs.ptr() + tp_idx * H;
                for (std::size_t j = 0; j < H; ++j) dh[j] = g[t * H + j] + dh_carry[j];
                double* dz = dZ.data() + t * G;
                cell_backward(gates.data() + t * G, c_prev, tanh_c.data() + t * H, dh.data(), dc_carry.data(), dz,
                              dc_prev.data(), H);
                std::copy(dc_prev.begin(), dc_prev.end(), dc_carry.begin());
                std::fill(dh_carry.begin(), dh_carry.end(), 0.0);
                gemm_nn(dz, Ut.data(), dh_carry.data(), 1, G, H);
                if (gU && !first) gemm_tn(h_prev, dz, gUb->ptr(), H, 1, G);
            }
            if (tp.requires_grad(iX)) gemm_nt(dZ.data(), tp.value(iW).ptr(), tp.grad_buffer(iX).ptr(), T, G, in);
            if (tp.requires_grad(iW)) gemm_tn(tp.value(iX).ptr(), dZ.data(), tp.grad_buffer(iW).ptr(), in, T, G);
            if (tp.requires_grad(ib)) {
                Tensor& gb = tp.grad_buffer(ib);
                for (std::size_t t = 0; t < T; ++t)
                    for (std::size_t j = 0; j < G; ++j) gb[j] += dZ[t * G + j];
            }
        };
    }
    return tape.push("lstm_layer", std::move(out), rg, std::move(bw));
}

}  // namespace streamvae::nn
