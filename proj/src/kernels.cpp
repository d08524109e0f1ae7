#include "selab/kernels.hpp"

#include <algorithm>
#include <cmath>

#include "selab/error.hpp"
#include "selab/matrix.hpp"

namespace selab {

bool all_finite(const Matrix& m) noexcept {
    return std::all_of(m.flat().begin(), m.flat().end(), [](double v) { return std::isfinite(v); });
}

namespace kernels {
namespace {

constexpr std::size_t kTileRows = 16;
constexpr std::size_t kTileCols = 256;
constexpr std::size_t kTransposeBlock = 32;

void check_gemm(std::size_t m, std::size_t n, std::size_t k, std::span<const double> a,
                std::span<const double> b, std::span<double> c) {
    if (a.size() != m * k || b.size() != k * n || c.size() != m * n)
        throw ShapeError("gemm: operand sizes do not match m, n, k");
}

// One output tile. Each C element accumulates over kk in increasing order,
// independent of how tiles are scheduled.
inline void gemm_tile(std::size_t r0, std::size_t r1, std::size_t c0, std::size_t c1, std::size_t n,
                      std::size_t k, const double* a, const double* b, double* c, bool accumulate) {
    const std::size_t width = c1 - c0;
    if (!accumulate)
        for (std::size_t r = r0; r < r1; ++r) std::fill_n(c + r * n + c0, width, 0.0);
    for (std::size_t kk = 0; kk < k; ++kk) {
        const double* brow = b + kk * n + c0;
        for (std::size_t r = r0; r < r1; ++r) {
            const double av = a[r * k + kk];
            double* crow = c + r * n + c0;
#pragma omp simd
            for (std::size_t j = 0; j < width; ++j) crow[j] += av * brow[j];
        }
    }
}

inline void transpose_block(std::size_t r0, std::size_t c0, std::size_t rows, std::size_t cols,
                            const double* in, double* out) {
    const std::size_t r1 = std::min(rows, r0 + kTransposeBlock);
    const std::size_t c1 = std::min(cols, c0 + kTransposeBlock);
    for (std::size_t r = r0; r < r1; ++r)
        for (std::size_t c = c0; c < c1; ++c) out[c * rows + r] = in[r * cols + c];
}

inline void project_row(std::size_t row, std::size_t f, std::size_t t, const double* w, RowBand band,
                        const double* x, double* out) {
    double* orow = out + row * t;
    std::fill_n(orow, t, 0.0);
    for (std::size_t kk = band.begin; kk < band.end; ++kk) {
        const double wv = w[row * f + kk];
        const double* xrow = x + kk * t;
#pragma omp simd
        for (std::size_t j = 0; j < t; ++j) orow[j] += wv * xrow[j];
    }
}

inline void backproject_row(std::size_t bin, std::size_t q, std::size_t f, std::size_t t, const double* w,
                            const RowBand* bands, const double* g, double* out) {
    double* orow = out + bin * t;
    std::fill_n(orow, t, 0.0);
    for (std::size_t qq = 0; qq < q; ++qq) {
        if (bin < bands[qq].begin || bin >= bands[qq].end) continue;
        const double wv = w[qq * f + bin];
        const double* grow = g + qq * t;
#pragma omp simd
        for (std::size_t j = 0; j < t; ++j) orow[j] += wv * grow[j];
    }
}

void check_banded(std::size_t q, std::size_t f, std::size_t t, std::span<const double> w,
                  std::span<const RowBand> bands, std::size_t in_size, std::size_t in_rows,
                  std::size_t out_size, std::size_t out_rows) {
    if (w.size() != q * f || bands.size() != q || in_size != in_rows * t || out_size != out_rows * t)
        throw ShapeError("banded projection: operand sizes do not match");
    for (const auto& band : bands)
        if (band.begin > band.end || band.end > f) throw ShapeError("banded projection: band out of range");
}

inline void adam_element(double& p, double g, double& m, double& v, double lr, double beta1, double beta2,
                         double eps, double bias1, double bias2) {
    m = beta1 * m + (1.0 - beta1) * g;
    v = beta2 * v + (1.0 - beta2) * g * g;
    const double m_hat = m / bias1;
    const double v_hat = v / bias2;
    p -= lr * m_hat / (std::sqrt(v_hat) + eps);
}

void check_adam(std::span<double> param, std::span<const double> grad, std::span<double> m,
                std::span<double> v, long step) {
    if (grad.size() != param.size() || m.size() != param.size() || v.size() != param.size())
        throw ShapeError("adam_update: state does not mirror parameter shape");
    if (step < 1) throw InvalidInput("adam_update: step counter must be >= 1");
}

std::size_t ceil_div(std::size_t a, std::size_t b) { return (a + b - 1) / b; }

} // namespace

namespace serial {

void gemm(std::size_t m, std::size_t n, std::size_t k, std::span<const double> a, std::span<const double> b,
          std::span<double> c, bool accumulate) {
    check_gemm(m, n, k, a, b, c);
    for (std::size_t r0 = 0; r0 < m; r0 += kTileRows)
        for (std::size_t c0 = 0; c0 < n; c0 += kTileCols)
            gemm_tile(r0, std::min(m, r0 + kTileRows), c0, std::min(n, c0 + kTileCols), n, k, a.data(),
                      b.data(), c.data(), accumulate);
}

void transpose(std::size_t rows, std::size_t cols, std::span<const double> in, std::span<double> out) {
    if (in.size() != rows * cols || out.size() != rows * cols) throw ShapeError("transpose: size mismatch");
    for (std::size_t r0 = 0; r0 < rows; r0 += kTransposeBlock)
        for (std::size_t c0 = 0; c0 < cols; c0 += kTransposeBlock)
            transpose_block(r0, c0, rows, cols, in.data(), out.data());
}

void banded_project(std::size_t q, std::size_t f, std::size_t t, std::span<const double> w,
                    std::span<const RowBand> bands, std::span<const double> x, std::span<double> out) {
    check_banded(q, f, t, w, bands, x.size(), f, out.size(), q);
    for (std::size_t row = 0; row < q; ++row) project_row(row, f, t, w.data(), bands[row], x.data(), out.data());
}

void banded_backproject(std::size_t q, std::size_t f, std::size_t t, std::span<const double> w,
                        std::span<const RowBand> bands, std::span<const double> g, std::span<double> out) {
    check_banded(q, f, t, w, bands, g.size(), q, out.size(), f);
    for (std::size_t bin = 0; bin < f; ++bin)
        backproject_row(bin, q, f, t, w.data(), bands.data(), g.data(), out.data());
}

void adam_update(std::span<double> param, std::span<const double> grad, std::span<double> m, std::span<double> v,
                 double lr, double beta1, double beta2, double eps, long step) {
    check_adam(param, grad, m, v, step);
    const double bias1 = 1.0 - std::pow(beta1, static_cast<double>(step));
    const double bias2 = 1.0 - std::pow(beta2, static_cast<double>(step));
    for (std::size_t i = 0; i < param.size(); ++i)
        adam_element(param[i], grad[i], m[i], v[i], lr, beta1, beta2, eps, bias1, bias2);
}

} // namespace serial

namespace omp {

void gemm(std::size_t m, std::size_t n, std::size_t k, std::span<const double> a, std::span<const double> b,
          std::span<double> c, bool accumulate) {
    check_gemm(m, n, k, a, b, c);
    const auto row_tiles = static_cast<long>(ceil_div(m, kTileRows));
    const auto col_tiles = static_cast<long>(ceil_div(n, kTileCols));
#pragma omp parallel for collapse(2) schedule(static)
    for (long rt = 0; rt < row_tiles; ++rt)
        for (long ct = 0; ct < col_tiles; ++ct) {
            const std::size_t r0 = static_cast<std::size_t>(rt) * kTileRows;
            const std::size_t c0 = static_cast<std::size_t>(ct) * kTileCols;
            gemm_tile(r0, std::min(m, r0 + kTileRows), c0, std::min(n, c0 + kTileCols), n, k, a.data(), b.data(),
                      c.data(), accumulate);
        }
}

void transpose(std::size_t rows, std::size_t cols, std::span<const double> in, std::span<double> out) {
    if (in.size() != rows * cols || out.size() != rows * cols) throw ShapeError("transpose: size mismatch");
    const auto row_blocks = static_cast<long>(ceil_div(rows, kTransposeBlock));
    const auto col_blocks = static_cast<long>(ceil_div(cols, kTransposeBlock));
#pragma omp parallel for collapse(2) schedule(static)
    for (long rb = 0; rb < row_blocks; ++rb)
        for (long cb = 0; cb < col_blocks; ++cb)
            transpose_block(static_cast<std::size_t>(rb) * kTransposeBlock,
                            static_cast<std::size_t>(cb) * kTransposeBlock, rows, cols, in.data(), out.data());
}

void banded_project(std::size_t q, std::size_t f, std::size_t t, std::span<const double> w,
                    std::span<const RowBand> bands, std::span<const double> x, std::span<double> out) {
    check_banded(q, f, t, w, bands, x.size(), f, out.size(), q);
#pragma omp parallel for schedule(static)
    for (long row = 0; row < static_cast<long>(q); ++row)
        project_row(static_cast<std::size_t>(row), f, t, w.data(), bands[static_cast<std::size_t>(row)], x.data(),
                    out.data());
}

void banded_backproject(std::size_t q, std::size_t f, std::size_t t, std::span<const double> w,
                        std::span<const RowBand> bands, std::span<const double> g, std::span<double> out) {
    check_banded(q, f, t, w, bands, g.size(), q, out.size(), f);
#pragma omp parallel for schedule(static)
    for (long bin = 0; bin < static_cast<long>(f); ++bin)
        backproject_row(static_cast<std::size_t>(bin), q, f, t, w.data(), bands.data(), g.data(), out.data());
}

void adam_update(std::span<double> param, std::span<const double> grad, std::span<double> m, std::span<double> v,
                 double lr, double beta1, double beta2, double eps, long step) {
    check_adam(param, grad, m, v, step);
    const double bias1 = 1.0 - std::pow(beta1, static_cast<double>(step));
    const double bias2 = 1.0 - std::pow(beta2, static_cast<double>(step));
    const auto n = static_cast<long>(param.size());
#pragma omp parallel for schedule(static)
    for (long i = 0; i < n; ++i) {
        const auto u = static_cast<std::size_t>(i);
        adam_element(param[u], grad[u], m[u], v[u], lr, beta1, beta2, eps, bias1, bias2);
    }
}

} // namespace omp
} // namespace kernels
} // namespace selab
