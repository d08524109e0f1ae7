#pragma once

// Data-parallel inner loops. Every kernel exists twice: a plain serial
// reference and an OpenMP version. Both variants share the same per-element
// accumulation order, so their results are bitwise identical regardless of
// thread count.

#include <cstddef>
#include <span>

namespace selab::kernels {

/// Rows [begin, end) of a banded matrix whose remaining entries are zero.
struct RowBand {
    std::size_t begin = 0;
    std::size_t end = 0;
};

namespace serial {

/// C(MxN) = A(MxK) * B(KxN), or C += A*B when accumulate is set. Row-major.
void gemm(std::size_t m, std::size_t n, std::size_t k, std::span<const double> a,
          std::span<const double> b, std::span<double> c, bool accumulate = false);

/// out(RxC) = in(CxR) transposed.
void transpose(std::size_t rows, std::size_t cols, std::span<const double> in, std::span<double> out);

/// out(QxT) = W(QxF) * x(FxT), only touching columns inside each row's band.
void banded_project(std::size_t q, std::size_t f, std::size_t t, std::span<const double> w,
                    std::span<const RowBand> bands, std::span<const double> x, std::span<double> out);

/// out(FxT) = W(QxF)^T * g(QxT).
void banded_backproject(std::size_t q, std::size_t f, std::size_t t, std::span<const double> w,
                        std::span<const RowBand> bands, std::span<const double> g, std::span<double> out);

/// Adam update of one parameter block; step is the 1-based step count.
void adam_update(std::span<double> param, std::span<const double> grad, std::span<double> m,
                 std::span<double> v, double lr, double beta1, double beta2, double eps, long step);

} // namespace serial

namespace omp {

void gemm(std::size_t m, std::size_t n, std::size_t k, std::span<const double> a,
          std::span<const double> b, std::span<double> c, bool accumulate = false);
void transpose(std::size_t rows, std::size_t cols, std::span<const double> in, std::span<double> out);
void banded_project(std::size_t q, std::size_t f, std::size_t t, std::span<const double> w,
                    std::span<const RowBand> bands, std::span<const double> x, std::span<double> out);
void banded_backproject(std::size_t q, std::size_t f, std::size_t t, std::span<const double> w,
                        std::span<const RowBand> bands, std::span<const double> g, std::span<double> out);
void adam_update(std::span<double> param, std::span<const double> grad, std::span<double> m,
                 std::span<double> v, double lr, double beta1, double beta2, double eps, long step);

} // namespace omp

/// Selects between the serial reference and the OpenMP kernels.
enum class Exec { serial, parallel };

} // namespace selab::kernels
