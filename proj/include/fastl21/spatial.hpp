#pragma once

// Spatial discretization on the square [-1, 1]^2 with homogeneous Dirichlet
// data. Two backends share one interface:
//   fd   - uniform grid, 5-point Laplacian, sparse solvers
//   cheb - Chebyshev-Gauss-Lobatto collocation, dense solvers
// Fields hold interior values only, row-major with y as the slow index.

#include <Eigen/Dense>
#include <Eigen/IterativeLinearSolvers>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <cmath>
#include <deque>
#include <functional>
#include <iomanip>
#include <memory>
#include <mutex>
#include <numbers>
#include <ostream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace fastl21 {

using Field = Eigen::VectorXd;

enum class Backend { fd, cheb };

inline std::string to_string(Backend b) { return b == Backend::fd ? "fd" : "cheb"; }

inline Backend parse_backend(const std::string& s)
{
    if (s == "fd") return Backend::fd;
    if (s == "cheb") return Backend::cheb;
    throw std::invalid_argument("unknown spatial backend '" + s + "' (expected fd or cheb)");
}

struct Norms {
    double l2 = 0;
    double h1_semi = 0;
};

namespace detail {

/// Rounds to about 14 significant digits so that shifts which differ only by
/// rounding noise share a cache entry.
inline double round_key(double x)
{
    if (x == 0.0 || !std::isfinite(x)) return x;
    const double e = std::floor(std::log10(std::abs(x)));
    const double scale = std::pow(10.0, 13.0 - e);
    return std::round(x * scale) / scale;
}

/// Chebyshev differentiation matrix on x_j = cos(pi j / n), j = 0..n.
inline Eigen::MatrixXd cheb_diff(int n, std::vector<double>& x)
{
    x.resize(n + 1);
    // cos(pi j / n) written in a form that is exactly antisymmetric
    for (int j = 0; j <= n; ++j) x[j] = std::sin(std::numbers::pi * (n - 2.0 * j) / (2.0 * n));
    Eigen::MatrixXd D = Eigen::MatrixXd::Zero(n + 1, n + 1);
    auto cw = [n](int i) { return (i == 0 || i == n) ? 2.0 : 1.0; };
    for (int i = 0; i <= n; ++i) {
        for (int j = 0; j <= n; ++j) {
            if (i == j) continue;
            const double sgn = ((i + j) % 2 == 0) ? 1.0 : -1.0;
            D(i, j) = cw(i) / cw(j) * sgn / (x[i] - x[j]);
        }
        // negative row sum diagonal
        D(i, i) = -D.row(i).sum();
    }
    return D;
}

/// Clenshaw-Curtis weights for the same nodes.
inline std::vector<double> clenshaw_curtis(int n)
{
    std::vector<double> w(n + 1, 0.0);
    const double pi = std::numbers::pi;
    if (n % 2 == 0) {
        w[0] = w[n] = 1.0 / (n * n - 1.0);
    } else {
        w[0] = w[n] = 1.0 / (static_cast<double>(n) * n);
    }
    for (int j = 1; j < n; ++j) {
        const double th = pi * j / n;
        double v = 1.0;
        if (n % 2 == 0) {
            for (int k = 1; k < n / 2; ++k) v -= 2.0 * std::cos(2.0 * k * th) / (4.0 * k * k - 1.0);
            v -= std::cos(n * th) / (n * n - 1.0);
        } else {
            for (int k = 1; k <= (n - 1) / 2; ++k) v -= 2.0 * std::cos(2.0 * k * th) / (4.0 * k * k - 1.0);
        }
        w[j] = 2.0 * v / n;
    }
    return w;
}

}  // namespace detail

class SpatialOperator {
public:
    using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

    SpatialOperator(Backend backend, int n) : backend_(backend), n_(n), m_(n - 1)
    {
        if (n < 3) throw std::invalid_argument("build_space: need n >= 3");
        if (backend == Backend::fd) {
            h_ = 2.0 / n;
            nodes_.resize(n + 1);
            for (int i = 0; i <= n; ++i) nodes_[i] = -1.0 + i * h_;
            weights_.assign(n + 1, h_);
            weights_.front() = weights_.back() = 0.5 * h_;
            build_fd();
        } else {
            D_ = detail::cheb_diff(n, nodes_);
            weights_ = detail::clenshaw_curtis(n);
            build_cheb();
        }
    }

    Backend backend() const noexcept { return backend_; }
    int n() const noexcept { return n_; }
    /// Interior points per dimension.
    int m() const noexcept { return m_; }
    Eigen::Index size() const noexcept { return static_cast<Eigen::Index>(m_) * m_; }
    /// All n + 1 nodes per dimension, boundary included.
    const std::vector<double>& nodes() const noexcept { return nodes_; }
    /// One-dimensional quadrature weights on the full node set.
    const std::vector<double>& weights() const noexcept { return weights_; }

    Field sample(const std::function<double(double, double)>& f) const
    {
        Field u(size());
        for (int iy = 0; iy < m_; ++iy)
            for (int ix = 0; ix < m_; ++ix) u(iy * m_ + ix) = f(nodes_[ix + 1], nodes_[iy + 1]);
        return u;
    }

    Field laplacian(const Field& u) const
    {
        check_size(u);
        if (backend_ == Backend::fd) return lap_sparse_ * u;
        Field out(size());
        Eigen::Map<const RowMat> U(u.data(), m_, m_);
        Eigen::Map<RowMat> O(out.data(), m_, m_);
        O.noalias() = D2_ * U;
        O.noalias() += U * D2_.transpose();
        return out;
    }

    /// Solves (c + diag) v - theta Lap v = rhs.
    Field solve_shifted(double c, double theta, const Field& rhs, const Field* diag = nullptr) const
    {
        check_size(rhs);
        if (!(c > 0)) throw std::invalid_argument("solve_shifted: c must be positive");
        if (theta < 0) throw std::invalid_argument("solve_shifted: theta must be >= 0");
        if (diag) check_size(*diag);
        if (theta == 0.0) {
            if (!diag) return rhs / c;
            return rhs.array() / (c + diag->array());
        }
        return backend_ == Backend::fd ? solve_fd(c, theta, rhs, diag) : solve_cheb(c, theta, rhs, diag);
    }

    /// Full (n + 1) x (n + 1) grid with zero boundary; rows index y.
    RowMat full_grid(const Field& u) const
    {
        check_size(u);
        RowMat U = RowMat::Zero(n_ + 1, n_ + 1);
        U.block(1, 1, m_, m_) = Eigen::Map<const RowMat>(u.data(), m_, m_);
        return U;
    }

    double l2_full(const RowMat& U) const
    {
        double s = 0;
        for (int iy = 0; iy <= n_; ++iy)
            for (int ix = 0; ix <= n_; ++ix) s += weights_[iy] * weights_[ix] * U(iy, ix) * U(iy, ix);
        return std::sqrt(s);
    }

    /// ||grad u|| for a full-grid function (boundary values may be nonzero).
    double h1_semi_full(const RowMat& U) const { return std::sqrt(grad_sq(U)); }

    double l2(const Field& u) const { return l2_full(full_grid(u)); }
    double h1_semi(const Field& u) const { return h1_semi_full(full_grid(u)); }
    Norms norms(const Field& u) const
    {
        const auto U = full_grid(u);
        return {l2_full(U), std::sqrt(grad_sq(U))};
    }

    /// int nu2/2 |grad u|^2 + potential(u) dx
    double energy(const Field& u, double nu2, const std::function<double(double)>& potential) const
    {
        const auto U = full_grid(u);
        double pot = 0;
        for (int iy = 0; iy <= n_; ++iy)
            for (int ix = 0; ix <= n_; ++ix) pot += weights_[iy] * weights_[ix] * potential(U(iy, ix));
        return 0.5 * nu2 * grad_sq(U) + pot;
    }

    void write_csv(std::ostream& os, const Field& u) const
    {
        const auto U = full_grid(u);
        os << "x,y,value\n" << std::setprecision(17);
        for (int iy = 0; iy <= n_; ++iy)
            for (int ix = 0; ix <= n_; ++ix) os << nodes_[ix] << ',' << nodes_[iy] << ',' << U(iy, ix) << '\n';
    }

    const Eigen::SparseMatrix<double>& fd_matrix() const { return lap_sparse_; }

private:
    using SparseChol = Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>;

    void check_size(const Field& u) const
    {
        if (u.size() != size()) throw std::invalid_argument("field size does not match the spatial operator");
    }

    void build_fd()
    {
        const double ih2 = 1.0 / (h_ * h_);
        std::vector<Eigen::Triplet<double>> trip;
        trip.reserve(5 * static_cast<std::size_t>(size()));
        for (int iy = 0; iy < m_; ++iy) {
            for (int ix = 0; ix < m_; ++ix) {
                const int p = iy * m_ + ix;
                trip.emplace_back(p, p, -4.0 * ih2);
                if (ix > 0) trip.emplace_back(p, p - 1, ih2);
                if (ix + 1 < m_) trip.emplace_back(p, p + 1, ih2);
                if (iy > 0) trip.emplace_back(p, p - m_, ih2);
                if (iy + 1 < m_) trip.emplace_back(p, p + m_, ih2);
            }
        }
        lap_sparse_.resize(size(), size());
        lap_sparse_.setFromTriplets(trip.begin(), trip.end());
        eye_.resize(size(), size());
        eye_.setIdentity();
    }

    void build_cheb()
    {
        const Eigen::MatrixXd D2full = D_ * D_;
        D2_ = D2full.block(1, 1, m_, m_);
        // D2_ has real negative eigenvalues; diagonalize once for shifted solves
        Eigen::EigenSolver<Eigen::MatrixXd> es(D2_);
        if (es.info() != Eigen::Success) throw std::runtime_error("cheb: eigendecomposition failed");
        if (es.eigenvalues().imag().cwiseAbs().maxCoeff() > 1e-8 * es.eigenvalues().real().cwiseAbs().maxCoeff())
            throw std::runtime_error("cheb: second-derivative matrix has complex eigenvalues");
        lam_ = es.eigenvalues().real();
        V_ = es.eigenvectors().real();
        Vinv_ = V_.partialPivLu().inverse();
    }

    double grad_sq(const RowMat& U) const
    {
        double s = 0;
        if (backend_ == Backend::fd) {
            for (int iy = 0; iy <= n_; ++iy)
                for (int ix = 0; ix < n_; ++ix) {
                    const double gx = (U(iy, ix + 1) - U(iy, ix)) / h_;
                    s += h_ * weights_[iy] * gx * gx;
                }
            for (int iy = 0; iy < n_; ++iy)
                for (int ix = 0; ix <= n_; ++ix) {
                    const double gy = (U(iy + 1, ix) - U(iy, ix)) / h_;
                    s += h_ * weights_[ix] * gy * gy;
                }
            return s;
        }
        const RowMat Ux = U * D_.transpose();
        const RowMat Uy = D_ * U;
        for (int iy = 0; iy <= n_; ++iy)
            for (int ix = 0; ix <= n_; ++ix)
                s += weights_[iy] * weights_[ix] * (Ux(iy, ix) * Ux(iy, ix) + Uy(iy, ix) * Uy(iy, ix));
        return s;
    }

    Field solve_fd(double c, double theta, const Field& rhs, const Field* diag) const
    {
        if (!diag) {
            const auto chol = factor_fd(c, theta);
            Field v = chol->solve(rhs);
            if (chol->info() != Eigen::Success) throw std::runtime_error("solve_shifted: sparse solve failed");
            return v;
        }
        Eigen::SparseMatrix<double> A = -theta * lap_sparse_;
        A.diagonal().array() += c + diag->array();
        Eigen::ConjugateGradient<Eigen::SparseMatrix<double>, Eigen::Lower | Eigen::Upper,
                                 Eigen::DiagonalPreconditioner<double>>
            cg;
        cg.setTolerance(1e-12);
        cg.setMaxIterations(static_cast<Eigen::Index>(10 * size() + 100));
        cg.compute(A);
        Field v = cg.solve(rhs);
        if (cg.info() != Eigen::Success)
            throw std::runtime_error("solve_shifted: CG hit the iteration cap (system may be indefinite)");
        return v;
    }

    std::shared_ptr<const SparseChol> factor_fd(double c, double theta) const
    {
        const std::pair<double, double> key{detail::round_key(c), detail::round_key(theta)};
        std::lock_guard<std::mutex> lock(*cache_mutex_);
        for (const auto& [k, f] : fd_cache_)
            if (k == key) return f;
        Eigen::SparseMatrix<double> A = c * eye_ - theta * lap_sparse_;
        auto f = std::make_shared<SparseChol>(A);
        if (f->info() != Eigen::Success) throw std::runtime_error("solve_shifted: factorization failed");
        fd_cache_.emplace_back(key, f);
        if (fd_cache_.size() > kCacheSize) fd_cache_.pop_front();
        return f;
    }

    Field solve_cheb(double c, double theta, const Field& rhs, const Field* diag) const
    {
        if (!diag) {
            Field out(size());
            Eigen::Map<const RowMat> R(rhs.data(), m_, m_);
            RowMat T = Vinv_ * R * Vinv_.transpose();
            for (int i = 0; i < m_; ++i)
                for (int j = 0; j < m_; ++j) T(i, j) /= c - theta * (lam_(i) + lam_(j));
            Eigen::Map<RowMat>(out.data(), m_, m_) = V_ * T * V_.transpose();
            return out;
        }
        Eigen::MatrixXd A;
        {
            std::lock_guard<std::mutex> lock(*cache_mutex_);
            if (dense_lap_.size() == 0) {
                const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(m_, m_);
                Eigen::MatrixXd L(size(), size());
                for (int a = 0; a < m_; ++a)
                    for (int b = 0; b < m_; ++b)
                        L.block(a * m_, b * m_, m_, m_) = D2_(a, b) * I + (a == b ? D2_ : Eigen::MatrixXd::Zero(m_, m_));
                dense_lap_ = std::move(L);
            }
            A = -theta * dense_lap_;
        }
        A.diagonal().array() += c + diag->array();
        return A.partialPivLu().solve(rhs);
    }

    static constexpr std::size_t kCacheSize = 8;

    Backend backend_;
    int n_;
    int m_;
    double h_ = 0;
    std::vector<double> nodes_;
    std::vector<double> weights_;

    Eigen::SparseMatrix<double> lap_sparse_;
    Eigen::SparseMatrix<double> eye_;
    mutable std::deque<std::pair<std::pair<double, double>, std::shared_ptr<const SparseChol>>> fd_cache_;

    Eigen::MatrixXd D_, D2_, V_, Vinv_;
    Eigen::VectorXd lam_;
    mutable Eigen::MatrixXd dense_lap_;

    std::shared_ptr<std::mutex> cache_mutex_ = std::make_shared<std::mutex>();
};

inline std::shared_ptr<const SpatialOperator> build_space(Backend backend, int n)
{
    return std::make_shared<const SpatialOperator>(backend, n);
}

inline Field solve_shifted(const SpatialOperator& op, double c, double theta, const Field& rhs,
                           const Field* diag = nullptr)
{
    return op.solve_shifted(c, theta, rhs, diag);
}

inline Norms norms(const Field& u, const SpatialOperator& op) { return op.norms(u); }

inline double energy(const Field& u, const SpatialOperator& op, double nu2,
                     const std::function<double(double)>& potential)
{
    return op.energy(u, nu2, potential);
}

}  // namespace fastl21
