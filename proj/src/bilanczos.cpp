#include "kssh/bilanczos.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace kssh {

namespace {

using RowMat = Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Eigen::Map<const RowMat> as_matrix(const Vector& x, int n) {
    return Eigen::Map<const RowMat>(x.data(), n, n);
}

Vector as_vector(const RowMat& m) {
    return Eigen::Map<const Vector>(m.data(), m.size());
}

} // namespace

Matrix KrylovBasis::tridiagonal() const {
    Matrix t = Matrix::Zero(dim, dim);
    for (int j = 0; j < dim; ++j) {
        t(j, j) = a(j);
        if (j > 0) {
            t(j - 1, j) = b(j);
            t(j, j - 1) = c(j);
        }
    }
    return t;
}

Matrix OperatorKrylovBasis::right_op(int j) const {
    return Matrix(as_matrix(right_ops.col(j).eval(), op_dim));
}

Matrix OperatorKrylovBasis::left_op(int j) const {
    return Matrix(as_matrix(left_ops.col(j).eval(), op_dim));
}

Matrix OperatorKrylovBasis::tridiagonal() const {
    Matrix t = Matrix::Zero(dim, dim);
    for (int j = 0; j < dim; ++j) {
        t(j, j) = diag(j);
        if (j > 0) {
            t(j - 1, j) = b_up(j);
            t(j, j - 1) = b_down(j);
        }
    }
    return t;
}

KrylovBasis bilanczos_core(const ApplyFn& apply_right, const ApplyFn& apply_left,
                           const Vector& seed, double ip_scale, double tol,
                           int max_dim, int space_dim) {
    if (tol <= 0.0) throw std::invalid_argument("bilanczos: tol must be > 0");
    const double seed_norm2 = ip_scale * seed.squaredNorm();
    if (std::abs(seed_norm2 - 1.0) > 1e-8) {
        throw std::invalid_argument("bilanczos: seed not normalized under the inner product");
    }
    const int cap = (max_dim > 0) ? std::min(max_dim, space_dim) : space_dim;

    KrylovBasis out;
    out.right_basis.resize(seed.size(), cap);
    out.left_basis.resize(seed.size(), cap);
    out.a.resize(cap);
    out.b = Vector::Zero(cap);
    out.c = Vector::Zero(cap);

    out.right_basis.col(0) = seed;
    out.left_basis.col(0) = seed;
    out.a(0) = ip_scale * seed.dot(apply_right(seed)); // Eigen dot conjugates the lhs
    int k = 1;

    out.stop = (cap == space_dim) ? LanczosStop::full_dimension : LanczosStop::cap_reached;
    while (k < cap) {
        const int j = k - 1;
        Vector alpha = apply_right(out.right_basis.col(j));
        Vector beta = apply_left(out.left_basis.col(j));
        alpha -= out.a(j) * out.right_basis.col(j);
        beta -= std::conj(out.a(j)) * out.left_basis.col(j);
        if (j > 0) {
            alpha -= out.b(j) * out.right_basis.col(j - 1);
            beta -= std::conj(out.c(j)) * out.left_basis.col(j - 1);
        }
        // Full re-biorthogonalization against every accepted pair.
        auto vr = out.right_basis.leftCols(k);
        auto vl = out.left_basis.leftCols(k);
        alpha.noalias() -= vr * (ip_scale * (vl.adjoint() * alpha));
        beta.noalias() -= vl * (ip_scale * (vr.adjoint() * beta));

        // omega = <beta|alpha>; the left candidate sits in the bra so that
        // <l_{k}|r_{k}> = 1 after the rescaling below.
        const cplx omega = ip_scale * beta.dot(alpha);
        out.final_omega = std::abs(omega);
        if (std::abs(omega) < tol) {
            const double residual = ip_scale * alpha.norm() * beta.norm();
            out.stop = (residual < 100.0 * tol) ? LanczosStop::invariant_subspace
                                                : LanczosStop::serious_breakdown;
            break;
        }
        const double c_next = std::sqrt(std::abs(omega));
        const cplx b_next = omega / c_next;
        out.c(k) = c_next;
        out.b(k) = b_next;
        out.right_basis.col(k) = alpha / c_next;
        out.left_basis.col(k) = beta / std::conj(b_next);
        out.a(k) = ip_scale * out.left_basis.col(k).dot(apply_right(out.right_basis.col(k)));
        ++k;
    }

    out.dim = k;
    out.a.conservativeResize(k);
    out.b.conservativeResize(k);
    out.c.conservativeResize(k);
    out.right_basis.conservativeResize(Eigen::NoChange, k);
    out.left_basis.conservativeResize(Eigen::NoChange, k);
    return out;
}

KrylovBasis state_bilanczos(const Matrix& h, const Vector& psi0, double tol, int max_dim) {
    if (h.rows() != h.cols() || h.rows() != psi0.size()) {
        throw std::invalid_argument("state_bilanczos: dimension mismatch");
    }
    const Matrix h_adj = h.adjoint();
    auto apply_right = [&h](const Vector& x) -> Vector { return h * x; };
    auto apply_left = [&h_adj](const Vector& x) -> Vector { return h_adj * x; };
    return bilanczos_core(apply_right, apply_left, psi0, 1.0, tol, max_dim,
                          static_cast<int>(h.rows()));
}

KrylovBasis state_bilanczos(const Hamiltonian& h, const Vector& psi0, double tol, int max_dim) {
    return state_bilanczos(h.matrix, psi0, tol, max_dim);
}

Matrix normalize_operator(const Matrix& op, double ip_scale) {
    const double norm = std::sqrt(ip_scale * op.squaredNorm());
    if (norm == 0.0) throw std::invalid_argument("normalize_operator: zero operator");
    return op / norm;
}

OperatorKrylovBasis operator_bilanczos(const Hamiltonian& h, const Matrix& op0, double tol,
                                       double ip_scale, int max_dim) {
    const int n = static_cast<int>(h.matrix.rows());
    if (op0.rows() != n || op0.cols() != n) {
        throw std::invalid_argument("operator_bilanczos: operator/Hamiltonian size mismatch");
    }
    if (ip_scale <= 0.0) ip_scale = 1.0 / std::sqrt(static_cast<double>(n));

    const Matrix h_adj = h.matrix.adjoint();
    // L O = H^dag O - O H acting on row-major vectorized operators.
    auto apply_right = [&](const Vector& x) -> Vector {
        auto xm = as_matrix(x, n);
        RowMat y = h_adj * xm - xm * h.matrix;
        return as_vector(y);
    };
    auto apply_left = [&](const Vector& x) -> Vector {
        auto xm = as_matrix(x, n);
        RowMat y = h.matrix * xm - xm * h_adj;
        return as_vector(y);
    };

    RowMat seed_m = op0;
    KrylovBasis core = bilanczos_core(apply_right, apply_left, as_vector(seed_m), ip_scale,
                                      tol, max_dim, n * n);

    OperatorKrylovBasis out;
    out.b_up = std::move(core.b);
    out.b_down = std::move(core.c);
    out.diag = std::move(core.a);
    out.right_ops = std::move(core.right_basis);
    out.left_ops = std::move(core.left_basis);
    out.op_dim = n;
    out.dim = core.dim;
    out.ip_scale = ip_scale;
    out.stop = core.stop;
    out.final_omega = core.final_omega;
    return out;
}

double biorthogonality_report(const KrylovBasis& basis) {
    Matrix overlap = basis.left_basis.adjoint() * basis.right_basis;
    overlap -= Matrix::Identity(basis.dim, basis.dim);
    return overlap.cwiseAbs().maxCoeff();
}

double biorthogonality_report(const OperatorKrylovBasis& basis) {
    Matrix overlap = basis.ip_scale * (basis.left_ops.adjoint() * basis.right_ops);
    overlap -= Matrix::Identity(basis.dim, basis.dim);
    return overlap.cwiseAbs().maxCoeff();
}

namespace {

std::uint64_t fnv1a(const void* data, std::size_t bytes, std::uint64_t hash) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < bytes; ++i) {
        hash ^= p[i];
        hash *= 0x100000001b3ull;
    }
    return hash;
}

constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ull;
constexpr char kCacheMagic[8] = {'K', 'B', 'A', 'S', 'I', 'S', '0', '1'};

template <typename Scalar>
void write_raw(std::ostream& os, const Scalar* data, std::size_t count) {
    os.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(count * sizeof(Scalar)));
}

template <typename Scalar>
void read_raw(std::istream& is, Scalar* data, std::size_t count) {
    is.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(count * sizeof(Scalar)));
    if (!is) throw std::runtime_error("load_basis: truncated file");
}

} // namespace

std::uint64_t basis_cache_key(const Matrix& h, const Vector& psi0, double tol) {
    std::uint64_t hash = kFnvOffset;
    const std::int64_t n = h.rows();
    hash = fnv1a(&n, sizeof(n), hash);
    hash = fnv1a(h.data(), sizeof(cplx) * static_cast<std::size_t>(h.size()), hash);
    hash = fnv1a(psi0.data(), sizeof(cplx) * static_cast<std::size_t>(psi0.size()), hash);
    hash = fnv1a(&tol, sizeof(tol), hash);
    return hash;
}

void save_basis(const KrylovBasis& basis, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("save_basis: cannot open " + path);
    os.write(kCacheMagic, sizeof(kCacheMagic));
    const std::int64_t n = basis.right_basis.rows();
    const std::int64_t k = basis.dim;
    const std::int32_t stop = static_cast<std::int32_t>(basis.stop);
    write_raw(os, &n, 1);
    write_raw(os, &k, 1);
    write_raw(os, &stop, 1);
    write_raw(os, &basis.final_omega, 1);
    write_raw(os, basis.a.data(), static_cast<std::size_t>(k));
    write_raw(os, basis.b.data(), static_cast<std::size_t>(k));
    write_raw(os, basis.c.data(), static_cast<std::size_t>(k));
    write_raw(os, basis.right_basis.data(), static_cast<std::size_t>(n * k));
    write_raw(os, basis.left_basis.data(), static_cast<std::size_t>(n * k));
    if (!os) throw std::runtime_error("save_basis: write failed for " + path);
}

KrylovBasis load_basis(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("load_basis: cannot open " + path);
    char magic[8];
    is.read(magic, sizeof(magic));
    if (!is || std::memcmp(magic, kCacheMagic, sizeof(magic)) != 0) {
        throw std::runtime_error("load_basis: bad magic in " + path);
    }
    std::int64_t n = 0, k = 0;
    std::int32_t stop = 0;
    KrylovBasis basis;
    read_raw(is, &n, 1);
    read_raw(is, &k, 1);
    read_raw(is, &stop, 1);
    read_raw(is, &basis.final_omega, 1);
    if (n <= 0 || k <= 0 || k > n) throw std::runtime_error("load_basis: corrupt header");
    basis.a.resize(k);
    basis.b.resize(k);
    basis.c.resize(k);
    basis.right_basis.resize(n, k);
    basis.left_basis.resize(n, k);
    read_raw(is, basis.a.data(), static_cast<std::size_t>(k));
    read_raw(is, basis.b.data(), static_cast<std::size_t>(k));
    read_raw(is, basis.c.data(), static_cast<std::size_t>(k));
    read_raw(is, basis.right_basis.data(), static_cast<std::size_t>(n * k));
    read_raw(is, basis.left_basis.data(), static_cast<std::size_t>(n * k));
    basis.dim = static_cast<int>(k);
    basis.stop = static_cast<LanczosStop>(stop);
    return basis;
}

} // namespace kssh
