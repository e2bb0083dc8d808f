#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdlib>
#include <functional>
#include <numbers>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace halledge {

using cplx = std::complex<double>;
using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;
using RMat = Eigen::MatrixXd;
using RVec = Eigen::VectorXd;

inline constexpr double pi = std::numbers::pi;
inline constexpr double two_pi = 2.0 * std::numbers::pi;
inline constexpr cplx I{0.0, 1.0};

// Error kinds map onto CLI exit codes: usage/config errors are user mistakes,
// numeric ones are failures of a computation or of an acceptance contract.
enum class ErrorKind { validation, config, numeric, convergence };

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const { return kind_; }

private:
    ErrorKind kind_;
};

inline void require(bool cond, ErrorKind kind, const std::string& msg)
{
    if (!cond) throw Error(kind, msg);
}

// Thread count: HALLEDGE_THREADS environment variable, overridable by callers.
inline int default_threads()
{
    if (const char* env = std::getenv("HALLEDGE_THREADS")) {
        int n = std::atoi(env);
        if (n > 0) return n;
    }
    return 1;
}

inline int& thread_count()
{
    static int n = default_threads();
    return n;
}

// Evaluates f(i) for i in [0,n) on up to thread_count() threads. Results are
// stored by index, so any later reduction in index order is bit-stable.
template <class T, class F>
std::vector<T> parallel_map(std::size_t n, F&& f)
{
    std::vector<T> out(n);
    const std::size_t nt = std::min<std::size_t>(std::max(1, thread_count()), n);
    if (nt <= 1) {
        for (std::size_t i = 0; i < n; ++i) out[i] = f(i);
        return out;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(nt);
    for (std::size_t t = 0; t < nt; ++t) {
        pool.emplace_back([&, t] {
            try {
                for (std::size_t i = t; i < n; i += nt) out[i] = f(i);
            } catch (...) {
                errors[t] = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    return out;
}

inline double wrap_2pi(double k)
{
    double r = std::fmod(k, two_pi);
    return r < 0 ? r + two_pi : r;
}

// Signed distance on the circle, in (-pi, pi].
inline double circle_diff(double a, double b)
{
    double d = std::remainder(a - b, two_pi);
    return d;
}

inline int sgn(double x) { return (x > 0) - (x < 0); }

inline double max_abs(const CMat& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }

// Gauss-Legendre nodes/weights on [-1,1] via Golub-Welsch.
inline void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w)
{
    RMat J = RMat::Zero(n, n);
    for (int k = 1; k < n; ++k) {
        double b = k / std::sqrt(4.0 * k * k - 1.0);
        J(k, k - 1) = J(k - 1, k) = b;
    }
    Eigen::SelfAdjointEigenSolver<RMat> es(J);
    x.resize(n);
    w.resize(n);
    for (int i = 0; i < n; ++i) {
        x[i] = es.eigenvalues()(i);
        w[i] = 2.0 * es.eigenvectors()(0, i) * es.eigenvectors()(0, i);
    }
}

// Gauss-Hermite nodes/weights for weight exp(-x^2) via Golub-Welsch.
inline void gauss_hermite(int n, std::vector<double>& x, std::vector<double>& w)
{
    RMat J = RMat::Zero(n, n);
    for (int k = 1; k < n; ++k) J(k, k - 1) = J(k - 1, k) = std::sqrt(k / 2.0);
    Eigen::SelfAdjointEigenSolver<RMat> es(J);
    x.resize(n);
    w.resize(n);
    for (int i = 0; i < n; ++i) {
        x[i] = es.eigenvalues()(i);
        w[i] = std::sqrt(pi) * es.eigenvectors()(0, i) * es.eigenvectors()(0, i);
    }
}

// Least-squares line y = a + b x; returns {a, b, r2}.
struct LineFit {
    double intercept = 0, slope = 0, r2 = 0;
};

inline LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y)
{
    const std::size_t n = x.size();
    double sx = 0, sy = 0;
    for (std::size_t i = 0; i < n; ++i) sx += x[i], sy += y[i];
    const double mx = sx / n, my = sy / n;
    double sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    LineFit f;
    f.slope = sxx > 0 ? sxy / sxx : 0.0;
    f.intercept = my - f.slope * mx;
    f.r2 = (sxx > 0 && syy > 0) ? (sxy * sxy) / (sxx * syy) : 1.0;
    return f;
}

} // namespace halledge
