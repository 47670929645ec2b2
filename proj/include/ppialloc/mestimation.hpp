#pragma once

#include "errors.hpp"
#include "estimators.hpp"
#include "policies.hpp"
#include "rng.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

namespace ppialloc {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct MnlTask {
    Matrix X;         // K x d, one row per alternative
    Vector beta_star; // d
    Vector beta_llm;  // d
    double s_scale = 1.0;
};

// softmax of X beta, shifted by the max utility
[[nodiscard]] inline Vector mnl_probs(const Matrix& X, const Vector& beta)
{
    Vector u = X * beta;
    u.array() -= u.maxCoeff();
    Vector p = u.array().exp();
    return p / p.sum();
}

// gradient of the negative log-likelihood for one choice y (0-based)
[[nodiscard]] inline Vector mnl_score(const Matrix& X, std::size_t y, const Vector& beta)
{
    if (y >= static_cast<std::size_t>(X.rows()))
        throw input_error("mnl_score: chosen alternative out of range");
    const Vector p = mnl_probs(X, beta);
    return X.transpose() * p - X.row(static_cast<Eigen::Index>(y)).transpose();
}

// X' (diag p - p p') X
[[nodiscard]] inline Matrix mnl_hessian(const Matrix& X, const Vector& beta)
{
    const Vector p = mnl_probs(X, beta);
    const Vector m = X.transpose() * p;
    return X.transpose() * p.asDiagonal() * X - m * m.transpose();
}

[[nodiscard]] inline std::size_t draw_choice(const Vector& p, Rng& rng)
{
    const double u = rng.uniform();
    double acc = 0.0;
    for (Eigen::Index k = 0; k < p.size(); ++k) {
        acc += p[k];
        if (u < acc)
            return static_cast<std::size_t>(k);
    }
    return static_cast<std::size_t>(p.size() - 1);
}

enum class Criterion { trace, det };

inline constexpr double max_condition = 1e8;

namespace detail {

inline Matrix guarded_inverse(const Matrix& H)
{
    Eigen::SelfAdjointEigenSolver<Matrix> es(H);
    const double lo = es.eigenvalues().minCoeff();
    const double hi = es.eigenvalues().maxCoeff();
    if (!(lo > 0.0) || hi / lo > max_condition)
        throw domain_error("sandwich: Hessian is singular or badly conditioned");
    return es.eigenvectors() * es.eigenvalues().cwiseInverse().asDiagonal() *
           es.eigenvectors().transpose();
}

inline double scalarize(const Matrix& S, Criterion crit)
{
    if (crit == Criterion::trace)
        return S.trace();
    return std::pow(std::max(S.determinant(), 0.0), 1.0 / static_cast<double>(S.rows()));
}

} // namespace detail

[[nodiscard]] inline double sandwich_from(const Matrix& H, const Matrix& V, Criterion crit)
{
    const Matrix Hi = detail::guarded_inverse(H);
    return detail::scalarize(Hi * V * Hi.transpose(), crit);
}

// Monte Carlo sandwich difficulty with human and model choices drawn
// independently at the true partworths.
[[nodiscard]] inline double sandwich_difficulty(const MnlTask& task, double lambda,
                                                std::size_t mc_samples, Rng& rng,
                                                Criterion crit = Criterion::trace)
{
    if (mc_samples < 1000)
        throw config_error("sandwich_difficulty: need at least 1000 Monte Carlo samples");
    const Matrix H = mnl_hessian(task.X, task.beta_star);
    const Vector ph = mnl_probs(task.X, task.beta_star);
    const Vector pl = mnl_probs(task.X, task.beta_llm);
    const Vector m = task.X.transpose() * ph;
    const auto d = task.X.cols();
    Vector mean = Vector::Zero(d);
    Matrix sq = Matrix::Zero(d, d);
    for (std::size_t i = 0; i < mc_samples; ++i) {
        const auto y = draw_choice(ph, rng);
        const auto l = draw_choice(pl, rng);
        const Vector z = (m - task.X.row(static_cast<Eigen::Index>(y)).transpose()) -
                         lambda * (m - task.X.row(static_cast<Eigen::Index>(l)).transpose());
        mean += z;
        sq += z * z.transpose();
    }
    const double n = static_cast<double>(mc_samples);
    mean /= n;
    const Matrix V = (sq - n * mean * mean.transpose()) / (n - 1.0);
    return sandwich_from(H, V, crit);
}

// Closed form for independent draws: V = H(beta*) + lambda^2 H(beta_llm).
[[nodiscard]] inline double sandwich_difficulty_exact(const MnlTask& task, double lambda,
                                                      Criterion crit = Criterion::trace)
{
    const Matrix H = mnl_hessian(task.X, task.beta_star);
    const Matrix V = H + lambda * lambda * mnl_hessian(task.X, task.beta_llm);
    return sandwich_from(H, V, crit);
}

// K x d design with zero column sums and unit-norm rows: orthonormal
// contrasts rescaled. For K = 3, d = 2 this is an equilateral triangle.
[[nodiscard]] inline Matrix balanced_design(std::size_t K, std::size_t d)
{
    if (K < 2 || d < 1 || d > K - 1)
        throw config_error("balanced_design: need K >= 2 and 1 <= d <= K-1");
    Matrix C(K, K - 1);
    for (std::size_t j = 1; j < K; ++j) {
        const double norm = std::sqrt(static_cast<double>(j * (j + 1)));
        for (std::size_t i = 0; i < K; ++i)
            C(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j - 1)) =
                i < j ? 1.0 / norm : (i == j ? -static_cast<double>(j) / norm : 0.0);
    }
    Matrix X = C.leftCols(static_cast<Eigen::Index>(d));
    return X * std::sqrt(static_cast<double>(K) / static_cast<double>(K - 1));
}

[[nodiscard]] inline Matrix random_rotation(std::size_t d, Rng& rng)
{
    Matrix G(d, d);
    for (Eigen::Index i = 0; i < G.size(); ++i)
        G.data()[i] = rng.normal();
    Eigen::HouseholderQR<Matrix> qr(G);
    Matrix Qm = qr.householderQ() * Matrix::Identity(d, d);
    const Matrix R = qr.matrixQR().triangularView<Eigen::Upper>();
    for (std::size_t j = 0; j < d; ++j)
        if (R(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(j)) < 0.0)
            Qm.col(static_cast<Eigen::Index>(j)) *= -1.0;
    return Qm;
}

struct MnlSpec {
    std::size_t Q = 50;
    std::size_t K = 3;
    std::size_t d = 2;
    double h = 1.0;
    double rho = 0.7;
    double noise_sd = 0.3;
    double lambda = 0.0;
    std::size_t mc_samples = 50000;
    std::uint32_t scale_seed = 42; // legacy stream for the s_q draw
    std::uint64_t task_seed = 1;   // rotations, partworths, Monte Carlo
    double ridge = 1.0;            // penalty in the online plug-in fit
    Criterion criterion = Criterion::trace;

    void validate() const
    {
        if (Q < 1 || K < 2 || d < 1 || d > K - 1)
            throw config_error("mnl: need Q >= 1, K >= 2 and 1 <= d <= K-1");
        if (!(h >= 0.0) || !(noise_sd >= 0.0))
            throw config_error("mnl: h and noise_sd must be nonnegative");
        if (!(lambda >= 0.0 && lambda <= 1.0))
            throw config_error("mnl: lambda must lie in [0,1]");
        if (mc_samples < 1000)
            throw config_error("mnl: mc_samples must be at least 1000");
        if (!(ridge > 0.0))
            throw config_error("mnl: ridge must be positive");
    }
};

[[nodiscard]] inline std::vector<MnlTask> make_mnl_tasks(const MnlSpec& spec)
{
    spec.validate();
    const double k = spec.h < 1e-8 ? 1.0 : spec.h / std::sinh(spec.h);
    const auto u = legacy_uniform(spec.scale_seed, -spec.h, spec.h, spec.Q);
    const Matrix base = balanced_design(spec.K, spec.d);
    Rng rng(spec.task_seed);
    std::vector<MnlTask> tasks(spec.Q);
    for (std::size_t q = 0; q < spec.Q; ++q) {
        auto& t = tasks[q];
        t.s_scale = spec.h == 0.0 ? 1.0 : k * std::exp(u[q]);
        t.X = base * random_rotation(spec.d, rng).transpose() * t.s_scale;
        Vector b(spec.d);
        for (auto& x : b)
            x = rng.normal();
        t.beta_star = b / b.norm();
        Vector e(spec.d);
        for (auto& x : e)
            x = rng.normal();
        t.beta_llm = spec.rho * t.beta_star + spec.noise_sd * e;
    }
    return tasks;
}

// Online state for one task: joint counts of (human, model) choices and a
// warm-started ridge fit of the partworths.
struct MnlTracker {
    const MnlTask* task = nullptr;
    double lambda = 0.0;
    double ridge = 1.0;
    Criterion criterion = Criterion::trace;
    std::vector<std::size_t> joint; // K*K, human-major
    std::vector<std::size_t> human;
    std::size_t n = 0;
    Vector theta;
};

[[nodiscard]] inline std::size_t tracker_count(const MnlTracker& t) { return t.n; }

// Penalized maximum likelihood from the human choice counts (Newton).
inline void refit(MnlTracker& t)
{
    const Matrix& X = t.task->X;
    const auto d = X.cols();
    if (t.theta.size() != d)
        t.theta = Vector::Zero(d);
    Vector cx = Vector::Zero(d);
    for (Eigen::Index k = 0; k < X.rows(); ++k)
        cx += static_cast<double>(t.human[static_cast<std::size_t>(k)]) * X.row(k).transpose();
    const double n = static_cast<double>(t.n);
    for (int it = 0; it < 50; ++it) {
        const Vector p = mnl_probs(X, t.theta);
        const Vector g = cx - n * X.transpose() * p - t.ridge * t.theta;
        const Matrix Hn = n * mnl_hessian(X, t.theta) + t.ridge * Matrix::Identity(d, d);
        const Vector step = Hn.ldlt().solve(g);
        t.theta += step;
        if (step.norm() < 1e-10)
            break;
    }
}

[[nodiscard]] inline double difficulty_estimate(const MnlTracker& t, DifficultyMode)
{
    if (t.n < 2)
        throw undefined_statistic("MnlTracker: need at least 2 observations");
    const Matrix& X = t.task->X;
    const auto K = static_cast<std::size_t>(X.rows());
    const auto d = X.cols();
    // residual scores at theta_hat differ from -X_y + lambda X_l by a constant
    Vector mean = Vector::Zero(d);
    Matrix sq = Matrix::Zero(d, d);
    for (std::size_t j = 0; j < K; ++j)
        for (std::size_t l = 0; l < K; ++l) {
            const auto c = t.joint[j * K + l];
            if (c == 0)
                continue;
            const Vector z = -X.row(static_cast<Eigen::Index>(j)).transpose() +
                             t.lambda * X.row(static_cast<Eigen::Index>(l)).transpose();
            mean += static_cast<double>(c) * z;
            sq += static_cast<double>(c) * z * z.transpose();
        }
    const double n = static_cast<double>(t.n);
    mean /= n;
    const Matrix V = (sq - n * mean * mean.transpose()) / (n - 1.0);
    const Matrix H = mnl_hessian(X, t.theta);
    try {
        // roundoff can leave a degenerate V slightly indefinite
        return std::clamp(sandwich_from(H, V, t.criterion), 0.0, 1e12);
    } catch (const domain_error&) {
        return 1e12;
    }
}

class MnlEnv {
public:
    using tracker_type = MnlTracker;

    explicit MnlEnv(const MnlSpec& spec) : spec_(spec), tasks_(make_mnl_tasks(spec))
    {
        a_.resize(tasks_.size());
        for (std::size_t q = 0; q < tasks_.size(); ++q) {
            Rng rng(derive_seed(spec_.task_seed, 0x6d6e6c, q, 0));
            a_[q] = sandwich_difficulty(tasks_[q], spec_.lambda, spec_.mc_samples, rng,
                                        spec_.criterion);
        }
        ph_.reserve(tasks_.size());
        pl_.reserve(tasks_.size());
        for (const auto& t : tasks_) {
            ph_.push_back(mnl_probs(t.X, t.beta_star));
            pl_.push_back(mnl_probs(t.X, t.beta_llm));
        }
    }

    [[nodiscard]] std::size_t size() const { return tasks_.size(); }
    [[nodiscard]] const std::vector<double>& difficulty() const { return a_; }
    [[nodiscard]] const std::vector<MnlTask>& tasks() const { return tasks_; }
    [[nodiscard]] const MnlSpec& spec() const { return spec_; }

    void observe(std::size_t q, Rng& rng, MnlTracker& t) const
    {
        const std::size_t K = spec_.K;
        if (!t.task) {
            t.task = &tasks_[q];
            t.lambda = spec_.lambda;
            t.ridge = spec_.ridge;
            t.criterion = spec_.criterion;
            t.joint.assign(K * K, 0);
            t.human.assign(K, 0);
        }
        const auto y = draw_choice(ph_[q], rng);
        const auto l = draw_choice(pl_[q], rng);
        ++t.joint[y * K + l];
        ++t.human[y];
        ++t.n;
        refit(t);
    }

private:
    MnlSpec spec_;
    std::vector<MnlTask> tasks_;
    std::vector<double> a_;
    std::vector<Vector> ph_, pl_;
};

} // namespace ppialloc
