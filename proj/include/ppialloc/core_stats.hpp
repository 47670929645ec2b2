#pragma once

#include "errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>

namespace ppialloc {

// Running sums for paired (human y, model s) samples. Sums are kept about a
// shift (the first observation) so that large constant offsets do not cancel.
class PairedStats {
public:
    PairedStats() = default;

    void update(double y, double s)
    {
        if (!std::isfinite(y) || !std::isfinite(s))
            throw input_error("PairedStats::update: non-finite observation");
        if (n_ == 0) {
            shift_y_ = y;
            shift_s_ = s;
            min_s_ = max_s_ = s;
        }
        const double dy = y - shift_y_;
        const double ds = s - shift_s_;
        ++n_;
        sy_ += dy;
        ss_ += ds;
        syy_ += dy * dy;
        sss_ += ds * ds;
        sys_ += dy * ds;
        min_s_ = std::min(min_s_, s);
        max_s_ = std::max(max_s_, s);
    }

    void merge(const PairedStats& o)
    {
        if (o.n_ == 0)
            return;
        if (n_ == 0) {
            *this = o;
            return;
        }
        // move o's sums onto our shift
        const double m = static_cast<double>(o.n_);
        const double ay = o.shift_y_ - shift_y_;
        const double as = o.shift_s_ - shift_s_;
        syy_ += o.syy_ + 2.0 * ay * o.sy_ + m * ay * ay;
        sss_ += o.sss_ + 2.0 * as * o.ss_ + m * as * as;
        sys_ += o.sys_ + ay * o.ss_ + as * o.sy_ + m * ay * as;
        sy_ += o.sy_ + m * ay;
        ss_ += o.ss_ + m * as;
        n_ += o.n_;
        min_s_ = std::min(min_s_, o.min_s_);
        max_s_ = std::max(max_s_, o.max_s_);
    }

    [[nodiscard]] std::size_t n() const noexcept { return n_; }

    // raw (unshifted) power sums
    [[nodiscard]] double sum_y() const noexcept { return sy_ + dn() * shift_y_; }
    [[nodiscard]] double sum_s() const noexcept { return ss_ + dn() * shift_s_; }
    [[nodiscard]] double sum_yy() const noexcept
    {
        return syy_ + 2.0 * shift_y_ * sy_ + dn() * shift_y_ * shift_y_;
    }
    [[nodiscard]] double sum_ss() const noexcept
    {
        return sss_ + 2.0 * shift_s_ * ss_ + dn() * shift_s_ * shift_s_;
    }
    [[nodiscard]] double sum_ys() const noexcept
    {
        return sys_ + shift_y_ * ss_ + shift_s_ * sy_ + dn() * shift_y_ * shift_s_;
    }

    [[nodiscard]] double mean_y() const
    {
        require(1);
        return shift_y_ + sy_ / dn();
    }
    [[nodiscard]] double mean_s() const
    {
        require(1);
        return shift_s_ + ss_ / dn();
    }
    [[nodiscard]] double range_s() const noexcept { return n_ ? max_s_ - min_s_ : 0.0; }

    [[nodiscard]] double sample_variance_y() const
    {
        require(2);
        return std::max(0.0, (syy_ - sy_ * sy_ / dn()) / (dn() - 1.0));
    }
    [[nodiscard]] double sample_variance_s() const
    {
        require(2);
        return std::max(0.0, (sss_ - ss_ * ss_ / dn()) / (dn() - 1.0));
    }
    [[nodiscard]] double sample_cov() const
    {
        require(2);
        return (sys_ - sy_ * ss_ / dn()) / (dn() - 1.0);
    }

    // Unbiased variance of y - lambda*s from the moment identity.
    [[nodiscard]] double tuned_residual_variance(double lambda) const
    {
        require(2);
        if (!(lambda >= 0.0 && lambda <= 1.0))
            throw input_error("tuned_residual_variance: lambda outside [0,1]");
        const double ry = sy_ - lambda * ss_;
        const double rr = syy_ - 2.0 * lambda * sys_ + lambda * lambda * sss_;
        return std::max(0.0, (rr - ry * ry / dn()) / (dn() - 1.0));
    }

private:
    [[nodiscard]] double dn() const noexcept { return static_cast<double>(n_); }
    void require(std::size_t k) const
    {
        if (n_ < k)
            throw undefined_statistic("PairedStats: need at least " + std::to_string(k) +
                                      " pairs, have " + std::to_string(n_));
    }

    std::size_t n_ = 0;
    double shift_y_ = 0.0, shift_s_ = 0.0;
    double sy_ = 0.0, ss_ = 0.0, syy_ = 0.0, sss_ = 0.0, sys_ = 0.0;
    double min_s_ = 0.0, max_s_ = 0.0;
};

[[nodiscard]] inline PairedStats update(PairedStats st, double y, double s)
{
    st.update(y, s);
    return st;
}

[[nodiscard]] inline PairedStats merged(PairedStats a, const PairedStats& b)
{
    a.merge(b);
    return a;
}

} // namespace ppialloc
