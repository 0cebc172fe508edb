#pragma once

#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

namespace ratweyl {

using cplx = std::complex<double>;

inline constexpr cplx iu{0.0, 1.0};

// Bad inputs, configs, or contract violations detectable before any numerics run.
struct validation_error : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// A numerical quality gate failed (residual too large, horizon too short, ...).
struct numeric_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A linear system or principal block was too ill-conditioned to trust.
struct conditioning_error : numeric_error {
    using numeric_error::numeric_error;
};

// Rational structure of the system: poles d_k (real, pairwise distinct) with
// signs b_k = ±1.
struct PoleSet {
    std::vector<double> d;
    std::vector<int> b;

    PoleSet() = default;
    PoleSet(std::vector<double> d_, std::vector<int> b_) : d(std::move(d_)), b(std::move(b_)) {
        validate();
    }

    int size() const { return static_cast<int>(d.size()); }

    void validate() const {
        if (d.empty() || d.size() != b.size())
            throw validation_error("PoleSet: d and b must be nonempty and of equal length");
        for (int s : b)
            if (s != 1 && s != -1) throw validation_error("PoleSet: every b_k must be +1 or -1");
        for (size_t k = 0; k < d.size(); ++k)
            for (size_t p = k + 1; p < d.size(); ++p)
                if (d[k] == d[p]) throw validation_error("PoleSet: pole locations must be pairwise distinct");
    }

    double min_gap() const {
        double g = std::numeric_limits<double>::infinity();
        for (size_t k = 0; k < d.size(); ++k)
            for (size_t p = k + 1; p < d.size(); ++p)
                g = std::min(g, std::abs(d[k] - d[p]));
        return g;
    }
};

// Uniform grid on [0, l] with n subintervals.
struct GridSpec {
    double l = 1.0;
    int n = 2;

    GridSpec() = default;
    GridSpec(double l_, int n_) : l(l_), n(n_) {
        if (!(l > 0.0)) throw validation_error("GridSpec: l must be positive");
        if (n < 2) throw validation_error("GridSpec: n must be at least 2");
    }

    double step() const { return l / n; }
    int nodes() const { return n + 1; }
    double x(int i) const { return l * i / n; }
};

}  // namespace ratweyl
