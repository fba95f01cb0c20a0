#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "jumpopt/distribution.hpp"
#include "jumpopt/errors.hpp"
#include "jumpopt/format.hpp"
#include "jumpopt/rng.hpp"

namespace jumpopt {

/// Two-state intensity matrix Q = [[-l0, l0], [l1, -l1]].
struct GeneratorMatrix {
    double lambda0 = 0.0;
    double lambda1 = 0.0;

    double rate(int state) const noexcept { return state == 0 ? lambda0 : lambda1; }
    double lambda_bar() const noexcept { return 0.5 * (lambda0 + lambda1); }

    void validate() const {
        if (!(lambda0 >= 0.0) || !(lambda1 >= 0.0) || !std::isfinite(lambda0) || !std::isfinite(lambda1))
            throw InvalidModel("generator intensities must be finite and >= 0, got lambda0=" +
                               format_double(lambda0) + " lambda1=" + format_double(lambda1));
    }

    friend bool operator==(const GeneratorMatrix&, const GeneratorMatrix&) = default;
};

struct RegimePath {
    int initial_state = 0;
    std::vector<double> jump_times;  // strictly increasing, in (0, T]
    double horizon = 0.0;

    std::size_t jump_count() const noexcept { return jump_times.size(); }

    /// State on [tau_n, tau_{n+1}) after n jumps.
    int state_after(std::size_t n) const noexcept { return initial_state ^ static_cast<int>(n & 1u); }

    /// State right before jump n (0-based).
    int state_before(std::size_t n) const noexcept { return state_after(n); }

    /// Right-continuous state at time t.
    int state_at(double t) const noexcept {
        std::size_t n = 0;
        while (n < jump_times.size() && jump_times[n] <= t) ++n;
        return state_after(n);
    }

    friend bool operator==(const RegimePath&, const RegimePath&) = default;
};

struct MarkedPointPath {
    RegimePath regime;
    std::vector<double> marks;  // marks[n] ~ F at regime.state_before(n)

    std::size_t size() const noexcept { return marks.size(); }
    double horizon() const noexcept { return regime.horizon; }

    friend bool operator==(const MarkedPointPath&, const MarkedPointPath&) = default;
};

/// Holding times are drawn from the chain stream of (seed, path_index), one
/// uniform per holding time, so path k never depends on how many paths were
/// drawn before it.
inline RegimePath simulate_regime_chain(const GeneratorMatrix& q, int i0, double T, std::uint64_t seed,
                                        std::uint64_t path_index = 0) {
    q.validate();
    if (!(T > 0.0) || !std::isfinite(T)) throw InvalidModel("horizon must be positive, got " + format_double(T));
    if (i0 != 0 && i0 != 1) throw InvalidModel("initial state must be 0 or 1");
    RegimePath path;
    path.initial_state = i0;
    path.horizon = T;
    CounterRng rng(seed, path_index, Stream::chain);
    double t = 0.0;
    int state = i0;
    for (;;) {
        const double rate = q.rate(state);
        if (rate == 0.0) break;
        t += rng.exponential(rate);
        if (t > T) break;
        path.jump_times.push_back(t);
        state ^= 1;
    }
    return path;
}

inline MarkedPointPath simulate_marks(const RegimePath& path, const std::array<JumpDistribution, 2>& dists,
                                      std::uint64_t seed, std::uint64_t path_index = 0) {
    MarkedPointPath out{path, {}};
    out.marks.reserve(path.jump_count());
    CounterRng rng(seed, path_index, Stream::marks);
    for (std::size_t n = 0; n < path.jump_count(); ++n)
        out.marks.push_back(dists[static_cast<std::size_t>(path.state_before(n))].sample(rng));
    return out;
}

}  // namespace jumpopt
