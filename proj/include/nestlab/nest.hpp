#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "nestlab/maps.hpp"
#include "nestlab/numerics.hpp"

namespace nestlab::nest {

/// Symmetric interval [-half_width, half_width].
struct SymInterval {
    double half_width = 0.0;
    [[nodiscard]] double length() const noexcept { return 2.0 * half_width; }
    [[nodiscard]] bool contains(double x) const noexcept { return std::abs(x) <= half_width; }
};

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
    [[nodiscard]] double length() const noexcept { return hi - lo; }
    [[nodiscard]] bool contains(double x) const noexcept { return lo <= x && x <= hi; }
};

struct RestrictiveInterval {
    SymInterval interval;
    int period = 1;
    /// Periods of every certified periodic interval found, smallest interval last.
    std::vector<int> tower;
    /// Deeper renormalization may exist beyond max_period.
    bool max_period_exceeded = false;
};

RestrictiveInterval restrictive_interval(const maps::MapInstance& m, int max_period = 64);

/// I_1 = [-p, p] for the orientation-reversing fixed point of f^period in T.
SymInterval first_nest_interval(const maps::MapInstance& m, SymInterval T, int period);

struct Branch {
    int j = 0;
    Interval interval;
    int return_time = 0; ///< in iterates of f
    int orientation = 0; ///< sign of D f^r on the branch
    numerics::LogProduct log_derivative_lo;
    numerics::LogProduct log_derivative_hi;
};

enum class Reliability { Reliable, Unreliable };
enum class LevelStatus { Ok, CriticalNonReturning, BudgetExhausted };

std::string to_string(Reliability r);
std::string to_string(LevelStatus s);

struct NestLimits {
    int max_return_time = 20000;        ///< in iterates of f
    double min_branch_fraction = 1e-6;  ///< branches shorter than this * |I_n| are skipped
    int max_branches = 200000;
    int max_landing_steps = 10000;

    bool operator==(const NestLimits&) const = default;
};

struct NestLevel {
    int n = 1;
    /// Iterate of f that plays the role of the map (renormalization period).
    int period = 1;
    SymInterval interval;
    /// Boundary orbit of p_n under f^period, values snapped to the lower levels.
    std::vector<double> boundary_orbit;

    std::vector<Branch> branches; ///< sorted by j
    bool branches_enumerated = false;
    bool branches_truncated = false;

    std::optional<SymInterval> central_interval; ///< I_{n+1}
    std::optional<int> v;                        ///< return time of 0, iterates of f
    int central_image_sign = 0; ///< R_n(p_{n+1}) = central_image_sign * p_n
    std::optional<int> tau;
    std::optional<int> s;
    std::optional<double> c;
    std::optional<Interval> tilde_interval;
    std::vector<int> landing_word; ///< indices of R_n(0) until it lands (when indexed)
    std::vector<Branch> landing_branches; ///< branches visited by R_n(0) before landing
    std::optional<int> landing_time;
    /// Return time of R_n(0) to I_n (iterates of f), non-central levels only.
    std::optional<int> critical_return_time;
    bool central = false; ///< R_n(0) in I_{n+1}
    Reliability reliability = Reliability::Reliable;
    LevelStatus status = LevelStatus::Ok;

    [[nodiscard]] const Branch* find_branch(int j) const;
    /// Branch containing x, or nullptr.
    [[nodiscard]] const Branch* branch_at(double x) const;
};

struct LandingWord {
    std::vector<int> word;
    Interval landing_domain;
    int landing_time = 0;
    bool truncated = false; ///< orbit fell in a branch outside the table
};

enum class NestMode { Full, CriticalOnly };

struct NestOptions {
    int max_levels = 4;
    int max_period = 64;
    NestMode mode = NestMode::Full;
    bool compute_tilde = true;
    NestLimits limits;
};

enum class NestStatus { Ok, CriticalNonReturning, BudgetExhausted, Unreliable, NoFixedPoint };
std::string to_string(NestStatus s);

struct Nest {
    RestrictiveInterval restrictive;
    std::vector<NestLevel> levels;
    NestStatus status = NestStatus::Ok;
    std::string detail;
};

/// Level with interval and boundary orbit set, nothing else computed.
NestLevel make_first_level(const maps::MapInstance& m, SymInterval I1, int period,
                           const NestLimits& limits);

/// Fills the branch table of a level (non-central branches of both sides) and
/// its central data (v, central interval) when 0 returns within budget.
void decompose_return_branches(const maps::MapInstance& m, NestLevel& level,
                               const NestLimits& limits);

/// Central data only: v_n and I_{n+1}, without enumerating other branches.
void locate_central_branch(const maps::MapInstance& m, NestLevel& level, const NestLimits& limits);

/// Appends level n+1 when the last level has a central branch. Returns false
/// when the nest cannot grow (status recorded on the last level).
bool extend_nest(const maps::MapInstance& m, std::vector<NestLevel>& levels,
                 const NestLimits& limits, NestMode mode = NestMode::Full,
                 bool compute_tilde = true);

/// Traces the first-return branch of `level` containing x (not the central one).
/// Returns nullopt for x in the central branch or when no return within budget.
std::optional<Branch> trace_branch(const maps::MapInstance& m, const NestLevel& level, double x,
                                   const NestLimits& limits);

/// with_domain = false skips the pull-back of the landing domain.
LandingWord landing_word(const maps::MapInstance& m, const NestLevel& level, double x,
                         int max_steps, bool with_domain = true);

/// Pulls target (a subinterval of [-p, p]) back through a word of branches.
Interval pull_back(const maps::MapInstance& m, const std::vector<Branch>& word, double p,
                   Interval target);

/// restrictive interval, I_1 and up to max_levels levels.
Nest build_nest(const maps::MapInstance& m, const NestOptions& opt = {});

/// Tolerance for f^r(x) hitting a target: 1e3 eps B times the largest
/// amplification of a rounding error made along the orbit.
double branch_tol(const maps::MapInstance& m, double x, int r);

/// Endpoints of b map onto the boundary of I_n within branch_tol.
bool maps_onto(const maps::MapInstance& m, const NestLevel& level, const Branch& b);

/// f^k(x) by direct iteration.
double iterate(const maps::MapInstance& m, double x, long k);

/// ln|D f^k(x)| with sign.
numerics::LogProduct log_derivative(const maps::MapInstance& m, double x, long k);

} // namespace nestlab::nest
