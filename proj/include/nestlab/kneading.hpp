#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "nestlab/maps.hpp"
#include "nestlab/nest.hpp"

namespace nestlab::kneading {

enum class Symbol : char { L = 'L', C = 'C', R = 'R' };

/// Itinerary of f(0), f^2(0), ... relative to the critical point.
struct KneadingSequence {
    std::vector<Symbol> symbols; ///< [i] is the symbol of f^{i+1}(0)
    int depth = 0;               ///< requested length
    bool truncated = false;      ///< ended at a C symbol
    /// (start, period) over indices into symbols.
    std::optional<std::pair<int, int>> periodic_suffix;

    [[nodiscard]] std::string str() const;
};

/// Symbols within sym_scale * eps * half_width of 0 are C. sym_scale = 0
/// gives C only on an exact hit.
KneadingSequence kneading_sequence(const maps::MapInstance& m, int depth,
                                   double sym_scale = 1e3);

struct Comparison {
    int order = 0;        ///< -1, 0, +1 in the signed lexicographic order
    int position = 0;     ///< 1-based iterate of the first difference, 0 if none
    bool both_c = false;  ///< prefixes agree up to a common C
};

/// Milnor-Thurston order: L < C < R, reversed after an odd number of R's.
Comparison compare(const KneadingSequence& a, const KneadingSequence& b);

struct RegularTolerances {
    double cycle_tol = 1e-10;
    double mult_tol = 1e-6;
};

struct RegularReport {
    int period = 0;
    double multiplier = 0.0;
    std::vector<double> orbit;  ///< attracting cycle, starting at the point nearest 0
    long basin_witness = -1;    ///< first k with f^k(0) in a verified trapping neighborhood
    double trap_radius = 0.0;
    bool borderline = false;    ///< within 10x of a tolerance boundary
};

/// Attracting cycle of the critical orbit. Throws NeutralSuspected when the
/// multiplier is within mult_tol of modulus 1.
std::optional<RegularReport> detect_regular(const maps::MapInstance& m, long max_iter = 100000,
                                            int max_period = 1000, RegularTolerances tol = {});

struct Renormalization {
    int period = 1;                    ///< first renormalization period
    std::vector<int> tower;            ///< absolute periods of the nested periodic intervals
    std::vector<int> relative_periods; ///< period of each return map inside the previous one
    nest::SymInterval interval;        ///< deepest periodic interval found
    bool max_period_exceeded = false;
};

std::optional<Renormalization> detect_renormalization(const maps::MapInstance& m,
                                                      int max_period = 64);

struct Conjugacy {
    bool agree = false;
    int disagree_at = 0; ///< 1-based iterate, 0 when agree
    int depth = 0;
};

/// Kneading prefixes of f and g up to depth. A C against L or R is a
/// disagreement; a common C throws TruncatedByC.
Conjugacy conjugacy_check(const maps::MapInstance& f, const maps::MapInstance& g, int depth);

struct Straightening {
    double a = 0.0;             ///< raw quadratic parameter
    int agreement_depth = 0;    ///< common kneading prefix with q_a, capped at depth
    double bracket_width = 0.0;
    bool truncated_by_c = false;     ///< f is superattracting: a is the window center
    bool multiplier_refined = false; ///< a matched to the multiplier of f's attractor
    std::optional<int> period;       ///< attracting period of f when regular
    std::optional<double> multiplier;
};

/// Quadratic representative of f by kneading bisection on a in [-1/4, 2],
/// followed by multiplier matching inside hyperbolic windows.
Straightening straighten(const maps::MapInstance& f, int depth = 60, double tol = 1e-10);

/// Multiplier of the minimal period-p cycle of q_a found from the critical
/// orbit; +inf when there is none (the cycle is not yet born).
double quadratic_cycle_multiplier(double a, int period);

} // namespace nestlab::kneading
