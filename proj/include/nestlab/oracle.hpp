#pragma once

#include <vector>

#include "nestlab/exec.hpp"
#include "nestlab/nest.hpp"

namespace nestlab::oracle {

/// First return of each grid point of (0, p_n] to I_n, by brute force.
struct GridReturns {
    std::vector<double> x;
    std::vector<int> time;               ///< in iterates of f; 0 = no return within the cap
    std::vector<signed char> orientation;
};

GridReturns first_return_grid(const maps::MapInstance& m, const nest::NestLevel& level, int points,
                              int max_return_time, Exec exec = Exec::Parallel);

struct GridBranch {
    double lo;
    double hi;
    int return_time;
    int orientation;
    bool central;
};

/// Runs of equal (return time, orientation) on the grid, boundaries refined
/// by bisection on the predicate "first return time == r". Runs spanning
/// less than min_length keep grid-midpoint boundaries.
std::vector<GridBranch> grid_branches(const maps::MapInstance& m, const nest::NestLevel& level,
                                      int points, int max_return_time, Exec exec = Exec::Parallel,
                                      double min_length = 0.0);

} // namespace nestlab::oracle
