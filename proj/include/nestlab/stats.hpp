#pragma once

#include <optional>
#include <string>
#include <vector>

#include "nestlab/exec.hpp"
#include "nestlab/nest.hpp"

namespace nestlab::stats {

/// Thrown when the critical orbit returns to 0 (to 1e3 eps): Df^k(f(0)) vanishes.
class CriticalOrbitPeriodicError : public Error {
  public:
    CriticalOrbitPeriodicError(int first_zero, const std::string& what)
        : Error(ErrorCode::CriticalOrbitPeriodic, what), first_zero_(first_zero) {}
    [[nodiscard]] int first_zero() const noexcept { return first_zero_; }

  private:
    int first_zero_;
};

/// Index of the first k >= 1 with |f^k(0)| within 1e3 eps B of 0, or nullopt.
std::optional<int> first_return_to_zero(const maps::MapInstance& m, int N);

// ---------------------------------------------------------------------------
// Critical orbit statistics

struct CESeries {
    std::vector<double> a; ///< a[k-1] = ln|Df^k(f(0))| / k, k = 1..N
    std::vector<std::optional<double>> e; ///< per nest level: a at v_n - 1
    double liminf_estimate = 0.0;
    int tail_start = 0;
    std::optional<int> first_zero;

    [[nodiscard]] double at(int k) const { return a.at(static_cast<std::size_t>(k - 1)); }
};

/// liminf is estimated as the minimum of a_k over k in [tail_fraction N, N].
CESeries ce_series(const maps::MapInstance& m, int N, const std::vector<nest::NestLevel>* levels = nullptr,
                   double tail_fraction = 0.5);

struct RecurrenceRecord {
    std::vector<std::pair<int, double>> closest_returns; ///< (k, |f^k(0)|), distances decreasing
    double fitted_exponent = 0.0;
    int fit_points = 0;
    bool non_recurrent = false;
    bool periodic = false; ///< the orbit hits 0
};

RecurrenceRecord recurrence_exponent(const maps::MapInstance& m, int N);

struct WRRow {
    double delta;
    double value;
    int returns;
};

/// (1/N) sum over k <= N with |f^k(0)| < delta of ln|Df(f^k(0))|.
std::vector<WRRow> wr_statistic(const maps::MapInstance& m, int N, const std::vector<double>& deltas);

// ---------------------------------------------------------------------------
// Backward critical orbit

struct BCEDepth {
    int n;
    double min_exponent; ///< min over f^n(x) = 0 of ln|Df^n(x)| / n
    double argmin;
    long preimages;
};

std::vector<BCEDepth> bce_min_exponent(const maps::MapInstance& m, int depth, Exec exec = Exec::Parallel);

// ---------------------------------------------------------------------------
// Branch statistics

struct BranchHyperbolicity {
    double lambda;  ///< inf of ln|DR_n| / r_n(j) over the branch
    double argmin;
};

BranchHyperbolicity branch_hyperbolicity(const maps::MapInstance& m, const nest::NestLevel& level, int j,
                                         int grid = 256);

/// inf over all enumerated branches of the level.
double level_hyperbolicity(const maps::MapInstance& m, const nest::NestLevel& level, int grid = 64);

struct Distortion {
    double value; ///< sup |D phi| / inf |D phi|
    double log_sup;
    double log_inf;
    nest::Interval domain;
    int time;
};

/// Distortion of R_n^d on its domain, for a word of branch indices (empty word = identity).
Distortion distortion(const maps::MapInstance& m, const nest::NestLevel& level, const std::vector<int>& word,
                      int grid = 256);

struct OutsideHyperbolicity {
    double C_est;
    double lambda_est;
    long windows;
};

/// Orbit windows of grid points that stay outside (-eps, eps); lambda from windows
/// of length >= min_window, C from all windows.
OutsideHyperbolicity hyperbolicity_outside(const maps::MapInstance& m, double eps, int N, int grid,
                                           int min_window = 10, Exec exec = Exec::Parallel);

// ---------------------------------------------------------------------------
// Quasisymmetric capacity

/// Power maps h(x) = sign(x - c)|x - c|^s rescaled to fix I, with |ln s| <= ln gamma.
double capacity_lower_bound(const std::vector<nest::Interval>& X, nest::Interval I, double gamma,
                            int family_size = 64);

// ---------------------------------------------------------------------------
// Classifier constants and branch taxonomy

struct ClassifierConstants {
    double gamma = 2.0;
    double b = 8.0;
    double b_tilde = 2.0;
    double a = 1.0 / 8.0;
    double a_tilde = 1.0 / 2.0;
    std::optional<int> n0; ///< default: first level with c_n < 0.1
    double sparse_factor = 6.0;   ///< leading coefficient of the sparse-count bounds
    double sparse_base = 2.0;     ///< ... times sparse_base^n

    void validate() const;
    [[nodiscard]] double sparse(int n) const;
};

enum class Landing { Standard, Fast, Excellent, Cool, None };
enum class Return { VeryGood, Bad, Good, Neither };

std::string to_string(Landing l);
std::string to_string(Return r);

struct WordLabel {
    std::vector<int> word;
    int level = 0;
    Landing label = Landing::None;
    bool standard = false;
    bool fast = false;
    bool excellent = false;
    bool cool = false;
    std::vector<std::string> failed; ///< clause witnesses, e.g. "LS1"
};

struct BranchLabel {
    int level = 0;
    int j = 0;
    double lambda = 0.0; ///< lambda_n(j)
    Return label = Return::Neither;
    bool very_good = false;
    bool bad = false;
    bool good = false;
    std::vector<std::string> failed;
};

struct BranchTaxonomy {
    int n0 = 0;
    double lambda_n0 = 0.0;
    std::vector<WordLabel> words;
    std::vector<BranchLabel> branches;
};

/// Words are (level, word) pairs. Branch labels are produced for every
/// enumerated branch of levels n0..last.
BranchTaxonomy classify_branches(const maps::MapInstance& m, const nest::Nest& nest,
                                 const std::vector<std::pair<int, std::vector<int>>>& words,
                                 const ClassifierConstants& consts);

// ---------------------------------------------------------------------------
// Distribution of landing words and return times

struct TailRow {
    double k;
    double at_most;     ///< fraction of sample values <= k
    double at_least;    ///< fraction of sample values >= k
    double lower_bound; ///< k c_n^a_tilde
    double upper_bound; ///< exp(-k c_n^b_tilde)
};

struct DistributionDiagnostics {
    int level = 0;
    bool critical_returns = true; ///< false: no central interval, tables empty
    int sample = 0;
    int landed = 0;      ///< sample points with a complete landing word
    int already_in = 0;  ///< |d| = 0
    int truncated = 0;
    std::vector<int> word_lengths;
    std::vector<int> return_times; ///< r_n(x) for points in enumerated branches or the central one
    double median_word_length = 0.0;
    double c = 0.0;
    std::vector<TailRow> word_tail;
    std::vector<TailRow> return_tail;
    bool word_tail_consistent = false;
    bool return_tail_consistent = false;
};

DistributionDiagnostics distribution_diagnostics(const maps::MapInstance& m, const nest::NestLevel& level,
                                                 int sample, const ClassifierConstants& consts = {});

} // namespace nestlab::stats
