#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "nestlab/config.hpp"
#include "nestlab/exec.hpp"
#include "nestlab/kneading.hpp"
#include "nestlab/nest.hpp"

namespace nestlab::scan {

inline constexpr int kSchemaVersion = 1;

struct Budgets {
    long max_iter = 100000;      ///< critical orbit length for regular detection
    int max_period = 1000;       ///< longest attracting cycle searched
    double cycle_tol = 1e-10;
    double mult_tol = 1e-6;
    int renorm_max_period = 64;
    int renorm_depth = 4;        ///< this many nested renormalizations count as Renormalizable
    int nest_levels = 6;
    int ce_N = 2000;
    double tail_fraction = 0.5;
    double ce_threshold = 0.05;
    int recurrence_N = 100000;
    int wr_N = 100000;
    std::vector<double> wr_deltas{0.1, 0.01};
    int bce_depth = 10;
    int bits = 53;
    nest::NestLimits limits;

    /// Every key with its current value, in the config file schema.
    [[nodiscard]] config::KeyValues to_key_values() const;
    /// Overrides from a config; unknown keys throw ParseError.
    void apply(const config::KeyValues& kv);
    void validate() const;
    bool operator==(const Budgets&) const = default;
};

enum class Verdict { Regular, CECandidate, Renormalizable, Undetermined };
enum class Reason { None, BudgetExhausted, Unreliable, NeutralSuspected, CriticalNonReturningCE };

std::string to_string(Verdict v);
std::string to_string(Reason r);
Verdict verdict_from_string(const std::string& s);
Reason reason_from_string(const std::string& s);

struct Classification {
    Verdict verdict = Verdict::Undetermined;
    Reason reason = Reason::None;
    std::string detail;

    // Regular
    std::optional<int> period;
    std::optional<double> multiplier;
    // Renormalizable
    std::optional<int> renorm_period;
    int renorm_depth = 0;
    // Orbit statistics
    std::optional<double> lambda_hat;
    std::optional<double> recurrence_exponent;
    std::optional<double> wr;  ///< statistic at the smallest delta
    std::optional<double> bce; ///< minimum backward exponent at the deepest level
    int nest_depth = 0;
    int reliable_levels = 0;
    int central_levels = 0;
    std::vector<double> c;     ///< scaling factors of reliable levels
    /// Upper bound on the next scaling factor when the nest stopped because
    /// I_{n+1} fell below resolution.
    std::optional<double> c_bound;
    std::vector<double> e;     ///< CE quantities per level where defined
    std::vector<std::string> flags;

    bool operator==(const Classification&) const = default;
};

/// c_{n+1} < c_n / 2 at the deepest pair, using c_bound as the last factor
/// when present. nullopt with fewer than two usable factors.
std::optional<bool> deepest_pair_decays(const Classification& cls);

Classification classify_parameter(const maps::MapFamily& family, const std::vector<double>& params,
                                  const Budgets& budgets = {});

struct ScanRecord {
    int schema_version = kSchemaVersion;
    long index = 0;
    std::vector<double> params;
    std::optional<double> t; ///< normalized parameter for quadratic-based families
    std::optional<double> a; ///< raw quadratic parameter
    Classification cls;

    bool operator==(const ScanRecord&) const = default;
};

enum class Sampling { Uniform, Stratified };
std::string to_string(Sampling s);
Sampling sampling_from_string(const std::string& s);

struct ScanWindow {
    std::vector<config::Range> ranges;
    /// Point the random lines pass through for multi-parameter windows; the
    /// window center when absent.
    std::optional<std::vector<double>> base;
};

struct ScanOptions {
    long samples = 1;
    std::uint64_t seed = 42;
    Sampling sampling = Sampling::Uniform;
    int lines = 16; ///< random lines for multi-parameter windows
    int jobs = 0;   ///< 0 selects the OpenMP default
    Exec exec = Exec::Parallel;
};

/// Parameters of sample i. One free parameter: lo + u (hi - lo). Several:
/// a point on line (i mod lines) through the base point, clipped to the box.
std::vector<double> sample_parameters(const maps::MapFamily& family, const ScanWindow& window,
                                      const ScanOptions& opt, long i);

ScanRecord classify_sample(const maps::MapFamily& family, const ScanWindow& window,
                           const Budgets& budgets, const ScanOptions& opt, long i);

/// Records for samples [first, opt.samples), ordered by index.
std::vector<ScanRecord> scan_range(const maps::MapFamily& family, const ScanWindow& window,
                                   const Budgets& budgets, const ScanOptions& opt, long first = 0);

struct ScanSummary {
    long total = 0;
    long regular = 0;
    long ce_candidate = 0;
    long renormalizable = 0;
    long undetermined = 0;
    long computed = 0; ///< samples classified by this run
    long resumed = 0;  ///< samples found already persisted

    [[nodiscard]] double fraction(Verdict v) const;
};

ScanSummary summarize(const std::vector<ScanRecord>& records);

// ---------------------------------------------------------------------------
// Persistence

enum class Format { Csv, JsonLines };
Format format_for_path(const std::string& path);

std::string csv_header(const maps::MapFamily& family);
std::string to_csv_row(const ScanRecord& r);
ScanRecord from_csv_row(const maps::MapFamily& family, const std::string& line);
std::string to_json_line(const ScanRecord& r, const maps::MapFamily& family);
ScanRecord from_json_line(const std::string& line);

/// Writes all records (header included for CSV). Throws IOFailure.
void export_records(const std::vector<ScanRecord>& records, const maps::MapFamily& family,
                    Format format, const std::string& path);

/// Resumable scan into path. A manifest (path + ".manifest") pins the scan
/// inputs; a lock file (path + ".lock") excludes concurrent writers. Indices
/// already persisted are skipped; a torn last line is dropped.
ScanSummary scan_to_file(const maps::MapFamily& family, const ScanWindow& window,
                         const Budgets& budgets, const ScanOptions& opt, const std::string& path);

/// Records of a finished or partial scan file.
std::vector<ScanRecord> read_records(const maps::MapFamily& family, const std::string& path);

// ---------------------------------------------------------------------------
// Phase-parameter windows

/// Combinatorics of the nest to level n: restrictive tower, v_1..v_n, and for
/// k < n whether R_k(0) is central, its return time and side, and s_k.
/// nullopt when the nest does not reach level n.
std::optional<std::string> window_signature(const maps::MapFamily& family,
                                            const std::vector<double>& params, int n,
                                            const Budgets& budgets = {});

struct ParameterWindow {
    int n = 1;
    int param_index = 0;
    double base = 0.0;
    double lo = 0.0; ///< outermost points found with the base signature
    double hi = 0.0;
    double lo_out = 0.0; ///< nearest points found with a different signature
    double hi_out = 0.0;
    std::string signature;
    bool degenerate = false; ///< window narrower than window_tol
};

/// Outward probes from the base until the signature changes, then bisection
/// to window_tol on each side. Probe offsets double from window_tol and then
/// advance by at most max_step, so sub-windows narrower than max_step can be
/// stepped over. Throws MaxIterations after 10^5 probes on one side.
ParameterWindow parameter_window(const maps::MapFamily& family, const std::vector<double>& params,
                                 int n, double window_tol, int param_index = 0,
                                 const Budgets& budgets = {}, double max_step = 2.5e-7);

/// Bounds of parameter i of a family (infinite when unbounded).
config::Range parameter_bounds(const maps::MapFamily& family, int i);

} // namespace nestlab::scan
