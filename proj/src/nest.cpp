#include "nestlab/nest.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace nestlab::nest {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

int sgn(double x) { return x > 0 ? 1 : (x < 0 ? -1 : 0); }

// Root of g on [lo, hi] given the signs at the ends, bisected to float spacing.
template <class G> double bisect_to_spacing(G&& g, double lo, double hi, int slo) {
    for (int it = 0; it < 200; ++it) {
        const double mid = lo + 0.5 * (hi - lo);
        if (mid <= lo || mid >= hi) {
            break;
        }
        const double v = g(mid);
        if (v == 0.0) {
            return mid;
        }
        (sgn(v) == slo ? lo : hi) = mid;
    }
    return lo + 0.5 * (hi - lo);
}

// f^k is monotone on [0, r_k]; update r to r_{k+1}.
double next_central_lap(const maps::MapInstance& m, int k, double r) {
    const double a = iterate(m, 0.0, k);
    const double b = iterate(m, r, k);
    if (sgn(a) * sgn(b) >= 0) {
        return b == 0.0 ? r : r;
    }
    return bisect_to_spacing([&](double x) { return iterate(m, x, k); }, 0.0, r, sgn(a));
}

} // namespace

double iterate(const maps::MapInstance& m, double x, long k) {
    for (long i = 0; i < k; ++i) {
        x = m.value(x);
    }
    return x;
}

numerics::LogProduct log_derivative(const maps::MapInstance& m, double x, long k) {
    numerics::LogProduct p;
    for (long i = 0; i < k; ++i) {
        p.multiply(m.derivative(x));
        x = m.value(x);
    }
    return p;
}

std::string to_string(Reliability r) { return r == Reliability::Reliable ? "reliable" : "unreliable"; }

std::string to_string(LevelStatus s) {
    switch (s) {
    case LevelStatus::Ok: return "ok";
    case LevelStatus::CriticalNonReturning: return "critical_non_returning";
    case LevelStatus::BudgetExhausted: return "budget_exhausted";
    }
    return "?";
}

std::string to_string(NestStatus s) {
    switch (s) {
    case NestStatus::Ok: return "ok";
    case NestStatus::CriticalNonReturning: return "critical_non_returning";
    case NestStatus::BudgetExhausted: return "budget_exhausted";
    case NestStatus::Unreliable: return "unreliable";
    case NestStatus::NoFixedPoint: return "no_fixed_point";
    }
    return "?";
}

// Sorted by j, the table lists each side from 0 outwards on the negative side
// and from the boundary inwards on the positive side; both runs have
// decreasing lo.
const Branch* NestLevel::find_branch(int j) const {
    const auto half = static_cast<long>(branches.size() / 2);
    const long idx = j < 0 ? half + j : half + j - 1;
    if (j != 0 && idx >= 0 && idx < static_cast<long>(branches.size()) &&
        branches[static_cast<std::size_t>(idx)].j == j) {
        return &branches[static_cast<std::size_t>(idx)];
    }
    for (const auto& b : branches) {
        if (b.j == j) {
            return &b;
        }
    }
    return nullptr;
}

const Branch* NestLevel::branch_at(double x) const {
    const auto mid = std::partition_point(branches.begin(), branches.end(),
                                          [](const Branch& b) { return b.j < 0; });
    const auto lo = x < 0 ? branches.begin() : mid;
    const auto hi = x < 0 ? mid : branches.end();
    const auto it = std::partition_point(lo, hi, [&](const Branch& b) { return b.interval.lo > x; });
    if (it != hi && it->interval.contains(x)) {
        return &*it;
    }
    if (it != lo && std::prev(it)->interval.contains(x)) {
        return &*std::prev(it);
    }
    return nullptr;
}

// ---------------------------------------------------------------------------
// Restrictive interval and I_1

RestrictiveInterval restrictive_interval(const maps::MapInstance& m, int max_period) {
    if (max_period < 1) {
        throw Error(ErrorCode::InvalidArgument, "max_period must be >= 1");
    }
    const double B = m.half_width();
    RestrictiveInterval out;
    out.interval = SymInterval{B};
    out.period = 1;
    out.tower.push_back(1);

    const double slack = 1e-12 * B;
    double r = B; // central lap of f^k
    double closest = std::numeric_limits<double>::infinity();
    for (int k = 1; k <= max_period; ++k) {
        const double ck = iterate(m, 0.0, k);
        const bool record = std::abs(ck) < closest;
        closest = std::min(closest, std::abs(ck));
        if (record && k >= 2 && r > 0.0) {
            // |f^k| - x crosses from - to + at the boundary of the periodic interval.
            auto g = [&](double x) { return std::abs(iterate(m, x, k)) - x; };
            constexpr int grid = 64;
            double prev_x = 0.0;
            double prev_g = g(0.0);
            double q = -1.0;
            for (int i = 1; i <= grid; ++i) {
                const double x = r * i / grid;
                const double gx = g(x);
                if (prev_g < 0.0 && gx >= 0.0) {
                    q = gx == 0.0 ? x : bisect_to_spacing(g, prev_x, x, -1);
                    break;
                }
                prev_x = x;
                prev_g = gx;
            }
            if (q > 0.0 && q < out.interval.half_width * (1.0 - 1e-9) && std::abs(ck) <= q + slack) {
                bool ok = true;
                for (int i = 1; i < k && ok; ++i) {
                    const double u = iterate(m, 0.0, i);
                    const double w = iterate(m, q, i);
                    const double lo = std::min(u, w);
                    const double hi = std::max(u, w);
                    ok = hi <= -q + slack || lo >= q - slack;
                }
                if (ok) {
                    const double w = iterate(m, q, k);
                    ok = std::abs(w) <= q + slack;
                }
                if (ok) {
                    out.interval = SymInterval{q};
                    out.period = k;
                    out.tower.push_back(k);
                }
            }
        }
        r = next_central_lap(m, k, r);
    }
    out.max_period_exceeded = out.period > 1 && 2 * out.period > max_period;
    return out;
}

SymInterval first_nest_interval(const maps::MapInstance& m, SymInterval T, int period) {
    if (period < 1) {
        throw Error(ErrorCode::InvalidArgument, "period must be >= 1");
    }
    const double q = T.half_width;
    const double F0 = iterate(m, 0.0, period);
    const double Fq = iterate(m, q, period);
    const bool decreasing = Fq < F0;
    const double sigma = decreasing ? -1.0 : 1.0;
    // decreasing: F(x) - x; increasing: F(x) + x (fixed point at -x).
    auto h = [&](double x) { return iterate(m, x, period) + sigma * x; };
    const double h0 = h(0.0);
    const double hq = h(q);
    const bool ok = decreasing ? (h0 > 0.0 && hq < 0.0) : (h0 < 0.0 && hq > 0.0);
    if (!ok) {
        throw Error(ErrorCode::NoFixedPoint,
                    "no orientation-reversing fixed point of f^" + std::to_string(period) +
                        " in the restrictive interval");
    }
    const double p = bisect_to_spacing(h, 0.0, q, sgn(h0));
    if (p < 1e3 * kEps * q) {
        throw Error(ErrorCode::NoFixedPoint,
                    "fixed point of f^" + std::to_string(period) + " collapses onto the critical point");
    }
    return SymInterval{p};
}

// ---------------------------------------------------------------------------
// Piece tracing
//
// A piece is a subinterval U of [0, p_n] on which F^k is monotone and whose
// images F^i(U), 0 < i <= k, avoid the interior of I_n. Its image endpoints
// are tracked symbolically: the endpoint 0 follows the critical orbit, every
// other endpoint is a preimage of +-p_n and follows the boundary orbit.

namespace {

struct Desc {
    bool crit = false;
    int t0 = 0;   ///< time at which the endpoint maps to sign * p_n
    int sign = 1;
};

struct Piece {
    double lo;
    double hi;
    int k; ///< current time, in steps of F = f^period
    Desc dlo;
    Desc dhi;
};

enum class Outcome { Continue, Branch, Central };

struct StepResult {
    Outcome outcome = Outcome::Continue;
    int orientation = 0;
    bool cut_m = false;
    bool cut_p = false;
    Desc in_lo, in_hi; ///< end descriptors of the returning part
    int central_sign = 0;
};

class LevelEngine {
  public:
    LevelEngine(const maps::MapInstance& m, const NestLevel& level, const NestLimits& limits)
        : m_(m), level_(level), p_(level.interval.half_width), period_(level.period),
          kmax_(std::max(1, limits.max_return_time / level.period)) {
        if (static_cast<int>(level.boundary_orbit.size()) < kmax_ + 2) {
            throw Error(ErrorCode::InvalidArgument, "boundary orbit shorter than the return budget");
        }
        co_.resize(static_cast<std::size_t>(kmax_) + 2);
        crit_signs_.resize(static_cast<std::size_t>(kmax_ + 1) * period_);
        double x = 0.0;
        co_[0] = 0.0;
        for (std::size_t i = 0; i < crit_signs_.size(); ++i) {
            crit_signs_[i] = static_cast<signed char>(i == 0 || x >= 0 ? 1 : -1);
            x = m_.value(x);
            if ((i + 1) % static_cast<std::size_t>(period_) == 0) {
                co_[(i + 1) / static_cast<std::size_t>(period_)] = x;
            }
        }
        co_[static_cast<std::size_t>(kmax_) + 1] = iterate(m_, co_[static_cast<std::size_t>(kmax_)], period_);
    }

    [[nodiscard]] int kmax() const { return kmax_; }
    [[nodiscard]] double p() const { return p_; }
    [[nodiscard]] int period() const { return period_; }
    [[nodiscard]] const signed char* crit_signs() const { return crit_signs_.data(); }

    [[nodiscard]] double value(const Desc& d, int k) const {
        if (d.crit) {
            return co_[static_cast<std::size_t>(k)];
        }
        if (k == d.t0) {
            return d.sign * p_;
        }
        return level_.boundary_orbit[static_cast<std::size_t>(k - d.t0)];
    }

    // Domain point with F^t(x) = target, pulled back along an itinerary
    // (signs of f^i on the piece, i = 0..t*period-1).
    [[nodiscard]] double pull(double target, int t, const signed char* itin) const {
        const long T = static_cast<long>(t) * period_;
        const double top = m_.value(0.0);
        double w = target;
        for (long i = T - 1; i >= 0; --i) {
            const double y = std::min(w, top);
            double x = m_.positive_preimage(y);
            if (std::isnan(x)) {
                x = y > 0 ? 0.0 : m_.half_width();
            }
            w = i == 0 ? x : itin[i] * x;
        }
        return w;
    }

    [[nodiscard]] double domain_point(const Desc& d, const signed char* itin) const {
        if (d.crit) {
            return 0.0;
        }
        return pull(d.sign * p_, d.t0, itin);
    }

    // Itinerary of the interior of a piece, from its midpoint.
    const signed char* piece_itinerary(const Piece& pc, int t) const {
        const long T = static_cast<long>(t) * period_;
        scratch_.resize(static_cast<std::size_t>(T));
        double z = 0.5 * (pc.lo + pc.hi);
        for (long i = 0; i < T; ++i) {
            scratch_[static_cast<std::size_t>(i)] = static_cast<signed char>(i == 0 || z >= 0 ? 1 : -1);
            z = m_.value(z);
        }
        return scratch_.data();
    }

    [[nodiscard]] Branch make_branch(double lo, double hi, int t, int orientation) const {
        Branch b;
        b.interval = Interval{lo, hi};
        b.return_time = t * period_;
        b.orientation = orientation;
        b.log_derivative_lo = log_derivative(m_, lo, b.return_time);
        b.log_derivative_hi = log_derivative(m_, hi, b.return_time);
        return b;
    }

    // Advances the piece one step of F and classifies its image against I_n.
    StepResult step(Piece& pc) const {
        StepResult res;
        const int t = pc.k + 1;
        pc.k = t;
        const double a = value(pc.dlo, t);
        const double b = value(pc.dhi, t);
        const double ymin = std::min(a, b);
        const double ymax = std::max(a, b);
        if (!(ymax > -p_ && ymin < p_)) {
            return res;
        }
        const bool inc = a < b;
        res.orientation = inc ? 1 : -1;
        res.cut_m = ymin < -p_;
        res.cut_p = ymax > p_;
        const Desc at_m{false, t, -1};
        const Desc at_p{false, t, 1};
        res.in_lo = pc.dlo;
        res.in_hi = pc.dhi;
        if (inc) {
            if (res.cut_m) res.in_lo = at_m;
            if (res.cut_p) res.in_hi = at_p;
        } else {
            if (res.cut_p) res.in_lo = at_p;
            if (res.cut_m) res.in_hi = at_m;
        }
        if (res.in_lo.crit || res.in_hi.crit) {
            res.outcome = Outcome::Central;
            const Desc& other = res.in_lo.crit ? res.in_hi : res.in_lo;
            res.central_sign = sgn(value(other, t));
        } else {
            res.outcome = Outcome::Branch;
        }
        return res;
    }

    // Outside part on the given side (-1: left of -p, +1: right of p) as
    // descriptors; domain coordinates are filled by the caller.
    static Piece outside_part(const Piece& pc, const StepResult& r, int side) {
        const int t = pc.k;
        const Desc cut{false, t, side};
        // inc: left part first in domain order; dec: right part first.
        const bool first = (r.orientation > 0) == (side < 0);
        return first ? Piece{pc.lo, pc.lo, t, pc.dlo, cut} : Piece{pc.hi, pc.hi, t, cut, pc.dhi};
    }

  private:
    const maps::MapInstance& m_;
    const NestLevel& level_;
    double p_;
    int period_;
    int kmax_;
    std::vector<double> co_;
    std::vector<signed char> crit_signs_;
    mutable std::vector<signed char> scratch_;
};

Piece initial_piece(double p) { return Piece{0.0, p, 0, Desc{true, 0, 1}, Desc{false, 0, 1}}; }

bool holds_zero(const Piece& pc) { return pc.dlo.crit || pc.dhi.crit; }

// Positive-half branch table -> signed, ranked branches (rank 1 farthest from 0).
std::vector<Branch> rank_branches(std::vector<Branch> pos) {
    std::sort(pos.begin(), pos.end(),
              [](const Branch& a, const Branch& b) { return a.interval.lo > b.interval.lo; });
    std::vector<Branch> out;
    out.reserve(pos.size() * 2);
    for (std::size_t i = pos.size(); i-- > 0;) {
        Branch b = pos[i];
        b.j = -static_cast<int>(i + 1);
        b.interval = Interval{-pos[i].interval.hi, -pos[i].interval.lo};
        b.orientation = -pos[i].orientation;
        std::swap(b.log_derivative_lo, b.log_derivative_hi);
        out.push_back(b);
    }
    for (std::size_t i = 0; i < pos.size(); ++i) {
        Branch b = pos[i];
        b.j = static_cast<int>(i + 1);
        out.push_back(b);
    }
    return out;
}

void set_central(NestLevel& level, double c, int t, int sign) {
    level.central_interval = SymInterval{c};
    level.v = t * level.period;
    level.central_image_sign = sign;
    level.c = c / level.interval.half_width;
}

Branch mirrored(const Branch& b) {
    Branch m = b;
    m.interval = Interval{-b.interval.hi, -b.interval.lo};
    m.orientation = -b.orientation;
    std::swap(m.log_derivative_lo, m.log_derivative_hi);
    return m;
}

} // namespace

NestLevel make_first_level(const maps::MapInstance& m, SymInterval I1, int period,
                           const NestLimits& limits) {
    NestLevel level;
    level.n = 1;
    level.period = period;
    level.interval = I1;
    const int kmax = std::max(1, limits.max_return_time / period);
    const double p = I1.half_width;
    // p or -p is fixed by F; its orbit is snapped to +-p.
    const double Fp = iterate(m, p, period);
    const double snapped = Fp >= 0 ? p : -p;
    level.boundary_orbit.assign(static_cast<std::size_t>(kmax) + 2, snapped);
    level.boundary_orbit[0] = p;
    return level;
}

void locate_central_branch(const maps::MapInstance& m, NestLevel& level, const NestLimits& limits) {
    LevelEngine eng(m, level, limits);
    Piece pc = initial_piece(eng.p());
    while (pc.k + 1 <= eng.kmax()) {
        const auto res = eng.step(pc);
        if (res.outcome == Outcome::Continue) {
            continue;
        }
        if (res.outcome == Outcome::Central) {
            const Desc& other = res.in_lo.crit ? res.in_hi : res.in_lo;
            set_central(level, eng.domain_point(other, eng.crit_signs()), pc.k, res.central_sign);
            return;
        }
        // the critical endpoint lies outside I_n: keep that side
        const Desc& cd = pc.dlo.crit ? pc.dlo : pc.dhi;
        pc = LevelEngine::outside_part(pc, res, sgn(eng.value(cd, pc.k)));
    }
    level.status = LevelStatus::CriticalNonReturning;
}

void decompose_return_branches(const maps::MapInstance& m, NestLevel& level,
                               const NestLimits& limits) {
    LevelEngine eng(m, level, limits);
    const double min_len = limits.min_branch_fraction * level.interval.length();
    std::vector<Branch> pos;
    std::vector<Piece> stack{initial_piece(eng.p())};
    bool truncated = false;
    bool central_found = false;
    // Once the piece holding 0 is shorter than min_len its domain is no
    // longer tracked; only the central return is still of interest.
    bool lazy_zero = false;
    while (!stack.empty()) {
        Piece pc = stack.back();
        stack.pop_back();
        while (true) {
            if (pc.k + 1 > eng.kmax()) {
                if (!holds_zero(pc) && pc.hi - pc.lo >= min_len) {
                    truncated = true;
                }
                break;
            }
            const Piece before = pc;
            const auto res = eng.step(pc);
            if (res.outcome == Outcome::Continue) {
                continue;
            }
            const bool zero = holds_zero(pc);
            if (zero && lazy_zero) {
                if (res.outcome == Outcome::Central) {
                    const Desc& other = res.in_lo.crit ? res.in_hi : res.in_lo;
                    set_central(level, eng.domain_point(other, eng.crit_signs()), pc.k,
                                res.central_sign);
                    central_found = true;
                    break;
                }
                const Desc& cd = pc.dlo.crit ? pc.dlo : pc.dhi;
                pc = LevelEngine::outside_part(pc, res, sgn(eng.value(cd, pc.k)));
                continue;
            }
            double in_lo = 0.0, in_hi = 0.0;
            // A returning part far below min_len is located by linear
            // interpolation; only its neighbours' extents matter.
            const double ya = eng.value(pc.dlo, pc.k);
            const double yb = eng.value(pc.dhi, pc.k);
            auto lin = [&](const Desc& d) {
                return pc.lo + (pc.hi - pc.lo) * (eng.value(d, pc.k) - ya) / (yb - ya);
            };
            const double est = std::abs(lin(res.in_hi) - lin(res.in_lo));
            if (!zero && est < 0.1 * min_len) {
                in_lo = std::clamp(lin(res.in_lo), pc.lo, pc.hi);
                in_hi = std::clamp(lin(res.in_hi), pc.lo, pc.hi);
                if (in_hi < in_lo) {
                    std::swap(in_lo, in_hi);
                }
            } else {
                const signed char* itin =
                    zero ? eng.crit_signs() : eng.piece_itinerary(before, pc.k);
                in_lo = eng.domain_point(res.in_lo, itin);
                in_hi = eng.domain_point(res.in_hi, itin);
            }
            for (int side : {-1, 1}) {
                if ((side < 0 && !res.cut_m) || (side > 0 && !res.cut_p)) {
                    continue;
                }
                Piece q = LevelEngine::outside_part(pc, res, side);
                const bool first = (res.orientation > 0) == (side < 0);
                if (first) {
                    q.hi = std::clamp(in_lo, pc.lo, pc.hi);
                } else {
                    q.lo = std::clamp(in_hi, pc.lo, pc.hi);
                }
                if (holds_zero(q)) {
                    if (q.hi - q.lo < min_len) {
                        lazy_zero = true;
                    }
                    stack.push_back(q);
                } else if (q.hi - q.lo >= min_len) {
                    stack.push_back(q);
                }
            }
            if (res.outcome == Outcome::Central) {
                set_central(level, in_hi, pc.k, res.central_sign);
                central_found = true;
            } else if (in_hi - in_lo >= min_len) {
                pos.push_back(eng.make_branch(in_lo, in_hi, pc.k, res.orientation));
                if (static_cast<int>(pos.size()) >= limits.max_branches) {
                    truncated = true;
                    stack.clear();
                }
            }
            break;
        }
    }
    level.branches = rank_branches(std::move(pos));
    level.branches_enumerated = true;
    level.branches_truncated = truncated;
    if (!central_found) {
        level.status = LevelStatus::CriticalNonReturning;
    }
}

std::optional<Branch> trace_branch(const maps::MapInstance& m, const NestLevel& level, double x,
                                   const NestLimits& limits) {
    const double p = level.interval.half_width;
    if (!(std::abs(x) <= p)) {
        throw Error(ErrorCode::OutOfDomain, "point outside I_n");
    }
    if (level.central_interval && std::abs(x) < level.central_interval->half_width) {
        return std::nullopt;
    }
    LevelEngine eng(m, level, limits);
    std::vector<signed char> itin;
    double z = std::abs(x);
    Piece pc = initial_piece(p);
    while (pc.k + 1 <= eng.kmax()) {
        for (int i = 0; i < level.period; ++i) {
            itin.push_back(static_cast<signed char>(itin.empty() || z >= 0 ? 1 : -1));
            z = m.value(z);
        }
        const auto res = eng.step(pc);
        if (res.outcome == Outcome::Continue) {
            continue;
        }
        if (std::abs(z) < p) {
            if (res.outcome == Outcome::Central) {
                return std::nullopt;
            }
            const double lo = eng.domain_point(res.in_lo, itin.data());
            const double hi = eng.domain_point(res.in_hi, itin.data());
            Branch b = eng.make_branch(std::min(lo, hi), std::max(lo, hi), pc.k, res.orientation);
            return x < 0 ? mirrored(b) : b;
        }
        pc = LevelEngine::outside_part(pc, res, sgn(z));
    }
    return std::nullopt;
}

namespace {

// Preimage of the value t under f^r restricted to branch b (monotone onto [-p, p]).
double branch_preimage(const maps::MapInstance& m, const Branch& b, double p, double t) {
    const bool inc = b.orientation > 0;
    if (t <= -p) {
        return inc ? b.interval.lo : b.interval.hi;
    }
    if (t >= p) {
        return inc ? b.interval.hi : b.interval.lo;
    }
    return bisect_to_spacing([&](double x) { return iterate(m, x, b.return_time) - t; },
                             b.interval.lo, b.interval.hi, inc ? -1 : 1);
}

} // namespace

Interval pull_back(const maps::MapInstance& m, const std::vector<Branch>& word, double p,
                   Interval target) {
    Interval y = target;
    for (std::size_t i = word.size(); i-- > 0;) {
        const double u = branch_preimage(m, word[i], p, y.lo);
        const double w = branch_preimage(m, word[i], p, y.hi);
        y = Interval{std::min(u, w), std::max(u, w)};
    }
    return y;
}

LandingWord landing_word(const maps::MapInstance& m, const NestLevel& level, double x,
                         int max_steps, bool with_domain) {
    if (!level.central_interval) {
        throw Error(ErrorCode::InvalidArgument, "level has no central interval");
    }
    const double p = level.interval.half_width;
    if (!(std::abs(x) <= p)) {
        throw Error(ErrorCode::OutOfDomain, "point outside I_n");
    }
    const double c = level.central_interval->half_width;
    LandingWord out;
    std::vector<Branch> visited;
    double y = x;
    for (int step = 0; step <= max_steps; ++step) {
        if (std::abs(y) < c) {
            if (with_domain) {
                out.landing_domain = pull_back(m, visited, p, Interval{-c, c});
            }
            return out;
        }
        if (step == max_steps) {
            break;
        }
        const Branch* b = level.branch_at(y);
        if (b == nullptr) {
            out.truncated = true;
            if (with_domain) {
                out.landing_domain = pull_back(m, visited, p, Interval{-p, p});
            }
            return out;
        }
        visited.push_back(*b);
        out.word.push_back(b->j);
        out.landing_time += b->return_time;
        y = iterate(m, y, b->return_time);
    }
    throw Error(ErrorCode::MaxIterations, "landing word exceeded max_steps");
}

namespace {

std::vector<Branch> positive_half(const std::vector<Branch>& ranked) {
    std::vector<Branch> pos;
    for (const auto& b : ranked) {
        if (b.j > 0) {
            pos.push_back(b);
        }
    }
    return pos;
}

bool same_branch(const Branch& a, const Branch& b) {
    return a.return_time == b.return_time &&
           std::abs(a.interval.lo - b.interval.lo) <= 1e-9 * (a.interval.length() + 1e-300) &&
           std::abs(a.interval.hi - b.interval.hi) <= 1e-9 * (a.interval.length() + 1e-300);
}

} // namespace

bool extend_nest(const maps::MapInstance& m, std::vector<NestLevel>& levels,
                 const NestLimits& limits, NestMode mode, bool compute_tilde) {
    if (levels.empty()) {
        throw Error(ErrorCode::InvalidArgument, "extend_nest needs at least one level");
    }
    NestLevel& L = levels.back();
    if (!L.central_interval || !L.v) {
        if (L.status == LevelStatus::Ok) {
            L.status = LevelStatus::CriticalNonReturning;
        }
        return false;
    }
    const int period = L.period;
    const double p = L.interval.half_width;
    const double c = L.central_interval->half_width;
    const int kv = *L.v / period;
    const int kmax = std::max(1, limits.max_return_time / period);
    const double B = m.half_width();
    if (2.0 * c < 1e3 * kEps * B) {
        L.reliability = Reliability::Unreliable;
        NestLevel next;
        next.n = L.n + 1;
        next.period = period;
        next.interval = SymInterval{c};
        next.reliability = Reliability::Unreliable;
        levels.push_back(std::move(next));
        return false;
    }

    // Landing of R_n(0) in I_{n+1}, followed along the critical orbit of F.
    double y = iterate(m, 0.0, static_cast<long>(kv) * period);
    L.central = std::abs(y) < c;
    std::vector<std::pair<double, int>> stops; // (point, return time in F-steps)
    int K = kv;
    int total = 0;
    while (std::abs(y) >= c) {
        if (static_cast<int>(stops.size()) >= limits.max_landing_steps) {
            L.status = LevelStatus::BudgetExhausted;
            return false;
        }
        double z = y;
        int r = 0;
        do {
            z = iterate(m, z, period);
            ++r;
        } while (std::abs(z) >= p && K + total + r <= kmax + kv);
        if (std::abs(z) >= p) {
            L.status = LevelStatus::BudgetExhausted;
            return false;
        }
        stops.emplace_back(y, r);
        total += r;
        y = z;
    }
    L.s = static_cast<int>(stops.size());
    L.landing_time = total * period;
    if (!stops.empty()) {
        L.critical_return_time = stops.front().second * period;
    }

    if (mode == NestMode::Full) {
        std::vector<Branch> visited;
        std::vector<Branch> pos = positive_half(L.branches);
        bool added = false;
        for (const auto& [pt, r] : stops) {
            const Branch* b = L.branch_at(pt);
            if (b != nullptr && b->return_time == r * period) {
                visited.push_back(*b);
                continue;
            }
            auto tb = trace_branch(m, L, pt, limits);
            if (!tb) {
                L.status = LevelStatus::BudgetExhausted;
                return false;
            }
            Branch pb = *tb;
            if (pb.interval.lo < 0) {
                pb = mirrored(*tb);
            }
            const bool known = std::any_of(pos.begin(), pos.end(),
                                           [&](const Branch& q) { return same_branch(q, pb); });
            if (!known) {
                pos.push_back(pb);
                added = true;
            }
            visited.push_back(*tb);
        }
        if (added) {
            L.branches = rank_branches(std::move(pos));
        }
        L.landing_word.clear();
        L.landing_branches.clear();
        for (const auto& [pt, r] : stops) {
            const Branch* b = L.branch_at(pt);
            if (b != nullptr) {
                L.landing_word.push_back(b->j);
                L.landing_branches.push_back(*b);
            }
        }
        (void)visited;
        if (L.central) {
            L.tau = 0;
        } else if (!L.landing_word.empty()) {
            L.tau = L.landing_word.front();
        }
    }

    NestLevel next;
    next.n = L.n + 1;
    next.period = period;
    next.interval = SymInterval{c};
    next.boundary_orbit.resize(static_cast<std::size_t>(kmax) + 2);
    next.boundary_orbit[0] = c;
    double w = c;
    for (int j = 1; j < static_cast<int>(next.boundary_orbit.size()); ++j) {
        if (j < kv) {
            w = iterate(m, w, period);
            next.boundary_orbit[static_cast<std::size_t>(j)] = w;
        } else if (j == kv) {
            next.boundary_orbit[static_cast<std::size_t>(j)] = L.central_image_sign * p;
        } else {
            next.boundary_orbit[static_cast<std::size_t>(j)] =
                L.boundary_orbit[static_cast<std::size_t>(j - kv)];
        }
    }
    if (mode == NestMode::Full) {
        decompose_return_branches(m, next, limits);
    } else {
        locate_central_branch(m, next, limits);
    }

    // Neighbourhood of I_{n+2}: central pullback of the landing domain I^d_n.
    if (compute_tilde && mode == NestMode::Full && next.central_interval) {
        const Interval Id = pull_back(m, L.landing_branches, p, Interval{-p, p});
        const double e = L.central_image_sign > 0 ? Id.hi : Id.lo;
        const double y0 = iterate(m, 0.0, *L.v);
        const int s0 = sgn(y0 - e);
        double xs = c;
        if (s0 != 0 && sgn(L.central_image_sign * p - e) != 0) {
            xs = bisect_to_spacing([&](double x) { return iterate(m, x, *L.v) - e; }, 0.0, c, s0);
        }
        next.tilde_interval = Interval{-xs, xs};
    }
    const bool grows = next.central_interval.has_value();
    levels.push_back(std::move(next));
    return grows;
}

double branch_tol(const maps::MapInstance& m, double x, int r) {
    // Suffix sums of ln|Df| along x_1 .. x_{r-1}.
    std::vector<double> logs;
    logs.reserve(static_cast<std::size_t>(std::max(r, 0)));
    double y = m.value(x);
    for (int i = 1; i < r; ++i) {
        logs.push_back(std::log(std::abs(m.derivative(y))));
        y = m.value(y);
    }
    double amp = 0.0;
    double acc = 0.0;
    for (auto it = logs.rbegin(); it != logs.rend(); ++it) {
        acc += *it;
        amp = std::max(amp, acc);
    }
    return 1e3 * kEps * m.half_width() * std::exp(amp);
}

bool maps_onto(const maps::MapInstance& m, const NestLevel& level, const Branch& b) {
    const double p = level.interval.half_width;
    const double lo = iterate(m, b.interval.lo, b.return_time);
    const double hi = iterate(m, b.interval.hi, b.return_time);
    return std::abs(lo + b.orientation * p) <= branch_tol(m, b.interval.lo, b.return_time) &&
           std::abs(hi - b.orientation * p) <= branch_tol(m, b.interval.hi, b.return_time);
}

Nest build_nest(const maps::MapInstance& m, const NestOptions& opt) {
    Nest nest;
    nest.restrictive = restrictive_interval(m, opt.max_period);
    SymInterval I1;
    try {
        I1 = first_nest_interval(m, nest.restrictive.interval, nest.restrictive.period);
    } catch (const Error& e) {
        if (e.code() != ErrorCode::NoFixedPoint) {
            throw;
        }
        nest.status = NestStatus::NoFixedPoint;
        nest.detail = e.what();
        return nest;
    }
    NestLevel first = make_first_level(m, I1, nest.restrictive.period, opt.limits);
    if (opt.mode == NestMode::Full) {
        decompose_return_branches(m, first, opt.limits);
    } else {
        locate_central_branch(m, first, opt.limits);
    }
    nest.levels.push_back(std::move(first));
    while (static_cast<int>(nest.levels.size()) < opt.max_levels) {
        if (!extend_nest(m, nest.levels, opt.limits, opt.mode, opt.compute_tilde)) {
            break;
        }
    }
    const NestLevel& last = nest.levels.back();
    if (last.reliability == Reliability::Unreliable) {
        nest.status = NestStatus::Unreliable;
    } else if (last.status == LevelStatus::CriticalNonReturning) {
        nest.status = NestStatus::CriticalNonReturning;
    } else if (last.status == LevelStatus::BudgetExhausted) {
        nest.status = NestStatus::BudgetExhausted;
    } else {
        for (const auto& l : nest.levels) {
            if (l.status == LevelStatus::BudgetExhausted) {
                nest.status = NestStatus::BudgetExhausted;
            }
        }
    }
    return nest;
}

} // namespace nestlab::nest
