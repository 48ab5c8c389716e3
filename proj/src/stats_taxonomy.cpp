#include <algorithm>
#include <cmath>
#include <unordered_map>
#include <unordered_set>

#include "nestlab/stats.hpp"

namespace nestlab::stats {

std::string to_string(Landing l) {
    switch (l) {
    case Landing::Standard: return "standard";
    case Landing::Fast: return "fast";
    case Landing::Excellent: return "excellent";
    case Landing::Cool: return "cool";
    case Landing::None: return "none";
    }
    return "none";
}

std::string to_string(Return r) {
    switch (r) {
    case Return::VeryGood: return "very_good";
    case Return::Bad: return "bad";
    case Return::Good: return "good";
    case Return::Neither: return "neither";
    }
    return "neither";
}

void ClassifierConstants::validate() const {
    if (!(gamma >= 1.0)) {
        throw Error(ErrorCode::InvalidArgument, "gamma must be >= 1");
    }
    if (!(b > b_tilde && b_tilde > 1.0)) {
        throw Error(ErrorCode::InvalidArgument, "constants must satisfy b > b_tilde > 1");
    }
    if (std::abs(a * b - 1.0) > 1e-12 || std::abs(a_tilde * b_tilde - 1.0) > 1e-12) {
        throw Error(ErrorCode::InvalidArgument, "constants must satisfy a = 1/b and a_tilde = 1/b_tilde");
    }
    if (!(sparse_factor > 0.0 && sparse_base > 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "sparse coefficients must be positive");
    }
    if (n0 && *n0 < 1) {
        throw Error(ErrorCode::InvalidArgument, "n0 must be >= 1");
    }
}

double ClassifierConstants::sparse(int n) const { return sparse_factor * std::pow(sparse_base, n); }

namespace {

struct LevelSets {
    bool all_vg = false;
    std::unordered_set<int> vg;
    std::unordered_set<int> bad;
    std::unordered_map<int, std::vector<std::string>> why; ///< failed clauses of non-VG branches

    [[nodiscard]] bool is_vg(int j) const { return all_vg || vg.count(j) > 0; }
    [[nodiscard]] bool is_bad(int j) const { return bad.count(j) > 0; }
};

class Classifier {
  public:
    Classifier(const maps::MapInstance& m, const nest::Nest& nest, const ClassifierConstants& k)
        : m_(m), nest_(nest), k_(k) {}

    // c_n for n >= 1, c_0 = |I_1| / |T|.
    [[nodiscard]] std::optional<double> c(int n) const {
        if (n == 0) {
            return nest_.levels.front().interval.half_width / nest_.restrictive.interval.half_width;
        }
        if (n < 1 || n > static_cast<int>(nest_.levels.size())) {
            return std::nullopt;
        }
        const auto& L = nest_.levels[static_cast<std::size_t>(n - 1)];
        if (L.reliability == nest::Reliability::Unreliable) {
            return std::nullopt;
        }
        return L.c;
    }

    [[nodiscard]] const nest::NestLevel& level(int n) const { return nest_.levels[static_cast<std::size_t>(n - 1)]; }

    WordLabel word(const std::vector<int>& d, int n, const LevelSets& sets) const {
        const auto cn = c(n);
        const auto cp = c(n - 1);
        if (!cn || !cp) {
            throw Error(ErrorCode::InsufficientDepth,
                        "landing clauses at level " + std::to_string(n) + " need c_n and c_{n-1}");
        }
        const nest::NestLevel& L = level(n);
        const double a = k_.a;
        const double b = k_.b;
        const double sp = k_.sparse(n);
        const auto m = static_cast<double>(d.size());
        std::vector<int> r;
        r.reserve(d.size());
        for (int j : d) {
            const nest::Branch* br = L.find_branch(j);
            if (br == nullptr) {
                throw Error(ErrorCode::InvalidArgument, "branch " + std::to_string(j) + " is not enumerated");
            }
            r.push_back(br->return_time);
        }
        // True when #{i <= k : pred(i)} < coef * k for every k with lower (<= or <) k <= m.
        auto sparse = [&](double lower, bool strict, double coef, auto pred) {
            int count = 0;
            for (std::size_t i = 0; i < d.size(); ++i) {
                count += pred(i) ? 1 : 0;
                const double k = static_cast<double>(i + 1);
                const bool in_range = strict ? k > lower : k >= lower;
                if (in_range && !(count < coef * k)) {
                    return false;
                }
            }
            return true;
        };
        // True when pred holds for every i <= limit.
        auto prefix = [&](double limit, auto pred) {
            for (std::size_t i = 0; i < d.size() && static_cast<double>(i + 1) <= limit; ++i) {
                if (!pred(i)) {
                    return false;
                }
            }
            return true;
        };
        const double short_time = std::pow(*cp, -a / 2);
        auto is_short = [&](std::size_t i) { return r[i] < short_time; };
        auto not_vg = [&](std::size_t i) { return !sets.is_vg(d[i]); };
        auto is_bad = [&](std::size_t i) { return sets.is_bad(d[i]); };

        const bool ls1 = std::pow(*cn, -a / 2) < m && m < std::pow(*cn, -2 * b);
        const bool ls2 = std::all_of(r.begin(), r.end(), [&](int t) { return t < std::pow(*cp, -3 * b); });
        const bool ls3 = sparse(std::pow(*cp, -2 * b), false, sp * std::pow(*cp, a / 2), is_short);
        const bool lf1 = m < std::pow(*cn, -a / 2);
        const bool le1 = sparse(std::pow(*cp, -2 * b), true, sp * std::pow(*cp, a * a), not_vg);
        const bool le2 = sparse(std::pow(*cn, -1.0 / n), true, sp * std::pow(*cp, n), is_bad);
        const bool lc1 = prefix(std::pow(*cp, -a * a / 2), [&](std::size_t i) { return sets.is_vg(d[i]); });
        const bool lc2 = sparse(std::pow(*cp, -a * a / 4), true, sp * std::pow(*cp, a / 3), is_short);
        const bool lc3 = sparse(std::pow(*cp, -n / 3.0), false, sp * std::pow(*cp, n / 6.0), is_bad);
        const bool lc4 = prefix(std::pow(*cp, -n / 2.0), [&](std::size_t i) { return !sets.is_bad(d[i]); });

        WordLabel w;
        w.word = d;
        w.level = n;
        const std::pair<const char*, bool> clauses[] = {{"LS1", ls1}, {"LS2", ls2}, {"LS3", ls3}, {"LF1", lf1},
                                                        {"LE1", le1}, {"LE2", le2}, {"LC1", lc1}, {"LC2", lc2},
                                                        {"LC3", lc3}, {"LC4", lc4}};
        for (const auto& [name, ok] : clauses) {
            if (!ok) {
                w.failed.emplace_back(name);
            }
        }
        w.standard = ls1 && ls2 && ls3;
        w.fast = lf1 && ls2;
        w.excellent = w.standard && le1 && le2;
        w.cool = w.excellent && lc1 && lc2 && lc3 && lc4;
        w.label = w.cool        ? Landing::Cool
                  : w.excellent ? Landing::Excellent
                  : w.standard  ? Landing::Standard
                  : w.fast      ? Landing::Fast
                                : Landing::None;
        return w;
    }

    // G1 and G2 for branch b of level n.
    void good(BranchLabel& out, const nest::Branch& b, int n, int n0, double lambda0) const {
        const auto h = branch_hyperbolicity(m_, level(n), b.j, 16);
        out.lambda = h.lambda;
        const bool g1 = h.lambda >= lambda0 * (1 + std::pow(2.0, n0 - n)) / 2;
        bool g2 = true;
        if (!g1) {
            out.failed.emplace_back("G1");
        }
        if (n >= 2) {
            const auto cp = c(n - 1);
            if (!cp) {
                out.failed.emplace_back("G2:insufficient_depth");
                g2 = false;
            } else {
                const double kmin = std::pow(*cp, -3.0 / (n - 1));
                const double bound = lambda0 * (1 + std::pow(2.0, n0 - n + 0.5)) / 2 - std::pow(*cp, 2.0 / (n - 1));
                const int pts = 16;
                for (int i = 0; i <= pts && g2; ++i) {
                    double x = b.interval.lo + b.interval.length() * i / pts;
                    double s = 0.0;
                    for (int k = 1; k <= b.return_time; ++k) {
                        s += std::log(std::abs(m_.derivative(x)));
                        x = m_.value(x);
                        if (k >= kmin && s / k < bound) {
                            g2 = false;
                            break;
                        }
                    }
                }
                if (!g2) {
                    out.failed.emplace_back("G2");
                }
            }
        }
        out.good = g1 && g2;
    }

  private:
    const maps::MapInstance& m_;
    const nest::Nest& nest_;
    const ClassifierConstants& k_;
};

} // namespace

BranchTaxonomy classify_branches(const maps::MapInstance& m, const nest::Nest& nest,
                                 const std::vector<std::pair<int, std::vector<int>>>& words,
                                 const ClassifierConstants& consts) {
    consts.validate();
    if (nest.levels.empty()) {
        throw Error(ErrorCode::InsufficientDepth, "nest has no levels");
    }
    const Classifier cl(m, nest, consts);
    int n0 = 0;
    if (consts.n0) {
        n0 = *consts.n0;
    } else {
        for (const auto& L : nest.levels) {
            if (L.c && *L.c < 0.1 && L.reliability == nest::Reliability::Reliable) {
                n0 = L.n;
                break;
            }
        }
        if (n0 == 0) {
            throw Error(ErrorCode::InsufficientDepth, "no level with c_n < 0.1 to start from");
        }
    }
    if (n0 > static_cast<int>(nest.levels.size()) || !cl.level(n0).branches_enumerated) {
        throw Error(ErrorCode::InsufficientBranches, "level n0 = " + std::to_string(n0) + " has no branch table");
    }
    BranchTaxonomy out;
    out.n0 = n0;
    out.lambda_n0 = level_hyperbolicity(m, cl.level(n0), 16);

    std::vector<LevelSets> sets; // sets[n - n0]
    sets.emplace_back();
    sets.back().all_vg = true;
    int last = n0;
    while (last < static_cast<int>(nest.levels.size()) && cl.level(last + 1).branches_enumerated &&
           cl.level(last).v && cl.c(last) && cl.c(last - 1)) {
        const nest::NestLevel& L = cl.level(last);
        const nest::NestLevel& next = cl.level(last + 1);
        LevelSets s;
        const double dist = std::pow(*cl.c(last), static_cast<double>(last) * last) * next.interval.length();
        for (const auto& b : next.branches) {
            const double mid = 0.5 * (b.interval.lo + b.interval.hi);
            const double y = nest::iterate(m, mid, *L.v);
            nest::LandingWord lw;
            try {
                lw = nest::landing_word(m, L, y, 10000, false);
            } catch (const Error&) {
                lw.truncated = true;
            }
            if (lw.truncated) {
                s.why[b.j] = {"truncated"};
                continue;
            }
            const WordLabel w = cl.word(lw.word, last, sets.back());
            const double gap = std::min(std::abs(b.interval.lo), std::abs(b.interval.hi));
            if (w.excellent && gap > dist) {
                s.vg.insert(b.j);
                continue;
            }
            s.why[b.j] = w.excellent ? std::vector<std::string>{"VG"} : w.failed;
            if (!w.fast) {
                s.bad.insert(b.j);
            }
        }
        sets.push_back(std::move(s));
        ++last;
    }

    for (int n = n0; n <= last; ++n) {
        const LevelSets& s = sets[static_cast<std::size_t>(n - n0)];
        const nest::NestLevel& L = cl.level(n);
        for (const auto& b : L.branches) {
            BranchLabel bl;
            bl.level = n;
            bl.j = b.j;
            bl.very_good = s.is_vg(b.j);
            bl.bad = s.is_bad(b.j);
            if (const auto it = s.why.find(b.j); it != s.why.end()) {
                bl.failed = it->second;
            }
            cl.good(bl, b, n, n0, out.lambda_n0);
            bl.label = bl.very_good ? Return::VeryGood : bl.bad ? Return::Bad : bl.good ? Return::Good : Return::Neither;
            out.branches.push_back(std::move(bl));
        }
    }

    for (const auto& [n, d] : words) {
        if (n < n0 || n > last) {
            throw Error(ErrorCode::InsufficientDepth,
                        "word at level " + std::to_string(n) + " outside classified levels " + std::to_string(n0) +
                            ".." + std::to_string(last));
        }
        out.words.push_back(cl.word(d, n, sets[static_cast<std::size_t>(n - n0)]));
    }
    return out;
}

} // namespace nestlab::stats
