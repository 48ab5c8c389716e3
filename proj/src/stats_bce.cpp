#include <cmath>
#include <limits>

#include "nestlab/stats.hpp"

namespace nestlab::stats {

namespace {

struct Node {
    double x;
    double log_d; ///< ln|Df^n(x)|
};

struct Best {
    double value = std::numeric_limits<double>::infinity();
    double x = 0.0;
    long count = 0;

    void offer(double v, double at) {
        ++count;
        if (v < value || (v == value && at > x)) {
            value = v;
            x = at;
        }
    }
    void merge(const Best& o) {
        count += o.count;
        if (o.value < value || (o.value == value && o.x > x)) {
            value = o.value;
            x = o.x;
        }
    }
};

// Children of a node at depth n are the preimages of its point.
template <typename Visit>
void children(const maps::MapInstance& m, const Node& node, Visit&& visit) {
    const double p = m.positive_preimage(node.x);
    if (std::isnan(p)) {
        return;
    }
    const double lp = std::log(std::abs(m.derivative(p)));
    visit(Node{p, node.log_d + lp});
    if (p > 0) {
        visit(Node{-p, node.log_d + lp});
    }
}

void dfs(const maps::MapInstance& m, const Node& node, int n, int depth, std::vector<Best>& best) {
    if (n > 0) {
        best[static_cast<std::size_t>(n - 1)].offer(node.log_d / n, node.x);
    }
    if (n == depth) {
        return;
    }
    children(m, node, [&](const Node& c) { dfs(m, c, n + 1, depth, best); });
}

std::vector<BCEDepth> collect(const std::vector<Best>& best) {
    std::vector<BCEDepth> out;
    for (std::size_t i = 0; i < best.size(); ++i) {
        if (best[i].count == 0) {
            break;
        }
        out.push_back({static_cast<int>(i + 1), best[i].value, best[i].x, best[i].count});
    }
    return out;
}

} // namespace

std::vector<BCEDepth> bce_min_exponent(const maps::MapInstance& m, int depth, Exec exec) {
    if (depth < 0 || depth > 30) {
        throw Error(ErrorCode::InvalidArgument, "BCE depth must lie in [0, 30]");
    }
    std::vector<Best> best(static_cast<std::size_t>(depth));
    if (depth == 0) {
        return {};
    }
    if (exec == Exec::Serial) {
        dfs(m, Node{0.0, 0.0}, 0, depth, best);
        return collect(best);
    }
    // Breadth-first down to a frontier, then independent subtrees.
    const int split = std::min(depth, 8);
    std::vector<Node> frontier{Node{0.0, 0.0}};
    for (int n = 1; n <= split; ++n) {
        std::vector<Node> next;
        for (const auto& node : frontier) {
            children(m, node, [&](const Node& c) {
                best[static_cast<std::size_t>(n - 1)].offer(c.log_d / n, c.x);
                next.push_back(c);
            });
        }
        frontier = std::move(next);
    }
    if (split < depth) {
        const long count = static_cast<long>(frontier.size());
        std::vector<std::vector<Best>> partial(static_cast<std::size_t>(count));
#pragma omp parallel for schedule(dynamic, 1)
        for (long i = 0; i < count; ++i) {
            std::vector<Best> local(static_cast<std::size_t>(depth));
            children(m, frontier[static_cast<std::size_t>(i)],
                     [&](const Node& c) { dfs(m, c, split + 1, depth, local); });
            partial[static_cast<std::size_t>(i)] = std::move(local);
        }
        for (const auto& local : partial) {
            for (int n = split + 1; n <= depth; ++n) {
                best[static_cast<std::size_t>(n - 1)].merge(local[static_cast<std::size_t>(n - 1)]);
            }
        }
    }
    return collect(best);
}

} // namespace nestlab::stats
