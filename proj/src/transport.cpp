#include "mixsing/transport.hpp"

#include <algorithm>
#include <cmath>
#include <queue>

namespace mixsing {

namespace {

int exponent_for(const TransportSpec& spec, int coord, int base_atom) {
    switch (spec.variant) {
        case TransportSpec::Variant::Order:
            return spec.r;
        case TransportSpec::Variant::Index:
            return spec.kappa.at(static_cast<std::size_t>(coord));
        case TransportSpec::Variant::Block:
            return spec.block.at(static_cast<std::size_t>(base_atom)).at(static_cast<std::size_t>(coord));
    }
    return 1;
}

void check_spec(const TransportSpec& spec, const MixingMeasure& g, const MixingMeasure& gp) {
    if (g.family() != gp.family()) throw make_error("MixedFamilies", "measures from different families");
    int d = coord_count(g.family());
    if (spec.variant == TransportSpec::Variant::Index) {
        if (static_cast<int>(spec.kappa.size()) != d)
            throw make_error("IndexMismatch", "kappa dimension does not match coordinate count");
        for (int k : spec.kappa)
            if (k < 1) throw make_error("IndexMismatch", "kappa entries must be >= 1");
    }
    if (spec.variant == TransportSpec::Variant::Block) {
        if (static_cast<int>(spec.block.size()) != gp.k())
            throw make_error("IndexMismatch", "block row count must equal the base measure's atom count");
        for (const auto& row : spec.block) {
            if (static_cast<int>(row.size()) != d)
                throw make_error("IndexMismatch", "block row dimension does not match coordinate count");
            for (int k : row)
                if (k < 1) throw make_error("IndexMismatch", "block entries must be >= 1");
        }
    }
    if (spec.variant == TransportSpec::Variant::Order && spec.r < 1)
        throw make_error("IndexMismatch", "order must be >= 1");
}

Eigen::MatrixXd cost_matrix(const TransportSpec& spec, const MixingMeasure& g,
                            const MixingMeasure& gp) {
    Eigen::MatrixXd c(g.k(), gp.k());
    for (int i = 0; i < g.k(); ++i)
        for (int j = 0; j < gp.k(); ++j)
            c(i, j) = cost_power(spec, g.atoms[static_cast<std::size_t>(i)],
                                 gp.atoms[static_cast<std::size_t>(j)], j);
    return c;
}

// --------------------- transportation simplex -----------------------------
//
// Bland's rule on both the entering and leaving choices gives a deterministic
// pivot sequence and rules out cycling under degeneracy.

struct Simplex {
    int m, n;
    const Eigen::MatrixXd& c;
    std::vector<double> supply, demand;
    Eigen::MatrixXd flow;
    std::vector<std::vector<bool>> basic;

    Simplex(const Eigen::MatrixXd& cost, std::vector<double> s, std::vector<double> d)
        : m(static_cast<int>(s.size())),
          n(static_cast<int>(d.size())),
          c(cost),
          supply(std::move(s)),
          demand(std::move(d)),
          flow(Eigen::MatrixXd::Zero(static_cast<int>(supply.size()), static_cast<int>(demand.size()))),
          basic(supply.size(), std::vector<bool>(demand.size(), false)) {}

    void northwest_corner() {
        std::vector<double> s = supply, d = demand;
        int i = 0, j = 0;
        int placed = 0;
        while (placed < m + n - 1) {
            basic[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = true;
            double f = std::min(s[static_cast<std::size_t>(i)], d[static_cast<std::size_t>(j)]);
            flow(i, j) = f;
            s[static_cast<std::size_t>(i)] -= f;
            d[static_cast<std::size_t>(j)] -= f;
            ++placed;
            if (i == m - 1 && j == n - 1) break;
            // advance along the dimension that is exhausted; prefer rows on
            // ties so exactly m + n - 1 basic (possibly zero) cells appear
            if (s[static_cast<std::size_t>(i)] <= d[static_cast<std::size_t>(j)] && i < m - 1)
                ++i;
            else
                ++j;
        }
    }

    // potentials from the basic spanning tree
    void potentials(std::vector<double>& u, std::vector<double>& v) const {
        u.assign(static_cast<std::size_t>(m), 0.0);
        v.assign(static_cast<std::size_t>(n), 0.0);
        std::vector<bool> useen(static_cast<std::size_t>(m), false), vseen(static_cast<std::size_t>(n), false);
        std::queue<int> q;  // nodes: rows 0..m-1, cols m..m+n-1
        useen[0] = true;
        q.push(0);
        while (!q.empty()) {
            int node = q.front();
            q.pop();
            if (node < m) {
                for (int j = 0; j < n; ++j)
                    if (basic[static_cast<std::size_t>(node)][static_cast<std::size_t>(j)] && !vseen[static_cast<std::size_t>(j)]) {
                        v[static_cast<std::size_t>(j)] = c(node, j) - u[static_cast<std::size_t>(node)];
                        vseen[static_cast<std::size_t>(j)] = true;
                        q.push(m + j);
                    }
            } else {
                int j = node - m;
                for (int i = 0; i < m; ++i)
                    if (basic[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] && !useen[static_cast<std::size_t>(i)]) {
                        u[static_cast<std::size_t>(i)] = c(i, j) - v[static_cast<std::size_t>(j)];
                        useen[static_cast<std::size_t>(i)] = true;
                        q.push(i);
                    }
            }
        }
    }

    // unique alternating cycle created by adding cell (ei, ej) to the tree
    std::vector<std::pair<int, int>> find_cycle(int ei, int ej) const {
        // path in the basic tree from row node ei to col node ej
        int nn = m + n;
        std::vector<int> prev(static_cast<std::size_t>(nn), -2);
        std::queue<int> q;
        prev[static_cast<std::size_t>(ei)] = -1;
        q.push(ei);
        while (!q.empty()) {
            int node = q.front();
            q.pop();
            if (node == m + ej) break;
            if (node < m) {
                for (int j = 0; j < n; ++j)
                    if (basic[static_cast<std::size_t>(node)][static_cast<std::size_t>(j)] && prev[static_cast<std::size_t>(m + j)] == -2) {
                        prev[static_cast<std::size_t>(m + j)] = node;
                        q.push(m + j);
                    }
            } else {
                int j = node - m;
                for (int i = 0; i < m; ++i)
                    if (basic[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] && prev[static_cast<std::size_t>(i)] == -2) {
                        prev[static_cast<std::size_t>(i)] = m + j;
                        q.push(i);
                    }
            }
        }
        std::vector<std::pair<int, int>> cycle{{ei, ej}};  // entering edge first (+)
        int node = m + ej;
        while (prev[static_cast<std::size_t>(node)] != -1) {
            int par = prev[static_cast<std::size_t>(node)];
            if (node >= m)
                cycle.emplace_back(par, node - m);
            else
                cycle.emplace_back(node, par - m);
            node = par;
        }
        return cycle;  // alternating +,-,+,- starting at the entering edge
    }

    double solve(Eigen::MatrixXd& out_flow) {
        northwest_corner();
        std::vector<double> u, v;
        const int max_iter = 100000;
        for (int iter = 0; iter < max_iter; ++iter) {
            potentials(u, v);
            int ei = -1, ej = -1;
            for (int i = 0; i < m && ei < 0; ++i)
                for (int j = 0; j < n; ++j) {
                    if (basic[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]) continue;
                    if (c(i, j) - u[static_cast<std::size_t>(i)] - v[static_cast<std::size_t>(j)] < -1e-11) {
                        ei = i;
                        ej = j;
                        break;  // Bland: first improving index, row-major
                    }
                }
            if (ei < 0) break;
            auto cycle = find_cycle(ei, ej);
            double theta = std::numeric_limits<double>::infinity();
            int leave = -1;
            for (std::size_t t = 1; t < cycle.size(); t += 2) {  // minus edges
                auto [i, j] = cycle[t];
                double f = flow(i, j);
                int idx = i * n + j;
                if (f < theta - 1e-15 || (std::abs(f - theta) <= 1e-15 && (leave < 0 || idx < leave))) {
                    theta = f;
                    leave = idx;
                }
            }
            for (std::size_t t = 0; t < cycle.size(); ++t) {
                auto [i, j] = cycle[t];
                flow(i, j) += (t % 2 == 0) ? theta : -theta;
            }
            basic[static_cast<std::size_t>(ei)][static_cast<std::size_t>(ej)] = true;
            basic[static_cast<std::size_t>(leave / n)][static_cast<std::size_t>(leave % n)] = false;
            flow(leave / n, leave % n) = 0.0;
        }
        out_flow = flow;
        double total = 0.0;
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < n; ++j) total += flow(i, j) * c(i, j);
        return total;
    }
};

}  // namespace

double cost_power(const TransportSpec& spec, const ParamVec& eta, const ParamVec& etap,
                  int base_atom) {
    double s = 0.0;
    for (int cc = 0; cc < eta.dim(); ++cc) {
        double ad = std::abs(eta[cc] - etap[cc]);
        s += std::pow(ad, exponent_for(spec, cc, base_atom));
    }
    return s;
}

double cost(const TransportSpec& spec, const ParamVec& eta, const ParamVec& etap) {
    if (spec.variant == TransportSpec::Variant::Block)
        throw make_error("IndexMismatch", "block costs are defined against a base atom; use distance()");
    double p = cost_power(spec, eta, etap, 0);
    return std::pow(p, 1.0 / spec.power());
}

DistanceResult distance(const TransportSpec& spec, const MixingMeasure& g,
                        const MixingMeasure& gp) {
    check_spec(spec, g, gp);
    if (g.k() > 64 || gp.k() > 64) throw make_error("SupportTooLarge", "supports capped at 64 atoms");
    Eigen::MatrixXd c = cost_matrix(spec, g, gp);
    DistanceResult res;
    if (g.k() == 1) {
        res.plan.q = Eigen::MatrixXd::Zero(1, gp.k());
        for (int j = 0; j < gp.k(); ++j) res.plan.q(0, j) = gp.weights[static_cast<std::size_t>(j)];
        res.power_value = (res.plan.q.array() * c.array()).sum();
    } else if (gp.k() == 1) {
        res.plan.q = Eigen::MatrixXd::Zero(g.k(), 1);
        for (int i = 0; i < g.k(); ++i) res.plan.q(i, 0) = g.weights[static_cast<std::size_t>(i)];
        res.power_value = (res.plan.q.array() * c.array()).sum();
    } else {
        Simplex sx(c, g.weights, gp.weights);
        res.power_value = sx.solve(res.plan.q);
    }
    res.value = std::pow(std::max(0.0, res.power_value), 1.0 / spec.power());
    res.plan.value = res.value;
    return res;
}

std::vector<double> per_coordinate_error(const TransportPlan& plan, const MixingMeasure& g,
                                         const MixingMeasure& g0) {
    int d = coord_count(g.family());
    std::vector<double> out(static_cast<std::size_t>(d), 0.0);
    for (int i = 0; i < g.k(); ++i)
        for (int j = 0; j < g0.k(); ++j)
            for (int cc = 0; cc < d; ++cc)
                out[static_cast<std::size_t>(cc)] +=
                    plan.q(i, j) * std::abs(g.atoms[static_cast<std::size_t>(i)][cc] -
                                            g0.atoms[static_cast<std::size_t>(j)][cc]);
    return out;
}

double brute_force_power_distance(const TransportSpec& spec, const MixingMeasure& g,
                                  const MixingMeasure& gp) {
    check_spec(spec, g, gp);
    int m = g.k(), n = gp.k();
    if (m * n > 16) throw make_error("SupportTooLarge", "oracle restricted to tiny instances");
    Eigen::MatrixXd c = cost_matrix(spec, g, gp);
    int cells = m * n, bsize = m + n - 1;
    double best = std::numeric_limits<double>::infinity();
    // enumerate candidate bases: all cell subsets of size m + n - 1; flows are
    // determined by leaf peeling when the subset forms a spanning tree
    std::vector<int> pick(static_cast<std::size_t>(bsize));
    for (int i = 0; i < bsize; ++i) pick[static_cast<std::size_t>(i)] = i;
    while (true) {
        // solve marginals on this subset by peeling degree-1 nodes
        std::vector<double> rs = g.weights, cs = gp.weights;
        std::vector<std::pair<int, int>> edges;
        for (int idx : pick) edges.emplace_back(idx / n, idx % n);
        std::vector<int> rdeg(static_cast<std::size_t>(m), 0), cdeg(static_cast<std::size_t>(n), 0);
        for (auto [i, j] : edges) {
            ++rdeg[static_cast<std::size_t>(i)];
            ++cdeg[static_cast<std::size_t>(j)];
        }
        std::vector<double> fl(edges.size(), 0.0);
        std::vector<bool> used(edges.size(), false);
        bool ok = true;
        for (int step = 0; step < bsize && ok; ++step) {
            int found = -1;
            for (std::size_t e = 0; e < edges.size(); ++e) {
                if (used[e]) continue;
                auto [i, j] = edges[e];
                if (rdeg[static_cast<std::size_t>(i)] == 1 || cdeg[static_cast<std::size_t>(j)] == 1) {
                    found = static_cast<int>(e);
                    break;
                }
            }
            if (found < 0) {
                ok = false;  // subset has a cycle; not a basis
                break;
            }
            auto [i, j] = edges[static_cast<std::size_t>(found)];
            double f = (rdeg[static_cast<std::size_t>(i)] == 1) ? rs[static_cast<std::size_t>(i)]
                                                                : cs[static_cast<std::size_t>(j)];
            fl[static_cast<std::size_t>(found)] = f;
            rs[static_cast<std::size_t>(i)] -= f;
            cs[static_cast<std::size_t>(j)] -= f;
            --rdeg[static_cast<std::size_t>(i)];
            --cdeg[static_cast<std::size_t>(j)];
            used[static_cast<std::size_t>(found)] = true;
        }
        if (ok) {
            for (double r : rs) ok = ok && std::abs(r) <= 1e-9;
            for (double d2 : cs) ok = ok && std::abs(d2) <= 1e-9;
            for (double f : fl) ok = ok && f >= -1e-12;
        }
        if (ok) {
            double tot = 0.0;
            for (std::size_t e = 0; e < edges.size(); ++e)
                tot += fl[e] * c(edges[e].first, edges[e].second);
            best = std::min(best, tot);
        }
        // next combination
        int pos = bsize - 1;
        while (pos >= 0 && pick[static_cast<std::size_t>(pos)] == cells - bsize + pos) --pos;
        if (pos < 0) break;
        ++pick[static_cast<std::size_t>(pos)];
        for (int t = pos + 1; t < bsize; ++t)
            pick[static_cast<std::size_t>(t)] = pick[static_cast<std::size_t>(t - 1)] + 1;
    }
    return best;
}

}  // namespace mixsing
