#include "gmorph/inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "gmorph/error.hpp"
#include "gmorph/kernels.hpp"

namespace gmorph {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// A log-domain vector normalized so its maximum entry is 0, with the
// subtracted maximum carried in `offset`.
struct Msg {
    std::vector<double> logv;
    double offset = 0.0;
};

}  // namespace

void FactorGraphInstance::finalize() {
    if (n <= 0) throw DataError("factor graph with no variables");
    if (static_cast<int>(domain_size.size()) != n ||
        static_cast<int>(log_phi.size()) != n)
        throw DataError("factor graph field sizes disagree");
    if (static_cast<int>(edges.size()) != n - 1)
        throw DataError("tree factor graph needs exactly n-1 binary factors");

    for (int v = 0; v < n; ++v) {
        if (domain_size[v] < 1) throw DataError("empty domain");
        if (static_cast<int>(log_phi[v].size()) != domain_size[v])
            throw DataError("unary factor size mismatch");
        bool feasible = false;
        for (double lp : log_phi[v])
            if (lp > kNegInf) {
                feasible = true;
                break;
            }
        if (!feasible)
            throw InconsistencyError(
                "variable " + std::to_string(v) +
                " has no domain entry with positive unary score");
    }

    parent.assign(n, -1);
    parent_edge.assign(n, -1);
    children.assign(n, {});
    for (std::size_t e = 0; e < edges.size(); ++e) {
        const Edge& ed = edges[e];
        if (ed.child < 0 || ed.child >= n || ed.head < 0 || ed.head >= n ||
            ed.child == ed.head)
            throw DataError("edge endpoints out of range");
        if (!ed.log_psi ||
            static_cast<int>(ed.log_psi->size()) !=
                domain_size[ed.child] * domain_size[ed.head])
            throw DataError("binary factor table shape mismatch");
        if (parent[ed.child] != -1)
            throw DataError("variable has two parents; not a tree");
        parent[ed.child] = ed.head;
        parent_edge[ed.child] = static_cast<int>(e);
        children[ed.head].push_back(ed.child);
    }
    if (root < 0 || root >= n || parent[root] != -1)
        throw DataError("bad root");
    for (auto& ch : children) std::sort(ch.begin(), ch.end());

    // BFS from the root; a connected n-node graph with n-1 edges is a tree.
    topo_order.clear();
    topo_order.reserve(n);
    topo_order.push_back(root);
    for (std::size_t i = 0; i < topo_order.size(); ++i)
        for (int c : children[topo_order[i]]) topo_order.push_back(c);
    if (static_cast<int>(topo_order.size()) != n)
        throw DataError("factor graph is not connected");
}

FactorGraphInstance build_instance(const DepSentence& sentence,
                                   const TagDomainTable& domains,
                                   const ScoringModel& model,
                                   const UnaryConstraints& constraints) {
    const int n = sentence.size();
    if (static_cast<int>(domains.size()) != n ||
        static_cast<int>(constraints.entries.size()) != n)
        throw DataError("domain/constraint tables do not match sentence length");

    FactorGraphInstance inst;
    inst.n = n;
    inst.root = sentence.root() - 1;
    inst.domain_size.resize(n);
    inst.domain_tags.resize(n);
    inst.log_phi.resize(n);

    for (int v = 0; v < n; ++v) {
        const std::vector<MorphTag>& dom = domains[v];
        if (dom.empty()) throw DataError("empty tag domain at position " +
                                         std::to_string(v + 1));
        inst.domain_size[v] = static_cast<int>(dom.size());
        inst.domain_tags[v] = dom;
        inst.log_phi[v].resize(dom.size());
        const UnaryConstraints::Entry& entry = constraints.entries[v];
        for (std::size_t a = 0; a < dom.size(); ++a)
            inst.log_phi[v][a] = log_phi(dom[a], entry);
        if (const auto* clamp = std::get_if<UnaryConstraints::Clamp>(&entry)) {
            if (std::find(dom.begin(), dom.end(), clamp->tag) == dom.end())
                throw DataError("clamped tag " + clamp->tag.to_string() +
                                " is not in the domain of position " +
                                std::to_string(v + 1));
        }
    }

    for (const Token& t : sentence.tokens) {
        if (t.head == 0) continue;  // no factor toward ROOT
        FactorGraphInstance::Edge edge;
        edge.child = t.index - 1;
        edge.head = t.head - 1;
        EdgeKey key{t.upos, sentence.at(t.head).upos, t.deprel};
        const std::vector<MorphTag>& di = domains[edge.child];
        const std::vector<MorphTag>& dj = domains[edge.head];
        auto table = std::make_shared<std::vector<double>>(di.size() * dj.size());
        for (std::size_t a = 0; a < di.size(); ++a)
            for (std::size_t b = 0; b < dj.size(); ++b)
                (*table)[a * dj.size() + b] = model.log_psi(di[a], dj[b], key);
        edge.log_psi = std::move(table);
        inst.edges.push_back(std::move(edge));
    }

    inst.finalize();
    return inst;
}

namespace {

// exp(table - max) with the max returned; reuses a cached copy if present.
struct LinTable {
    std::shared_ptr<const std::vector<double>> values;
    double log_max = 0.0;
};

LinTable lin_table(const FactorGraphInstance::Edge& edge) {
    if (edge.lin_psi) return {edge.lin_psi, edge.log_max};
    const auto& ker = kernels::ops();
    const std::vector<double>& t = *edge.log_psi;
    double m = ker.vmax(t.data(), t.size());
    auto lin = std::make_shared<std::vector<double>>(t.size());
    ker.vexp_shift(lin->data(), t.data(), -m, t.size());
    return {std::move(lin), m};
}

double lse_normalized(const std::vector<double>& logv) {
    // logv has max 0 by construction; plain sum of exp is stable.
    const auto& ker = kernels::ops();
    std::vector<double> tmp(logv.size());
    ker.vexp_shift(tmp.data(), logv.data(), 0.0, tmp.size());
    return std::log(ker.vsum(tmp.data(), tmp.size()));
}

// Normalizes v in place to max 0 and returns the subtracted max.
double normalize_max(std::vector<double>& v) {
    const auto& ker = kernels::ops();
    double m = ker.vmax(v.data(), v.size());
    if (m == kNegInf)
        throw InconsistencyError(
            "belief vanished everywhere; clamps are inconsistent or the "
            "factor tables exceed double range");
    if (m != 0.0)
        for (double& x : v) x -= m;
    return m;
}

}  // namespace

InferenceResult sum_product(const FactorGraphInstance& inst) {
    const auto& ker = kernels::ops();
    const int n = inst.n;

    std::vector<LinTable> lin(inst.edges.size());
    for (std::size_t e = 0; e < inst.edges.size(); ++e)
        lin[e] = lin_table(inst.edges[e]);

    // Upward pass: lambda_up[v] = phi_v + all child messages (log domain,
    // max-normalized; subtracted maxima accumulate in the offsets).
    std::vector<Msg> up(inst.edges.size());
    std::vector<Msg> lambda_up(n);
    for (int i = n - 1; i >= 0; --i) {
        const int v = inst.topo_order[i];
        Msg& lam = lambda_up[v];
        lam.logv = inst.log_phi[v];
        lam.offset = 0.0;
        for (int c : inst.children[v]) {
            const Msg& m = up[inst.parent_edge[c]];
            ker.vadd(lam.logv.data(), m.logv.data(), lam.logv.size());
            lam.offset += m.offset;
        }
        lam.offset += normalize_max(lam.logv);

        if (v == inst.root) continue;
        const int e = inst.parent_edge[v];
        const int dh = inst.domain_size[inst.parent[v]];
        const int dc = inst.domain_size[v];
        std::vector<double> vexp(dc);
        ker.vexp_shift(vexp.data(), lam.logv.data(), 0.0, dc);
        std::vector<double> out(dh, 0.0);
        const double* table = lin[e].values->data();
        for (int a = 0; a < dc; ++a)
            if (vexp[a] != 0.0)
                ker.axpy(out.data(), table + static_cast<std::size_t>(a) * dh,
                         vexp[a], dh);
        Msg& msg = up[e];
        msg.logv.resize(dh);
        double best = ker.vmax(out.data(), dh);
        if (!(best > 0.0))
            throw InconsistencyError(
                "upward message vanished at position " + std::to_string(v + 1));
        for (int b = 0; b < dh; ++b)
            msg.logv[b] = out[b] > 0.0 ? std::log(out[b] / best) : kNegInf;
        msg.offset = std::log(best) + lin[e].log_max + lam.offset;
    }

    // log Z from the root belief.
    const Msg& root_lam = lambda_up[inst.root];
    const double log_z = lse_normalized(root_lam.logv) + root_lam.offset;

    // Downward pass. exclude[e] = everything at the head of e except the
    // subtree under e's child.
    std::vector<Msg> down(inst.edges.size());
    std::vector<Msg> exclude(inst.edges.size());
    for (int idx = 0; idx < n; ++idx) {
        const int v = inst.topo_order[idx];
        for (int c : inst.children[v]) {
            const int e = inst.parent_edge[c];
            Msg& ex = exclude[e];
            ex.logv = inst.log_phi[v];
            ex.offset = 0.0;
            if (v != inst.root) {
                const Msg& dm = down[inst.parent_edge[v]];
                ker.vadd(ex.logv.data(), dm.logv.data(), ex.logv.size());
                ex.offset += dm.offset;
            }
            for (int c2 : inst.children[v]) {
                if (c2 == c) continue;
                const Msg& m = up[inst.parent_edge[c2]];
                ker.vadd(ex.logv.data(), m.logv.data(), ex.logv.size());
                ex.offset += m.offset;
            }
            ex.offset += normalize_max(ex.logv);

            const int dh = inst.domain_size[v];
            const int dc = inst.domain_size[c];
            std::vector<double> wexp(dh);
            ker.vexp_shift(wexp.data(), ex.logv.data(), 0.0, dh);
            const double* table = lin[e].values->data();
            std::vector<double> out(dc);
            for (int a = 0; a < dc; ++a)
                out[a] = ker.dot(table + static_cast<std::size_t>(a) * dh,
                                 wexp.data(), dh);
            Msg& msg = down[e];
            msg.logv.resize(dc);
            double best = ker.vmax(out.data(), dc);
            if (!(best > 0.0))
                throw InconsistencyError("downward message vanished at edge " +
                                         std::to_string(e));
            for (int a = 0; a < dc; ++a)
                msg.logv[a] = out[a] > 0.0 ? std::log(out[a] / best) : kNegInf;
            msg.offset = std::log(best) + lin[e].log_max + ex.offset;
        }
    }

    InferenceResult result;
    result.log_z = log_z;

    // Node marginals: belief = phi + parent-side message + child messages.
    result.node_marginals.resize(n);
    for (int v = 0; v < n; ++v) {
        std::vector<double> belief = inst.log_phi[v];
        if (v != inst.root) {
            const Msg& dm = down[inst.parent_edge[v]];
            ker.vadd(belief.data(), dm.logv.data(), belief.size());
        }
        for (int c : inst.children[v]) {
            const Msg& m = up[inst.parent_edge[c]];
            ker.vadd(belief.data(), m.logv.data(), belief.size());
        }
        normalize_max(belief);
        std::vector<double>& marg = result.node_marginals[v];
        marg.resize(belief.size());
        ker.vexp_shift(marg.data(), belief.data(), 0.0, belief.size());
        double total = ker.vsum(marg.data(), marg.size());
        ker.vscale(marg.data(), 1.0 / total, marg.size());
    }

    // Edge marginals: P(a,b) = exp(T[a][b] + lambda_up[child][a]
    //                              + exclude[b] - log Z).
    result.edge_marginals.resize(inst.edges.size());
    for (std::size_t e = 0; e < inst.edges.size(); ++e) {
        const int u = inst.edges[e].child;
        const int h = inst.edges[e].head;
        const int dc = inst.domain_size[u];
        const int dh = inst.domain_size[h];
        const Msg& lam = lambda_up[u];
        const Msg& ex = exclude[e];
        std::vector<double> d(dh);
        ker.vexp_shift(d.data(), ex.logv.data(), 0.0, dh);
        std::vector<double>& P = result.edge_marginals[e];
        P.resize(static_cast<std::size_t>(dc) * dh);
        const double* table = lin[e].values->data();
        const double base =
            lin[e].log_max + lam.offset + ex.offset - log_z;
        for (int a = 0; a < dc; ++a) {
            const double sa =
                lam.logv[a] == kNegInf ? 0.0 : std::exp(base + lam.logv[a]);
            ker.vmul2s(P.data() + static_cast<std::size_t>(a) * dh,
                       table + static_cast<std::size_t>(a) * dh, d.data(), sa,
                       dh);
        }
        double total = ker.vsum(P.data(), P.size());
        ker.vscale(P.data(), 1.0 / total, P.size());
    }

    return result;
}

std::vector<int> max_product(const FactorGraphInstance& inst) {
    const auto& ker = kernels::ops();
    const int n = inst.n;

    // Upward max-plus sweep with back-pointers.
    std::vector<std::vector<double>> lambda(n);
    std::vector<std::vector<double>> upval(inst.edges.size());
    std::vector<std::vector<std::int32_t>> uparg(inst.edges.size());
    for (int i = n - 1; i >= 0; --i) {
        const int v = inst.topo_order[i];
        std::vector<double>& lam = lambda[v];
        lam = inst.log_phi[v];
        for (int c : inst.children[v]) {
            const std::vector<double>& m = upval[inst.parent_edge[c]];
            for (std::size_t a = 0; a < lam.size(); ++a) lam[a] += m[a];
        }
        if (v == inst.root) continue;
        const int e = inst.parent_edge[v];
        const int dh = inst.domain_size[inst.parent[v]];
        const int dc = inst.domain_size[v];
        std::vector<double>& val = upval[e];
        std::vector<std::int32_t>& arg = uparg[e];
        val.assign(dh, kNegInf);
        arg.assign(dh, 0);
        const double* table = inst.edges[e].log_psi->data();
        for (int a = 0; a < dc; ++a) {
            if (lam[a] == kNegInf) continue;
            ker.maxplus_row(val.data(), arg.data(),
                            table + static_cast<std::size_t>(a) * dh, lam[a],
                            a, dh);
        }
    }

    // Root choice: lowest index achieving the maximum.
    const std::vector<double>& rlam = lambda[inst.root];
    int best = -1;
    double best_score = kNegInf;
    for (std::size_t a = 0; a < rlam.size(); ++a) {
        if (rlam[a] > best_score) {
            best_score = rlam[a];
            best = static_cast<int>(a);
        }
    }
    if (best < 0)
        throw InconsistencyError("no admissible assignment (all clamped out)");

    std::vector<int> assignment(n, 0);
    assignment[inst.root] = best;
    for (int idx = 0; idx < n; ++idx) {
        const int v = inst.topo_order[idx];
        for (int c : inst.children[v]) {
            const int e = inst.parent_edge[c];
            assignment[c] = uparg[e][assignment[v]];
        }
    }
    return assignment;
}

double assignment_log_score(const FactorGraphInstance& inst,
                            const std::vector<int>& assignment) {
    double s = 0.0;
    for (int v = 0; v < inst.n; ++v) s += inst.log_phi[v][assignment[v]];
    for (const auto& e : inst.edges)
        s += (*e.log_psi)[static_cast<std::size_t>(assignment[e.child]) *
                              inst.domain_size[e.head] +
                          assignment[e.head]];
    return s;
}

std::vector<int> preorder(const FactorGraphInstance& inst) {
    // topo_order is BFS; pre-order vs BFS does not matter for the lex rule
    // as long as parents precede children and the order is shared with the
    // oracle. DFS pre-order is used for definiteness.
    std::vector<int> order;
    order.reserve(inst.n);
    std::vector<int> stack{inst.root};
    while (!stack.empty()) {
        int v = stack.back();
        stack.pop_back();
        order.push_back(v);
        for (auto it = inst.children[v].rbegin(); it != inst.children[v].rend();
             ++it)
            stack.push_back(*it);
    }
    return order;
}

InferenceResult brute_force(const FactorGraphInstance& inst, long max_space) {
    long space = 1;
    for (int v = 0; v < inst.n; ++v) {
        if (space > max_space / inst.domain_size[v] + 1)
            throw DataError("assignment space too large for brute force");
        space *= inst.domain_size[v];
        if (space > max_space)
            throw DataError("assignment space too large for brute force");
    }

    const std::vector<int> order = preorder(inst);

    // Pass 1: maximum score and tie-broken argmax.
    std::vector<int> assignment(inst.n, 0);
    std::vector<int> best_assignment(inst.n, 0);
    double best_score = kNegInf;
    bool any = false;

    auto lex_better = [&](const std::vector<int>& cand,
                          const std::vector<int>& incumbent) {
        for (int v : order) {
            if (cand[v] != incumbent[v]) return cand[v] < incumbent[v];
        }
        return false;
    };

    auto advance = [&]() {
        for (int v = inst.n - 1; v >= 0; --v) {
            if (++assignment[v] < inst.domain_size[v]) return true;
            assignment[v] = 0;
        }
        return false;
    };

    do {
        double s = assignment_log_score(inst, assignment);
        if (s == kNegInf) continue;
        any = true;
        if (s > best_score ||
            (s == best_score && lex_better(assignment, best_assignment))) {
            best_score = s;
            best_assignment = assignment;
        }
    } while (advance());
    if (!any)
        throw InconsistencyError("no admissible assignment (all clamped out)");

    // Pass 2: partition function and marginals, shifted by the max score.
    InferenceResult result;
    result.node_marginals.resize(inst.n);
    for (int v = 0; v < inst.n; ++v)
        result.node_marginals[v].assign(inst.domain_size[v], 0.0);
    result.edge_marginals.resize(inst.edges.size());
    for (std::size_t e = 0; e < inst.edges.size(); ++e)
        result.edge_marginals[e].assign(
            static_cast<std::size_t>(inst.domain_size[inst.edges[e].child]) *
                inst.domain_size[inst.edges[e].head],
            0.0);

    double z = 0.0;
    std::fill(assignment.begin(), assignment.end(), 0);
    do {
        double s = assignment_log_score(inst, assignment);
        if (s == kNegInf) continue;
        double w = std::exp(s - best_score);
        z += w;
        for (int v = 0; v < inst.n; ++v)
            result.node_marginals[v][assignment[v]] += w;
        for (std::size_t e = 0; e < inst.edges.size(); ++e) {
            const auto& ed = inst.edges[e];
            result.edge_marginals[e][static_cast<std::size_t>(
                                         assignment[ed.child]) *
                                         inst.domain_size[ed.head] +
                                     assignment[ed.head]] += w;
        }
    } while (advance());

    result.log_z = best_score + std::log(z);
    for (auto& m : result.node_marginals)
        for (double& x : m) x /= z;
    for (auto& m : result.edge_marginals)
        for (double& x : m) x /= z;
    result.argmax = best_assignment;
    return result;
}

}  // namespace gmorph
