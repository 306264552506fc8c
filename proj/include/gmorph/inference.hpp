#ifndef GMORPH_INFERENCE_HPP
#define GMORPH_INFERENCE_HPP

#include <memory>
#include <vector>

#include "gmorph/model.hpp"
#include "gmorph/treebank.hpp"

namespace gmorph {

// A per-sentence factor graph: one variable per token, one unary factor per
// variable, one binary factor per dependency edge (none toward ROOT).
// Factor tables are held in log domain; unaries may contain -inf (clamps),
// binary tables are always finite.
struct FactorGraphInstance {
    struct Edge {
        int child = 0;  // 0-based variable indices
        int head = 0;
        // |dom(child)| x |dom(head)| log-psi table, row-major over head.
        std::shared_ptr<const std::vector<double>> log_psi;
        // Optional cached exp(log_psi - log_max) table (filled by the
        // trainer's table pool; computed on the fly otherwise).
        std::shared_ptr<const std::vector<double>> lin_psi;
        double log_max = 0.0;  // meaningful when lin_psi is set
    };

    int n = 0;
    int root = 0;                          // 0-based
    std::vector<int> domain_size;          // per variable
    std::vector<std::vector<double>> log_phi;  // per variable, over domain
    std::vector<Edge> edges;               // n-1 entries for a tree

    // Realized candidate tags per variable; empty for synthetic instances
    // assembled directly by tests.
    std::vector<std::vector<MorphTag>> domain_tags;

    // Tree navigation, derived from `edges` by finalize().
    std::vector<int> parent;               // -1 at root
    std::vector<int> parent_edge;          // edge index toward parent; -1 at root
    std::vector<std::vector<int>> children;
    std::vector<int> topo_order;           // parents before children

    // Validates tree shape, checks unary feasibility, computes navigation.
    void finalize();

    const std::vector<double>& edge_table(int e) const {
        return *edges[e].log_psi;
    }
};

// Builds the instance for a sentence: domains from `domains`, unaries from
// `constraints`, one binary factor per non-root dependency edge scored by
// `model`. Throws DataError if a clamped tag is missing from its domain.
FactorGraphInstance build_instance(const DepSentence& sentence,
                                   const TagDomainTable& domains,
                                   const ScoringModel& model,
                                   const UnaryConstraints& constraints);

struct InferenceResult {
    double log_z = 0.0;
    // Per variable: normalized distribution over its domain.
    std::vector<std::vector<double>> node_marginals;
    // Per edge (same order as instance.edges): joint distribution,
    // row-major |dom(child)| x |dom(head)|.
    std::vector<std::vector<double>> edge_marginals;
    // Filled by max_product/brute_force: domain index per variable.
    std::vector<int> argmax;
};

// Exact two-pass sum-product on the tree; computes log Z plus node and edge
// marginals. Throws InconsistencyError when clamps leave a variable with no
// admissible value.
InferenceResult sum_product(const FactorGraphInstance& inst);

// Exact max-product decode. Ties break toward the lowest domain index,
// applied at the root and at every back-pointing step (equivalently: the
// lexicographically smallest maximizer in root-first pre-order).
std::vector<int> max_product(const FactorGraphInstance& inst);

// Exhaustive-enumeration oracle with the same tie-break rule. Refuses
// assignment spaces larger than `max_space`.
InferenceResult brute_force(const FactorGraphInstance& inst,
                            long max_space = 1000000);

// Unnormalized log score of a full assignment (sum of unary and binary log
// factors); shared by decode checks and the oracle.
double assignment_log_score(const FactorGraphInstance& inst,
                            const std::vector<int>& assignment);

// Root-first pre-order over variables (children in ascending index order);
// the variable order under which argmax ties are broken.
std::vector<int> preorder(const FactorGraphInstance& inst);

}  // namespace gmorph

#endif  // GMORPH_INFERENCE_HPP
