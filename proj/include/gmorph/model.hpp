#ifndef GMORPH_MODEL_HPP
#define GMORPH_MODEL_HPP

#include <iosfwd>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "gmorph/morph.hpp"
#include "gmorph/treebank.hpp"

namespace gmorph {

// (child POS, head POS, dependency label) triple indexing the pairwise
// weight matrices.
struct EdgeKey {
    std::string child_pos;
    std::string head_pos;
    std::string label;

    bool operator==(const EdgeKey&) const = default;
    bool operator<(const EdgeKey& o) const {
        if (child_pos != o.child_pos) return child_pos < o.child_pos;
        if (head_pos != o.head_pos) return head_pos < o.head_pos;
        return label < o.label;
    }
    std::string to_string() const {
        return child_pos + " " + head_pos + " " + label;
    }
};

// One c x c real matrix per observed edge key. Unseen keys score with the
// zero matrix, i.e. a uniform factor.
struct LinearParams {
    SubtagVocab vocab;
    std::map<EdgeKey, std::vector<double>> weights;  // row-major c*c

    const std::vector<double>* find(const EdgeKey& key) const {
        auto it = weights.find(key);
        return it == weights.end() ? nullptr : &it->second;
    }
};

// Neural parameterization sharing weights across edge keys through small
// POS/label embeddings. Unseen identifiers use the "<unk>" embedding.
struct NeuralParams {
    static constexpr const char* kUnk = "<unk>";

    SubtagVocab vocab;
    int n1 = 9;
    int n2 = 3;
    std::vector<double> U;  // c*c*n1, layout [x][y][k]
    std::vector<double> V;  // n1 x 3*n2, row-major
    std::map<std::string, std::vector<double>> pos_embed;
    std::map<std::string, std::vector<double>> label_embed;

    const std::vector<double>& pos_vec(const std::string& id) const;
    const std::vector<double>& label_vec(const std::string& id) const;
};

// Hard-coded agreement baseline: a set of activated (child POS, head POS,
// label) patterns; '*' matches any label.
struct BaselineRules {
    struct Pattern {
        std::string child_pos;
        std::string head_pos;
        std::string label;  // may be "*"
    };
    std::vector<Pattern> activated;

    bool matches(const EdgeKey& key) const;
    static BaselineRules from_file(const std::string& path);
};

// Per-position unary constraints (Eq.-style phi factors).
struct UnaryConstraints {
    struct Free {};
    struct Prefer {
        MorphTag tag;
        double alpha;  // > 1
    };
    struct Clamp {
        MorphTag tag;
    };
    using Entry = std::variant<Free, Prefer, Clamp>;

    std::vector<Entry> entries;  // indexed by 0-based position

    static UnaryConstraints all_free(int n) {
        UnaryConstraints c;
        c.entries.assign(n, Free{});
        return c;
    }
    const Entry& at(int position) const { return entries[position - 1]; }
};

double phi(const MorphTag& m, const UnaryConstraints::Entry& entry);
double log_phi(const MorphTag& m, const UnaryConstraints::Entry& entry);

// Binary factor values. psi_* return the linear-domain score; log_psi_*
// the exponent (exact, no log calls involved).
double psi_linear(const MorphTag& mi, const MorphTag& mj, const EdgeKey& key,
                  const LinearParams& params,
                  UnknownPolicy policy = UnknownPolicy::Strict);
double log_psi_linear(const MorphTag& mi, const MorphTag& mj,
                      const EdgeKey& key, const LinearParams& params,
                      UnknownPolicy policy = UnknownPolicy::Strict);

// W(key) under the neural parameterization: exp(U tanh(V [e;e;e])),
// elementwise, returned row-major c x c.
std::vector<double> neural_W(const EdgeKey& key, const NeuralParams& params);

double psi_neural(const MorphTag& mi, const MorphTag& mj, const EdgeKey& key,
                  const NeuralParams& params,
                  UnknownPolicy policy = UnknownPolicy::Strict);
double log_psi_neural(const MorphTag& mi, const MorphTag& mj,
                      const EdgeKey& key, const NeuralParams& params,
                      UnknownPolicy policy = UnknownPolicy::Strict);

// exp(number of gender/number subtags shared by both tags) on activated
// patterns; 1 elsewhere.
double psi_baseline(const MorphTag& mi, const MorphTag& mj, const EdgeKey& key,
                    const BaselineRules& rules, const GenderSpec& gender);
double log_psi_baseline(const MorphTag& mi, const MorphTag& mj,
                        const EdgeKey& key, const BaselineRules& rules,
                        const GenderSpec& gender);

// A trained (or rule-based) scoring model plus everything needed to apply
// it to new sentences.
struct ScoringModel {
    enum class Kind { Linear, Neural, Baseline };

    Kind kind = Kind::Linear;
    LinearParams linear;
    NeuralParams neural;
    BaselineRules rules;
    GenderSpec gender;              // used by the baseline scorer
    TagUniverse universe;           // tag set observed at training time
    UnknownPolicy policy = UnknownPolicy::Drop;

    const SubtagVocab& vocab() const {
        return kind == Kind::Neural ? neural.vocab : linear.vocab;
    }
    double log_psi(const MorphTag& mi, const MorphTag& mj,
                   const EdgeKey& key) const;
};

// Versioned binary container; lossless round trip, loud failure on
// truncation or version mismatch.
void save_params(const ScoringModel& model, std::ostream& out);
void save_params_file(const ScoringModel& model, const std::string& path);
ScoringModel load_params(std::istream& in);
ScoringModel load_params_file(const std::string& path);

}  // namespace gmorph

#endif  // GMORPH_MODEL_HPP
