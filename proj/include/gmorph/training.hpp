#ifndef GMORPH_TRAINING_HPP
#define GMORPH_TRAINING_HPP

#include <cstdint>
#include <map>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "gmorph/inference.hpp"
#include "gmorph/model.hpp"
#include "gmorph/treebank.hpp"

namespace gmorph {

struct TrainConfig {
    double learning_rate = 0.005;
    double weight_decay = 0.0001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double stop_delta_bits = 1e-5;
    int max_epochs = 100;
    int batch_size = 32;
    std::uint64_t seed = 1;

    void validate() const;
};

// Shares one log-psi table (and its exp form) per edge key across all the
// sentences scored against a fixed parameter state. Domains are the full
// tag universe at every position.
class TablePool {
  public:
    TablePool(const ScoringModel& model, const TagUniverse& universe);

    // Invalidate after a parameter update.
    void clear() { tables_.clear(); }

    struct Entry {
        std::shared_ptr<const std::vector<double>> log_psi;
        std::shared_ptr<const std::vector<double>> lin_psi;
        double log_max = 0.0;
    };
    const Entry& get(const EdgeKey& key);

    // Active vocabulary coordinates per universe tag id.
    const std::vector<std::vector<int>>& coords() const { return coords_; }

  private:
    const ScoringModel& model_;
    const TagUniverse& universe_;
    std::vector<std::vector<int>> coords_;
    std::map<EdgeKey, Entry> tables_;
};

// Builds the training-time factor graph for a sentence: every position's
// domain is the full universe, all unaries Free. Throws DataError (naming
// the position) if an observed tag is outside the universe.
FactorGraphInstance build_training_instance(const DepSentence& sentence,
                                            const TagUniverse& universe,
                                            TablePool& pool,
                                            std::vector<int>* observed_ids);

// Negative log-likelihood of the observed tags, in bits.
double nll_bits(const DepSentence& sentence, const ScoringModel& model,
                const TagUniverse& universe);
// Pooled variant; the pool already carries the scoring model.
double nll_bits(const DepSentence& sentence, const TagUniverse& universe,
                TablePool& pool);

// Gradients: expected minus observed feature counts, summed over the batch,
// plus weight_decay * parameter. Returned alongside the batch NLL in nats.
struct LinearGradResult {
    double nll_nats = 0.0;
    std::map<EdgeKey, std::vector<double>> grad;  // same shapes as weights
};
LinearGradResult grad_linear(std::span<const DepSentence> batch,
                             const LinearParams& params,
                             const TagUniverse& universe, double weight_decay);
// In-place variant used by the trainer (model.kind must be Linear).
LinearGradResult grad_linear_model(std::span<const DepSentence> batch,
                                   const ScoringModel& model,
                                   const TagUniverse& universe,
                                   double weight_decay);

struct NeuralGradResult {
    double nll_nats = 0.0;
    std::vector<double> dU;
    std::vector<double> dV;
    std::map<std::string, std::vector<double>> dpos;
    std::map<std::string, std::vector<double>> dlabel;
};
NeuralGradResult grad_neural(std::span<const DepSentence> batch,
                             const NeuralParams& params,
                             const TagUniverse& universe, double weight_decay);
NeuralGradResult grad_neural_model(std::span<const DepSentence> batch,
                                   const ScoringModel& model,
                                   const TagUniverse& universe,
                                   double weight_decay);

// Adam optimizer state over a set of named flat buffers.
class AdamState {
  public:
    void register_buffer(const std::string& name, std::size_t size);
    // One Adam step on `param` using `grad`; `t` is the 1-based step count.
    void update(const std::string& name, double* param, const double* grad,
                std::size_t n, const TrainConfig& cfg, long t);

  private:
    std::map<std::string, std::pair<std::vector<double>, std::vector<double>>>
        moments_;
};

struct EpochStats {
    int epoch = 0;
    double train_bits = 0.0;
    double dev_bits = 0.0;
};

struct TrainResult {
    ScoringModel model;
    std::vector<EpochStats> history;
    double best_dev_bits = 0.0;
    long steps = 0;
};

// Fits a linear or neural model by mini-batch Adam on the NLL; stops when
// the absolute change in mean dev loss falls below stop_delta_bits, or at
// max_epochs. Fixed seed implies a bit-reproducible run.
TrainResult train(std::span<const DepSentence> train_set,
                  std::span<const DepSentence> dev_set,
                  const TrainConfig& config, ScoringModel::Kind kind,
                  const GenderSpec& gender,
                  std::vector<std::string>* warnings = nullptr);

// Portable deterministic helpers (exact output is part of the determinism
// contract, so no implementation-defined std distributions).
double uniform_real(std::mt19937_64& rng, double lo, double hi);
void shuffle_indices(std::vector<int>& idx, std::mt19937_64& rng);

}  // namespace gmorph

#endif  // GMORPH_TRAINING_HPP
