#include "gmorph/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "gmorph/error.hpp"
#include "gmorph/kernels.hpp"

namespace gmorph {

namespace {
constexpr double kLn2 = 0.6931471805599453094;
}

void TrainConfig::validate() const {
    if (learning_rate <= 0 || beta1 <= 0 || beta1 >= 1 || beta2 <= 0 ||
        beta2 >= 1 || epsilon <= 0)
        throw ConfigError("invalid optimizer hyperparameters");
    if (weight_decay < 0) throw ConfigError("negative weight decay");
    if (stop_delta_bits <= 0) throw ConfigError("stop_delta_bits must be > 0");
    if (max_epochs < 0 || batch_size < 1)
        throw ConfigError("invalid epoch/batch settings");
}

double uniform_real(std::mt19937_64& rng, double lo, double hi) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    return lo + u * (hi - lo);
}

void shuffle_indices(std::vector<int>& idx, std::mt19937_64& rng) {
    for (std::size_t i = idx.size(); i > 1; --i) {
        std::size_t j = static_cast<std::size_t>(rng() % i);
        std::swap(idx[i - 1], idx[j]);
    }
}

// ---------------------------------------------------------------------------
// TablePool
// ---------------------------------------------------------------------------

TablePool::TablePool(const ScoringModel& model, const TagUniverse& universe)
    : model_(model), universe_(universe) {
    coords_.reserve(universe.size());
    for (const MorphTag& t : universe.tags())
        coords_.push_back(active_coords(t, model.vocab(), model.policy));
}

const TablePool::Entry& TablePool::get(const EdgeKey& key) {
    auto it = tables_.find(key);
    if (it != tables_.end()) return it->second;

    const auto& ker = kernels::ops();
    const int m = universe_.size();
    const int c = model_.vocab().c();
    auto log_table =
        std::make_shared<std::vector<double>>(static_cast<std::size_t>(m) * m,
                                              0.0);

    // Effective c x c weight matrix whose active-coordinate sums give the
    // log factor: W itself for the linear model, exp(U tanh(Vx)) for the
    // neural one.
    const std::vector<double>* weff = nullptr;
    std::vector<double> neural_weff;
    bool uniform = false;
    switch (model_.kind) {
        case ScoringModel::Kind::Linear:
            weff = model_.linear.find(key);
            uniform = (weff == nullptr);
            break;
        case ScoringModel::Kind::Neural:
            neural_weff = neural_W(key, model_.neural);
            weff = &neural_weff;
            break;
        case ScoringModel::Kind::Baseline:
            uniform = !model_.rules.matches(key);
            break;
    }

    if (!uniform && model_.kind != ScoringModel::Kind::Baseline) {
        // S = A * Weff * A^T through the sparse multi-hot rows.
        std::vector<double> r(static_cast<std::size_t>(m) * c, 0.0);
        for (int a = 0; a < m; ++a) {
            double* row = r.data() + static_cast<std::size_t>(a) * c;
            for (int x : coords_[a])
                ker.vadd(row, weff->data() + static_cast<std::size_t>(x) * c,
                         c);
        }
        for (int a = 0; a < m; ++a) {
            const double* row = r.data() + static_cast<std::size_t>(a) * c;
            double* out = log_table->data() + static_cast<std::size_t>(a) * m;
            for (int b = 0; b < m; ++b) {
                double s = 0.0;
                for (int y : coords_[b]) s += row[y];
                out[b] = s;
            }
        }
    } else if (!uniform) {  // activated baseline pattern
        for (int a = 0; a < m; ++a)
            for (int b = 0; b < m; ++b)
                (*log_table)[static_cast<std::size_t>(a) * m + b] =
                    log_psi_baseline(universe_.tag(a), universe_.tag(b), key,
                                     model_.rules, model_.gender);
    }

    Entry entry;
    entry.log_max = ker.vmax(log_table->data(), log_table->size());
    auto lin = std::make_shared<std::vector<double>>(log_table->size());
    ker.vexp_shift(lin->data(), log_table->data(), -entry.log_max,
                   log_table->size());
    entry.log_psi = std::move(log_table);
    entry.lin_psi = std::move(lin);
    return tables_.emplace(key, std::move(entry)).first->second;
}

// ---------------------------------------------------------------------------
// Training instances and NLL
// ---------------------------------------------------------------------------

FactorGraphInstance build_training_instance(const DepSentence& sentence,
                                            const TagUniverse& universe,
                                            TablePool& pool,
                                            std::vector<int>* observed_ids) {
    const int n = sentence.size();
    const int m = universe.size();
    if (m == 0) throw DataError("empty tag universe");

    FactorGraphInstance inst;
    inst.n = n;
    inst.root = sentence.root() - 1;
    inst.domain_size.assign(n, m);
    inst.log_phi.assign(n, std::vector<double>(m, 0.0));

    if (observed_ids) {
        observed_ids->resize(n);
        for (const Token& t : sentence.tokens) {
            int id = universe.id_of(t.tag);
            if (id < 0)
                throw DataError("observed tag " + t.tag.to_string() +
                                " at position " + std::to_string(t.index) +
                                " of sentence " + sentence.id +
                                " is outside the training tag set");
            (*observed_ids)[t.index - 1] = id;
        }
    }

    for (const Token& t : sentence.tokens) {
        if (t.head == 0) continue;
        FactorGraphInstance::Edge edge;
        edge.child = t.index - 1;
        edge.head = t.head - 1;
        EdgeKey key{t.upos, sentence.at(t.head).upos, t.deprel};
        const TablePool::Entry& entry = pool.get(key);
        edge.log_psi = entry.log_psi;
        edge.lin_psi = entry.lin_psi;
        edge.log_max = entry.log_max;
        inst.edges.push_back(std::move(edge));
    }

    inst.finalize();
    return inst;
}

namespace {

double observed_log_score(const FactorGraphInstance& inst,
                          const std::vector<int>& observed) {
    double s = 0.0;
    for (const auto& e : inst.edges)
        s += (*e.log_psi)[static_cast<std::size_t>(observed[e.child]) *
                              inst.domain_size[e.head] +
                          observed[e.head]];
    return s;
}

}  // namespace

double nll_bits(const DepSentence& sentence, const TagUniverse& universe,
                TablePool& pool) {
    std::vector<int> observed;
    FactorGraphInstance inst =
        build_training_instance(sentence, universe, pool, &observed);
    InferenceResult res = sum_product(inst);
    return (res.log_z - observed_log_score(inst, observed)) / kLn2;
}

double nll_bits(const DepSentence& sentence, const ScoringModel& model,
                const TagUniverse& universe) {
    TablePool pool(model, universe);
    return nll_bits(sentence, universe, pool);
}

// ---------------------------------------------------------------------------
// Gradients
// ---------------------------------------------------------------------------

namespace {

// Accumulates, per edge key, the c x c matrix of expected-minus-observed
// active-coordinate pair counts, together with the batch NLL.
struct PairCounts {
    double nll_nats = 0.0;
    std::map<EdgeKey, std::vector<double>> d;
};

PairCounts accumulate_pair_counts(std::span<const DepSentence> batch,
                                  const ScoringModel& model,
                                  const TagUniverse& universe,
                                  bool keys_must_exist) {
    const auto& ker = kernels::ops();
    const int m = universe.size();
    const int c = model.vocab().c();
    TablePool pool(model, universe);
    const auto& coords = pool.coords();

    PairCounts out;
    std::vector<double> tmp(static_cast<std::size_t>(c) * m);
    for (const DepSentence& sentence : batch) {
        std::vector<int> observed;
        FactorGraphInstance inst =
            build_training_instance(sentence, universe, pool, &observed);
        InferenceResult res = sum_product(inst);
        out.nll_nats += res.log_z - observed_log_score(inst, observed);

        int edge_index = -1;
        for (const Token& t : sentence.tokens) {
            if (t.head == 0) continue;
            ++edge_index;
            EdgeKey key{t.upos, sentence.at(t.head).upos, t.deprel};
            if (keys_must_exist && model.linear.find(key) == nullptr)
                continue;  // uniform factor without parameters
            auto it = out.d.find(key);
            if (it == out.d.end())
                it = out.d
                         .emplace(key, std::vector<double>(
                                           static_cast<std::size_t>(c) * c,
                                           0.0))
                         .first;
            std::vector<double>& dk = it->second;
            const std::vector<double>& P = res.edge_marginals[edge_index];

            // Expected counts: fold the m x m joint down to c x c through
            // the active coordinates of each side's tags.
            std::fill(tmp.begin(), tmp.end(), 0.0);
            for (int a = 0; a < m; ++a) {
                const double* prow = P.data() + static_cast<std::size_t>(a) * m;
                for (int x : coords[a])
                    ker.vadd(tmp.data() + static_cast<std::size_t>(x) * m,
                             prow, m);
            }
            for (int x = 0; x < c; ++x) {
                const double* trow =
                    tmp.data() + static_cast<std::size_t>(x) * m;
                double* drow = dk.data() + static_cast<std::size_t>(x) * c;
                for (int b = 0; b < m; ++b) {
                    const double val = trow[b];
                    if (val == 0.0) continue;
                    for (int y : coords[b]) drow[y] += val;
                }
            }
            // Observed counts.
            for (int x : coords[observed[t.index - 1]])
                for (int y : coords[observed[t.head - 1]])
                    dk[static_cast<std::size_t>(x) * c + y] -= 1.0;
        }
    }
    return out;
}

}  // namespace

LinearGradResult grad_linear_model(std::span<const DepSentence> batch,
                                   const ScoringModel& model,
                                   const TagUniverse& universe,
                                   double weight_decay) {
    if (model.kind != ScoringModel::Kind::Linear)
        throw ConfigError("grad_linear on a non-linear model");
    PairCounts counts = accumulate_pair_counts(batch, model, universe, true);
    LinearGradResult result;
    result.nll_nats = counts.nll_nats;
    result.grad = std::move(counts.d);
    // Weight decay over every parameter matrix, including untouched ones.
    if (weight_decay != 0.0) {
        for (const auto& [key, W] : model.linear.weights) {
            auto it = result.grad.find(key);
            if (it == result.grad.end())
                it = result.grad.emplace(key, std::vector<double>(W.size(), 0.0))
                         .first;
            kernels::ops().axpy(it->second.data(), W.data(), weight_decay,
                                W.size());
        }
    }
    return result;
}

LinearGradResult grad_linear(std::span<const DepSentence> batch,
                             const LinearParams& params,
                             const TagUniverse& universe,
                             double weight_decay) {
    ScoringModel model;
    model.kind = ScoringModel::Kind::Linear;
    model.linear = params;
    model.policy = UnknownPolicy::Strict;
    return grad_linear_model(batch, model, universe, weight_decay);
}

NeuralGradResult grad_neural_model(std::span<const DepSentence> batch,
                                   const ScoringModel& model,
                                   const TagUniverse& universe,
                                   double weight_decay) {
    if (model.kind != ScoringModel::Kind::Neural)
        throw ConfigError("grad_neural on a non-neural model");
    const NeuralParams& np = model.neural;
    const int c = np.vocab.c();
    const int n1 = np.n1;
    const int n2 = np.n2;

    PairCounts counts = accumulate_pair_counts(batch, model, universe, false);

    NeuralGradResult result;
    result.nll_nats = counts.nll_nats;
    result.dU.assign(np.U.size(), 0.0);
    result.dV.assign(np.V.size(), 0.0);
    for (const auto& [id, vec] : np.pos_embed)
        result.dpos[id].assign(vec.size(), 0.0);
    for (const auto& [id, vec] : np.label_embed)
        result.dlabel[id].assign(vec.size(), 0.0);

    auto pos_name = [&](const std::string& id) {
        return np.pos_embed.count(id) ? id : std::string(NeuralParams::kUnk);
    };
    auto label_name = [&](const std::string& id) {
        return np.label_embed.count(id) ? id : std::string(NeuralParams::kUnk);
    };

    for (const auto& [key, dW_counts] : counts.d) {
        // Recompute the forward pass for this key.
        const std::vector<double>& ei = np.pos_vec(key.child_pos);
        const std::vector<double>& ej = np.pos_vec(key.head_pos);
        const std::vector<double>& el = np.label_vec(key.label);
        std::vector<double> x(3 * n2);
        std::copy(ei.begin(), ei.end(), x.begin());
        std::copy(ej.begin(), ej.end(), x.begin() + n2);
        std::copy(el.begin(), el.end(), x.begin() + 2 * n2);
        std::vector<double> h(n1);
        for (int k = 0; k < n1; ++k) {
            double z = 0.0;
            for (int t = 0; t < 3 * n2; ++t) z += np.V[k * 3 * n2 + t] * x[t];
            h[k] = std::tanh(z);
        }

        // dL/dW[x][y] = dW_counts[x][y] * W[x][y]   (W = exp(u . h))
        std::vector<double> dh(n1, 0.0);
        for (int xi = 0; xi < c; ++xi) {
            for (int y = 0; y < c; ++y) {
                const std::size_t cell = static_cast<std::size_t>(xi) * c + y;
                const double g = dW_counts[cell];
                if (g == 0.0) continue;
                const double* u = np.U.data() + cell * n1;
                double z = 0.0;
                for (int k = 0; k < n1; ++k) z += u[k] * h[k];
                const double gw = g * std::exp(z);
                double* du = result.dU.data() + cell * n1;
                for (int k = 0; k < n1; ++k) {
                    du[k] += gw * h[k];
                    dh[k] += gw * u[k];
                }
            }
        }

        std::vector<double> dx(3 * n2, 0.0);
        for (int k = 0; k < n1; ++k) {
            const double dz = dh[k] * (1.0 - h[k] * h[k]);
            if (dz == 0.0) continue;
            for (int t = 0; t < 3 * n2; ++t) {
                result.dV[k * 3 * n2 + t] += dz * x[t];
                dx[t] += dz * np.V[k * 3 * n2 + t];
            }
        }
        std::vector<double>& gi = result.dpos[pos_name(key.child_pos)];
        std::vector<double>& gj = result.dpos[pos_name(key.head_pos)];
        std::vector<double>& gl = result.dlabel[label_name(key.label)];
        for (int t = 0; t < n2; ++t) {
            gi[t] += dx[t];
            gj[t] += dx[n2 + t];
            gl[t] += dx[2 * n2 + t];
        }
    }

    if (weight_decay != 0.0) {
        const auto& ker = kernels::ops();
        ker.axpy(result.dU.data(), np.U.data(), weight_decay, np.U.size());
        ker.axpy(result.dV.data(), np.V.data(), weight_decay, np.V.size());
        for (const auto& [id, vec] : np.pos_embed)
            ker.axpy(result.dpos[id].data(), vec.data(), weight_decay,
                     vec.size());
        for (const auto& [id, vec] : np.label_embed)
            ker.axpy(result.dlabel[id].data(), vec.data(), weight_decay,
                     vec.size());
    }
    return result;
}

NeuralGradResult grad_neural(std::span<const DepSentence> batch,
                             const NeuralParams& params,
                             const TagUniverse& universe,
                             double weight_decay) {
    ScoringModel model;
    model.kind = ScoringModel::Kind::Neural;
    model.neural = params;
    model.policy = UnknownPolicy::Strict;
    return grad_neural_model(batch, model, universe, weight_decay);
}

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

void AdamState::register_buffer(const std::string& name, std::size_t size) {
    moments_[name] = {std::vector<double>(size, 0.0),
                      std::vector<double>(size, 0.0)};
}

void AdamState::update(const std::string& name, double* param,
                       const double* grad, std::size_t n,
                       const TrainConfig& cfg, long t) {
    auto it = moments_.find(name);
    if (it == moments_.end())
        throw std::logic_error("adam buffer not registered: " + name);
    auto& [m, v] = it->second;
    if (m.size() != n) throw std::logic_error("adam buffer size mismatch");
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(grad[i]))
            throw InconsistencyError("non-finite gradient in buffer " + name +
                                     " at index " + std::to_string(i));
    }
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
    kernels::ops().adam_update(param, m.data(), v.data(), grad, n,
                               cfg.learning_rate, cfg.beta1, cfg.beta2,
                               cfg.epsilon, bc1, bc2);
}

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

namespace {

std::set<EdgeKey> collect_edge_keys(std::span<const DepSentence> sentences) {
    std::set<EdgeKey> keys;
    for (const DepSentence& s : sentences)
        for (const Token& t : s.tokens)
            if (t.head != 0)
                keys.insert(EdgeKey{t.upos, s.at(t.head).upos, t.deprel});
    return keys;
}

double mean_dev_bits(std::span<const DepSentence> dev,
                     const ScoringModel& model, const TagUniverse& universe) {
    if (dev.empty()) return 0.0;
    TablePool pool(model, universe);
    double total = 0.0;
    for (const DepSentence& s : dev) total += nll_bits(s, universe, pool);
    return total / static_cast<double>(dev.size());
}

}  // namespace

TrainResult train(std::span<const DepSentence> train_set,
                  std::span<const DepSentence> dev_set,
                  const TrainConfig& config, ScoringModel::Kind kind,
                  const GenderSpec& gender,
                  std::vector<std::string>* warnings) {
    config.validate();
    if (train_set.empty()) throw DataError("empty training set");
    if (kind == ScoringModel::Kind::Baseline)
        throw ConfigError("the baseline has no trainable parameters");

    TrainResult result;
    ScoringModel& model = result.model;
    model.kind = kind;
    model.gender = gender;
    model.policy = UnknownPolicy::Strict;
    model.universe = TagUniverse(train_set);
    SubtagVocab vocab = build_subtag_vocab(train_set);
    const int c = vocab.c();
    if (c == 0) throw DataError("training corpus has no morphological features");

    std::mt19937_64 rng(config.seed);
    AdamState adam;

    if (kind == ScoringModel::Kind::Linear) {
        model.linear.vocab = vocab;
        for (const EdgeKey& key : collect_edge_keys(train_set)) {
            model.linear.weights.emplace(
                key, std::vector<double>(static_cast<std::size_t>(c) * c, 0.0));
            adam.register_buffer("W:" + key.to_string(),
                                 static_cast<std::size_t>(c) * c);
        }
    } else {
        NeuralParams& np = model.neural;
        np.vocab = vocab;
        np.U.resize(static_cast<std::size_t>(c) * c * np.n1);
        np.V.resize(static_cast<std::size_t>(np.n1) * 3 * np.n2);
        for (double& w : np.U) w = uniform_real(rng, -0.1, 0.1);
        for (double& w : np.V) w = uniform_real(rng, -0.1, 0.1);
        std::set<std::string> pos_ids{NeuralParams::kUnk};
        std::set<std::string> label_ids{NeuralParams::kUnk};
        for (const DepSentence& s : train_set) {
            for (const Token& t : s.tokens) {
                pos_ids.insert(t.upos);
                if (t.head != 0) label_ids.insert(t.deprel);
            }
        }
        for (const std::string& id : pos_ids) {
            std::vector<double> e(np.n2);
            for (double& w : e) w = uniform_real(rng, -0.1, 0.1);
            np.pos_embed[id] = std::move(e);
        }
        for (const std::string& id : label_ids) {
            std::vector<double> e(np.n2);
            for (double& w : e) w = uniform_real(rng, -0.1, 0.1);
            np.label_embed[id] = std::move(e);
        }
        adam.register_buffer("U", np.U.size());
        adam.register_buffer("V", np.V.size());
        for (const auto& [id, vec] : np.pos_embed)
            adam.register_buffer("pos:" + id, vec.size());
        for (const auto& [id, vec] : np.label_embed)
            adam.register_buffer("label:" + id, vec.size());
    }

    // Dev sentences with tags outside the training universe cannot be
    // scored; skip them with a warning rather than aborting the run.
    std::vector<DepSentence> dev;
    dev.reserve(dev_set.size());
    for (const DepSentence& s : dev_set) {
        bool ok = true;
        for (const Token& t : s.tokens)
            if (model.universe.id_of(t.tag) < 0) {
                ok = false;
                break;
            }
        if (ok)
            dev.push_back(s);
        else if (warnings)
            warnings->push_back("dev sentence " + s.id +
                                " has tags unseen in training; skipped");
    }

    std::vector<int> order(train_set.size());
    for (std::size_t i = 0; i < order.size(); ++i)
        order[i] = static_cast<int>(i);

    double prev_dev = std::numeric_limits<double>::quiet_NaN();
    result.best_dev_bits = std::numeric_limits<double>::infinity();

    for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
        shuffle_indices(order, rng);
        double epoch_nats = 0.0;
        for (std::size_t start = 0; start < order.size();
             start += config.batch_size) {
            const std::size_t stop =
                std::min(order.size(), start + config.batch_size);
            std::vector<DepSentence> batch;
            batch.reserve(stop - start);
            for (std::size_t i = start; i < stop; ++i)
                batch.push_back(train_set[order[i]]);

            ++result.steps;
            if (kind == ScoringModel::Kind::Linear) {
                LinearGradResult g = grad_linear_model(
                    batch, model, model.universe, config.weight_decay);
                epoch_nats += g.nll_nats;
                for (auto& [key, gw] : g.grad) {
                    auto it = model.linear.weights.find(key);
                    if (it == model.linear.weights.end()) continue;
                    adam.update("W:" + key.to_string(), it->second.data(),
                                gw.data(), gw.size(), config, result.steps);
                }
            } else {
                NeuralGradResult g = grad_neural_model(
                    batch, model, model.universe, config.weight_decay);
                epoch_nats += g.nll_nats;
                NeuralParams& np = model.neural;
                adam.update("U", np.U.data(), g.dU.data(), np.U.size(), config,
                            result.steps);
                adam.update("V", np.V.data(), g.dV.data(), np.V.size(), config,
                            result.steps);
                for (auto& [id, gv] : g.dpos)
                    adam.update("pos:" + id, np.pos_embed[id].data(),
                                gv.data(), gv.size(), config, result.steps);
                for (auto& [id, gv] : g.dlabel)
                    adam.update("label:" + id, np.label_embed[id].data(),
                                gv.data(), gv.size(), config, result.steps);
            }
        }

        EpochStats stats;
        stats.epoch = epoch;
        stats.train_bits =
            epoch_nats / kLn2 / static_cast<double>(train_set.size());
        stats.dev_bits = mean_dev_bits(dev, model, model.universe);
        result.history.push_back(stats);
        if (stats.dev_bits < result.best_dev_bits)
            result.best_dev_bits = stats.dev_bits;

        if (!std::isnan(prev_dev) &&
            std::abs(stats.dev_bits - prev_dev) < config.stop_delta_bits)
            break;
        prev_dev = stats.dev_bits;
    }
    return result;
}

}  // namespace gmorph
