#include "gmorph/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "gmorph/error.hpp"

namespace gmorph {

const std::vector<double>& NeuralParams::pos_vec(const std::string& id) const {
    auto it = pos_embed.find(id);
    if (it != pos_embed.end()) return it->second;
    it = pos_embed.find(kUnk);
    if (it == pos_embed.end())
        throw ConfigError("neural model has no <unk> POS embedding");
    return it->second;
}

const std::vector<double>& NeuralParams::label_vec(
    const std::string& id) const {
    auto it = label_embed.find(id);
    if (it != label_embed.end()) return it->second;
    it = label_embed.find(kUnk);
    if (it == label_embed.end())
        throw ConfigError("neural model has no <unk> label embedding");
    return it->second;
}

bool BaselineRules::matches(const EdgeKey& key) const {
    for (const Pattern& p : activated) {
        if (p.child_pos == key.child_pos && p.head_pos == key.head_pos &&
            (p.label == "*" || p.label == key.label))
            return true;
    }
    return false;
}

BaselineRules BaselineRules::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open baseline rules file: " + path);
    BaselineRules rules;
    std::string line;
    long line_number = 0;
    while (std::getline(in, line)) {
        ++line_number;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ss(line);
        Pattern p;
        if (!(ss >> p.child_pos >> p.head_pos >> p.label))
            throw ConfigError("malformed baseline rule at line " +
                              std::to_string(line_number) + ": '" + line + "'");
        rules.activated.push_back(std::move(p));
    }
    return rules;
}

double phi(const MorphTag& m, const UnaryConstraints::Entry& entry) {
    return std::exp(log_phi(m, entry));
}

double log_phi(const MorphTag& m, const UnaryConstraints::Entry& entry) {
    if (std::holds_alternative<UnaryConstraints::Free>(entry)) return 0.0;
    if (const auto* p = std::get_if<UnaryConstraints::Prefer>(&entry))
        return m == p->tag ? std::log(p->alpha) : 0.0;
    const auto& c = std::get<UnaryConstraints::Clamp>(entry);
    return m == c.tag ? 0.0
                      : -std::numeric_limits<double>::infinity();
}

double log_psi_linear(const MorphTag& mi, const MorphTag& mj,
                      const EdgeKey& key, const LinearParams& params,
                      UnknownPolicy policy) {
    const std::vector<double>* W = params.find(key);
    if (W == nullptr) return 0.0;  // unseen key: zero matrix
    const int c = params.vocab.c();
    double s = 0.0;
    for (int x : active_coords(mi, params.vocab, policy))
        for (int y : active_coords(mj, params.vocab, policy))
            s += (*W)[static_cast<std::size_t>(x) * c + y];
    return s;
}

double psi_linear(const MorphTag& mi, const MorphTag& mj, const EdgeKey& key,
                  const LinearParams& params, UnknownPolicy policy) {
    return std::exp(log_psi_linear(mi, mj, key, params, policy));
}

std::vector<double> neural_W(const EdgeKey& key, const NeuralParams& params) {
    const int c = params.vocab.c();
    const int n1 = params.n1;
    const int n2 = params.n2;
    const std::vector<double>& ei = params.pos_vec(key.child_pos);
    const std::vector<double>& ej = params.pos_vec(key.head_pos);
    const std::vector<double>& el = params.label_vec(key.label);
    if (static_cast<int>(ei.size()) != n2 ||
        static_cast<int>(ej.size()) != n2 ||
        static_cast<int>(el.size()) != n2)
        throw ConfigError("embedding dimension mismatch (expected n2=" +
                          std::to_string(n2) + ")");
    if (static_cast<int>(params.V.size()) != n1 * 3 * n2)
        throw ConfigError("V dimension mismatch");
    if (static_cast<int>(params.U.size()) !=
        static_cast<long>(c) * c * n1)
        throw ConfigError("U dimension mismatch");

    std::vector<double> x(3 * n2);
    std::copy(ei.begin(), ei.end(), x.begin());
    std::copy(ej.begin(), ej.end(), x.begin() + n2);
    std::copy(el.begin(), el.end(), x.begin() + 2 * n2);

    std::vector<double> h(n1);
    for (int k = 0; k < n1; ++k) {
        double z = 0.0;
        for (int t = 0; t < 3 * n2; ++t) z += params.V[k * 3 * n2 + t] * x[t];
        h[k] = std::tanh(z);
    }

    std::vector<double> W(static_cast<std::size_t>(c) * c);
    for (std::size_t cell = 0; cell < W.size(); ++cell) {
        const double* u = params.U.data() + cell * n1;
        double z = 0.0;
        for (int k = 0; k < n1; ++k) z += u[k] * h[k];
        W[cell] = std::exp(z);
    }
    return W;
}

double log_psi_neural(const MorphTag& mi, const MorphTag& mj,
                      const EdgeKey& key, const NeuralParams& params,
                      UnknownPolicy policy) {
    std::vector<double> W = neural_W(key, params);
    const int c = params.vocab.c();
    double s = 0.0;
    for (int x : active_coords(mi, params.vocab, policy))
        for (int y : active_coords(mj, params.vocab, policy))
            s += W[static_cast<std::size_t>(x) * c + y];
    return s;
}

double psi_neural(const MorphTag& mi, const MorphTag& mj, const EdgeKey& key,
                  const NeuralParams& params, UnknownPolicy policy) {
    return std::exp(log_psi_neural(mi, mj, key, params, policy));
}

double log_psi_baseline(const MorphTag& mi, const MorphTag& mj,
                        const EdgeKey& key, const BaselineRules& rules,
                        const GenderSpec& gender) {
    if (!rules.matches(key)) return 0.0;
    int agree = 0;
    for (const Subtag& s : mi.subtags()) {
        if (s.feature != gender.feature && s.feature != gender.number_feature)
            continue;
        if (mj.contains(s)) ++agree;
    }
    return static_cast<double>(agree);
}

double psi_baseline(const MorphTag& mi, const MorphTag& mj, const EdgeKey& key,
                    const BaselineRules& rules, const GenderSpec& gender) {
    return std::exp(log_psi_baseline(mi, mj, key, rules, gender));
}

double ScoringModel::log_psi(const MorphTag& mi, const MorphTag& mj,
                             const EdgeKey& key) const {
    switch (kind) {
        case Kind::Linear:
            return log_psi_linear(mi, mj, key, linear, policy);
        case Kind::Neural:
            return log_psi_neural(mi, mj, key, neural, policy);
        case Kind::Baseline:
            return log_psi_baseline(mi, mj, key, rules, gender);
    }
    throw std::logic_error("unreachable");
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'G', 'M', 'R', 'F'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ostream& out, std::uint32_t v) {
    char b[4];
    std::memcpy(b, &v, 4);
    out.write(b, 4);
}

void put_u64(std::ostream& out, std::uint64_t v) {
    char b[8];
    std::memcpy(b, &v, 8);
    out.write(b, 8);
}

void put_str(std::ostream& out, const std::string& s) {
    put_u64(out, s.size());
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

void put_doubles(std::ostream& out, const std::vector<double>& v) {
    put_u64(out, v.size());
    out.write(reinterpret_cast<const char*>(v.data()),
              static_cast<std::streamsize>(v.size() * sizeof(double)));
}

std::uint32_t get_u32(std::istream& in) {
    char b[4];
    if (!in.read(b, 4)) throw DataError("truncated model file");
    std::uint32_t v;
    std::memcpy(&v, b, 4);
    return v;
}

std::uint64_t get_u64(std::istream& in) {
    char b[8];
    if (!in.read(b, 8)) throw DataError("truncated model file");
    std::uint64_t v;
    std::memcpy(&v, b, 8);
    return v;
}

std::string get_str(std::istream& in) {
    std::uint64_t n = get_u64(in);
    if (n > (1ull << 32)) throw DataError("corrupt model file (string size)");
    std::string s(n, '\0');
    if (n && !in.read(s.data(), static_cast<std::streamsize>(n)))
        throw DataError("truncated model file");
    return s;
}

std::vector<double> get_doubles(std::istream& in) {
    std::uint64_t n = get_u64(in);
    if (n > (1ull << 32)) throw DataError("corrupt model file (array size)");
    std::vector<double> v(n);
    if (n && !in.read(reinterpret_cast<char*>(v.data()),
                      static_cast<std::streamsize>(n * sizeof(double))))
        throw DataError("truncated model file");
    return v;
}

void put_vocab(std::ostream& out, const SubtagVocab& vocab) {
    put_u64(out, vocab.subtags().size());
    for (const Subtag& s : vocab.subtags()) {
        put_str(out, s.feature);
        put_str(out, s.value);
    }
}

SubtagVocab get_vocab(std::istream& in) {
    std::uint64_t n = get_u64(in);
    std::vector<Subtag> subtags;
    subtags.reserve(n);
    for (std::uint64_t i = 0; i < n; ++i) {
        Subtag s;
        s.feature = get_str(in);
        s.value = get_str(in);
        subtags.push_back(std::move(s));
    }
    return SubtagVocab(std::move(subtags));
}

void put_embed(std::ostream& out,
               const std::map<std::string, std::vector<double>>& embed) {
    put_u64(out, embed.size());
    for (const auto& [id, vec] : embed) {
        put_str(out, id);
        put_doubles(out, vec);
    }
}

std::map<std::string, std::vector<double>> get_embed(std::istream& in) {
    std::map<std::string, std::vector<double>> embed;
    std::uint64_t n = get_u64(in);
    for (std::uint64_t i = 0; i < n; ++i) {
        std::string id = get_str(in);
        embed[id] = get_doubles(in);
    }
    return embed;
}

}  // namespace

void save_params(const ScoringModel& model, std::ostream& out) {
    out.write(kMagic, 4);
    put_u32(out, kVersion);
    put_u32(out, static_cast<std::uint32_t>(model.kind));
    put_str(out, model.gender.feature);
    put_str(out, model.gender.masc);
    put_str(out, model.gender.fem);
    put_str(out, model.gender.number_feature);
    put_u32(out, model.policy == UnknownPolicy::Drop ? 1 : 0);

    put_u64(out, model.universe.tags().size());
    for (const MorphTag& t : model.universe.tags()) put_str(out, t.to_string());

    switch (model.kind) {
        case ScoringModel::Kind::Linear: {
            put_vocab(out, model.linear.vocab);
            put_u64(out, model.linear.weights.size());
            for (const auto& [key, W] : model.linear.weights) {
                put_str(out, key.child_pos);
                put_str(out, key.head_pos);
                put_str(out, key.label);
                put_doubles(out, W);
            }
            break;
        }
        case ScoringModel::Kind::Neural: {
            put_vocab(out, model.neural.vocab);
            put_u32(out, static_cast<std::uint32_t>(model.neural.n1));
            put_u32(out, static_cast<std::uint32_t>(model.neural.n2));
            put_doubles(out, model.neural.U);
            put_doubles(out, model.neural.V);
            put_embed(out, model.neural.pos_embed);
            put_embed(out, model.neural.label_embed);
            break;
        }
        case ScoringModel::Kind::Baseline: {
            put_u64(out, model.rules.activated.size());
            for (const auto& p : model.rules.activated) {
                put_str(out, p.child_pos);
                put_str(out, p.head_pos);
                put_str(out, p.label);
            }
            break;
        }
    }
    if (!out) throw DataError("model write failed");
}

ScoringModel load_params(std::istream& in) {
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
        throw DataError("not a model file (bad magic)");
    std::uint32_t version = get_u32(in);
    if (version != kVersion)
        throw DataError("unsupported model file version " +
                        std::to_string(version) + " (expected " +
                        std::to_string(kVersion) + ")");

    ScoringModel model;
    std::uint32_t kind = get_u32(in);
    if (kind > 2) throw DataError("corrupt model file (kind)");
    model.kind = static_cast<ScoringModel::Kind>(kind);
    model.gender.feature = get_str(in);
    model.gender.masc = get_str(in);
    model.gender.fem = get_str(in);
    model.gender.number_feature = get_str(in);
    model.policy = get_u32(in) ? UnknownPolicy::Drop : UnknownPolicy::Strict;

    std::uint64_t ntags = get_u64(in);
    std::vector<MorphTag> tags;
    tags.reserve(ntags);
    for (std::uint64_t i = 0; i < ntags; ++i)
        tags.push_back(MorphTag::parse(get_str(in)));
    model.universe = TagUniverse(std::move(tags));

    switch (model.kind) {
        case ScoringModel::Kind::Linear: {
            model.linear.vocab = get_vocab(in);
            const std::size_t cc =
                static_cast<std::size_t>(model.linear.vocab.c()) *
                model.linear.vocab.c();
            std::uint64_t nkeys = get_u64(in);
            for (std::uint64_t i = 0; i < nkeys; ++i) {
                EdgeKey key;
                key.child_pos = get_str(in);
                key.head_pos = get_str(in);
                key.label = get_str(in);
                std::vector<double> W = get_doubles(in);
                if (W.size() != cc)
                    throw DataError("corrupt model file (weight shape)");
                model.linear.weights.emplace(std::move(key), std::move(W));
            }
            break;
        }
        case ScoringModel::Kind::Neural: {
            model.neural.vocab = get_vocab(in);
            model.neural.n1 = static_cast<int>(get_u32(in));
            model.neural.n2 = static_cast<int>(get_u32(in));
            model.neural.U = get_doubles(in);
            model.neural.V = get_doubles(in);
            model.neural.pos_embed = get_embed(in);
            model.neural.label_embed = get_embed(in);
            const std::size_t c = model.neural.vocab.c();
            if (model.neural.U.size() != c * c * model.neural.n1 ||
                static_cast<int>(model.neural.V.size()) !=
                    model.neural.n1 * 3 * model.neural.n2)
                throw DataError("corrupt model file (tensor shape)");
            break;
        }
        case ScoringModel::Kind::Baseline: {
            std::uint64_t n = get_u64(in);
            for (std::uint64_t i = 0; i < n; ++i) {
                BaselineRules::Pattern p;
                p.child_pos = get_str(in);
                p.head_pos = get_str(in);
                p.label = get_str(in);
                model.rules.activated.push_back(std::move(p));
            }
            break;
        }
    }
    return model;
}

void save_params_file(const ScoringModel& model, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write model file: " + path);
    save_params(model, out);
}

ScoringModel load_params_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open model file: " + path);
    return load_params(in);
}

}  // namespace gmorph
