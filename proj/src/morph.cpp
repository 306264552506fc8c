#include "gmorph/morph.hpp"

#include <algorithm>
#include <cctype>

#include "gmorph/error.hpp"

namespace gmorph {

namespace {

int ci_compare(const std::string& a, const std::string& b) {
    std::size_t n = std::min(a.size(), b.size());
    for (std::size_t i = 0; i < n; ++i) {
        int ca = std::tolower(static_cast<unsigned char>(a[i]));
        int cb = std::tolower(static_cast<unsigned char>(b[i]));
        if (ca != cb) return ca < cb ? -1 : 1;
    }
    if (a.size() != b.size()) return a.size() < b.size() ? -1 : 1;
    return 0;
}

// Canonical FEATS order: alphabetical by feature, case-insensitive first
// (the UD convention), byte order as tiebreak.
bool feats_less(const Subtag& a, const Subtag& b) {
    int c = ci_compare(a.feature, b.feature);
    if (c != 0) return c < 0;
    if (a.feature != b.feature) return a.feature < b.feature;
    return a.value < b.value;
}

}  // namespace

MorphTag::MorphTag(std::vector<Subtag> subtags) : subtags_(std::move(subtags)) {
    for (const Subtag& s : subtags_) {
        if (s.feature.empty() || s.value.empty())
            throw DataError("subtag with empty feature or value");
    }
    std::sort(subtags_.begin(), subtags_.end(), feats_less);
    for (std::size_t i = 1; i < subtags_.size(); ++i) {
        if (subtags_[i].feature == subtags_[i - 1].feature)
            throw DataError("duplicate feature in tag: " + subtags_[i].feature);
    }
}

MorphTag MorphTag::parse(std::string_view feats) {
    if (feats.empty() || feats == "_") return MorphTag{};
    std::vector<Subtag> subtags;
    std::size_t start = 0;
    while (start <= feats.size()) {
        std::size_t bar = feats.find('|', start);
        std::string_view item = feats.substr(
            start, bar == std::string_view::npos ? feats.size() - start
                                                 : bar - start);
        std::size_t eq = item.find('=');
        if (eq == std::string_view::npos || eq == 0 || eq + 1 == item.size())
            throw DataError("malformed FEATS item: '" + std::string(item) +
                            "'");
        subtags.push_back(Subtag{std::string(item.substr(0, eq)),
                                 std::string(item.substr(eq + 1))});
        if (bar == std::string_view::npos) break;
        start = bar + 1;
    }
    return MorphTag(std::move(subtags));
}

bool MorphTag::contains(const Subtag& s) const {
    return std::find(subtags_.begin(), subtags_.end(), s) != subtags_.end();
}

std::optional<std::string> MorphTag::value_of(std::string_view feature) const {
    for (const Subtag& s : subtags_)
        if (s.feature == feature) return s.value;
    return std::nullopt;
}

MorphTag MorphTag::with_value(std::string_view feature,
                              std::string_view value) const {
    std::vector<Subtag> subtags;
    subtags.reserve(subtags_.size() + 1);
    for (const Subtag& s : subtags_)
        if (s.feature != feature) subtags.push_back(s);
    subtags.push_back(Subtag{std::string(feature), std::string(value)});
    return MorphTag(std::move(subtags));
}

MorphTag MorphTag::without(std::string_view feature) const {
    std::vector<Subtag> subtags;
    for (const Subtag& s : subtags_)
        if (s.feature != feature) subtags.push_back(s);
    return MorphTag(std::move(subtags));
}

std::string MorphTag::to_string() const {
    if (subtags_.empty()) return "_";
    std::string out;
    for (std::size_t i = 0; i < subtags_.size(); ++i) {
        if (i) out += '|';
        out += subtags_[i].feature;
        out += '=';
        out += subtags_[i].value;
    }
    return out;
}

SubtagVocab::SubtagVocab(std::vector<Subtag> subtags)
    : subtags_(std::move(subtags)) {
    std::sort(subtags_.begin(), subtags_.end());
    subtags_.erase(std::unique(subtags_.begin(), subtags_.end()),
                   subtags_.end());
    for (std::size_t i = 0; i < subtags_.size(); ++i)
        index_[subtags_[i].feature + "=" + subtags_[i].value] =
            static_cast<int>(i);
}

std::optional<int> SubtagVocab::index_of(const Subtag& s) const {
    auto it = index_.find(s.feature + "=" + s.value);
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

std::vector<int> active_coords(const MorphTag& tag, const SubtagVocab& vocab,
                               UnknownPolicy policy) {
    std::vector<int> coords;
    coords.reserve(tag.size());
    for (const Subtag& s : tag.subtags()) {
        std::optional<int> idx = vocab.index_of(s);
        if (!idx) {
            if (policy == UnknownPolicy::Strict)
                throw DataError("unknown subtag: " + s.feature + "=" + s.value);
            continue;
        }
        coords.push_back(*idx);
    }
    std::sort(coords.begin(), coords.end());
    return coords;
}

std::vector<std::uint8_t> multi_hot(const MorphTag& tag,
                                    const SubtagVocab& vocab,
                                    UnknownPolicy policy) {
    std::vector<std::uint8_t> vec(vocab.c(), 0);
    for (int idx : active_coords(tag, vocab, policy)) vec[idx] = 1;
    return vec;
}

bool GenderSpec::has_gender(const MorphTag& tag) const {
    return tag.value_of(feature).has_value();
}

bool GenderSpec::is_masc(const MorphTag& tag) const {
    return tag.value_of(feature) == masc;
}

bool GenderSpec::is_fem(const MorphTag& tag) const {
    return tag.value_of(feature) == fem;
}

}  // namespace gmorph
