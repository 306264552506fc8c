#ifndef GMORPH_MORPH_HPP
#define GMORPH_MORPH_HPP

#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace gmorph {

// One atomic feature=value pair, e.g. Gender=Masc. Comparison is
// case-sensitive on both fields.
struct Subtag {
    std::string feature;
    std::string value;

    bool operator==(const Subtag&) const = default;
    bool operator<(const Subtag& o) const {
        return feature != o.feature ? feature < o.feature : value < o.value;
    }
};

// A bundle of subtags with at most one subtag per feature. The empty tag is
// valid. Subtags are kept in canonical order (case-insensitive by feature,
// byte order as tiebreak), which also fixes the FEATS serialization.
class MorphTag {
  public:
    MorphTag() = default;
    explicit MorphTag(std::vector<Subtag> subtags);

    // Parses a FEATS field ("A=B|C=D", or "_"/"" for the empty tag).
    static MorphTag parse(std::string_view feats);

    bool empty() const { return subtags_.empty(); }
    std::size_t size() const { return subtags_.size(); }
    const std::vector<Subtag>& subtags() const { return subtags_; }

    bool contains(const Subtag& s) const;
    std::optional<std::string> value_of(std::string_view feature) const;

    // Returns a copy with the given feature set to value (replacing any
    // existing subtag of that feature).
    MorphTag with_value(std::string_view feature, std::string_view value) const;
    // Returns a copy without the given feature.
    MorphTag without(std::string_view feature) const;

    // Canonical "A=B|C=D" form; "_" for the empty tag.
    std::string to_string() const;

    bool operator==(const MorphTag&) const = default;

  private:
    std::vector<Subtag> subtags_;
};

// How to treat subtags absent from a trained vocabulary.
enum class UnknownPolicy { Strict, Drop };

// Ordered list of the distinct subtags of a corpus; fixes the coordinate
// system of the multi-hot encodings. Order is (feature, value) byte order.
class SubtagVocab {
  public:
    SubtagVocab() = default;
    explicit SubtagVocab(std::vector<Subtag> subtags);

    int c() const { return static_cast<int>(subtags_.size()); }
    const std::vector<Subtag>& subtags() const { return subtags_; }
    std::optional<int> index_of(const Subtag& s) const;

    bool operator==(const SubtagVocab& o) const {
        return subtags_ == o.subtags_;
    }

  private:
    std::vector<Subtag> subtags_;
    std::unordered_map<std::string, int> index_;
};

// Multi-hot encoding of a tag under a vocabulary. Throws DataError on an
// unknown subtag under Strict; drops it under Drop.
std::vector<std::uint8_t> multi_hot(const MorphTag& tag,
                                    const SubtagVocab& vocab,
                                    UnknownPolicy policy = UnknownPolicy::Strict);

// The sorted coordinate list of the encoding (what the inner loops use).
std::vector<int> active_coords(const MorphTag& tag, const SubtagVocab& vocab,
                               UnknownPolicy policy = UnknownPolicy::Strict);

// Language-level gender configuration; UD languages differ in the feature
// name and value spellings.
struct GenderSpec {
    std::string feature = "Gender";
    std::string masc = "Masc";
    std::string fem = "Fem";
    std::string number_feature = "Number";

    bool has_gender(const MorphTag& tag) const;
    bool is_masc(const MorphTag& tag) const;
    bool is_fem(const MorphTag& tag) const;
};

}  // namespace gmorph

#endif  // GMORPH_MORPH_HPP
