#ifndef GMORPH_TREEBANK_HPP
#define GMORPH_TREEBANK_HPP

#include <iosfwd>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "gmorph/morph.hpp"

namespace gmorph {

// One syntactic word of a dependency tree. head == 0 denotes ROOT.
// xpos/deps/misc are carried through unmodeled for round-tripping.
struct Token {
    int index = 0;  // 1-based
    std::string form;
    std::string lemma;
    std::string upos;
    MorphTag tag;
    int head = 0;
    std::string deprel;
    std::string xpos = "_";
    std::string deps = "_";
    std::string misc = "_";
};

struct DepSentence {
    std::string id;
    std::vector<Token> tokens;
    std::vector<std::string> comments;  // leading '#' lines, verbatim

    int size() const { return static_cast<int>(tokens.size()); }
    const Token& at(int position) const { return tokens[position - 1]; }
    Token& at(int position) { return tokens[position - 1]; }
    // 1-based position of the root token.
    int root() const;
};

// Throws ValidationError if the head relation is not a single-rooted tree
// over in-range positions.
void validate_sentence(const DepSentence& sentence);

// Parses CoNLL-U text. Multiword-token ranges and empty nodes are skipped.
// Malformed lines raise ParseError (with line number); sentences failing the
// tree invariants are skipped and reported through `warnings`.
std::vector<DepSentence> parse_conllu(std::istream& in,
                                      std::vector<std::string>* warnings = nullptr);
std::vector<DepSentence> parse_conllu_file(const std::string& path,
                                           std::vector<std::string>* warnings = nullptr);

void serialize_conllu(std::span<const DepSentence> sentences, std::ostream& out);
void write_conllu_file(std::span<const DepSentence> sentences,
                       const std::string& path);

SubtagVocab build_subtag_vocab(std::span<const DepSentence> sentences);

// Candidate tags per position (1-based position -> non-empty list). The
// observed tag is always a member, and always first.
using TagDomainTable = std::vector<std::vector<MorphTag>>;

// Domains for a gender intervention: gendered positions get
// {original, gender-swapped original}; the rest are singletons.
TagDomainTable gender_tag_domains(const DepSentence& sentence,
                                  const GenderSpec& gender);

// The full set of distinct tags observed in a corpus, interned to dense ids.
// Training-time factor graphs use this as every position's domain.
class TagUniverse {
  public:
    TagUniverse() = default;
    explicit TagUniverse(std::span<const DepSentence> sentences);
    explicit TagUniverse(std::vector<MorphTag> tags);

    int size() const { return static_cast<int>(tags_.size()); }
    const std::vector<MorphTag>& tags() const { return tags_; }
    const MorphTag& tag(int id) const { return tags_[id]; }
    // -1 when absent.
    int id_of(const MorphTag& tag) const;

  private:
    void build_index();
    std::vector<MorphTag> tags_;
    std::unordered_map<std::string, int> index_;
};

}  // namespace gmorph

#endif  // GMORPH_TREEBANK_HPP
