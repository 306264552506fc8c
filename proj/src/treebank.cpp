#include "gmorph/treebank.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

#include "gmorph/error.hpp"

namespace gmorph {

int DepSentence::root() const {
    for (const Token& t : tokens)
        if (t.head == 0) return t.index;
    throw ValidationError("sentence has no root", id);
}

void validate_sentence(const DepSentence& sentence) {
    const int n = sentence.size();
    if (n == 0) throw ValidationError("empty sentence", sentence.id);
    int roots = 0;
    for (const Token& t : sentence.tokens) {
        if (t.index < 1 || t.index > n)
            throw ValidationError("token index out of range", sentence.id);
        if (t.head < 0 || t.head > n)
            throw ValidationError("head out of range at position " +
                                      std::to_string(t.index),
                                  sentence.id);
        if (t.head == t.index)
            throw ValidationError("token is its own head at position " +
                                      std::to_string(t.index),
                                  sentence.id);
        if (t.head == 0) ++roots;
    }
    if (roots != 1)
        throw ValidationError("expected exactly one root, found " +
                                  std::to_string(roots),
                              sentence.id);
    // Cycle check: walk each node toward the root; a tree reaches it in
    // at most n steps.
    for (const Token& t : sentence.tokens) {
        int cur = t.index;
        int steps = 0;
        while (cur != 0) {
            cur = sentence.at(cur).head;
            if (++steps > n)
                throw ValidationError("cycle in head relation involving position " +
                                          std::to_string(t.index),
                                      sentence.id);
        }
    }
}

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
        std::size_t tab = line.find('\t', start);
        if (tab == std::string::npos) {
            fields.push_back(line.substr(start));
            break;
        }
        fields.push_back(line.substr(start, tab - start));
        start = tab + 1;
    }
    return fields;
}

bool plain_integer(const std::string& s) {
    if (s.empty()) return false;
    for (char c : s)
        if (c < '0' || c > '9') return false;
    return true;
}

std::string sent_id_from_comments(const std::vector<std::string>& comments,
                                  long fallback_ordinal) {
    for (const std::string& c : comments) {
        std::size_t pos = c.find("sent_id");
        if (pos == std::string::npos) continue;
        std::size_t eq = c.find('=', pos);
        if (eq == std::string::npos) continue;
        std::size_t b = eq + 1;
        while (b < c.size() && c[b] == ' ') ++b;
        std::size_t e = c.size();
        while (e > b && (c[e - 1] == ' ' || c[e - 1] == '\r')) --e;
        if (e > b) return c.substr(b, e - b);
    }
    return "s" + std::to_string(fallback_ordinal);
}

}  // namespace

std::vector<DepSentence> parse_conllu(std::istream& in,
                                      std::vector<std::string>* warnings) {
    std::vector<DepSentence> sentences;
    DepSentence current;
    long line_number = 0;
    long ordinal = 1;
    std::string line;
    bool in_sentence = false;

    auto flush = [&]() {
        if (!in_sentence) return;
        current.id = sent_id_from_comments(current.comments, ordinal);
        try {
            validate_sentence(current);
            sentences.push_back(std::move(current));
        } catch (const ValidationError& e) {
            if (warnings)
                warnings->push_back(std::string("skipped sentence: ") +
                                    e.what());
        }
        current = DepSentence{};
        in_sentence = false;
        ++ordinal;
    };

    while (std::getline(in, line)) {
        ++line_number;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) {
            flush();
            continue;
        }
        if (line[0] == '#') {
            current.comments.push_back(line);
            in_sentence = true;
            continue;
        }
        std::vector<std::string> f = split_tabs(line);
        if (f.size() != 10)
            throw ParseError("expected 10 tab-separated columns, got " +
                                 std::to_string(f.size()),
                             line_number);
        in_sentence = true;
        // Multiword-token ranges (e.g. "3-4") and empty nodes ("3.1") are
        // not part of the dependency tree.
        if (!plain_integer(f[0])) continue;

        Token tok;
        tok.index = std::stoi(f[0]);
        tok.form = f[1];
        tok.lemma = f[2];
        tok.upos = f[3];
        tok.xpos = f[4];
        try {
            tok.tag = MorphTag::parse(f[5]);
        } catch (const DataError& e) {
            throw ParseError(e.what(), line_number);
        }
        if (f[6] == "_") {
            // A missing head is tolerated only on nodes we would skip; for a
            // syntactic word it breaks the tree and is caught by validation.
            tok.head = -1;
        } else if (plain_integer(f[6])) {
            tok.head = std::stoi(f[6]);
        } else {
            throw ParseError("malformed HEAD field '" + f[6] + "'",
                             line_number);
        }
        tok.deprel = f[7];
        tok.deps = f[8];
        tok.misc = f[9];
        current.tokens.push_back(std::move(tok));
    }
    flush();
    return sentences;
}

std::vector<DepSentence> parse_conllu_file(const std::string& path,
                                           std::vector<std::string>* warnings) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open treebank file: " + path);
    return parse_conllu(in, warnings);
}

void serialize_conllu(std::span<const DepSentence> sentences,
                      std::ostream& out) {
    for (const DepSentence& s : sentences) {
        for (const std::string& c : s.comments) out << c << '\n';
        for (const Token& t : s.tokens) {
            out << t.index << '\t' << t.form << '\t' << t.lemma << '\t'
                << t.upos << '\t' << t.xpos << '\t' << t.tag.to_string()
                << '\t' << t.head << '\t' << t.deprel << '\t' << t.deps
                << '\t' << t.misc << '\n';
        }
        out << '\n';
    }
}

void write_conllu_file(std::span<const DepSentence> sentences,
                       const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write file: " + path);
    serialize_conllu(sentences, out);
}

SubtagVocab build_subtag_vocab(std::span<const DepSentence> sentences) {
    std::set<Subtag> seen;
    for (const DepSentence& s : sentences)
        for (const Token& t : s.tokens)
            for (const Subtag& st : t.tag.subtags()) seen.insert(st);
    return SubtagVocab(std::vector<Subtag>(seen.begin(), seen.end()));
}

TagDomainTable gender_tag_domains(const DepSentence& sentence,
                                  const GenderSpec& gender) {
    TagDomainTable table(sentence.size());
    for (const Token& t : sentence.tokens) {
        std::vector<MorphTag>& domain = table[t.index - 1];
        domain.push_back(t.tag);
        std::optional<std::string> g = t.tag.value_of(gender.feature);
        if (g == gender.masc)
            domain.push_back(t.tag.with_value(gender.feature, gender.fem));
        else if (g == gender.fem)
            domain.push_back(t.tag.with_value(gender.feature, gender.masc));
    }
    return table;
}

TagUniverse::TagUniverse(std::span<const DepSentence> sentences) {
    std::set<std::string> seen;
    for (const DepSentence& s : sentences) {
        for (const Token& t : s.tokens) {
            std::string key = t.tag.to_string();
            if (seen.insert(key).second) tags_.push_back(t.tag);
        }
    }
    std::sort(tags_.begin(), tags_.end(),
              [](const MorphTag& a, const MorphTag& b) {
                  return a.to_string() < b.to_string();
              });
    build_index();
}

TagUniverse::TagUniverse(std::vector<MorphTag> tags) : tags_(std::move(tags)) {
    build_index();
}

void TagUniverse::build_index() {
    for (std::size_t i = 0; i < tags_.size(); ++i)
        index_[tags_[i].to_string()] = static_cast<int>(i);
}

int TagUniverse::id_of(const MorphTag& tag) const {
    auto it = index_.find(tag.to_string());
    return it == index_.end() ? -1 : it->second;
}

}  // namespace gmorph
