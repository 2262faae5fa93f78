#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "abc/params.hpp"

namespace abc {

using Symbol = uint16_t;
constexpr Symbol kSymB = 0xFFF0;
constexpr Symbol kSymE = 0xFFF1;
constexpr Symbol kSymStar = 0xFFF2;

using Word = std::vector<Symbol>;

class Alphabet {
public:
    Alphabet() = default;
    explicit Alphabet(std::vector<std::string> letters);
    static Alphabet of_size(size_t n);   // "0","1",... or "a0","a1",... beyond ten

    size_t size() const { return letters_.size(); }
    const std::vector<std::string>& letters() const { return letters_; }
    std::string name(Symbol s) const;
    Symbol parse(const std::string& tok) const;   // throws on unknown token

    std::string render(const Word& w, const std::string& sep = "") const;
    Word word(const std::string& text) const;     // whitespace-separated, or one char per letter if no spaces

private:
    std::vector<std::string> letters_;
};

struct WordFamily {
    int stage = 0;
    BigInt q = 1;
    std::vector<Word> words;
};

Word circular_op(const std::vector<Word>& tuple, int64_t p, int64_t q, int64_t l);

struct ReadabilityWitness {
    size_t u = 0, v = 0, w = 0;
    size_t offset = 0;
};
struct ReadabilityResult {
    bool readable = true;
    std::optional<ReadabilityWitness> witness;
};
ReadabilityResult unique_readability_check(const std::vector<Word>& family);
// Whether readability of C-words of the tuples in P follows from the circular structure: needs q < l/2,
// and at q = 1 (no e-runs to anchor blocks) also P itself readable as words over the tuple letters.
bool readability_guaranteed(const BigInt& q, int64_t l, const std::vector<std::vector<int>>& P);

struct ConstructionSequence {
    Alphabet alphabet;
    std::vector<StageParams> params;                       // params[n] for stage n
    std::vector<WordFamily> stages;                        // W_n (words empty when not materialized)
    std::vector<std::vector<std::vector<int>>> prescriptions;  // prescriptions[n] = P_{n+1}
    bool materialized(size_t n) const { return n < stages.size() && !stages[n].words.empty(); }
};

// Build params and word families from prescriptions. Stages whose length exceeds cap are not materialized.
ConstructionSequence build_construction_sequence(const Alphabet& alphabet, const std::vector<int64_t>& k,
                                                 const std::vector<int64_t>& l,
                                                 const std::vector<std::vector<std::vector<int>>>& prescriptions,
                                                 int64_t cap = 2000000);

struct UniformityReport {
    int stage = 0;
    std::vector<std::vector<int64_t>> counts;   // counts[w'][w]: slots of tuple w' holding word w
    std::vector<BigRatio> d;                     // d_n(w)
    BigRatio max_deviation;
    bool strongly_uniform = false;
    int64_t f = 0;                               // common count when strongly uniform
};
UniformityReport uniformity_check(const ConstructionSequence& seq, int n);
nlohmann::json to_json(const UniformityReport& r);

enum class Membership { Yes, No, Indeterminate };
const char* to_string(Membership m);
Membership subshift_member(const Word& window, const ConstructionSequence& seq);

BigRatio empirical_cylinder_frequency(const Word& w, const Word& host);
Word canonical_factor(const Word& x);

size_t count_occurrences(const Word& w, const Word& host);
bool contains(const Word& host, const Word& w);

// Word file: header "# stage n q=<q>", one word per line, space-separated letters.
void write_word_family(std::ostream& os, const WordFamily& fam, const Alphabet& alphabet);
// Unknown base letters are appended to the alphabet when extend is true.
WordFamily read_word_family(std::istream& is, Alphabet& alphabet, bool extend = false);

}  // namespace abc
