#include <doctest.h>

#include <random>
#include <sstream>

#include "abc/symbolic.hpp"
#include "oracles.hpp"

using namespace abc;

TEST_CASE("circular operator examples") {
    Alphabet A({"a"});
    CHECK(A.render(circular_op({A.word("aa")}, 1, 2, 2)) == "bbaabaae");
    CHECK(A.render(circular_op({A.word("a")}, 1, 1, 2)) == "ba");
    CHECK_THROWS_AS(circular_op({A.word("aaa")}, 1, 2, 2), std::invalid_argument);
    CHECK_THROWS_AS(circular_op({A.word("aa"), A.word("a")}, 1, 2, 2), std::invalid_argument);
}

TEST_CASE("circular operator matches the formula oracle") {
    std::mt19937_64 rng(11);
    for (int t = 0; t < 300; ++t) {
        int64_t q = 1 + rng() % 9, k = 1 + rng() % 4, l = 2 + rng() % 7, p;
        do p = 1 + rng() % q; while (oracle::gcd64(p, q) != 1);
        std::vector<Word> w;
        for (int64_t j = 0; j < k; ++j) w.push_back(oracle::random_word(q, 3, rng));
        REQUIRE(circular_op(w, p, q, l) == oracle::circular(w, p, q, l));
    }
}

TEST_CASE("readability examples") {
    Alphabet A({"a"});
    CHECK(unique_readability_check({A.word("ba")}).readable);
    auto r = unique_readability_check({A.word("aa")});
    CHECK(!r.readable);
    REQUIRE(r.witness);
    CHECK(r.witness->offset == 1);
}

TEST_CASE("readability agrees with brute force on random small families") {
    std::mt19937_64 rng(5);
    int disagreements = 0, unreadable = 0;
    for (int t = 0; t < 400; ++t) {
        size_t n = 1 + rng() % 3, len = 1 + rng() % 5;
        std::vector<Word> fam;
        for (size_t i = 0; i < n; ++i) fam.push_back(oracle::random_word(len, 2, rng));
        const bool want = oracle::readable(fam);
        disagreements += unique_readability_check(fam).readable != want;
        unreadable += !want;
    }
    CHECK(disagreements == 0);
    CHECK(unreadable > 0);
}

TEST_CASE("readability witness is genuine") {
    std::mt19937_64 rng(9);
    for (int t = 0; t < 200; ++t) {
        std::vector<Word> fam;
        for (int i = 0; i < 3; ++i) fam.push_back(oracle::random_word(4, 2, rng));
        auto r = unique_readability_check(fam);
        if (r.readable) continue;
        const auto& w = *r.witness;
        Word uv = fam[w.u];
        uv.insert(uv.end(), fam[w.v].begin(), fam[w.v].end());
        REQUIRE(w.offset > 0);
        REQUIRE(w.offset < fam[w.u].size());
        REQUIRE(Word(uv.begin() + w.offset, uv.begin() + w.offset + fam[w.w].size()) == fam[w.w]);
    }
}

TEST_CASE("q = 1: shifted tuples break readability unless P is readable") {
    // no e-runs at q = 1, so C(1,0) C(1,1) contains C(0,1) one block in
    const std::vector<Word> fam{circular_op({{1}, {0}}, 1, 1, 5), circular_op({{1}, {1}}, 1, 1, 5), circular_op({{0}, {1}}, 1, 1, 5)};
    CHECK(!unique_readability_check(fam).readable);
    CHECK(!oracle::readable(fam));
    CHECK(!readability_guaranteed(1, 5, {{1, 0}, {1, 1}, {0, 1}}));
    // P = {001, 011} is readable over its own letters, and so is its C-image
    CHECK(readability_guaranteed(1, 5, {{0, 0, 1}, {0, 1, 1}}));
    CHECK(unique_readability_check({circular_op({{0}, {0}, {1}}, 1, 1, 5), circular_op({{0}, {1}, {1}}, 1, 1, 5)}).readable);
    CHECK(readability_guaranteed(2, 5, {{1, 0}, {0, 1}}));
    CHECK(!readability_guaranteed(2, 4, {{0, 0, 1}}));
}

TEST_CASE("uniformity") {
    Alphabet A = Alphabet::of_size(2);
    auto good = build_construction_sequence(A, {2}, {2}, {{{0, 1}, {1, 0}}});
    auto ur = uniformity_check(good, 0);
    CHECK(ur.strongly_uniform);
    CHECK(ur.f == 1);
    CHECK(ur.max_deviation == BigRatio(0));

    auto bad = build_construction_sequence(A, {2}, {2}, {{{0, 0}, {1, 0}}});
    auto ub = uniformity_check(bad, 0);
    CHECK(!ub.strongly_uniform);
    CHECK(ub.max_deviation > BigRatio(0));

    Alphabet one = Alphabet::of_size(1);
    auto single = build_construction_sequence(one, {2}, {3}, {{{0, 0}}});
    CHECK(uniformity_check(single, 0).strongly_uniform);
}

TEST_CASE("construction sequence rejects s not dividing k") {
    Alphabet A = Alphabet::of_size(2);
    CHECK_THROWS(build_construction_sequence(A, {3}, {2}, {{{0, 1, 0}, {1, 0, 1}}}));
}

TEST_CASE("subword and frequency helpers") {
    Alphabet A({"a"});
    CHECK(count_occurrences(A.word("a"), A.word("aaaa")) == 4);
    CHECK(empirical_cylinder_frequency(A.word("a"), A.word("aaaa")) == BigRatio(1));
    CHECK(empirical_cylinder_frequency(A.word("b"), A.word("bbaabaae")) == BigRatio(3, 8));
    CHECK(A.render(canonical_factor(A.word("bbaabaae"))) == "bb**b**e");
    CHECK(canonical_factor(A.word("bbbb")) == A.word("bbbb"));
    CHECK(contains(A.word("bbaabaae"), A.word("aab")));
    CHECK(!contains(A.word("bbaabaae"), A.word("ee")));
}

TEST_CASE("subshift membership") {
    Alphabet A = Alphabet::of_size(2);
    auto seq = build_construction_sequence(A, {2, 2}, {2, 4}, {{{0, 1}, {1, 0}}, {{0, 1}, {1, 0}}});
    for (const auto& w : seq.stages[2].words) CHECK(subshift_member(w, seq) == Membership::Yes);
    Word longer = seq.stages[2].words[0];
    longer.insert(longer.end(), seq.stages[2].words[1].begin(), seq.stages[2].words[1].end());
    longer.push_back(0);
    CHECK(subshift_member(longer, seq) == Membership::Indeterminate);
    // "ee" never occurs: e-runs have length < q_1 = 4 ... decided by search
    Membership m = subshift_member(A.word("e e e e e e e e e e e e e e e e"), seq);
    CHECK(m != Membership::Yes);
}

TEST_CASE("frequency of stage-1 words inside stage-2 words") {
    Alphabet A = Alphabet::of_size(2);
    auto seq = build_construction_sequence(A, {2, 2}, {2, 4}, {{{0, 1}, {1, 0}}, {{0, 1}, {1, 0}}});
    const double q1 = seq.params[1].q.get_d(), q2 = seq.params[2].q.get_d(), l1 = 4, s1 = 2;
    // density of w1 inside w2 is (1 - 1/l_1)/s_1; boundary letters account for the slack
    for (const auto& w1 : seq.stages[1].words)
        for (const auto& w2 : seq.stages[2].words) {
            const double got = double(count_occurrences(w1, w2)) * q1 / q2;
            CHECK(std::abs(got - 1 / s1) <= 3 / l1 + 1 / q1);
        }
}

TEST_CASE("word family file round trip") {
    Alphabet A = Alphabet::of_size(2);
    auto seq = build_construction_sequence(A, {2, 2}, {2, 4}, {{{0, 1}, {1, 0}}, {{0, 1}, {1, 0}}});
    std::stringstream ss;
    write_word_family(ss, seq.stages[2], A);
    Alphabet B = Alphabet::of_size(2);
    WordFamily back = read_word_family(ss, B);
    CHECK(back.words == seq.stages[2].words);
    CHECK(back.q == seq.stages[2].q);
    std::stringstream empty;
    CHECK_THROWS(read_word_family(empty, B));
}
