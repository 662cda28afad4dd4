#include <doctest.h>

#include <cmath>
#include <map>
#include <sstream>

#include "textgan/data.hpp"

using namespace textgan;

TEST_CASE("vocabulary build, frequency order and tie-breaks") {
    Vocabulary v = Vocabulary::build({"a a b"}, 6);
    CHECK(v.size() == 6);
    CHECK(v.token_id("a") == 4);
    CHECK(v.token_id("b") == 5);
    CHECK(v.token_id("zebra") == kUnkId);

    Vocabulary tie = Vocabulary::build({"y x"}, 6);
    CHECK(tie.token_id("x") == 4);  // equal counts: lexicographic order
    CHECK(tie.token_id("y") == 5);

    Vocabulary capped = Vocabulary::build({"c c c b b a"}, 6);
    CHECK(capped.size() == 6);
    CHECK(capped.token_id("c") == 4);
    CHECK(capped.token_id("b") == 5);
    CHECK(capped.token_id("a") == kUnkId);  // dropped by the size cap

    CHECK_THROWS_AS(Vocabulary::build({}, 10), ContractError);
}

TEST_CASE("encode/decode round trip and edge cases") {
    Vocabulary v = Vocabulary::build({"the cat sat on the mat"}, 20);
    std::vector<int> ids = v.encode("the cat sat", 10);
    CHECK(ids.back() == kEosId);
    CHECK(v.decode(ids) == "the cat sat");

    // decode of an all-pad row is the empty sentence
    CHECK(v.decode({kPadId, kPadId, kPadId}) == "");
    CHECK(v.decode({kEosId}) == "");

    // truncation at max_len-1 then eos
    std::vector<int> t = v.encode("the cat sat on the mat", 4);
    CHECK(t.size() == 4);
    CHECK(t[3] == kEosId);
    CHECK(v.decode(t) == "the cat sat");

    // unknown tokens survive as the unk marker
    std::vector<int> u = v.encode("the dog sat", 10);
    CHECK(u[1] == kUnkId);
    CHECK(v.decode(u) == "the <unk> sat");
}

TEST_CASE("synthetic vocabulary round trip") {
    Vocabulary v = Vocabulary::synthetic(100);
    CHECK(v.size() == 100);
    CHECK(v.token(7) == "w7");
    CHECK(v.token_id("w42") == 42);
    CHECK(v.token_id("w100") == kUnkId);
    CHECK(v.decode({5, 9, kEosId}) == "w5 w9");
}

TEST_CASE("sequence batch construction and invariants") {
    SequenceBatch b = SequenceBatch::from_rows({{4, 5, 6}, {7}, {}}, 5);
    CHECK(b.batch == 3);
    CHECK(b.lengths == std::vector<int>{3, 1, 0});
    CHECK(b.at(0, 3) == kEosId);
    CHECK(b.at(1, 1) == kEosId);
    CHECK(b.at(1, 2) == kPadId);
    CHECK(b.at(2, 0) == kEosId);  // empty sentence: eos first
    b.validate(10);

    SequenceBatch full = SequenceBatch::from_rows({{4, 5, 6, 7, 8}}, 5);
    CHECK(full.length(0) == 5);  // no eos when the row is full
    full.validate(10);

    SequenceBatch sub = b.rows({2, 0});
    CHECK(sub.batch == 2);
    CHECK(sub.length(0) == 0);
    CHECK(sub.content_row(1) == std::vector<int>{4, 5, 6});
    sub.validate(10);

    CHECK_THROWS_AS(b.validate(5), IndexError);  // id 7 outside a 5-token vocab
    CHECK_THROWS_AS(SequenceBatch::from_rows({{1, 2, 3, 4, 5, 6}}, 5), ContractError);
}

TEST_CASE("oracle corpora are reproducible and have fixed length") {
    OracleSpec spec;
    spec.seed = 77;
    spec.vocab_size = 50;
    spec.seq_len = 12;
    Oracle a(spec), b(spec);
    SequenceBatch ba = a.generate(20);
    SequenceBatch bb = b.generate(20);
    CHECK(ba.tokens == bb.tokens);
    CHECK(ba.lengths == bb.lengths);
    ba.validate(spec.vocab_size);
    for (int r = 0; r < ba.batch; ++r) {
        CHECK(ba.length(r) == spec.seq_len);
        for (int t = 0; t < spec.seq_len; ++t) CHECK(ba.at(r, t) >= kReservedTokens);
    }

    OracleSpec other = spec;
    other.seed = 78;
    CHECK(Oracle(other).generate(20).tokens != ba.tokens);
}

TEST_CASE("oracle scores its own samples better than noise") {
    OracleSpec spec;
    spec.seed = 5;
    spec.vocab_size = 60;
    spec.seq_len = 10;
    Oracle oracle(spec);
    SequenceBatch own = oracle.generate(40);

    Rng rng(123);
    std::vector<std::vector<int>> noise_rows;
    for (int i = 0; i < 40; ++i) {
        std::vector<int> row;
        for (int t = 0; t < spec.seq_len; ++t) {
            row.push_back(rng.uniform_int(kReservedTokens, spec.vocab_size));
        }
        noise_rows.push_back(std::move(row));
    }
    SequenceBatch noise = SequenceBatch::from_rows(noise_rows, spec.seq_len);

    CHECK(oracle.nll(own) < oracle.nll(noise));
}

TEST_CASE("embedding loader coverage and failure modes") {
    Vocabulary v = Vocabulary::build({"aa bb cc dd ee ff"}, 10);  // 6 regular tokens
    Rng rng(9);

    SUBCASE("full coverage") {
        std::istringstream in(
            "aa 1 0\nbb 0 1\ncc 1 1\ndd 2 0\nee 0 2\nff 2 2\n");
        auto res = load_embeddings(in, v, 2, rng);
        CHECK(res.coverage == doctest::Approx(1.0));
        CHECK(res.table.at(v.token_id("aa"), 0) == doctest::Approx(1.0f));
        CHECK(res.table.at(v.token_id("ff"), 1) == doctest::Approx(2.0f));
    }
    SUBCASE("partial coverage excludes reserved ids from the denominator") {
        std::istringstream in("aa 1 0\nbb 0 1\n");
        auto res = load_embeddings(in, v, 2, rng);
        CHECK(res.coverage == doctest::Approx(2.0 / 6.0));
        // missing tokens got small random values, pad row stays zero
        CHECK(res.table.at(kPadId, 0) == 0.0f);
        bool any_nonzero = false;
        for (int i = 0; i < 2; ++i) any_nonzero |= res.table.at(v.token_id("cc"), i) != 0.0f;
        CHECK(any_nonzero);
    }
    SUBCASE("header line is accepted and checked") {
        std::istringstream in("6 2\naa 1 0\n");
        auto res = load_embeddings(in, v, 2, rng);
        CHECK(res.loaded == 1);
        std::istringstream bad("6 3\naa 1 0\n");
        CHECK_THROWS_WITH_AS(load_embeddings(bad, v, 2, rng), doctest::Contains("line 1"),
                             FormatError);
    }
    SUBCASE("malformed line is reported with its number") {
        std::istringstream in("aa 1 0\nbb 0.1 oops\n");
        CHECK_THROWS_WITH_AS(load_embeddings(in, v, 2, rng), doctest::Contains("line 2"),
                             FormatError);
        std::istringstream wide("aa 1 0 3\n");
        CHECK_THROWS_AS(load_embeddings(wide, v, 2, rng), FormatError);
    }
}

TEST_CASE("batch iterator partitions every epoch") {
    std::vector<std::vector<int>> rows;
    for (int i = 0; i < 10; ++i) rows.push_back({4 + i});
    SequenceBatch data = SequenceBatch::from_rows(rows, 3);

    BatchIterator it(data, 4, 42);
    CHECK(it.batches_per_epoch() == 3);
    SequenceBatch b1 = it.next(), b2 = it.next(), b3 = it.next();
    CHECK(b1.batch == 4);
    CHECK(b2.batch == 4);
    CHECK(b3.batch == 2);

    // Union of one epoch's batches is the original multiset.
    std::map<int, int> seen;
    for (const SequenceBatch* b : {&b1, &b2, &b3}) {
        for (int r = 0; r < b->batch; ++r) seen[b->at(r, 0)]++;
    }
    CHECK(seen.size() == 10);
    for (const auto& [tok, count] : seen) {
        (void)tok;
        CHECK(count == 1);
    }

    // Same seed, same order.
    BatchIterator it2(data, 4, 42);
    CHECK(it2.next().tokens == b1.tokens);

    // skip() fast-forwards to the same stream position.
    BatchIterator it3(data, 4, 42);
    it3.skip(2);
    CHECK(it3.next().tokens == b3.tokens);

    CHECK_THROWS_AS(BatchIterator(data, 0, 1), ContractError);
}
