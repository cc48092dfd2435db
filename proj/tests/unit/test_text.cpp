#include <doctest.h>

#include <sstream>

#include "ccsg/text.hpp"
#include "testutil.hpp"

using namespace ccsg;

TEST_CASE("tokenize: edge punctuation becomes separate tokens") {
    auto r = tokenize("Mr. July ordered wires.");
    CHECK(r.tokens == std::vector<std::string>{"mr", ".", "july", "ordered", "wires", "."});
    CHECK_FALSE(r.truncated);

    // multiple trailing marks keep their original order
    CHECK(tokenize("wait...").tokens == std::vector<std::string>{"wait", ".", ".", "."});
    CHECK(tokenize("(wires.)").tokens ==
          std::vector<std::string>{"(", "wires", ".", ")"});
    // interior punctuation stays inside the token
    CHECK(tokenize("don't panic 3.5").tokens ==
          std::vector<std::string>{"don't", "panic", "3.5"});
}

TEST_CASE("tokenize: truncation at L") {
    std::ostringstream text;
    for (int i = 0; i < 200; ++i) text << "w" << i << " ";
    auto r = tokenize(text.str(), 128);
    CHECK(r.tokens.size() == 128);
    CHECK(r.truncated);
}

TEST_CASE("tokenize: empty after normalization") {
    CHECK_THROWS_AS(tokenize("  "), std::invalid_argument);
    CHECK_THROWS_AS(tokenize(""), std::invalid_argument);
}

TEST_CASE("extract_nouns: tag filter") {
    auto store = EmbeddingStore::from_rows({{"cat", {1, 0}}, {"sat", {0, 1}}});
    Statement s;
    s.tokens = {"the", "cat", "sat"};
    s.pos_tags = {"DET", "NOUN", "VERB"};
    CHECK(extract_nouns(s, store) == std::vector<std::size_t>{1});
}

TEST_CASE("extract_nouns: stoplist heuristic without tags") {
    auto store = EmbeddingStore::from_rows({{"cat", {1, 0}}, {"sat", {0, 1}}});
    Statement s;
    s.tokens = {"the", "cat", "sat"};
    CHECK(extract_nouns(s, store) == std::vector<std::size_t>{1, 2});

    Statement all_stop;
    all_stop.tokens = {"the", "of", "and"};
    CHECK(extract_nouns(all_stop, store).empty());

    Statement oov;
    oov.tokens = {"zebra"};  // alphabetic but not in store
    CHECK(extract_nouns(oov, store).empty());
}

TEST_CASE("load_dataset: multichoice expands to a one-true group") {
    auto dir = testutil::temp_dir("text");
    auto path = testutil::write_file(
        dir / "mc.jsonl",
        R"({"id":"q1","question":"Birds can","choices":["fly","melt"],"answer_idx":0})"
        "\n");
    auto groups = load_dataset(path, DatasetFormat::multichoice);
    REQUIRE(groups.size() == 1);
    REQUIRE(groups[0].statements.size() == 2);
    CHECK(groups[0].statements[0].text == "Birds can fly");
    CHECK(groups[0].statements[0].label);
    CHECK(groups[0].statements[1].text == "Birds can melt");
    CHECK_FALSE(groups[0].statements[1].label);
    CHECK(groups[0].group_id == "q1");

    std::size_t true_count = 0;
    for (const auto& s : groups[0].statements) true_count += s.label ? 1 : 0;
    CHECK(true_count == 1);
}

TEST_CASE("load_dataset: statements record passes through") {
    auto dir = testutil::temp_dir("text");
    auto path = testutil::write_file(
        dir / "st.jsonl",
        R"({"id":"s1","text":"fish can swim","label":true,"group":"g1"})"
        "\n");
    auto groups = load_dataset(path, DatasetFormat::statements);
    REQUIRE(groups.size() == 1);
    REQUIRE(groups[0].statements.size() == 1);
    CHECK(groups[0].statements[0].tokens ==
          std::vector<std::string>{"fish", "can", "swim"});
    CHECK(groups[0].statements[0].origin == Origin::golden);
}

TEST_CASE("load_dataset: answer_idx out of range names the record") {
    auto dir = testutil::temp_dir("text");
    auto path = testutil::write_file(
        dir / "bad.jsonl",
        R"({"id":"q9","question":"Pick","choices":["a","b"],"answer_idx":5})"
        "\n");
    CHECK_THROWS_WITH_AS(load_dataset(path, DatasetFormat::multichoice),
                         doctest::Contains("q9"), std::runtime_error);
}

TEST_CASE("load_dataset: duplicate and missing fields") {
    auto dir = testutil::temp_dir("text");
    auto dup = testutil::write_file(
        dir / "dup.jsonl",
        R"({"id":"s1","text":"a b","label":true,"group":"g1"})"
        "\n"
        R"({"id":"s1","text":"c d","label":false,"group":"g1"})"
        "\n");
    CHECK_THROWS_WITH_AS(load_dataset(dup, DatasetFormat::statements),
                         doctest::Contains("duplicate"), std::runtime_error);

    auto missing = testutil::write_file(dir / "miss.jsonl",
                                        R"({"id":"s1","text":"a b","label":true})"
                                        "\n");
    CHECK_THROWS_WITH_AS(load_dataset(missing, DatasetFormat::statements),
                         doctest::Contains("group"), std::runtime_error);

    auto badtags = testutil::write_file(
        dir / "tags.jsonl",
        R"({"id":"s1","text":"a b","label":true,"group":"g1","tags":["NOUN"]})"
        "\n");
    CHECK_THROWS_AS(load_dataset(badtags, DatasetFormat::statements), std::runtime_error);
}

TEST_CASE("save/load round-trip preserves structure") {
    auto dir = testutil::temp_dir("text");
    std::vector<StatementGroup> groups(2);
    groups[0].group_id = "g1";
    {
        Statement s;
        s.id = "a";
        s.text = "fish can swim";
        s.tokens = tokenize(s.text).tokens;
        s.label = true;
        s.group_id = "g1";
        s.pos_tags = {"NOUN", "AUX", "VERB"};
        groups[0].statements.push_back(s);
        s.id = "b";
        s.text = "fish can melt";
        s.tokens = tokenize(s.text).tokens;
        s.label = false;
        groups[0].statements.push_back(s);
    }
    groups[1].group_id = "g2";
    {
        Statement s;
        s.id = "c";
        s.text = "rocks are alive";
        s.tokens = tokenize(s.text).tokens;
        s.label = false;
        s.group_id = "g2";
        s.origin = Origin::cf_neg;
        groups[1].statements.push_back(s);
    }

    auto path = (dir / "roundtrip.jsonl").string();
    save_groups(path, groups, "cafebabecafebabe");
    auto reloaded = load_dataset(path, DatasetFormat::statements);

    REQUIRE(reloaded.size() == groups.size());
    for (std::size_t g = 0; g < groups.size(); ++g) {
        CHECK(reloaded[g].group_id == groups[g].group_id);
        REQUIRE(reloaded[g].statements.size() == groups[g].statements.size());
        for (std::size_t i = 0; i < groups[g].statements.size(); ++i) {
            const auto& x = groups[g].statements[i];
            const auto& y = reloaded[g].statements[i];
            CHECK(x.id == y.id);
            CHECK(x.text == y.text);
            CHECK(x.tokens == y.tokens);
            CHECK(x.label == y.label);
            CHECK(x.group_id == y.group_id);
            CHECK(x.origin == y.origin);
            CHECK(x.pos_tags == y.pos_tags);
        }
    }

    // a second round trip is byte-identical
    auto path2 = (dir / "roundtrip2.jsonl").string();
    save_groups(path2, reloaded, "cafebabecafebabe");
    CHECK(testutil::read_file(path) == testutil::read_file(path2));
}

TEST_CASE("shipped stoplist file matches the embedded list") {
    auto from_file = load_stoplist(std::string(CCSG_SOURCE_DIR) + "/data/stopwords.txt");
    CHECK(from_file == default_stoplist());
    CHECK(default_stoplist().size() >= 140);
    CHECK(default_stoplist().count("the") == 1);
    CHECK(default_stoplist().count("can") == 1);
}
