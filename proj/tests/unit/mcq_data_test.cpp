#include <doctest.h>

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

#include "cotfaith/error.hpp"
#include "cotfaith/mcq_data.hpp"
#include "support.hpp"

using namespace cotfaith;
using testing::make_dataset;
using testing::make_item;

namespace {

Dataset parse(const std::string& text) {
  std::istringstream in(text);
  return parse_dataset(in, "inline", "memory");
}

std::string error_of(const std::string& text) {
  try {
    parse(text);
  } catch (const DataFault& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_SUITE("mcq_data") {

TEST_CASE("a single record maps its fields directly") {
  const auto d = parse(R"({"id":"q1","question":"2+2?","choices":["3","4","5","6"],"gold":1})" "\n");
  REQUIRE(d.items.size() == 1);
  CHECK(d.items[0].id == "q1");
  CHECK(d.items[0].gold_letter == 'B');
  CHECK(d.items[0].gold_text() == "4");
  CHECK(d.items[0].choices[3] == Choice{'D', "6"});
}

TEST_CASE("gold may also be given as a letter and ids as integers") {
  const auto d = parse(R"({"id":17,"question":"q","choices":["x","y","z"],"gold":"C"})" "\n");
  CHECK(d.items[0].id == "17");
  CHECK(d.items[0].gold_letter == 'C');
}

TEST_CASE("malformed records are rejected with their line number") {
  CHECK(error_of(R"({"id":"q1","question":"2+2?","choices":["3","4","5","6"],"gold":7})")
            .find("gold out of range") != std::string::npos);
  CHECK(error_of("{\"id\":\"a\",\"question\":\"q\",\"choices\":[\"x\",\"y\"],\"gold\":0}\n{oops}\n")
            .find("line 2") != std::string::npos);
  CHECK_FALSE(error_of(R"({"id":"a","question":"q","choices":["x"],"gold":0})").empty());
  CHECK_FALSE(error_of(R"({"id":"a","question":"q","choices":["x","x"],"gold":0})").empty());
  CHECK(error_of("{\"id\":\"a\",\"question\":\"q\",\"choices\":[\"x\",\"y\"],\"gold\":0}\n"
                 "{\"id\":\"a\",\"question\":\"r\",\"choices\":[\"x\",\"y\"],\"gold\":1}\n")
            .find("duplicate") != std::string::npos);
}

TEST_CASE("a 254-record file loads 254 items and round-trips") {
  const Dataset d = make_dataset(254, 5, "aqua");
  const auto dir = testing::scratch_dir("load");
  testing::write_jsonl(dir / "aqua.jsonl", d);
  const Dataset back = load_dataset(dir / "aqua.jsonl");
  CHECK(back.items.size() == 254);
  CHECK(back.name == "aqua");
  CHECK(back.content_hash == d.content_hash);
  CHECK_THROWS_AS(load_dataset(dir / "aqua.jsonl", "csv"), UsageError);
}

TEST_CASE("content hash ignores item order and sees any field change") {
  Dataset d = make_dataset(6, 4);
  std::vector<McqItem> reversed(d.items.rbegin(), d.items.rend());
  CHECK(content_hash(reversed) == d.content_hash);
  d.items[2].choices[1].text += "!";
  CHECK(content_hash(d.items) != d.content_hash);
}

TEST_CASE("sampling keeps small datasets whole and caps large ones") {
  const Dataset small = make_dataset(254, 4);
  CHECK(sample_items(small, 500, 1).items.size() == 254);

  const Dataset large = make_dataset(817, 4);
  const Dataset a = sample_items(large, 500, 11);
  const Dataset b = sample_items(large, 500, 11);
  REQUIRE(a.items.size() == 500);
  CHECK(a.content_hash == b.content_hash);
  CHECK(sample_items(large, 500, 12).content_hash != a.content_hash);

  std::map<std::string, std::size_t> position;
  for (std::size_t i = 0; i < large.items.size(); ++i) position[large.items[i].id] = i;
  for (std::size_t i = 1; i < a.items.size(); ++i) {
    CHECK(position[a.items[i - 1].id] < position[a.items[i].id]);
  }
}

TEST_CASE("a two-choice item has only one shuffle") {
  const McqItem item = make_item("two", {"x", "y"}, 0);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto v = shuffle_choices(item, SeedTrace{seed, "two", "same", "shared"});
    CHECK(v.choices[0] == Choice{'A', "y"});
    CHECK(v.choices[1] == Choice{'B', "x"});
    CHECK(v.gold_letter == 'B');
  }
}

TEST_CASE("a fixed seed trace gives a recorded permutation") {
  const McqItem item = make_item("golden", {"w", "x", "y", "z"}, 2);
  const auto v = shuffle_choices(item, SeedTrace{42, "golden", "same", "shared"});
  CHECK(v.permutation == (Permutation{0, 2, 1, 3}));
  CHECK(v.seed_trace == SeedTrace{42, "golden", "same", "shared"});
}

TEST_CASE("the gold letter follows the gold content") {
  const McqItem item = make_item("cap", {"London", "Rome", "Paris", "Madrid"}, 2);
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto v = shuffle_choices(item, SeedTrace{seed, "cap", "same", "shared"});
    CHECK(*v.text_of(v.gold_letter) == "Paris");
  }
}

TEST_CASE("shuffles are non-identity bijections preserving the choice texts") {
  const McqItem item = make_item("m", {"a", "b", "c", "d", "e"}, 4);
  auto sorted = item.texts();
  std::sort(sorted.begin(), sorted.end());
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const SeedTrace trace{seed, "m", "different", "cot"};
    const auto v = shuffle_choices(item, trace);
    CHECK(is_bijection(v.permutation));
    CHECK_FALSE(is_identity(v.permutation));
    std::vector<std::string> texts;
    for (std::size_t p = 0; p < v.choices.size(); ++p) {
      CHECK(v.choices[p].letter == letter_at(p));
      texts.push_back(v.choices[p].text);
    }
    // Text at new position p is the base text at inverse(perm)[p].
    const Permutation inv = inverse(v.permutation);
    for (std::size_t p = 0; p < texts.size(); ++p) CHECK(texts[p] == item.choices[inv[p]].text);
    std::sort(texts.begin(), texts.end());
    CHECK(texts == sorted);
    CHECK(shuffle_choices(item, trace).choices == v.choices);
  }
}

TEST_CASE("three-choice shuffles are uniform over the five non-identity orders") {
  const McqItem item = make_item("u", {"a", "b", "c"}, 0);
  constexpr int kDraws = 10000;
  std::map<Permutation, int> freq;
  for (int s = 0; s < kDraws; ++s) {
    ++freq[shuffle_choices(item, SeedTrace{static_cast<std::uint64_t>(s), "u", "same", "shared"}).permutation];
  }
  CHECK(freq.size() == 5);
  // 3 sigma of a binomial(10000, 1/5) proportion is 0.012.
  for (const auto& [perm, n] : freq) CHECK(std::abs(n / double(kDraws) - 0.2) < 0.012);
}

TEST_CASE("ordering conditions") {
  const McqItem item = make_item("o", {"a", "b", "c", "d"}, 1);
  SUBCASE("original shows the source order to both probes") {
    const auto plan = plan_orderings(item, Condition::original, 5);
    CHECK(plan.nocot.choices == item.choices);
    CHECK(plan.cot.choices == item.choices);
  }
  SUBCASE("same shares one non-identity order") {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      const auto plan = plan_orderings(item, Condition::same, seed);
      CHECK(plan.nocot.choices == plan.cot.choices);
      CHECK_FALSE(is_identity(plan.nocot.permutation));
    }
  }
  SUBCASE("different draws two distinct non-identity orders") {
    for (std::uint64_t seed = 0; seed < 300; ++seed) {
      const auto plan = plan_orderings(item, Condition::different, seed);
      CHECK(plan.nocot.permutation != plan.cot.permutation);
      CHECK_FALSE(is_identity(plan.nocot.permutation));
      CHECK_FALSE(is_identity(plan.cot.permutation));
    }
  }
  SUBCASE("the reshuffled probe never repeats the No-CoT order") {
    for (auto c : {Condition::original, Condition::same, Condition::different}) {
      for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const auto plan = plan_orderings(item, c, seed);
        CHECK(plan.reshuffled.permutation != plan.nocot.permutation);
        CHECK(*plan.reshuffled.text_of(plan.reshuffled.gold_letter) == "b");
      }
    }
  }
  SUBCASE("different needs at least three choices") {
    CHECK_THROWS_AS(plan_orderings(make_item("t", {"x", "y"}, 0), Condition::different, 1),
                    ConditionUnsatisfiable);
    CHECK_NOTHROW(plan_orderings(make_item("t", {"x", "y"}, 0), Condition::same, 1));
  }
}

TEST_CASE("permutation helpers") {
  const Permutation p{2, 0, 1};
  CHECK(compose(p, inverse(p)) == identity_permutation(3));
  CHECK(compose(inverse(p), p) == identity_permutation(3));
  CHECK(compose(p, p) == Permutation{1, 2, 0});
  CHECK_FALSE(is_bijection(Permutation{0, 0, 1}));
  CHECK(condition_from_string(to_string(Condition::different)) == Condition::different);
  CHECK_THROWS(condition_from_string("mixed"));
}

}  // TEST_SUITE
