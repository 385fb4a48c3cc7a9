#include <fstream>
#include <random>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "intentbridge/recommender.hpp"
#include "support/sample_fixtures.hpp"

namespace ib = intentbridge;

namespace {

const ib::Relation kNeed = ib::relation_from_tag("xNeed");
const ib::Relation kWant = ib::relation_from_tag("xWant");
const ib::Relation kIntent = ib::relation_from_tag("xIntent");
const ib::Relation kAfter = ib::relation_from_tag("isAfter");
const ib::Relation kBefore = ib::relation_from_tag("isBefore");

ib::PromptTemplate with_hint(ib::HintPosition p = ib::HintPosition::after_app_word) {
  ib::PromptTemplate t;
  t.android_hint = true;
  t.hint_position = p;
  return t;
}

}  // namespace

TEST(RecommendationPrompt, SocialTemplate) {
  EXPECT_EQ(ib::build_recommendation_prompt(kNeed, {"to go to the restaurant", "make the reservation"}),
            "The user needs to go to the restaurant and make the reservation by using a popular app called");
  EXPECT_EQ(ib::build_recommendation_prompt(kWant, {"to relax"}), "The user wants to relax by using a popular app called");
  EXPECT_EQ(ib::build_recommendation_prompt(kIntent, {"to make money"}),
            "The user intends to make money by using a popular app called");
}

TEST(RecommendationPrompt, AndroidHint) {
  EXPECT_EQ(ib::build_recommendation_prompt(kNeed, {"to go to the restaurant", "make the reservation"}, with_hint()),
            "The user needs to go to the restaurant and make the reservation by using a popular app in Android phone called");
  EXPECT_EQ(ib::build_recommendation_prompt(kWant, {"to relax"}, with_hint(ib::HintPosition::appended)),
            "The user wants to relax by using a popular app called in Android phone");
}

TEST(RecommendationPrompt, EventTemplate) {
  EXPECT_EQ(ib::build_recommendation_prompt(kAfter, {"PersonX wakes up late"}),
            "PersonX wakes up late. The user can solve this by using a popular app called");
  EXPECT_EQ(ib::build_recommendation_prompt(kBefore, {"drives too fast", "gets a ticket"}, with_hint()),
            "drives too fast and gets a ticket. The user can solve this by using a popular app in Android phone called");
}

TEST(RecommendationPrompt, Errors) {
  try {
    ib::build_recommendation_prompt(ib::relation_from_tag("oEffect"), {"x"});
    FAIL();
  } catch (const ib::Error& e) {
    EXPECT_EQ(e.code(), ib::Errc::unsupported_relation);
  }
  EXPECT_THROW(ib::build_recommendation_prompt(kNeed, {}), ib::Error);
  EXPECT_THROW(ib::build_recommendation_prompt(kNeed, {"  "}), ib::Error);
}

TEST(RecommendationPrompt, ClozeSlotIsLast) {
  std::mt19937 rng(3);
  const std::vector<std::string> words = {"to", "eat", "book", "a", "table", "and", "go", "home", "called"};
  std::uniform_int_distribution<std::size_t> pick(0, words.size() - 1);
  for (int k = 0; k < 300; ++k) {
    std::vector<std::string> intents;
    for (int i = 0; i < 1 + k % 3; ++i) intents.push_back(words[pick(rng)] + " " + words[pick(rng)]);
    for (const auto& r : {kIntent, kNeed, kWant, kAfter, kBefore}) {
      for (const auto& t : {ib::PromptTemplate{}, with_hint()}) {
        const auto p = ib::build_recommendation_prompt(r, intents, t);
        EXPECT_TRUE(ib::text::ends_with(p, " called")) << p;
      }
    }
  }
}

TEST(ExtractAppNames, Examples) {
  EXPECT_EQ(ib::extract_app_names(" OpenTable. It lets you book tables.", false), std::vector<std::string>{"OpenTable"});
  EXPECT_EQ(ib::extract_app_names(" WhatsApp, WeChat and Line", true),
            (std::vector<std::string>{"WhatsApp", "WeChat", "Line"}));
  try {
    ib::extract_app_names("   .", true);
    FAIL();
  } catch (const ib::Error& e) {
    EXPECT_EQ(e.code(), ib::Errc::no_app_found);
  }
}

TEST(ExtractAppNames, Rules) {
  EXPECT_EQ(ib::extract_app_names(" \"Uber\"!", false), std::vector<std::string>{"Uber"});
  EXPECT_EQ(ib::extract_app_names(" Google Maps\nand more text", false), std::vector<std::string>{"Google Maps"});
  EXPECT_EQ(ib::extract_app_names(" Booking.com, Airbnb", true), (std::vector<std::string>{"Booking.com", "Airbnb"}));
  EXPECT_EQ(ib::extract_app_names(" WhatsApp, whatsapp, and Line.", true),
            (std::vector<std::string>{"WhatsApp", "Line"}));
  EXPECT_EQ(ib::extract_app_names(" WhatsApp, WeChat and Line", false), std::vector<std::string>{"WhatsApp"});
  EXPECT_EQ(ib::extract_app_names(" Android and iOS", false), std::vector<std::string>{"Android and iOS"});
  EXPECT_EQ(ib::extract_app_names(" Sandman, Andromeda", true), (std::vector<std::string>{"Sandman", "Andromeda"}));
}

TEST(ExtractAppNames, DropsTrailingDescription) {
  EXPECT_EQ(ib::extract_app_names(" IMDb to pick a film.", false), std::vector<std::string>{"IMDb"});
  EXPECT_EQ(ib::extract_app_names(" Chase Mobile for banking", false), std::vector<std::string>{"Chase Mobile"});
  EXPECT_EQ(ib::extract_app_names(" Venmo, which shows payments", false), std::vector<std::string>{"Venmo"});
  EXPECT_EQ(ib::extract_app_names(" Word (Office)", false), std::vector<std::string>{"Word"});
  EXPECT_EQ(ib::extract_app_names(" Microsoft To Do", false), std::vector<std::string>{"Microsoft To Do"});
  EXPECT_EQ(ib::extract_app_names(" Uber to get there and Lyft", true), (std::vector<std::string>{"Uber", "Lyft"}));
}

TEST(ExtractAppNames, ItemsAreSubstrings) {
  const std::vector<std::string> parts = {"WhatsApp", " ", ",", " and ", "\"", ".", "Line", "  ", "'", "Mint", "\n", "!"};
  std::mt19937 rng(17);
  std::uniform_int_distribution<std::size_t> pick(0, parts.size() - 1);
  for (int k = 0; k < 2000; ++k) {
    std::string s;
    for (int i = 0; i < 1 + k % 9; ++i) s += parts[pick(rng)];
    for (bool multiple : {false, true}) {
      try {
        const auto names = ib::extract_app_names(s, multiple);
        EXPECT_FALSE(names.empty());
        if (!multiple) {
          EXPECT_EQ(names.size(), 1u);
        }
        for (const auto& n : names) {
          EXPECT_FALSE(n.empty());
          EXPECT_NE(ib::text::trim(s).find(n), std::string::npos) << "[" << n << "] not in [" << s << "]";
        }
      } catch (const ib::Error& e) {
        EXPECT_EQ(e.code(), ib::Errc::no_app_found);
      }
    }
  }
}

TEST(MapCategory, Lookup) {
  const auto catalog = ib::testing::sample_catalog();
  EXPECT_EQ(ib::map_category("WhatsApp", catalog), "Communication");
  EXPECT_EQ(ib::map_category("OpenTable", catalog), "Food & Drink");
  EXPECT_EQ(ib::map_category("  opentable ", catalog), "Food & Drink");
  EXPECT_EQ(ib::map_category("Zzzzz-not-an-app", catalog), "Unknown");
  EXPECT_THROW(ib::map_category("", catalog), ib::Error);
}

TEST(AppCatalog, LoadsJsonAndTsv) {
  const auto dir = ::testing::TempDir();
  {
    std::ofstream(dir + "/apps.json") << R"({"WhatsApp": "Communication", "Google  Maps": "Maps & Navigation"})";
    std::ofstream(dir + "/apps.tsv") << "# name\tcategory\nWhatsApp\tCommunication\r\nGoogle Maps\tMaps & Navigation\n";
    std::ofstream(dir + "/bad.tsv") << "WhatsApp Communication\n";
  }
  for (const auto* name : {"/apps.json", "/apps.tsv"}) {
    const auto c = ib::AppCatalog::load(dir + name);
    EXPECT_EQ(c.size(), 2u);
    EXPECT_EQ(c.category_of("whatsapp"), "Communication");
    EXPECT_EQ(c.category_of("google maps"), "Maps & Navigation");
  }
  try {
    ib::AppCatalog::load(dir + "/bad.tsv");
    FAIL();
  } catch (const ib::Error& e) {
    EXPECT_EQ(e.code(), ib::Errc::parse_error);
    EXPECT_EQ(e.line(), 1u);
  }
  try {
    ib::AppCatalog::load(dir + "/missing.json");
    FAIL();
  } catch (const ib::Error& e) {
    EXPECT_NE(std::string(e.what()).find("missing.json"), std::string::npos);
  }
}

TEST(Rationale, Examples) {
  EXPECT_EQ(ib::build_rationale("OpenTable", {"to book a table at the restaurant", "to go to the restaurant"}),
            "OpenTable can help book a table at the restaurant and go to the restaurant.");
  EXPECT_EQ(ib::build_rationale("WhatsApp", {"have a good time"}), "WhatsApp can help have a good time.");
  EXPECT_THROW(ib::build_rationale("X", {""}), ib::Error);
  EXPECT_THROW(ib::build_rationale("X", {}), ib::Error);
  EXPECT_THROW(ib::build_rationale("", {"eat"}), ib::Error);
}

TEST(Recommend, BirthdayRestaurant) {
  const ib::MockBackend mock(ib::testing::birthday_fixtures());
  const auto catalog = ib::testing::sample_catalog();
  const auto set = ib::recommend(ib::Utterance(ib::testing::kBirthdayUtterance), {kNeed}, mock, mock, catalog);
  ASSERT_EQ(set.recommendations.size(), 1u);
  const auto& r = set.recommendations[0];
  EXPECT_EQ(r.app, "OpenTable");
  EXPECT_EQ(r.category, "Food & Drink");
  EXPECT_EQ(r.relation->tag, "xNeed");
  EXPECT_EQ(r.rationale, ib::testing::kBirthdayRationale);
  EXPECT_EQ(r.supporting_intents,
            (std::vector<std::string>{"to book a table at the restaurant", "to go to the restaurant"}));
  EXPECT_TRUE(set.failures.empty());
  ASSERT_EQ(set.trace.size(), 1u);
  EXPECT_EQ(set.trace[0].raw_generations.size(), 1u);
}

TEST(Recommend, PartialFailureKeepsOtherRelations) {
  const ib::MockBackend mock(ib::testing::birthday_fixtures());
  const auto set = ib::recommend(ib::Utterance(ib::testing::kBirthdayUtterance), {kWant, kNeed}, mock, mock,
                                 ib::testing::sample_catalog());
  ASSERT_EQ(set.recommendations.size(), 1u);
  ASSERT_EQ(set.failures.size(), 1u);
  EXPECT_EQ(set.failures[0].relation, "xWant");
  EXPECT_EQ(set.failures[0].code, ib::Errc::fixture_miss);
  ASSERT_EQ(set.trace.size(), 2u);
  EXPECT_EQ(set.trace[0].relation, "xWant");
  EXPECT_TRUE(set.trace[0].failure.has_value());
}

TEST(Recommend, TotalFailureCarriesEveryCause) {
  const ib::MockBackend mock(ib::FixtureTable{});
  const auto relations = ib::default_relations();
  try {
    ib::recommend(ib::Utterance("I am late."), relations, mock, mock, ib::testing::sample_catalog());
    FAIL();
  } catch (const ib::PipelineError& e) {
    ASSERT_EQ(e.causes().size(), relations.size());
    for (std::size_t i = 0; i < relations.size(); ++i) EXPECT_EQ(e.causes()[i].relation, relations[i].tag);
  }
}

TEST(Recommend, RejectsRelationsOutsidePipelineSet) {
  const ib::MockBackend mock(ib::FixtureTable{});
  try {
    ib::recommend(ib::Utterance("x"), {ib::relation_from_tag("oWant")}, mock, mock, ib::testing::sample_catalog());
    FAIL();
  } catch (const ib::Error& e) {
    EXPECT_EQ(e.code(), ib::Errc::unsupported_relation);
  }
}

TEST(Recommend, MultipleContinuationsAndDedup) {
  ib::FixtureTable t;
  t.add_generation("<s> I feel lonely. xWant [GEN] </s>", {"to talk to a friend"});
  t.add_generation("The user wants to talk to a friend by using a popular app called",
                   {" WhatsApp, Line and whatsapp.", " Line", " Messenger"});
  const ib::MockBackend mock(t);
  ib::RecommendConfig cfg;
  cfg.allow_multiple = true;
  cfg.stage2.num_return = 3;
  const auto set = ib::recommend(ib::Utterance("I feel lonely."), {kWant}, mock, mock, ib::testing::sample_catalog(), cfg);
  std::vector<std::string> apps;
  for (const auto& r : set.recommendations) {
    apps.push_back(r.app);
    EXPECT_NE(r.rationale.find(r.app), std::string::npos);
    EXPECT_EQ(r.rationale, r.app + " can help talk to a friend.");
  }
  EXPECT_EQ(apps, (std::vector<std::string>{"WhatsApp", "Line", "Messenger"}));
}

TEST(Recommend, Deterministic) {
  const ib::MockBackend mock(ib::testing::birthday_fixtures());
  const auto catalog = ib::testing::sample_catalog();
  const ib::Utterance u(ib::testing::kBirthdayUtterance);
  const auto first = ib::to_json(ib::recommend(u, {kWant, kNeed}, mock, mock, catalog)).dump();
  for (int i = 0; i < 5; ++i) {
    ib::RecommendConfig cfg;
    cfg.threads = 1 + static_cast<std::size_t>(i);
    EXPECT_EQ(ib::to_json(ib::recommend(u, {kWant, kNeed}, mock, mock, catalog, cfg)).dump(), first);
  }
}

TEST(Recommend, PublicJsonHasExactlyDocumentedFields) {
  const ib::MockBackend mock(ib::testing::birthday_fixtures());
  const auto set = ib::recommend(ib::Utterance(ib::testing::kBirthdayUtterance), {kNeed}, mock, mock,
                                 ib::testing::sample_catalog());
  const auto j = ib::to_json(set.recommendations.at(0));
  std::vector<std::string> keys;
  for (const auto& [k, v] : j.items()) keys.push_back(k);
  EXPECT_EQ(keys, (std::vector<std::string>{"app", "category", "rationale", "relation", "supporting_intents"}));
}
