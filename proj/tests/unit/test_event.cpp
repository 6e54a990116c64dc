#include <doctest.h>

#include <algorithm>

#include "daclr/errors.hpp"
#include "daclr/event.hpp"
#include "daclr/rng.hpp"

using namespace daclr;

TEST_CASE("mask_structure replaces whole spans with the mask token") {
    CHECK(mask_structure("Alice met Bob in Paris", {"Alice", "Bob"}, {"Paris"}) ==
          "[Mask] met [Mask] in [Mask]");
    CHECK(mask_structure("x happened", {}, {}) == "x happened");
    // longest span first: "New York mayor" wins over "New York"
    CHECK(mask_structure("New York mayor visited New York", {"New York mayor"}, {"New York"}) ==
          "[Mask] visited [Mask]");
}

TEST_CASE("mask_structure skips absent and empty spans") {
    CHECK(mask_structure("Alice met Bob", {"Carol", ""}, {}) == "Alice met Bob");
    CHECK(mask_structure("aa", {"a"}, {}) == "[Mask][Mask]");
}

TEST_CASE("mask_structure never rewrites existing mask tokens") {
    // a span equal to the word inside the token must not match it
    CHECK(mask_structure("the Mask fell", {"Mask"}, {}) == "the [Mask] fell");
    CHECK(mask_structure("the [Mask] fell", {"Mask"}, {}) == "the [Mask] fell");
}

TEST_CASE("mask_structure is idempotent") {
    Rng rng(99);
    const std::vector<std::string> words = {"Alice", "Bob",  "New York", "likes", "2020",
                                            "met",   "Mask", "in",       "x",     "Paris"};
    for (int trial = 0; trial < 200; ++trial) {
        std::string text;
        for (int w = 0; w < 8; ++w) {
            if (!text.empty()) text += ' ';
            text += words[rng.next_below(words.size())];
        }
        std::vector<std::string> participants, attributes;
        for (int s = 0; s < 3; ++s) participants.push_back(words[rng.next_below(words.size())]);
        attributes.push_back(words[rng.next_below(words.size())]);
        std::string once = mask_structure(text, participants, attributes);
        std::string twice = mask_structure(once, participants, attributes);
        CHECK(once == twice);
    }
}

TEST_CASE("view projects the requested field") {
    EventSummary s;
    s.summary = "A met B";
    s.participants = {"Alice"};
    s.attributes = {"Paris"};
    s.structure = "[Mask] met [Mask]";
    CHECK(view(s, ViewKind::Full) == "A met B");
    CHECK(view(s, ViewKind::Sent) == "Alice Paris");
    CHECK(view(s, ViewKind::Struct) == "[Mask] met [Mask]");
}

TEST_CASE("sent view of an entity-free summary is an error") {
    EventSummary s;
    s.summary = "it rained";
    s.structure = "it rained";
    CHECK_THROWS_AS_MESSAGE(view(s, ViewKind::Sent), Error, "EmptyView");
    try {
        view(s, ViewKind::Sent);
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::EmptyView);
    }
}

TEST_CASE("validate_summary reports violations as data") {
    EventSummary good;
    good.summary = "Alice met Bob";
    good.participants = {"Alice", "Bob"};
    good.structure = "[Mask] met [Mask]";
    CHECK(validate_summary(good).ok());

    EventSummary unmasked;
    unmasked.summary = "Alice met Bob";
    unmasked.participants = {"Alice"};
    unmasked.structure = "Alice met [Mask]";
    auto r1 = validate_summary(unmasked);
    REQUIRE_FALSE(r1.ok());
    CHECK(r1.violations.front().find("unmasked participant") != std::string::npos);

    EventSummary dupes;
    dupes.summary = "Bob met Bob";
    dupes.participants = {"Bob", "Bob"};
    dupes.structure = "[Mask] met [Mask]";
    auto r2 = validate_summary(dupes);
    REQUIRE_FALSE(r2.ok());
    CHECK(r2.violations.front().find("duplicate span") != std::string::npos);
}

TEST_CASE("validate_summary rejects malformed mask tokens and empty spans") {
    EventSummary s;
    s.summary = "Alice met Bob";
    s.participants = {"Alice", ""};
    s.structure = "[mask] met [Mask]";
    auto r = validate_summary(s);
    REQUIRE(r.violations.size() == 2);
    CHECK(r.violations[0].find("not exactly [Mask]") != std::string::npos);
    CHECK(r.violations[1].find("empty span") != std::string::npos);
}

TEST_CASE("structure built by mask_structure always validates") {
    Rng rng(7);
    const std::vector<std::string> words = {"Alice", "Bob",   "Paris", "2020", "met",
                                            "in",    "likes", "York",  "New York"};
    for (int trial = 0; trial < 200; ++trial) {
        std::string text;
        for (int w = 0; w < 10; ++w) {
            if (!text.empty()) text += ' ';
            text += words[rng.next_below(words.size())];
        }
        EventSummary s;
        s.summary = text;
        for (int k = 0; k < 2; ++k) {
            std::string span = words[rng.next_below(words.size())];
            if (std::find(s.participants.begin(), s.participants.end(), span) ==
                s.participants.end())
                s.participants.push_back(span);
        }
        std::string attr = "2020";
        if (std::find(s.participants.begin(), s.participants.end(), attr) == s.participants.end())
            s.attributes.push_back(attr);
        s.structure = mask_structure(s.summary, s.participants, s.attributes);
        CHECK(validate_summary(s).ok());
    }
}

TEST_CASE("event summary JSON round trip") {
    EventSummary s;
    s.summary = "Alice met Bob in Paris";
    s.participants = {"Alice", "Bob"};
    s.attributes = {"Paris"};
    s.structure = "[Mask] met [Mask] in [Mask]";
    CHECK(deserialize_summary(serialize_summary(s)) == s);

    CHECK_THROWS_AS(deserialize_summary("not json"), Error);
    CHECK_THROWS_AS(deserialize_summary("{\"summary\": 3}"), Error);
}
