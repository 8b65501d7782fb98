#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <random>
#include <string>

#include "minform/steps.hpp"

using namespace minform;

namespace {

// Independent segmentation path: mark every left-to-right occurrence of the
// delimiter with a sentinel, then split on sentinels and drop empties.
std::vector<std::string> sentinel_split(std::string text) {
    constexpr char kSentinel = '\x01';
    std::size_t pos = 0;
    while ((pos = text.find("\n\n", pos)) != std::string::npos) {
        text[pos] = kSentinel;
        text.erase(pos + 1, 1);
        pos += 1;
    }
    std::vector<std::string> out;
    std::string current;
    for (char c : text) {
        if (c == kSentinel) {
            if (!current.empty()) out.push_back(current);
            current.clear();
        } else {
            current.push_back(c);
        }
    }
    if (!current.empty()) out.push_back(current);
    return out;
}

ResponseGroup valid_group(int k) {
    ResponseGroup group;
    group.prompt_id = "p0";
    for (int i = 0; i < k; ++i) {
        ResponseTrace trace;
        StepRecord a;
        a.tokens = {1, 2, 3};
        a.raw_process_reward = 0.5;
        a.end_token_index = 2;
        StepRecord b;
        b.tokens = {4, 5};
        b.raw_process_reward = -0.25;
        b.end_token_index = 4;
        trace.steps = {a, b};
        trace.total_tokens = 5;
        group.responses.push_back(std::move(trace));
    }
    return group;
}

}  // namespace

TEST_CASE("split_steps splits at double line breaks") {
    CHECK(split_steps("a\n\nb\n\nc") == std::vector<std::string>{"a", "b", "c"});
    CHECK(split_steps("single step no delimiter") ==
          std::vector<std::string>{"single step no delimiter"});
    CHECK(split_steps("").empty());
}

TEST_CASE("split_steps drops empty segments and trailing delimiters") {
    CHECK(split_steps("a\n\n\n\nb") == std::vector<std::string>{"a", "b"});
    CHECK(split_steps("a\n\n") == std::vector<std::string>{"a"});
    CHECK(split_steps("\n\na") == std::vector<std::string>{"a"});
    CHECK(split_steps("\n\n\n\n").empty());
    // exactly two newlines delimit; the third belongs to the next step
    CHECK(split_steps("a\n\n\nb") == std::vector<std::string>{"a", "\nb"});
    // single newlines are not delimiters
    CHECK(split_steps("a\nb") == std::vector<std::string>{"a\nb"});
}

TEST_CASE("split_steps is idempotent on its own outputs") {
    std::mt19937_64 rng(41);
    const std::string alphabet = "ab\ncd";
    for (int trial = 0; trial < 200; ++trial) {
        std::string text;
        for (std::size_t i = 0, len = 1 + rng() % 24; i < len; ++i) {
            text.push_back(alphabet[rng() % alphabet.size()]);
        }
        const auto steps = split_steps(text);
        CHECK(steps == sentinel_split(text));

        std::string joined;
        for (std::size_t i = 0; i < steps.size(); ++i) {
            if (i > 0) joined += "\n\n";
            joined += steps[i];
        }
        CHECK(split_steps(joined) == steps);
    }
}

TEST_CASE("validate_group accepts a well-formed group unchanged") {
    RewardConfig config;
    config.max_tokens = 8;
    const ResponseGroup group = valid_group(8);
    CHECK(validate_group(group, config) == group);
    // idempotent
    CHECK(validate_group(validate_group(group, config), config) ==
          validate_group(group, config));
}

TEST_CASE("validate_group names the offending response") {
    RewardConfig config;
    config.max_tokens = 8;

    ResponseGroup group = valid_group(4);
    group.responses[3].steps[1].end_token_index = 1;  // not increasing
    CHECK_THROWS_WITH_AS(validate_group(group, config),
                         doctest::Contains("response 3"), ValidationError);
}

TEST_CASE("validate_group rejects invariant violations") {
    RewardConfig config;
    config.max_tokens = 8;

    SUBCASE("verifiable reward without ground truth") {
        ResponseGroup group = valid_group(2);
        group.responses[1].verifiable_reward = 1.0;
        CHECK_THROWS_AS(validate_group(group, config), ValidationError);
    }
    SUBCASE("verifiable reward outside {0, +1}") {
        ResponseGroup group = valid_group(2);
        group.has_ground_truth = true;
        group.responses[0].verifiable_reward = 0.5;
        CHECK_THROWS_AS(validate_group(group, config), ValidationError);
    }
    SUBCASE("process reward out of range") {
        ResponseGroup group = valid_group(2);
        group.responses[0].steps[0].raw_process_reward = 1.5;
        CHECK_THROWS_AS(validate_group(group, config), ValidationError);
    }
    SUBCASE("non-finite process reward") {
        ResponseGroup group = valid_group(2);
        group.responses[0].steps[0].raw_process_reward =
            std::numeric_limits<double>::quiet_NaN();
        CHECK_THROWS_AS(validate_group(group, config), ValidationError);
    }
    SUBCASE("total_tokens mismatch") {
        ResponseGroup group = valid_group(2);
        group.responses[0].total_tokens = 7;
        CHECK_THROWS_AS(validate_group(group, config), ValidationError);
    }
    SUBCASE("response longer than the cap") {
        RewardConfig tight = config;
        tight.max_tokens = 4;
        CHECK_THROWS_AS(validate_group(valid_group(2), tight), ValidationError);
    }
}

TEST_CASE("validate_group marks responses at the cap truncated") {
    RewardConfig config;
    config.max_tokens = 5;
    const ResponseGroup validated = validate_group(valid_group(2), config);
    for (const auto& trace : validated.responses) CHECK(trace.truncated);
}

TEST_CASE("validate_group accepts the 0-step response") {
    RewardConfig config;
    ResponseGroup group;
    group.prompt_id = "empty";
    group.responses.push_back(ResponseTrace{});
    CHECK(validate_group(group, config) == group);
}
