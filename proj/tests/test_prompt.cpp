#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>
#include <limits>
#include <regex>
#include <sstream>

#include <json.hpp>

#include "centaur/error.hpp"
#include "centaur/prompt.hpp"
#include "centaur/random.hpp"
#include "centaur/trial_io.hpp"
#include "test_support.hpp"

using namespace centaur;
using centaur::testing::gamble;

namespace {

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

std::size_t count_of(const std::string& text, const std::string& needle) {
    std::size_t n = 0;
    for (auto pos = text.find(needle); pos != std::string::npos; pos = text.find(needle, pos + 1)) ++n;
    return n;
}

bool ends_with_completion(const PromptText& p) {
    const std::string tail = "A: Machine";
    return p.text.size() >= tail.size() && p.text.compare(p.text.size() - tail.size(), tail.size(), tail) == 0 &&
           p.option_token_position == p.text.size();
}

// Recovers (value, percent) pairs from the gamble lines of a rendered prompt.
std::vector<std::vector<std::pair<double, double>>> parse_gambles(const std::string& text) {
    std::vector<std::vector<std::pair<double, double>>> machines;
    std::istringstream lines(text);
    std::string line;
    const std::regex outcome(R"((-?[0-9.]+) dollars with ([0-9.]+)% chance)");
    while (std::getline(lines, line)) {
        if (line.rfind("Machine ", 0) != 0) continue;
        std::vector<std::pair<double, double>> outcomes;
        for (std::sregex_iterator it(line.begin(), line.end(), outcome), end; it != end; ++it)
            outcomes.emplace_back(std::stod((*it)[1]), std::stod((*it)[2]));
        machines.push_back(outcomes);
    }
    return machines;
}

} // namespace

TEST_CASE("rendered fixtures match byte for byte") {
    const std::filesystem::path dir = CENTAUR_FIXTURE_DIR "/prompts";
    for (const char* name : {"choices13k", "horizon", "horizon_one", "experiential_symbolic"}) {
        CAPTURE(name);
        const auto trial = nlohmann::json::parse(slurp(dir / (std::string(name) + ".json"))).get<ChoiceTrial>();
        const auto prompt = render_prompt(trial);
        CHECK(prompt.text == slurp(dir / (std::string(name) + ".txt")));
        CHECK(count_of(prompt.text, "Q: Which machine do you choose?") == 1);
        CHECK(ends_with_completion(prompt));
    }
}

TEST_CASE("degenerate single-outcome gamble") {
    const auto p = render_choices13k(gamble({{0, 1.0}}), gamble({{0, 1.0}}));
    CHECK(p.text.find("Machine 1 delivers 0 dollars with 100.0% chance.\n") != std::string::npos);
    CHECK(p.text.find("Machine 2 delivers 0 dollars with 100.0% chance.\n") != std::string::npos);
}

TEST_CASE("non-finite gamble values are rejected") {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(render_choices13k(gamble({{nan, 1.0}}), gamble({{0, 1.0}})), RenderError);
    CHECK_THROWS_AS(render_choices13k(gamble({{1, 0.5}, {INFINITY, 0.5}}), gamble({{0, 1.0}})), RenderError);
}

TEST_CASE("random gambles survive render and re-parse") {
    Rng rng(11);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<GambleOption> options(2);
        for (auto& g : options) {
            const int k = 1 + static_cast<int>(rng.uniform() * 3);
            double left = 1.0;
            for (int i = 0; i < k; ++i) {
                const double value = std::round(rng.uniform() * 200 - 100);
                const double p = i + 1 == k ? left : std::round(rng.uniform() * left * 1000) / 1000;
                left -= p;
                g.outcomes.push_back({value, p});
            }
        }
        const auto parsed = parse_gambles(render_choices13k(options[0], options[1]).text);
        REQUIRE(parsed.size() == 2);
        for (int m = 0; m < 2; ++m) {
            REQUIRE(parsed[m].size() == options[m].outcomes.size());
            for (std::size_t i = 0; i < parsed[m].size(); ++i) {
                CHECK(parsed[m][i].first == options[m].outcomes[i].value);
                CHECK(parsed[m][i].second == doctest::Approx(options[m].outcomes[i].probability * 100).epsilon(1e-9));
            }
        }
    }
}

TEST_CASE("horizon goal line is singular for one remaining choice") {
    HorizonState s;
    s.observations = {{1, 34}, {1, 41}, {2, 57}, {1, 37}};
    s.horizon = 1;
    const auto p = render_horizon(s);
    CHECK(p.text.find("within one additional choice.\n") != std::string::npos);
    s.horizon = 3;
    CHECK(render_horizon(s).text.find("within three additional choices.\n") != std::string::npos);
}

TEST_CASE("horizon prompt needs observations") {
    HorizonState s;
    s.horizon = 6;
    CHECK_THROWS_AS(render_horizon(s), RenderError);
}

TEST_CASE("experiential history lines follow input order") {
    ExperientialSymbolicTrial e;
    e.s_option = gamble({{-1, 0.3}, {1, 0.7}});
    for (int i = 0; i < 40; ++i) e.e_option_history.push_back(i % 3 == 0 ? -1 : 1);
    const auto p = render_experiential_symbolic(e);
    CHECK(count_of(p.text, " - Machine 1 delivered ") == 40);
    CHECK(count_of(p.text, "Machine 2 delivered") == 0);
    std::istringstream lines(p.text);
    std::string line;
    std::size_t i = 0;
    while (std::getline(lines, line)) {
        if (line.rfind(" - Machine 1 delivered ", 0) != 0) continue;
        CHECK(line == " - Machine 1 delivered " + std::to_string(e.e_option_history[i]) + " dollars.");
        ++i;
    }
    CHECK(i == 40);
    CHECK(p.text.find("Machine 2 delivers -1 dollars with 30.0% chance and 1 dollars with 70.0% chance.") !=
          std::string::npos);
    CHECK(ends_with_completion(p));

    e.e_option_history = {1};
    CHECK(count_of(render_experiential_symbolic(e).text, " - Machine 1 delivered ") == 1);
    e.e_option_history.clear();
    CHECK_THROWS_AS(render_experiential_symbolic(e), RenderError);
}

TEST_CASE("number formatting") {
    CHECK(format_currency(90) == "90");
    CHECK(format_currency(-12) == "-12");
    CHECK(format_currency(2.5) == "2.5");
    CHECK(format_percent(0.1) == "10.0");
    CHECK(format_percent(1.0) == "100.0");
}
