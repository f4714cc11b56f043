#include "centaur/prompt.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>

#include "centaur/error.hpp"

namespace centaur {

namespace {

constexpr const char* kQuestion = "Q: Which machine do you choose?\n";
constexpr const char* kAnswer = "A: Machine";
constexpr const char* kAmountGoal = "Your goal is to maximize the amount of received dollars.\n";
constexpr const char* kHistoryHeader = "You made the following observations in the past:\n";

PromptText finish(std::string body) {
    body += kQuestion;
    body += kAnswer;
    PromptText p;
    p.option_token_position = body.size();
    p.text = std::move(body);
    return p;
}

std::string describe_machine(int machine, const GambleOption& option) {
    if (option.outcomes.empty()) throw RenderError("gamble without outcomes");
    std::string line = "Machine " + std::to_string(machine) + " delivers ";
    for (std::size_t i = 0; i < option.outcomes.size(); ++i) {
        const auto& o = option.outcomes[i];
        if (!std::isfinite(o.value) || !std::isfinite(o.probability))
            throw RenderError("non-finite gamble value or probability");
        if (i > 0) line += " and ";
        line += format_currency(o.value) + " dollars with " + format_percent(o.probability) + "% chance";
    }
    return line + ".\n";
}

std::string spelled(int n, bool words) {
    static constexpr std::array<const char*, 11> kWords = {"zero", "one", "two",   "three", "four", "five",
                                                           "six",  "seven", "eight", "nine",  "ten"};
    if (words && n >= 0 && n <= 10) return kWords[static_cast<std::size_t>(n)];
    return std::to_string(n);
}

} // namespace

std::string format_currency(double value) {
    if (!std::isfinite(value)) throw RenderError("non-finite currency value");
    if (value == 0.0) return "0";
    if (value == std::trunc(value) && std::abs(value) < 1e15) {
        return std::to_string(static_cast<long long>(value));
    }
    std::array<char, 64> buf{};
    const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), value, std::chars_format::fixed);
    return std::string(buf.data(), res.ptr);
}

std::string format_percent(double probability) {
    if (!std::isfinite(probability)) throw RenderError("non-finite probability");
    std::array<char, 64> buf{};
    std::snprintf(buf.data(), buf.size(), "%.1f", probability * 100.0);
    return buf.data();
}

PromptText render_choices13k(const GambleOption& option1, const GambleOption& option2) {
    std::string body = describe_machine(1, option1);
    body += describe_machine(2, option2);
    body += "\n";
    body += kAmountGoal;
    body += "\n";
    return finish(std::move(body));
}

PromptText render_horizon(const HorizonState& state, const RenderOptions& options) {
    if (state.observations.empty()) throw RenderError("horizon prompt needs at least one observation");
    if (state.horizon < 1) throw RenderError("horizon must be at least 1");
    std::string body = kHistoryHeader;
    for (const auto& o : state.observations) {
        if (!std::isfinite(o.reward)) throw RenderError("non-finite reward");
        body += " - Machine " + std::to_string(o.machine) + " delivered " + format_currency(o.reward) + " dollars.\n";
    }
    body += "\nYour goal is to maximize the sum of received dollars within ";
    body += spelled(state.horizon, options.spell_horizon_words);
    body += state.horizon == 1 ? " additional choice.\n" : " additional choices.\n";
    body += "\n";
    return finish(std::move(body));
}

PromptText render_experiential_symbolic(const ExperientialSymbolicTrial& trial) {
    if (trial.e_option_history.empty()) throw RenderError("experiential-symbolic prompt needs a non-empty history");
    std::string body = kHistoryHeader;
    for (int r : trial.e_option_history) body += " - Machine 1 delivered " + std::to_string(r) + " dollars.\n";
    body += "\n";
    body += describe_machine(2, trial.s_option);
    body += "\n";
    body += kAmountGoal;
    body += "\n";
    return finish(std::move(body));
}

PromptText render_prompt(const ChoiceTrial& trial, const RenderOptions& options) {
    if (const auto* d = std::get_if<DescriptionProblem>(&trial.payload)) return render_choices13k(d->option1, d->option2);
    if (const auto* h = std::get_if<HorizonState>(&trial.payload)) return render_horizon(*h, options);
    return render_experiential_symbolic(std::get<ExperientialSymbolicTrial>(trial.payload));
}

} // namespace centaur
