#pragma once

#include <cstddef>
#include <string>

#include "centaur/task_model.hpp"

namespace centaur {

// Rendered prompt. The text stops at the completion point "A: Machine";
// the option token (" 1" / " 2") would be inserted at option_token_position.
struct PromptText {
    std::string text;
    std::size_t option_token_position = 0;
};

struct RenderOptions {
    // Spell remaining-choice counts as English words ("six"); counts above
    // ten always fall back to numerals.
    bool spell_horizon_words = true;
};

PromptText render_choices13k(const GambleOption& option1, const GambleOption& option2);
PromptText render_horizon(const HorizonState& state, const RenderOptions& options = {});
PromptText render_experiential_symbolic(const ExperientialSymbolicTrial& trial);

// Dispatches on the trial payload.
PromptText render_prompt(const ChoiceTrial& trial, const RenderOptions& options = {});

// "90", "-12", "2.5": integers without decimals, otherwise the shortest
// round-trip decimal form.
std::string format_currency(double value);
// One decimal place, no percent sign: 0.1 -> "10.0".
std::string format_percent(double probability);

} // namespace centaur
