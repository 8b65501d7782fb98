#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "minform/types.hpp"

namespace minform {

// Splits response text into steps at each occurrence of two consecutive
// newline characters. Delimiters are not part of any step and empty segments
// (runs of four or more newlines, or a trailing delimiter) are dropped, so
// "a\n\n\nb" yields {"a", "\nb"} and "" yields {}.
std::vector<std::string> split_steps(std::string_view text);

// Checks every type invariant of the group and returns it with truncated set
// on responses that sit exactly at config.max_tokens. Throws ValidationError
// naming the first offending response otherwise.
ResponseGroup validate_group(ResponseGroup group, const RewardConfig& config);

}  // namespace minform
