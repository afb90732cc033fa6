#pragma once

#include <map>
#include <span>
#include <string>
#include <string_view>

namespace benchsynth::prompts {

enum class Difficulty { kEasier, kEqual, kHarder };

std::string_view to_string(Difficulty d);
Difficulty parse_difficulty(std::string_view s);

// Replaces {key} for every key in `values`. Braces that do not name a key are
// left alone, since several templates contain literal braces.
std::string render(std::string_view tmpl, const std::map<std::string, std::string>& values);

std::string mutation(Difficulty d, std::string_view question);
std::string crossover(std::span<const std::string> questions);
std::string solution(std::string_view problem);

struct Attempt {
  std::string solution;  // raw model response for that attempt
  std::string output;    // rendered execution output
};
std::string solution_feedback(std::string_view problem, std::span<const Attempt> history);

std::string postprocess(std::string_view question, std::string_view tests);
std::string topic_labeling(std::string_view problem, std::string_view solution);
std::string testtaker(std::string_view problem);

// The "Output Format" section of the solution prompt, example included.
std::string output_format();

}  // namespace benchsynth::prompts
